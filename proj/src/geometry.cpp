#include "opack/geometry.hpp"

#include <cmath>

namespace opack {

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_dim(int d) {
    if (d != 2 && d != 3) throw InvalidInput("Ellipsoid: dimension must be 2 or 3");
}
} // namespace

Ellipsoid::Ellipsoid(const Vec& center, const SymMat& shape)
    : center_(center), shape_(shape), sigma_(SymMat(Mat(shape.mat() * shape.mat()))) {
    check_dim(dim());
    if (shape_.dim() != dim()) throw InvalidInput("Ellipsoid: shape dim mismatch");
    if (!is_psd(shape_, 0.0) || eig_sym(shape_).values.minCoeff() <= 0.0)
        throw InvalidInput("Ellipsoid: shape matrix must be positive definite");
}

Ellipsoid::Ellipsoid(const Vec& center, const SymMat& shape, const SymMat& sigma)
    : center_(center), shape_(shape), sigma_(sigma) {
    check_dim(dim());
    if (shape_.dim() != dim() || sigma_.dim() != dim()) throw InvalidInput("Ellipsoid: dim mismatch");
    const Mat s2 = shape.mat() * shape.mat();
    relaxed_ = (SymMat(Mat(sigma.mat() - s2)).norm() > 1e-8 * std::max(1.0, sigma.norm()));
    if (!is_psd(SymMat(Mat(sigma.mat() - s2)), 1e-7 * std::max(1.0, sigma.norm())))
        throw InvalidInput("Ellipsoid: sigma must dominate shape^2");
}

Ellipsoid Ellipsoid::sphere(const Vec& center, double radius) {
    if (radius <= 0) throw InvalidInput("Ellipsoid: nonpositive radius");
    return Ellipsoid(center, SymMat(Mat(radius * Mat::Identity(center.size(), center.size()))));
}

Ellipsoid Ellipsoid::axis_aligned(const Vec& center, const Vec& radii) {
    if (radii.minCoeff() <= 0) throw InvalidInput("Ellipsoid: nonpositive semi-axis");
    return Ellipsoid(center, SymMat::diag(radii));
}

Vec Ellipsoid::semi_axes() const { return eig_sym(shape_).values; }

bool Ellipsoid::contains_point(const Vec& x, double tol) const {
    const Vec d = x - center_;
    const double q = d.dot(sigma_.mat().ldlt().solve(d));
    return q <= 1.0 + tol;
}

AxisSpec::AxisSpec(const Vec& r) : radii(r) {
    if (r.size() < 2 || r.size() > 3) throw InvalidInput("AxisSpec: dimension must be 2 or 3");
    for (int i = 0; i < r.size(); ++i) {
        if (r[i] <= 0) throw InvalidInput("AxisSpec: radii must be positive");
        if (i > 0 && r[i] > r[i - 1] + 1e-12) throw InvalidInput("AxisSpec: radii must be descending");
    }
}

double Container::volume() const { return opack::volume(ellipsoid); }

bool Container::spherical(double tol) const {
    const Vec r = ellipsoid.semi_axes();
    return (r[0] - r[dim() - 1]) <= tol * r[0];
}

// ---- containment LMI -------------------------------------------------------

SymMat containment_lmi_matrix(const Ellipsoid& inner, const Container& outer, double lambda) {
    if (inner.dim() != outer.dim()) throw InvalidInput("containment_lmi: dim mismatch");
    const int d = inner.dim();
    const int n = 2 * d + 1;
    Mat m = Mat::Zero(n, n);
    m.topLeftCorner(d, d) = -lambda * Mat::Identity(d, d);
    m(d, d) = lambda - 1.0;
    const Vec dc = inner.center() - outer.ellipsoid.center();
    m.block(d, d + 1, 1, d) = dc.transpose();
    m.block(d + 1, d, d, 1) = dc;
    m.topRightCorner(d, d) = inner.shape().mat();
    m.bottomLeftCorner(d, d) = inner.shape().mat();
    m.bottomRightCorner(d, d) = -outer.ellipsoid.sigma().mat();
    return SymMat(m);
}

namespace {

double lmi_max_eig(const Ellipsoid& inner, const Container& outer, double lambda) {
    return eig_sym(containment_lmi_matrix(inner, outer, lambda)).values[0];
}

// golden-section minimization of a convex scalar function on [lo, hi]
template <class F>
double golden_min(F&& f, double lo, double hi, int iters = 80) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return std::min(f1, f2);
}

} // namespace

bool containment_feasible(const Ellipsoid& inner, const Container& outer, double tol) {
    const double best = golden_min(
        [&](double lam) { return lmi_max_eig(inner, outer, lam); }, 0.0, 1.0);
    return best <= tol * std::max(1.0, outer.ellipsoid.sigma().norm());
}

int emit_containment(ProgramBuilder& b, const Container& outer, const std::vector<int>& center_cols,
                     const ShapeRef& shape, int lambda_col) {
    const int d = outer.dim();
    if (int(center_cols.size()) != d) throw InvalidInput("emit_containment: center column count");
    const double s2 = std::sqrt(2.0);
    // negation of the LMI, required PSD:
    //   [ lambda I     0        -S_in    ]
    //   [    0      1-lambda  (c-c_in)^T ]
    //   [  -S_in     c-c_in   Sigma_out  ]
    AffineMatExpr e(2 * d + 1);
    for (int i = 0; i < d; ++i) e.add_term(i, i, lambda_col, 1.0);
    e.add_constant(d, d, 1.0);
    e.add_term(d, d, lambda_col, -1.0);
    const Vec& oc = outer.ellipsoid.center();
    for (int j = 0; j < d; ++j) {
        e.add_constant(d, d + 1 + j, oc[j]);
        e.add_term(d, d + 1 + j, center_cols[j], -1.0);
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (shape.fixed) {
                e.add_constant(i, d + 1 + j, -shape.value(i, j));
            } else {
                const int col = shape.svec_base + svec_index(d, i, j);
                e.add_term(i, d + 1 + j, col, (i == j) ? -1.0 : -1.0 / s2);
            }
        }
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) e.add_constant(d + 1 + i, d + 1 + j, outer.ellipsoid.sigma()(i, j));
    return e.emit_psd(b);
}

double sphere_margin(const Vec& center, double r, const Container& outer) {
    // bisection on t with the LMI feasibility oracle
    const double scale = outer.max_semi_axis();
    auto fits = [&](double rr) {
        if (rr <= 0) return outer.ellipsoid.contains_point(center);
        return containment_feasible(Ellipsoid::sphere(center, rr), outer);
    };
    if (!fits(r)) {
        // negative margin: shrink until it fits
        double lo = -r, hi = 0.0;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            (fits(r + mid) ? lo : hi) = mid;
        }
        return lo;
    }
    double lo = 0.0, hi = 2.0 * scale;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (fits(r + mid) ? lo : hi) = mid;
    }
    return lo;
}

// ---- ContainmentSet ---------------------------------------------------------

ContainmentSet ContainmentSet::ball(const Vec& center, double rho) {
    if (rho <= 0) throw InfeasibleError("containment set: empty ball");
    ContainmentSet s;
    s.kind_ = Kind::Ball;
    s.dim_ = int(center.size());
    s.q_ = center;
    s.rho_ = rho;
    return s;
}

ContainmentSet ContainmentSet::box(const Vec& lo, const Vec& hi) {
    if (((hi - lo).array() <= 0.0).any()) throw InfeasibleError("containment set: empty box");
    ContainmentSet s;
    s.kind_ = Kind::Box;
    s.dim_ = int(lo.size());
    s.q_ = lo;
    s.hi_ = hi;
    return s;
}

ContainmentSet ContainmentSet::lmi(double radius, const Container& outer) {
    if (radius >= outer.min_semi_axis())
        throw InfeasibleError("containment set: sphere too large for the container");
    ContainmentSet s;
    s.kind_ = Kind::Lmi;
    s.dim_ = outer.dim();
    s.rho_ = radius;
    s.outer_ = outer;
    return s;
}

bool ContainmentSet::member(const Vec& c, double tol) const {
    switch (kind_) {
        case Kind::Ball: return (c - q_).norm() <= rho_ + tol;
        case Kind::Box: return ((c - q_).array() >= -tol).all() && ((hi_ - c).array() >= -tol).all();
        case Kind::Lmi: return containment_feasible(Ellipsoid::sphere(c, rho_), *outer_, std::max(tol, 1e-12));
    }
    return false;
}

double ContainmentSet::boundary_slack(const Vec& c) const {
    switch (kind_) {
        case Kind::Ball: return rho_ - (c - q_).norm();
        case Kind::Box: return std::min((c - q_).minCoeff(), (hi_ - c).minCoeff());
        case Kind::Lmi: return sphere_margin(c, rho_, *outer_);
    }
    return 0.0;
}

void ContainmentSet::emit(ProgramBuilder& b, const std::vector<int>& center_cols) const {
    switch (kind_) {
        case Kind::Ball: {
            // (rho, c - q) in SOC
            const int soc = b.add_soc(dim_ + 1);
            int r = b.new_row(rho_);
            b.coef(r, soc, 1.0);
            for (int i = 0; i < dim_; ++i) {
                r = b.new_row(-q_[i]);
                b.coef(r, soc + 1 + i, 1.0);
                b.coef(r, center_cols[i], -1.0);
            }
            break;
        }
        case Kind::Box: {
            for (int i = 0; i < dim_; ++i) {
                b.add_le({center_cols[i]}, {-1.0}, -q_[i]); // c_i >= lo_i
                b.add_le({center_cols[i]}, {1.0}, hi_[i]);  // c_i <= hi_i
            }
            break;
        }
        case Kind::Lmi: {
            const int lam = b.add_free(1);
            const int d = dim_;
            emit_containment(b, *outer_, center_cols,
                             ShapeRef::of(SymMat(Mat(rho_ * Mat::Identity(d, d)))), lam);
            break;
        }
    }
}

Vec ContainmentSet::project(const Vec& c) const {
    switch (kind_) {
        case Kind::Ball: {
            const Vec d = c - q_;
            const double n = d.norm();
            if (n <= rho_) return c;
            return q_ + d * (rho_ / n);
        }
        case Kind::Box: return c.cwiseMax(q_).cwiseMin(hi_);
        case Kind::Lmi: {
            if (member(c)) return c;
            // pull toward the container center until the LMI is feasible
            const Vec q = outer_->ellipsoid.center();
            double lo = 0.0, hi = 1.0; // hi: fully at the center
            for (int i = 0; i < 60; ++i) {
                const double mid = 0.5 * (lo + hi);
                (member(c + mid * (q - c)) ? hi : lo) = mid;
            }
            return c + hi * (q - c);
        }
    }
    return c;
}

ContainmentSet sphere_containment_set(double radius, const Container& outer) {
    if (radius <= 0) throw InvalidInput("sphere_containment_set: radius must be positive");
    if (radius >= outer.max_semi_axis())
        throw InfeasibleError("sphere_containment_set: sphere cannot fit");
    if (outer.spherical()) {
        const double rho = outer.ellipsoid.semi_axes()[0] - radius;
        if (rho <= 0) throw InfeasibleError("sphere_containment_set: sphere cannot fit");
        return ContainmentSet::ball(outer.ellipsoid.center(), rho);
    }
    return ContainmentSet::lmi(radius, outer);
}

double axis_distortion(const Ellipsoid& e, const AxisSpec& spec) {
    if (e.dim() != spec.dim()) throw InvalidInput("axis_distortion: dim mismatch");
    return (e.semi_axes() - spec.radii).norm() / spec.radii.norm();
}

double volume(const Ellipsoid& e) {
    const double det = e.shape().mat().determinant();
    return e.dim() == 3 ? (4.0 / 3.0) * kPi * det : kPi * det;
}

} // namespace opack
