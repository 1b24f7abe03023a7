#include "opack/overlap.hpp"
#include <cstdlib>
#include <cstdio>

#include <cmath>

namespace opack {

namespace {

struct Quadratic {
    Mat inv_sigma;
    Vec center;
    double eval(const Vec& x) const {
        const Vec d = x - center;
        return d.dot(inv_sigma * d);
    }
    Vec grad(const Vec& x) const { return 2.0 * inv_sigma * (x - center); }
};

} // namespace

IntersectResult intersect_test(const Ellipsoid& a, const Ellipsoid& b, int max_steps) {
    if (a.dim() != b.dim()) throw InvalidInput("intersect_test: dim mismatch");
    const Quadratic qa{a.sigma().mat().inverse(), a.center()};
    const Quadratic qb{b.sigma().mat().inverse(), b.center()};

    IntersectResult res;
    res.newton_steps = 0;

    // certified shortcuts: a point with max(f_a, f_b) < 1 witnesses overlap;
    // disjoint bounding balls certify separation
    const double dist = (a.center() - b.center()).norm();
    const double ra = a.semi_axes()[0], rb = b.semi_axes()[0];
    for (const Vec& cand : {Vec(0.5 * (a.center() + b.center())), a.center(), b.center()}) {
        const double f = std::max(qa.eval(cand), qb.eval(cand));
        if (f < 1.0 - 1e-9) {
            res.kind = IntersectKind::Overlapping;
            res.witness = cand;
            res.value = f; // upper bound on the true minimum
            return res;
        }
    }
    if (dist > ra + rb + 1e-9 * (ra + rb)) {
        res.kind = IntersectKind::Disjoint;
        res.witness = 0.5 * (a.center() + b.center());
        res.value = (dist * dist) / ((ra + rb) * (ra + rb)); // certified lower bound > 1
        return res;
    }

    Vec x = 0.5 * (a.center() + b.center());
    int steps = 0;
    const double mu_final = 1e-8;
    double fx = 0.0;

    // smoothing continuation starts at the scale of the quadratics
    const double f0 = std::max(qa.eval(x), qb.eval(x));
    double mu = std::max(0.25 * (1.0 + f0), 1e-2);
    for (bool last = false; !last;) {
        last = (mu <= mu_final * 1.0000001);
        for (;;) {
            const double f1 = qa.eval(x), f2 = qb.eval(x);
            const double m = std::max(f1, f2);
            const double e1 = std::exp((f1 - m) / mu), e2 = std::exp((f2 - m) / mu);
            const double w1 = e1 / (e1 + e2), w2 = e2 / (e1 + e2);
            fx = m + mu * std::log(e1 + e2);
            const Vec g1 = qa.grad(x), g2 = qb.grad(x);
            const Vec g = w1 * g1 + w2 * g2;
            Mat h = 2.0 * (w1 * qa.inv_sigma + w2 * qb.inv_sigma);
            h += (w1 * g1 * g1.transpose() + w2 * g2 * g2.transpose() - g * g.transpose()) / mu;
            h.diagonal().array() += 1e-13 * (1.0 + h.trace());
            const Vec step = h.ldlt().solve(g);
            // affine-invariant stopping: the Newton decrement handles the
            // 1/mu curvature across the balanced ridge
            const double stage_tol = last ? 4e-14 : 1e-9;
            if (g.dot(step) <= stage_tol * (1.0 + std::abs(fx))) break;
            double t = 1.0;
            double fnew = fx;
            Vec xnew = x;
            for (int ls = 0; ls < 50; ++ls) {
                xnew = x - t * step;
                const double n1 = qa.eval(xnew), n2 = qb.eval(xnew);
                const double nm = std::max(n1, n2);
                fnew = nm + mu * std::log(std::exp((n1 - nm) / mu) + std::exp((n2 - nm) / mu));
                if (fnew <= fx - 1e-4 * t * g.dot(step)) break;
                t *= 0.5;
            }
            x = xnew;
            if (++steps > max_steps) {
                if (std::getenv("OPACK_DUMP_INTERSECT_FAIL")) {
                    std::fprintf(stderr, "intersect fail: mu=%g fx=%.12g\n", mu, fx);
                    std::fprintf(stderr, "ca:");
                    for (int k = 0; k < a.dim(); ++k) std::fprintf(stderr, " %.17g", a.center()[k]);
                    std::fprintf(stderr, "\ncb:");
                    for (int k = 0; k < b.dim(); ++k) std::fprintf(stderr, " %.17g", b.center()[k]);
                    std::fprintf(stderr, "\nSa:");
                    for (int i2 = 0; i2 < a.dim(); ++i2)
                        for (int j2 = 0; j2 < a.dim(); ++j2)
                            std::fprintf(stderr, " %.17g", a.sigma()(i2, j2));
                    std::fprintf(stderr, "\nSb:");
                    for (int i2 = 0; i2 < b.dim(); ++i2)
                        for (int j2 = 0; j2 < b.dim(); ++j2)
                            std::fprintf(stderr, " %.17g", b.sigma()(i2, j2));
                    std::fprintf(stderr, "\n");
                }
                throw NumericalError("intersect_test: Newton did not converge");
            }
            if (fx - fnew <= 1e-15 * (1.0 + std::abs(fx))) break;
        }
        mu = std::max(0.15 * mu, mu_final);
    }

    // remove the smoothing bias at balanced minimizers
    const double value = fx - mu_final * std::log(2.0);
    res.value = value;
    res.newton_steps = steps;
    res.witness = x;
    if (value < 1.0 - 1e-9)
        res.kind = IntersectKind::Overlapping;
    else if (value > 1.0 + 1e-9)
        res.kind = IntersectKind::Disjoint;
    else
        res.kind = IntersectKind::Touching;
    return res;
}

double DualBlocks::feasibility_residual() const {
    const int d = T.dim();
    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
        const EigSym e = eig_sym(side[k].full);
        worst = std::max(worst, -e.values.minCoeff());
        worst = std::max(worst, std::abs(side[k].R.trace() - side[k].p));
    }
    worst = std::max(worst, (side[0].q + side[1].q).cwiseAbs().maxCoeff());
    const Mat resid = Mat::Identity(d, d) + T.mat() - 2.0 * side[0].P - 2.0 * side[1].P;
    worst = std::max(worst, resid.cwiseAbs().maxCoeff());
    return worst;
}

OverlapReport measure_overlap(const Ellipsoid& a, const Ellipsoid& b, const SolverOptions& opts) {
    if (a.dim() != b.dim()) throw InvalidInput("measure_overlap: dim mismatch");
    const int d = a.dim();
    OverlapReport rep;

    const IntersectResult probe = intersect_test(a, b);
    if (probe.kind != IntersectKind::Overlapping) return rep;

    // max trace(S) s.t. the inscribed (c, S) is contained in both ellipsoids
    ProgramBuilder build;
    const int s_block = build.add_psd(d);
    const int c_cols = build.add_free(d);
    const int lam1 = build.add_free(1);
    const int lam2 = build.add_free(1);
    std::vector<int> centers(d);
    for (int i = 0; i < d; ++i) centers[i] = c_cols + i;
    const int slack1 = emit_containment(build, Container{a}, centers, ShapeRef::var(s_block, d), lam1);
    const int slack2 = emit_containment(build, Container{b}, centers, ShapeRef::var(s_block, d), lam2);
    for (int i = 0; i < d; ++i) build.set_objective(s_block + svec_index(d, i, i), 1.0);
    const ConicProgram prog = build.build(Sense::Maximize);

    ConicSolution sol = solve(prog, opts);
    if (sol.status != SolveStatus::Optimal) {
        // deterministic fallback at the report's own contract tolerances
        SolverOptions relaxed = opts;
        relaxed.feas_tol = std::max(relaxed.feas_tol, 1e-7);
        relaxed.gap_tol = std::max(relaxed.gap_tol, 1e-6);
        sol = solve(prog, relaxed);
    }
    if (sol.status != SolveStatus::Optimal) {
        if (const char* dir = std::getenv("OPACK_DUMP_OVERLAP_FAIL"))
            prog.dump(std::string(dir) + "/overlap_fail.coneprog");
        throw NumericalError(std::string("measure_overlap: solver status ") + to_string(sol.status));
    }

    rep.overlapping = true;
    rep.value = sol.objective_value;
    rep.gap = sol.gap;

    // the builder lays out psd blocks first: S block, then the two slacks
    const ConeLayout& L = prog.layout;
    const int s_at = L.psd_offset(0);
    const int m1_at = L.psd_offset(1);
    const int m2_at = L.psd_offset(2);
    (void)slack1;
    (void)slack2;

    SymMat s_shape = smat(sol.primal.segment(s_at, svec_dim(d)));
    // clamp tiny negative eigenvalues before constructing the ellipsoid
    {
        EigSym e = eig_sym(s_shape);
        const double floor_ev = 1e-12 * std::max(1.0, e.values.maxCoeff());
        Vec vals = e.values.cwiseMax(floor_ev);
        s_shape = SymMat(Mat(e.vectors * vals.asDiagonal() * e.vectors.transpose()));
    }
    Vec c_in(d);
    const int c_off = L.free_offset();
    for (int i = 0; i < d; ++i) c_in[i] = sol.primal[c_off + i];
    rep.inscribed = Ellipsoid(c_in, s_shape);

    DualBlocks db;
    db.T = smat(sol.dual_slack.segment(s_at, svec_dim(d)));
    const int n = 2 * d + 1;
    const int offs[2] = {m1_at, m2_at};
    for (int k = 0; k < 2; ++k) {
        const SymMat m = smat(sol.dual_slack.segment(offs[k], svec_dim(n)));
        DualBlocks::Side& s = db.side[k];
        s.full = m;
        s.R = SymMat(Mat(m.mat().topLeftCorner(d, d)));
        s.r = m.mat().block(0, d, d, 1);
        // only P + P^T is pinned by stationarity; report the symmetric part
        const Mat praw = m.mat().topRightCorner(d, d);
        s.P = 0.5 * (praw + praw.transpose());
        s.p = m(d, d);
        s.q = m.mat().block(d + 1, d, d, 1);
        s.Q = SymMat(Mat(m.mat().bottomRightCorner(d, d)));
    }
    rep.duals = std::move(db);
    return rep;
}

double sphere_overlap(double r_a, double r_b, const Vec& c_a, const Vec& c_b) {
    if (r_a <= 0 || r_b <= 0) throw InvalidInput("sphere_overlap: radii must be positive");
    return std::max(0.0, (r_a + r_b) - (c_a - c_b).norm());
}

double linearized_overlap(const DualBlocks& duals, const Vec& c_i, const Vec& c_j, const SymMat& sigma_i,
                          const SymMat& sigma_j) {
    const auto& s1 = duals.side[0];
    const auto& s2 = duals.side[1];
    return s1.p + s2.p + 2.0 * s1.q.dot(c_i) + 2.0 * s2.q.dot(c_j) + inner(s1.Q, sigma_i) +
           inner(s2.Q, sigma_j);
}

} // namespace opack
