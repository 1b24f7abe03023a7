#pragma once

// Ellipsoid and container representations plus the S-procedure containment
// LMIs. An ellipsoid is { c + S u : ||u|| <= 1 } with S symmetric positive
// definite; Sigma = S^2 is cached and may dominate S^2 during relaxed solves.

#include <optional>
#include <vector>

#include "opack/cone_program.hpp"
#include "opack/symmat.hpp"

namespace opack {

class Ellipsoid {
  public:
    // exact construction: Sigma = S^2
    Ellipsoid(const Vec& center, const SymMat& shape);
    // relaxed construction: Sigma >= S^2 allowed, flagged
    Ellipsoid(const Vec& center, const SymMat& shape, const SymMat& sigma);

    static Ellipsoid sphere(const Vec& center, double radius);
    // axis-aligned from descending semi-axes
    static Ellipsoid axis_aligned(const Vec& center, const Vec& radii);

    int dim() const { return int(center_.size()); }
    const Vec& center() const { return center_; }
    const SymMat& shape() const { return shape_; }     // S
    const SymMat& sigma() const { return sigma_; }     // Sigma
    bool relaxed() const { return relaxed_; }

    // descending semi-axis lengths (eigenvalues of S)
    Vec semi_axes() const;

    bool contains_point(const Vec& x, double tol = 1e-12) const;

  private:
    Vec center_;
    SymMat shape_, sigma_;
    bool relaxed_ = false;
};

struct AxisSpec {
    Vec radii; // descending, strictly positive

    explicit AxisSpec(const Vec& r);
    int dim() const { return int(radii.size()); }
    double sum() const { return radii.sum(); }
};

struct Container {
    Ellipsoid ellipsoid;

    int dim() const { return ellipsoid.dim(); }
    double max_semi_axis() const { return ellipsoid.semi_axes()[0]; }
    double min_semi_axis() const { return ellipsoid.semi_axes()[ellipsoid.dim() - 1]; }
    double volume() const;
    bool spherical(double tol = 1e-12) const;
};

// ---- containment LMI (S-procedure) ----------------------------------------

// The (2 dim + 1)-square matrix
//   [ -lambda I      0        S_in      ]
//   [     0      lambda-1  (c_in-c)^T   ]
//   [   S_in      c_in-c     -Sigma_out ]
// whose negative semidefiniteness certifies containment of the inner
// ellipsoid in the outer one.
SymMat containment_lmi_matrix(const Ellipsoid& inner, const Container& outer, double lambda);

// feasibility of the LMI over lambda in [0,1] (golden-section on the
// convex function lambda -> lambda_max)
bool containment_feasible(const Ellipsoid& inner, const Container& outer, double tol = 1e-9);

// Shape argument of the LMI emitter: a fixed matrix (spheres, frozen shapes)
// or a free symmetric variable block in svec scaling.
struct ShapeRef {
    bool fixed = true;
    SymMat value;     // when fixed
    int svec_base = -1; // base column of the svec-scaled free block otherwise

    static ShapeRef of(const SymMat& s) { return {true, s, -1}; }
    static ShapeRef var(int base, int dim) { return {false, SymMat(dim), base}; }
};

// Emits the containment LMI into a program under assembly. center_cols are
// the dim free columns of the inner center, lambda_col the multiplier column.
// Returns the base column of the PSD slack block.
int emit_containment(ProgramBuilder& b, const Container& outer, const std::vector<int>& center_cols,
                     const ShapeRef& shape, int lambda_col);

// largest extra radius t such that a sphere of radius r + t at the given
// center stays inside the container (negative when already outside)
double sphere_margin(const Vec& center, double r, const Container& outer);

// ---- feasible-center sets for sphere packing -------------------------------

// Omega_i of the sphere packer: ball (spherical container), box, or the
// general ellipsoidal-container LMI description.
class ContainmentSet {
  public:
    enum class Kind { Ball, Box, Lmi };

    static ContainmentSet ball(const Vec& center, double rho);
    static ContainmentSet box(const Vec& lo, const Vec& hi);
    static ContainmentSet lmi(double radius, const Container& outer);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }

    bool member(const Vec& c, double tol = 1e-9) const;
    // distance-like slack to the boundary (>= 0 inside)
    double boundary_slack(const Vec& c) const;
    // emit the conic constraint "center in Omega" for given center columns
    void emit(ProgramBuilder& b, const std::vector<int>& center_cols) const;
    // Euclidean-ish projection into the set (used to repair initial centers)
    Vec project(const Vec& c) const;

    const Vec& ball_center() const { return q_; }
    double ball_radius() const { return rho_; }

  private:
    Kind kind_ = Kind::Ball;
    int dim_ = 0;
    Vec q_;          // ball center / box lo
    Vec hi_;         // box hi
    double rho_ = 0; // ball radius / sphere radius for LMI
    std::optional<Container> outer_;
};

// Omega for one sphere of the given radius inside an ellipsoidal container:
// a ball when the container is spherical, the LMI description otherwise.
ContainmentSet sphere_containment_set(double radius, const Container& outer);

// ---- reporting helpers ------------------------------------------------------

// relative l2 distance between actual semi-axes and the prescribed spec
double axis_distortion(const Ellipsoid& e, const AxisSpec& spec);

// Lebesgue volume
double volume(const Ellipsoid& e);

} // namespace opack
