#pragma once

// Pairwise ellipsoid overlap: the lower-level SDPs measuring the maximum
// trace of an ellipsoid inscribed in an intersection, with the dual blocks
// that drive the upper-level linearization.

#include <optional>

#include "opack/conic_solve.hpp"
#include "opack/geometry.hpp"

namespace opack {

enum class IntersectKind { Disjoint, Touching, Overlapping };

struct IntersectResult {
    IntersectKind kind;
    Vec witness;  // interior point of the intersection (Overlapping only)
    double value; // min over x of max_k (x-c_k)^T Sigma_k^{-1} (x-c_k)
    int newton_steps;
};

// Minimizes the smoothed max of the two defining quadratics by damped Newton
// with continuation down to smoothing 1e-8.
IntersectResult intersect_test(const Ellipsoid& a, const Ellipsoid& b, int max_steps = 100);

// Dual multipliers of the two containment LMIs, in the block layout
//   M_k = [ R_k  r_k  P_k ; r_k^T  p_k  q_k^T ; P_k  q_k  Q_k ],
// plus the multiplier T of the inscribed shape's own PSD constraint.
struct DualBlocks {
    struct Side {
        SymMat R;
        Vec r;
        Mat P; // symmetric by construction
        double p = 0.0;
        Vec q;
        SymMat Q;
        SymMat full; // assembled M_k
    };
    Side side[2];
    SymMat T;

    // worst violation of the dual feasibility identities:
    // M_k >= 0, trace(R_k) = p_k, q_1 + q_2 = 0, I + T - 2P_1 - 2P_2 = 0
    double feasibility_residual() const;
};

struct OverlapReport {
    bool overlapping = false;          // false encodes the NoOverlap marker
    double value = 0.0;                // trace of the inscribed shape
    std::optional<DualBlocks> duals;   // present iff overlapping
    std::optional<Ellipsoid> inscribed;
    double gap = 0.0;                  // primal-dual objective gap
};

// Measures the overlap of two ellipsoids. Disjoint and touching pairs give
// the NoOverlap marker; strictly overlapping pairs are measured by the SDP.
OverlapReport measure_overlap(const Ellipsoid& a, const Ellipsoid& b, const SolverOptions& opts = {});

// closed-form sphere overlap: max(0, (r_a + r_b) - ||c_a - c_b||)
double sphere_overlap(double r_a, double r_b, const Vec& c_a, const Vec& c_b);

// Evaluates the dual linearization
//   p1 + p2 + 2 q1^T c_i + 2 q2^T c_j + <Q1, Sigma_i> + <Q2, Sigma_j>
// at the given parameters; exact at the linearization point.
double linearized_overlap(const DualBlocks& duals, const Vec& c_i, const Vec& c_j, const SymMat& sigma_i,
                          const SymMat& sigma_j);

} // namespace opack
