#pragma once

// Trust-region successive linearization for min-max-overlap ellipsoid
// packing: pairwise overlaps are measured by SDPs, their duals linearize the
// master problem, and a trust region plus acceptance logic drives the max
// overlap down. Includes the homolog-pair separation penalty extension.

#include <optional>
#include <string>

#include "opack/overlap.hpp"

namespace opack {

struct TrustRegionConfig {
    double eta1 = 0.5, eta2 = 0.9; // active-set thresholds, 0 < eta1 < eta2 < 1
    double c1 = 0.01, c2 = 0.7;    // acceptance fractions, 0 < c1 < c2 < 1
    double phi1 = 0.5, phi2 = 2.0; // radius shrink/expand factors
    double rho0 = 0.0, rho_max = 0.0; // 0: derive from the container
    // trust-region radii as multiples of rho: centers, shapes (Frobenius),
    // lambda (normalized by rho_max since lambda is dimensionless)
    double ratio_c = 1.0, ratio_s = 1.0, ratio_lambda = 0.1;
    double tol1 = 0.005;   // predicted-decrease/radius stop
    double tol2 = 0.0001;  // max-overlap stop, as a fraction of container volume
    int max_iter = 100;
    // masters tolerate a looser gap: the trust-region logic works at 5e-3
    SolverOptions solver{1e-7, 1e-7, 200, 0};

    void validate() const;
};

struct HomologConfig {
    std::vector<std::pair<int, int>> pairs;
    double penalty_c = 100.0;
    double lambda_factor = 1.25; // enclosing-sphere radius multiple, >= 1

    void validate(int n_bodies) const;
};

struct EllipackProblem {
    std::vector<AxisSpec> specs;
    Container container;
    std::optional<HomologConfig> homolog;

    explicit EllipackProblem(const Container& c) : container(c) {}

    int n() const { return int(specs.size()); }
    int dim() const { return container.dim(); }
    void validate() const;
};

// One packed body: multiplier, center, shape and its relaxed square.
struct BodyState {
    double lambda = 0.0;
    Vec c;
    SymMat S;
    SymMat Sigma;
    bool degenerate = false; // sphere spec: S and Sigma are frozen

    Ellipsoid ellipsoid() const { return Ellipsoid(c, S, Sigma); }
};

struct PackingState {
    std::vector<BodyState> bodies;

    int n() const { return int(bodies.size()); }
    // the block of the parameter matrix for body i: [[Sigma_i, c_i],[c_i^T, 1]]
    SymMat c_block(int i) const;
    // squared Frobenius distance between the assembled parameter matrices
    static double c_distance(const PackingState& a, const PackingState& b);
};

// worst violation of the relaxed-formulation constraints at a state
double state_residual(const PackingState& state, const EllipackProblem& prob);

// deterministic random feasible initial state
PackingState init_state(const EllipackProblem& prob, uint64_t seed);

// ---- overlap measurement over all pairs ------------------------------------

struct PairMeasurement {
    std::vector<double> values;           // upper triangle, 0 for non-overlapping
    std::vector<std::optional<DualBlocks>> duals;
    double t_star = 0.0;                  // max(0, max values)
    int overlapping_pairs = 0;
};

PairMeasurement measure_all(const PackingState& state, const EllipackProblem& prob,
                            const SolverOptions& opts = {}, int threads = 1);

// homolog merit term: max over pairs of the enclosing-sphere overlap
double homolog_eta(const PackingState& state, const EllipackProblem& prob);

// F_k: all pairs with value >= eta1 * t_star (contains the eta2 core)
std::vector<int> select_active_set(const PairMeasurement& m, const TrustRegionConfig& cfg);

// ---- master subproblem -------------------------------------------------------

struct MasterBundle {
    ConicProgram program;
    // decode info
    std::vector<int> lambda_cols, c_cols, s_cols, sigma_cols; // -1 for frozen
    int xi_col = -1;
    int eta_col = -1;
    double sigma_bound_included = true;
};

MasterBundle build_master(const PackingState& state, const EllipackProblem& prob,
                          const std::vector<int>& active, const PairMeasurement& m, double rho,
                          const TrustRegionConfig& cfg);

// decode a solved master into a candidate state
PackingState extract_state(const MasterBundle& mb, const ConicSolution& sol, const PackingState& prev,
                           const EllipackProblem& prob);

// predicted decrease: t*_F(C) - r(F, C, M, rho), never negative
double predicted_decrease(double t_star_f, double master_value);

// ---- trust-region iteration ---------------------------------------------------

struct IterateDiagnostics {
    double t_star = 0.0;
    double lambda_pred = 0.0; // predicted decrease
    double rho = 0.0;
    int active_size = 0;
    bool accepted = false;
    double t_star_candidate = 0.0;
    double merit = 0.0, merit_candidate = 0.0; // includes the homolog penalty
    int solver_iterations = 0;
};

struct TrIterateResult {
    PackingState next;
    PairMeasurement next_measurement;
    double next_rho = 0.0;
    bool accepted = false;
    bool stationary = false; // master returned a null step
    IterateDiagnostics diag;
};

TrIterateResult tr_iterate(const PackingState& state, const PairMeasurement& m, double rho,
                           const EllipackProblem& prob, const TrustRegionConfig& cfg,
                           int threads = 1);

struct HistoryRow {
    int iteration;
    double t_star, lambda_pred, rho;
    int active_size;
    bool accepted;
};

struct EllipackResult {
    PackingState state;
    PairMeasurement measurement;
    std::vector<HistoryRow> history;
    std::string termination; // no_overlap | tol1 | tol2 | stationary | max_iter
    int iterations = 0;
};

EllipackResult pack_ellipsoids(const EllipackProblem& prob, const PackingState& init,
                               const TrustRegionConfig& cfg, int threads = 1);

// ---- axis projection reporting ------------------------------------------------

struct ProjectionReport {
    PackingState projected;            // eigenvalues replaced by the prescribed radii
    std::vector<double> distortions;   // per body, relative l2 axis error of the original
    double fraction_above_10_percent = 0.0;
    double t_star_original = 0.0;
    double t_star_projected = 0.0;
};

ProjectionReport project_axes(const PackingState& state, const EllipackProblem& prob,
                              const SolverOptions& opts = {});

} // namespace opack
