#pragma once

// Public entry point of the embedded cone solver plus the parametrized-SDP
// sensitivity operations (value function, Lipschitz and continuity probes).

#include <functional>

#include "opack/cone_program.hpp"
#include "opack/ipm.hpp"

namespace opack {

// Solves a spec-format program. Slack-defining equality rows are eliminated
// structurally before the interior-point solve; redundant equality rows are
// pruned by rank-revealing QR (threshold 1e-10). Duals are reported for every
// original row.
ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

// Same, but also exposes the internal solve (iteration trace etc.).
ConicSolution solve_with_internal(const ConicProgram& prog, const SolverOptions& opts,
                                  ipm::InternalSolution* internal_out);

// ---- parametrized families (objective slot) -------------------------------

// A cone program whose objective is an affine function of a symmetric
// parameter matrix C: objective_vector = base_objective + embed(C), where the
// embedding maps entry (i,j) of C onto program coordinates with weights.
struct ObjectiveMapEntry {
    int col;  // program coordinate
    int i, j; // C entry (i >= j acts on both triangles)
    double weight;
};

struct ProgramFamily {
    ConicProgram base;                     // objective field acts as the fixed part
    std::vector<ObjectiveMapEntry> map;    // parameter embedding
    int param_dim = 0;                     // dimension of C

    ConicProgram instantiate(const SymMat& c_param) const;

    // adjoint of the embedding: pulls a primal solution back to C-space,
    // i.e. the gradient of <embed(C), x> with respect to C
    SymMat pullback(const Vec& x) const;
};

// Family in the plain standard form min <C, X> over one PSD block: the
// embedding is the svec identity onto that block.
ProgramFamily standard_form_family(const ConicProgram& base, int psd_block);

constexpr double kNegInfinity = -std::numeric_limits<double>::infinity();

// Value function t(C). Returns -infinity when the program has no feasible
// point (maximize sense) or is unbounded below (minimize sense) — both encode
// the no-overlap convention of the application.
double value_function(const ProgramFamily& family, const SymMat& c_param,
                      const SolverOptions& opts = {});

struct LipschitzProbeResult {
    double max_ratio;  // max |t(C1)-t(C2)| / ||C1-C2|| over sampled pairs
    double bound_beta; // sup ||X(C)||_F over samples (theoretical bound)
};

// Samples objective perturbations of norm <= radius around c0 and compares
// the observed variation of t against the solution-norm bound.
// Requires a strictly feasible dual at c0 (checked).
LipschitzProbeResult lipschitz_probe(const ProgramFamily& family, const SymMat& c0, double radius,
                                     int samples, uint64_t seed, const SolverOptions& opts = {});

struct ContinuityReport {
    std::vector<double> solution_norms;   // ||X(C_k)||_F
    std::vector<double> values;           // t(C_k)
    double final_residual;                // optimality gap of last X against the limit program
    double limit_value;                   // t(C_bar)
};

// Solves the family along a convergent parameter sequence (last entry is the
// limit) and reports boundedness and the optimality residual of the final
// iterate's solution measured against the limit program.
ContinuityReport solution_continuity_probe(const ProgramFamily& family,
                                           const std::vector<SymMat>& c_sequence,
                                           const SolverOptions& opts = {});

} // namespace opack
