#pragma once

// Successive convex linearization for minimal-overlap sphere packing in a
// convex container: the subproblem linearizes each pairwise distance around
// the current centers, and iterates decrease the overlap objective
// monotonically until stationarity.

#include <map>
#include <optional>
#include <string>

#include "opack/conic_solve.hpp"
#include "opack/geometry.hpp"
#include "opack/rng.hpp"

namespace opack {

enum class ObjectiveNorm { L1, L2, LInf };
enum class CoincidentPolicy { ZeroVector, RandomUnit };

// Enclosing shape for the sphere packer; boxes enter as bound constraints.
struct PackContainer {
    enum class Kind { Sphere, Box, Ellipsoid };
    Kind kind = Kind::Sphere;
    Vec center;   // sphere
    double radius = 0.0;
    Vec lo, hi;   // box
    std::optional<Container> ell;

    static PackContainer sphere(const Vec& center, double radius);
    static PackContainer box(const Vec& lo, const Vec& hi);
    static PackContainer ellipsoid(const Container& c);

    int dim() const;
    double max_extent() const; // largest semi-extent, used for default bounds
    // feasible-center set for a sphere of the given radius
    ContainmentSet set_for(double r) const;
};

struct SpherePackProblem {
    int dim = 2;
    std::vector<double> radii;
    PackContainer container;
    ObjectiveNorm objective = ObjectiveNorm::LInf;
    std::optional<double> step_bound; // uniform bound on per-center movement
    CoincidentPolicy coincident_policy = CoincidentPolicy::ZeroVector;

    int n() const { return int(radii.size()); }
    void validate() const;
    double effective_step_bound() const; // default: half the largest semi-extent
};

// H over the upper-triangle overlap vector
double objective_value(ObjectiveNorm norm, const std::vector<double>& xi);

struct SpherePackState {
    Mat centers;            // N x dim
    std::vector<double> xi; // upper triangle, pair (i,j) at pair_index(i,j,N)
    double objective = 0.0;
    int iteration = 0;
};

inline int pair_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<double> recompute_xi(const Mat& centers, const std::vector<double>& radii);

SpherePackState make_state(const Mat& centers, const SpherePackProblem& prob);

// Linearized subproblem around the state's centers, with inactive pairs
// (provably zero at any optimum under the step bound) pruned.
struct Subproblem {
    ConicProgram program;
    // decoding metadata
    int center_base = 0;              // first center column, row-major N x dim
    std::vector<int> active_pairs;    // pair indices with xi-bar variables
    std::vector<int> xi_cols;         // column of xi-bar per active pair
    std::vector<Vec> z;               // linearization directions per active pair
    int epigraph_col = -1;            // t column for L2/LInf
};

Subproblem build_subproblem(const SpherePackState& state, const SpherePackProblem& prob,
                            Rng* coincident_rng = nullptr);

struct StepResult {
    SpherePackState next;            // candidate from the subproblem solution
    double subproblem_objective;     // H(xi-bar)
    std::vector<double> xi_bar;      // full upper triangle (pruned pairs zero)
};

StepResult step(const SpherePackState& state, const SpherePackProblem& prob,
                const SolverOptions& solver = SolverOptions{1e-7, 1e-7, 200, 0},
                Rng* coincident_rng = nullptr);

struct PackOptions {
    int max_iter = 300;
    double h_decrease_tol = 1e-8; // relative decrease stop
    double zero_tol = 1e-10;     // absolute no-overlap stop
    // subproblems are degenerate (many ties at the max); 1e-7 is comfortably
    // below every tolerance the packer itself guarantees
    SolverOptions solver{1e-7, 1e-7, 200, 0};
    uint64_t seed = 0; // for the RandomUnit coincident policy
};

struct PackResult {
    SpherePackState state;
    std::vector<double> h_trace; // H(xi^0), H after each adopted step
    std::string termination;     // stationary | zero_overlap | max_iter
    int iterations = 0;
};

// Algorithm: solve the linearized subproblem, adopt while H strictly
// decreases, return the pre-step state on the equality stop. Asserts the
// monotonicity sandwich H(xi^{k+1}) <= H(xi-bar^{k+1}) <= H(xi^k) at runtime.
PackResult pack(const SpherePackProblem& prob, const Mat& init_centers, const PackOptions& opts = {});

// multi-start driver with per-start RNG streams; best result wins, ties by
// start index
struct MultiStartResult {
    PackResult best;
    int best_start = -1;
    std::vector<double> start_objectives;
};

MultiStartResult pack_multi(const SpherePackProblem& prob, int starts, uint64_t seed,
                            const PackOptions& opts = {}, int threads = 0);

// uniform random feasible centers for one start
Mat random_centers(const SpherePackProblem& prob, Rng& rng);

// uniform radius reduction by half the max overlap; requires the LInf norm
std::vector<double> shrink_to_touching(const SpherePackState& state, const SpherePackProblem& prob);

struct NeighborHistogram {
    std::map<int, int> counts; // neighbor count -> frequency
    int spheres_considered = 0;
    bool boundary_filtered = false;
};

NeighborHistogram neighbor_histogram(const SpherePackState& state, const SpherePackProblem& prob,
                                     double touch_tol, bool boundary_filter);

// h(k) = 3k(k+1) + 1
int hexagonal_number(int k);

} // namespace opack
