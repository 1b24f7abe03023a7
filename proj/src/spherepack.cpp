#include "opack/spherepack.hpp"

#include <cmath>

#include "opack/parallel.hpp"

namespace opack {

PackContainer PackContainer::sphere(const Vec& center, double radius) {
    if (radius <= 0) throw InvalidInput("PackContainer: nonpositive radius");
    PackContainer c;
    c.kind = Kind::Sphere;
    c.center = center;
    c.radius = radius;
    return c;
}

PackContainer PackContainer::box(const Vec& lo, const Vec& hi) {
    if (((hi - lo).array() <= 0.0).any()) throw InvalidInput("PackContainer: empty box");
    PackContainer c;
    c.kind = Kind::Box;
    c.lo = lo;
    c.hi = hi;
    return c;
}

PackContainer PackContainer::ellipsoid(const Container& cont) {
    PackContainer c;
    c.kind = Kind::Ellipsoid;
    c.ell = cont;
    return c;
}

int PackContainer::dim() const {
    switch (kind) {
        case Kind::Sphere: return int(center.size());
        case Kind::Box: return int(lo.size());
        case Kind::Ellipsoid: return ell->dim();
    }
    return 0;
}

double PackContainer::max_extent() const {
    switch (kind) {
        case Kind::Sphere: return radius;
        case Kind::Box: return 0.5 * (hi - lo).maxCoeff();
        case Kind::Ellipsoid: return ell->max_semi_axis();
    }
    return 0.0;
}

ContainmentSet PackContainer::set_for(double r) const {
    switch (kind) {
        case Kind::Sphere: {
            if (r >= radius) throw InfeasibleError("sphere does not fit in the container");
            return ContainmentSet::ball(center, radius - r);
        }
        case Kind::Box: {
            Vec l = lo.array() + r, h = hi.array() - r;
            if (((h - l).array() < 0.0).any()) throw InfeasibleError("sphere does not fit in the box");
            return ContainmentSet::box(l, h);
        }
        case Kind::Ellipsoid: return sphere_containment_set(r, *ell);
    }
    throw InvalidInput("PackContainer: bad kind");
}

void SpherePackProblem::validate() const {
    if (n() < 1) throw InvalidInput("SpherePackProblem: no spheres");
    if (dim != container.dim()) throw InvalidInput("SpherePackProblem: dim mismatch");
    for (double r : radii)
        if (r <= 0) throw InvalidInput("SpherePackProblem: radii must be positive");
    if (step_bound && *step_bound <= 0) throw InvalidInput("SpherePackProblem: step bound must be positive");
}

double SpherePackProblem::effective_step_bound() const {
    return step_bound ? *step_bound : 0.5 * container.max_extent();
}

double objective_value(ObjectiveNorm norm, const std::vector<double>& xi) {
    double v = 0.0;
    switch (norm) {
        case ObjectiveNorm::L1:
            for (double x : xi) v += x;
            return v;
        case ObjectiveNorm::L2:
            for (double x : xi) v += x * x;
            return std::sqrt(v);
        case ObjectiveNorm::LInf:
            for (double x : xi) v = std::max(v, x);
            return v;
    }
    return v;
}

std::vector<double> recompute_xi(const Mat& centers, const std::vector<double>& radii) {
    const int n = int(radii.size());
    std::vector<double> xi(size_t(n) * (n - 1) / 2, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = (centers.row(i) - centers.row(j)).norm();
            xi[pair_index(i, j, n)] = std::max(0.0, radii[i] + radii[j] - d);
        }
    return xi;
}

SpherePackState make_state(const Mat& centers, const SpherePackProblem& prob) {
    prob.validate();
    if (centers.rows() != prob.n() || centers.cols() != prob.dim)
        throw InvalidInput("make_state: centers shape mismatch");
    SpherePackState st;
    st.centers = centers;
    st.xi = recompute_xi(centers, prob.radii);
    st.objective = objective_value(prob.objective, st.xi);
    return st;
}

Subproblem build_subproblem(const SpherePackState& state, const SpherePackProblem& prob,
                            Rng* coincident_rng) {
    prob.validate();
    const int n = prob.n();
    const int d = prob.dim;
    const double bound = prob.effective_step_bound();

    Subproblem sp;
    ProgramBuilder b;
    sp.center_base = b.add_free(n * d);
    auto ccol = [&](int i, int k) { return sp.center_base + i * d + k; };

    // pairs that can possibly overlap after a bounded step
    const double margin = 1e-7 * (1.0 + prob.container.max_extent());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dist = (state.centers.row(i) - state.centers.row(j)).norm();
            if (dist < prob.radii[i] + prob.radii[j] + 2.0 * bound + margin)
                sp.active_pairs.push_back(pair_index(i, j, n));
        }

    // xi-bar variables for active pairs
    for (size_t a = 0; a < sp.active_pairs.size(); ++a) sp.xi_cols.push_back(b.add_nonneg(1));

    // linearized pair constraints
    sp.z.resize(sp.active_pairs.size());
    {
        size_t a = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const int pidx = pair_index(i, j, n);
                if (a >= sp.active_pairs.size() || sp.active_pairs[a] != pidx) continue;
                Vec diff = (state.centers.row(i) - state.centers.row(j)).transpose();
                const double dist = diff.norm();
                Vec z;
                if (dist > 1e-14) {
                    z = diff / dist;
                } else if (prob.coincident_policy == CoincidentPolicy::ZeroVector || !coincident_rng) {
                    z = Vec::Zero(d);
                } else {
                    z = Vec(d);
                    for (int k = 0; k < d; ++k) z[k] = coincident_rng->normal();
                    const double zn = z.norm();
                    z = (zn > 0) ? Vec(z / zn) : Vec::Unit(d, 0);
                }
                sp.z[a] = z;
                // (r_i + r_j) - z^T (c_i - c_j) <= xi_bar
                const int slack = b.add_nonneg(1);
                const int row = b.new_row(prob.radii[i] + prob.radii[j]);
                b.coef(row, sp.xi_cols[a], 1.0);
                for (int k = 0; k < d; ++k) {
                    b.coef(row, ccol(i, k), z[k]);
                    b.coef(row, ccol(j, k), -z[k]);
                }
                b.coef(row, slack, -1.0);
                ++a;
            }
    }

    // containment
    for (int i = 0; i < n; ++i) {
        std::vector<int> cols(d);
        for (int k = 0; k < d; ++k) cols[k] = ccol(i, k);
        prob.container.set_for(prob.radii[i]).emit(b, cols);
    }

    // step bound as second-order cones around the current centers
    if (prob.step_bound) {
        for (int i = 0; i < n; ++i) {
            const int soc = b.add_soc(d + 1);
            int row = b.new_row(*prob.step_bound);
            b.coef(row, soc, 1.0);
            for (int k = 0; k < d; ++k) {
                row = b.new_row(state.centers(i, k));
                b.coef(row, soc + 1 + k, -1.0);
                b.coef(row, ccol(i, k), 1.0);
            }
        }
    }

    // objective epigraph
    switch (prob.objective) {
        case ObjectiveNorm::L1:
            for (int col : sp.xi_cols) b.set_objective(col, 1.0);
            break;
        case ObjectiveNorm::LInf: {
            sp.epigraph_col = b.add_nonneg(1);
            b.set_objective(sp.epigraph_col, 1.0);
            for (int col : sp.xi_cols) {
                const int u = b.add_nonneg(1);
                const int row = b.new_row(0.0);
                b.coef(row, sp.epigraph_col, 1.0);
                b.coef(row, col, -1.0);
                b.coef(row, u, -1.0);
            }
            break;
        }
        case ObjectiveNorm::L2: {
            sp.epigraph_col = b.add_free(1);
            b.set_objective(sp.epigraph_col, 1.0);
            const int soc = b.add_soc(int(sp.xi_cols.size()) + 1);
            int row = b.new_row(0.0);
            b.coef(row, soc, 1.0);
            b.coef(row, sp.epigraph_col, -1.0);
            for (size_t a = 0; a < sp.xi_cols.size(); ++a) {
                row = b.new_row(0.0);
                b.coef(row, soc + 1 + int(a), 1.0);
                b.coef(row, sp.xi_cols[a], -1.0);
            }
            break;
        }
    }

    sp.program = b.build(Sense::Minimize);
    // translate builder ids into layout columns for solution decoding;
    // the center block stays contiguous because frees keep allocation order
    sp.center_base = b.layout_col(sp.center_base);
    for (int& col : sp.xi_cols) col = b.layout_col(col);
    if (sp.epigraph_col >= 0) sp.epigraph_col = b.layout_col(sp.epigraph_col);
    return sp;
}

StepResult step(const SpherePackState& state, const SpherePackProblem& prob, const SolverOptions& solver,
                Rng* coincident_rng) {
    Subproblem sp = build_subproblem(state, prob, coincident_rng);
    const ConicSolution sol = solve(sp.program, solver);
    if (sol.status != SolveStatus::Optimal)
        throw NumericalError(std::string("spherepack step: solver status ") + to_string(sol.status));

    const int n = prob.n();
    const int d = prob.dim;
    StepResult res;
    res.next.centers = Mat(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) res.next.centers(i, k) = sol.primal[sp.center_base + i * d + k];
    res.next.xi = recompute_xi(res.next.centers, prob.radii);
    res.next.objective = objective_value(prob.objective, res.next.xi);
    res.next.iteration = state.iteration + 1;
    // Repair xi-bar to exact subproblem feasibility at the returned centers;
    // the solver meets the pair constraints only to its own tolerance, while
    // the monotonicity sandwich is exact arithmetic on feasible points.
    res.xi_bar.assign(size_t(n) * (n - 1) / 2, 0.0);
    for (size_t a = 0; a < sp.active_pairs.size(); ++a) {
        const int pidx = sp.active_pairs[a];
        res.xi_bar[pidx] = std::max(0.0, sol.primal[sp.xi_cols[a]]);
    }
    {
        size_t a = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const int pidx = pair_index(i, j, n);
                if (a >= sp.active_pairs.size() || sp.active_pairs[a] != pidx) continue;
                const Vec diff = (res.next.centers.row(i) - res.next.centers.row(j)).transpose();
                const double lin = prob.radii[i] + prob.radii[j] - sp.z[a].dot(diff);
                res.xi_bar[pidx] = std::max(res.xi_bar[pidx], lin);
                ++a;
            }
    }
    res.subproblem_objective = objective_value(prob.objective, res.xi_bar);
    return res;
}

PackResult pack(const SpherePackProblem& prob, const Mat& init_centers, const PackOptions& opts) {
    prob.validate();
    Mat centers = init_centers;
    // repair infeasible starts by projection onto the feasible sets
    for (int i = 0; i < prob.n(); ++i) {
        const auto set = prob.container.set_for(prob.radii[i]);
        Vec c = centers.row(i).transpose();
        if (!set.member(c, 1e-9)) centers.row(i) = set.project(c).transpose();
    }
    SpherePackState cur = make_state(centers, prob);
    Rng rng(opts.seed, 0xc01d);

    PackResult out;
    out.h_trace.push_back(cur.objective);
    const double slack = 1e-10 * (1.0 + cur.objective);

    int k = 0;
    for (; k < opts.max_iter; ++k) {
        if (cur.objective <= opts.zero_tol) {
            out.termination = "zero_overlap";
            break;
        }
        StepResult st = step(cur, prob, opts.solver, &rng);
        // the recomputed overlaps never exceed the repaired xi-bar (exact)
        if (st.next.objective > st.subproblem_objective + slack)
            throw NumericalError("spherepack: monotone decrease violated");
        const double decrease = cur.objective - st.subproblem_objective;
        if (decrease < opts.h_decrease_tol * std::max(cur.objective, 1e-30)) {
            // equality stop: the probe is not an adopted iteration
            out.termination = "stationary";
            break; // keep the current iterate
        }
        // adopted step: the sandwich must hold strictly
        if (st.subproblem_objective > cur.objective + slack)
            throw NumericalError("spherepack: monotone decrease violated");
        cur = st.next;
        out.h_trace.push_back(cur.objective);
        if (cur.objective <= opts.zero_tol) {
            out.termination = "zero_overlap";
            ++k;
            break;
        }
    }
    if (out.termination.empty()) out.termination = "max_iter";
    out.state = std::move(cur);
    out.iterations = k;
    return out;
}

Mat random_centers(const SpherePackProblem& prob, Rng& rng) {
    const int d = prob.dim;
    Mat centers(prob.n(), d);
    for (int i = 0; i < prob.n(); ++i) {
        const auto set = prob.container.set_for(prob.radii[i]);
        Vec c(d);
        for (int tries = 0;; ++tries) {
            switch (prob.container.kind) {
                case PackContainer::Kind::Sphere:
                    for (int k = 0; k < d; ++k)
                        c[k] = prob.container.center[k] + prob.container.radius * rng.uniform(-1.0, 1.0);
                    break;
                case PackContainer::Kind::Box:
                    for (int k = 0; k < d; ++k)
                        c[k] = rng.uniform(prob.container.lo[k], prob.container.hi[k]);
                    break;
                case PackContainer::Kind::Ellipsoid: {
                    const auto& e = prob.container.ell->ellipsoid;
                    Vec u(d);
                    for (int k = 0; k < d; ++k) u[k] = rng.uniform(-1.0, 1.0);
                    c = e.center() + e.shape().mat() * u;
                    break;
                }
            }
            if (set.member(c, 0.0)) break;
            if (tries > 200) {
                c = set.project(c);
                break;
            }
        }
        centers.row(i) = c.transpose();
    }
    return centers;
}

MultiStartResult pack_multi(const SpherePackProblem& prob, int starts, uint64_t seed,
                            const PackOptions& opts, int threads) {
    if (starts < 1) throw InvalidInput("pack_multi: need at least one start");
    if (threads <= 0) threads = default_thread_count();
    std::vector<PackResult> results(starts);
    parallel_for(starts, threads, [&](int s) {
        Rng rng(seed, substream(seed, uint64_t(s)));
        const Mat init = random_centers(prob, rng);
        PackOptions local = opts;
        local.seed = substream(seed, 0x5eed0000 + uint64_t(s));
        results[s] = pack(prob, init, local);
    });
    MultiStartResult out;
    out.start_objectives.reserve(starts);
    for (int s = 0; s < starts; ++s) {
        out.start_objectives.push_back(results[s].state.objective);
        if (out.best_start < 0 || results[s].state.objective < out.best.state.objective) {
            out.best = results[s];
            out.best_start = s;
        }
    }
    return out;
}

std::vector<double> shrink_to_touching(const SpherePackState& state, const SpherePackProblem& prob) {
    if (prob.objective != ObjectiveNorm::LInf)
        throw InvalidInput("shrink_to_touching: requires the LInf objective");
    double max_xi = 0.0;
    for (double x : state.xi) max_xi = std::max(max_xi, x);
    std::vector<double> shrunk = prob.radii;
    for (double& r : shrunk) {
        r -= 0.5 * max_xi;
        if (r <= 0) throw InvalidInput("shrink_to_touching: degenerate radius after shrink");
    }
    return shrunk;
}

NeighborHistogram neighbor_histogram(const SpherePackState& state, const SpherePackProblem& prob,
                                     double touch_tol, bool boundary_filter) {
    const int n = prob.n();
    std::vector<char> keep(n, 1);
    if (boundary_filter) {
        for (int i = 0; i < n; ++i) {
            const auto set = prob.container.set_for(prob.radii[i]);
            if (set.boundary_slack(state.centers.row(i).transpose()) <= touch_tol) keep[i] = 0;
        }
    }
    NeighborHistogram h;
    h.boundary_filtered = boundary_filter;
    for (int i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        int count = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dist = (state.centers.row(i) - state.centers.row(j)).norm();
            if (dist <= prob.radii[i] + prob.radii[j] + touch_tol) ++count;
        }
        ++h.counts[count];
        ++h.spheres_considered;
    }
    return h;
}

int hexagonal_number(int k) {
    if (k < 1) throw InvalidInput("hexagonal_number: k must be >= 1");
    return 3 * k * (k + 1) + 1;
}

} // namespace opack
