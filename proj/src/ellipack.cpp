#include "opack/ellipack.hpp"

#include <cmath>

#include "opack/parallel.hpp"
#include "opack/rng.hpp"

namespace opack {

namespace {

inline int pidx(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> punpack(int idx, int n) {
    for (int i = 0; i < n; ++i) {
        const int count = n - 1 - i;
        if (idx < count) return {i, i + 1 + idx};
        idx -= count;
    }
    throw InvalidInput("pair index out of range");
}

} // namespace

void TrustRegionConfig::validate() const {
    if (!(0 < eta1 && eta1 < eta2 && eta2 < 1)) throw InvalidInput("TrustRegionConfig: eta ordering");
    if (!(0 < c1 && c1 < c2 && c2 < 1)) throw InvalidInput("TrustRegionConfig: c ordering");
    if (!(0 < phi1 && phi1 < 1 && phi2 > 1)) throw InvalidInput("TrustRegionConfig: phi ordering");
    if (ratio_c <= 0 || ratio_s <= 0 || ratio_lambda <= 0)
        throw InvalidInput("TrustRegionConfig: radius ratios must be positive");
    if (tol1 <= 0 || tol2 <= 0 || max_iter < 1) throw InvalidInput("TrustRegionConfig: tolerances");
}

void HomologConfig::validate(int n_bodies) const {
    if (penalty_c < 0) throw InvalidInput("HomologConfig: negative penalty");
    if (lambda_factor < 1.0) throw InvalidInput("HomologConfig: lambda factor must be >= 1");
    std::vector<char> seen(n_bodies, 0);
    for (auto [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= n_bodies || j >= n_bodies || i == j)
            throw InvalidInput("HomologConfig: bad pair index");
        if (seen[i] || seen[j]) throw InvalidInput("HomologConfig: overlapping pairs");
        seen[i] = seen[j] = 1;
    }
}

void EllipackProblem::validate() const {
    if (specs.empty()) throw InvalidInput("EllipackProblem: no bodies");
    for (const AxisSpec& s : specs)
        if (s.dim() != dim()) throw InvalidInput("EllipackProblem: spec dim mismatch");
    if (homolog) homolog->validate(n());
}

SymMat PackingState::c_block(int i) const {
    const BodyState& b = bodies[i];
    const int d = int(b.c.size());
    Mat m(d + 1, d + 1);
    m.topLeftCorner(d, d) = b.Sigma.mat();
    m.block(0, d, d, 1) = b.c;
    m.block(d, 0, 1, d) = b.c.transpose();
    m(d, d) = 1.0;
    return SymMat(m);
}

double PackingState::c_distance(const PackingState& a, const PackingState& b) {
    double t = 0;
    for (int i = 0; i < a.n(); ++i) t += (a.c_block(i) - b.c_block(i)).mat().squaredNorm();
    return std::sqrt(t);
}

double state_residual(const PackingState& state, const EllipackProblem& prob) {
    double worst = 0.0;
    for (int i = 0; i < state.n(); ++i) {
        const BodyState& b = state.bodies[i];
        const int d = int(b.c.size());
        const Vec& r = prob.specs[i].radii;
        const SymMat lmi = containment_lmi_matrix(Ellipsoid(b.c, b.S, b.Sigma), prob.container, b.lambda);
        worst = std::max(worst, eig_sym(lmi).values.maxCoeff());
        Mat cpl(2 * d, 2 * d);
        cpl.topLeftCorner(d, d) = b.Sigma.mat();
        cpl.topRightCorner(d, d) = b.S.mat();
        cpl.bottomLeftCorner(d, d) = b.S.mat();
        cpl.bottomRightCorner(d, d) = Mat::Identity(d, d);
        worst = std::max(worst, -eig_sym(SymMat(cpl)).values.minCoeff());
        const EigSym es = eig_sym(b.S);
        worst = std::max(worst, es.values.maxCoeff() - r[0]);
        worst = std::max(worst, r[d - 1] - es.values.minCoeff());
        worst = std::max(worst, std::abs(b.S.trace() - r.sum()));
        worst = std::max(worst, -b.lambda);
        worst = std::max(worst, b.lambda - 1.0);
    }
    return worst;
}

namespace {

bool spec_degenerate(const AxisSpec& s) {
    return s.radii[0] - s.radii[s.dim() - 1] <= 1e-12 * s.radii[0];
}

std::optional<double> feasible_lambda(const Ellipsoid& body, const Container& outer, double margin) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, bb = 1.0;
    double x1 = bb - phi * (bb - a), x2 = a + phi * (bb - a);
    auto f = [&](double lam) { return eig_sym(containment_lmi_matrix(body, outer, lam)).values.maxCoeff(); };
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < 70; ++i) {
        if (f1 <= f2) {
            bb = x2;
            x2 = x1;
            f2 = f1;
            x1 = bb - phi * (bb - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (bb - a);
            f2 = f(x2);
        }
    }
    const double lam = (f1 <= f2) ? x1 : x2;
    if (std::min(f1, f2) <= -margin) return lam;
    return std::nullopt;
}

} // namespace

PackingState init_state(const EllipackProblem& prob, uint64_t seed) {
    prob.validate();
    const int d = prob.dim();
    const Ellipsoid& cont = prob.container.ellipsoid;
    const double margin = 1e-9 * std::max(1.0, cont.sigma().norm());
    Rng rng(seed, 0xe11);

    const EigSym ce = eig_sym(cont.shape());

    PackingState st;
    st.bodies.resize(prob.n());
    for (int i = 0; i < prob.n(); ++i) {
        const Vec& r = prob.specs[i].radii;
        const double mean = r.sum() / d;
        const SymMat spherical(Mat(mean * Mat::Identity(d, d)));
        const SymMat aligned(Mat(ce.vectors * r.asDiagonal() * ce.vectors.transpose()));
        bool placed = false;
        for (int tries = 0; tries < 400 && !placed; ++tries) {
            Vec u(d);
            do {
                for (int k = 0; k < d; ++k) u[k] = rng.uniform(-1.0, 1.0);
            } while (u.norm() > 1.0);
            const double shrink = 0.8;
            const Vec c = cont.center() + shrink * (cont.shape().mat() * u);
            for (const SymMat& shape : {spherical, aligned}) {
                const Ellipsoid body(c, shape);
                const auto lam = feasible_lambda(body, prob.container, margin);
                if (!lam) continue;
                BodyState& b = st.bodies[i];
                b.lambda = *lam;
                b.c = c;
                b.S = shape;
                b.Sigma = SymMat(Mat(shape.mat() * shape.mat()));
                b.degenerate = spec_degenerate(prob.specs[i]);
                placed = true;
                break;
            }
        }
        if (!placed) throw InfeasibleError("init_state: body cannot be placed in the container");
    }
    return st;
}

PairMeasurement measure_all(const PackingState& state, const EllipackProblem& prob,
                            const SolverOptions& opts, int threads) {
    const int n = state.n();
    PairMeasurement m;
    const int npairs = n * (n - 1) / 2;
    m.values.assign(npairs, 0.0);
    m.duals.assign(npairs, std::nullopt);
    parallel_for(npairs, threads, [&](int idx) {
        const auto [i, j] = punpack(idx, n);
        const OverlapReport rep =
            measure_overlap(state.bodies[i].ellipsoid(), state.bodies[j].ellipsoid(), opts);
        if (rep.overlapping) {
            m.values[idx] = rep.value;
            m.duals[idx] = rep.duals;
        }
    });
    for (int idx = 0; idx < npairs; ++idx) {
        if (m.duals[idx]) ++m.overlapping_pairs;
        m.t_star = std::max(m.t_star, m.values[idx]);
    }
    return m;
}

double homolog_eta(const PackingState& state, const EllipackProblem& prob) {
    if (!prob.homolog) return 0.0;
    double eta = 0.0;
    for (auto [i, j] : prob.homolog->pairs) {
        const double ri = prob.specs[i].radii[0], rj = prob.specs[j].radii[0];
        const double dist = (state.bodies[i].c - state.bodies[j].c).norm();
        eta = std::max(eta, prob.homolog->lambda_factor * (ri + rj) - dist);
    }
    return std::max(0.0, eta);
}

std::vector<int> select_active_set(const PairMeasurement& m, const TrustRegionConfig& cfg) {
    if (m.t_star <= 0) throw InvalidInput("select_active_set: no overlap present");
    std::vector<int> active;
    for (size_t l = 0; l < m.values.size(); ++l)
        if (m.values[l] >= cfg.eta1 * m.t_star && m.duals[l]) active.push_back(int(l));
    return active;
}

MasterBundle build_master(const PackingState& state, const EllipackProblem& prob,
                          const std::vector<int>& active, const PairMeasurement& m, double rho,
                          const TrustRegionConfig& cfg) {
    if (active.empty()) throw InvalidInput("build_master: empty active set");
    prob.validate();
    cfg.validate();
    const int n = prob.n();
    const int d = prob.dim();
    const int sv = svec_dim(d);
    const double s2 = std::sqrt(2.0);
    const double rho_max = cfg.rho_max > 0 ? cfg.rho_max : prob.container.max_semi_axis();

    // Only bodies that can influence the objective get variables: members of
    // active pairs, plus homolog-pair bodies whose separation rows could
    // activate within the trust region. Freezing the rest removes a fully
    // degenerate block from the master without changing its optimal value.
    std::vector<char> involved(n, 0);
    for (int l : active) {
        const auto [i, j] = punpack(l, n);
        involved[i] = involved[j] = 1;
    }
    if (prob.homolog) {
        for (auto [i, j] : prob.homolog->pairs) {
            const double target =
                prob.homolog->lambda_factor * (prob.specs[i].radii[0] + prob.specs[j].radii[0]);
            const double dist = (state.bodies[i].c - state.bodies[j].c).norm();
            if (target - dist >= -2.0 * cfg.ratio_c * rho) involved[i] = involved[j] = 1;
        }
    }

    MasterBundle mb;
    ProgramBuilder b;
    mb.xi_col = b.add_free(1);
    b.set_objective(mb.xi_col, 1.0);

    mb.lambda_cols.assign(n, -1);
    mb.c_cols.assign(n, -1);
    mb.s_cols.assign(n, -1);
    mb.sigma_cols.assign(n, -1);

    for (int i = 0; i < n; ++i) {
        if (!involved[i]) continue;
        const BodyState& body = state.bodies[i];
        const Vec& r = prob.specs[i].radii;
        mb.lambda_cols[i] = b.add_free(1);
        mb.c_cols[i] = b.add_free(d);
        std::vector<int> ccols(d);
        for (int k = 0; k < d; ++k) ccols[k] = mb.c_cols[i] + k;

        if (body.degenerate) {
            emit_containment(b, prob.container, ccols, ShapeRef::of(body.S), mb.lambda_cols[i]);
        } else {
            mb.s_cols[i] = b.add_free(sv);
            mb.sigma_cols[i] = b.add_free(sv);
            emit_containment(b, prob.container, ccols, ShapeRef::var(mb.s_cols[i], d), mb.lambda_cols[i]);

            // coupling [[Sigma, S],[S, I]] >= 0
            AffineMatExpr cpl(2 * d);
            for (int a2 = 0; a2 < d; ++a2)
                for (int b2 = a2; b2 < d; ++b2)
                    cpl.add_term(a2, b2, mb.sigma_cols[i] + svec_index(d, b2, a2),
                                 (a2 == b2) ? 1.0 : 1.0 / s2);
            for (int a2 = 0; a2 < d; ++a2)
                for (int b2 = 0; b2 < d; ++b2)
                    cpl.add_term(a2, d + b2, mb.s_cols[i] + svec_index(d, a2, b2),
                                 (a2 == b2) ? 1.0 : 1.0 / s2);
            for (int a2 = 0; a2 < d; ++a2) cpl.add_constant(d + a2, d + a2, 1.0);
            cpl.emit_psd(b);

            // spectrum bounds r3 I <= S <= r1 I
            AffineMatExpr upper(d), lower(d);
            for (int a2 = 0; a2 < d; ++a2)
                for (int b2 = a2; b2 < d; ++b2) {
                    const int col = mb.s_cols[i] + svec_index(d, b2, a2);
                    const double w = (a2 == b2) ? 1.0 : 1.0 / s2;
                    upper.add_term(a2, b2, col, -w);
                    lower.add_term(a2, b2, col, w);
                }
            for (int a2 = 0; a2 < d; ++a2) {
                upper.add_constant(a2, a2, r[0]);
                lower.add_constant(a2, a2, -r[d - 1]);
            }
            upper.emit_psd(b);
            lower.emit_psd(b);

            // trace pinned to the prescribed sum
            const int row = b.new_row(r.sum());
            for (int a2 = 0; a2 < d; ++a2) b.coef(row, mb.s_cols[i] + svec_index(d, a2, a2), 1.0);

            // Sigma <= r1^2 I keeps the parameter set bounded
            AffineMatExpr sig_ub(d);
            for (int a2 = 0; a2 < d; ++a2)
                for (int b2 = a2; b2 < d; ++b2)
                    sig_ub.add_term(a2, b2, mb.sigma_cols[i] + svec_index(d, b2, a2),
                                    (a2 == b2) ? -1.0 : -1.0 / s2);
            for (int a2 = 0; a2 < d; ++a2) sig_ub.add_constant(a2, a2, r[0] * r[0]);
            sig_ub.emit_psd(b);

            // Frobenius trust regions on S and on Sigma; the parameter matrix
            // of the convergence analysis contains Sigma, so its step must be
            // bounded by rho as well
            const int soc_s = b.add_soc(sv + 1);
            int rowi = b.new_row(cfg.ratio_s * rho);
            b.coef(rowi, soc_s, 1.0);
            const Vec s_now = svec(body.S);
            for (int k = 0; k < sv; ++k) {
                rowi = b.new_row(s_now[k]);
                b.coef(rowi, soc_s + 1 + k, -1.0);
                b.coef(rowi, mb.s_cols[i] + k, 1.0);
            }
            const int soc_sig = b.add_soc(sv + 1);
            rowi = b.new_row(cfg.ratio_s * rho * (2.0 * prob.specs[i].radii[0]));
            b.coef(rowi, soc_sig, 1.0);
            const Vec sig_now = svec(body.Sigma);
            for (int k = 0; k < sv; ++k) {
                rowi = b.new_row(sig_now[k]);
                b.coef(rowi, soc_sig + 1 + k, -1.0);
                b.coef(rowi, mb.sigma_cols[i] + k, 1.0);
            }
        }

        // trust region on the center
        const int soc_c = b.add_soc(d + 1);
        int rowc = b.new_row(cfg.ratio_c * rho);
        b.coef(rowc, soc_c, 1.0);
        for (int k = 0; k < d; ++k) {
            rowc = b.new_row(body.c[k]);
            b.coef(rowc, soc_c + 1 + k, -1.0);
            b.coef(rowc, mb.c_cols[i] + k, 1.0);
        }

        // interval trust region on lambda (dimensionless, normalized radius)
        const double dlam = cfg.ratio_lambda * rho / rho_max;
        b.add_le({mb.lambda_cols[i]}, {1.0}, body.lambda + dlam);
        b.add_le({mb.lambda_cols[i]}, {-1.0}, -(body.lambda - dlam));
    }

    // linearized overlap epigraph rows
    for (int l : active) {
        const auto [i, j] = punpack(l, n);
        const DualBlocks& db = *m.duals[l];
        double rhs = db.side[0].p + db.side[1].p;
        const int bodies[2] = {i, j};
        for (int side = 0; side < 2; ++side)
            if (mb.sigma_cols[bodies[side]] < 0)
                rhs += inner(db.side[side].Q, state.bodies[bodies[side]].Sigma);
        const int slack = b.add_nonneg(1);
        const int row = b.new_row(rhs);
        b.coef(row, mb.xi_col, 1.0);
        b.coef(row, slack, -1.0);
        for (int side = 0; side < 2; ++side) {
            const int bi = bodies[side];
            if (mb.c_cols[bi] >= 0)
                for (int k = 0; k < d; ++k) b.coef(row, mb.c_cols[bi] + k, -2.0 * db.side[side].q[k]);
        }
        for (int side = 0; side < 2; ++side) {
            const int bi = bodies[side];
            if (mb.sigma_cols[bi] >= 0) {
                const Vec qv = svec(db.side[side].Q);
                for (int k = 0; k < sv; ++k) b.coef(row, mb.sigma_cols[bi] + k, -qv[k]);
            }
        }
    }

    // homolog separation: lambda (r_i + r_j) - z^T (c_i - c_j) <= eta
    if (prob.homolog && !prob.homolog->pairs.empty()) {
        mb.eta_col = b.add_nonneg(1);
        b.set_objective(mb.eta_col, prob.homolog->penalty_c);
        for (auto [i, j] : prob.homolog->pairs) {
            const double target =
                prob.homolog->lambda_factor * (prob.specs[i].radii[0] + prob.specs[j].radii[0]);
            Vec diff = state.bodies[i].c - state.bodies[j].c;
            const double dist = diff.norm();
            const Vec z = (dist > 1e-14) ? Vec(diff / dist) : Vec(Vec::Zero(d));
            double rhs = target;
            const int slack = b.add_nonneg(1);
            // frozen bodies contribute their current centers as constants
            if (mb.c_cols[i] < 0) rhs -= z.dot(state.bodies[i].c);
            if (mb.c_cols[j] < 0) rhs += z.dot(state.bodies[j].c);
            const int row = b.new_row(rhs);
            b.coef(row, mb.eta_col, 1.0);
            b.coef(row, slack, -1.0);
            for (int k = 0; k < d; ++k) {
                if (mb.c_cols[i] >= 0) b.coef(row, mb.c_cols[i] + k, z[k]);
                if (mb.c_cols[j] >= 0) b.coef(row, mb.c_cols[j] + k, -z[k]);
            }
        }
    }

    mb.program = b.build(Sense::Minimize);
    // translate builder ids into layout columns
    mb.xi_col = b.layout_col(mb.xi_col);
    if (mb.eta_col >= 0) mb.eta_col = b.layout_col(mb.eta_col);
    for (int i = 0; i < n; ++i) {
        if (mb.lambda_cols[i] >= 0) mb.lambda_cols[i] = b.layout_col(mb.lambda_cols[i]);
        if (mb.c_cols[i] >= 0) mb.c_cols[i] = b.layout_col(mb.c_cols[i]);
        if (mb.s_cols[i] >= 0) mb.s_cols[i] = b.layout_col(mb.s_cols[i]);
        if (mb.sigma_cols[i] >= 0) mb.sigma_cols[i] = b.layout_col(mb.sigma_cols[i]);
    }
    return mb;
}

PackingState extract_state(const MasterBundle& mb, const ConicSolution& sol, const PackingState& prev,
                           const EllipackProblem& prob) {
    const int n = prob.n();
    const int d = prob.dim();
    const int sv = svec_dim(d);
    PackingState st;
    st.bodies.resize(n);
    for (int i = 0; i < n; ++i) {
        BodyState& b = st.bodies[i];
        if (mb.c_cols[i] < 0) {
            b = prev.bodies[i]; // frozen body
            continue;
        }
        b.degenerate = prev.bodies[i].degenerate;
        b.lambda = std::clamp(sol.primal[mb.lambda_cols[i]], 0.0, 1.0);
        b.c = Vec(d);
        for (int k = 0; k < d; ++k) b.c[k] = sol.primal[mb.c_cols[i] + k];
        if (mb.s_cols[i] >= 0) {
            b.S = smat(sol.primal.segment(mb.s_cols[i], sv));
            b.Sigma = smat(sol.primal.segment(mb.sigma_cols[i], sv));
        } else {
            b.S = prev.bodies[i].S;
            b.Sigma = prev.bodies[i].Sigma;
        }
    }
    return st;
}

double predicted_decrease(double t_star_f, double master_value) {
    const double lam = t_star_f - master_value;
    if (lam < -1e-6 * (1.0 + std::abs(t_star_f)))
        throw NumericalError("predicted_decrease: negative beyond tolerance");
    return std::max(0.0, lam);
}

TrIterateResult tr_iterate(const PackingState& state, const PairMeasurement& m, double rho,
                           const EllipackProblem& prob, const TrustRegionConfig& cfg, int threads) {
    TrIterateResult out;
    out.diag.t_star = m.t_star;
    out.diag.rho = rho;

    const std::vector<int> active = select_active_set(m, cfg);
    out.diag.active_size = int(active.size());

    const MasterBundle mb = build_master(state, prob, active, m, rho, cfg);
    ConicSolution sol = solve(mb.program, cfg.solver);
    if (sol.status != SolveStatus::Optimal) {
        // deterministic fallback: the trust-region logic needs ~1e-4 accuracy
        SolverOptions relaxed = cfg.solver;
        relaxed.feas_tol = std::max(relaxed.feas_tol, 1e-7);
        relaxed.gap_tol = std::max(relaxed.gap_tol, 1e-6);
        sol = solve(mb.program, relaxed);
    }
    if (sol.status != SolveStatus::Optimal)
        throw NumericalError(std::string("ellipack master: solver status ") + to_string(sol.status));
    out.diag.solver_iterations = sol.iterations;

    const double c_pen = prob.homolog ? prob.homolog->penalty_c : 0.0;
    const double merit = m.t_star + c_pen * homolog_eta(state, prob);
    out.diag.merit = merit;
    const double lam = std::max(0.0, merit - sol.objective_value);
    if (merit - sol.objective_value < -1e-5 * (1.0 + merit))
        throw NumericalError("tr_iterate: predicted decrease negative beyond tolerance");
    out.diag.lambda_pred = lam;

    PackingState candidate = extract_state(mb, sol, state, prob);
    const double dc = PackingState::c_distance(candidate, state);
    if (dc <= 1e-11 * (1.0 + prob.container.max_semi_axis()) * std::sqrt(double(state.n()))) {
        // null step: Clarke-stationary for the active-set reference problem
        out.stationary = true;
        out.next = state;
        out.next_measurement = m;
        out.next_rho = rho;
        return out;
    }

    PairMeasurement cm = measure_all(candidate, prob, cfg.solver, threads);
    const double merit_candidate = cm.t_star + c_pen * homolog_eta(candidate, prob);
    out.diag.t_star_candidate = cm.t_star;
    out.diag.merit_candidate = merit_candidate;

    if (merit_candidate <= merit - cfg.c1 * lam) {
        out.accepted = true;
        out.next = std::move(candidate);
        out.next_measurement = std::move(cm);
        out.next_rho = (merit_candidate <= merit - cfg.c2 * lam)
                           ? std::min(cfg.phi2 * rho,
                                      cfg.rho_max > 0 ? cfg.rho_max : prob.container.max_semi_axis())
                           : rho;
    } else {
        out.accepted = false;
        out.next = state;
        out.next_measurement = m;
        out.next_rho = cfg.phi1 * rho;
    }
    out.diag.accepted = out.accepted;
    return out;
}

EllipackResult pack_ellipsoids(const EllipackProblem& prob, const PackingState& init,
                               const TrustRegionConfig& cfg, int threads) {
    prob.validate();
    cfg.validate();
    EllipackResult out;
    out.state = init;
    out.measurement = measure_all(init, prob, cfg.solver, threads);
    double rho = cfg.rho0 > 0 ? cfg.rho0 : 0.1 * prob.container.max_semi_axis();
    const double vol_threshold = cfg.tol2 * prob.container.volume();

    int k = 0;
    for (; k < cfg.max_iter; ++k) {
        if (out.measurement.t_star <= 0.0) {
            out.termination = "no_overlap";
            break;
        }
        if (out.measurement.t_star <= vol_threshold) {
            out.termination = "tol2";
            break;
        }
        TrIterateResult it = tr_iterate(out.state, out.measurement, rho, prob, cfg, threads);
        out.history.push_back(
            {k, it.diag.t_star, it.diag.lambda_pred, rho, it.diag.active_size, it.accepted});
        if (it.stationary) {
            out.termination = "stationary";
            break;
        }
        if (it.diag.lambda_pred / rho <= cfg.tol1) {
            out.termination = "tol1";
            break;
        }
        out.state = std::move(it.next);
        out.measurement = std::move(it.next_measurement);
        rho = it.next_rho;
        if (it.accepted && it.diag.t_star_candidate <= 0.0) {
            out.termination = "no_overlap";
            ++k;
            break;
        }
    }
    if (out.termination.empty()) out.termination = "max_iter";
    out.iterations = k;
    return out;
}

ProjectionReport project_axes(const PackingState& state, const EllipackProblem& prob,
                              const SolverOptions& opts) {
    ProjectionReport rep;
    rep.projected = state;
    rep.distortions.resize(state.n());
    int above = 0;
    for (int i = 0; i < state.n(); ++i) {
        const BodyState& b = state.bodies[i];
        rep.distortions[i] = axis_distortion(Ellipsoid(b.c, b.S, b.Sigma), prob.specs[i]);
        if (rep.distortions[i] > 0.10) ++above;
        const EigSym es = eig_sym(b.S);
        const Mat s_new = es.vectors * prob.specs[i].radii.asDiagonal() * es.vectors.transpose();
        BodyState& pb = rep.projected.bodies[i];
        pb.S = SymMat(s_new);
        pb.Sigma = SymMat(Mat(s_new * s_new));
    }
    rep.fraction_above_10_percent = double(above) / state.n();
    rep.t_star_original = measure_all(state, prob, opts).t_star;
    rep.t_star_projected = measure_all(rep.projected, prob, opts).t_star;
    return rep;
}

} // namespace opack
