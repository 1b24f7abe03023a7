#include "opack/conic_solve.hpp"

#include "opack/rng.hpp"

#include <cmath>

namespace opack {

// ---- parametrized families -------------------------------------------------

ConicProgram ProgramFamily::instantiate(const SymMat& c_param) const {
    if (c_param.dim() != param_dim) throw InvalidInput("ProgramFamily: parameter dim mismatch");
    ConicProgram p = base;
    for (const auto& e : map) {
        p.objective[e.col] += e.weight * c_param(e.i, e.j);
    }
    return p;
}

SymMat ProgramFamily::pullback(const Vec& x) const {
    SymMat g(param_dim);
    for (const auto& e : map) {
        const double v = e.weight * x[e.col];
        if (e.i == e.j)
            g.set(e.i, e.j, g(e.i, e.j) + v);
        else
            g.set(e.i, e.j, g(e.i, e.j) + 0.5 * v); // symmetric split
    }
    return g;
}

ProgramFamily standard_form_family(const ConicProgram& base, int psd_block) {
    ProgramFamily f;
    f.base = base;
    const int d = base.layout.psd_block_dims.at(psd_block);
    f.param_dim = d;
    const int base_col = base.layout.psd_offset(psd_block);
    const double s2 = std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int i = j; i < d; ++i) {
            const int col = base_col + svec_index(d, i, j);
            // svec coordinate times svec(C) weight: diag 1, off-diag sqrt(2);
            // combined with both triangles of C contributing, the map weight is
            // 1 on the diagonal and 2/sqrt(2)*sqrt(2)/2 = sqrt(2) off-diagonal
            f.map.push_back({col, i, j, (i == j) ? 1.0 : s2});
        }
    return f;
}

double value_function(const ProgramFamily& family, const SymMat& c_param, const SolverOptions& opts) {
    const ConicProgram p = family.instantiate(c_param);
    const ConicSolution sol = solve(p, opts);
    switch (sol.status) {
        case SolveStatus::Optimal:
            return sol.objective_value;
        case SolveStatus::PrimalInfeasible:
            // maximize over empty set
            if (p.sense == Sense::Maximize) return kNegInfinity;
            throw NumericalError("value_function: program infeasible under minimize sense");
        case SolveStatus::DualInfeasible:
            // unbounded below under minimize
            if (p.sense == Sense::Minimize) return kNegInfinity;
            throw NumericalError("value_function: program unbounded under maximize sense");
        case SolveStatus::MaxIterations:
            throw NumericalError("value_function: iteration limit, value indeterminate");
    }
    return kNegInfinity;
}

namespace {

// Strict dual feasibility of min <c,x> over Ax=b, x in K at the given
// objective: solves   max t  s.t.  c - A^T y - t e in K,  (c - A^T y)_free = 0
// where e is the cone identity. A positive optimal margin certifies a
// strictly interior dual point.
bool dual_strictly_feasible(const ProgramFamily& family, const SymMat& c0, const SolverOptions& opts) {
    ConicProgram orig = family.instantiate(c0);
    if (orig.sense == Sense::Maximize) {
        orig.objective = -orig.objective; // work in minimize form
        orig.sense = Sense::Minimize;
    }
    const ConeLayout& L = orig.layout;
    const int ncone = L.free_offset();
    const int ntot = L.total();
    const int p = int(orig.rows.size());

    ProgramBuilder b;
    const int y0 = b.add_free(p);
    const int t0 = b.add_free(1);
    b.set_objective(t0, 1.0);
    // bound ||y||: keeps the margin finite when A^T directions overlap the
    // cone identity (otherwise t and y trade off along a null direction)
    {
        const double ybound = 2.0 * (1.0 + c0.norm());
        const int soc = b.add_soc(p + 1);
        int r = b.new_row(ybound);
        b.coef(r, soc, 1.0);
        for (int k = 0; k < p; ++k) {
            r = b.new_row(0.0);
            b.coef(r, soc + 1 + k, 1.0);
            b.coef(r, y0 + k, -1.0);
        }
    }
    // cone slack mirrors the original cone layout
    std::vector<int> slack_base;
    for (int d : L.psd_block_dims) slack_base.push_back(b.add_psd(d));
    for (int d : L.soc_dims) slack_base.push_back(b.add_soc(d));
    if (L.nonneg_count > 0) slack_base.push_back(b.add_nonneg(L.nonneg_count));
    // identity vector per coordinate
    Vec e = Vec::Zero(ncone);
    {
        int at = 0;
        for (int d : L.psd_block_dims) {
            e.segment(at, svec_dim(d)) = svec(SymMat::identity(d));
            at += svec_dim(d);
        }
        for (int d : L.soc_dims) {
            e[at] = 1.0;
            at += d;
        }
        for (int k = 0; k < L.nonneg_count; ++k) e[at + k] = 1.0;
    }
    // column index of the slack mirroring original coordinate k
    std::vector<int> mirror(ncone);
    {
        int at = 0, blk = 0;
        for (int d : L.psd_block_dims) {
            for (int k = 0; k < svec_dim(d); ++k) mirror[at + k] = slack_base[blk] + k;
            at += svec_dim(d);
            ++blk;
        }
        for (int d : L.soc_dims) {
            for (int k = 0; k < d; ++k) mirror[at + k] = slack_base[blk] + k;
            at += d;
            ++blk;
        }
        if (L.nonneg_count > 0)
            for (int k = 0; k < L.nonneg_count; ++k) mirror[at + k] = slack_base[blk] + k;
    }
    // transpose of the equality matrix, one aux row per original column
    std::vector<std::vector<std::pair<int, double>>> at_cols(ntot);
    for (int r = 0; r < p; ++r)
        for (size_t k = 0; k < orig.rows[r].cols.size(); ++k)
            at_cols[orig.rows[r].cols[k]].push_back({r, orig.rows[r].coefs[k]});
    for (int k = 0; k < ntot; ++k) {
        const int r = b.new_row(orig.objective[k]);
        for (auto [rr, w] : at_cols[k]) b.coef(r, y0 + rr, w);
        if (k < ncone) {
            b.coef(r, mirror[k], 1.0);
            if (e[k] != 0.0) b.coef(r, t0, e[k]);
        }
    }
    SolverOptions aux = opts;
    aux.feas_tol = std::max(aux.feas_tol, 1e-7); // boolean query, margin scale
    aux.gap_tol = std::max(aux.gap_tol, 1e-7);
    const ConicSolution sol = solve(b.build(Sense::Maximize), aux);
    if (sol.status == SolveStatus::DualInfeasible) return true; // margin unbounded above
    if (sol.status != SolveStatus::Optimal) return false;
    return sol.objective_value > 1e-9 * (1.0 + c0.norm());
}

SymMat random_sym(int d, double norm_target, Rng& rng) {
    SymMat e(d);
    for (int j = 0; j < d; ++j)
        for (int i = j; i < d; ++i) e.set(i, j, rng.normal());
    const double nrm = e.norm();
    if (nrm > 0) return e * (norm_target / nrm);
    return e;
}

} // namespace

LipschitzProbeResult lipschitz_probe(const ProgramFamily& family, const SymMat& c0, double radius,
                                     int samples, uint64_t seed, const SolverOptions& opts_in) {
    // sampled assertions carry 1e-6 slacks; keep the solves off the 1e-8 floor
    SolverOptions opts = opts_in;
    opts.feas_tol = std::max(opts.feas_tol, 1e-7);
    opts.gap_tol = std::max(opts.gap_tol, 1e-7);
    if (!dual_strictly_feasible(family, c0, opts))
        throw InvalidInput("lipschitz_probe: no strictly feasible dual at C0");
    Rng rng(seed, 0x11b5);

    std::vector<SymMat> pts;
    std::vector<double> vals;
    double beta = 0.0;
    pts.push_back(c0);
    for (int k = 1; k < std::max(2, samples); ++k)
        pts.push_back(c0 + random_sym(c0.dim(), radius * rng.uniform(), rng));
    for (const SymMat& c : pts) {
        const ConicProgram p = family.instantiate(c);
        const ConicSolution sol = solve(p, opts);
        if (sol.status != SolveStatus::Optimal)
            throw NumericalError("lipschitz_probe: sample did not solve to optimality");
        vals.push_back(sol.objective_value);
        // ||X(C)||_F over the full primal cone part (svec norm = Frobenius)
        beta = std::max(beta, family.pullback(sol.primal).norm());
    }
    double max_ratio = 0.0;
    for (size_t a = 0; a < pts.size(); ++a)
        for (size_t b = a + 1; b < pts.size(); ++b) {
            const double dc = (pts[a] - pts[b]).norm();
            if (dc > 1e-14) max_ratio = std::max(max_ratio, std::abs(vals[a] - vals[b]) / dc);
        }
    return {max_ratio, beta};
}

ContinuityReport solution_continuity_probe(const ProgramFamily& family,
                                           const std::vector<SymMat>& c_sequence,
                                           const SolverOptions& opts_in) {
    SolverOptions opts = opts_in;
    opts.feas_tol = std::max(opts.feas_tol, 1e-7);
    opts.gap_tol = std::max(opts.gap_tol, 1e-7);
    if (c_sequence.empty()) throw InvalidInput("solution_continuity_probe: empty sequence");
    ContinuityReport rep;
    Vec last_primal;
    for (const SymMat& c : c_sequence) {
        const ConicProgram p = family.instantiate(c);
        const ConicSolution sol = solve(p, opts);
        if (sol.status != SolveStatus::Optimal)
            throw NumericalError("solution_continuity_probe: solve failed along the sequence");
        rep.solution_norms.push_back(family.pullback(sol.primal).norm());
        rep.values.push_back(sol.objective_value);
        last_primal = sol.primal;
    }
    const SymMat& climit = c_sequence.back();
    const ConicProgram plim = family.instantiate(climit);
    const ConicSolution sol = solve(plim, opts);
    rep.limit_value = sol.objective_value;
    // feasibility is shared across the family; the residual is the objective
    // suboptimality of the last solution under the limit objective
    const double value_at_last = plim.objective.dot(last_primal);
    rep.final_residual = (plim.sense == Sense::Minimize) ? value_at_last - rep.limit_value
                                                         : rep.limit_value - value_at_last;
    return rep;
}

} // namespace opack
