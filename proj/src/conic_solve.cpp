#include "opack/conic_solve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace opack {

namespace {

struct ColGroup {
    ipm::BlockKind kind;
    int dim;     // coordinate count
    int mat_dim; // PSD matrix dim
    int base;    // first spec column
};

// presolve bookkeeping
struct Presolved {
    ipm::InternalProgram internal;
    // spec column -> internal column (or -1 when eliminated)
    std::vector<int> col_map;
    // for eliminated columns: position in the cone slack vector and the
    // defining row with its coefficient on the column
    struct Elim {
        int z_index = -1;   // position in concatenated cone vector
        int spec_row = -1;
        double alpha = 0.0;
        int block = -1, row_in_block = -1;
    };
    std::vector<Elim> elim;
    std::vector<int> kept_rows;    // internal row -> spec row
    std::vector<int> dropped_rows; // pruned as redundant
    bool infeasible_rows = false;  // inconsistent redundant row detected
    Vec farkas;                    // certificate when infeasible_rows
    double sign = 1.0;             // -1 when the original sense is maximize
};

std::vector<ColGroup> make_groups(const ConeLayout& layout) {
    std::vector<ColGroup> g;
    int at = 0;
    for (int d : layout.psd_block_dims) {
        g.push_back({ipm::BlockKind::Psd, svec_dim(d), d, at});
        at += svec_dim(d);
    }
    for (int d : layout.soc_dims) {
        g.push_back({ipm::BlockKind::Soc, d, 0, at});
        at += d;
    }
    for (int i = 0; i < layout.nonneg_count; ++i) {
        g.push_back({ipm::BlockKind::NonNeg, 1, 0, at});
        at += 1;
    }
    return g;
}

Presolved presolve(const ConicProgram& prog) {
    prog.validate();
    Presolved ps;
    const int n = prog.layout.total();
    const int ncone = prog.layout.free_offset();
    ps.sign = (prog.sense == Sense::Maximize) ? -1.0 : 1.0;
    Vec cost = ps.sign * prog.objective;

    // consolidated sparse rows
    struct Row {
        std::vector<std::pair<int, double>> terms;
        double rhs;
    };
    std::vector<Row> rows(prog.rows.size());
    for (size_t r = 0; r < prog.rows.size(); ++r) {
        std::vector<std::pair<int, double>> t;
        t.reserve(prog.rows[r].cols.size());
        for (size_t k = 0; k < prog.rows[r].cols.size(); ++k)
            t.push_back({prog.rows[r].cols[k], prog.rows[r].coefs[k]});
        std::sort(t.begin(), t.end());
        std::vector<std::pair<int, double>> c;
        for (auto [col, w] : t) {
            if (!c.empty() && c.back().first == col)
                c.back().second += w;
            else
                c.push_back({col, w});
        }
        std::erase_if(c, [](const auto& p) { return p.second == 0.0; });
        rows[r] = {std::move(c), prog.rows[r].rhs};
    }

    // appearance counts for cone columns
    std::vector<int> count(n, 0), only_row(n, -1);
    std::vector<double> only_coef(n, 0.0);
    for (size_t r = 0; r < rows.size(); ++r)
        for (auto [col, w] : rows[r].terms) {
            if (++count[col] == 1) {
                only_row[col] = int(r);
                only_coef[col] = w;
            }
        }

    const auto groups = make_groups(prog.layout);
    std::vector<int> group_of(n, -1);
    for (size_t gi = 0; gi < groups.size(); ++gi)
        for (int k = 0; k < groups[gi].dim; ++k) group_of[groups[gi].base + k] = int(gi);

    // pick one eliminable cone column per row (largest column index wins)
    std::vector<int> elim_col_of_row(rows.size(), -1);
    for (int col = 0; col < ncone; ++col)
        if (count[col] == 1) {
            int& slot = elim_col_of_row[only_row[col]];
            slot = std::max(slot, col);
        }
    std::vector<char> col_elim(n, 0);
    for (size_t r = 0; r < rows.size(); ++r)
        if (elim_col_of_row[r] >= 0) col_elim[elim_col_of_row[r]] = 1;
    // a group is eliminated only as a whole
    std::vector<char> group_elim(groups.size(), 0);
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        bool all = true;
        for (int k = 0; k < groups[gi].dim; ++k) all = all && col_elim[groups[gi].base + k];
        group_elim[gi] = all;
        if (!all)
            for (int k = 0; k < groups[gi].dim; ++k) col_elim[groups[gi].base + k] = 0;
    }
    std::vector<char> row_consumed(rows.size(), 0);
    for (size_t r = 0; r < rows.size(); ++r)
        if (elim_col_of_row[r] >= 0 && col_elim[elim_col_of_row[r]])
            row_consumed[r] = 1;
        else
            elim_col_of_row[r] = -1;

    // internal columns: everything not eliminated, spec order
    ps.col_map.assign(n, -1);
    int nx = 0;
    for (int col = 0; col < n; ++col)
        if (!col_elim[col]) ps.col_map[col] = nx++;
    ps.internal.nx = nx;
    ps.internal.cost = Vec::Zero(nx);
    for (int col = 0; col < n; ++col)
        if (ps.col_map[col] >= 0) ps.internal.cost[ps.col_map[col]] = cost[col];

    ps.elim.assign(n, {});
    int z_at = 0;

    // identity blocks for surviving cone groups; nonneg scalars are merged
    std::vector<int> surviving_nn;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        if (group_elim[gi]) continue;
        if (groups[gi].kind == ipm::BlockKind::NonNeg) {
            surviving_nn.push_back(groups[gi].base);
            continue;
        }
        ipm::ConeBlock blk;
        blk.kind = groups[gi].kind;
        blk.dim = groups[gi].dim;
        blk.mat_dim = groups[gi].mat_dim;
        blk.h = Vec::Zero(blk.dim);
        blk.rows.resize(blk.dim);
        for (int k = 0; k < blk.dim; ++k) {
            blk.rows[k] = {{ps.col_map[groups[gi].base + k], -1.0}};
            ++z_at;
        }
        ps.internal.blocks.push_back(std::move(blk));
    }
    if (!surviving_nn.empty()) {
        ipm::ConeBlock blk;
        blk.kind = ipm::BlockKind::NonNeg;
        blk.dim = int(surviving_nn.size());
        blk.h = Vec::Zero(blk.dim);
        blk.rows.resize(blk.dim);
        for (size_t k = 0; k < surviving_nn.size(); ++k) {
            blk.rows[k] = {{ps.col_map[surviving_nn[k]], -1.0}};
            ++z_at;
        }
        ps.internal.blocks.push_back(std::move(blk));
    }

    // affine blocks for eliminated groups
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        if (!group_elim[gi]) continue;
        ipm::ConeBlock blk;
        blk.kind = groups[gi].kind;
        blk.dim = groups[gi].dim;
        blk.mat_dim = groups[gi].mat_dim;
        blk.h = Vec::Zero(blk.dim);
        blk.rows.resize(blk.dim);
        for (int k = 0; k < blk.dim; ++k) {
            const int col = groups[gi].base + k;
            const int r = only_row[col];
            const double alpha = only_coef[col];
            blk.h[k] = rows[r].rhs / alpha;
            auto& out = blk.rows[k];
            for (auto [c2, w] : rows[r].terms)
                if (c2 != col) out.push_back({ps.col_map[c2], w / alpha});
            // objective folding: cost_j * (h - g^T u)
            const double cj = cost[col];
            if (cj != 0.0) {
                ps.internal.cost_offset += cj * blk.h[k];
                for (auto [ic, w] : out) ps.internal.cost[ic] -= cj * w;
            }
            auto& e = ps.elim[col];
            e.z_index = z_at + k;
            e.spec_row = r;
            e.alpha = alpha;
            e.block = int(ps.internal.blocks.size());
            e.row_in_block = k;
        }
        z_at += blk.dim;
        ps.internal.blocks.push_back(std::move(blk));
    }

    // surviving equality rows
    std::vector<int> surv;
    for (size_t r = 0; r < rows.size(); ++r)
        if (!row_consumed[r]) surv.push_back(int(r));
    Mat A = Mat::Zero(int(surv.size()), nx);
    Vec b = Vec::Zero(int(surv.size()));
    for (size_t i = 0; i < surv.size(); ++i) {
        b[int(i)] = rows[surv[i]].rhs;
        for (auto [c, w] : rows[surv[i]].terms) A(int(i), ps.col_map[c]) += w;
    }

    // rank-revealing redundancy pruning
    if (surv.size() > 0) {
        Eigen::ColPivHouseholderQR<Mat> qr(A.transpose());
        qr.setThreshold(1e-10);
        const int rank = int(qr.rank());
        if (rank < int(surv.size())) {
            std::vector<char> keep(surv.size(), 0);
            for (int k = 0; k < rank; ++k) keep[qr.colsPermutation().indices()[k]] = 1;
            // consistency of dropped rows: rank of [A b] must not exceed rank(A)
            Mat Ab(int(surv.size()), nx + 1);
            Ab.leftCols(nx) = A;
            Ab.col(nx) = b;
            Eigen::ColPivHouseholderQR<Mat> qr2(Ab.transpose());
            qr2.setThreshold(1e-10);
            if (int(qr2.rank()) > rank) {
                // Farkas witness: y in null(A^T) with b^T y = 1
                Eigen::FullPivLU<Mat> lu(A.transpose());
                lu.setThreshold(1e-10);
                const Mat K = lu.kernel();
                Vec yk = K * (K.transpose() * b);
                ps.infeasible_rows = true;
                ps.farkas = Vec::Zero(int(prog.rows.size()));
                if (yk.norm() > 0 && std::abs(b.dot(yk)) > 0) {
                    yk /= b.dot(yk);
                    for (size_t i = 0; i < surv.size(); ++i) ps.farkas[surv[i]] = yk[int(i)];
                }
                return ps;
            }
            std::vector<int> surv2;
            for (size_t i = 0; i < surv.size(); ++i)
                if (keep[i])
                    surv2.push_back(surv[i]);
                else
                    ps.dropped_rows.push_back(surv[i]);
            Mat A2 = Mat::Zero(int(surv2.size()), nx);
            Vec b2 = Vec::Zero(int(surv2.size()));
            int at = 0;
            for (size_t i = 0; i < surv.size(); ++i)
                if (keep[i]) {
                    A2.row(at) = A.row(int(i));
                    b2[at] = b[int(i)];
                    ++at;
                }
            A = std::move(A2);
            b = std::move(b2);
            surv = std::move(surv2);
        }
    }
    ps.internal.A = std::move(A);
    ps.internal.b = std::move(b);
    ps.kept_rows = std::move(surv);
    return ps;
}

} // namespace

ConicSolution solve_with_internal(const ConicProgram& prog, const SolverOptions& opts,
                                  ipm::InternalSolution* internal_out) {
    Presolved ps = presolve(prog);
    const int n = prog.layout.total();
    const int ncone = prog.layout.free_offset();

    ConicSolution out;
    if (ps.infeasible_rows) {
        out.status = SolveStatus::PrimalInfeasible;
        out.primal = Vec::Zero(n);
        out.dual_eq = ps.farkas;
        out.dual_slack = Vec::Zero(ncone);
        out.certificate_quality = 0.0;
        return out;
    }

    ipm::InternalSolution isol = ipm::solve_internal(ps.internal, opts);
    if (internal_out) *internal_out = isol;
    out.status = isol.status;
    out.iterations = isol.iterations;

    const double sgn = ps.sign;

    if (isol.status == SolveStatus::PrimalInfeasible) {
        // y certificate: reconstruct per original row with the cone duals
        out.dual_eq = Vec::Zero(int(prog.rows.size()));
        for (size_t i = 0; i < ps.kept_rows.size(); ++i) out.dual_eq[ps.kept_rows[i]] = -isol.y[int(i)];
        for (int col = 0; col < ncone; ++col)
            if (ps.elim[col].z_index >= 0)
                out.dual_eq[ps.elim[col].spec_row] = -isol.z[ps.elim[col].z_index] / ps.elim[col].alpha;
        out.primal = Vec::Zero(n);
        out.dual_slack = Vec::Zero(ncone);
        out.certificate_quality = isol.certificate_quality;
        return out;
    }
    if (isol.status == SolveStatus::DualInfeasible) {
        // improving ray in spec coordinates
        out.primal = Vec::Zero(n);
        for (int col = 0; col < n; ++col)
            if (ps.col_map[col] >= 0) out.primal[col] = isol.x[ps.col_map[col]];
        for (int col = 0; col < ncone; ++col) {
            const auto& e = ps.elim[col];
            if (e.z_index >= 0) out.primal[col] = isol.s[e.z_index];
        }
        out.dual_eq = Vec::Zero(int(prog.rows.size()));
        out.dual_slack = Vec::Zero(ncone);
        out.certificate_quality = isol.certificate_quality;
        return out;
    }

    // Optimal or MaxIterations: reconstruct primal and duals
    out.primal = Vec::Zero(n);
    for (int col = 0; col < n; ++col)
        if (ps.col_map[col] >= 0) out.primal[col] = isol.x[ps.col_map[col]];
    for (int col = 0; col < ncone; ++col) {
        const auto& e = ps.elim[col];
        if (e.z_index >= 0) out.primal[col] = isol.s[e.z_index];
    }

    out.dual_eq = Vec::Zero(int(prog.rows.size()));
    const Vec cost_min = sgn * prog.objective;
    for (size_t i = 0; i < ps.kept_rows.size(); ++i) out.dual_eq[ps.kept_rows[i]] = -isol.y[int(i)];
    for (int col = 0; col < ncone; ++col) {
        const auto& e = ps.elim[col];
        if (e.z_index >= 0)
            out.dual_eq[e.spec_row] = (cost_min[col] - isol.z[e.z_index]) / e.alpha;
    }

    // dual slack S = c - A^T y on cone coordinates (minimize form)
    Vec aty = Vec::Zero(n);
    for (size_t r = 0; r < prog.rows.size(); ++r) {
        const double yv = out.dual_eq[int(r)];
        if (yv == 0.0) continue;
        for (size_t k = 0; k < prog.rows[r].cols.size(); ++k)
            aty[prog.rows[r].cols[k]] += prog.rows[r].coefs[k] * yv;
    }
    out.dual_slack = (cost_min - aty).head(ncone);

    out.objective_value = sgn * (isol.pcost);
    out.gap = std::abs(isol.pcost - isol.dcost);
    out.primal_residual = isol.pres;
    out.dual_residual = isol.dres;
    if (prog.sense == Sense::Maximize) out.dual_eq = -out.dual_eq;
    return out;
}

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
    return solve_with_internal(prog, opts, nullptr);
}

} // namespace opack
