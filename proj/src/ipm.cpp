#include "opack/ipm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace opack::ipm {

namespace {

// ---- per-block helpers ----------------------------------------------------

Vec block_seg(const Vec& full, int offset, int dim) { return full.segment(offset, dim); }

// Nesterov-Todd scaling data for one block.
struct Scaling {
    // NonNeg
    Vec w; // sqrt(s/z)
    // Soc
    double eta = 0.0;
    Vec wbar; // J-normalized scaling point
    // Psd
    Mat R, Rinv;
    // all kinds
    Vec lambda;     // scaled point, W z = W^{-T} s
    Mat Hinv;       // dense H^{-1} for small blocks (PSD and small SOC)
    bool have_Hinv = false;
};

Mat soc_J(int d) {
    Vec j(d);
    j[0] = 1.0;
    for (int i = 1; i < d; ++i) j[i] = -1.0;
    return Mat(j.asDiagonal());
}

double soc_resid(const Vec& v) { return v[0] * v[0] - v.tail(v.size() - 1).squaredNorm(); }

Scaling compute_scaling(const ConeBlock& blk, const Vec& s, const Vec& z) {
    Scaling sc;
    switch (blk.kind) {
        case BlockKind::NonNeg: {
            sc.w = (s.array() / z.array()).sqrt();
            sc.lambda = (s.array() * z.array()).sqrt();
            break;
        }
        case BlockKind::Soc: {
            const int d = blk.dim;
            const double sr = soc_resid(s), zr = soc_resid(z);
            if (sr <= 0 || zr <= 0) throw NumericalError("ipm: SOC iterate left the cone");
            const Vec sb = s / std::sqrt(sr), zb = z / std::sqrt(zr);
            const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
            Vec w(d);
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
            sc.wbar = w;
            sc.eta = std::pow(sr / zr, 0.25);
            // lambda = W z
            const Vec wz = [&] {
                Vec v(d);
                const double a = w.tail(d - 1).dot(z.tail(d - 1));
                v[0] = w[0] * z[0] + a;
                v.tail(d - 1) = z.tail(d - 1) + (z[0] + a / (1.0 + w[0])) * w.tail(d - 1);
                return v;
            }();
            sc.lambda = sc.eta * wz;
            break;
        }
        case BlockKind::Psd: {
            const int d = blk.mat_dim;
            Mat S = smat(s).mat(), Z = smat(z).mat();
            Eigen::LLT<Mat> ls(S), lz(Z);
            if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
                throw NumericalError("ipm: PSD iterate lost definiteness");
            const Mat Ls = ls.matrixL(), Lz = lz.matrixL();
            Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Vec sig = svd.singularValues();
            const Vec isq = sig.cwiseSqrt().cwiseInverse();
            sc.R = Ls * svd.matrixV() * isq.asDiagonal();
            sc.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
            SymMat lam(d);
            for (int i = 0; i < d; ++i) lam.set(i, i, sig[i]);
            sc.lambda = svec(lam);
            break;
        }
    }
    return sc;
}

// H^{-1} v where H = W^T W
Vec apply_Hinv(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return v.array() / (sc.w.array() * sc.w.array());
        case BlockKind::Soc: {
            const int d = blk.dim;
            Vec jw(d);
            jw[0] = sc.wbar[0];
            jw.tail(d - 1) = -sc.wbar.tail(d - 1);
            Vec jv(d);
            jv[0] = v[0];
            jv.tail(d - 1) = -v.tail(d - 1);
            return (2.0 * jw.dot(v) * jw - jv) / (sc.eta * sc.eta);
        }
        case BlockKind::Psd: {
            const Mat T = sc.Rinv.transpose() * sc.Rinv; // = (R R^T)^{-1}
            const Mat V = smat(v).mat();
            return svec(SymMat(Mat(T * V * T)));
        }
    }
    return v;
}

// H v where H = W^T W
Vec apply_H(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return v.array() * (sc.w.array() * sc.w.array());
        case BlockKind::Soc: {
            const int d = blk.dim;
            Vec jv(d);
            jv[0] = v[0];
            jv.tail(d - 1) = -v.tail(d - 1);
            return (sc.eta * sc.eta) * (2.0 * sc.wbar.dot(v) * sc.wbar - jv);
        }
        case BlockKind::Psd: {
            const Mat T = sc.R * sc.R.transpose();
            const Mat V = smat(v).mat();
            return svec(SymMat(Mat(T * V * T)));
        }
    }
    return v;
}

// W^T v
Vec apply_WT(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return sc.w.array() * v.array();
        case BlockKind::Soc: {
            const int d = blk.dim;
            Vec r(d);
            const double a = sc.wbar.tail(d - 1).dot(v.tail(d - 1));
            r[0] = sc.wbar[0] * v[0] + a;
            r.tail(d - 1) = v.tail(d - 1) + (v[0] + a / (1.0 + sc.wbar[0])) * sc.wbar.tail(d - 1);
            return sc.eta * r;
        }
        case BlockKind::Psd: {
            const Mat V = smat(v).mat();
            return svec(SymMat(Mat(sc.R * V * sc.R.transpose())));
        }
    }
    return v;
}

// W v (z-side scaling)
Vec apply_W(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
        case BlockKind::Soc:
            return apply_WT(blk, sc, v); // symmetric for these cones
        case BlockKind::Psd: {
            const Mat V = smat(v).mat();
            return svec(SymMat(Mat(sc.R.transpose() * V * sc.R)));
        }
    }
    return v;
}

// W^{-1} v (z-side unscaling)
Vec apply_Winv(const ConeBlock& blk, const Scaling& sc, const Vec& v);

// W^{-T} v (s-side scaling into the symmetric cone frame)
Vec apply_WinvT(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return v.array() / sc.w.array();
        case BlockKind::Soc: {
            const int d = blk.dim;
            Vec r(d);
            const double a = sc.wbar.tail(d - 1).dot(v.tail(d - 1));
            r[0] = sc.wbar[0] * v[0] - a;
            r.tail(d - 1) = v.tail(d - 1) + (-v[0] + a / (1.0 + sc.wbar[0])) * sc.wbar.tail(d - 1);
            return r / sc.eta;
        }
        case BlockKind::Psd: {
            const Mat V = smat(v).mat();
            return svec(SymMat(Mat(sc.Rinv * V * sc.Rinv.transpose())));
        }
    }
    return v;
}

Vec apply_Winv(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    if (blk.kind != BlockKind::Psd) return apply_WinvT(blk, sc, v); // symmetric W
    const Mat V = smat(v).mat();
    return svec(SymMat(Mat(sc.Rinv.transpose() * V * sc.Rinv)));
}

// Jordan product u o v
Vec jordan_mul(const ConeBlock& blk, const Vec& u, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return u.array() * v.array();
        case BlockKind::Soc: {
            const int d = blk.dim;
            Vec r(d);
            r[0] = u.dot(v);
            r.tail(d - 1) = u[0] * v.tail(d - 1) + v[0] * u.tail(d - 1);
            return r;
        }
        case BlockKind::Psd: {
            const Mat U = smat(u).mat(), V = smat(v).mat();
            return svec(SymMat(Mat(0.5 * (U * V + V * U))));
        }
    }
    return u;
}

// Jordan division: solve lambda o r = v
Vec jordan_div(const ConeBlock& blk, const Vec& lambda, const Vec& v) {
    switch (blk.kind) {
        case BlockKind::NonNeg:
            return v.array() / lambda.array();
        case BlockKind::Soc: {
            const int d = blk.dim;
            const double det = lambda[0] * lambda[0] - lambda.tail(d - 1).squaredNorm();
            Vec r(d);
            r[0] = (lambda[0] * v[0] - lambda.tail(d - 1).dot(v.tail(d - 1))) / det;
            r.tail(d - 1) = (v.tail(d - 1) - r[0] * lambda.tail(d - 1)) / lambda[0];
            return r;
        }
        case BlockKind::Psd: {
            const int d = blk.mat_dim;
            const Mat L = smat(lambda).mat(); // diagonal by construction
            const Mat V = smat(v).mat();
            Mat R(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) R(i, j) = 2.0 * V(i, j) / (L(i, i) + L(j, j));
            return svec(SymMat(R));
        }
    }
    return v;
}

double block_degree(const ConeBlock& blk) {
    switch (blk.kind) {
        case BlockKind::NonNeg: return double(blk.dim);
        case BlockKind::Soc: return 1.0;
        case BlockKind::Psd: return double(blk.mat_dim);
    }
    return 0.0;
}

} // namespace

Vec cone_identity(const ConeBlock& blk) {
    switch (blk.kind) {
        case BlockKind::NonNeg: return Vec::Ones(blk.dim);
        case BlockKind::Soc: {
            Vec e = Vec::Zero(blk.dim);
            e[0] = 1.0;
            return e;
        }
        case BlockKind::Psd: return svec(SymMat::identity(blk.mat_dim));
    }
    return Vec();
}

double max_cone_step(const ConeBlock& blk, const Vec& v, const Vec& dv, double cap) {
    double t = cap;
    switch (blk.kind) {
        case BlockKind::NonNeg: {
            for (int i = 0; i < blk.dim; ++i)
                if (dv[i] < 0) t = std::min(t, -v[i] / dv[i]);
            break;
        }
        case BlockKind::Soc: {
            // first boundary crossing of the quadratic a t^2 + 2 b t + c with c > 0
            const int d = blk.dim;
            const double a = dv[0] * dv[0] - dv.tail(d - 1).squaredNorm();
            const double b = v[0] * dv[0] - v.tail(d - 1).dot(dv.tail(d - 1));
            const double c = soc_resid(v);
            const double disc = b * b - a * c;
            if (a < 0 || (b < 0 && disc >= 0)) {
                const double denom = -b + std::sqrt(std::max(disc, 0.0));
                if (denom > 0) t = std::min(t, c / denom);
            }
            if (dv[0] < 0) t = std::min(t, -v[0] / dv[0]);
            break;
        }
        case BlockKind::Psd: {
            const Mat V = smat(v).mat(), D = smat(dv).mat();
            Eigen::LLT<Mat> llt(V);
            if (llt.info() != Eigen::Success) return 0.0;
            const Mat L = llt.matrixL();
            const Mat Ld = L.triangularView<Eigen::Lower>().solve(D);
            const Mat W = L.triangularView<Eigen::Lower>()
                              .solve(Ld.transpose())
                              .transpose(); // L^{-1} D L^{-T}
            Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
            const double lmin = es.eigenvalues().minCoeff();
            if (lmin < 0) t = std::min(t, -1.0 / lmin);
            break;
        }
    }
    return t;
}

namespace {

// ---- KKT factorization -----------------------------------------------------
//
// Solves  [ M  A^T ] [u]   [rx]
//         [ A   0  ] [v] = [ry]     with M = G^T H^{-1} G (+ tiny shift).

struct Kkt {
    const InternalProgram* prog = nullptr;
    Mat M;
    Eigen::LLT<Mat> lltM;
    Mat B;       // M^{-1} A^T
    Eigen::LLT<Mat> lltS;
    Mat Sa;      // A M^{-1} A^T
    double shift = 0.0;

    // caches
    std::vector<Mat> Gloc;                  // dense local G per block (small blocks)
    std::vector<std::vector<int>> cols;     // support per block
    std::vector<std::vector<int>> colpos;   // global->local map storage
    static constexpr int kDenseLimit = 96;

    void build_cache(const InternalProgram& p) {
        prog = &p;
        const size_t nb = p.blocks.size();
        Gloc.resize(nb);
        cols.resize(nb);
        for (size_t bi = 0; bi < nb; ++bi) {
            const ConeBlock& blk = p.blocks[bi];
            if (blk.kind == BlockKind::NonNeg) continue; // handled row-wise
            std::vector<int> support;
            for (const auto& row : blk.rows)
                for (auto [c, w] : row) support.push_back(c);
            std::sort(support.begin(), support.end());
            support.erase(std::unique(support.begin(), support.end()), support.end());
            cols[bi] = support;
            if (int(support.size()) <= kDenseLimit) {
                Mat g = Mat::Zero(blk.dim, int(support.size()));
                for (int r = 0; r < blk.dim; ++r)
                    for (auto [c, w] : blk.rows[r]) {
                        const int lc = int(std::lower_bound(support.begin(), support.end(), c) - support.begin());
                        g(r, lc) += w;
                    }
                Gloc[bi] = std::move(g);
            }
        }
    }

    void factor(const std::vector<Scaling>& sc) {
        const InternalProgram& p = *prog;
        const int n = p.nx;
        if (M.rows() != n) M = Mat::Zero(n, n);
        M.setZero();
        for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
            const ConeBlock& blk = p.blocks[bi];
            if (blk.kind == BlockKind::NonNeg) {
                for (int r = 0; r < blk.dim; ++r) {
                    const double wi = 1.0 / (sc[bi].w[r] * sc[bi].w[r]);
                    const auto& row = blk.rows[r];
                    for (auto [ci, vi] : row)
                        for (auto [cj, vj] : row) M(ci, cj) += wi * vi * vj;
                }
            } else if (!Gloc[bi].size()) {
                // large SOC block: H^{-1} = (2 (Jw)(Jw)^T - J)/eta^2
                const ConeBlock& cb = blk;
                const int d = cb.dim;
                Vec jw(d);
                jw[0] = sc[bi].wbar[0];
                jw.tail(d - 1) = -sc[bi].wbar.tail(d - 1);
                const double ie = 1.0 / (sc[bi].eta * sc[bi].eta);
                Vec u = Vec::Zero(n);
                for (int r = 0; r < d; ++r)
                    for (auto [c, w] : cb.rows[r]) u[c] += w * jw[r];
                // rank-one part
                for (int i : cols[bi])
                    for (int j : cols[bi]) M(i, j) += 2.0 * ie * u[i] * u[j];
                // -J part: minus g0 g0^T, plus gk gk^T for k >= 1
                for (int r = 0; r < d; ++r) {
                    const double sgn = (r == 0) ? -1.0 : 1.0;
                    for (auto [ci, vi] : cb.rows[r])
                        for (auto [cj, vj] : cb.rows[r]) M(ci, cj) += sgn * ie * vi * vj;
                }
            } else {
                // dense local path: M_loc = G^T H^{-1} G
                const Mat& g = Gloc[bi];
                Mat hinv;
                if (blk.kind == BlockKind::Psd) {
                    const Mat T = sc[bi].Rinv.transpose() * sc[bi].Rinv;
                    hinv.resize(blk.dim, blk.dim);
                    // columns of H^{-1} via congruence on svec basis
                    for (int k = 0; k < blk.dim; ++k) {
                        Vec e = Vec::Zero(blk.dim);
                        e[k] = 1.0;
                        hinv.col(k) = svec(SymMat(Mat(T * smat(e).mat() * T)));
                    }
                } else { // small SOC
                    const int d = blk.dim;
                    Vec jw(d);
                    jw[0] = sc[bi].wbar[0];
                    jw.tail(d - 1) = -sc[bi].wbar.tail(d - 1);
                    hinv = (2.0 * jw * jw.transpose() - soc_J(d)) / (sc[bi].eta * sc[bi].eta);
                }
                const Mat mloc = g.transpose() * hinv * g;
                const auto& cc = cols[bi];
                for (size_t i = 0; i < cc.size(); ++i)
                    for (size_t j = 0; j < cc.size(); ++j) M(cc[i], cc[j]) += mloc(i, j);
            }
        }

        // Floor the diagonal on columns with no cone coverage (they are pinned
        // only through A, and an exactly singular M makes LLT meaningless);
        // refinement against the unshifted system restores accuracy.
        double diagmax = 1.0;
        for (int i = 0; i < n; ++i) diagmax = std::max(diagmax, M(i, i));
        Mat Mr = M;
        for (int i = 0; i < n; ++i) {
            const double floor_i = 1e-10 * (1.0 + (prog->A.rows() ? prog->A.col(i).squaredNorm() : 0.0));
            if (Mr(i, i) < floor_i) Mr(i, i) = floor_i;
        }
        shift = 0.0;
        for (int attempt = 0; attempt < 8; ++attempt) {
            lltM.compute(Mr);
            if (lltM.info() == Eigen::Success) break;
            shift = (shift == 0.0) ? 1e-12 * diagmax : shift * 100.0;
            Mr = M;
            for (int i = 0; i < n; ++i) {
                const double floor_i =
                    1e-10 * (1.0 + (prog->A.rows() ? prog->A.col(i).squaredNorm() : 0.0));
                if (Mr(i, i) < floor_i) Mr(i, i) = floor_i;
            }
            Mr.diagonal().array() += shift;
        }
        if (lltM.info() != Eigen::Success) throw NumericalError("ipm: KKT factorization failed");

        const int pnum = int(p.A.rows());
        if (pnum > 0) {
            B = lltM.solve(p.A.transpose());
            Sa = p.A * B;
            double sdiag = 1.0;
            for (int i = 0; i < pnum; ++i) sdiag = std::max(sdiag, Sa(i, i));
            double sshift = 1e-12 * sdiag;
            for (int attempt = 0; attempt < 8; ++attempt) {
                Mat Sr = Sa;
                Sr.diagonal().array() += sshift;
                lltS.compute(Sr);
                if (lltS.info() == Eigen::Success) break;
                sshift *= 100.0;
            }
            if (lltS.info() != Eigen::Success) throw NumericalError("ipm: Schur factorization failed");
        }
    }

    void solve2(const Vec& rx, const Vec& ry, Vec& u, Vec& v) const {
        const int pnum = int(prog->A.rows());
        if (pnum == 0) {
            u = lltM.solve(rx);
            v = Vec();
            return;
        }
        const Vec t = lltM.solve(rx);
        v = lltS.solve(prog->A * t - ry);
        u = t - B * v;
        // one refinement round against the unshifted system
        const Vec r1 = rx - M * u - prog->A.transpose() * v;
        const Vec r2 = ry - prog->A * u;
        const Vec t2 = lltM.solve(r1);
        const Vec dv = lltS.solve(prog->A * t2 - r2);
        v += dv;
        u += t2 - B * dv;
    }
};

// ---- long double helpers for refinement residuals --------------------------
//
// The KKT reduction through H^{-1} squares the conditioning, so direction
// residuals are measured (and thus refined) in extended precision; otherwise
// eps * ||H|| noise hides the true error near convergence.

using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// H v computed exactly as the update path applies it: W^T (W v). The nested
// form matters: the algebraically equal T V T form differs by eps * cond and
// would make refinement chase the wrong target.
LVec ld_apply_H(const ConeBlock& blk, const Scaling& sc, const Vec& v) {
    LVec r(blk.dim);
    switch (blk.kind) {
        case BlockKind::NonNeg: {
            for (int i = 0; i < blk.dim; ++i)
                r[i] = (long double)(sc.w[i]) * sc.w[i] * v[i];
            break;
        }
        case BlockKind::Soc: {
            const int d = blk.dim;
            auto apply_V = [&](const LVec& u) {
                LVec out(d);
                long double a = 0;
                for (int i = 1; i < d; ++i) a += (long double)sc.wbar[i] * u[i];
                out[0] = (long double)sc.wbar[0] * u[0] + a;
                const long double f = u[0] + a / (1.0L + (long double)sc.wbar[0]);
                for (int i = 1; i < d; ++i) out[i] = u[i] + f * (long double)sc.wbar[i];
                return out;
            };
            LVec u(d);
            for (int i = 0; i < d; ++i) u[i] = v[i];
            const LVec wwv = apply_V(apply_V(u));
            const long double e2 = (long double)sc.eta * sc.eta;
            for (int i = 0; i < d; ++i) r[i] = e2 * wwv[i];
            break;
        }
        case BlockKind::Psd: {
            const int d = blk.mat_dim;
            const Mat V = smat(v).mat();
            // R ((R^T V R)) R^T in long double, matching W^T(W v)
            LMat rtv(d, d), rtvr(d, d), rr(d, d), out(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    long double acc = 0;
                    for (int k = 0; k < d; ++k) acc += (long double)sc.R(k, i) * V(k, j);
                    rtv(i, j) = acc;
                }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    long double acc = 0;
                    for (int k = 0; k < d; ++k) acc += rtv(i, k) * (long double)sc.R(k, j);
                    rtvr(i, j) = acc;
                }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    long double acc = 0;
                    for (int k = 0; k < d; ++k) acc += (long double)sc.R(i, k) * rtvr(k, j);
                    rr(i, j) = acc;
                }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    long double acc = 0;
                    for (int k = 0; k < d; ++k) acc += rr(i, k) * (long double)sc.R(j, k);
                    out(i, j) = acc;
                }
            const long double s2 = std::sqrt(2.0L);
            int at = 0;
            for (int j = 0; j < d; ++j) {
                r[at++] = out(j, j);
                for (int i = j + 1; i < d; ++i) r[at++] = s2 * 0.5L * (out(i, j) + out(j, i));
            }
            break;
        }
    }
    return r;
}

// G x accumulated per block
void apply_G(const InternalProgram& p, const Vec& x, std::vector<Vec>& out) {
    out.resize(p.blocks.size());
    for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const ConeBlock& blk = p.blocks[bi];
        Vec r = Vec::Zero(blk.dim);
        for (int i = 0; i < blk.dim; ++i)
            for (auto [c, w] : blk.rows[i]) r[i] += w * x[c];
        out[bi] = std::move(r);
    }
}

// G^T v accumulated over blocks
Vec apply_GT(const InternalProgram& p, const std::vector<Vec>& v) {
    Vec r = Vec::Zero(p.nx);
    for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const ConeBlock& blk = p.blocks[bi];
        for (int i = 0; i < blk.dim; ++i)
            for (auto [c, w] : blk.rows[i]) r[c] += w * v[bi][i];
    }
    return r;
}

struct BlockVecs {
    std::vector<Vec> v;
    double dot(const BlockVecs& o) const {
        double t = 0;
        for (size_t i = 0; i < v.size(); ++i) t += v[i].dot(o.v[i]);
        return t;
    }
};

} // namespace

InternalSolution solve_internal(const InternalProgram& prog, const SolverOptions& opts) {
    const int n = prog.nx;
    const int p = int(prog.A.rows());
    const size_t nb = prog.blocks.size();

    double deg = 1.0; // tau/kappa pair
    for (const auto& blk : prog.blocks) deg += block_degree(blk);

    // iterate state
    Vec x = Vec::Zero(n), y = Vec::Zero(p);
    std::vector<Vec> s(nb), z(nb);
    for (size_t bi = 0; bi < nb; ++bi) {
        s[bi] = cone_identity(prog.blocks[bi]);
        z[bi] = cone_identity(prog.blocks[bi]);
    }
    double tau = 1.0, kappa = 1.0;

    const double bnorm = std::max(1.0, prog.b.norm());
    double hnorm2 = 0.0;
    for (const auto& blk : prog.blocks) hnorm2 += blk.h.squaredNorm();
    const double hnorm = std::max(1.0, std::sqrt(hnorm2));
    const double cnorm = std::max(1.0, prog.cost.norm());

    Kkt kkt;
    kkt.build_cache(prog);

    InternalSolution sol;
    std::vector<Scaling> sc(nb);
    std::vector<Vec> Gx;

    // best iterate so far, by combined optimality merit
    double best_merit = std::numeric_limits<double>::infinity();
    Vec best_x = x, best_y = y;
    std::vector<Vec> best_s = s, best_z = z;
    double best_tau = tau, best_kappa = kappa;

    auto hdot = [&](const std::vector<Vec>& v) {
        double t = 0;
        for (size_t bi = 0; bi < nb; ++bi) t += prog.blocks[bi].h.dot(v[bi]);
        return t;
    };
    auto sz_dot = [&](const std::vector<Vec>& a, const std::vector<Vec>& b2) {
        double t = 0;
        for (size_t bi = 0; bi < nb; ++bi) t += a[bi].dot(b2[bi]);
        return t;
    };

    int iter = 0;
    double last_step = 1.0;
    for (; iter < opts.max_iter; ++iter) {
        // residuals
        apply_G(prog, x, Gx);
        const Vec Aty = p ? Vec(prog.A.transpose() * y) : Vec::Zero(n);
        std::vector<Vec> ztmp(nb);
        for (size_t bi = 0; bi < nb; ++bi) ztmp[bi] = z[bi];
        const Vec Gtz = apply_GT(prog, ztmp);

        const Vec f1 = Aty + Gtz + prog.cost * tau;
        const Vec f2 = p ? Vec(-prog.A * x + prog.b * tau) : Vec();
        std::vector<Vec> f3(nb);
        for (size_t bi = 0; bi < nb; ++bi) f3[bi] = -Gx[bi] + prog.blocks[bi].h * tau - s[bi];
        const double czx = prog.cost.dot(x);
        const double bty = p ? prog.b.dot(y) : 0.0;
        const double htz = hdot(ztmp);
        const double f4 = -czx - bty - htz - kappa;

        // convergence measures (normalized by tau)
        const double pcost = czx / tau;
        const double dcost = -(bty + htz) / tau;
        const double gap = sz_dot(s, z) / (tau * tau);
        double f3_num = 0.0;
        for (size_t bi = 0; bi < nb; ++bi) f3_num += f3[bi].squaredNorm();
        const double pres =
            std::max(f2.size() ? f2.norm() / tau / bnorm : 0.0, std::sqrt(f3_num) / tau / hnorm);
        const double dres = f1.norm() / tau / cnorm;
        sol.trace.push_back({pcost, dcost, gap, pres, dres, tau, kappa, last_step});

        const bool gap_ok = gap <= opts.gap_tol || gap <= opts.gap_tol * std::abs(pcost) ||
                            std::abs(pcost - dcost) <= opts.gap_tol * std::max(1.0, std::abs(pcost));
        if (pres <= opts.feas_tol && dres <= opts.feas_tol && gap_ok) {
            sol.status = SolveStatus::Optimal;
            break;
        }
        const double merit = std::max({pres, dres, gap / std::max(1.0, std::abs(pcost))});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_y = y;
            best_s = s;
            best_z = z;
            best_tau = tau;
            best_kappa = kappa;
        } else if (merit > 1e3 * best_merit && best_merit < 1e3 * opts.feas_tol) {
            if (std::getenv("OPACK_IPM_DEBUG")) std::fprintf(stderr, "ipm exit: merit degradation\n");
            break; // numerical floor reached, keep the best iterate
        }

        // infeasibility certificates
        const double ip_den = -(htz + bty);
        if (ip_den > 1e-10 * std::max(1.0, kappa)) {
            const double q = (Aty + Gtz).norm() / ip_den;
            if (q <= opts.feas_tol) {
                sol.status = SolveStatus::PrimalInfeasible;
                sol.y = y / ip_den;
                sol.z = Vec::Zero(prog.cone_dim());
                int off = 0;
                for (size_t bi = 0; bi < nb; ++bi) {
                    sol.z.segment(off, prog.blocks[bi].dim) = z[bi] / ip_den;
                    off += prog.blocks[bi].dim;
                }
                sol.certificate_quality = q;
                break;
            }
        }
        if (-czx > 1e-10 * std::max(1.0, kappa)) {
            double q2 = p ? (prog.A * x).squaredNorm() : 0.0;
            for (size_t bi = 0; bi < nb; ++bi) q2 += (Gx[bi] + s[bi]).squaredNorm();
            const double q = std::sqrt(q2) / (-czx);
            if (q <= opts.feas_tol) {
                sol.status = SolveStatus::DualInfeasible;
                sol.x = x / (-czx);
                sol.s = Vec(prog.cone_dim());
                int off = 0;
                for (size_t bi = 0; bi < nb; ++bi) {
                    sol.s.segment(off, prog.blocks[bi].dim) = s[bi] / (-czx);
                    off += prog.blocks[bi].dim;
                }
                sol.certificate_quality = q;
                break;
            }
        }

        const double mu = (sz_dot(s, z) + tau * kappa) / deg;

        // scaling and factorization
        for (size_t bi = 0; bi < nb; ++bi) sc[bi] = compute_scaling(prog.blocks[bi], s[bi], z[bi]);
        kkt.factor(sc);

        // Solves the 3x3 system
        //   A^T dy + G^T dz = rx,   A dx = ry,   G dx - H dz = rz
        // with mixed-precision iterative refinement against the unreduced
        // equations (residuals in long double).
        auto solve3 = [&](const Vec& rx, const Vec& ry, const std::vector<Vec>& rz, Vec& dx, Vec& dy,
                          std::vector<Vec>& dz) {
            dz.assign(nb, Vec());
            dx = Vec::Zero(n);
            dy = Vec::Zero(p);
            for (size_t bi = 0; bi < nb; ++bi) dz[bi] = Vec::Zero(prog.blocks[bi].dim);
            Vec cur_rx = rx, cur_ry = ry;
            std::vector<Vec> cur_rz = rz;
            std::vector<Vec> hinv_rz(nb), gdx(nb);
            double ref = rx.norm() + (p ? ry.norm() : 0.0);
            for (size_t bi = 0; bi < nb; ++bi) ref += rz[bi].norm();
            double prev_worst = std::numeric_limits<double>::infinity();
            for (int round = 0; round < 8; ++round) {
                for (size_t bi = 0; bi < nb; ++bi)
                    hinv_rz[bi] = apply_Hinv(prog.blocks[bi], sc[bi], cur_rz[bi]);
                Vec cx, cy;
                kkt.solve2(cur_rx + apply_GT(prog, hinv_rz), cur_ry, cx, cy);
                apply_G(prog, cx, gdx);
                dx += cx;
                if (p) dy += cy;
                for (size_t bi = 0; bi < nb; ++bi)
                    dz[bi] += apply_Hinv(prog.blocks[bi], sc[bi], Vec(gdx[bi] - cur_rz[bi]));
                if (round == 7) break;
                // residuals in extended precision
                LVec acc = LVec::Zero(n);
                for (int i = 0; i < n; ++i) acc[i] = (long double)rx[i];
                for (size_t bi = 0; bi < nb; ++bi) {
                    const ConeBlock& blk = prog.blocks[bi];
                    for (int r2 = 0; r2 < blk.dim; ++r2)
                        for (auto [c2, w2] : blk.rows[r2]) acc[c2] -= (long double)w2 * dz[bi][r2];
                }
                if (p)
                    for (int r2 = 0; r2 < p; ++r2)
                        for (int c2 = 0; c2 < n; ++c2)
                            acc[c2] -= (long double)prog.A(r2, c2) * dy[r2];
                for (int i = 0; i < n; ++i) cur_rx[i] = double(acc[i]);
                if (p) {
                    for (int r2 = 0; r2 < p; ++r2) {
                        long double a2 = (long double)ry[r2];
                        for (int c2 = 0; c2 < n; ++c2) a2 -= (long double)prog.A(r2, c2) * dx[c2];
                        cur_ry[r2] = double(a2);
                    }
                }
                double worst = cur_rx.norm() + (p ? cur_ry.norm() : 0.0);
                for (size_t bi = 0; bi < nb; ++bi) {
                    const ConeBlock& blk = prog.blocks[bi];
                    const LVec hdz = ld_apply_H(blk, sc[bi], dz[bi]);
                    for (int r2 = 0; r2 < blk.dim; ++r2) {
                        long double a2 = (long double)rz[bi][r2] + hdz[r2];
                        for (auto [c2, w2] : blk.rows[r2]) a2 -= (long double)w2 * dx[c2];
                        cur_rz[bi][r2] = double(a2);
                    }
                    worst += cur_rz[bi].norm();
                }
                if (std::getenv("OPACK_IPM_DEBUG2"))
                    std::fprintf(stderr, "  solve3 round %d worst=%.3e ref=%.3e\n", round, worst, ref);
                if (worst <= 1e-15 * (1.0 + ref) || worst >= 0.9 * prev_worst) break;
                prev_worst = worst;
            }
        };

        // static direction (coefficient of dtau)
        std::vector<Vec> h_blocks(nb);
        for (size_t bi = 0; bi < nb; ++bi) h_blocks[bi] = prog.blocks[bi].h;
        Vec dx1, dy1;
        std::vector<Vec> dz1;
        solve3(-prog.cost, prog.b, h_blocks, dx1, dy1, dz1);
        const double cdx1 = prog.cost.dot(dx1);
        const double bdy1 = p ? prog.b.dot(dy1) : 0.0;
        double hdz1 = 0;
        for (size_t bi = 0; bi < nb; ++bi) hdz1 += prog.blocks[bi].h.dot(dz1[bi]);

        // One direction solve given complementarity targets. Cone directions
        // come back both raw (for the state update, difference form) and in
        // the scaled frame (for the Mehrotra corrector products).
        auto direction = [&](double zeta, const std::vector<Vec>& bs, double dkap_tgt, Vec& dx, Vec& dy,
                             std::vector<Vec>& dz_raw, std::vector<Vec>& ds_raw,
                             std::vector<Vec>& dz_sc, std::vector<Vec>& ds_sc, double& dtau,
                             double& dkappa) {
            std::vector<Vec> wtbs(nb), rzb(nb);
            for (size_t bi = 0; bi < nb; ++bi) {
                wtbs[bi] = apply_WT(prog.blocks[bi], sc[bi], bs[bi]);
                rzb[bi] = zeta * f3[bi] - wtbs[bi];
            }
            Vec dxb, dyb;
            std::vector<Vec> dzb;
            solve3(-zeta * f1, p ? Vec(zeta * f2) : Vec(), rzb, dxb, dyb, dzb);
            const double cdxb = prog.cost.dot(dxb);
            const double bdyb = p ? prog.b.dot(dyb) : 0.0;
            double hdzb = 0;
            for (size_t bi = 0; bi < nb; ++bi) hdzb += prog.blocks[bi].h.dot(dzb[bi]);

            const double denom = kappa / tau - cdx1 - bdy1 - hdz1;
            dtau = (-zeta * f4 + cdxb + bdyb + hdzb - dkap_tgt / tau) / denom;
            dx = dxb + dtau * dx1;
            dy = (p != 0) ? Vec(dyb + dtau * dy1) : Vec();
            dz_raw.resize(nb);
            ds_raw.resize(nb);
            dz_sc.resize(nb);
            ds_sc.resize(nb);
            for (size_t bi = 0; bi < nb; ++bi) {
                dz_raw[bi] = dzb[bi] + dtau * dz1[bi];
                dz_sc[bi] = apply_W(prog.blocks[bi], sc[bi], dz_raw[bi]);
                ds_sc[bi] = bs[bi] - dz_sc[bi]; // W^{-T} ds = bs - W dz
                ds_raw[bi] = apply_WT(prog.blocks[bi], sc[bi], ds_sc[bi]);
            }
            dkappa = -(dkap_tgt + kappa * dtau) / tau;
        };

        // affine direction: bs = -lambda, target tau*kappa
        std::vector<Vec> bs(nb);
        for (size_t bi = 0; bi < nb; ++bi) bs[bi] = -sc[bi].lambda;
        Vec dx_a, dy_a;
        std::vector<Vec> dzr_a, dsr_a, dz_a, ds_a;
        double dtau_a, dkap_a;
        direction(1.0, bs, tau * kappa, dx_a, dy_a, dzr_a, dsr_a, dz_a, ds_a, dtau_a, dkap_a);

        double alpha_a = 1.0;
        for (size_t bi = 0; bi < nb; ++bi) {
            alpha_a = max_cone_step(prog.blocks[bi], s[bi], dsr_a[bi], alpha_a);
            alpha_a = max_cone_step(prog.blocks[bi], z[bi], dzr_a[bi], alpha_a);
        }
        if (dtau_a < 0) alpha_a = std::min(alpha_a, -tau / dtau_a);
        if (dkap_a < 0) alpha_a = std::min(alpha_a, -kappa / dkap_a);

        double mu_aff = (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a);
        for (size_t bi = 0; bi < nb; ++bi)
            mu_aff += Vec(sc[bi].lambda + alpha_a * ds_a[bi]).dot(Vec(sc[bi].lambda + alpha_a * dz_a[bi]));
        mu_aff /= deg;
        double sigma = std::pow(std::max(0.0, std::min(1.0, mu_aff / mu)), 3);
        // centrality floor: keeps the complementarity spread bounded so the
        // scaling stays within double-precision reach
        sigma = std::max(sigma, 5e-3);

        // combined direction with Mehrotra corrector
        for (size_t bi = 0; bi < nb; ++bi) {
            const ConeBlock& blk = prog.blocks[bi];
            Vec tgt = jordan_mul(blk, sc[bi].lambda, sc[bi].lambda) +
                      jordan_mul(blk, ds_a[bi], dz_a[bi]) - sigma * mu * cone_identity(blk);
            bs[bi] = -jordan_div(blk, sc[bi].lambda, tgt);
        }
        const double dkap_tgt = tau * kappa + dtau_a * dkap_a - sigma * mu;
        Vec dx, dy;
        std::vector<Vec> dz_raw, ds_raw, dz_sc, ds_sc;
        double dtau, dkappa;
        direction(1.0 - sigma, bs, dkap_tgt, dx, dy, dz_raw, ds_raw, dz_sc, ds_sc, dtau, dkappa);

        double alpha = 1.0 / 0.99;
        for (size_t bi = 0; bi < nb; ++bi) {
            alpha = max_cone_step(prog.blocks[bi], s[bi], ds_raw[bi], alpha);
            alpha = max_cone_step(prog.blocks[bi], z[bi], dz_raw[bi], alpha);
        }
        if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
        if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
        alpha = std::min(1.0, 0.99 * alpha);

        // Residual safeguard: along an exact direction the unnormalized HSD
        // residuals contract, so growth flags a numerically unusable step.
        // A step is accepted when each residual stays within 100x, lands
        // inside the tolerance zone, or the overall optimality merit does
        // not increase. Halve alpha until sane.
        const double rn1 = f1.norm(), rn2 = p ? f2.norm() : 0.0;
        double rn3 = 0;
        for (size_t bi = 0; bi < nb; ++bi) rn3 += f3[bi].squaredNorm();
        rn3 = std::sqrt(rn3);
        const double cur_merit = std::max({pres, dres, gap / std::max(1.0, std::abs(pcost))});
        bool accepted = false;
        std::vector<Vec> s_new(nb), z_new(nb);
        for (int tries = 0; tries < 8; ++tries) {
            const Vec xt = x + alpha * dx;
            const double taut = tau + alpha * dtau;
            if (taut <= 0) {
                alpha *= 0.5;
                continue;
            }
            // difference-form updates: reconstruction error scales with the
            // step, not with the state
            for (size_t bi = 0; bi < nb; ++bi) {
                s_new[bi] = s[bi] + alpha * ds_raw[bi];
                z_new[bi] = z[bi] + alpha * dz_raw[bi];
            }
            std::vector<Vec> Gxt;
            apply_G(prog, xt, Gxt);
            Vec atyt = prog.cost * taut;
            if (p) atyt += prog.A.transpose() * (y + alpha * dy);
            const double t1 = (atyt + apply_GT(prog, z_new)).norm();
            const double t2 = p ? (prog.b * taut - prog.A * xt).norm() : 0.0;
            double t3 = 0;
            for (size_t bi = 0; bi < nb; ++bi)
                t3 += (-Gxt[bi] + prog.blocks[bi].h * taut - s_new[bi]).squaredNorm();
            t3 = std::sqrt(t3);
            const double f1f = 0.25 * opts.feas_tol * cnorm * taut;
            const double f2f = 0.25 * opts.feas_tol * bnorm * taut;
            const double f3f = 0.25 * opts.feas_tol * hnorm * taut;
            const bool far = cur_merit > 1e3 * opts.feas_tol;
            if (far && t1 <= std::max(100.0 * rn1, f1f) && t2 <= std::max(100.0 * rn2, f2f) &&
                t3 <= std::max(100.0 * rn3, f3f)) {
                accepted = true;
                break;
            }
            // endgame: require the overall optimality merit not to grow
            double gapt = 0.0;
            for (size_t bi = 0; bi < nb; ++bi) gapt += s_new[bi].dot(z_new[bi]);
            gapt = std::max(0.0, gapt) / (taut * taut);
            const double pct = prog.cost.dot(xt) / taut;
            const double merit_t =
                std::max({std::max(t2 / taut / bnorm, t3 / taut / hnorm), t1 / taut / cnorm,
                          gapt / std::max(1.0, std::abs(pct))});
            if (merit_t <= 1.2 * cur_merit) {
                accepted = true;
                break;
            }
            if (std::getenv("OPACK_IPM_DEBUG"))
                std::fprintf(stderr, "ipm guard: alpha=%.3e t=(%.3e,%.3e,%.3e) rn=(%.3e,%.3e,%.3e)\n",
                             alpha, t1, t2, t3, rn1, rn2, rn3);
            alpha *= 0.5;
        }
        if (!accepted) {
            if (std::getenv("OPACK_IPM_DEBUG")) std::fprintf(stderr, "ipm exit: step guard\n");
            break; // numerical floor
        }
        last_step = alpha;

        x += alpha * dx;
        if (p) y += alpha * dy;
        for (size_t bi = 0; bi < nb; ++bi) {
            s[bi] = s_new[bi];
            z[bi] = z_new[bi];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;

        if (alpha < 1e-9) {
            if (std::getenv("OPACK_IPM_DEBUG")) std::fprintf(stderr, "ipm exit: tiny step\n");
            break; // stalled
        }
    }

    sol.iterations = iter;
    if (sol.status == SolveStatus::MaxIterations && best_merit < std::numeric_limits<double>::infinity()) {
        x = best_x;
        y = best_y;
        s = best_s;
        z = best_z;
        tau = best_tau;
        kappa = best_kappa;
        // the best iterate may in fact satisfy the tolerances (loop may have
        // exited on degradation before re-checking)
        apply_G(prog, x, Gx);
        const Vec aty = p ? Vec(prog.A.transpose() * y) : Vec::Zero(n);
        std::vector<Vec> zt(nb);
        for (size_t bi = 0; bi < nb; ++bi) zt[bi] = z[bi];
        const double dres = (aty + apply_GT(prog, zt) + prog.cost * tau).norm() / tau / cnorm;
        double f3n = 0;
        for (size_t bi = 0; bi < nb; ++bi)
            f3n += (-Gx[bi] + prog.blocks[bi].h * tau - s[bi]).squaredNorm();
        const double presb =
            std::max(p ? (prog.b * tau - prog.A * x).norm() / tau / bnorm : 0.0, std::sqrt(f3n) / tau / hnorm);
        double gapb = 0;
        for (size_t bi = 0; bi < nb; ++bi) gapb += s[bi].dot(z[bi]);
        gapb /= tau * tau;
        const double pc = prog.cost.dot(x) / tau;
        double htzb = 0;
        for (size_t bi = 0; bi < nb; ++bi) htzb += prog.blocks[bi].h.dot(z[bi]);
        const double dcb = -((p ? prog.b.dot(y) : 0.0) + htzb) / tau;
        const bool gap_okb = gapb <= opts.gap_tol || gapb <= opts.gap_tol * std::abs(pc) ||
                             std::abs(pc - dcb) <= opts.gap_tol * std::max(1.0, std::abs(pc));
        if (presb <= opts.feas_tol && dres <= opts.feas_tol && gap_okb)
            sol.status = SolveStatus::Optimal;
    }
    if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::MaxIterations) {
        sol.x = x / tau;
        sol.y = p ? Vec(y / tau) : Vec();
        sol.z = Vec(prog.cone_dim());
        sol.s = Vec(prog.cone_dim());
        int off = 0;
        for (size_t bi = 0; bi < nb; ++bi) {
            sol.z.segment(off, prog.blocks[bi].dim) = z[bi] / tau;
            sol.s.segment(off, prog.blocks[bi].dim) = s[bi] / tau;
            off += prog.blocks[bi].dim;
        }
        sol.pcost = prog.cost.dot(sol.x) + prog.cost_offset;
        double htz = 0;
        off = 0;
        for (size_t bi = 0; bi < nb; ++bi) {
            htz += prog.blocks[bi].h.dot(sol.z.segment(off, prog.blocks[bi].dim));
            off += prog.blocks[bi].dim;
        }
        sol.dcost = -(p ? prog.b.dot(sol.y) : 0.0) - htz + prog.cost_offset;
        sol.gap = sol.s.dot(sol.z);
        // final residuals for the reported point
        apply_G(prog, sol.x, Gx);
        std::vector<Vec> zf(nb);
        off = 0;
        for (size_t bi = 0; bi < nb; ++bi) {
            zf[bi] = sol.z.segment(off, prog.blocks[bi].dim);
            off += prog.blocks[bi].dim;
        }
        const Vec atyf = p ? Vec(prog.A.transpose() * sol.y) : Vec::Zero(n);
        sol.dres = (atyf + apply_GT(prog, zf) + prog.cost).norm() / cnorm;
        double f3n = 0;
        off = 0;
        for (size_t bi = 0; bi < nb; ++bi) {
            f3n += (prog.blocks[bi].h - Gx[bi] - sol.s.segment(off, prog.blocks[bi].dim)).squaredNorm();
            off += prog.blocks[bi].dim;
        }
        sol.pres = std::max(p ? (prog.b - prog.A * sol.x).norm() / bnorm : 0.0, std::sqrt(f3n) / hnorm);
    }
    return sol;
}

} // namespace opack::ipm
