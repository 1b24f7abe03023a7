#pragma once

// Internal form and homogeneous self-dual interior-point method.
//
// The internal problem is
//     min c^T x   s.t.   A x = b,   s = h - G x,   s in K,
// with x fully free and K a product of nonnegative, second-order and PSD
// (svec coordinates) blocks. G is stored block-wise with sparse rows; spec
// format programs are reduced to this form by the presolve in conic_solve.

#include <vector>

#include "opack/cone_program.hpp"
#include "opack/symmat.hpp"

namespace opack::ipm {

enum class BlockKind { NonNeg, Soc, Psd };

struct ConeBlock {
    BlockKind kind = BlockKind::NonNeg;
    int dim = 0;     // number of cone coordinates (svec length for PSD)
    int mat_dim = 0; // PSD matrix dimension, 0 otherwise
    // rows of G restricted to this block: s_block = h - sum_k coef * x[col]
    std::vector<std::vector<std::pair<int, double>>> rows;
    Vec h;
};

struct InternalProgram {
    int nx = 0;
    Vec cost;
    double cost_offset = 0.0;
    std::vector<ConeBlock> blocks;
    Mat A; // p x nx, p small
    Vec b;

    int cone_dim() const {
        int m = 0;
        for (const auto& blk : blocks) m += blk.dim;
        return m;
    }
};

struct IterInfo {
    double pcost, dcost, gap, pres, dres, tau, kappa, step;
};

struct InternalSolution {
    SolveStatus status = SolveStatus::MaxIterations;
    Vec x;       // solution or improving ray (DualInfeasible)
    Vec y;       // equality multipliers or Farkas certificate (PrimalInfeasible)
    Vec z;       // cone duals, concatenated per block
    Vec s;       // cone slacks
    double pcost = 0.0, dcost = 0.0;
    double gap = 0.0, pres = 0.0, dres = 0.0;
    double certificate_quality = 0.0;
    int iterations = 0;
    std::vector<IterInfo> trace;
};

InternalSolution solve_internal(const InternalProgram& prog, const SolverOptions& opts);

// Jordan-algebra identity element of the block (ones / (1,0,..) / svec(I)).
Vec cone_identity(const ConeBlock& blk);

// Largest t <= cap with v + t*dv remaining in the cone (v strictly interior).
double max_cone_step(const ConeBlock& blk, const Vec& v, const Vec& dv, double cap);

} // namespace opack::ipm
