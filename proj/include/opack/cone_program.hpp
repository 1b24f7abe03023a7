#pragma once

// Standard-form cone programs: minimize/maximize a linear objective over a
// product of PSD blocks (svec coordinates), second-order cones, nonnegative
// scalars and free variables, subject to linear equality constraints.

#include <string>
#include <vector>

#include "opack/symmat.hpp"

namespace opack {

// Variable order within a program: PSD blocks (svec each, in listed order),
// then second-order cones, then nonnegative scalars, then free variables.
struct ConeLayout {
    std::vector<int> psd_block_dims; // matrix dims
    std::vector<int> soc_dims;       // vector dims, first coordinate is the cone "top"
    int nonneg_count = 0;
    int free_count = 0;

    int psd_total() const {
        int t = 0;
        for (int d : psd_block_dims) t += svec_dim(d);
        return t;
    }
    int soc_total() const {
        int t = 0;
        for (int d : soc_dims) t += d;
        return t;
    }
    int total() const { return psd_total() + soc_total() + nonneg_count + free_count; }

    int psd_offset(int block) const {
        int t = 0;
        for (int b = 0; b < block; ++b) t += svec_dim(psd_block_dims[b]);
        return t;
    }
    int soc_offset(int block) const {
        int t = psd_total();
        for (int b = 0; b < block; ++b) t += soc_dims[b];
        return t;
    }
    int nonneg_offset() const { return psd_total() + soc_total(); }
    int free_offset() const { return nonneg_offset() + nonneg_count; }

    void validate() const;
};

// One equality row, stored sparse: sum_k coef[k] * x[col[k]] = rhs.
struct EqRow {
    std::vector<int> cols;
    std::vector<double> coefs;
    double rhs = 0.0;

    void add(int col, double w) {
        cols.push_back(col);
        coefs.push_back(w);
    }
};

enum class Sense { Minimize, Maximize };

struct ConicProgram {
    ConeLayout layout;
    Vec objective;              // dense, length layout.total()
    std::vector<EqRow> rows;    // insertion order is preserved
    Sense sense = Sense::Minimize;

    void validate() const;

    // structured text dump for offline reproduction of solver failures
    void dump(const std::string& path) const;
    static ConicProgram load(const std::string& path);
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations };

const char* to_string(SolveStatus s);

struct SolverOptions {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8; // used both as absolute and relative threshold
    int max_iter = 200;
    uint64_t seed = 0; // recorded for the determinism contract; the method is deterministic
};

struct ConicSolution {
    SolveStatus status = SolveStatus::MaxIterations;
    Vec primal;     // length layout.total(); for infeasible statuses holds the certificate ray
    Vec dual_eq;    // one multiplier per equality row
    Vec dual_slack; // cone-structured dual slack (minimize: c - A^T y; maximize: A^T y - c)
    double objective_value = 0.0;
    double gap = 0.0;        // |primal - dual| objective gap (complementarity)
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;

    // For PrimalInfeasible, `dual_eq` holds a Farkas certificate y with
    // A^T y supported on the dual cone and b^T y > 0. For DualInfeasible,
    // `primal` holds an improving ray. `certificate_quality` records the
    // residual of the certificate identities.
    double certificate_quality = 0.0;
};

// Incremental assembler for spec-format programs. Variables are allocated
// first (free/nonneg/soc/psd), then rows reference them by column index.
class ProgramBuilder {
  public:
    int add_free(int k = 1);
    int add_nonneg(int k = 1);
    int add_soc(int dim);
    int add_psd(int d);

    void set_objective(int col, double w);
    // objective contribution <W, X_block> on a PSD block given by base column
    void set_objective_psd(int base_col, const SymMat& w);

    int new_row(double rhs);
    void coef(int row, int col, double w);

    // a^T x + slack = rhs with fresh nonneg slack (encodes a^T x <= rhs)
    void add_le(const std::vector<int>& cols, const std::vector<double>& coefs, double rhs);

    ConicProgram build(Sense sense);

    // layout column of a builder id, valid after build()
    int layout_col(int builder_id) const { return remap_.at(builder_id); }

    int n_free() const { return nfree_; }

  private:
    std::vector<int> remap_;
    struct Var {
        char kind; // 'f','n','s','p'
        int dim;   // soc dim or psd matrix dim (1 for scalars)
    };
    std::vector<Var> vars_;
    int nfree_ = 0, nnonneg_ = 0;
    std::vector<int> socs_, psds_;
    std::vector<std::pair<int, double>> obj_; // (local col id, weight)
    struct RawRow {
        std::vector<std::pair<int, double>> terms;
        double rhs;
    };
    std::vector<RawRow> rows_;
    int col_counter_ = 0;
};

// Affine symmetric-matrix expression, used to assemble LMI constraints:
// M(x) = constant + sum_k x_k * Coef_k, emitted as "M(x) is PSD" via a fresh
// PSD slack block and one equality row per svec coordinate.
class AffineMatExpr {
  public:
    explicit AffineMatExpr(int d) : d_(d), constant_(d) {}

    int dim() const { return d_; }
    void add_constant(int i, int j, double v);
    void add_term(int i, int j, int col, double w); // symmetric: also (j,i)

    // emits "expression >= 0 (PSD)"; returns the slack block's base column
    int emit_psd(ProgramBuilder& b) const;

  private:
    int d_;
    SymMat constant_;
    struct Term {
        int i, j, col;
        double w;
    };
    std::vector<Term> terms_;
};

} // namespace opack
