#pragma once

// Dense symmetric-matrix kernel: eigendecomposition, definiteness tests,
// PSD square root, and the scaled-vectorization (svec) used by the cone layer.

#include <Eigen/Dense>

#include "opack/errors.hpp"

namespace opack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr int kMaxSymDim = 512;

// Symmetric real matrix. Entries are mirrored on construction so that
// (i,j) == (j,i) holds exactly; only small dense problems are supported.
class SymMat {
  public:
    SymMat() = default;

    explicit SymMat(int dim) : m_(Mat::Zero(dim, dim)) { check_dim(dim); }

    // symmetrizes: stores (a + a^T)/2
    explicit SymMat(const Mat& a) {
        if (a.rows() != a.cols()) throw InvalidInput("SymMat: matrix not square");
        check_dim(int(a.rows()));
        m_ = 0.5 * (a + a.transpose());
    }

    static SymMat identity(int dim) { return SymMat(Mat::Identity(dim, dim)); }

    static SymMat diag(const Vec& d) { return SymMat(Mat(d.asDiagonal())); }

    int dim() const { return int(m_.rows()); }
    const Mat& mat() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    // symmetric write: sets (i,j) and (j,i)
    void set(int i, int j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }

    double norm() const { return m_.norm(); }
    double trace() const { return m_.trace(); }
    bool all_finite() const { return m_.allFinite(); }

    SymMat operator+(const SymMat& o) const { return SymMat(Mat(m_ + o.m_)); }
    SymMat operator-(const SymMat& o) const { return SymMat(Mat(m_ - o.m_)); }
    SymMat operator*(double s) const { return SymMat(Mat(m_ * s)); }

  private:
    static void check_dim(int d) {
        if (d <= 0 || d > kMaxSymDim) throw InvalidInput("SymMat: dim out of range");
    }
    Mat m_;
};

inline double inner(const SymMat& a, const SymMat& b) {
    return (a.mat().array() * b.mat().array()).sum();
}

struct EigSym {
    Vec values;  // descending
    Mat vectors; // columns, same order as values
};

// Eigendecomposition of a symmetric matrix, eigenvalues descending.
// Reconstruction error is at most 1e-10 * max(1, ||m||_F).
EigSym eig_sym(const SymMat& m);

// true iff the smallest eigenvalue is >= -tol
bool is_psd(const SymMat& m, double tol);

// Matrix square root of a PSD matrix; eigenvalues in [-1e-10*||m||_F, 0)
// are clamped to zero, anything more negative is rejected.
SymMat sqrt_psd(const SymMat& m);

// ---- svec: scaled vectorization of symmetric matrices -------------------
//
// svec stacks the lower triangle column by column with off-diagonal entries
// scaled by sqrt(2), so that <A,B> = svec(A)^T svec(B).

inline int svec_dim(int d) { return d * (d + 1) / 2; }

Vec svec(const SymMat& a);
SymMat smat(const Vec& v);

// index of entry (i,j), i >= j, within svec of a d x d matrix
inline int svec_index(int d, int i, int j) {
    if (i < j) std::swap(i, j);
    return j * d - j * (j - 1) / 2 + (i - j);
}

} // namespace opack
