#include "opack/symmat.hpp"

#include <cmath>

namespace opack {

EigSym eig_sym(const SymMat& m) {
    if (!m.all_finite()) throw InvalidInput("eig_sym: non-finite entries");
    Eigen::SelfAdjointEigenSolver<Mat> es(m.mat());
    if (es.info() != Eigen::Success) throw NumericalError("eig_sym: eigensolver failed");
    const int d = m.dim();
    EigSym out;
    out.values = Vec(d);
    out.vectors = Mat(d, d);
    // Eigen returns ascending order
    for (int k = 0; k < d; ++k) {
        out.values[k] = es.eigenvalues()[d - 1 - k];
        out.vectors.col(k) = es.eigenvectors().col(d - 1 - k);
    }
    return out;
}

bool is_psd(const SymMat& m, double tol) {
    if (tol < 0) throw InvalidInput("is_psd: negative tolerance");
    if (!m.all_finite()) throw InvalidInput("is_psd: non-finite entries");
    Eigen::SelfAdjointEigenSolver<Mat> es(m.mat(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

SymMat sqrt_psd(const SymMat& m) {
    const EigSym e = eig_sym(m);
    const double scale = std::max(1.0, m.norm());
    if (e.values.minCoeff() < -1e-10 * scale)
        throw InvalidInput("sqrt_psd: matrix is not positive semidefinite");
    Vec r = e.values.cwiseMax(0.0).cwiseSqrt();
    return SymMat(Mat(e.vectors * r.asDiagonal() * e.vectors.transpose()));
}

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

Vec svec(const SymMat& a) {
    const int d = a.dim();
    Vec v(svec_dim(d));
    int k = 0;
    for (int j = 0; j < d; ++j) {
        v[k++] = a(j, j);
        for (int i = j + 1; i < d; ++i) v[k++] = kSqrt2 * a(i, j);
    }
    return v;
}

SymMat smat(const Vec& v) {
    // solve d(d+1)/2 = len
    const int len = int(v.size());
    const int d = int(std::round((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
    if (svec_dim(d) != len) throw InvalidInput("smat: length is not a triangular number");
    SymMat a(d);
    int k = 0;
    for (int j = 0; j < d; ++j) {
        a.set(j, j, v[k++]);
        for (int i = j + 1; i < d; ++i) {
            a.set(i, j, v[k++] / kSqrt2);
        }
    }
    return a;
}

} // namespace opack
