#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opack/rng.hpp"
#include "opack/symmat.hpp"

using namespace opack;

namespace {

SymMat random_psd(int d, Rng& rng) {
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    return SymMat(Mat(a * a.transpose()));
}

// determinant of a leading minor by Laplace expansion (test-side oracle)
double minor_det(const Mat& m, int k) {
    if (k == 1) return m(0, 0);
    double det = 0.0;
    for (int i = 0; i < k; ++i) {
        Mat sub(k - 1, k - 1);
        for (int r = 1; r < k; ++r) {
            int cc = 0;
            for (int c2 = 0; c2 < k; ++c2) {
                if (c2 == i) continue;
                sub(r - 1, cc++) = m(r, c2);
            }
        }
        det += ((i % 2) ? -1.0 : 1.0) * m(0, i) * minor_det(sub, k - 1);
    }
    return det;
}

} // namespace

TEST_CASE("identity eigenvalues") {
    const EigSym e = eig_sym(SymMat::identity(3));
    for (int i = 0; i < 3; ++i) CHECK(e.values[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotated diagonal recovers spectrum and frame") {
    const double th = 30.0 * M_PI / 180.0;
    Mat q(2, 2);
    q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    Vec lam(2);
    lam << 4.0, 1.0;
    const SymMat m(Mat(q * lam.asDiagonal() * q.transpose()));
    const EigSym e = eig_sym(m);
    CHECK(e.values[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    // round trip
    const Mat rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rec - m.mat()).norm() < 1e-10 * std::max(1.0, m.norm()));
    // leading eigenvector at 30 degrees (up to sign)
    CHECK(std::abs(std::abs(e.vectors.col(0).dot(q.col(0))) - 1.0) < 1e-12);
}

TEST_CASE("semi-axes from squared radii") {
    Vec r2(3);
    r2 << 16.0, 4.0, 1.0; // r = 4, 2, 1
    const EigSym e = eig_sym(SymMat::diag(r2));
    CHECK(std::sqrt(e.values[0]) == doctest::Approx(4.0));
    CHECK(std::sqrt(e.values[1]) == doctest::Approx(2.0));
    CHECK(std::sqrt(e.values[2]) == doctest::Approx(1.0));
}

TEST_CASE("eig reconstruction and orthogonality on random matrices") {
    Rng rng(42, 0);
    for (int t = 0; t < 25; ++t) {
        const int d = 2 + int(rng.below(6));
        SymMat m(d);
        for (int j = 0; j < d; ++j)
            for (int i = j; i < d; ++i) m.set(i, j, rng.normal());
        const EigSym e = eig_sym(m);
        for (int i = 0; i + 1 < d; ++i) CHECK(e.values[i] >= e.values[i + 1]);
        const Mat rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
        CHECK((rec - m.mat()).norm() <= 1e-10 * std::max(1.0, m.norm()));
        CHECK((e.vectors.transpose() * e.vectors - Mat::Identity(d, d)).norm() <= 1e-10);
    }
}

TEST_CASE("eig rejects non-finite input") {
    SymMat m(2);
    m.set(0, 1, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(eig_sym(m), InvalidInput);
}

TEST_CASE("is_psd tolerance semantics") {
    CHECK(is_psd(SymMat(2), 0.0)); // zero matrix
    Vec d1(2);
    d1 << 1.0, -1e-14;
    CHECK(is_psd(SymMat::diag(d1), 1e-12));
    Vec d2(2);
    d2 << 1.0, -1.0;
    CHECK(!is_psd(SymMat::diag(d2), 1e-12));
    CHECK_THROWS_AS(is_psd(SymMat(2), -1.0), InvalidInput);
}

TEST_CASE("is_psd agrees with leading minors on small matrices") {
    Rng rng(9, 9);
    for (int t = 0; t < 40; ++t) {
        const int d = 1 + int(rng.below(5));
        SymMat m = random_psd(d, rng);
        if (t % 2 == 0) {
            // shift to sometimes make it indefinite
            SymMat shift = SymMat::identity(d) * (-rng.uniform(0.0, 2.0));
            m = m + shift;
        }
        if (is_psd(m, 0.0)) {
            for (int k = 1; k <= d; ++k) CHECK(minor_det(m.mat(), k) >= -1e-9 * std::max(1.0, m.norm()));
        }
    }
}

TEST_CASE("sqrt_psd basics") {
    const SymMat r = sqrt_psd(SymMat::identity(3));
    CHECK((r.mat() - Mat::Identity(3, 3)).norm() < 1e-12);
    Vec d(2);
    d << 4.0, 9.0;
    const SymMat r2 = sqrt_psd(SymMat::diag(d));
    CHECK(r2(0, 0) == doctest::Approx(2.0));
    CHECK(r2(1, 1) == doctest::Approx(3.0));
}

TEST_CASE("sqrt_psd squares back on random PSD matrices") {
    Rng rng(1234, 0);
    for (int t = 0; t < 30; ++t) {
        const int d = 2 + int(rng.below(6));
        const SymMat m = random_psd(d, rng);
        const SymMat r = sqrt_psd(m);
        CHECK(is_psd(r, 1e-10));
        CHECK((SymMat(Mat(r.mat() * r.mat())) - m).norm() <= 1e-8 * std::max(1.0, m.norm()));
    }
}

TEST_CASE("sqrt_psd rejects indefinite input") {
    Vec d(2);
    d << 1.0, -0.5;
    CHECK_THROWS_AS(sqrt_psd(SymMat::diag(d)), InvalidInput);
}

TEST_CASE("svec round trip preserves inner products") {
    Rng rng(77, 0);
    for (int t = 0; t < 20; ++t) {
        const int d = 2 + int(rng.below(5));
        SymMat a(d), b(d);
        for (int j = 0; j < d; ++j)
            for (int i = j; i < d; ++i) {
                a.set(i, j, rng.normal());
                b.set(i, j, rng.normal());
            }
        CHECK(svec(a).dot(svec(b)) == doctest::Approx(inner(a, b)).epsilon(1e-12));
        CHECK((smat(svec(a)) - a).norm() < 1e-14 * std::max(1.0, a.norm()));
    }
}

TEST_CASE("dimension cap is enforced") {
    CHECK_THROWS_AS(SymMat(513), InvalidInput);
}
