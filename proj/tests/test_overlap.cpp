#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opack/overlap.hpp"
#include "opack/rng.hpp"
#include "oracles.hpp"

using namespace opack;

namespace {

Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

Mat random_rotation(int d, Rng& rng) {
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    Mat q = Eigen::HouseholderQR<Mat>(a).householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

Ellipsoid random_ellipsoid(int d, Rng& rng, double rmin = 0.4, double rmax = 1.4) {
    Vec radii(d);
    for (int i = 0; i < d; ++i) radii[i] = rng.uniform(rmin, rmax);
    std::sort(radii.data(), radii.data() + d, std::greater<double>());
    const Mat q = random_rotation(d, rng);
    Vec c(d);
    for (int i = 0; i < d; ++i) c[i] = rng.uniform(-0.8, 0.8);
    return Ellipsoid(c, SymMat(Mat(q * radii.asDiagonal() * q.transpose())));
}

} // namespace

TEST_CASE("intersect_test basics") {
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    SUBCASE("identical ellipsoids overlap at the center") {
        const auto r = intersect_test(a, a);
        CHECK(r.kind == IntersectKind::Overlapping);
        CHECK(r.witness.norm() < 1e-6);
        CHECK(r.value < 1e-6);
    }
    SUBCASE("unit balls three apart are disjoint") {
        const auto r = intersect_test(a, Ellipsoid::sphere(vec3(3, 0, 0), 1.0));
        CHECK(r.kind == IntersectKind::Disjoint);
    }
    SUBCASE("unit balls exactly two apart touch") {
        const auto r = intersect_test(a, Ellipsoid::sphere(vec3(2, 0, 0), 1.0));
        CHECK(r.kind == IntersectKind::Touching);
    }
}

TEST_CASE("intersect_test iteration cap raises a numerical error") {
    // thin disjoint ellipsoids with overlapping bounding balls: no shortcut
    // certificate applies, so Newton must actually run
    Vec ra(3), rb(3);
    ra << 1.0, 0.1, 0.1;
    rb << 0.8, 0.15, 0.1;
    const Ellipsoid a = Ellipsoid::axis_aligned(Vec::Zero(3), ra);
    const Ellipsoid b = Ellipsoid::axis_aligned(vec3(0.3, 0.45, 0.1), rb);
    CHECK_THROWS_AS(intersect_test(a, b, 1), NumericalError);
    CHECK(intersect_test(a, b).kind == IntersectKind::Disjoint);
}

TEST_CASE("identical unit balls measure 3 with the ball inscribed") {
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    const OverlapReport rep = measure_overlap(a, a);
    REQUIRE(rep.overlapping);
    CHECK(rep.value == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(rep.gap <= 1e-6);
    REQUIRE(rep.inscribed.has_value());
    CHECK((rep.inscribed->shape().mat() - Mat::Identity(3, 3)).norm() < 1e-4);
    CHECK(rep.inscribed->center().norm() < 1e-5);
}

TEST_CASE("disjoint and touching pairs give the NoOverlap marker") {
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    CHECK(!measure_overlap(a, Ellipsoid::sphere(vec3(3, 0, 0), 1.0)).overlapping);
    CHECK(!measure_overlap(a, Ellipsoid::sphere(vec3(2, 0, 0), 1.0)).overlapping);
}

TEST_CASE("two-ball lens agrees with the spheroid oracle") {
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    const Ellipsoid b = Ellipsoid::sphere(vec3(1, 0, 0), 1.0);
    const OverlapReport rep = measure_overlap(a, b);
    REQUIRE(rep.overlapping);
    const double oracle = oracles::lens_max_trace(1.0, 1.0, 1.0);
    CHECK(std::abs(rep.value - oracle) <= 1e-3);
}

TEST_CASE("random two-ball lenses agree with the oracle") {
    Rng rng(404, 0);
    for (int t = 0; t < 8; ++t) {
        const double r1 = rng.uniform(0.6, 1.4);
        const double r2 = rng.uniform(0.6, 1.4);
        const double dist = rng.uniform(0.3 * (r1 + r2), 0.95 * (r1 + r2));
        const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), r1);
        const Ellipsoid b = Ellipsoid::sphere(vec3(dist, 0, 0), r2);
        const OverlapReport rep = measure_overlap(a, b);
        REQUIRE(rep.overlapping);
        CHECK(std::abs(rep.value - oracles::lens_max_trace(r1, r2, dist)) <= 1e-3);
        CHECK(rep.gap <= 1e-6);
    }
}

TEST_CASE("sphere_overlap closed form") {
    CHECK(sphere_overlap(0.5, 0.5, Vec::Zero(2), Vec::Unit(2, 0)) == doctest::Approx(0.0));
    CHECK(sphere_overlap(0.5, 0.5, Vec::Zero(2), 0.6 * Vec::Unit(2, 0)) == doctest::Approx(0.4));
    CHECK_THROWS_AS(sphere_overlap(-0.5, 0.5, Vec::Zero(2), Vec::Zero(2)), InvalidInput);
}

TEST_CASE("linearization is exact at the linearization point") {
    Rng rng(11, 3);
    for (int t = 0; t < 6; ++t) {
        Ellipsoid a = random_ellipsoid(3, rng);
        Ellipsoid b = random_ellipsoid(3, rng);
        const auto probe = intersect_test(a, b);
        if (probe.kind != IntersectKind::Overlapping) continue;
        const OverlapReport rep = measure_overlap(a, b);
        REQUIRE(rep.overlapping);
        const double lin = linearized_overlap(*rep.duals, a.center(), b.center(), a.sigma(), b.sigma());
        CHECK(std::abs(lin - rep.value) <= 1e-6 * (1.0 + std::abs(rep.value)));
        CHECK(rep.duals->feasibility_residual() <= 1e-6);
    }
}

TEST_CASE("linearization does not increase when sigma shrinks") {
    Rng rng(17, 5);
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    const Ellipsoid b = Ellipsoid::sphere(vec3(0.8, 0.1, 0.0), 1.0);
    const OverlapReport rep = measure_overlap(a, b);
    REQUIRE(rep.overlapping);
    for (int t = 0; t < 20; ++t) {
        const double shrink = rng.uniform(0.3, 1.0);
        const SymMat smaller(Mat(shrink * a.sigma().mat()));
        const double lin = linearized_overlap(*rep.duals, a.center(), b.center(), smaller, b.sigma());
        const double lin0 = linearized_overlap(*rep.duals, a.center(), b.center(), a.sigma(), b.sigma());
        CHECK(lin <= lin0 + 1e-9); // Q >= 0 makes the map monotone in Sigma
    }
}

TEST_CASE("overlap value vanishes along a separation path") {
    const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), 1.0);
    double prev = 4.0;
    for (double dist : {1.2, 1.5, 1.8, 1.95, 1.99}) {
        const OverlapReport rep = measure_overlap(a, Ellipsoid::sphere(vec3(dist, 0, 0), 1.0));
        REQUIRE(rep.overlapping);
        CHECK(rep.value < prev);
        prev = rep.value;
    }
    CHECK(prev < 0.25); // thin-lens trace decays like the sqrt of the gap
}

TEST_CASE("symmetry in the argument order") {
    Rng rng(31, 8);
    for (int t = 0; t < 5; ++t) {
        Ellipsoid a = random_ellipsoid(3, rng);
        Ellipsoid b = random_ellipsoid(3, rng);
        if (intersect_test(a, b).kind != IntersectKind::Overlapping) continue;
        const double vab = measure_overlap(a, b).value;
        const double vba = measure_overlap(b, a).value;
        CHECK(std::abs(vab - vba) <= 1e-8 * (1.0 + vab));
    }
}

TEST_CASE("rigid motion invariance") {
    Rng rng(37, 9);
    const Ellipsoid a = random_ellipsoid(3, rng, 0.6, 1.2);
    Ellipsoid b = random_ellipsoid(3, rng, 0.6, 1.2);
    REQUIRE(intersect_test(a, b).kind == IntersectKind::Overlapping);
    const double v0 = measure_overlap(a, b).value;
    for (int t = 0; t < 5; ++t) {
        const Mat q = random_rotation(3, rng);
        Vec shift(3);
        for (int i = 0; i < 3; ++i) shift[i] = rng.uniform(-2, 2);
        const Ellipsoid a2(q * a.center() + shift, SymMat(Mat(q * a.shape().mat() * q.transpose())));
        const Ellipsoid b2(q * b.center() + shift, SymMat(Mat(q * b.shape().mat() * q.transpose())));
        CHECK(std::abs(measure_overlap(a2, b2).value - v0) <= 1e-6 * (1.0 + v0));
    }
}

TEST_CASE("monotone in the shape: enlarging one ellipsoid") {
    Rng rng(41, 10);
    for (int t = 0; t < 5; ++t) {
        const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), rng.uniform(0.7, 1.1));
        const Ellipsoid b = Ellipsoid::sphere(vec3(rng.uniform(0.3, 0.9), 0, 0), rng.uniform(0.7, 1.1));
        if (intersect_test(a, b).kind != IntersectKind::Overlapping) continue;
        const double v0 = measure_overlap(a, b).value;
        const double grow = rng.uniform(1.05, 1.4);
        const Ellipsoid a2(a.center(), SymMat(Mat(std::sqrt(grow) * a.shape().mat())),
                           SymMat(Mat(grow * a.sigma().mat())));
        CHECK(measure_overlap(a2, b).value >= v0 - 1e-7);
    }
}

TEST_CASE("sphere overlap lower-bounds the SDP measure") {
    Rng rng(43, 11);
    for (int t = 0; t < 10; ++t) {
        const double r1 = rng.uniform(0.5, 1.2), r2 = rng.uniform(0.5, 1.2);
        const double dist = rng.uniform(0.2, 0.98 * (r1 + r2));
        const Ellipsoid a = Ellipsoid::sphere(Vec::Zero(3), r1);
        const Ellipsoid b = Ellipsoid::sphere(vec3(dist, 0, 0), r2);
        const double xi = sphere_overlap(r1, r2, a.center(), b.center());
        const auto rep = measure_overlap(a, b);
        if (!rep.overlapping) {
            CHECK(xi <= 1e-12);
            continue;
        }
        // the inscribed ball of diameter xi gives trace >= (dim/2) xi
        CHECK(rep.value >= 1.5 * xi - 1e-6);
    }
}

TEST_CASE("2D overlap works through the same path") {
    Vec c0 = Vec::Zero(2), c1(2);
    c1 << 0.7, 0.0;
    const Ellipsoid a = Ellipsoid::sphere(c0, 1.0);
    const Ellipsoid b = Ellipsoid::sphere(c1, 0.8);
    const OverlapReport rep = measure_overlap(a, b);
    REQUIRE(rep.overlapping);
    CHECK(rep.value > 0.0);
    CHECK(rep.gap <= 1e-6);
    const double lin = linearized_overlap(*rep.duals, a.center(), b.center(), a.sigma(), b.sigma());
    CHECK(std::abs(lin - rep.value) <= 1e-6);
}
