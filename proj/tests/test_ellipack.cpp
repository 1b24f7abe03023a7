#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opack/ellipack.hpp"

using namespace opack;

namespace {

Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

EllipackProblem tight_problem(int n_bodies, double container_r = 1.0) {
    EllipackProblem p(Container{Ellipsoid::sphere(Vec::Zero(3), container_r)});
    for (int i = 0; i < n_bodies; ++i) p.specs.push_back(AxisSpec(vec3(0.55, 0.45, 0.35)));
    return p;
}

} // namespace

TEST_CASE("config validation") {
    TrustRegionConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrustRegionConfig bad = cfg;
    bad.eta1 = 0.95;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    HomologConfig h;
    h.pairs = {{0, 1}, {1, 2}};
    CHECK_THROWS_AS(h.validate(4), InvalidInput); // overlapping pairs
}

TEST_CASE("active set selection brackets") {
    PairMeasurement m;
    m.values = {1.0, 0.95, 0.6, 0.3};
    m.duals.assign(4, DualBlocks{});
    m.t_star = 1.0;
    TrustRegionConfig cfg; // eta1 = .5, eta2 = .9
    const auto f = select_active_set(m, cfg);
    // full eta1 rule: everything >= 0.5
    CHECK(f == std::vector<int>{0, 1, 2});
    SUBCASE("single pair") {
        PairMeasurement one;
        one.values = {0.4};
        one.duals.assign(1, DualBlocks{});
        one.t_star = 0.4;
        CHECK(select_active_set(one, cfg) == std::vector<int>{0});
    }
    SUBCASE("all equal") {
        PairMeasurement eq;
        eq.values = {0.2, 0.2, 0.2};
        eq.duals.assign(3, DualBlocks{});
        eq.t_star = 0.2;
        CHECK(select_active_set(eq, cfg).size() == 3);
    }
}

TEST_CASE("init_state is feasible and deterministic") {
    const EllipackProblem p = tight_problem(4);
    const PackingState st = init_state(p, 2024);
    CHECK(state_residual(st, p) <= 1e-8);
    const PackingState st2 = init_state(p, 2024);
    CHECK(PackingState::c_distance(st, st2) == 0.0);
    // sphere spec freezes the shape at r I
    EllipackProblem sp = p;
    sp.specs[0] = AxisSpec(vec3(0.4, 0.4, 0.4));
    const PackingState st3 = init_state(sp, 7);
    CHECK(st3.bodies[0].degenerate);
    CHECK((st3.bodies[0].S.mat() - 0.4 * Mat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("well separated bodies terminate with no overlap") {
    EllipackProblem p(Container{Ellipsoid::sphere(Vec::Zero(3), 10.0)});
    p.specs.push_back(AxisSpec(vec3(0.5, 0.4, 0.3)));
    p.specs.push_back(AxisSpec(vec3(0.5, 0.4, 0.3)));
    PackingState st = init_state(p, 5);
    st.bodies[0].c = vec3(-3.0, 0, 0);
    st.bodies[1].c = vec3(3.0, 0, 0);
    TrustRegionConfig cfg;
    const EllipackResult res = pack_ellipsoids(p, st, cfg);
    CHECK(res.termination == "no_overlap");
    CHECK(res.measurement.t_star == 0.0);
}

TEST_CASE("two forced ellipsoids: monotone decrease and contract checks") {
    // two bodies that cannot avoid overlapping in a tight ball: both contain
    // the central region no matter how they are placed
    EllipackProblem p(Container{Ellipsoid::sphere(Vec::Zero(3), 0.7)});
    p.specs.push_back(AxisSpec(vec3(0.62, 0.5, 0.45)));
    p.specs.push_back(AxisSpec(vec3(0.62, 0.5, 0.45)));
    const PackingState st = init_state(p, 11);
    TrustRegionConfig cfg;
    cfg.max_iter = 40;
    const EllipackResult res = pack_ellipsoids(p, st, cfg);
    REQUIRE(!res.history.empty());
    // accepted steps decrease t* by at least c1 * Lambda
    double last_t = res.history.front().t_star;
    for (const auto& row : res.history) {
        CHECK(row.lambda_pred >= 0.0);
        if (row.accepted) {
            CHECK(row.t_star <= last_t + 1e-9);
            last_t = row.t_star;
        }
    }
    CHECK(state_residual(res.state, p) <= 1e-6);
    CHECK(res.measurement.t_star > 0.0);
    CHECK((res.termination == "tol1" || res.termination == "max_iter" ||
           res.termination == "stationary"));
}

TEST_CASE("six-body tight instance satisfies the trust-region contracts") {
    EllipackProblem p = tight_problem(6, 1.05);
    const PackingState st = init_state(p, 29);
    TrustRegionConfig cfg;
    cfg.max_iter = 25;
    PairMeasurement m = measure_all(st, p, cfg.solver);
    PackingState cur = st;
    double rho = 0.1 * p.container.max_semi_axis();
    int consecutive_rejections = 0;
    for (int k = 0; k < cfg.max_iter && m.t_star > 0; ++k) {
        const TrIterateResult it = tr_iterate(cur, m, rho, p, cfg);
        CHECK(it.diag.lambda_pred >= 0.0);
        if (it.stationary) break;
        if (it.accepted) {
            // acceptance predicate, exactly as tested inside
            CHECK(it.diag.merit_candidate <= it.diag.merit - cfg.c1 * it.diag.lambda_pred + 1e-12);
            consecutive_rejections = 0;
        } else {
            ++consecutive_rejections;
            CHECK(consecutive_rejections <= 60);
        }
        if (it.diag.lambda_pred / rho <= cfg.tol1) break;
        cur = it.next;
        m = it.next_measurement;
        rho = it.next_rho;
    }
}

TEST_CASE("predicted decrease is monotone in rho and Lambda/rho nonincreasing") {
    EllipackProblem p = tight_problem(3, 0.9);
    const PackingState st = init_state(p, 3);
    TrustRegionConfig cfg;
    const PairMeasurement m = measure_all(st, p, cfg.solver);
    REQUIRE(m.t_star > 0);
    const auto active = select_active_set(m, cfg);
    std::vector<double> rhos{0.02, 0.05, 0.1, 0.2, 0.4};
    std::vector<double> lams;
    for (double rho : rhos) {
        const MasterBundle mb = build_master(st, p, active, m, rho, cfg);
        const ConicSolution sol = solve(mb.program, cfg.solver);
        REQUIRE(sol.status == SolveStatus::Optimal);
        lams.push_back(predicted_decrease(m.t_star, sol.objective_value));
    }
    for (size_t k = 1; k < lams.size(); ++k) {
        CHECK(lams[k] >= lams[k - 1] - 1e-8);                                  // increasing in rho
        CHECK(lams[k] / rhos[k] <= lams[k - 1] / rhos[k - 1] + 1e-6);          // ratio nonincreasing
    }
}

TEST_CASE("rejected candidates shrink the radius and keep the state") {
    EllipackProblem p = tight_problem(2, 0.8);
    const PackingState st = init_state(p, 17);
    TrustRegionConfig cfg;
    const PairMeasurement m = measure_all(st, p, cfg.solver);
    REQUIRE(m.t_star > 0);
    // a huge radius makes the linear model unreliable, often rejected
    const double rho = 5.0;
    const TrIterateResult it = tr_iterate(st, m, rho, p, cfg);
    if (!it.accepted) {
        CHECK(it.next_rho == doctest::Approx(cfg.phi1 * rho));
        CHECK(PackingState::c_distance(it.next, st) == 0.0);
    } else {
        CHECK(it.diag.merit_candidate <= it.diag.merit - cfg.c1 * it.diag.lambda_pred + 1e-12);
    }
}

TEST_CASE("master keeps the relaxation sound on accepted states") {
    EllipackProblem p = tight_problem(3, 1.0);
    const PackingState st = init_state(p, 23);
    TrustRegionConfig cfg;
    cfg.max_iter = 15;
    const EllipackResult res = pack_ellipsoids(p, st, cfg);
    for (const BodyState& b : res.state.bodies) {
        // Sigma >= S^2 within tolerance
        const Mat gap = b.Sigma.mat() - b.S.mat() * b.S.mat();
        CHECK(is_psd(SymMat(gap), 1e-7 * std::max(1.0, b.Sigma.norm())));
        CHECK(std::abs(b.S.trace() - p.specs[0].radii.sum()) <= 1e-7);
        CHECK(b.lambda >= -1e-9);
        CHECK(b.lambda <= 1.0 + 1e-9);
    }
}

TEST_CASE("homolog penalty stays inactive for separated enclosing spheres") {
    EllipackProblem p(Container{Ellipsoid::sphere(Vec::Zero(3), 8.0)});
    p.specs.push_back(AxisSpec(vec3(0.5, 0.4, 0.3)));
    p.specs.push_back(AxisSpec(vec3(0.5, 0.4, 0.3)));
    HomologConfig h;
    h.pairs = {{0, 1}};
    p.homolog = h;
    PackingState st = init_state(p, 31);
    st.bodies[0].c = vec3(-3.0, 0, 0);
    st.bodies[1].c = vec3(3.0, 0, 0);
    CHECK(homolog_eta(st, p) == 0.0);
    // overlapping enclosing spheres activate the penalty
    st.bodies[1].c = vec3(-2.0, 0, 0);
    CHECK(homolog_eta(st, p) > 0.0);
}

TEST_CASE("homolog run pushes the pair apart") {
    EllipackProblem p(Container{Ellipsoid::sphere(Vec::Zero(3), 3.0)});
    p.specs.push_back(AxisSpec(vec3(0.6, 0.5, 0.4)));
    p.specs.push_back(AxisSpec(vec3(0.6, 0.5, 0.4)));
    HomologConfig h;
    h.pairs = {{0, 1}};
    h.penalty_c = 100.0;
    h.lambda_factor = 1.25;
    p.homolog = h;
    PackingState st = init_state(p, 41);
    st.bodies[0].c = vec3(-0.2, 0.05, 0.0);
    st.bodies[1].c = vec3(0.2, -0.05, 0.0);
    const double eta0 = homolog_eta(st, p);
    REQUIRE(eta0 > 0.0);
    TrustRegionConfig cfg;
    cfg.max_iter = 30;
    const EllipackResult res = pack_ellipsoids(p, st, cfg);
    CHECK(homolog_eta(res.state, p) < eta0);
}

TEST_CASE("project_axes restores prescribed semi-axes for reporting") {
    EllipackProblem p = tight_problem(2, 0.8);
    const PackingState st = init_state(p, 47);
    TrustRegionConfig cfg;
    cfg.max_iter = 10;
    const EllipackResult res = pack_ellipsoids(p, st, cfg);
    const ProjectionReport rep = project_axes(res.state, p, cfg.solver);
    for (int i = 0; i < 2; ++i) {
        const Vec axes = eig_sym(rep.projected.bodies[i].S).values;
        CHECK((axes - p.specs[i].radii).norm() < 1e-9);
    }
    // sphere specs are unchanged by projection
    EllipackProblem sp = p;
    sp.specs[0] = AxisSpec(vec3(0.4, 0.4, 0.4));
    const PackingState st2 = init_state(sp, 3);
    const ProjectionReport rep2 = project_axes(st2, sp, cfg.solver);
    CHECK((rep2.projected.bodies[0].S.mat() - st2.bodies[0].S.mat()).norm() < 1e-12);
    CHECK(rep2.distortions[0] == doctest::Approx(0.0));
}
