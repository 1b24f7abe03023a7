#include "opack/chromosim.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "opack/parallel.hpp"
#include "opack/rng.hpp"

namespace opack {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const std::vector<CtEntry>& default_ct_table() {
    static const std::vector<CtEntry> table = {
        {"chr1", 37.05, true},  {"chr2", 36.45, true},  {"chr3", 29.85, true},
        {"chr4", 28.65, true},  {"chr5", 27.15, true},  {"chr6", 25.65, true},
        {"chr7", 23.85, true},  {"chr8", 21.90, true},  {"chr9", 21.00, true},
        {"chr10", 20.25, true}, {"chr11", 20.10, true}, {"chr12", 19.80, true},
        {"chr13", 17.10, true}, {"chr14", 15.90, true}, {"chr15", 15.00, true},
        {"chr16", 13.35, true}, {"chr17", 11.85, true}, {"chr18", 11.40, true},
        {"chr19", 9.45, true},  {"chr20", 9.30, true},  {"chr21", 7.05, true},
        {"chr22", 7.50, true},  {"chrX", 23.25, false}, {"chrY", 8.70, false},
    };
    return table;
}

void ChromoScenario::validate() const {
    if (nucleus_volume <= 0) throw InvalidInput("ChromoScenario: nonpositive nucleus volume");
    if (ct_table.empty()) throw InvalidInput("ChromoScenario: empty CT table");
    for (const CtEntry& e : ct_table)
        if (e.mean_volume <= 0) throw InvalidInput("ChromoScenario: nonpositive CT volume");
    if (!(ratio2_mean >= 1.0 && ratio3_mean >= ratio2_mean))
        throw InvalidInput("ChromoScenario: axis ratios must satisfy 1 <= r2 <= r3");
    if (trials < 1) throw InvalidInput("ChromoScenario: need at least one trial");
}

ChromoScenario named_scenario(const std::string& name) {
    ChromoScenario s;
    s.name = name;
    if (name == "small-spherical") {
        s.shape = NucleusShape::Spherical;
        s.nucleus_volume = 500.0;
    } else if (name == "small-ellipsoidal") {
        s.shape = NucleusShape::FlatEllipsoidal;
        s.nucleus_volume = 500.0;
    } else if (name == "medium-spherical") {
        s.shape = NucleusShape::Spherical;
        s.nucleus_volume = 1000.0;
    } else if (name == "medium-ellipsoidal") {
        s.shape = NucleusShape::FlatEllipsoidal;
        s.nucleus_volume = 1000.0;
    } else if (name == "large-spherical") {
        s.shape = NucleusShape::Spherical;
        s.nucleus_volume = 1600.0;
    } else if (name == "large-ellipsoidal") {
        s.shape = NucleusShape::FlatEllipsoidal;
        s.nucleus_volume = 1600.0;
    } else {
        throw InvalidInput("unknown scenario: " + name);
    }
    return s;
}

Container nucleus_container(NucleusShape shape, double volume) {
    if (shape == NucleusShape::Spherical) {
        const double r = std::cbrt(3.0 * volume / (4.0 * kPi));
        return Container{Ellipsoid::sphere(Vec::Zero(3), r)};
    }
    // flat ellipsoid with semi-axes in ratio 1:2:4
    const double a = std::cbrt(3.0 * volume / (4.0 * kPi * 8.0));
    Vec radii(3);
    radii << 4.0 * a, 2.0 * a, a;
    return Container{Ellipsoid::axis_aligned(Vec::Zero(3), radii)};
}

TrialSetup generate_trial(const ChromoScenario& scenario, int trial_index) {
    scenario.validate();
    Rng rng(scenario.seed, substream(scenario.seed, 0x7100 + uint64_t(trial_index)));

    EllipackProblem problem(nucleus_container(scenario.shape, scenario.nucleus_volume));
    TrialSetup setup{std::move(problem), {}, {}};

    HomologConfig homolog;
    homolog.penalty_c = scenario.penalty_c;
    homolog.lambda_factor = scenario.lambda_factor;

    for (size_t ci = 0; ci < scenario.ct_table.size(); ++ci) {
        const CtEntry& entry = scenario.ct_table[ci];
        const int copies = entry.autosome ? 2 : 1;
        std::vector<int> copy_bodies;
        for (int copy = 0; copy < copies; ++copy) {
            double vol;
            do {
                vol = rng.normal(entry.mean_volume, scenario.volume_sd_frac * entry.mean_volume);
            } while (vol <= 0.0);
            double a2, a3;
            do {
                a2 = rng.normal(scenario.ratio2_mean, scenario.axis_ratio_sd_frac * scenario.ratio2_mean);
                a3 = rng.normal(scenario.ratio3_mean, scenario.axis_ratio_sd_frac * scenario.ratio3_mean);
            } while (!(1.0 <= a2 && a2 <= a3));
            const double s = std::cbrt(3.0 * vol / (4.0 * kPi * a2 * a3));
            Vec radii(3);
            radii << a3 * s, a2 * s, s;
            copy_bodies.push_back(int(setup.problem.specs.size()));
            setup.problem.specs.push_back(AxisSpec(radii));
            setup.ct_index.push_back(int(ci));
            setup.sampled_volumes.push_back(vol);
        }
        if (copies == 2 && scenario.homolog_penalty)
            homolog.pairs.push_back({copy_bodies[0], copy_bodies[1]});
    }
    if (scenario.homolog_penalty) setup.problem.homolog = homolog;
    return setup;
}

TrialResult run_trial(const ChromoScenario& scenario, int trial_index, const TrustRegionConfig& cfg,
                      int threads) {
    TrialResult res;
    res.scenario = scenario.name;
    res.trial_index = trial_index;
    res.seed = scenario.seed;
    try {
        const TrialSetup setup = generate_trial(scenario, trial_index);
        const PackingState init =
            init_state(setup.problem, substream(scenario.seed, 0x5717 + uint64_t(trial_index)));
        const EllipackResult run = pack_ellipsoids(setup.problem, init, cfg, threads);
        res.t_star = run.measurement.t_star;
        res.eta = homolog_eta(run.state, setup.problem);
        const double c_pen = setup.problem.homolog ? setup.problem.homolog->penalty_c : 0.0;
        res.final_objective = res.t_star + c_pen * res.eta;
        res.iterations = run.iterations;
        res.termination = run.termination;
        const int n = setup.problem.n();
        res.center_distance.resize(n);
        res.volume = setup.sampled_volumes;
        res.mean_volume.resize(n);
        res.distortion.resize(n);
        for (int i = 0; i < n; ++i) {
            res.center_distance[i] = run.state.bodies[i].c.norm();
            res.mean_volume[i] = scenario.ct_table[setup.ct_index[i]].mean_volume;
            res.distortion[i] =
                axis_distortion(run.state.bodies[i].ellipsoid(), setup.problem.specs[i]);
        }
        res.succeeded = true;
    } catch (const std::exception& e) {
        res.succeeded = false;
        res.error = e.what();
    }
    return res;
}

double screening_threshold(double f_star) {
    return f_star + std::max(0.5, std::min(0.2 * f_star, 2.0));
}

ScreenResult screen(const std::vector<TrialResult>& results) {
    if (results.empty()) throw InvalidInput("screen: no results");
    double f_star = std::numeric_limits<double>::infinity();
    for (const TrialResult& r : results)
        if (r.succeeded) f_star = std::min(f_star, r.final_objective);
    ScreenResult out;
    out.threshold = screening_threshold(f_star);
    for (size_t i = 0; i < results.size(); ++i) {
        if (!results[i].succeeded) continue;
        if (results[i].final_objective <= out.threshold)
            out.kept.push_back(int(i));
        else
            out.removed.push_back(int(i));
    }
    return out;
}

Regression radial_regression(const std::vector<double>& volumes, const std::vector<double>& distances) {
    if (volumes.size() != distances.size() || volumes.size() < 2)
        throw InvalidInput("radial_regression: need matched samples");
    const double n = double(volumes.size());
    const double mx = std::accumulate(volumes.begin(), volumes.end(), 0.0) / n;
    const double my = std::accumulate(distances.begin(), distances.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < volumes.size(); ++i) {
        sxx += (volumes[i] - mx) * (volumes[i] - mx);
        sxy += (volumes[i] - mx) * (distances[i] - my);
    }
    if (sxx <= 1e-12 * n) throw InvalidInput("radial_regression: degenerate volumes");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    return r;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(s2 / double(v.size() - 1)) : 0.0;
    return {m, sd};
}

} // namespace

BatchStats compute_stats(const std::vector<TrialResult>& trials) {
    BatchStats st;
    std::vector<double> before;
    for (const TrialResult& t : trials)
        if (t.succeeded) before.push_back(t.final_objective);
    st.trials_before = int(before.size());
    std::tie(st.mean_before, st.sd_before) = mean_sd(before);

    const ScreenResult sr = screen(trials);
    st.screen_threshold = sr.threshold;
    st.trials_after = int(sr.kept.size());
    std::vector<double> after;
    for (int i : sr.kept) after.push_back(trials[i].final_objective);
    std::tie(st.mean_after, st.sd_after) = mean_sd(after);

    // pooled regression over kept trials
    std::vector<double> xs, ys;
    // per-CT averaged variant keyed by mean volume
    std::map<double, std::pair<double, int>> per_ct_acc;
    double distorted = 0.0;
    for (int i : sr.kept) {
        const TrialResult& t = trials[i];
        int count = 0;
        for (size_t b = 0; b < t.mean_volume.size(); ++b) {
            xs.push_back(t.mean_volume[b]);
            ys.push_back(t.center_distance[b]);
            auto& acc = per_ct_acc[t.mean_volume[b]];
            acc.first += t.center_distance[b];
            acc.second += 1;
            if (t.distortion[b] > 0.10) ++count;
        }
        distorted += count;
    }
    if (!sr.kept.empty()) {
        st.pooled = radial_regression(xs, ys);
        std::vector<double> cx, cy;
        for (auto& [vol, acc] : per_ct_acc) {
            cx.push_back(vol);
            cy.push_back(acc.first / acc.second);
        }
        st.per_ct = radial_regression(cx, cy);
        st.mean_distorted_count = distorted / double(sr.kept.size());
    }
    return st;
}

BatchResult run_batch(const ChromoScenario& scenario, const TrustRegionConfig& cfg, int threads) {
    scenario.validate();
    if (threads <= 0) threads = default_thread_count();
    BatchResult out;
    out.trials.resize(scenario.trials);
    parallel_for(scenario.trials, threads,
                 [&](int t) { out.trials[t] = run_trial(scenario, t, cfg, 1); });
    int ok = 0;
    for (const TrialResult& t : out.trials) ok += t.succeeded ? 1 : 0;
    if (ok * 2 < scenario.trials)
        throw NumericalError("run_batch: more than half of the trials failed");
    out.stats = compute_stats(out.trials);
    return out;
}

} // namespace opack
