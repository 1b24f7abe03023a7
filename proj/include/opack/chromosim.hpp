#pragma once

// Chromosome-territory simulation harness: scenario generation (nucleus
// shape/size, territory volumes, axis-ratio sampling), batch trials over the
// ellipsoid packer, screening and radial-preference statistics.

#include <string>

#include "opack/ellipack.hpp"

namespace opack {

enum class NucleusShape { Spherical, FlatEllipsoidal }; // flat: axes 1:2:4

struct CtEntry {
    std::string name;
    double mean_volume; // um^3
    bool autosome;      // autosomes appear as homologous pairs
};

// mean chromosome-territory volumes (um^3) at standard chromatin density
const std::vector<CtEntry>& default_ct_table();

struct ChromoScenario {
    std::string name = "custom";
    NucleusShape shape = NucleusShape::Spherical;
    double nucleus_volume = 1000.0; // um^3
    std::vector<CtEntry> ct_table = default_ct_table();
    double volume_sd_frac = 0.02;
    double ratio2_mean = 2.9, ratio3_mean = 4.4; // axis ratios (1 : r2 : r3)
    double axis_ratio_sd_frac = 0.1;             // applied to the 2nd/3rd ratios
    bool homolog_penalty = false;
    double penalty_c = 100.0;
    double lambda_factor = 1.25;
    int trials = 20;
    uint64_t seed = 0;

    void validate() const;
};

// named presets: {small,medium,large}-{spherical,ellipsoidal}
ChromoScenario named_scenario(const std::string& name);

Container nucleus_container(NucleusShape shape, double volume);

struct TrialSetup {
    EllipackProblem problem;
    std::vector<int> ct_index;          // body -> row of ct_table
    std::vector<double> sampled_volumes;
};

// deterministic per-trial generation: volumes and axis ratios sampled around
// the table means, homolog pairs over the autosome copies
TrialSetup generate_trial(const ChromoScenario& scenario, int trial_index);

struct TrialResult {
    std::string scenario;
    int trial_index = -1;
    uint64_t seed = 0;
    bool succeeded = false;
    std::string error;
    double final_objective = 0.0; // t* plus the homolog penalty when enabled
    double t_star = 0.0;
    double eta = 0.0;
    std::vector<double> center_distance; // per body, to the nucleus center
    std::vector<double> volume;          // sampled volume per body
    std::vector<double> mean_volume;     // table mean per body
    std::vector<double> distortion;      // relative axis error per body
    int iterations = 0;
    std::string termination;
};

TrialResult run_trial(const ChromoScenario& scenario, int trial_index, const TrustRegionConfig& cfg,
                      int threads = 1);

// screening: drop trials with objective above f* + max(0.5, min(0.2 f*, 2))
struct ScreenResult {
    std::vector<int> kept, removed; // indices into the input list
    double threshold = 0.0;
};

ScreenResult screen(const std::vector<TrialResult>& results);

double screening_threshold(double f_star);

struct Regression {
    double slope = 0.0, intercept = 0.0;
};

// OLS of center distance on CT volume over (x, y) pairs
Regression radial_regression(const std::vector<double>& volumes, const std::vector<double>& distances);

struct BatchStats {
    int trials_before = 0, trials_after = 0;
    double mean_before = 0.0, sd_before = 0.0;
    double mean_after = 0.0, sd_after = 0.0;
    double screen_threshold = 0.0;
    Regression pooled;        // pooled over kept trials and bodies (mean volumes)
    Regression per_ct;        // per-CT averaged distances
    double mean_distorted_count = 0.0; // bodies with distortion > 10%, per trial
};

struct BatchResult {
    std::vector<TrialResult> trials;
    BatchStats stats;
};

// runs all trials (parallelizable), screens, and aggregates; deterministic in
// (scenario, cfg, seed). Fails only if more than half the trials error out.
BatchResult run_batch(const ChromoScenario& scenario, const TrustRegionConfig& cfg, int threads = 0);

BatchStats compute_stats(const std::vector<TrialResult>& trials);

} // namespace opack
