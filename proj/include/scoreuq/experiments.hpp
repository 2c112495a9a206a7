#pragma once

#include <cstdint>
#include <vector>

#include "scoreuq/guidance.hpp"
#include "scoreuq/metrics.hpp"
#include "scoreuq/mlp.hpp"
#include "scoreuq/sampler.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"
#include "scoreuq/uncertainty.hpp"

namespace scoreuq {

// ---------------------------------------------------------------------------
// Benchmark distributions
// ---------------------------------------------------------------------------

/// Two equal components at -2 and +2 with variance 0.25.
GmmDistribution benchmark_gmm_1d();

/// Two equal components at (-2,-2) and (2,2), variance 0.25 per axis.
GmmDistribution benchmark_gmm_2d();

/// Four 8x8 prototype patterns (stripes, checker, centered square) with
/// per-pixel variance 0.02; width/height returned for image rendering.
GmmDistribution benchmark_image_gmm(int& width, int& height);

/// Two-scale 1D mixture: coarse modes at +-2, each split into a point-mass
/// pair +-0.45 around the mode. The fine split resolves in the last quarter
/// of a 50-step generation, which is what the step-wise profile experiment
/// measures.
GmmDistribution benchmark_nested_gmm_1d();

/// 2x4 grid with independent pixels of graded complexity: pixel i draws one
/// of {1,1,2,2,3,3,4,4}[i] levels spaced 1.0 apart (variance 0.01 per level),
/// enumerated as a single joint mixture. Rich pixels reconstruct worse.
GmmDistribution benchmark_texture_gmm(int& width, int& height);

// ---------------------------------------------------------------------------
// Sample pools
// ---------------------------------------------------------------------------

struct PoolOptions {
    int count = 100;
    SamplerKind kind = SamplerKind::Ddim;
    int generation_steps = 50;
    bool ddpm_tilde_beta = false;
    UncertaintyConfig uncertainty;
    bool estimate_uncertainty = true;  // estimate inside the window, aggregate
    bool profile_all_steps = false;    // estimate at every step, keep totals
    bool keep_maps = false;
    bool record_trajectories = false;
    int threads = 1;
};

struct SampleRecord {
    Vec sample;
    double aggregated = 0.0;
    long long nfe = 0;
    Vec per_step_total;               // filled when profiling
    std::vector<UncertaintyMap> maps; // filled when keep_maps
    Trajectory trajectory;            // filled when record_trajectories
};

struct PoolResult {
    std::vector<SampleRecord> records;
    TimestepPlan plan;
};

/// Generates `count` samples; sample j draws x_T and all of its noise from
/// seed sample_seed(root_seed, j), so pools are reproducible and independent
/// of the worker count.
PoolResult sample_pool(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const PoolOptions& options, uint64_t root_seed);

/// Same pool protocol with uncertainty-guided sampling. Uncertainty maps are
/// additionally estimated on aggregation-window steps outside the guided
/// window so the aggregate is always defined.
PoolResult guided_pool(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const PoolOptions& options, const GuidanceConfig& guidance,
                       uint64_t root_seed);

/// Per-plan-step percentile thresholds over all (sample, component) values of
/// the collected maps. Steps never estimated get +inf (guidance skips them).
std::vector<double> calibrate_thresholds(const std::vector<SampleRecord>& records,
                                         const TimestepPlan& plan, double percentile);

// ---------------------------------------------------------------------------
// Experiment protocols
// ---------------------------------------------------------------------------

/// One-sided exact binomial sign test: P(X >= wins) with X ~ Bin(n, 1/2).
double sign_test_p_one_sided(int wins, int n);

struct PairedGuidanceOptions {
    int repetitions = 16;
    int samples_per_repetition = 1000;
    int reference_count = 2000;
    PoolOptions pool;
    GuidanceConfig guidance;
};

struct PairedGuidanceRow {
    uint64_t seed = 0;
    double ed_guided = 0.0;
    double ed_unguided = 0.0;
};

struct PairedGuidanceResult {
    std::vector<PairedGuidanceRow> rows;
    int wins = 0;  // repetitions with ed_guided < ed_unguided
    double median_guided = 0.0;
    double median_unguided = 0.0;
    double sign_test_p = 0.0;
    double mean_nfe_guided = 0.0;
    double mean_nfe_unguided = 0.0;
};

/// Paired repetitions: guided and unguided pools share x_T per sample (same
/// sample seeds); energy distance to fresh draws from the data distribution.
PairedGuidanceResult run_guidance_benchmark(const NoisePredictor& predictor,
                                            const NoiseSchedule& schedule,
                                            const GmmDistribution& data,
                                            const PairedGuidanceOptions& options,
                                            uint64_t root_seed);

struct FilterEvalOptions {
    int repetitions = 10;
    int pool_size = 6000;
    int keep = 5000;
    int reference_count = 2000;
    PoolOptions pool;
};

struct FilterEvalRow {
    uint64_t seed = 0;
    double ed_kept = 0.0;
    double ed_random = 0.0;
};

struct FilterEvalResult {
    std::vector<FilterEvalRow> rows;
    int wins = 0;  // repetitions with ed_kept < ed_random
};

/// Keep the lowest-uncertainty fraction of each pool versus a random subset
/// of the same size; compare energy distance to the data distribution.
FilterEvalResult run_filter_benchmark(const NoisePredictor& predictor,
                                      const NoiseSchedule& schedule, const GmmDistribution& data,
                                      const FilterEvalOptions& options, uint64_t root_seed);

struct ProfileRunResult {
    ProfileStats stats;
    TimestepPlan plan;
    int argmax_std = 0;
};

/// Across-sample mean/std of per-step total uncertainty at every step.
ProfileRunResult run_profile(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                             const PoolOptions& options, uint64_t root_seed);

}  // namespace scoreuq
