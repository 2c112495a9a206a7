#include "scoreuq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "scoreuq/errors.hpp"
#include "scoreuq/parallel.hpp"

namespace scoreuq {

GmmDistribution benchmark_gmm_1d() {
    return make_gmm({0.5, 0.5}, {{-2.0}, {2.0}}, {{0.25}, {0.25}});
}

GmmDistribution benchmark_gmm_2d() {
    return make_gmm({0.5, 0.5}, {{-2.0, -2.0}, {2.0, 2.0}}, {{0.25, 0.25}, {0.25, 0.25}});
}

GmmDistribution benchmark_image_gmm(int& width, int& height) {
    width = 8;
    height = 8;
    const double hi = 0.8, lo = -0.8;
    auto pattern = [&](auto&& on) {
        Vec img(64, lo);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                if (on(x, y)) img[static_cast<size_t>(8 * y + x)] = hi;
        return img;
    };

    std::vector<Vec> prototypes;
    prototypes.push_back(pattern([](int, int y) { return y % 2 == 0; }));        // h-stripes
    prototypes.push_back(pattern([](int x, int) { return x % 2 == 0; }));        // v-stripes
    prototypes.push_back(pattern([](int x, int y) { return (x + y) % 2 == 0; }));  // checker
    prototypes.push_back(pattern([](int x, int y) { return x >= 2 && x < 6 && y >= 2 && y < 6; }));

    std::vector<Vec> variances(prototypes.size(), Vec(64, 0.02));
    std::vector<double> weights(prototypes.size(), 1.0 / static_cast<double>(prototypes.size()));
    return make_gmm(weights, prototypes, variances);
}

GmmDistribution benchmark_nested_gmm_1d() {
    const double d = 0.45;
    return make_gmm({0.25, 0.25, 0.25, 0.25},
                    {{-2.0 - d}, {-2.0 + d}, {2.0 - d}, {2.0 + d}},
                    {{0.0}, {0.0}, {0.0}, {0.0}});
}

GmmDistribution benchmark_texture_gmm(int& width, int& height) {
    width = 4;
    height = 2;
    const std::vector<int> levels = {1, 1, 2, 2, 3, 3, 4, 4};
    const double spacing = 1.0;
    int d = static_cast<int>(levels.size());

    long k = 1;
    for (int l : levels) k *= l;
    std::vector<double> weights(static_cast<size_t>(k), 1.0 / static_cast<double>(k));
    std::vector<Vec> means(static_cast<size_t>(k), Vec(static_cast<size_t>(d)));
    std::vector<Vec> variances(static_cast<size_t>(k), Vec(static_cast<size_t>(d), 0.01));
    for (long m = 0; m < k; ++m) {
        long idx = m;
        for (int i = 0; i < d; ++i) {
            int l = levels[static_cast<size_t>(i)];
            int pick = static_cast<int>(idx % l);
            idx /= l;
            means[static_cast<size_t>(m)][static_cast<size_t>(i)] =
                (pick - 0.5 * (l - 1)) * spacing;
        }
    }
    return make_gmm(weights, means, variances);
}

namespace {

void finalize_record(SampleRecord& rec, Trajectory traj, std::vector<UncertaintyMap> maps,
                     const PoolOptions& options, const TimestepPlan& plan) {
    if (options.estimate_uncertainty)
        rec.aggregated = aggregate_uncertainty(maps, options.uncertainty.window, plan);
    if (options.profile_all_steps) {
        rec.per_step_total.assign(static_cast<size_t>(plan.count()), 0.0);
        for (const auto& m : maps) {
            auto it = std::find(plan.steps.begin(), plan.steps.end(), m.t);
            if (it == plan.steps.end()) continue;
            size_t idx = static_cast<size_t>(it - plan.steps.begin());
            double total = 0.0;
            for (double v : m.values) total += v;
            rec.per_step_total[idx] = total;
        }
    }
    rec.nfe = traj.nfe;
    rec.sample = traj.final_sample;
    if (options.keep_maps) rec.maps = std::move(maps);
    if (options.record_trajectories) rec.trajectory = std::move(traj);
}

}  // namespace

PoolResult sample_pool(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const PoolOptions& options, uint64_t root_seed) {
    if (options.count < 1) throw_config("pool count must be positive");
    TimestepPlan plan = plan_timesteps(schedule.T, options.generation_steps);
    int S = plan.count();
    int D = predictor.dim();

    std::vector<int> estimate_steps;
    if (options.profile_all_steps) {
        estimate_steps.resize(static_cast<size_t>(S));
        std::iota(estimate_steps.begin(), estimate_steps.end(), 0);
    } else if (options.estimate_uncertainty) {
        estimate_steps = window_step_indices(S, options.uncertainty.window);
        if (estimate_steps.empty()) throw_config("uncertainty window selects no steps");
    }

    PoolResult result;
    result.plan = plan;
    result.records.resize(static_cast<size_t>(options.count));

    parallel_for(static_cast<size_t>(options.count), options.threads, [&](size_t j) {
        uint64_t seed = sample_seed(root_seed, j);
        Vec x_T = RngStream(seed, stream_index::kInitialState)
                      .gaussian_vector(static_cast<size_t>(D));

        std::vector<UncertaintyMap> maps;
        SamplerConfig config;
        config.kind = options.kind;
        config.plan = plan;
        config.seed = seed;
        config.ddpm_tilde_beta = options.ddpm_tilde_beta;
        config.record_states = options.record_trajectories;
        if (!estimate_steps.empty()) {
            config.hooks.push_back([&](StepHookContext& ctx) {
                if (!std::binary_search(estimate_steps.begin(), estimate_steps.end(),
                                        ctx.step_index))
                    return;
                if (options.uncertainty.scheme == PerturbationScheme::Diffusion) {
                    maps.push_back(estimate_step_uncertainty_with_base(
                                       ctx.predictor, schedule, ctx.x, ctx.timestep, ctx.eps,
                                       options.uncertainty.mc_samples, ctx.rng)
                                       .map);
                } else {
                    maps.push_back(gaussian_perturbation_uncertainty(
                        ctx.predictor, ctx.x, ctx.timestep, options.uncertainty.mc_samples,
                        options.uncertainty.gaussian_sigma, ctx.rng));
                }
            });
        }

        Trajectory traj = run_sampler(predictor, schedule, config, x_T);
        finalize_record(result.records[j], std::move(traj), std::move(maps), options, plan);
    });
    return result;
}

PoolResult guided_pool(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const PoolOptions& options, const GuidanceConfig& guidance,
                       uint64_t root_seed) {
    if (options.count < 1) throw_config("pool count must be positive");
    if (options.profile_all_steps) throw_config("profiling a guided pool is not supported");
    TimestepPlan plan = plan_timesteps(schedule.T, options.generation_steps);
    int S = plan.count();
    int D = predictor.dim();

    // aggregation-window steps that the guided window does not already cover
    std::vector<int> extra_steps;
    if (options.estimate_uncertainty) {
        std::vector<int> window_steps = window_step_indices(S, options.uncertainty.window);
        if (window_steps.empty()) throw_config("uncertainty window selects no steps");
        std::vector<int> guided_steps =
            guidance.strength != 0.0 ? window_step_indices(S, guidance.guided_window)
                                     : std::vector<int>{};
        std::set<int> guided(guided_steps.begin(), guided_steps.end());
        for (int i : window_steps)
            if (guided.count(i) == 0) extra_steps.push_back(i);
    }

    PoolResult result;
    result.plan = plan;
    result.records.resize(static_cast<size_t>(options.count));

    parallel_for(static_cast<size_t>(options.count), options.threads, [&](size_t j) {
        uint64_t seed = sample_seed(root_seed, j);
        Vec x_T = RngStream(seed, stream_index::kInitialState)
                      .gaussian_vector(static_cast<size_t>(D));

        SamplerConfig config;
        config.kind = options.kind;
        config.plan = plan;
        config.seed = seed;
        config.ddpm_tilde_beta = options.ddpm_tilde_beta;
        config.record_states = options.record_trajectories;

        GuidedResult guided = guided_sample(predictor, schedule, config, guidance, x_T,
                                            extra_steps);
        finalize_record(result.records[j], std::move(guided.trajectory),
                        std::move(guided.maps), options, plan);
    });
    return result;
}

std::vector<double> calibrate_thresholds(const std::vector<SampleRecord>& records,
                                         const TimestepPlan& plan, double percentile) {
    std::vector<double> thresholds(static_cast<size_t>(plan.count()),
                                   std::numeric_limits<double>::infinity());
    for (int i = 0; i < plan.count(); ++i) {
        int t = plan.steps[static_cast<size_t>(i)];
        Vec values;
        for (const auto& rec : records)
            for (const auto& m : rec.maps)
                if (m.t == t) values.insert(values.end(), m.values.begin(), m.values.end());
        if (!values.empty())
            thresholds[static_cast<size_t>(i)] = percentile_linear(values, percentile);
    }
    return thresholds;
}

double sign_test_p_one_sided(int wins, int n) {
    if (n < 1 || wins < 0 || wins > n) throw_config("invalid sign test arguments");
    // exact binomial tail at p = 1/2
    double p = 0.0;
    double log_half = std::log(0.5);
    for (int k = wins; k <= n; ++k) {
        double log_comb = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(log_comb + n * log_half);
    }
    return std::min(1.0, p);
}

namespace {

double median_of(Vec values) {
    std::sort(values.begin(), values.end());
    size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<Vec> reference_draws(const GmmDistribution& data, int count, uint64_t seed) {
    RngStream rng(seed, stream_index::kData);
    std::vector<Vec> out(static_cast<size_t>(count));
    for (auto& v : out) v = gmm_sample(data, rng);
    return out;
}

std::vector<Vec> collect_samples(const PoolResult& pool) {
    std::vector<Vec> out;
    out.reserve(pool.records.size());
    for (const auto& rec : pool.records) out.push_back(rec.sample);
    return out;
}

}  // namespace

PairedGuidanceResult run_guidance_benchmark(const NoisePredictor& predictor,
                                            const NoiseSchedule& schedule,
                                            const GmmDistribution& data,
                                            const PairedGuidanceOptions& options,
                                            uint64_t root_seed) {
    if (options.repetitions < 1) throw_config("guidance benchmark needs >= 1 repetition");

    PairedGuidanceResult result;
    Vec guided_eds, unguided_eds;
    double nfe_guided = 0.0, nfe_unguided = 0.0;
    long long total_samples = 0;

    for (int rep = 0; rep < options.repetitions; ++rep) {
        uint64_t seed = repetition_seed(root_seed, static_cast<uint64_t>(rep));

        PoolOptions pool = options.pool;
        pool.count = options.samples_per_repetition;

        PoolResult unguided = sample_pool(predictor, schedule, pool, seed);
        PoolResult guided = guided_pool(predictor, schedule, pool, options.guidance, seed);
        std::vector<Vec> reference = reference_draws(data, options.reference_count, seed);

        PairedGuidanceRow row;
        row.seed = seed;
        row.ed_guided = energy_distance(collect_samples(guided), reference, pool.threads);
        row.ed_unguided = energy_distance(collect_samples(unguided), reference, pool.threads);
        result.rows.push_back(row);

        guided_eds.push_back(row.ed_guided);
        unguided_eds.push_back(row.ed_unguided);
        if (row.ed_guided < row.ed_unguided) ++result.wins;
        for (const auto& rec : guided.records) nfe_guided += static_cast<double>(rec.nfe);
        for (const auto& rec : unguided.records) nfe_unguided += static_cast<double>(rec.nfe);
        total_samples += pool.count;
    }

    result.median_guided = median_of(guided_eds);
    result.median_unguided = median_of(unguided_eds);
    result.sign_test_p = sign_test_p_one_sided(result.wins, options.repetitions);
    result.mean_nfe_guided = nfe_guided / static_cast<double>(total_samples);
    result.mean_nfe_unguided = nfe_unguided / static_cast<double>(total_samples);
    return result;
}

FilterEvalResult run_filter_benchmark(const NoisePredictor& predictor,
                                      const NoiseSchedule& schedule, const GmmDistribution& data,
                                      const FilterEvalOptions& options, uint64_t root_seed) {
    if (options.keep > options.pool_size) throw_config("cannot keep more samples than the pool");

    FilterEvalResult result;
    for (int rep = 0; rep < options.repetitions; ++rep) {
        uint64_t seed = repetition_seed(root_seed, static_cast<uint64_t>(rep));

        PoolOptions pool = options.pool;
        pool.count = options.pool_size;
        pool.estimate_uncertainty = true;
        PoolResult generated = sample_pool(predictor, schedule, pool, seed);

        Vec uncertainties(generated.records.size());
        for (size_t i = 0; i < generated.records.size(); ++i)
            uncertainties[i] = generated.records[i].aggregated;

        double keep_fraction =
            static_cast<double>(options.keep) / static_cast<double>(options.pool_size);
        std::vector<size_t> kept = filter_pool(uncertainties, keep_fraction);

        std::vector<size_t> random_order(generated.records.size());
        std::iota(random_order.begin(), random_order.end(), size_t{0});
        RngStream shuffle_rng(seed, stream_index::kShuffle);
        shuffle_rng.shuffle(random_order);
        random_order.resize(kept.size());

        std::vector<Vec> kept_samples, random_samples;
        kept_samples.reserve(kept.size());
        random_samples.reserve(kept.size());
        for (size_t i : kept) kept_samples.push_back(generated.records[i].sample);
        for (size_t i : random_order) random_samples.push_back(generated.records[i].sample);

        std::vector<Vec> reference = reference_draws(data, options.reference_count, seed);

        FilterEvalRow row;
        row.seed = seed;
        row.ed_kept = energy_distance(kept_samples, reference, options.pool.threads);
        row.ed_random = energy_distance(random_samples, reference, options.pool.threads);
        result.rows.push_back(row);
        if (row.ed_kept < row.ed_random) ++result.wins;
    }
    return result;
}

ProfileRunResult run_profile(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                             const PoolOptions& options, uint64_t root_seed) {
    PoolOptions pool = options;
    pool.profile_all_steps = true;
    pool.estimate_uncertainty = false;
    PoolResult generated = sample_pool(predictor, schedule, pool, root_seed);

    std::vector<Vec> totals;
    totals.reserve(generated.records.size());
    for (const auto& rec : generated.records) totals.push_back(rec.per_step_total);

    ProfileRunResult result;
    result.stats = uncertainty_profile(totals);
    result.plan = generated.plan;
    result.argmax_std = static_cast<int>(
        std::max_element(result.stats.stddev.begin(), result.stats.stddev.end()) -
        result.stats.stddev.begin());
    return result;
}

}  // namespace scoreuq
