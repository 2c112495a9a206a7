#include "scoreuq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scoreuq/errors.hpp"
#include "scoreuq/parallel.hpp"
#include "scoreuq/sampler.hpp"

namespace scoreuq {

namespace {

SparsificationCurve curve_from_order(const Vec& abs_errors, const std::vector<size_t>& drop_order,
                                     int B) {
    size_t n = abs_errors.size();
    // squared errors accumulated from the back of the drop order, so the
    // retained-set RMSE at each fraction is an O(n) suffix lookup
    Vec suffix_sq(n + 1, 0.0);
    for (size_t i = n; i-- > 0;) {
        double e = abs_errors[drop_order[i]];
        suffix_sq[i] = suffix_sq[i + 1] + e * e;
    }

    SparsificationCurve curve;
    curve.fractions.resize(static_cast<size_t>(B));
    curve.errors.resize(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
        double f = static_cast<double>(b) / static_cast<double>(B);
        size_t dropped = static_cast<size_t>(std::ceil(f * static_cast<double>(n)));
        dropped = std::min(dropped, n);
        size_t kept = n - dropped;
        curve.fractions[static_cast<size_t>(b)] = f;
        curve.errors[static_cast<size_t>(b)] =
            kept == 0 ? 0.0 : std::sqrt(suffix_sq[dropped] / static_cast<double>(kept));
    }
    return curve;
}

std::vector<size_t> order_by_descending(const Vec& keys) {
    std::vector<size_t> order(keys.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&keys](size_t a, size_t b) { return keys[a] > keys[b]; });
    return order;
}

double trapezoid_area(const Vec& fractions, const Vec& values) {
    double area = 0.0;
    for (size_t i = 0; i + 1 < fractions.size(); ++i)
        area += 0.5 * (values[i] + values[i + 1]) * (fractions[i + 1] - fractions[i]);
    return area;
}

}  // namespace

SparsificationCurve sparsification_curve(const Vec& abs_errors, const Vec& uncertainty, int B) {
    if (abs_errors.size() != uncertainty.size())
        throw_config("sparsification inputs must have equal length");
    if (B < 1) throw_config("sparsification needs B >= 1 fractions");
    if (abs_errors.size() < static_cast<size_t>(B))
        throw_config("sparsification needs at least B components, got " +
                     std::to_string(abs_errors.size()));
    return curve_from_order(abs_errors, order_by_descending(uncertainty), B);
}

SparsificationCurve oracle_sparsification_curve(const Vec& abs_errors, int B) {
    return sparsification_curve(abs_errors, abs_errors, B);
}

SparsificationCurve random_mean_sparsification_curve(const Vec& abs_errors, int B, int R,
                                                     RngStream& rng) {
    if (R < 1) throw_config("random sparsification needs R >= 1 shuffles");
    if (abs_errors.size() < static_cast<size_t>(B))
        throw_config("sparsification needs at least B components");

    std::vector<size_t> order(abs_errors.size());
    std::iota(order.begin(), order.end(), size_t{0});

    SparsificationCurve mean;
    for (int r = 0; r < R; ++r) {
        rng.shuffle(order);
        SparsificationCurve c = curve_from_order(abs_errors, order, B);
        if (r == 0) {
            mean = c;
        } else {
            for (size_t i = 0; i < mean.errors.size(); ++i) mean.errors[i] += c.errors[i];
        }
    }
    for (double& e : mean.errors) e /= static_cast<double>(R);
    return mean;
}

AuseAurg ause_aurg(const SparsificationCurve& method, const SparsificationCurve& oracle,
                   const SparsificationCurve& random_mean) {
    if (method.fractions != oracle.fractions || method.fractions != random_mean.fractions)
        throw_config("sparsification curves have misaligned fractions");
    if (method.errors.empty()) throw_config("empty sparsification curve");

    double norm = method.errors[0];
    if (norm == 0.0) return {0.0, 0.0};

    Vec diff_oracle(method.errors.size()), diff_random(method.errors.size());
    for (size_t i = 0; i < method.errors.size(); ++i) {
        diff_oracle[i] = (method.errors[i] - oracle.errors[i]) / norm;
        diff_random[i] = (random_mean.errors[i] - method.errors[i]) / norm;
    }
    return {trapezoid_area(method.fractions, diff_oracle),
            trapezoid_area(method.fractions, diff_random)};
}

IdentityReport fisher_identity_check(const GmmDistribution& dist, const NoiseSchedule& schedule,
                                     int t, long long N, RngStream& rng) {
    if (N < 100) throw_config("identity check needs N >= 100 draws");
    int D = dist.dim();
    if (D < 1) throw_config("degenerate distribution");

    Vec sum_lhs(static_cast<size_t>(D), 0.0), sum_lhs2(static_cast<size_t>(D), 0.0);
    Vec sum_rhs(static_cast<size_t>(D), 0.0), sum_rhs2(static_cast<size_t>(D), 0.0);
    Vec sum_diff(static_cast<size_t>(D), 0.0), sum_diff2(static_cast<size_t>(D), 0.0);

    for (long long i = 0; i < N; ++i) {
        Vec x = gmm_marginal_sample(dist, schedule, t, rng);
        Vec score = gmm_score(dist, schedule, x, t);
        Vec hess = gmm_hessian_diag(dist, schedule, x, t);
        for (int d = 0; d < D; ++d) {
            double lhs = score[static_cast<size_t>(d)] * score[static_cast<size_t>(d)];
            double rhs = -hess[static_cast<size_t>(d)];
            double diff = lhs - rhs;
            sum_lhs[static_cast<size_t>(d)] += lhs;
            sum_lhs2[static_cast<size_t>(d)] += lhs * lhs;
            sum_rhs[static_cast<size_t>(d)] += rhs;
            sum_rhs2[static_cast<size_t>(d)] += rhs * rhs;
            sum_diff[static_cast<size_t>(d)] += diff;
            sum_diff2[static_cast<size_t>(d)] += diff * diff;
        }
    }

    auto se = [N](double s, double s2) {
        double mean = s / static_cast<double>(N);
        double var = std::max(0.0, s2 / static_cast<double>(N) - mean * mean);
        return std::sqrt(var / static_cast<double>(N));
    };

    IdentityReport report;
    report.t = t;
    report.samples = N;
    report.lhs.resize(static_cast<size_t>(D));
    report.rhs.resize(static_cast<size_t>(D));
    report.se_lhs.resize(static_cast<size_t>(D));
    report.se_rhs.resize(static_cast<size_t>(D));
    report.z.resize(static_cast<size_t>(D));
    for (int d = 0; d < D; ++d) {
        size_t di = static_cast<size_t>(d);
        report.lhs[di] = sum_lhs[di] / static_cast<double>(N);
        report.rhs[di] = sum_rhs[di] / static_cast<double>(N);
        report.se_lhs[di] = se(sum_lhs[di], sum_lhs2[di]);
        report.se_rhs[di] = se(sum_rhs[di], sum_rhs2[di]);
        double se_diff = se(sum_diff[di], sum_diff2[di]);
        report.z[di] = se_diff > 0.0
                           ? std::abs(sum_diff[di] / static_cast<double>(N)) / se_diff
                           : (sum_diff[di] == 0.0 ? 0.0
                                                  : std::numeric_limits<double>::infinity());
        report.max_z = std::max(report.max_z, report.z[di]);
    }
    return report;
}

double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b, int threads) {
    if (a.empty() || b.empty()) throw_config("energy distance needs nonempty sample sets");
    size_t D = a[0].size();
    for (const Vec& v : a)
        if (v.size() != D) throw_config("energy distance dimension mismatch");
    for (const Vec& v : b)
        if (v.size() != D) throw_config("energy distance dimension mismatch");

    auto mean_cross = [D, threads](const std::vector<Vec>& lhs, const std::vector<Vec>& rhs) {
        std::vector<double> row_sums(lhs.size(), 0.0);
        parallel_for(lhs.size(), threads, [&](size_t i) {
            double acc = 0.0;
            for (const Vec& r : rhs) {
                double sq = 0.0;
                for (size_t d = 0; d < D; ++d) {
                    double diff = lhs[i][d] - r[d];
                    sq += diff * diff;
                }
                acc += std::sqrt(sq);
            }
            row_sums[i] = acc;
        });
        return pairwise_sum(row_sums) /
               (static_cast<double>(lhs.size()) * static_cast<double>(rhs.size()));
    };

    return 2.0 * mean_cross(a, b) - mean_cross(a, a) - mean_cross(b, b);
}

std::vector<size_t> filter_pool(const Vec& pool_uncertainties, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw_config("keep_fraction must lie in (0, 1]");
    size_t n = pool_uncertainties.size();
    size_t keep = static_cast<size_t>(keep_fraction * static_cast<double>(n));

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        return pool_uncertainties[x] < pool_uncertainties[y];
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

StepUncertaintyFn make_score_variance_source(const NoiseSchedule& schedule, int M) {
    return [&schedule, M](const CountingPredictor& predictor, const Vec& x_t, int t,
                          const Vec& eps_base, RngStream& rng) {
        return estimate_step_uncertainty_with_base(predictor, schedule, x_t, t, eps_base, M, rng)
            .map;
    };
}

StepUncertaintyFn make_mc_dropout_source(const MlpParams& params, const MlpConfig& config,
                                         int K) {
    return [&params, &config, K](const CountingPredictor& predictor, const Vec& x_t, int t,
                                 const Vec&, RngStream& rng) {
        McDropoutResult r = mc_dropout_uncertainty(params, config, x_t, t, K, rng);
        predictor.add_external(K);  // dropout passes bypass the counting interface
        UncertaintyMap map;
        map.t = t;
        map.values = std::move(r.variance);
        return map;
    };
}

ReconstructionResult reconstruction_eval(const NoisePredictor& predictor,
                                         const NoiseSchedule& schedule,
                                         const std::vector<Vec>& test_set,
                                         const ReconstructionOptions& options,
                                         const StepUncertaintyFn& uncertainty_source,
                                         uint64_t root_seed, int threads) {
    if (test_set.empty()) throw_config("reconstruction needs a nonempty test set");

    int t_noise = options.noise_timestep;
    if (t_noise < 0) t_noise = (schedule.T + 1) / 2;
    if (t_noise > schedule.T) throw_config("noise timestep exceeds schedule length");

    TimestepPlan full_plan = plan_timesteps(schedule.T, options.generation_steps);
    TimestepPlan plan;
    for (int t : full_plan.steps)
        if (t <= t_noise) plan.steps.push_back(t);
    if (t_noise > 0 && plan.steps.empty())
        throw_config("generation plan has no steps at or below the noise timestep " +
                     std::to_string(t_noise));

    size_t D = test_set[0].size();
    ReconstructionResult result;
    result.images.resize(test_set.size());

    parallel_for(test_set.size(), threads, [&](size_t img) {
        const Vec& truth = test_set[img];
        if (truth.size() != D) throw_config("test set dimension mismatch");
        ReconstructionImageResult& out = result.images[img];

        Vec reconstructed;
        if (t_noise == 0) {
            reconstructed = truth;
            out.uncertainty.assign(D, 0.0);
        } else {
            uint64_t image_seed = sample_seed(root_seed, img);
            RngStream init_rng(image_seed, stream_index::kInitialState);
            Vec x = renoise(truth, schedule, t_noise, init_rng.gaussian_vector(D));
            RngStream unc_rng(image_seed, stream_index::kPerturbation);

            std::vector<int> window_steps = window_step_indices(plan.count(), options.window);
            if (window_steps.empty()) throw_config("uncertainty window selects no steps");
            std::vector<UncertaintyMap> maps;

            SamplerConfig config;
            config.kind = SamplerKind::Ddim;
            config.plan = plan;
            config.seed = image_seed;
            config.record_states = false;
            config.hooks.push_back([&](StepHookContext& ctx) {
                if (std::find(window_steps.begin(), window_steps.end(), ctx.step_index) ==
                    window_steps.end())
                    return;
                maps.push_back(
                    uncertainty_source(ctx.predictor, ctx.x, ctx.timestep, ctx.eps, unc_rng));
            });

            Trajectory traj = run_sampler(predictor, schedule, config, x);
            reconstructed = std::move(traj.final_sample);
            out.nfe = traj.nfe;

            out.uncertainty.assign(D, 0.0);
            for (const auto& m : maps)
                for (size_t d = 0; d < D; ++d) out.uncertainty[d] += m.values[d];
        }

        out.abs_error.resize(D);
        double sq = 0.0;
        for (size_t d = 0; d < D; ++d) {
            out.abs_error[d] = std::abs(reconstructed[d] - truth[d]);
            sq += out.abs_error[d] * out.abs_error[d];
        }
        out.rmse = std::sqrt(sq / static_cast<double>(D));

        SparsificationCurve method =
            sparsification_curve(out.abs_error, out.uncertainty, options.curve_bins);
        SparsificationCurve oracle = oracle_sparsification_curve(out.abs_error, options.curve_bins);
        RngStream shuffle_rng(sample_seed(root_seed, img), stream_index::kBaseline);
        SparsificationCurve random = random_mean_sparsification_curve(
            out.abs_error, options.curve_bins, options.random_shuffles, shuffle_rng);
        out.metrics = ause_aurg(method, oracle, random);
    });

    double sum_ause = 0.0, sum_aurg = 0.0, sum_rmse = 0.0;
    for (const auto& img : result.images) {
        sum_ause += img.metrics.ause;
        sum_aurg += img.metrics.aurg;
        sum_rmse += img.rmse;
    }
    double n = static_cast<double>(result.images.size());
    result.mean_ause = sum_ause / n;
    result.mean_aurg = sum_aurg / n;
    result.mean_rmse = sum_rmse / n;
    return result;
}

}  // namespace scoreuq
