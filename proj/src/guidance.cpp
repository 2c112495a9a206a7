#include "scoreuq/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "scoreuq/errors.hpp"

namespace scoreuq {

double percentile_linear(const Vec& values, double p) {
    if (values.empty()) throw_config("percentile of empty vector");
    if (!(p >= 0.0 && p <= 100.0)) throw_config("percentile must lie in [0, 100]");

    Vec sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() == 1) return sorted[0];

    double h = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
    size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<uint8_t> percentile_mask(const UncertaintyMap& map, double p) {
    return threshold_mask(map, percentile_linear(map.values, p));
}

std::vector<uint8_t> threshold_mask(const UncertaintyMap& map, double tau) {
    std::vector<uint8_t> mask(map.values.size(), 0);
    for (size_t i = 0; i < map.values.size(); ++i) mask[i] = map.values[i] > tau ? 1 : 0;
    return mask;
}

Vec uncertainty_grad_diag(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                          const Vec& x_t, int t, const Vec& eps,
                          const std::vector<uint8_t>& mask, const std::vector<Vec>& frozen_draws,
                          double h_rel) {
    if (mask.size() != eps.size()) throw_config("guidance mask shape mismatch");
    if (!(h_rel > 0.0)) throw_config("finite-difference step h_rel must be > 0");

    Vec grad(eps.size(), 0.0);
    Vec probe = eps;
    for (size_t i = 0; i < eps.size(); ++i) {
        if (!mask[i]) continue;
        double h = h_rel * (1.0 + std::abs(eps[i]));
        probe[i] = eps[i] + h;
        double up = score_variance_frozen(predictor, schedule, x_t, t, probe, frozen_draws)
                        .values[i];
        probe[i] = eps[i] - h;
        double down = score_variance_frozen(predictor, schedule, x_t, t, probe, frozen_draws)
                          .values[i];
        probe[i] = eps[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

Vec uncertainty_grad_spsa(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                          const Vec& x_t, int t, const Vec& eps,
                          const std::vector<uint8_t>& mask, const std::vector<Vec>& frozen_draws,
                          double h_rel, int iterations, RngStream& rng) {
    if (mask.size() != eps.size()) throw_config("guidance mask shape mismatch");
    if (iterations < 1) throw_config("spsa needs at least one iteration");
    if (!(h_rel > 0.0)) throw_config("finite-difference step h_rel must be > 0");

    Vec grad(eps.size(), 0.0);
    bool any = std::any_of(mask.begin(), mask.end(), [](uint8_t m) { return m != 0; });
    if (!any) return grad;

    Vec plus(eps.size()), minus(eps.size());
    std::vector<double> delta(eps.size(), 0.0);
    for (int k = 0; k < iterations; ++k) {
        plus = eps;
        minus = eps;
        for (size_t i = 0; i < eps.size(); ++i) {
            if (!mask[i]) continue;
            double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
            double h = h_rel * (1.0 + std::abs(eps[i]));
            delta[i] = sign * h;
            plus[i] = eps[i] + delta[i];
            minus[i] = eps[i] - delta[i];
        }
        Vec up = score_variance_frozen(predictor, schedule, x_t, t, plus, frozen_draws).values;
        Vec down = score_variance_frozen(predictor, schedule, x_t, t, minus, frozen_draws).values;
        for (size_t i = 0; i < eps.size(); ++i)
            if (mask[i]) grad[i] += (up[i] - down[i]) / (2.0 * delta[i]);
    }
    for (double& g : grad) g /= static_cast<double>(iterations);
    return grad;
}

Vec apply_guidance(const Vec& eps, const std::vector<uint8_t>& mask, const Vec& grad,
                   double lambda) {
    if (mask.size() != eps.size() || grad.size() != eps.size())
        throw_config("apply_guidance shape mismatch");
    if (lambda == 0.0) return eps;

    Vec out = eps;
    for (size_t i = 0; i < eps.size(); ++i)
        if (mask[i]) out[i] += lambda * grad[i];
    return out;
}

GuidedResult guided_sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                           const SamplerConfig& sampler_config, const GuidanceConfig& guidance,
                           const Vec& x_T, const std::vector<int>& extra_uncertainty_steps) {
    if (guidance.mc_samples < 2) throw_config("guidance needs M >= 2");

    GuidedResult result;
    if (guidance.strength == 0.0 && extra_uncertainty_steps.empty()) {
        // no-op guidance reduces to the plain sampler, bit for bit
        result.trajectory = run_sampler(predictor, schedule, sampler_config, x_T);
        return result;
    }

    int S = sampler_config.plan.count();
    std::vector<int> guided_steps = window_step_indices(S, guidance.guided_window);
    std::set<int> guided(guided_steps.begin(), guided_steps.end());
    std::set<int> collect(extra_uncertainty_steps.begin(), extra_uncertainty_steps.end());

    if (guidance.threshold_mode == ThresholdMode::Calibrated &&
        static_cast<int>(guidance.calibrated_thresholds.size()) < S)
        throw_config("calibrated thresholds must cover all " + std::to_string(S) +
                     " plan steps");

    SamplerConfig config = sampler_config;
    config.hooks.push_back([&](StepHookContext& ctx) {
        bool guide_here = guidance.strength != 0.0 && guided.count(ctx.step_index) > 0;
        bool collect_here = collect.count(ctx.step_index) > 0;
        if (!guide_here && !collect_here) return;

        StepUncertainty su = estimate_step_uncertainty_with_base(
            ctx.predictor, schedule, ctx.x, ctx.timestep, ctx.eps, guidance.mc_samples, ctx.rng);
        result.maps.push_back(su.map);
        if (!guide_here) return;

        std::vector<uint8_t> mask =
            guidance.threshold_mode == ThresholdMode::PerStepPercentile
                ? percentile_mask(su.map, guidance.percentile)
                : threshold_mask(su.map,
                                 guidance.calibrated_thresholds[static_cast<size_t>(
                                     ctx.step_index)]);
        result.masks.push_back(mask);
        if (std::none_of(mask.begin(), mask.end(), [](uint8_t m) { return m != 0; })) return;

        Vec grad = guidance.grad_estimator == GradEstimator::CentralFd
                       ? uncertainty_grad_diag(ctx.predictor, schedule, ctx.x, ctx.timestep,
                                               ctx.eps, mask, su.draws, guidance.h_rel)
                       : uncertainty_grad_spsa(ctx.predictor, schedule, ctx.x, ctx.timestep,
                                               ctx.eps, mask, su.draws, guidance.h_rel,
                                               guidance.spsa_iterations, ctx.rng);
        ctx.eps = apply_guidance(ctx.eps, mask, grad, guidance.strength);
    });

    result.trajectory = run_sampler(predictor, schedule, config, x_T);
    return result;
}

}  // namespace scoreuq
