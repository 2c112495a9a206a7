#pragma once

#include <cstdint>
#include <vector>

#include "scoreuq/sampler.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"
#include "scoreuq/uncertainty.hpp"

namespace scoreuq {

enum class ThresholdMode { PerStepPercentile, Calibrated };
enum class GradEstimator { CentralFd, Spsa };

struct GuidanceConfig {
    double percentile = 95.0;  // p
    double strength = 1.0;     // lambda; 0 disables guidance entirely
    ThresholdMode threshold_mode = ThresholdMode::PerStepPercentile;
    std::vector<double> calibrated_thresholds;  // per plan step index, Calibrated mode
    GradEstimator grad_estimator = GradEstimator::CentralFd;
    double h_rel = 1e-4;
    int spsa_iterations = 4;
    int mc_samples = 5;  // M for the per-step uncertainty estimate
    FractionalWindow guided_window{0.0, 1.0};  // default: guide every step
};

/// p-th percentile by linear interpolation over the sorted values.
double percentile_linear(const Vec& values, double p);

/// mask_i = 1 iff U_i > percentile(U, p); ties with the threshold excluded.
std::vector<uint8_t> percentile_mask(const UncertaintyMap& map, double p);

/// mask_i = 1 iff U_i > tau.
std::vector<uint8_t> threshold_mask(const UncertaintyMap& map, double tau);

/// Per-component derivative dU_i/deps_i of the uncertainty pipeline
/// (eps -> x0_hat -> re-noised variants -> scores -> variance) by central
/// finite differences with step h_rel * (1 + |eps_i|), perturbing one masked
/// component at a time. The draws must be the exact ones used by the paired
/// uncertainty estimate (common random numbers); unmasked components are 0.
/// An empty mask yields the zero vector. Costs 2 * M evaluations per masked
/// component.
Vec uncertainty_grad_diag(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                          const Vec& x_t, int t, const Vec& eps,
                          const std::vector<uint8_t>& mask, const std::vector<Vec>& frozen_draws,
                          double h_rel);

/// Simultaneous-perturbation estimate of the same diagonal: K iterations of
/// paired evaluations with Rademacher perturbations on the masked components.
/// Costs 2 * M evaluations per iteration regardless of mask size.
Vec uncertainty_grad_spsa(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                          const Vec& x_t, int t, const Vec& eps,
                          const std::vector<uint8_t>& mask, const std::vector<Vec>& frozen_draws,
                          double h_rel, int iterations, RngStream& rng);

/// eps + lambda * (mask * grad) elementwise; lambda = 0 returns eps unchanged.
Vec apply_guidance(const Vec& eps, const std::vector<uint8_t>& mask, const Vec& grad,
                   double lambda);

struct GuidedResult {
    Trajectory trajectory;
    std::vector<UncertaintyMap> maps;            // one per step where estimated
    std::vector<std::vector<uint8_t>> masks;     // paired with maps (guided steps only)
};

/// Full guided loop: at each step inside guided_window, estimate uncertainty
/// with recorded draws, mask by threshold, take the uncertainty gradient with
/// the frozen draws, and update the score before the sampler step. Steps in
/// `extra_uncertainty_steps` get an uncertainty estimate without guidance
/// (used when an aggregation window extends past the guided window). With
/// strength 0 this is exactly run_sampler, including the NFE count.
GuidedResult guided_sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                           const SamplerConfig& sampler_config, const GuidanceConfig& guidance,
                           const Vec& x_T, const std::vector<int>& extra_uncertainty_steps = {});

}  // namespace scoreuq
