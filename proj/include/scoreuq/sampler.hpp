#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"

namespace scoreuq {

/// Record of one denoising run: the visited (timestep, state) pairs with
/// strictly decreasing timesteps, the final sample, and the number of
/// predictor evaluations (including any done by hooks).
struct Trajectory {
    std::vector<std::pair<int, Vec>> states;
    Vec final_sample;
    long long nfe = 0;
};

/// Passed to per-step hooks right after the base predictor call. Hooks may
/// rewrite `eps` (guidance) and run extra predictor evaluations through
/// `predictor`, which keeps the NFE ledger exact.
struct StepHookContext {
    int step_index;      // 0-based from the start of denoising (t = T side)
    int timestep;        // current plan entry
    int next_timestep;   // following plan entry, or 0 at the end
    const Vec& x;
    Vec& eps;
    const CountingPredictor& predictor;
    RngStream& rng;
};

using StepHook = std::function<void(StepHookContext&)>;

enum class SamplerKind { Ddpm, Ddim };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ddim;
    TimestepPlan plan;
    uint64_t seed = 0;
    bool ddpm_tilde_beta = false;  // posterior variance (1-ab_prev)/(1-ab) * beta
    bool record_states = true;
    std::vector<StepHook> hooks;
};

/// Single-step clean-data estimate: (x_t - sqrt(1-ab)*eps) / sqrt(ab).
Vec predict_x0(const Vec& x_t, const Vec& eps, double alpha_bar_t);

/// Deterministic update toward alpha_bar_prev (eta = 0):
/// sqrt(ab_prev)*x0_hat + sqrt(1-ab_prev)*eps. Requires ab_t <= ab_prev.
Vec ddim_step(const Vec& x_t, const Vec& eps, double alpha_bar_t, double alpha_bar_prev);

/// Ancestral update: mean (x_t - beta_t/sqrt(1-ab_t)*eps)/sqrt(alpha_t) plus
/// sqrt(beta_t)*noise. The noise term is dropped at t = 1 regardless of input.
Vec ddpm_step(const Vec& x_t, const Vec& eps, const NoiseSchedule& schedule, int t,
              const Vec& noise, bool tilde_beta = false);

/// Reparametrized draw from q(x_t | x0): sqrt(ab_t)*x0 + sigma_t*eps.
Vec renoise(const Vec& x0, const NoiseSchedule& schedule, int t, const Vec& eps);

/// Runs the configured step rule along the plan from the caller-provided x_T.
/// Ancestral noise comes from stream (seed, ancestral index); hooks get their
/// own stream so hook randomness never shifts the sampling path.
Trajectory run_sampler(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const SamplerConfig& config, const Vec& x_T);

}  // namespace scoreuq
