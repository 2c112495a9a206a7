#pragma once

#include <vector>

namespace scoreuq {

/// Forward-process coefficient tables for T noising steps. Index 0 holds the
/// values for timestep t = 1; accessors take t in [1, T] (alpha_bar and sigma
/// also accept t = 0, the clean-data boundary).
///
/// Invariants, enforced at construction:
///   0 < beta_t < 1,  alpha_t = 1 - beta_t,
///   alpha_bar_t = alpha_bar_{t-1} * alpha_t with alpha_bar_0 = 1 (strictly
///   decreasing), sigma_t = sqrt(1 - alpha_bar_t).
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;
    std::vector<double> sigmas;

    double beta(int t) const;
    double alpha(int t) const;
    double alpha_bar(int t) const;  // alpha_bar(0) == 1
    double sigma(int t) const;      // sigma(0) == 0
};

/// Betas linearly interpolated from beta_start (t=1) to beta_end (t=T).
NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end);

/// Derives the full table set from an explicit beta sequence.
NoiseSchedule schedule_from_betas(const std::vector<double>& betas);

/// Generation-time subsequence of timesteps, strictly decreasing within [1, T].
struct TimestepPlan {
    std::vector<int> steps;

    int count() const { return static_cast<int>(steps.size()); }
};

/// Uniform-stride plan anchored at T: stride k = floor(T/S), steps
/// {T, T-k, T-2k, ...} truncated to S entries.
TimestepPlan plan_timesteps(int T, int S);

}  // namespace scoreuq
