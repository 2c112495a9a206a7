#include "scoreuq/schedule.hpp"

#include <cmath>
#include <string>

#include "scoreuq/errors.hpp"

namespace scoreuq {

namespace {

void check_timestep(int t, int T, int lowest) {
    if (t < lowest || t > T)
        throw_config("timestep " + std::to_string(t) + " out of range [" +
                     std::to_string(lowest) + ", " + std::to_string(T) + "]");
}

}  // namespace

double NoiseSchedule::beta(int t) const {
    check_timestep(t, T, 1);
    return betas[static_cast<size_t>(t) - 1];
}

double NoiseSchedule::alpha(int t) const {
    check_timestep(t, T, 1);
    return alphas[static_cast<size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_timestep(t, T, 0);
    return t == 0 ? 1.0 : alpha_bars[static_cast<size_t>(t) - 1];
}

double NoiseSchedule::sigma(int t) const {
    check_timestep(t, T, 0);
    return t == 0 ? 0.0 : sigmas[static_cast<size_t>(t) - 1];
}

NoiseSchedule schedule_from_betas(const std::vector<double>& betas) {
    if (betas.empty()) throw_config("beta sequence must be nonempty");
    for (double b : betas)
        if (!(b > 0.0 && b < 1.0))
            throw_config("beta values must lie in (0, 1), got " + std::to_string(b));

    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.betas = betas;
    s.alphas.resize(betas.size());
    s.alpha_bars.resize(betas.size());
    s.sigmas.resize(betas.size());
    double running = 1.0;
    for (size_t i = 0; i < betas.size(); ++i) {
        s.alphas[i] = 1.0 - betas[i];
        running *= s.alphas[i];
        s.alpha_bars[i] = running;
        s.sigmas[i] = std::sqrt(1.0 - running);
    }
    return s;
}

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw_config("schedule length T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw_config("beta range must satisfy 0 < beta_start <= beta_end < 1");

    std::vector<double> betas(static_cast<size_t>(T));
    if (T == 1) {
        betas[0] = beta_start;
    } else {
        for (int t = 0; t < T; ++t)
            betas[static_cast<size_t>(t)] =
                beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                 static_cast<double>(T - 1);
    }
    return schedule_from_betas(betas);
}

TimestepPlan plan_timesteps(int T, int S) {
    if (T < 1) throw_config("T must be >= 1");
    if (S < 1 || S > T)
        throw_config("generation step count S=" + std::to_string(S) +
                     " must lie in [1, T=" + std::to_string(T) + "]");

    int stride = T / S;
    TimestepPlan plan;
    plan.steps.resize(static_cast<size_t>(S));
    for (int i = 0; i < S; ++i) plan.steps[static_cast<size_t>(i)] = T - i * stride;
    return plan;
}

}  // namespace scoreuq
