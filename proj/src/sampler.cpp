#include "scoreuq/sampler.hpp"

#include <cmath>
#include <string>

#include "scoreuq/errors.hpp"

namespace scoreuq {

Vec predict_x0(const Vec& x_t, const Vec& eps, double alpha_bar_t) {
    if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0))
        throw_config("predict_x0 requires alpha_bar in (0, 1]");
    if (eps.size() != x_t.size()) throw_config("predict_x0 shape mismatch");

    double root_ab = std::sqrt(alpha_bar_t);
    double sigma = std::sqrt(1.0 - alpha_bar_t);
    Vec x0(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) x0[i] = (x_t[i] - sigma * eps[i]) / root_ab;
    return x0;
}

Vec ddim_step(const Vec& x_t, const Vec& eps, double alpha_bar_t, double alpha_bar_prev) {
    if (!(alpha_bar_t > 0.0 && alpha_bar_t <= alpha_bar_prev && alpha_bar_prev <= 1.0))
        throw_config("ddim_step requires 0 < alpha_bar_t <= alpha_bar_prev <= 1");

    Vec x0 = predict_x0(x_t, eps, alpha_bar_t);
    double root_prev = std::sqrt(alpha_bar_prev);
    double sigma_prev = std::sqrt(1.0 - alpha_bar_prev);
    Vec out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) out[i] = root_prev * x0[i] + sigma_prev * eps[i];
    return out;
}

Vec ddpm_step(const Vec& x_t, const Vec& eps, const NoiseSchedule& schedule, int t,
              const Vec& noise, bool tilde_beta) {
    if (eps.size() != x_t.size() || noise.size() != x_t.size())
        throw_config("ddpm_step shape mismatch");

    double beta = schedule.beta(t);
    double alpha = schedule.alpha(t);
    double sigma = schedule.sigma(t);

    double variance = beta;
    if (tilde_beta) variance = (1.0 - schedule.alpha_bar(t - 1)) / (1.0 - schedule.alpha_bar(t)) * beta;
    double noise_scale = (t == 1) ? 0.0 : std::sqrt(variance);

    double inv_root_alpha = 1.0 / std::sqrt(alpha);
    double eps_coeff = beta / sigma;
    Vec out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i)
        out[i] = inv_root_alpha * (x_t[i] - eps_coeff * eps[i]) + noise_scale * noise[i];
    return out;
}

Vec renoise(const Vec& x0, const NoiseSchedule& schedule, int t, const Vec& eps) {
    if (eps.size() != x0.size()) throw_config("renoise shape mismatch");
    double root_ab = std::sqrt(schedule.alpha_bar(t));
    double sigma = schedule.sigma(t);
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = root_ab * x0[i] + sigma * eps[i];
    return out;
}

Trajectory run_sampler(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                       const SamplerConfig& config, const Vec& x_T) {
    if (config.plan.steps.empty()) throw_config("sampler plan must be nonempty");
    if (static_cast<int>(x_T.size()) != predictor.dim())
        throw_config("x_T dimension does not match predictor");

    CountingPredictor counting(predictor);
    RngStream noise_rng(config.seed, stream_index::kAncestral);
    RngStream hook_rng(config.seed, stream_index::kPerturbation);

    const std::vector<int>& plan = config.plan.steps;
    int S = static_cast<int>(plan.size());

    Trajectory traj;
    if (config.record_states) traj.states.emplace_back(plan[0], x_T);

    Vec x = x_T;
    for (int i = 0; i < S; ++i) {
        int t = plan[static_cast<size_t>(i)];
        int t_next = (i + 1 < S) ? plan[static_cast<size_t>(i + 1)] : 0;

        Vec eps = counting.predict(x, t);
        for (const StepHook& hook : config.hooks) {
            if (!hook) continue;
            try {
                StepHookContext ctx{i, t, t_next, x, eps, counting, hook_rng};
                hook(ctx);
            } catch (const Error& e) {
                throw Error(e.kind(), "hook failed at step " + std::to_string(i) +
                                          " (t=" + std::to_string(t) + "): " + e.what());
            } catch (const std::exception& e) {
                throw_numeric("hook failed at step " + std::to_string(i) +
                              " (t=" + std::to_string(t) + "): " + e.what());
            }
        }

        if (config.kind == SamplerKind::Ddim) {
            x = ddim_step(x, eps, schedule.alpha_bar(t), schedule.alpha_bar(t_next));
        } else {
            // the ancestral rule lands at t-1; with a strided plan the chain
            // resumes at the next plan entry
            Vec noise = noise_rng.gaussian_vector(x.size());
            x = ddpm_step(x, eps, schedule, t, noise, config.ddpm_tilde_beta);
        }

        if (config.record_states) traj.states.emplace_back(t_next, x);
    }

    traj.final_sample = std::move(x);
    traj.nfe = counting.evaluations();
    return traj;
}

}  // namespace scoreuq
