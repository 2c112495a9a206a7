#include "scoreuq/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "scoreuq/errors.hpp"
#include "scoreuq/sampler.hpp"

namespace scoreuq {

Vec variance_of_stack(const ScoreStack& stack) {
    if (stack.rows < 2) throw_config("score stack needs at least 2 rows");
    if (stack.cols < 1) throw_config("score stack needs at least 1 column");

    Vec out(static_cast<size_t>(stack.cols));
    std::vector<double> column(static_cast<size_t>(stack.rows));
    for (int c = 0; c < stack.cols; ++c) {
        for (int r = 0; r < stack.rows; ++r) column[static_cast<size_t>(r)] = stack.row(r)[c];
        std::sort(column.begin(), column.end());
        if (column.front() == column.back()) {
            out[static_cast<size_t>(c)] = 0.0;  // equal outputs: exactly zero
            continue;
        }
        double mean = 0.0;
        for (double v : column) mean += v;
        mean /= static_cast<double>(stack.rows);
        double ss = 0.0;
        for (double v : column) {
            double d = v - mean;
            ss += d * d;
        }
        out[static_cast<size_t>(c)] = ss / static_cast<double>(stack.rows - 1);
        if (!std::isfinite(out[static_cast<size_t>(c)]))
            throw_numeric("non-finite uncertainty value at component " + std::to_string(c));
    }
    return out;
}

std::vector<int> window_step_indices(int S, const FractionalWindow& window) {
    if (!(window.lo < window.hi)) throw_config("window requires lo < hi");
    std::vector<int> out;
    for (int i = 0; i < S; ++i) {
        double progress = static_cast<double>(i) / static_cast<double>(S);
        if (progress >= window.lo && progress <= window.hi) out.push_back(i);
    }
    return out;
}

UncertaintyMap score_variance_frozen(const NoisePredictor& predictor,
                                     const NoiseSchedule& schedule, const Vec& x_t, int t,
                                     const Vec& eps_base, const std::vector<Vec>& draws) {
    if (draws.size() < 2) throw_config("score variance needs at least M = 2 draws");

    Vec x0 = predict_x0(x_t, eps_base, schedule.alpha_bar(t));

    ScoreStack stack;
    stack.rows = static_cast<int>(draws.size());
    stack.cols = static_cast<int>(x_t.size());
    stack.data.resize(static_cast<size_t>(stack.rows) * stack.cols);
    for (size_t i = 0; i < draws.size(); ++i) {
        if (draws[i].size() != x_t.size()) throw_config("perturbation draw shape mismatch");
        Vec renoised = renoise(x0, schedule, t, draws[i]);
        Vec score = predictor.predict(renoised, t);
        std::copy(score.begin(), score.end(), stack.row(static_cast<int>(i)));
    }

    UncertaintyMap map;
    map.t = t;
    map.values = variance_of_stack(stack);
    return map;
}

StepUncertainty estimate_step_uncertainty_with_base(const NoisePredictor& predictor,
                                                    const NoiseSchedule& schedule, const Vec& x_t,
                                                    int t, const Vec& eps_base, int M,
                                                    RngStream& rng) {
    if (M < 2) throw_config("uncertainty estimation needs M >= 2");

    StepUncertainty result;
    result.draws.reserve(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) result.draws.push_back(rng.gaussian_vector(x_t.size()));
    result.map = score_variance_frozen(predictor, schedule, x_t, t, eps_base, result.draws);
    return result;
}

StepUncertainty estimate_step_uncertainty(const NoisePredictor& predictor,
                                          const NoiseSchedule& schedule, const Vec& x_t, int t,
                                          int M, RngStream& rng) {
    Vec eps_base = predictor.predict(x_t, t);
    return estimate_step_uncertainty_with_base(predictor, schedule, x_t, t, eps_base, M, rng);
}

UncertaintyMap gaussian_perturbation_uncertainty(const NoisePredictor& predictor, const Vec& x_t,
                                                 int t, int M, double sigma_p, RngStream& rng) {
    if (M < 2) throw_config("uncertainty estimation needs M >= 2");
    if (!(sigma_p > 0.0)) throw_config("gaussian perturbation needs sigma_p > 0");

    ScoreStack stack;
    stack.rows = M;
    stack.cols = static_cast<int>(x_t.size());
    stack.data.resize(static_cast<size_t>(M) * stack.cols);
    Vec perturbed(x_t.size());
    for (int i = 0; i < M; ++i) {
        for (size_t d = 0; d < x_t.size(); ++d)
            perturbed[d] = x_t[d] + sigma_p * rng.next_gaussian();
        Vec score = predictor.predict(perturbed, t);
        std::copy(score.begin(), score.end(), stack.row(i));
    }

    UncertaintyMap map;
    map.t = t;
    map.values = variance_of_stack(stack);
    return map;
}

double aggregate_uncertainty(const std::vector<UncertaintyMap>& maps,
                             const FractionalWindow& window, const TimestepPlan& plan) {
    std::vector<int> indices = window_step_indices(plan.count(), window);
    if (indices.empty()) throw_config("uncertainty window selects no steps");

    std::unordered_map<int, const UncertaintyMap*> by_timestep;
    for (const auto& m : maps) by_timestep[m.t] = &m;

    double total = 0.0;
    for (int i : indices) {
        int t = plan.steps[static_cast<size_t>(i)];
        auto it = by_timestep.find(t);
        if (it == by_timestep.end())
            throw_config("no uncertainty map for window step index " + std::to_string(i) +
                         " (t=" + std::to_string(t) + ")");
        for (double v : it->second->values) total += v;
    }
    return total;
}

ProfileStats uncertainty_profile(const std::vector<Vec>& per_step_totals) {
    if (per_step_totals.size() < 2) throw_config("profile needs at least 2 samples");
    size_t steps = per_step_totals[0].size();
    for (const Vec& row : per_step_totals)
        if (row.size() != steps) throw_config("profile rows must have equal length");

    ProfileStats stats;
    stats.mean.assign(steps, 0.0);
    stats.stddev.assign(steps, 0.0);
    double n = static_cast<double>(per_step_totals.size());
    for (size_t j = 0; j < steps; ++j) {
        double mean = 0.0;
        for (const Vec& row : per_step_totals) mean += row[j];
        mean /= n;
        double ss = 0.0;
        for (const Vec& row : per_step_totals) {
            double d = row[j] - mean;
            ss += d * d;
        }
        stats.mean[j] = mean;
        stats.stddev[j] = std::sqrt(ss / (n - 1.0));
    }
    return stats;
}

}  // namespace scoreuq
