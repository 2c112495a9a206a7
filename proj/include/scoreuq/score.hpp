#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"

namespace scoreuq {

using Vec = std::vector<double>;

/// Noise-prediction contract: maps (state, timestep) to predicted noise of the
/// same shape. Implementations are deterministic and reentrant; stochastic
/// variants (MC-dropout passes) live outside this interface and take an
/// explicit RNG stream.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;

    virtual int dim() const = 0;
    virtual Vec predict(const Vec& x, int t) const = 0;
};

/// Wraps a predictor and counts evaluations; this is the NFE ledger for a run.
/// Not thread-safe: each trajectory owns its own counter.
class CountingPredictor final : public NoisePredictor {
public:
    explicit CountingPredictor(const NoisePredictor& inner) : inner_(inner) {}

    int dim() const override { return inner_.dim(); }
    Vec predict(const Vec& x, int t) const override {
        ++count_;
        return inner_.predict(x, t);
    }

    /// Accounts for predictor work done outside predict(), e.g. stochastic
    /// dropout passes that bypass the deterministic interface.
    void add_external(long long n) const { count_ += n; }

    long long evaluations() const { return count_; }

private:
    const NoisePredictor& inner_;
    mutable long long count_ = 0;
};

/// Axis-aligned Gaussian mixture over R^D. Component variances may be zero
/// (point masses); the noising marginal stays proper for every t >= 1.
struct GmmDistribution {
    std::vector<double> weights;       // K entries, nonnegative, sum to 1
    std::vector<Vec> means;            // K x D
    std::vector<Vec> variances;        // K x D, entries >= 0

    int component_count() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
};

GmmDistribution make_gmm(std::vector<double> weights, std::vector<Vec> means,
                         std::vector<Vec> variances);

/// Per-component parameters of the noising marginal q_t: each data component
/// N(mu, s^2) becomes N(sqrt(ab)*mu, ab*s^2 + (1-ab)) with ab = alpha_bar_t.
struct GmmMarginal {
    std::vector<Vec> means;
    std::vector<Vec> variances;
};

GmmMarginal gmm_marginal_params(const GmmDistribution& dist, const NoiseSchedule& schedule, int t);

double gmm_marginal_logpdf(const GmmDistribution& dist, const NoiseSchedule& schedule,
                           const Vec& x, int t);

/// Gradient of the log marginal density at x; responsibilities are computed in
/// log space.
Vec gmm_score(const GmmDistribution& dist, const NoiseSchedule& schedule, const Vec& x, int t);

/// Diagonal of the Hessian of the log marginal density at x. The analytic
/// form is cross-checked against finite differences of gmm_score in the tests.
Vec gmm_hessian_diag(const GmmDistribution& dist, const NoiseSchedule& schedule, const Vec& x,
                     int t);

/// Draws from the data distribution (component by weight, then Gaussian).
Vec gmm_sample(const GmmDistribution& dist, RngStream& rng);

/// Draws from the exact noising marginal q_t.
Vec gmm_marginal_sample(const GmmDistribution& dist, const NoiseSchedule& schedule, int t,
                        RngStream& rng);

/// Exact noise predictor for a finite dataset: the posterior-mean predictor
/// of the empirical data mixture, computed with log-sum-exp weights.
Vec dataset_predict_noise(const std::vector<Vec>& points, const NoiseSchedule& schedule,
                          const Vec& x, int t);

enum class ConvertDirection { NoiseToScore, ScoreToNoise };

/// score = -eps / sigma_t and back; the two directions are mutual inverses.
Vec convert_noise_score(const Vec& v, double sigma_t, ConvertDirection direction);

/// Exact predictor for GMM data: predicted noise is -sigma_t * score of q_t.
class GmmExactPredictor final : public NoisePredictor {
public:
    GmmExactPredictor(GmmDistribution dist, const NoiseSchedule& schedule)
        : dist_(std::move(dist)), schedule_(&schedule) {}

    int dim() const override { return dist_.dim(); }
    Vec predict(const Vec& x, int t) const override;

    const GmmDistribution& distribution() const { return dist_; }

private:
    GmmDistribution dist_;
    const NoiseSchedule* schedule_;
};

/// Exact predictor for a finite training set.
class DatasetExactPredictor final : public NoisePredictor {
public:
    DatasetExactPredictor(std::vector<Vec> points, const NoiseSchedule& schedule);

    int dim() const override { return dim_; }
    Vec predict(const Vec& x, int t) const override {
        return dataset_predict_noise(points_, *schedule_, x, t);
    }

private:
    std::vector<Vec> points_;
    const NoiseSchedule* schedule_;
    int dim_;
};

}  // namespace scoreuq
