#include "scoreuq/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scoreuq/errors.hpp"

namespace scoreuq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_dim(const Vec& x, int dim, const char* what) {
    if (static_cast<int>(x.size()) != dim)
        throw_config(std::string(what) + ": expected dimension " + std::to_string(dim) +
                     ", got " + std::to_string(x.size()));
}

/// Per-component log of w_k * N(x; m_k, v_k).
std::vector<double> component_log_terms(const GmmDistribution& dist, const GmmMarginal& marginal,
                                        const Vec& x) {
    int K = dist.component_count();
    int D = dist.dim();
    std::vector<double> log_terms(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        double lw = dist.weights[static_cast<size_t>(k)] > 0.0
                        ? std::log(dist.weights[static_cast<size_t>(k)])
                        : -std::numeric_limits<double>::infinity();
        double acc = lw;
        for (int d = 0; d < D; ++d) {
            double m = marginal.means[static_cast<size_t>(k)][static_cast<size_t>(d)];
            double v = marginal.variances[static_cast<size_t>(k)][static_cast<size_t>(d)];
            double diff = x[static_cast<size_t>(d)] - m;
            acc += -0.5 * (kLog2Pi + std::log(v)) - diff * diff / (2.0 * v);
        }
        log_terms[static_cast<size_t>(k)] = acc;
    }
    return log_terms;
}

double log_sum_exp(const std::vector<double>& v) {
    double hi = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

std::vector<double> responsibilities(const std::vector<double>& log_terms) {
    double lse = log_sum_exp(log_terms);
    std::vector<double> r(log_terms.size());
    for (size_t k = 0; k < log_terms.size(); ++k) r[k] = std::exp(log_terms[k] - lse);
    return r;
}

}  // namespace

GmmDistribution make_gmm(std::vector<double> weights, std::vector<Vec> means,
                         std::vector<Vec> variances) {
    if (weights.empty()) throw_config("mixture needs at least one component");
    if (means.size() != weights.size() || variances.size() != weights.size())
        throw_config("mixture component counts do not match");

    size_t D = means[0].size();
    if (D == 0) throw_config("mixture dimension must be positive");
    double wsum = 0.0;
    for (size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] >= 0.0)) throw_config("mixture weights must be nonnegative");
        wsum += weights[k];
        if (means[k].size() != D || variances[k].size() != D)
            throw_config("mixture component dimensions do not match");
        for (size_t d = 0; d < D; ++d) {
            if (!std::isfinite(means[k][d])) throw_config("mixture means must be finite");
            if (!(variances[k][d] >= 0.0) || !std::isfinite(variances[k][d]))
                throw_config("mixture variances must be finite and >= 0");
        }
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw_config("mixture weights must sum to 1, got " + std::to_string(wsum));

    GmmDistribution dist;
    dist.weights = std::move(weights);
    dist.means = std::move(means);
    dist.variances = std::move(variances);
    return dist;
}

GmmMarginal gmm_marginal_params(const GmmDistribution& dist, const NoiseSchedule& schedule,
                                int t) {
    double ab = schedule.alpha_bar(t);
    double root_ab = std::sqrt(ab);
    double noise_var = 1.0 - ab;

    GmmMarginal out;
    out.means.resize(dist.means.size());
    out.variances.resize(dist.variances.size());
    for (size_t k = 0; k < dist.means.size(); ++k) {
        const Vec& mu = dist.means[k];
        const Vec& s2 = dist.variances[k];
        Vec m(mu.size()), v(mu.size());
        for (size_t d = 0; d < mu.size(); ++d) {
            m[d] = root_ab * mu[d];
            v[d] = ab * s2[d] + noise_var;
        }
        out.means[k] = std::move(m);
        out.variances[k] = std::move(v);
    }
    return out;
}

double gmm_marginal_logpdf(const GmmDistribution& dist, const NoiseSchedule& schedule,
                           const Vec& x, int t) {
    check_dim(x, dist.dim(), "gmm_marginal_logpdf");
    GmmMarginal marginal = gmm_marginal_params(dist, schedule, t);
    return log_sum_exp(component_log_terms(dist, marginal, x));
}

Vec gmm_score(const GmmDistribution& dist, const NoiseSchedule& schedule, const Vec& x, int t) {
    check_dim(x, dist.dim(), "gmm_score");
    GmmMarginal marginal = gmm_marginal_params(dist, schedule, t);
    std::vector<double> r = responsibilities(component_log_terms(dist, marginal, x));

    int K = dist.component_count();
    int D = dist.dim();
    Vec score(static_cast<size_t>(D), 0.0);
    for (int k = 0; k < K; ++k) {
        for (int d = 0; d < D; ++d) {
            double m = marginal.means[static_cast<size_t>(k)][static_cast<size_t>(d)];
            double v = marginal.variances[static_cast<size_t>(k)][static_cast<size_t>(d)];
            score[static_cast<size_t>(d)] +=
                r[static_cast<size_t>(k)] * (-(x[static_cast<size_t>(d)] - m) / v);
        }
    }
    return score;
}

Vec gmm_hessian_diag(const GmmDistribution& dist, const NoiseSchedule& schedule, const Vec& x,
                     int t) {
    check_dim(x, dist.dim(), "gmm_hessian_diag");
    GmmMarginal marginal = gmm_marginal_params(dist, schedule, t);
    std::vector<double> r = responsibilities(component_log_terms(dist, marginal, x));

    int K = dist.component_count();
    int D = dist.dim();
    Vec hess(static_cast<size_t>(D), 0.0);
    for (int d = 0; d < D; ++d) {
        double g_mix = 0.0;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
            double m = marginal.means[static_cast<size_t>(k)][static_cast<size_t>(d)];
            double v = marginal.variances[static_cast<size_t>(k)][static_cast<size_t>(d)];
            double g_k = -(x[static_cast<size_t>(d)] - m) / v;
            double rk = r[static_cast<size_t>(k)];
            g_mix += rk * g_k;
            acc += rk * (-1.0 / v + g_k * g_k);
        }
        hess[static_cast<size_t>(d)] = acc - g_mix * g_mix;
    }
    return hess;
}

Vec gmm_sample(const GmmDistribution& dist, RngStream& rng) {
    double u = rng.next_double();
    size_t k = 0;
    double cum = 0.0;
    for (size_t i = 0; i < dist.weights.size(); ++i) {
        cum += dist.weights[i];
        if (u < cum) {
            k = i;
            break;
        }
        k = i;  // falls through to the last component on rounding
    }
    const Vec& mu = dist.means[k];
    const Vec& s2 = dist.variances[k];
    Vec x(mu.size());
    for (size_t d = 0; d < mu.size(); ++d) x[d] = mu[d] + std::sqrt(s2[d]) * rng.next_gaussian();
    return x;
}

Vec gmm_marginal_sample(const GmmDistribution& dist, const NoiseSchedule& schedule, int t,
                        RngStream& rng) {
    GmmMarginal marginal = gmm_marginal_params(dist, schedule, t);
    double u = rng.next_double();
    size_t k = 0;
    double cum = 0.0;
    for (size_t i = 0; i < dist.weights.size(); ++i) {
        cum += dist.weights[i];
        if (u < cum) {
            k = i;
            break;
        }
        k = i;
    }
    const Vec& m = marginal.means[k];
    const Vec& v = marginal.variances[k];
    Vec x(m.size());
    for (size_t d = 0; d < m.size(); ++d) x[d] = m[d] + std::sqrt(v[d]) * rng.next_gaussian();
    return x;
}

Vec dataset_predict_noise(const std::vector<Vec>& points, const NoiseSchedule& schedule,
                          const Vec& x, int t) {
    if (points.empty()) throw_config("dataset predictor needs at least one point");
    double ab = schedule.alpha_bar(t);
    double root_ab = std::sqrt(ab);
    double sigma = schedule.sigma(t);
    if (!(sigma > 0.0)) throw_config("dataset predictor requires t >= 1 (sigma_t > 0)");

    size_t D = x.size();
    std::vector<double> log_w(points.size());
    for (size_t n = 0; n < points.size(); ++n) {
        if (points[n].size() != D) throw_config("dataset point dimension mismatch");
        double sq = 0.0;
        for (size_t d = 0; d < D; ++d) {
            double diff = x[d] - root_ab * points[n][d];
            sq += diff * diff;
        }
        log_w[n] = -sq / (2.0 * sigma * sigma);
    }
    double lse = log_sum_exp(log_w);

    Vec posterior_mean(D, 0.0);
    for (size_t n = 0; n < points.size(); ++n) {
        double w = std::exp(log_w[n] - lse);
        for (size_t d = 0; d < D; ++d) posterior_mean[d] += w * points[n][d];
    }

    Vec eps(D);
    for (size_t d = 0; d < D; ++d) eps[d] = (x[d] - root_ab * posterior_mean[d]) / sigma;
    return eps;
}

Vec convert_noise_score(const Vec& v, double sigma_t, ConvertDirection direction) {
    if (!(sigma_t > 0.0)) throw_config("convert_noise_score requires sigma_t > 0");
    Vec out(v.size());
    if (direction == ConvertDirection::NoiseToScore) {
        for (size_t i = 0; i < v.size(); ++i) out[i] = -v[i] / sigma_t;
    } else {
        for (size_t i = 0; i < v.size(); ++i) out[i] = -sigma_t * v[i];
    }
    return out;
}

Vec GmmExactPredictor::predict(const Vec& x, int t) const {
    Vec score = gmm_score(dist_, *schedule_, x, t);
    return convert_noise_score(score, schedule_->sigma(t), ConvertDirection::ScoreToNoise);
}

DatasetExactPredictor::DatasetExactPredictor(std::vector<Vec> points,
                                             const NoiseSchedule& schedule)
    : points_(std::move(points)), schedule_(&schedule) {
    if (points_.empty()) throw_config("dataset predictor needs at least one point");
    dim_ = static_cast<int>(points_[0].size());
    for (const Vec& p : points_) {
        if (static_cast<int>(p.size()) != dim_) throw_config("dataset point dimension mismatch");
        for (double v : p)
            if (!std::isfinite(v)) throw_config("dataset points must be finite");
    }
}

}  // namespace scoreuq
