#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"

namespace scoreuq {

/// Small tanh MLP noise predictor. Input is concat(x, Fourier features of
/// t/T); hidden layers use tanh with optional inverted dropout after each
/// activation, the output layer is linear with dimension input_dim.
struct MlpConfig {
    int input_dim = 1;
    std::vector<int> hidden = {64, 64};
    int fourier_pairs = 4;  // sin/cos of 2^f * pi * t/T, f = 0..pairs-1
    int total_timesteps = 1000;
    double dropout_rate = 0.0;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 100;
    uint64_t seed = 0;
};

struct MlpParams {
    struct Layer {
        int in = 0;
        int out = 0;
        std::vector<double> weights;  // row-major [out][in]
        Vec bias;
    };
    std::vector<Layer> layers;
};

/// Glorot-uniform weights, zero biases, deterministic from config.seed.
MlpParams init_mlp_params(const MlpConfig& config);

Vec mlp_time_features(int t, int total_timesteps, int pairs);

/// Forward pass. When dropout_rng is null or dropout_rate is 0 the pass is
/// deterministic (inference mode); otherwise each hidden activation is kept
/// with probability 1-rate and scaled by 1/(1-rate).
Vec mlp_forward(const MlpParams& params, const MlpConfig& config, const Vec& x, int t,
                RngStream* dropout_rng = nullptr);

/// Squared-error loss sum_i (eps_hat_i - target_i)^2 with its gradient in
/// parameter space, accumulated into `grad` (caller zeroes it). Used by both
/// training and the finite-difference gradient checks.
double mlp_loss_and_grad(const MlpParams& params, const MlpConfig& config, const Vec& x, int t,
                         const Vec& target, MlpParams& grad, RngStream* dropout_rng = nullptr);

struct TrainResult {
    MlpParams params;
    Vec loss_curve;  // mean batch loss per epoch
};

/// Denoising score-matching training: for each example draw t uniform in
/// [1, T] and eps ~ N(0, I), noise the data point, regress the noise with
/// plain SGD. Deterministic given config.seed.
TrainResult train_dsm(const std::vector<Vec>& data, const NoiseSchedule& schedule,
                      const MlpConfig& config);

struct McDropoutResult {
    Vec mean;
    Vec variance;  // unbiased over the K passes
};

/// Mean and variance of K stochastic dropout passes. The K mask streams are
/// derived from `rng` up front, so results do not depend on evaluation order.
McDropoutResult mc_dropout_uncertainty(const MlpParams& params, const MlpConfig& config,
                                       const Vec& x, int t, int K, RngStream& rng);

/// Deterministic NoisePredictor view of trained parameters (dropout off).
class MlpPredictor final : public NoisePredictor {
public:
    MlpPredictor(MlpParams params, MlpConfig config)
        : params_(std::move(params)), config_(std::move(config)) {}

    int dim() const override { return config_.input_dim; }
    Vec predict(const Vec& x, int t) const override {
        return mlp_forward(params_, config_, x, t);
    }

    const MlpParams& params() const { return params_; }
    const MlpConfig& config() const { return config_; }

private:
    MlpParams params_;
    MlpConfig config_;
};

/// Parameter bundle on disk: params.json (shapes + config) next to one UDT1
/// tensor per layer weight/bias.
void save_mlp(const std::filesystem::path& dir, const MlpParams& params, const MlpConfig& config);
std::pair<MlpParams, MlpConfig> load_mlp(const std::filesystem::path& dir);

}  // namespace scoreuq
