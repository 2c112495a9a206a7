#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "scoreuq/errors.hpp"
#include "scoreuq/experiments.hpp"
#include "scoreuq/mlp.hpp"
#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"

using namespace scoreuq;

namespace {

MlpConfig tiny_config(int dim, int T) {
    MlpConfig config;
    config.input_dim = dim;
    config.hidden = {8, 6};
    config.fourier_pairs = 2;
    config.total_timesteps = T;
    config.seed = 7;
    return config;
}

void zero_params(MlpParams& params) {
    for (auto& layer : params.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("all-zero parameters produce the zero vector") {
    MlpConfig config = tiny_config(3, 50);
    MlpParams params = init_mlp_params(config);
    zero_params(params);
    Vec out = mlp_forward(params, config, {0.4, -1.0, 2.2}, 17);
    REQUIRE(out.size() == 3);
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("inference is deterministic without dropout") {
    MlpConfig config = tiny_config(2, 50);
    MlpParams params = init_mlp_params(config);
    Vec a = mlp_forward(params, config, {0.3, -0.8}, 11);
    Vec b = mlp_forward(params, config, {0.3, -0.8}, 11);
    CHECK(a == b);

    config.dropout_rate = 0.5;
    // dropout configured but no mask source: still deterministic
    Vec c = mlp_forward(params, config, {0.3, -0.8}, 11);
    CHECK(a == c);
}

TEST_CASE("backprop gradients match central finite differences") {
    MlpConfig config = tiny_config(2, 50);
    MlpParams params = init_mlp_params(config);
    Vec x = {0.4, -0.9};
    Vec target = {0.2, 0.6};
    int t = 23;

    MlpParams grad = params;
    for (auto& layer : grad.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    mlp_loss_and_grad(params, config, x, t, target, grad);

    auto loss_at = [&](const MlpParams& p) {
        Vec out = mlp_forward(p, config, x, t);
        double l = 0.0;
        for (size_t i = 0; i < out.size(); ++i) {
            double d = out[i] - target[i];
            l += d * d;
        }
        return l;
    };

    const double h = 1e-6;
    RngStream pick(3, 0);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        // sampled weight entries plus one bias entry per layer
        for (int trial = 0; trial < 6; ++trial) {
            size_t i = pick.uniform_index(params.layers[l].weights.size());
            MlpParams probe = params;
            probe.layers[l].weights[i] += h;
            double up = loss_at(probe);
            probe.layers[l].weights[i] -= 2 * h;
            double down = loss_at(probe);
            double fd = (up - down) / (2 * h);
            double an = grad.layers[l].weights[i];
            CHECK(std::abs(an - fd) / std::max(std::abs(fd), 1e-3) < 1e-5);
        }
        size_t bi = pick.uniform_index(params.layers[l].bias.size());
        MlpParams probe = params;
        probe.layers[l].bias[bi] += h;
        double up = loss_at(probe);
        probe.layers[l].bias[bi] -= 2 * h;
        double down = loss_at(probe);
        double fd = (up - down) / (2 * h);
        CHECK(std::abs(grad.layers[l].bias[bi] - fd) / std::max(std::abs(fd), 1e-3) < 1e-5);
    }
}

TEST_CASE("backprop matches FD with an active dropout mask") {
    MlpConfig config = tiny_config(2, 50);
    config.dropout_rate = 0.4;
    MlpParams params = init_mlp_params(config);
    Vec x = {0.4, -0.9}, target = {0.0, 0.0};

    MlpParams grad = params;
    zero_params(grad);
    // identical mask stream for the gradient pass and both FD probes
    RngStream mask(55, 0);
    mlp_loss_and_grad(params, config, x, 9, target, grad, &mask);

    const double h = 1e-6;
    size_t i = 3;
    MlpParams probe = params;
    probe.layers[0].weights[i] += h;
    RngStream m1(55, 0);
    Vec up_out = mlp_forward(probe, config, x, 9, &m1);
    probe.layers[0].weights[i] -= 2 * h;
    RngStream m2(55, 0);
    Vec down_out = mlp_forward(probe, config, x, 9, &m2);
    double up = up_out[0] * up_out[0] + up_out[1] * up_out[1];
    double down = down_out[0] * down_out[0] + down_out[1] * down_out[1];
    double fd = (up - down) / (2 * h);
    CHECK(std::abs(grad.layers[0].weights[i] - fd) / std::max(std::abs(fd), 1e-3) < 1e-5);
}

TEST_CASE("zero epochs return the initial parameters") {
    NoiseSchedule s = build_linear_schedule(50, 1e-3, 0.05);
    MlpConfig config = tiny_config(1, 50);
    config.epochs = 0;
    TrainResult r = train_dsm({{0.0}, {1.0}}, s, config);
    MlpParams init = init_mlp_params(config);
    REQUIRE(r.params.layers.size() == init.layers.size());
    for (size_t l = 0; l < init.layers.size(); ++l) {
        CHECK(r.params.layers[l].weights == init.layers[l].weights);
        CHECK(r.params.layers[l].bias == init.layers[l].bias);
    }
    CHECK(r.loss_curve.empty());
}

TEST_CASE("training reduces the loss on the two-component benchmark") {
    NoiseSchedule s = build_linear_schedule(100, 1e-3, 0.05);
    GmmDistribution data = benchmark_gmm_1d();

    for (uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed, stream_index::kData);
        std::vector<Vec> points(512);
        for (auto& p : points) p = gmm_sample(data, rng);

        MlpConfig config = tiny_config(1, 100);
        config.hidden = {16, 16};
        config.seed = seed;
        config.epochs = 60;
        config.batch_size = 64;
        config.learning_rate = 1e-2;
        TrainResult r = train_dsm(points, s, config);
        REQUIRE(r.loss_curve.size() == 60);
        CHECK(r.loss_curve.back() < r.loss_curve.front());
    }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    NoiseSchedule s = build_linear_schedule(60, 1e-3, 0.05);
    std::vector<Vec> points = {{-1.0}, {0.5}, {1.5}, {0.0}};
    MlpConfig config = tiny_config(1, 60);
    config.epochs = 5;
    config.learning_rate = 1e-2;

    TrainResult a = train_dsm(points, s, config);
    TrainResult b = train_dsm(points, s, config);
    CHECK(a.loss_curve == b.loss_curve);
    for (size_t l = 0; l < a.params.layers.size(); ++l)
        CHECK(a.params.layers[l].weights == b.params.layers[l].weights);
}

TEST_CASE("trained single-point model approaches the exact predictor") {
    const int T = 100;
    NoiseSchedule s = build_linear_schedule(T, 1e-3, 0.05);
    std::vector<Vec> points(256, Vec{0.0});

    MlpConfig config;
    config.input_dim = 1;
    config.hidden = {32, 32};
    config.fourier_pairs = 6;
    config.total_timesteps = T;
    config.seed = 11;
    config.epochs = 2000;
    config.batch_size = 32;
    config.learning_rate = 3e-2;
    TrainResult r = train_dsm(points, s, config);

    // oracle: the exact point-mass predictor eps(x, t) = x / sigma_t, probed
    // inside the noised support (|x| up to 1.5 sigma_t)
    double worst = 0.0;
    for (int t : {25, 50, 75}) {
        double sig = s.sigma(t);
        for (double m : {0.25, 0.5, 1.0, 1.5}) {
            for (double sign : {-1.0, 1.0}) {
                double x = sign * m * sig;
                double oracle = x / sig;
                double pred = mlp_forward(r.params, config, {x}, t)[0];
                double rel = std::abs(pred - oracle) / std::max(std::abs(oracle), 0.3);
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst < 0.10);
}

TEST_CASE("mc-dropout basics") {
    MlpConfig config = tiny_config(2, 50);
    MlpParams params = init_mlp_params(config);
    RngStream rng(31, 0);

    CHECK_THROWS_AS(mc_dropout_uncertainty(params, config, {0.1, 0.2}, 5, 1, rng), Error);

    // rate 0: passes are identical, variance exactly zero
    McDropoutResult r0 = mc_dropout_uncertainty(params, config, {0.1, 0.2}, 5, 8, rng);
    CHECK(r0.variance[0] == 0.0);
    CHECK(r0.variance[1] == 0.0);

    config.dropout_rate = 0.3;
    McDropoutResult r = mc_dropout_uncertainty(params, config, {0.1, 0.2}, 5, 8, rng);
    for (double v : r.variance) CHECK(v >= 0.0);
    CHECK((r.variance[0] > 0.0 || r.variance[1] > 0.0));
}

TEST_CASE("mc-dropout variance does not depend on pass evaluation order") {
    MlpConfig config = tiny_config(2, 50);
    config.dropout_rate = 0.3;
    MlpParams params = init_mlp_params(config);

    // reproduce the pass outputs by hand, evaluate them in reverse order,
    // and check the reduction gives bit-identical variance
    const int K = 6;
    RngStream seeder(99, 0);
    std::vector<uint64_t> pass_seeds(K);
    for (auto& s : pass_seeds) s = seeder.next_u64();

    ScoreStack stack;
    stack.rows = K;
    stack.cols = 2;
    stack.data.resize(static_cast<size_t>(K) * 2);
    for (int k = K - 1; k >= 0; --k) {
        RngStream mask(pass_seeds[static_cast<size_t>(k)], 0);
        Vec out = mlp_forward(params, config, {0.1, 0.2}, 5, &mask);
        std::copy(out.begin(), out.end(), stack.row(k));
    }
    Vec reversed_order = variance_of_stack(stack);

    RngStream rng(99, 0);
    McDropoutResult forward = mc_dropout_uncertainty(params, config, {0.1, 0.2}, 5, K, rng);
    CHECK(forward.variance == reversed_order);
}

TEST_CASE("parameter bundles roundtrip through disk") {
    MlpConfig config = tiny_config(2, 50);
    config.dropout_rate = 0.1;
    MlpParams params = init_mlp_params(config);

    std::filesystem::path dir = std::filesystem::temp_directory_path() / "scoreuq_mlp_test";
    save_mlp(dir, params, config);
    auto [loaded, loaded_config] = load_mlp(dir);

    CHECK(loaded_config.input_dim == config.input_dim);
    CHECK(loaded_config.hidden == config.hidden);
    CHECK(loaded_config.dropout_rate == config.dropout_rate);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        CHECK(loaded.layers[l].weights == params.layers[l].weights);
        CHECK(loaded.layers[l].bias == params.layers[l].bias);
    }
}

}  // TEST_SUITE
