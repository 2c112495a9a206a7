#include "scoreuq/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "scoreuq/errors.hpp"
#include "scoreuq/io.hpp"
#include "scoreuq/uncertainty.hpp"

namespace scoreuq {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct LayerDims {
    std::vector<int> sizes;  // input, hidden..., output
};

LayerDims layer_dims(const MlpConfig& config) {
    LayerDims dims;
    dims.sizes.push_back(config.input_dim + 2 * config.fourier_pairs);
    for (int h : config.hidden) dims.sizes.push_back(h);
    dims.sizes.push_back(config.input_dim);
    return dims;
}

void check_config(const MlpConfig& config) {
    if (config.input_dim < 1) throw_config("mlp input_dim must be positive");
    if (config.fourier_pairs < 0) throw_config("mlp fourier_pairs must be >= 0");
    if (config.total_timesteps < 1) throw_config("mlp total_timesteps must be positive");
    for (int h : config.hidden)
        if (h < 1) throw_config("mlp hidden sizes must be positive");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw_config("mlp dropout_rate must lie in [0, 1)");
}

void check_params(const MlpParams& params, const MlpConfig& config) {
    LayerDims dims = layer_dims(config);
    if (params.layers.size() + 1 != dims.sizes.size())
        throw_config("mlp params layer count does not match config");
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        if (layer.in != dims.sizes[l] || layer.out != dims.sizes[l + 1] ||
            layer.weights.size() != static_cast<size_t>(layer.in) * layer.out ||
            layer.bias.size() != static_cast<size_t>(layer.out))
            throw_config("mlp params shape mismatch at layer " + std::to_string(l));
    }
}

struct ForwardTrace {
    std::vector<Vec> activations;      // input of each layer (post-dropout)
    std::vector<Vec> pre_activations;  // z of each layer
    std::vector<Vec> dropout_scale;    // per-unit keep scale (empty: no dropout)
    Vec output;
};

ForwardTrace forward_trace(const MlpParams& params, const MlpConfig& config, const Vec& x, int t,
                           RngStream* dropout_rng) {
    check_params(params, config);
    if (static_cast<int>(x.size()) != config.input_dim)
        throw_config("mlp input dimension mismatch");
    bool dropout = dropout_rng != nullptr && config.dropout_rate > 0.0;

    Vec input = x;
    Vec time_feats = mlp_time_features(t, config.total_timesteps, config.fourier_pairs);
    input.insert(input.end(), time_feats.begin(), time_feats.end());

    ForwardTrace trace;
    size_t L = params.layers.size();
    trace.activations.resize(L);
    trace.pre_activations.resize(L);
    trace.dropout_scale.resize(L);

    Vec a = std::move(input);
    for (size_t l = 0; l < L; ++l) {
        const auto& layer = params.layers[l];
        trace.activations[l] = a;
        Vec z(static_cast<size_t>(layer.out));
        for (int o = 0; o < layer.out; ++o) {
            double acc = layer.bias[static_cast<size_t>(o)];
            const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) acc += w[i] * a[static_cast<size_t>(i)];
            z[static_cast<size_t>(o)] = acc;
        }
        trace.pre_activations[l] = z;
        bool is_output = (l + 1 == L);
        if (is_output) {
            a = z;
        } else {
            Vec h(z.size());
            for (size_t i = 0; i < z.size(); ++i) h[i] = std::tanh(z[i]);
            if (dropout) {
                double keep = 1.0 - config.dropout_rate;
                Vec scale(h.size());
                for (size_t i = 0; i < h.size(); ++i) {
                    bool kept = dropout_rng->next_double() >= config.dropout_rate;
                    scale[i] = kept ? 1.0 / keep : 0.0;
                    h[i] *= scale[i];
                }
                trace.dropout_scale[l] = std::move(scale);
            }
            a = std::move(h);
        }
    }
    trace.output = a;
    return trace;
}

}  // namespace

Vec mlp_time_features(int t, int total_timesteps, int pairs) {
    double tau = static_cast<double>(t) / static_cast<double>(total_timesteps);
    Vec out;
    out.reserve(static_cast<size_t>(2 * pairs));
    double freq = kPi;
    for (int f = 0; f < pairs; ++f) {
        out.push_back(std::sin(freq * tau));
        out.push_back(std::cos(freq * tau));
        freq *= 2.0;
    }
    return out;
}

MlpParams init_mlp_params(const MlpConfig& config) {
    check_config(config);
    LayerDims dims = layer_dims(config);

    RngStream rng(config.seed, 2);  // init stream; 3 = shuffles, 4 = noising draws
    MlpParams params;
    params.layers.resize(dims.sizes.size() - 1);
    for (size_t l = 0; l + 1 < dims.sizes.size(); ++l) {
        auto& layer = params.layers[l];
        layer.in = dims.sizes[l];
        layer.out = dims.sizes[l + 1];
        layer.weights.resize(static_cast<size_t>(layer.in) * layer.out);
        layer.bias.assign(static_cast<size_t>(layer.out), 0.0);
        double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        for (double& w : layer.weights) w = bound * (2.0 * rng.next_double() - 1.0);
    }
    return params;
}

Vec mlp_forward(const MlpParams& params, const MlpConfig& config, const Vec& x, int t,
                RngStream* dropout_rng) {
    return forward_trace(params, config, x, t, dropout_rng).output;
}

double mlp_loss_and_grad(const MlpParams& params, const MlpConfig& config, const Vec& x, int t,
                         const Vec& target, MlpParams& grad, RngStream* dropout_rng) {
    if (target.size() != static_cast<size_t>(config.input_dim))
        throw_config("mlp target dimension mismatch");

    ForwardTrace trace = forward_trace(params, config, x, t, dropout_rng);
    size_t L = params.layers.size();

    double loss = 0.0;
    Vec delta(trace.output.size());  // dLoss/dz of the current layer
    for (size_t i = 0; i < trace.output.size(); ++i) {
        double diff = trace.output[i] - target[i];
        loss += diff * diff;
        delta[i] = 2.0 * diff;
    }

    for (size_t l = L; l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& glayer = grad.layers[l];
        const Vec& a = trace.activations[l];

        for (int o = 0; o < layer.out; ++o) {
            double d = delta[static_cast<size_t>(o)];
            glayer.bias[static_cast<size_t>(o)] += d;
            double* gw = glayer.weights.data() + static_cast<size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) gw[i] += d * a[static_cast<size_t>(i)];
        }

        if (l == 0) break;
        Vec prev_delta(static_cast<size_t>(layer.in), 0.0);
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[static_cast<size_t>(o)];
            const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) prev_delta[static_cast<size_t>(i)] += d * w[i];
        }
        // through dropout scale and tanh of the previous hidden layer
        const Vec& z_prev = trace.pre_activations[l - 1];
        const Vec& scale = trace.dropout_scale[l - 1];
        for (int i = 0; i < layer.in; ++i) {
            double s = scale.empty() ? 1.0 : scale[static_cast<size_t>(i)];
            double th = std::tanh(z_prev[static_cast<size_t>(i)]);
            prev_delta[static_cast<size_t>(i)] *= s * (1.0 - th * th);
        }
        delta = std::move(prev_delta);
    }
    return loss;
}

TrainResult train_dsm(const std::vector<Vec>& data, const NoiseSchedule& schedule,
                      const MlpConfig& config) {
    if (data.empty()) throw_config("training dataset must be nonempty");
    check_config(config);
    for (const Vec& p : data)
        if (static_cast<int>(p.size()) != config.input_dim)
            throw_config("training point dimension mismatch");
    if (config.batch_size < 1) throw_config("batch_size must be positive");
    if (config.epochs < 0) throw_config("epochs must be >= 0");
    if (config.total_timesteps != schedule.T)
        throw_config("mlp total_timesteps must equal schedule T");

    TrainResult result;
    result.params = init_mlp_params(config);
    if (config.epochs == 0) return result;

    RngStream shuffle_rng(config.seed, 3);
    RngStream noise_rng(config.seed, 4);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    MlpParams grad = result.params;
    auto zero_grad = [&grad] {
        for (auto& layer : grad.layers) {
            std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
            std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        }
    };

    bool dropout = config.dropout_rate > 0.0;
    Vec x_t(static_cast<size_t>(config.input_dim));
    Vec eps(static_cast<size_t>(config.input_dim));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            zero_grad();
            double batch_loss = 0.0;
            for (size_t idx = start; idx < end; ++idx) {
                const Vec& x0 = data[order[idx]];
                int t = static_cast<int>(noise_rng.uniform_index(
                            static_cast<uint64_t>(schedule.T))) + 1;
                double root_ab = std::sqrt(schedule.alpha_bar(t));
                double sigma = schedule.sigma(t);
                for (size_t d = 0; d < x0.size(); ++d) {
                    eps[d] = noise_rng.next_gaussian();
                    x_t[d] = root_ab * x0[d] + sigma * eps[d];
                }
                batch_loss += mlp_loss_and_grad(result.params, config, x_t, t, eps, grad,
                                                dropout ? &noise_rng : nullptr);
            }
            double count = static_cast<double>(end - start);
            batch_loss /= count;
            if (!std::isfinite(batch_loss))
                throw_numeric("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(batches));
            double step = config.learning_rate / count;
            for (size_t l = 0; l < result.params.layers.size(); ++l) {
                auto& layer = result.params.layers[l];
                const auto& glayer = grad.layers[l];
                for (size_t i = 0; i < layer.weights.size(); ++i)
                    layer.weights[i] -= step * glayer.weights[i];
                for (size_t i = 0; i < layer.bias.size(); ++i)
                    layer.bias[i] -= step * glayer.bias[i];
            }
            epoch_loss += batch_loss;
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

McDropoutResult mc_dropout_uncertainty(const MlpParams& params, const MlpConfig& config,
                                       const Vec& x, int t, int K, RngStream& rng) {
    if (K < 2) throw_config("mc-dropout needs K >= 2 passes");

    // one derived mask seed per pass, fixed before any evaluation
    std::vector<uint64_t> pass_seeds(static_cast<size_t>(K));
    for (auto& s : pass_seeds) s = rng.next_u64();

    ScoreStack stack;
    stack.rows = K;
    stack.cols = config.input_dim;
    stack.data.resize(static_cast<size_t>(K) * config.input_dim);
    for (int k = 0; k < K; ++k) {
        RngStream mask_rng(pass_seeds[static_cast<size_t>(k)], 0);
        Vec out = mlp_forward(params, config, x, t, &mask_rng);
        std::copy(out.begin(), out.end(), stack.row(k));
    }

    McDropoutResult result;
    result.mean.assign(static_cast<size_t>(config.input_dim), 0.0);
    for (int k = 0; k < K; ++k)
        for (int d = 0; d < config.input_dim; ++d)
            result.mean[static_cast<size_t>(d)] += stack.row(k)[d];
    for (double& m : result.mean) m /= static_cast<double>(K);
    result.variance = variance_of_stack(stack);
    return result;
}

void save_mlp(const std::filesystem::path& dir, const MlpParams& params, const MlpConfig& config) {
    check_params(params, config);
    std::filesystem::create_directories(dir);

    nlohmann::json header;
    header["input_dim"] = config.input_dim;
    header["hidden"] = config.hidden;
    header["fourier_pairs"] = config.fourier_pairs;
    header["total_timesteps"] = config.total_timesteps;
    header["dropout_rate"] = config.dropout_rate;
    header["layers"] = nlohmann::json::array();

    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        std::string wname = "layer" + std::to_string(l) + "_w.udt1";
        std::string bname = "layer" + std::to_string(l) + "_b.udt1";
        write_tensor(dir / wname,
                     Tensor{{static_cast<uint32_t>(layer.out), static_cast<uint32_t>(layer.in)},
                            layer.weights});
        write_tensor(dir / bname, Tensor{{static_cast<uint32_t>(layer.out)}, layer.bias});
        header["layers"].push_back({{"in", layer.in},
                                    {"out", layer.out},
                                    {"weights", wname},
                                    {"bias", bname}});
    }

    std::ofstream out(dir / "params.json", std::ios::trunc);
    if (!out) throw_io("cannot write " + (dir / "params.json").string());
    out << header.dump(2) << "\n";
}

std::pair<MlpParams, MlpConfig> load_mlp(const std::filesystem::path& dir) {
    std::ifstream in(dir / "params.json");
    if (!in) throw_io("cannot open " + (dir / "params.json").string());
    nlohmann::json header;
    try {
        in >> header;
    } catch (const nlohmann::json::exception& e) {
        throw_io("malformed params.json: " + std::string(e.what()));
    }

    MlpConfig config;
    try {
        config.input_dim = header.at("input_dim").get<int>();
        config.hidden = header.at("hidden").get<std::vector<int>>();
        config.fourier_pairs = header.at("fourier_pairs").get<int>();
        config.total_timesteps = header.at("total_timesteps").get<int>();
        config.dropout_rate = header.at("dropout_rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw_io("params.json missing fields: " + std::string(e.what()));
    }

    MlpParams params;
    for (const auto& entry : header.at("layers")) {
        MlpParams::Layer layer;
        layer.in = entry.at("in").get<int>();
        layer.out = entry.at("out").get<int>();
        Tensor w = read_tensor(dir / entry.at("weights").get<std::string>());
        Tensor b = read_tensor(dir / entry.at("bias").get<std::string>());
        if (w.shape != std::vector<uint32_t>{static_cast<uint32_t>(layer.out),
                                             static_cast<uint32_t>(layer.in)})
            throw_io("weight tensor shape mismatch in " + dir.string());
        if (b.shape != std::vector<uint32_t>{static_cast<uint32_t>(layer.out)})
            throw_io("bias tensor shape mismatch in " + dir.string());
        layer.weights = std::move(w.values);
        layer.bias = std::move(b.values);
        params.layers.push_back(std::move(layer));
    }
    check_params(params, config);
    return {std::move(params), std::move(config)};
}

}  // namespace scoreuq
