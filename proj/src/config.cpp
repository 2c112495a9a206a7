#include "scoreuq/config.hpp"

#include <fstream>
#include <set>

#include "scoreuq/errors.hpp"

namespace scoreuq {

namespace {

using nlohmann::json;

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw_config(path.string() + ": invalid JSON: " + e.what());
    }
    return doc;
}

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw_config(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw_config("unknown key \"" + item.key() + "\" in " + where);
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw_config("invalid value for \"" + key + "\" in " + where);
    }
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw_config("missing required key \"" + key + "\" in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw_config("invalid value for \"" + key + "\" in " + where);
    }
}

FractionalWindow get_window(const json& obj, const std::string& key, const std::string& where,
                            FractionalWindow fallback) {
    if (!obj.contains(key)) return fallback;
    std::vector<double> v = get_required<std::vector<double>>(obj, key, where);
    if (v.size() != 2 || !(v[0] >= 0.0 && v[0] < v[1] && v[1] <= 1.0))
        throw_config("\"" + key + "\" in " + where +
                     " must be [lo, hi] with 0 <= lo < hi <= 1");
    return FractionalWindow{v[0], v[1]};
}

}  // namespace

LoadedData load_data_spec(const std::filesystem::path& path) {
    json doc = load_json_file(path);
    std::string where = path.filename().string();

    LoadedData data;
    if (doc.contains("points")) {
        check_keys(doc, where, {"points", "shape"});
        data.points = get_required<std::vector<Vec>>(doc, "points", where);
        if (data.points.empty()) throw_config(where + ": points must be nonempty");
        size_t dim = data.points[0].size();
        for (const Vec& p : data.points)
            if (p.size() != dim || dim == 0)
                throw_config(where + ": points must share a positive dimension");
    } else {
        check_keys(doc, where, {"weights", "means", "variances", "shape"});
        data.is_gmm = true;
        data.gmm = make_gmm(get_required<std::vector<double>>(doc, "weights", where),
                            get_required<std::vector<Vec>>(doc, "means", where),
                            get_required<std::vector<Vec>>(doc, "variances", where));
    }

    if (doc.contains("shape")) {
        std::vector<int> shape = get_required<std::vector<int>>(doc, "shape", where);
        if (shape.size() != 2 || shape[0] < 1 || shape[1] < 1)
            throw_config(where + ": shape must be [height, width]");
        data.height = shape[0];
        data.width = shape[1];
        int dim = data.is_gmm ? data.gmm.dim() : static_cast<int>(data.points[0].size());
        if (data.height * data.width != dim)
            throw_config(where + ": shape does not match the data dimension");
    }
    return data;
}

RunConfig parse_run_config(const std::filesystem::path& config_path,
                           std::optional<uint64_t> seed_override) {
    json doc = load_json_file(config_path);
    const std::string where = "run config";

    static const std::set<std::string> kCommands = {
        "train",       "sample",  "guide",   "filter-eval",
        "sparsify-eval", "verify-identity", "profile", "bench"};

    RunConfig config;
    config.command = get_required<std::string>(doc, "command", where);
    if (!kCommands.count(config.command))
        throw_config("unknown command \"" + config.command + "\"");

    std::set<std::string> allowed = {"command", "seed", "threads", "schedule", "data",
                                     "predictor", "sampler", "uncertainty"};
    std::string block_key = config.command;
    if (block_key == "filter-eval") block_key = "filter_eval";
    if (block_key == "sparsify-eval") block_key = "sparsify_eval";
    if (block_key == "verify-identity") block_key = "verify_identity";
    allowed.insert(block_key);
    if (config.command == "guide") allowed.insert("guidance");
    check_keys(doc, where, allowed);

    if (seed_override) {
        config.seed = *seed_override;
        doc["seed"] = *seed_override;
    } else {
        config.seed = get_or<uint64_t>(doc, "seed", where, 0);
    }
    config.threads = get_or<int>(doc, "threads", where, 0);

    if (doc.contains("schedule")) {
        const json& s = doc.at("schedule");
        check_keys(s, "schedule", {"T", "beta_start", "beta_end"});
        config.schedule_T = get_or<int>(s, "T", "schedule", config.schedule_T);
        config.beta_start = get_or<double>(s, "beta_start", "schedule", config.beta_start);
        config.beta_end = get_or<double>(s, "beta_end", "schedule", config.beta_end);
    }

    config.data_path = get_required<std::string>(doc, "data", where);
    if (config.data_path.is_relative())
        config.data_path = config_path.parent_path() / config.data_path;

    if (doc.contains("predictor")) {
        const json& p = doc.at("predictor");
        check_keys(p, "predictor", {"type", "params"});
        std::string type = get_required<std::string>(p, "type", "predictor");
        if (type == "exact_gmm") {
            config.predictor_kind = PredictorKind::ExactGmm;
        } else if (type == "exact_dataset") {
            config.predictor_kind = PredictorKind::ExactDataset;
        } else if (type == "mlp") {
            config.predictor_kind = PredictorKind::Mlp;
            config.predictor_params = get_required<std::string>(p, "params", "predictor");
            if (config.predictor_params.is_relative())
                config.predictor_params = config_path.parent_path() / config.predictor_params;
        } else {
            throw_config("unknown predictor type \"" + type + "\"");
        }
    } else if (config.command != "train") {
        throw_config("missing required key \"predictor\" in run config");
    }

    if (doc.contains("sampler")) {
        const json& s = doc.at("sampler");
        check_keys(s, "sampler", {"kind", "steps", "tilde_beta"});
        std::string kind = get_or<std::string>(s, "kind", "sampler", "ddim");
        if (kind == "ddim") {
            config.sampler_kind = SamplerKind::Ddim;
        } else if (kind == "ddpm") {
            config.sampler_kind = SamplerKind::Ddpm;
        } else {
            throw_config("sampler kind must be \"ddim\" or \"ddpm\"");
        }
        config.generation_steps = get_or<int>(s, "steps", "sampler", config.generation_steps);
        config.ddpm_tilde_beta = get_or<bool>(s, "tilde_beta", "sampler", false);
    }

    if (doc.contains("uncertainty")) {
        const json& u = doc.at("uncertainty");
        check_keys(u, "uncertainty", {"samples", "window", "scheme", "gaussian_sigma"});
        config.uncertainty.mc_samples =
            get_or<int>(u, "samples", "uncertainty", config.uncertainty.mc_samples);
        config.uncertainty.window =
            get_window(u, "window", "uncertainty", config.uncertainty.window);
        std::string scheme = get_or<std::string>(u, "scheme", "uncertainty", "diffusion");
        if (scheme == "diffusion") {
            config.uncertainty.scheme = PerturbationScheme::Diffusion;
        } else if (scheme == "gaussian") {
            config.uncertainty.scheme = PerturbationScheme::Gaussian;
        } else {
            throw_config("uncertainty scheme must be \"diffusion\" or \"gaussian\"");
        }
        config.uncertainty.gaussian_sigma =
            get_or<double>(u, "gaussian_sigma", "uncertainty", 0.1);
        if (config.uncertainty.scheme == PerturbationScheme::Gaussian &&
            !(config.uncertainty.gaussian_sigma > 0.0))
            throw_config("gaussian perturbation needs gaussian_sigma > 0");
    }

    if (config.command == "guide") {
        config.guidance.mc_samples = config.uncertainty.mc_samples;
        if (doc.contains("guidance")) {
            const json& g = doc.at("guidance");
            check_keys(g, "guidance",
                       {"percentile", "strength", "threshold_mode", "grad_estimator", "h_rel",
                        "spsa_iterations", "window"});
            config.guidance.percentile =
                get_or<double>(g, "percentile", "guidance", config.guidance.percentile);
            if (!(config.guidance.percentile >= 0.0 && config.guidance.percentile <= 100.0))
                throw_config("guidance percentile must lie in [0, 100]");
            config.guidance.strength =
                get_or<double>(g, "strength", "guidance", config.guidance.strength);
            std::string mode =
                get_or<std::string>(g, "threshold_mode", "guidance", "per_step_percentile");
            if (mode == "per_step_percentile") {
                config.guidance.threshold_mode = ThresholdMode::PerStepPercentile;
            } else if (mode == "calibrated") {
                config.guidance.threshold_mode = ThresholdMode::Calibrated;
            } else {
                throw_config("guidance threshold_mode must be \"per_step_percentile\" or "
                             "\"calibrated\"");
            }
            std::string grad = get_or<std::string>(g, "grad_estimator", "guidance", "central_fd");
            if (grad == "central_fd") {
                config.guidance.grad_estimator = GradEstimator::CentralFd;
            } else if (grad == "spsa") {
                config.guidance.grad_estimator = GradEstimator::Spsa;
            } else {
                throw_config("guidance grad_estimator must be \"central_fd\" or \"spsa\"");
            }
            config.guidance.h_rel = get_or<double>(g, "h_rel", "guidance", 1e-4);
            if (!(config.guidance.h_rel > 0.0)) throw_config("guidance h_rel must be > 0");
            config.guidance.spsa_iterations = get_or<int>(g, "spsa_iterations", "guidance", 4);
            config.guidance.guided_window =
                get_window(g, "window", "guidance", config.guidance.guided_window);
        }
    }

    auto block = [&doc](const char* key) -> const json* {
        return doc.contains(key) ? &doc.at(key) : nullptr;
    };

    if (const json* b = block("train")) {
        check_keys(*b, "train",
                   {"count", "epochs", "batch_size", "learning_rate", "dropout_rate", "hidden",
                    "fourier_pairs"});
        config.train.count = get_or<int>(*b, "count", "train", config.train.count);
        config.train.epochs = get_or<int>(*b, "epochs", "train", config.train.epochs);
        config.train.batch_size = get_or<int>(*b, "batch_size", "train", config.train.batch_size);
        config.train.learning_rate =
            get_or<double>(*b, "learning_rate", "train", config.train.learning_rate);
        config.train.dropout_rate =
            get_or<double>(*b, "dropout_rate", "train", config.train.dropout_rate);
        config.train.hidden = get_or<std::vector<int>>(*b, "hidden", "train", config.train.hidden);
        config.train.fourier_pairs =
            get_or<int>(*b, "fourier_pairs", "train", config.train.fourier_pairs);
    }
    if (const json* b = block("sample")) {
        check_keys(*b, "sample", {"count", "dump_trajectories", "dump_maps"});
        config.sample.count = get_or<int>(*b, "count", "sample", config.sample.count);
        config.sample.dump_trajectories =
            get_or<int>(*b, "dump_trajectories", "sample", 0);
        config.sample.dump_maps = get_or<int>(*b, "dump_maps", "sample", 0);
    }
    if (const json* b = block("guide")) {
        check_keys(*b, "guide",
                   {"count", "compare_unguided", "dump_masks", "calibration_samples"});
        config.guide.count = get_or<int>(*b, "count", "guide", config.guide.count);
        config.guide.compare_unguided = get_or<bool>(*b, "compare_unguided", "guide", true);
        config.guide.dump_masks = get_or<int>(*b, "dump_masks", "guide", 0);
        config.guide.calibration_samples =
            get_or<int>(*b, "calibration_samples", "guide", config.guide.calibration_samples);
    }
    if (const json* b = block("filter_eval")) {
        check_keys(*b, "filter_eval", {"repetitions", "pool_size", "keep", "reference_count"});
        config.filter_eval.repetitions =
            get_or<int>(*b, "repetitions", "filter_eval", config.filter_eval.repetitions);
        config.filter_eval.pool_size =
            get_or<int>(*b, "pool_size", "filter_eval", config.filter_eval.pool_size);
        config.filter_eval.keep = get_or<int>(*b, "keep", "filter_eval", config.filter_eval.keep);
        config.filter_eval.reference_count = get_or<int>(*b, "reference_count", "filter_eval",
                                                         config.filter_eval.reference_count);
    }
    if (const json* b = block("sparsify_eval")) {
        check_keys(*b, "sparsify_eval",
                   {"images", "curve_bins", "random_shuffles", "mc_dropout_k", "noise_timestep"});
        config.sparsify_eval.images =
            get_or<int>(*b, "images", "sparsify_eval", config.sparsify_eval.images);
        config.sparsify_eval.curve_bins =
            get_or<int>(*b, "curve_bins", "sparsify_eval", config.sparsify_eval.curve_bins);
        config.sparsify_eval.random_shuffles = get_or<int>(*b, "random_shuffles", "sparsify_eval",
                                                           config.sparsify_eval.random_shuffles);
        config.sparsify_eval.mc_dropout_k =
            get_or<int>(*b, "mc_dropout_k", "sparsify_eval", config.sparsify_eval.mc_dropout_k);
        config.sparsify_eval.noise_timestep =
            get_or<int>(*b, "noise_timestep", "sparsify_eval", -1);
    }
    if (const json* b = block("verify_identity")) {
        check_keys(*b, "verify_identity", {"timesteps", "draws", "max_z"});
        config.verify_identity.timesteps =
            get_required<std::vector<int>>(*b, "timesteps", "verify_identity");
        config.verify_identity.draws =
            get_or<long long>(*b, "draws", "verify_identity", config.verify_identity.draws);
        config.verify_identity.max_z =
            get_or<double>(*b, "max_z", "verify_identity", config.verify_identity.max_z);
    }
    if (config.command == "verify-identity" && config.verify_identity.timesteps.empty())
        throw_config("verify-identity requires a nonempty \"timesteps\" list");
    if (const json* b = block("profile")) {
        check_keys(*b, "profile", {"count"});
        config.profile.count = get_or<int>(*b, "count", "profile", config.profile.count);
    }
    if (const json* b = block("bench")) {
        check_keys(*b, "bench", {"count", "m_values"});
        config.bench.count = get_or<int>(*b, "count", "bench", config.bench.count);
        config.bench.m_values =
            get_or<std::vector<int>>(*b, "m_values", "bench", config.bench.m_values);
    }

    config.canonical = doc;
    return config;
}

NoiseSchedule schedule_from_config(const RunConfig& config) {
    return build_linear_schedule(config.schedule_T, config.beta_start, config.beta_end);
}

}  // namespace scoreuq
