#include "scoreuq/commands.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scoreuq/config.hpp"
#include "scoreuq/errors.hpp"
#include "scoreuq/experiments.hpp"
#include "scoreuq/io.hpp"
#include "scoreuq/metrics.hpp"
#include "scoreuq/mlp.hpp"
#include "scoreuq/parallel.hpp"

namespace scoreuq {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Collects every file a command writes, for the manifest's hash list.
class OutputTracker {
public:
    explicit OutputTracker(fs::path root) : root_(std::move(root)) {}

    fs::path file(const std::string& relative) {
        fs::path p = root_ / relative;
        fs::create_directories(p.parent_path());
        files_.push_back(relative);
        return p;
    }

    void write_json(const std::string& relative, const json& doc) {
        std::ofstream out(file(relative), std::ios::trunc);
        if (!out) throw_io("cannot write " + relative);
        out << doc.dump(2) << "\n";
    }

    /// Registers files written by a helper that manages its own paths.
    void adopt_directory(const std::string& relative_dir) {
        std::vector<std::string> found;
        for (const auto& entry : fs::recursive_directory_iterator(root_ / relative_dir))
            if (entry.is_regular_file())
                found.push_back(fs::relative(entry.path(), root_).string());
        std::sort(found.begin(), found.end());
        files_.insert(files_.end(), found.begin(), found.end());
    }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::vector<std::string> files_;
};

struct PredictorBundle {
    std::unique_ptr<NoisePredictor> predictor;
    // populated only for MLP predictors (the dropout baseline needs them)
    std::optional<MlpParams> mlp_params;
    std::optional<MlpConfig> mlp_config;
};

PredictorBundle build_predictor(const RunConfig& config, const LoadedData& data,
                                const NoiseSchedule& schedule) {
    PredictorBundle bundle;
    switch (config.predictor_kind) {
        case PredictorKind::ExactGmm:
            if (!data.is_gmm)
                throw_config("predictor type exact_gmm requires a mixture data spec");
            bundle.predictor = std::make_unique<GmmExactPredictor>(data.gmm, schedule);
            break;
        case PredictorKind::ExactDataset:
            if (data.is_gmm)
                throw_config("predictor type exact_dataset requires a point-set data spec");
            bundle.predictor = std::make_unique<DatasetExactPredictor>(data.points, schedule);
            break;
        case PredictorKind::Mlp: {
            auto [params, mlp_config] = load_mlp(config.predictor_params);
            if (mlp_config.input_dim != data.dim())
                throw_config("mlp parameter dimension does not match the data spec");
            if (mlp_config.total_timesteps != schedule.T)
                throw_config("mlp was trained for T=" +
                             std::to_string(mlp_config.total_timesteps) +
                             " but the schedule has T=" + std::to_string(schedule.T));
            bundle.mlp_params = params;
            bundle.mlp_config = mlp_config;
            bundle.predictor = std::make_unique<MlpPredictor>(std::move(params),
                                                              std::move(mlp_config));
            break;
        }
    }
    return bundle;
}

std::vector<Vec> training_or_reference_points(const RunConfig& config, const LoadedData& data,
                                              int count) {
    if (!data.is_gmm) return data.points;
    RngStream rng(config.seed, stream_index::kData);
    std::vector<Vec> points(static_cast<size_t>(count));
    for (auto& p : points) p = gmm_sample(data.gmm, rng);
    return points;
}

void write_sample_matrix(OutputTracker& out, const std::string& name,
                         const std::vector<SampleRecord>& records, int dim) {
    Tensor t;
    t.shape = {static_cast<uint32_t>(records.size()), static_cast<uint32_t>(dim)};
    t.values.reserve(records.size() * static_cast<size_t>(dim));
    for (const auto& rec : records)
        t.values.insert(t.values.end(), rec.sample.begin(), rec.sample.end());
    write_tensor(out.file(name), t);
}

void write_uncertainty_csv(OutputTracker& out, const std::vector<SampleRecord>& records) {
    CsvWriter csv(out.file("uncertainty.csv"), {"sample", "aggregated_uncertainty", "nfe"});
    for (size_t i = 0; i < records.size(); ++i)
        csv.row({CsvWriter::field(i), CsvWriter::field(records[i].aggregated),
                 CsvWriter::field(records[i].nfe)});
}

void dump_trajectories(OutputTracker& out, const std::vector<SampleRecord>& records, int count,
                       int dim) {
    for (int j = 0; j < count && j < static_cast<int>(records.size()); ++j) {
        const Trajectory& traj = records[static_cast<size_t>(j)].trajectory;
        std::string dir = "trajectory_" + std::to_string(j);
        CsvWriter index(out.file(dir + "/index.csv"), {"step", "timestep", "file"});
        for (size_t k = 0; k < traj.states.size(); ++k) {
            std::string name = "step_" + std::to_string(k) + ".udt1";
            write_tensor(out.file(dir + "/" + name),
                         Tensor{{static_cast<uint32_t>(dim)}, traj.states[k].second});
            index.row({CsvWriter::field(k), CsvWriter::field(traj.states[k].first), name});
        }
    }
}

void dump_uncertainty_maps(OutputTracker& out, const std::vector<SampleRecord>& records,
                           int count, const LoadedData& data) {
    for (int j = 0; j < count && j < static_cast<int>(records.size()); ++j) {
        for (const UncertaintyMap& map : records[static_cast<size_t>(j)].maps) {
            std::string base =
                "maps/sample_" + std::to_string(j) + "_t_" + std::to_string(map.t);
            write_tensor(out.file(base + ".udt1"),
                         Tensor{{static_cast<uint32_t>(map.values.size())}, map.values});
            if (data.width > 0)
                write_pgm(out.file(base + ".pgm"), data.width, data.height, map.values);
        }
    }
}

std::vector<Vec> collect(const std::vector<SampleRecord>& records) {
    std::vector<Vec> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(rec.sample);
    return out;
}

PoolOptions pool_options_from(const RunConfig& config, int threads) {
    PoolOptions pool;
    pool.kind = config.sampler_kind;
    pool.generation_steps = config.generation_steps;
    pool.ddpm_tilde_beta = config.ddpm_tilde_beta;
    pool.uncertainty = config.uncertainty;
    pool.threads = threads;
    return pool;
}

// ---------------------------------------------------------------------------
// command runners
// ---------------------------------------------------------------------------

void run_train(const RunConfig& config, const LoadedData& data, const NoiseSchedule& schedule,
               OutputTracker& out) {
    std::vector<Vec> points = training_or_reference_points(config, data, config.train.count);

    MlpConfig mlp_config;
    mlp_config.input_dim = data.dim();
    mlp_config.hidden = config.train.hidden;
    mlp_config.fourier_pairs = config.train.fourier_pairs;
    mlp_config.total_timesteps = schedule.T;
    mlp_config.dropout_rate = config.train.dropout_rate;
    mlp_config.learning_rate = config.train.learning_rate;
    mlp_config.batch_size = config.train.batch_size;
    mlp_config.epochs = config.train.epochs;
    mlp_config.seed = config.seed;

    TrainResult result = train_dsm(points, schedule, mlp_config);
    save_mlp(out.root() / "model", result.params, mlp_config);
    out.adopt_directory("model");

    CsvWriter csv(out.file("loss_curve.csv"), {"epoch", "loss"});
    for (size_t e = 0; e < result.loss_curve.size(); ++e)
        csv.row({CsvWriter::field(e), CsvWriter::field(result.loss_curve[e])});
}

void run_sample(const RunConfig& config, const LoadedData& data, const NoiseSchedule& schedule,
                const NoisePredictor& predictor, OutputTracker& out, int threads) {
    PoolOptions pool = pool_options_from(config, threads);
    pool.count = config.sample.count;
    pool.keep_maps = config.sample.dump_maps > 0;
    pool.record_trajectories = config.sample.dump_trajectories > 0;

    PoolResult result = sample_pool(predictor, schedule, pool, config.seed);
    write_sample_matrix(out, "samples.udt1", result.records, data.dim());
    write_uncertainty_csv(out, result.records);
    dump_trajectories(out, result.records, config.sample.dump_trajectories, data.dim());
    dump_uncertainty_maps(out, result.records, config.sample.dump_maps, data);
}

void run_guide(const RunConfig& config, const LoadedData& data, const NoiseSchedule& schedule,
               const NoisePredictor& predictor, OutputTracker& out, int threads) {
    PoolOptions pool = pool_options_from(config, threads);
    pool.count = config.guide.count;
    pool.keep_maps = config.guide.dump_masks > 0;

    GuidanceConfig guidance = config.guidance;
    if (guidance.threshold_mode == ThresholdMode::Calibrated) {
        // pool-calibrated thresholds: estimate uncertainty at every step of an
        // unguided pool, then take the per-step percentile
        PoolOptions calibration = pool;
        calibration.count = config.guide.calibration_samples;
        calibration.estimate_uncertainty = false;
        calibration.profile_all_steps = true;
        calibration.keep_maps = true;
        calibration.record_trajectories = false;
        PoolResult reference_pool =
            sample_pool(predictor, schedule, calibration, repetition_seed(config.seed, 999));
        guidance.calibrated_thresholds = calibrate_thresholds(
            reference_pool.records, reference_pool.plan, guidance.percentile);
    }

    PoolResult guided = guided_pool(predictor, schedule, pool, guidance, config.seed);
    write_sample_matrix(out, "guided_samples.udt1", guided.records, data.dim());
    write_uncertainty_csv(out, guided.records);

    if (config.guide.compare_unguided) {
        PoolResult unguided = sample_pool(predictor, schedule, pool, config.seed);
        write_sample_matrix(out, "unguided_samples.udt1", unguided.records, data.dim());

        std::vector<Vec> reference =
            training_or_reference_points(config, data, config.guide.count);
        double ed_guided = energy_distance(collect(guided.records), reference, threads);
        double ed_unguided = energy_distance(collect(unguided.records), reference, threads);
        double nfe_guided = 0.0, nfe_unguided = 0.0;
        for (const auto& r : guided.records) nfe_guided += static_cast<double>(r.nfe);
        for (const auto& r : unguided.records) nfe_unguided += static_cast<double>(r.nfe);

        CsvWriter csv(out.file("comparison.csv"),
                      {"ed_guided", "ed_unguided", "mean_nfe_guided", "mean_nfe_unguided"});
        csv.row({CsvWriter::field(ed_guided), CsvWriter::field(ed_unguided),
                 CsvWriter::field(nfe_guided / static_cast<double>(guided.records.size())),
                 CsvWriter::field(nfe_unguided / static_cast<double>(unguided.records.size()))});
    }

    if (config.guide.dump_masks > 0 && data.width > 0) {
        for (int j = 0; j < config.guide.dump_masks &&
                        j < static_cast<int>(guided.records.size());
             ++j) {
            for (const UncertaintyMap& map : guided.records[static_cast<size_t>(j)].maps) {
                std::vector<uint8_t> mask = percentile_mask(map, guidance.percentile);
                Vec values(mask.begin(), mask.end());
                write_pgm(out.file("masks/sample_" + std::to_string(j) + "_t_" +
                                   std::to_string(map.t) + ".pgm"),
                          data.width, data.height, values);
            }
        }
    }
}

void run_filter_eval(const RunConfig& config, const LoadedData& data,
                     const NoiseSchedule& schedule, const NoisePredictor& predictor,
                     OutputTracker& out, int threads) {
    if (!data.is_gmm) throw_config("filter-eval needs a mixture data spec for reference draws");

    FilterEvalOptions options;
    options.repetitions = config.filter_eval.repetitions;
    options.pool_size = config.filter_eval.pool_size;
    options.keep = config.filter_eval.keep;
    options.reference_count = config.filter_eval.reference_count;
    options.pool = pool_options_from(config, threads);

    FilterEvalResult result = run_filter_benchmark(predictor, schedule, data.gmm, options,
                                                   config.seed);

    CsvWriter csv(out.file("filter_eval.csv"), {"seed", "ed_kept", "ed_random", "improved"});
    for (const auto& row : result.rows)
        csv.row({CsvWriter::field(std::to_string(row.seed)), CsvWriter::field(row.ed_kept),
                 CsvWriter::field(row.ed_random),
                 CsvWriter::field(row.ed_kept < row.ed_random ? 1 : 0)});

    json summary;
    summary["repetitions"] = options.repetitions;
    summary["wins"] = result.wins;
    out.write_json("summary.json", summary);
}

void run_sparsify_eval(const RunConfig& config, const LoadedData& data,
                       const NoiseSchedule& schedule, const PredictorBundle& bundle,
                       OutputTracker& out, int threads) {
    if (!bundle.mlp_params)
        throw_config("sparsify-eval requires an mlp predictor (the dropout baseline needs one)");
    if (bundle.mlp_config->dropout_rate <= 0.0)
        throw_config("sparsify-eval baseline needs a model trained with dropout > 0");

    std::vector<Vec> test_set =
        training_or_reference_points(config, data, config.sparsify_eval.images);
    if (static_cast<int>(test_set.size()) > config.sparsify_eval.images)
        test_set.resize(static_cast<size_t>(config.sparsify_eval.images));

    ReconstructionOptions options;
    options.generation_steps = config.generation_steps;
    options.window = config.uncertainty.window;
    options.curve_bins = config.sparsify_eval.curve_bins;
    options.random_shuffles = config.sparsify_eval.random_shuffles;
    options.noise_timestep = config.sparsify_eval.noise_timestep;

    ReconstructionResult ours = reconstruction_eval(
        *bundle.predictor, schedule, test_set, options,
        make_score_variance_source(schedule, config.uncertainty.mc_samples), config.seed,
        threads);
    ReconstructionResult dropout = reconstruction_eval(
        *bundle.predictor, schedule, test_set, options,
        make_mc_dropout_source(*bundle.mlp_params, *bundle.mlp_config,
                               config.sparsify_eval.mc_dropout_k),
        repetition_seed(config.seed, 1), threads);

    CsvWriter csv(out.file("sparsify_eval.csv"),
                  {"image", "rmse", "ause_ours", "aurg_ours", "ause_mc_dropout",
                   "aurg_mc_dropout"});
    for (size_t i = 0; i < ours.images.size(); ++i)
        csv.row({CsvWriter::field(i), CsvWriter::field(ours.images[i].rmse),
                 CsvWriter::field(ours.images[i].metrics.ause),
                 CsvWriter::field(ours.images[i].metrics.aurg),
                 CsvWriter::field(dropout.images[i].metrics.ause),
                 CsvWriter::field(dropout.images[i].metrics.aurg)});

    json summary;
    summary["mean_rmse"] = ours.mean_rmse;
    summary["mean_ause_ours"] = ours.mean_ause;
    summary["mean_aurg_ours"] = ours.mean_aurg;
    summary["mean_ause_mc_dropout"] = dropout.mean_ause;
    summary["mean_aurg_mc_dropout"] = dropout.mean_aurg;
    out.write_json("summary.json", summary);
}

void run_verify_identity(const RunConfig& config, const LoadedData& data,
                         const NoiseSchedule& schedule, OutputTracker& out) {
    if (!data.is_gmm) throw_config("verify-identity needs a mixture data spec");

    std::vector<IdentityReport> reports;
    for (size_t i = 0; i < config.verify_identity.timesteps.size(); ++i) {
        RngStream rng(config.seed, 100 + i);
        reports.push_back(fisher_identity_check(data.gmm, schedule,
                                                config.verify_identity.timesteps[i],
                                                config.verify_identity.draws, rng));
    }

    CsvWriter csv(out.file("identity.csv"),
                  {"t", "axis", "lhs", "rhs", "se_lhs", "se_rhs", "z"});
    json doc = json::array();
    for (const auto& r : reports) {
        for (size_t d = 0; d < r.lhs.size(); ++d)
            csv.row({CsvWriter::field(r.t), CsvWriter::field(d), CsvWriter::field(r.lhs[d]),
                     CsvWriter::field(r.rhs[d]), CsvWriter::field(r.se_lhs[d]),
                     CsvWriter::field(r.se_rhs[d]), CsvWriter::field(r.z[d])});
        json entry;
        entry["t"] = r.t;
        entry["samples"] = r.samples;
        entry["lhs"] = r.lhs;
        entry["rhs"] = r.rhs;
        entry["se_lhs"] = r.se_lhs;
        entry["se_rhs"] = r.se_rhs;
        entry["z"] = r.z;
        entry["max_z"] = r.max_z;
        doc.push_back(entry);
    }
    out.write_json("identity.json", doc);

    for (const auto& r : reports)
        if (r.max_z > config.verify_identity.max_z)
            throw_numeric("identity check failed at t=" + std::to_string(r.t) + ": max z " +
                          format_double(r.max_z) + " exceeds " +
                          format_double(config.verify_identity.max_z));
}

void run_profile_command(const RunConfig& config, const NoiseSchedule& schedule,
                         const NoisePredictor& predictor, OutputTracker& out, int threads) {
    PoolOptions pool = pool_options_from(config, threads);
    pool.count = config.profile.count;

    ProfileRunResult result = run_profile(predictor, schedule, pool, config.seed);

    CsvWriter csv(out.file("profile.csv"),
                  {"step_index", "timestep", "mean_total_uncertainty",
                   "std_total_uncertainty"});
    for (int i = 0; i < result.plan.count(); ++i)
        csv.row({CsvWriter::field(i),
                 CsvWriter::field(result.plan.steps[static_cast<size_t>(i)]),
                 CsvWriter::field(result.stats.mean[static_cast<size_t>(i)]),
                 CsvWriter::field(result.stats.stddev[static_cast<size_t>(i)])});

    json summary;
    summary["argmax_std_step"] = result.argmax_std;
    summary["argmax_std_fraction"] =
        static_cast<double>(result.argmax_std) / static_cast<double>(result.plan.count());
    out.write_json("summary.json", summary);
}

void run_bench(const RunConfig& config, const NoiseSchedule& schedule,
               const NoisePredictor& predictor, OutputTracker& out, int threads) {
    CsvWriter csv(out.file("bench.csv"),
                  {"mode", "mc_samples", "count", "steps", "wall_seconds", "total_nfe"});

    auto timed_pool = [&](PoolOptions pool) {
        auto start = std::chrono::steady_clock::now();
        PoolResult result = sample_pool(predictor, schedule, pool, config.seed);
        auto stop = std::chrono::steady_clock::now();
        long long nfe = 0;
        for (const auto& r : result.records) nfe += r.nfe;
        return std::pair<double, long long>(
            std::chrono::duration<double>(stop - start).count(), nfe);
    };

    PoolOptions base = pool_options_from(config, threads);
    base.count = config.bench.count;
    base.estimate_uncertainty = false;
    auto [plain_secs, plain_nfe] = timed_pool(base);
    csv.row({"none", CsvWriter::field(0), CsvWriter::field(config.bench.count),
             CsvWriter::field(config.generation_steps), CsvWriter::field(plain_secs),
             CsvWriter::field(plain_nfe)});

    for (int m : config.bench.m_values) {
        PoolOptions with = pool_options_from(config, threads);
        with.count = config.bench.count;
        with.estimate_uncertainty = true;
        with.uncertainty.mc_samples = m;
        auto [secs, nfe] = timed_pool(with);
        csv.row({"window", CsvWriter::field(m), CsvWriter::field(config.bench.count),
                 CsvWriter::field(config.generation_steps), CsvWriter::field(secs),
                 CsvWriter::field(nfe)});
    }
}

}  // namespace

void execute(const ExecuteOptions& options) {
    RunConfig config = parse_run_config(options.config_path, options.seed_override);
    int threads = resolve_thread_count(options.threads > 0 ? options.threads : config.threads);

    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw_io("cannot create output directory " + options.out_dir.string());

    std::string started = iso8601_utc_now();
    OutputTracker out(options.out_dir);

    LoadedData data = load_data_spec(config.data_path);
    NoiseSchedule schedule = schedule_from_config(config);

    if (config.command == "train") {
        run_train(config, data, schedule, out);
    } else {
        PredictorBundle bundle = build_predictor(config, data, schedule);
        if (config.command == "sample") {
            run_sample(config, data, schedule, *bundle.predictor, out, threads);
        } else if (config.command == "guide") {
            run_guide(config, data, schedule, *bundle.predictor, out, threads);
        } else if (config.command == "filter-eval") {
            run_filter_eval(config, data, schedule, *bundle.predictor, out, threads);
        } else if (config.command == "sparsify-eval") {
            run_sparsify_eval(config, data, schedule, bundle, out, threads);
        } else if (config.command == "verify-identity") {
            run_verify_identity(config, data, schedule, out);
        } else if (config.command == "profile") {
            run_profile_command(config, schedule, *bundle.predictor, out, threads);
        } else if (config.command == "bench") {
            run_bench(config, schedule, *bundle.predictor, out, threads);
        }
    }

    // manifest goes last so a present manifest certifies a complete run
    json manifest;
    manifest["command"] = config.command;
    manifest["root_seed"] = config.seed;
    manifest["config"] = config.canonical;
    manifest["config_digest"] = sha256_hex(config.canonical.dump());
    manifest["started"] = started;
    manifest["finished"] = iso8601_utc_now();
    manifest["outputs"] = json::array();
    std::vector<std::string> files = out.files();
    std::sort(files.begin(), files.end());
    for (const std::string& rel : files) {
        fs::path p = options.out_dir / rel;
        json entry;
        entry["path"] = rel;
        entry["sha256"] = sha256_hex_file(p);
        entry["bytes"] = static_cast<uint64_t>(fs::file_size(p));
        manifest["outputs"].push_back(entry);
    }
    std::ofstream mout(options.out_dir / "manifest.json", std::ios::trunc);
    if (!mout) throw_io("cannot write manifest.json");
    mout << manifest.dump(2) << "\n";
}

}  // namespace scoreuq
