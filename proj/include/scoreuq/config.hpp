#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scoreuq/guidance.hpp"
#include "scoreuq/sampler.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"
#include "scoreuq/uncertainty.hpp"

namespace scoreuq {

/// Data specification document: either an axis-aligned mixture
/// ({"weights", "means", "variances"}) or a finite point set ({"points"}),
/// with an optional "shape": [height, width] for image rendering.
struct LoadedData {
    bool is_gmm = false;
    GmmDistribution gmm;
    std::vector<Vec> points;
    int width = 0;   // 0 when no shape given
    int height = 0;

    int dim() const { return is_gmm ? gmm.dim() : static_cast<int>(points[0].size()); }
};

LoadedData load_data_spec(const std::filesystem::path& path);

enum class PredictorKind { ExactGmm, ExactDataset, Mlp };

struct TrainSpec {
    int count = 1024;  // training draws when the data spec is a mixture
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-2;
    double dropout_rate = 0.0;
    std::vector<int> hidden = {64, 64};
    int fourier_pairs = 4;
};

struct SampleSpec {
    int count = 100;
    int dump_trajectories = 0;  // number of leading samples to dump
    int dump_maps = 0;
};

struct GuideSpec {
    int count = 100;
    bool compare_unguided = true;
    int dump_masks = 0;
    int calibration_samples = 256;  // pool size for calibrated thresholds
};

struct FilterEvalSpec {
    int repetitions = 10;
    int pool_size = 6000;
    int keep = 5000;
    int reference_count = 2000;
};

struct SparsifyEvalSpec {
    int images = 64;
    int curve_bins = 32;
    int random_shuffles = 10;
    int mc_dropout_k = 5;
    int noise_timestep = -1;  // -1: half of the noising process
};

struct VerifyIdentitySpec {
    std::vector<int> timesteps;
    long long draws = 100000;
    double max_z = 4.0;
};

struct ProfileSpec {
    int count = 200;
};

struct BenchSpec {
    int count = 50;
    std::vector<int> m_values = {5, 20};
};

/// One run = one JSON document with a "command" discriminator. Unknown keys
/// anywhere in the document are configuration errors.
struct RunConfig {
    std::string command;
    uint64_t seed = 0;
    int threads = 0;  // 0: resolve from environment / hardware

    int schedule_T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    std::filesystem::path data_path;
    PredictorKind predictor_kind = PredictorKind::ExactGmm;
    std::filesystem::path predictor_params;

    SamplerKind sampler_kind = SamplerKind::Ddim;
    int generation_steps = 50;
    bool ddpm_tilde_beta = false;

    UncertaintyConfig uncertainty;
    GuidanceConfig guidance;

    TrainSpec train;
    SampleSpec sample;
    GuideSpec guide;
    FilterEvalSpec filter_eval;
    SparsifyEvalSpec sparsify_eval;
    VerifyIdentitySpec verify_identity;
    ProfileSpec profile;
    BenchSpec bench;

    nlohmann::json canonical;  // the effective config (after seed override)
};

/// Parses and validates a run config; relative data/params paths resolve
/// against the config file's directory.
RunConfig parse_run_config(const std::filesystem::path& config_path,
                           std::optional<uint64_t> seed_override);

NoiseSchedule schedule_from_config(const RunConfig& config);

}  // namespace scoreuq
