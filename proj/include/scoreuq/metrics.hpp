#pragma once

#include <functional>
#include <vector>

#include "scoreuq/mlp.hpp"
#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"
#include "scoreuq/uncertainty.hpp"

namespace scoreuq {

/// Retained-RMSE at fractions 0, 1/B, ..., (B-1)/B of components removed in
/// decreasing-uncertainty order.
struct SparsificationCurve {
    Vec fractions;
    Vec errors;
};

/// At fraction f, the ceil(f*n) highest-uncertainty components are dropped
/// (ties broken by ascending component index) and the RMSE of the rest is
/// reported.
SparsificationCurve sparsification_curve(const Vec& abs_errors, const Vec& uncertainty, int B);

/// Best-possible ordering: sparsify by the true error itself.
SparsificationCurve oracle_sparsification_curve(const Vec& abs_errors, int B);

/// Mean of R random-order curves with seeded shuffles.
SparsificationCurve random_mean_sparsification_curve(const Vec& abs_errors, int B, int R,
                                                     RngStream& rng);

struct AuseAurg {
    double ause = 0.0;
    double aurg = 0.0;
};

/// Areas over curves normalized by their shared value at fraction 0:
/// ause = trapezoid(method - oracle), aurg = trapezoid(random_mean - method).
/// A zero full-set error makes every normalized curve identically zero and
/// both metrics 0.
AuseAurg ause_aurg(const SparsificationCurve& method, const SparsificationCurve& oracle,
                   const SparsificationCurve& random_mean);

/// Monte-Carlo check of the score/curvature identity for the exact noising
/// marginal: lhs_d = E[score_d^2], rhs_d = -E[hessian_dd] under x ~ q_t.
/// max_z is the largest per-axis |lhs-rhs| in units of the paired-difference
/// standard error.
struct IdentityReport {
    int t = 0;
    long long samples = 0;
    Vec lhs, rhs;
    Vec se_lhs, se_rhs;
    Vec z;  // per-axis |lhs-rhs| / se(paired difference)
    double max_z = 0.0;
};

IdentityReport fisher_identity_check(const GmmDistribution& dist, const NoiseSchedule& schedule,
                                     int t, long long N, RngStream& rng);

/// Energy distance 2 E|a-b| - E|a-a'| - E|b-b'| over all ordered pairs
/// (same-set means include the zero diagonal). Deterministic for any thread
/// count: per-row partial sums combined with a fixed pairwise tree.
double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b, int threads = 1);

/// Indices of the floor(keep_fraction * n) lowest-uncertainty entries, ties
/// broken by ascending index; returned sorted ascending.
std::vector<size_t> filter_pool(const Vec& pool_uncertainties, double keep_fraction);

/// Per-step uncertainty source used by the reconstruction protocol; returns
/// the map and accounts its own predictor evaluations via the counter.
using StepUncertaintyFn = std::function<UncertaintyMap(
    const CountingPredictor& predictor, const Vec& x_t, int t, const Vec& eps_base,
    RngStream& rng)>;

StepUncertaintyFn make_score_variance_source(const NoiseSchedule& schedule, int M);
StepUncertaintyFn make_mc_dropout_source(const MlpParams& params, const MlpConfig& config, int K);

struct ReconstructionOptions {
    int generation_steps = 50;            // S for the full plan
    FractionalWindow window{0.90, 0.96};  // accumulation window on the restricted plan
    int curve_bins = 100;                 // B
    int random_shuffles = 10;             // R
    int noise_timestep = -1;              // -1: ceil(T/2); 0 skips noising entirely
};

struct ReconstructionImageResult {
    Vec abs_error;
    Vec uncertainty;  // per component, summed over the window
    double rmse = 0.0;
    AuseAurg metrics;
    long long nfe = 0;
};

struct ReconstructionResult {
    std::vector<ReconstructionImageResult> images;
    double mean_ause = 0.0;
    double mean_aurg = 0.0;
    double mean_rmse = 0.0;
};

/// Noise each test item to the target timestep, denoise it along the plan
/// restricted to that timestep, accumulate per-component uncertainty over the
/// window, and score the reconstruction against the ground truth.
ReconstructionResult reconstruction_eval(const NoisePredictor& predictor,
                                         const NoiseSchedule& schedule,
                                         const std::vector<Vec>& test_set,
                                         const ReconstructionOptions& options,
                                         const StepUncertaintyFn& uncertainty_source,
                                         uint64_t root_seed, int threads = 1);

}  // namespace scoreuq
