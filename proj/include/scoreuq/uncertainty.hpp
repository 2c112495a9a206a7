#pragma once

#include <vector>

#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"
#include "scoreuq/score.hpp"

namespace scoreuq {

/// Per-component variance of predicted noise at one step. Values are
/// nonnegative and finite by construction.
struct UncertaintyMap {
    int t = 0;
    Vec values;
};

/// Stack of M predicted-noise vectors for the perturbed states.
struct ScoreStack {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
};

/// Unbiased per-component sample variance over the stack rows. Values are
/// accumulated in sorted order per component, so the result is bit-identical
/// under any permutation of the rows.
Vec variance_of_stack(const ScoreStack& stack);

/// Closed interval [lo, hi] of generation progress i/S, with i counting
/// denoising steps completed from the start (i = 0 at t = T).
struct FractionalWindow {
    double lo = 0.90;
    double hi = 0.96;
};

/// Step indices i in [0, S) with lo <= i/S <= hi.
std::vector<int> window_step_indices(int S, const FractionalWindow& window);

enum class PerturbationScheme { Diffusion, Gaussian };

struct UncertaintyConfig {
    int mc_samples = 5;  // M
    FractionalWindow window;
    PerturbationScheme scheme = PerturbationScheme::Diffusion;
    double gaussian_sigma = 0.1;  // only used by the Gaussian scheme
};

struct StepUncertainty {
    UncertaintyMap map;
    std::vector<Vec> draws;  // the M standard-normal draws, frozen for guidance
};

/// Diffusion perturbation scheme: denoise to x0_hat, re-noise M times, take
/// the unbiased per-component variance of the re-scored variants. Consumes
/// exactly M + 1 predictor evaluations (1 base + M).
StepUncertainty estimate_step_uncertainty(const NoisePredictor& predictor,
                                          const NoiseSchedule& schedule, const Vec& x_t, int t,
                                          int M, RngStream& rng);

/// Same, with the base prediction supplied by the caller (the sampler step
/// already computed it); consumes exactly M predictor evaluations.
StepUncertainty estimate_step_uncertainty_with_base(const NoisePredictor& predictor,
                                                    const NoiseSchedule& schedule, const Vec& x_t,
                                                    int t, const Vec& eps_base, int M,
                                                    RngStream& rng);

/// Fully deterministic core shared by the estimators and the guidance
/// finite-difference pipeline: uses the provided draws verbatim.
UncertaintyMap score_variance_frozen(const NoisePredictor& predictor,
                                     const NoiseSchedule& schedule, const Vec& x_t, int t,
                                     const Vec& eps_base, const std::vector<Vec>& draws);

/// Baseline scheme: perturb x_t directly with sigma_p * z_i and take the
/// variance of the predictor outputs. Consumes M predictor evaluations.
UncertaintyMap gaussian_perturbation_uncertainty(const NoisePredictor& predictor, const Vec& x_t,
                                                 int t, int M, double sigma_p, RngStream& rng);

/// Sum of all components of all maps whose step index falls in the window.
/// Every window step must be covered by a map.
double aggregate_uncertainty(const std::vector<UncertaintyMap>& maps,
                             const FractionalWindow& window, const TimestepPlan& plan);

struct ProfileStats {
    Vec mean;    // per step
    Vec stddev;  // per step, unbiased
};

/// Columnwise mean and std of a samples x steps matrix of per-step totals.
ProfileStats uncertainty_profile(const std::vector<Vec>& per_step_totals);

}  // namespace scoreuq
