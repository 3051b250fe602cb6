#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "disparity/dataset.hpp"

namespace disparity::effect {

struct estimation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ModelKind { Linear, Knn };
enum class EstimatorMode { EmpiricalProduct, Kde };

/// Regression of the outcome on (mediator columns, adjustment columns), fit
/// on the disadvantaged group (exposure = 0) only.
struct OutcomeModel {
    std::vector<std::string> m_cols;
    std::vector<std::string> b_cols;
    ModelKind kind = ModelKind::Linear;
    // linear: intercept followed by one coefficient per feature (m then b)
    std::vector<double> coef;
    // knn: training features and outcomes, neighbor count
    std::vector<std::vector<double>> train_x;
    std::vector<double> train_y;
    int k = 10;
    double r_squared = 0.0;
    std::size_t n_train = 0;

    double predict(const std::vector<double>& x) const;
};

OutcomeModel fit_outcome_model(const data::Dataset& d, const std::vector<std::string>& m_cols,
                               const std::vector<std::string>& b_cols,
                               ModelKind kind = ModelKind::Linear, int k = 10);

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::EmpiricalProduct;
    int mc_draws = 20000;      // kde-mode Monte-Carlo draws
    int mcmc_steps = 5000;     // random-walk Metropolis chain length
    int mcmc_burnin = 1000;
    int kde_mcmc_threshold = 4;  // switch to MCMC when the adjustment set is larger
};

struct EffectEstimate {
    std::vector<std::string> mediators;
    std::vector<std::string> adjust;
    double delta_hat = 0.0;
    double zeta_hat = 0.0;
    double total_hat = 0.0;  // raw group-mean gap; delta + zeta == total exactly
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool has_ci = false;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    double mc_se = 0.0;  // kde mode only
    EstimatorConfig estimator;
};

/// Plug-in adjusted effect: the outcome model averaged over the product of
/// the mediator law in group 1 and the adjustment law in group 0, minus the
/// group-0 outcome mean. The unadjusted remainder is total - delta exactly.
EffectEstimate estimate_adjusted(const data::Dataset& d, const OutcomeModel& model,
                                 const std::vector<std::string>& m_cols,
                                 const std::vector<std::string>& b_cols,
                                 EstimatorConfig cfg = {}, std::uint64_t seed = 0);

/// Percentile bootstrap over row resamples; the pipeline closure re-runs the
/// estimation (model refit included) on each resample. Resamples missing an
/// exposure group are redrawn, capped at 10 * reps attempts total.
std::pair<double, double> bootstrap_ci(const data::Dataset& d,
                                       const std::function<double(const data::Dataset&)>& pipeline,
                                       int reps, double level, std::uint64_t seed);

}  // namespace disparity::effect
