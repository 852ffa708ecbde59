#pragma once

// Hyperparameter selection on held-out data: prior variances by validation
// log-likelihood of the fused predictive, architectures by k-fold CV.

#include "gaussian.hpp"
#include "nn.hpp"
#include "prior.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace fvbnn {

/// Constant-mean prior with a free variance.
struct ConstantFamily {
    double mean = 0.0;
};

/// Gated prior with fixed threshold; free (variance_below, variance_above).
struct GatedFamily {
    std::string score_column;
    double threshold = 0.0;
    double mean = 0.0;
};

/// Scaled-score prior with fixed slope/intercept and a free variance.
struct ScaledFamily {
    std::string score_column;
    double slope = 1.0;
    double intercept = 0.0;
};

using PriorFamily = std::variant<ConstantFamily, GatedFamily, ScaledFamily>;

std::size_t free_parameter_count(const PriorFamily& family);
FunctionValuePrior instantiate(const PriorFamily& family, std::span<const double> params);

struct PriorGridCell {
    std::vector<double> params;
    double objective = 0.0;  // mean validation log-likelihood
};

struct PriorSearchResult {
    FunctionValuePrior prior;
    double best_log_likelihood = 0.0;
    std::size_t best_index = 0;
    std::vector<PriorGridCell> cells;  // Cartesian order, last parameter fastest
};

/// Exhaustive search over the Cartesian product of `grids` (one grid per free
/// parameter). Ties go to the largest variances (weakest prior).
PriorSearchResult grid_search_prior(const PriorFamily& family,
                                    const std::vector<std::vector<double>>& grids,
                                    std::span<const GaussianPrediction> bnn_val,
                                    const Dataset& val_set, double noise_variance);

/// 13 log-spaced points from 1e-3 to 1e3 times `label_variance`.
std::vector<double> default_variance_grid(double label_variance);

struct CrossValidation {
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

/// Validation MSE of a model trained with (arch, weight_decay) on `train`.
using CvEvaluator = std::function<double(const NetworkArchitecture& arch, double weight_decay,
                                         const Dataset& train, const Dataset& val)>;

/// Trains a network with `base` settings (weight decay overridden).
CvEvaluator network_cv_evaluator(TrainingConfig base);

struct ArchitectureCell {
    NetworkArchitecture architecture;
    double weight_decay = 0.0;
    double mean_val_mse = 0.0;
};

struct ArchitectureSearchResult {
    NetworkArchitecture architecture;
    double weight_decay = 0.0;
    double mean_val_mse = 0.0;
    std::vector<ArchitectureCell> cells;
};

/// Minimum mean fold MSE over candidates x decays; ties go to fewer
/// parameters, then to the larger decay.
ArchitectureSearchResult grid_search_architecture(std::span<const NetworkArchitecture> candidates,
                                                  std::span<const double> weight_decays,
                                                  const CrossValidation& cv, const Dataset& data,
                                                  const CvEvaluator& evaluate);

/// Hidden layouts {1,2 layers} x {100,200,300} for the given input width.
std::vector<NetworkArchitecture> default_architecture_grid(std::size_t input_dim);
std::vector<double> default_weight_decay_grid();

}  // namespace fvbnn
