#pragma once

#include "gaussian.hpp"
#include "nn.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fvbnn {

/// Gaussian posterior over the final linear layer of a network whose hidden
/// layers are frozen. Without a backbone the feature map is the identity,
/// which reduces the model to conjugate Bayesian linear regression.
struct LaplacePosterior {
    std::optional<TrainedNetwork> backbone;
    std::size_t input_dim = 0;
    Eigen::VectorXd mean_last;  // feature weights followed by the bias
    Eigen::MatrixXd covariance_last;
    double prior_precision = 1.0;
    double noise_variance = 1.0;

    /// Feature rows with a trailing constant-1 column.
    Eigen::MatrixXd design(const Eigen::MatrixXd& X) const;
};

/// Exact posterior of the last layer: covariance (Phi^T Phi / noise +
/// prior_precision I)^-1 and the matching posterior mean.
LaplacePosterior fit_last_layer_laplace(const TrainedNetwork& network, const Dataset& train_set,
                                        double noise_variance, double prior_precision);

LaplacePosterior fit_identity_laplace(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      double noise_variance, double prior_precision);

/// Epistemic moments: mean phi^T m, variance phi^T S phi (no noise added).
std::vector<GaussianPrediction> predict_moments(const LaplacePosterior& posterior,
                                                const Eigen::MatrixXd& X);

struct PrecisionCell {
    double prior_precision = 0.0;
    double log_likelihood = 0.0;
};

struct PrecisionSelection {
    LaplacePosterior posterior;
    std::vector<PrecisionCell> cells;
};

/// Fits one posterior per grid value and keeps the one with the highest mean
/// validation log-likelihood (noise added). Ties go to the smaller precision.
PrecisionSelection select_prior_precision(const TrainedNetwork& network, const Dataset& train_set,
                                          const Dataset& val_set, double noise_variance,
                                          std::span<const double> precision_grid);

/// 13 log-spaced values from 1e-4 to 1e2.
std::vector<double> default_precision_grid();

void save_laplace(const LaplacePosterior& posterior, const std::filesystem::path& dir);
LaplacePosterior load_laplace(const std::filesystem::path& dir);

}  // namespace fvbnn
