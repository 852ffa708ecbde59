#pragma once

#include "gaussian.hpp"

#include <span>

namespace fvbnn {

/// Linear stacker over (BNN mean, prior mean) with homoscedastic noise.
struct StackingModel {
    double w_bnn = 0.0;
    double w_prior = 0.0;
    double intercept = 0.0;
    double residual_variance = 0.0;  // validation MSE of the stacked mean
};

enum class ConstantPriorFeature {
    Reject,  // collinear with the intercept: DataError
    Drop,    // fit w_prior = 0 and regress on the BNN mean alone
};

/// Least-squares fit on validation data (the Gaussian maximum-likelihood
/// weights coincide). Throws DataError for collinear features or n < 3.
/// A prior feature that is constant over the validation set is collinear
/// with the intercept; `constant_prior` decides whether that is an error.
StackingModel fit_stacker(std::span<const double> bnn_means, std::span<const double> prior_means,
                          std::span<const double> labels,
                          ConstantPriorFeature constant_prior = ConstantPriorFeature::Reject);

/// Constant predictive variance: function_variance 0, noise = residual_variance.
PosteriorPredictive predict_stacker(const StackingModel& model, double bnn_mean, double prior_mean);

}  // namespace fvbnn
