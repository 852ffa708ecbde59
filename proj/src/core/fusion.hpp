#pragma once

// Pointwise product of the moment-matched BNN posterior with a function-value
// prior, and the resulting posterior predictive.

#include "ensemble.hpp"
#include "gaussian.hpp"
#include "laplace.hpp"
#include "nn.hpp"
#include "prior.hpp"

#include <span>
#include <variant>
#include <vector>

namespace fvbnn {

/// Normalized product of two Gaussians in precision form:
///   variance = 1 / (1/v_bnn + 1/v_fv)
///   mean     = variance * (mu_bnn / v_bnn + mu_fv / v_fv)
/// An infinite prior variance returns `bnn` unchanged; a zero BNN variance
/// returns (mu_bnn, 0). The prior variance must be > 0.
GaussianPrediction fuse(const GaussianPrediction& bnn, const GaussianPrediction& prior);

/// Weight placed on the prior mean by fuse(): v_bnn / (v_bnn + v_fv).
double prior_weight(double bnn_variance, double prior_variance);

PosteriorPredictive posterior_predictive(const GaussianPrediction& fused, double noise_variance);

/// Mean squared error of predictions against labels (estimate of the
/// observation noise variance).
double estimate_noise_variance(std::span<const double> predictions, std::span<const double> labels);

/// A single network counts as a backend with zero epistemic variance.
using Backend = std::variant<TrainedNetwork, TrainedEnsemble, LaplacePosterior>;

std::vector<GaussianPrediction> predict_moments(const Backend& backend, const Eigen::MatrixXd& X);

/// backend moments -> prior at each row -> fuse -> add noise.
std::vector<PosteriorPredictive> predict_fused(const Backend& backend,
                                               const FunctionValuePrior& prior,
                                               double noise_variance, const Dataset& data);

/// Same as predict_fused with precomputed backend moments.
std::vector<PosteriorPredictive> fuse_all(std::span<const GaussianPrediction> bnn,
                                          std::span<const GaussianPrediction> prior,
                                          double noise_variance);

}  // namespace fvbnn
