#pragma once

#include <limits>

namespace fvbnn {

inline constexpr double kInfiniteVariance = std::numeric_limits<double>::infinity();

/// Pointwise Gaussian belief about a function value. BNN backends always
/// produce a finite variance; priors may use kInfiniteVariance to mean
/// "no information at this point".
struct GaussianPrediction {
    double mean = 0.0;
    double variance = 0.0;

    friend bool operator==(const GaussianPrediction&, const GaussianPrediction&) = default;
};

/// Predictive distribution of an observation y = f(x) + noise.
struct PosteriorPredictive {
    double mean = 0.0;
    double function_variance = 0.0;
    double noise_variance = 0.0;

    double total_variance() const { return function_variance + noise_variance; }

    friend bool operator==(const PosteriorPredictive&, const PosteriorPredictive&) = default;
};

}  // namespace fvbnn
