#pragma once

// Function-value priors N(mu_fv(x), sigma_fv^2(x)) and the fits that
// calibrate them against external scores.

#include "dataset.hpp"
#include "gaussian.hpp"

#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fvbnn {

/// Same belief everywhere. variance == kInfiniteVariance means "no prior".
struct ConstantPrior {
    double mean = 0.0;
    double variance = kInfiniteVariance;
};

/// Zero-mean prior whose variance depends on which side of `threshold` an
/// auxiliary score falls: score <= threshold uses variance_below.
struct BinaryGatedPrior {
    std::string score_column;
    double threshold = 0.0;
    double mean = 0.0;
    double variance_below = 1.0;
    double variance_above = 1.0;
};

/// mean(x) = slope * score(x) + intercept with a constant variance.
struct LinearScaledScorePrior {
    std::string score_column;
    double slope = 1.0;
    double intercept = 0.0;
    double variance = 1.0;
};

using FunctionValuePrior = std::variant<ConstantPrior, BinaryGatedPrior, LinearScaledScorePrior>;

using AuxValues = std::map<std::string, double, std::less<>>;

/// Throws InputError if any variance is not > 0 (NaN included).
void validate_prior(const FunctionValuePrior& prior);

/// Auxiliary columns the prior reads.
std::vector<std::string> required_columns(const FunctionValuePrior& prior);

GaussianPrediction evaluate_prior(const FunctionValuePrior& prior, const AuxValues& aux);
GaussianPrediction evaluate_prior(const FunctionValuePrior& prior, const Dataset& data,
                                  std::size_t row);
std::vector<GaussianPrediction> evaluate_prior(const FunctionValuePrior& prior, const Dataset& data);

/// Mann-Whitney AUC: P(score_pos > score_neg) + P(tie) / 2.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Grid threshold whose predictor (score > t) has the largest ROC-AUC; the
/// smallest such threshold on ties.
double fit_threshold_roc_auc(std::span<const double> scores, std::span<const int> labels,
                             std::span<const double> grid);

struct StabilityGate {
    double threshold = 0.0;
    double auc = 0.5;
    // true when low scores mark the fit class (e.g. energies).
    bool low_scores_fit = false;
};

/// Searches the threshold in both score orientations and keeps the better.
StabilityGate fit_stability_gate(std::span<const double> scores, std::span<const int> labels,
                                 std::span<const double> grid);

/// Sorted unique midpoints between consecutive distinct scores; a single
/// distinct score is returned as the only candidate.
std::vector<double> midpoint_grid(std::span<const double> scores);

struct LinearScaling {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares of labels on scores. Throws DataError when all
/// scores are equal.
LinearScaling fit_linear_scaling(std::span<const double> scores, std::span<const double> labels);

}  // namespace fvbnn
