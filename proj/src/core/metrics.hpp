#pragma once

#include "gaussian.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fvbnn {

/// Mean over points of log N(y | mean, total_variance).
double mean_log_likelihood(std::span<const PosteriorPredictive> predictions,
                           std::span<const double> labels);

double rmse(std::span<const PosteriorPredictive> predictions, std::span<const double> labels);
double mae(std::span<const PosteriorPredictive> predictions, std::span<const double> labels);

/// Sample standard deviation divided by sqrt(n). Needs n >= 2.
double standard_error(std::span<const double> values);

enum class Alternative {
    AGreater,  // H1: the differences a - b are shifted above zero
};

struct WilcoxonResult {
    double p_value = 1.0;
    double w_plus = 0.0;     // sum of ranks of positive differences
    std::size_t n_used = 0;  // pairs left after dropping zero differences
    bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// One-sided Wilcoxon signed-rank test. Zero differences are dropped, tied
/// magnitudes share their average rank. For n_used <= 25 the p-value is the
/// exact tail of the sign-flip distribution (computed by dynamic programming
/// over rank sums); above that a tie- and continuity-corrected normal
/// approximation is used.
///
/// Throws InputError for unequal lengths or fewer than 5 non-zero
/// differences, and DataError (degenerate input) when every difference is 0.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alternative = Alternative::AGreater);

/// Average ranks (1-based) of |d| for the non-zero differences d, in input
/// order of the non-zero entries.
std::vector<double> signed_rank_magnitudes(std::span<const double> differences);

}  // namespace fvbnn
