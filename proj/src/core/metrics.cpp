#include "metrics.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>

namespace fvbnn {

namespace {

void check_pair(std::size_t n_pred, std::size_t n_labels, const char* what) {
    if (n_pred == 0) throw InputError(std::string(what) + ": empty input");
    if (n_pred != n_labels) {
        throw InputError(std::string(what) + ": " + std::to_string(n_pred) + " predictions vs " +
                         std::to_string(n_labels) + " labels");
    }
}

}  // namespace

double mean_log_likelihood(std::span<const PosteriorPredictive> predictions,
                           std::span<const double> labels) {
    check_pair(predictions.size(), labels.size(), "mean_log_likelihood");
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double var = predictions[i].total_variance();
        if (!(var > 0.0) || !std::isfinite(var)) {
            throw InputError("mean_log_likelihood: total variance at point " + std::to_string(i) +
                             " must be finite and > 0");
        }
        const double r = labels[i] - predictions[i].mean;
        total += -0.5 * (log_2pi + std::log(var) + r * r / var);
    }
    return total / static_cast<double>(labels.size());
}

double rmse(std::span<const PosteriorPredictive> predictions, std::span<const double> labels) {
    check_pair(predictions.size(), labels.size(), "rmse");
    double ss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double r = labels[i] - predictions[i].mean;
        ss += r * r;
    }
    return std::sqrt(ss / static_cast<double>(labels.size()));
}

double mae(std::span<const PosteriorPredictive> predictions, std::span<const double> labels) {
    check_pair(predictions.size(), labels.size(), "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) s += std::abs(labels[i] - predictions[i].mean);
    return s / static_cast<double>(labels.size());
}

double standard_error(std::span<const double> values) {
    if (values.size() < 2) throw InputError("standard_error needs at least 2 values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

std::vector<double> signed_rank_magnitudes(std::span<const double> differences) {
    std::vector<double> mags;
    for (double d : differences) {
        if (d != 0.0) mags.push_back(std::abs(d));
    }
    std::vector<std::size_t> order(mags.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return mags[i] < mags[j]; });
    std::vector<double> ranks(mags.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t stop = start + 1;
        while (stop < order.size() && mags[order[stop]] == mags[order[start]]) ++stop;
        // positions start..stop-1 hold ranks start+1..stop
        const double avg = 0.5 * static_cast<double>(start + 1 + stop);
        for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = avg;
        start = stop;
    }
    return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative /*alternative*/) {
    if (a.size() != b.size()) throw InputError("wilcoxon: samples have different lengths");
    std::vector<double> diffs(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
    for (double d : diffs) {
        if (!std::isfinite(d)) throw InputError("wilcoxon: non-finite difference");
    }

    std::vector<double> nonzero;
    for (double d : diffs) {
        if (d != 0.0) nonzero.push_back(d);
    }
    if (nonzero.empty()) throw DataError("wilcoxon: all differences are zero (degenerate input)");
    if (nonzero.size() < 5) {
        throw InputError("wilcoxon: need at least 5 non-zero differences, got " +
                         std::to_string(nonzero.size()));
    }

    const auto ranks = signed_rank_magnitudes(nonzero);
    WilcoxonResult res;
    res.n_used = nonzero.size();
    for (std::size_t i = 0; i < nonzero.size(); ++i) {
        if (nonzero[i] > 0.0) res.w_plus += ranks[i];
    }

    const std::size_t n = res.n_used;
    if (n <= kWilcoxonExactLimit) {
        // Average ranks are multiples of 1/2, so doubled ranks are integers.
        std::vector<std::size_t> doubled(n);
        std::size_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
            total += doubled[i];
        }
        std::vector<std::uint64_t> counts(total + 1, 0);
        counts[0] = 1;
        std::size_t reach = 0;
        for (std::size_t r : doubled) {
            for (std::size_t s = reach + 1; s-- > 0;) {
                if (counts[s] != 0) counts[s + r] += counts[s];
            }
            reach += r;
        }
        const auto observed = static_cast<std::size_t>(std::lround(2.0 * res.w_plus));
        std::uint64_t tail = 0;
        for (std::size_t s = observed; s <= total; ++s) tail += counts[s];
        res.p_value = std::ldexp(static_cast<double>(tail), -static_cast<int>(n));
        res.exact = true;
        return res;
    }

    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t start = 0; start < sorted.size();) {
        std::size_t stop = start + 1;
        while (stop < sorted.size() && sorted[stop] == sorted[start]) ++stop;
        const double t = static_cast<double>(stop - start);
        tie_term += t * t * t - t;
        start = stop;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (res.w_plus - mean - 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(z / std::numbers::sqrt2);
    res.exact = false;
    return res;
}

}  // namespace fvbnn
