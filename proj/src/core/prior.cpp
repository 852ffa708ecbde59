#include "prior.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fvbnn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_variance(double v, const char* name) {
    if (!(v > 0.0)) throw InputError(std::string("prior ") + name + " must be > 0");
}

template <class Lookup>
GaussianPrediction evaluate_with(const FunctionValuePrior& prior, Lookup&& score_of) {
    return std::visit(
        overloaded{
            [](const ConstantPrior& p) { return GaussianPrediction{p.mean, p.variance}; },
            [&](const BinaryGatedPrior& p) {
                const double s = score_of(p.score_column);
                return GaussianPrediction{p.mean, s <= p.threshold ? p.variance_below : p.variance_above};
            },
            [&](const LinearScaledScorePrior& p) {
                return GaussianPrediction{p.slope * score_of(p.score_column) + p.intercept, p.variance};
            },
        },
        prior);
}

void check_labels(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InputError("roc_auc: scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InputError("roc_auc: labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    if (pos == 0 || pos == labels.size()) throw InputError("roc_auc: both classes must be present");
}

}  // namespace

void validate_prior(const FunctionValuePrior& prior) {
    std::visit(overloaded{
                   [](const ConstantPrior& p) {
                       check_variance(p.variance, "variance");
                       if (!std::isfinite(p.mean)) throw InputError("prior mean must be finite");
                   },
                   [](const BinaryGatedPrior& p) {
                       check_variance(p.variance_below, "variance_below");
                       check_variance(p.variance_above, "variance_above");
                       if (p.score_column.empty()) throw InputError("gated prior needs a score column");
                   },
                   [](const LinearScaledScorePrior& p) {
                       check_variance(p.variance, "variance");
                       if (p.score_column.empty()) throw InputError("scaled prior needs a score column");
                   },
               },
               prior);
}

std::vector<std::string> required_columns(const FunctionValuePrior& prior) {
    return std::visit(overloaded{
                          [](const ConstantPrior&) { return std::vector<std::string>{}; },
                          [](const BinaryGatedPrior& p) { return std::vector{p.score_column}; },
                          [](const LinearScaledScorePrior& p) { return std::vector{p.score_column}; },
                      },
                      prior);
}

GaussianPrediction evaluate_prior(const FunctionValuePrior& prior, const AuxValues& aux) {
    return evaluate_with(prior, [&](const std::string& column) {
        auto it = aux.find(column);
        if (it == aux.end()) throw ConfigError("prior needs auxiliary column '" + column + "'");
        return it->second;
    });
}

GaussianPrediction evaluate_prior(const FunctionValuePrior& prior, const Dataset& data,
                                  std::size_t row) {
    if (row >= data.size()) throw InputError("evaluate_prior: row out of range");
    return evaluate_with(prior, [&](const std::string& column) {
        auto it = data.aux.find(column);
        if (it == data.aux.end()) throw ConfigError("prior needs auxiliary column '" + column + "'");
        return it->second[row];
    });
}

std::vector<GaussianPrediction> evaluate_prior(const FunctionValuePrior& prior, const Dataset& data) {
    std::vector<GaussianPrediction> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.push_back(evaluate_prior(prior, data, i));
    return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_labels(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    double pos_rank_sum = 0.0;
    double n_pos = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t stop = start + 1;
        while (stop < n && scores[order[stop]] == scores[order[start]]) ++stop;
        const double avg = 0.5 * static_cast<double>(start + 1 + stop);
        for (std::size_t k = start; k < stop; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += avg;
                n_pos += 1.0;
            }
        }
        start = stop;
    }
    const double n_neg = static_cast<double>(n) - n_pos;
    return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double fit_threshold_roc_auc(std::span<const double> scores, std::span<const int> labels,
                             std::span<const double> grid) {
    check_labels(scores, labels);
    if (grid.empty()) throw InputError("fit_threshold_roc_auc: empty grid");
    std::vector<double> thresholds(grid.begin(), grid.end());
    std::sort(thresholds.begin(), thresholds.end());
    std::vector<double> predicted(scores.size());
    double best_t = thresholds.front();
    double best_auc = -1.0;
    for (double t : thresholds) {
        for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] > t ? 1.0 : 0.0;
        const double auc = roc_auc(predicted, labels);
        if (auc > best_auc) {
            best_auc = auc;
            best_t = t;
        }
    }
    return best_t;
}

StabilityGate fit_stability_gate(std::span<const double> scores, std::span<const int> labels,
                                 std::span<const double> grid) {
    const double t_high = fit_threshold_roc_auc(scores, labels, grid);
    std::vector<double> negated(scores.begin(), scores.end());
    for (auto& s : negated) s = -s;
    std::vector<double> neg_grid(grid.begin(), grid.end());
    for (auto& g : neg_grid) g = -g;
    const double t_low = -fit_threshold_roc_auc(negated, labels, neg_grid);

    auto auc_at = [&](double t, bool low_fit) {
        std::vector<double> predicted(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool fit = low_fit ? scores[i] < t : scores[i] > t;
            predicted[i] = fit ? 1.0 : 0.0;
        }
        return roc_auc(predicted, labels);
    };
    StabilityGate high{t_high, auc_at(t_high, false), false};
    StabilityGate low{t_low, auc_at(t_low, true), true};
    return low.auc > high.auc ? low : high;
}

std::vector<double> midpoint_grid(std::span<const double> scores) {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> grid;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) grid.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    if (grid.empty() && !sorted.empty()) grid.push_back(sorted.front());
    return grid;
}

LinearScaling fit_linear_scaling(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size() || scores.size() < 2) {
        throw InputError("fit_linear_scaling: need >= 2 paired values");
    }
    const double n = static_cast<double>(scores.size());
    const double s_mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    const double y_mean = std::accumulate(labels.begin(), labels.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sxx += (scores[i] - s_mean) * (scores[i] - s_mean);
        sxy += (scores[i] - s_mean) * (labels[i] - y_mean);
    }
    if (sxx == 0.0) throw DataError("fit_linear_scaling: all scores are equal");
    const double slope = sxy / sxx;
    return {slope, y_mean - slope * s_mean};
}

}  // namespace fvbnn
