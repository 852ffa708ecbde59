#include "empirical_bayes.hpp"

#include "error.hpp"
#include "fusion.hpp"
#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace fvbnn {

std::size_t free_parameter_count(const PriorFamily& family) {
    return std::holds_alternative<GatedFamily>(family) ? 2 : 1;
}

FunctionValuePrior instantiate(const PriorFamily& family, std::span<const double> params) {
    if (params.size() != free_parameter_count(family)) {
        throw InputError("instantiate: wrong number of prior parameters");
    }
    if (const auto* c = std::get_if<ConstantFamily>(&family)) return ConstantPrior{c->mean, params[0]};
    if (const auto* g = std::get_if<GatedFamily>(&family)) {
        return BinaryGatedPrior{g->score_column, g->threshold, g->mean, params[0], params[1]};
    }
    const auto& s = std::get<ScaledFamily>(family);
    return LinearScaledScorePrior{s.score_column, s.slope, s.intercept, params[0]};
}

PriorSearchResult grid_search_prior(const PriorFamily& family,
                                    const std::vector<std::vector<double>>& grids,
                                    std::span<const GaussianPrediction> bnn_val,
                                    const Dataset& val_set, double noise_variance) {
    const std::size_t k = free_parameter_count(family);
    if (grids.size() != k) {
        throw ConfigError("prior grid search: expected " + std::to_string(k) + " grid(s), got " +
                          std::to_string(grids.size()));
    }
    std::vector<std::vector<double>> sorted = grids;
    for (auto& g : sorted) {
        if (g.empty()) throw ConfigError("prior grid search: empty variance grid");
        for (double v : g) {
            if (!(v > 0.0)) throw ConfigError("prior grid search: variances must be > 0");
        }
        std::sort(g.begin(), g.end());
    }
    if (bnn_val.size() != val_set.size()) {
        throw InputError("prior grid search: BNN predictions and validation set differ in length");
    }
    const auto labels = val_set.label_vector();

    PriorSearchResult result;
    std::vector<std::size_t> index(k, 0);
    std::vector<double> params(k);
    for (;;) {
        for (std::size_t j = 0; j < k; ++j) params[j] = sorted[j][index[j]];
        const auto prior = instantiate(family, params);
        const auto predictive = fuse_all(bnn_val, evaluate_prior(prior, val_set), noise_variance);
        const double ll = mean_log_likelihood(predictive, labels);
        result.cells.push_back({params, ll});
        // Later cells have larger variances, so >= breaks ties toward them.
        if (result.cells.size() == 1 || ll >= result.best_log_likelihood) {
            result.best_log_likelihood = ll;
            result.best_index = result.cells.size() - 1;
            result.prior = prior;
        }
        std::size_t pos = k;
        while (pos > 0) {
            --pos;
            if (++index[pos] < sorted[pos].size()) break;
            index[pos] = 0;
            if (pos == 0) return result;
        }
    }
}

std::vector<double> default_variance_grid(double label_variance) {
    if (!(label_variance > 0.0) || !std::isfinite(label_variance)) {
        throw InputError("default_variance_grid: label variance must be finite and > 0");
    }
    std::vector<double> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back(label_variance * std::pow(10.0, -3.0 + 0.5 * i));
    return grid;
}

CvEvaluator network_cv_evaluator(TrainingConfig base) {
    return [base](const NetworkArchitecture& arch, double weight_decay, const Dataset& train_set,
                  const Dataset& val_set) {
        TrainingConfig cfg = base;
        cfg.weight_decay = weight_decay;
        return train(arch, cfg, train_set, val_set).best_val_loss;
    };
}

ArchitectureSearchResult grid_search_architecture(std::span<const NetworkArchitecture> candidates,
                                                  std::span<const double> weight_decays,
                                                  const CrossValidation& cv, const Dataset& data,
                                                  const CvEvaluator& evaluate) {
    if (candidates.empty() || weight_decays.empty()) {
        throw ConfigError("architecture search: need at least one candidate and one weight decay");
    }
    if (cv.folds < 2 || cv.folds > data.size()) {
        throw ConfigError("architecture search: " + std::to_string(cv.folds) +
                          " folds incompatible with " + std::to_string(data.size()) + " rows");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cv.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Dataset> fold_train;
    std::vector<Dataset> fold_val;
    for (std::size_t f = 0; f < cv.folds; ++f) {
        std::vector<std::size_t> tr;
        std::vector<std::size_t> va;
        for (std::size_t i = 0; i < order.size(); ++i) (i % cv.folds == f ? va : tr).push_back(order[i]);
        fold_train.push_back(data.subset(tr));
        fold_val.push_back(data.subset(va));
    }

    ArchitectureSearchResult result;
    bool have_best = false;
    for (const auto& arch : candidates) {
        arch.validate();
        for (double decay : weight_decays) {
            double total = 0.0;
            for (std::size_t f = 0; f < cv.folds; ++f) total += evaluate(arch, decay, fold_train[f], fold_val[f]);
            const double mse = total / static_cast<double>(cv.folds);
            result.cells.push_back({arch, decay, mse});
            bool better = !have_best || mse < result.mean_val_mse;
            if (have_best && mse == result.mean_val_mse) {
                const auto p_new = arch.parameter_count();
                const auto p_old = result.architecture.parameter_count();
                better = p_new < p_old || (p_new == p_old && decay > result.weight_decay);
            }
            if (better) {
                have_best = true;
                result.architecture = arch;
                result.weight_decay = decay;
                result.mean_val_mse = mse;
            }
        }
    }
    return result;
}

std::vector<NetworkArchitecture> default_architecture_grid(std::size_t input_dim) {
    std::vector<NetworkArchitecture> grid;
    for (std::size_t depth : {1u, 2u}) {
        for (std::size_t width : {100u, 200u, 300u}) {
            NetworkArchitecture a;
            a.input_dim = input_dim;
            a.hidden_dims.assign(depth, width);
            grid.push_back(a);
        }
    }
    return grid;
}

std::vector<double> default_weight_decay_grid() { return {0.01, 0.0001, 0.000001}; }

}  // namespace fvbnn
