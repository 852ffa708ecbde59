#include "fusion.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fvbnn {

GaussianPrediction fuse(const GaussianPrediction& bnn, const GaussianPrediction& prior) {
    if (!(bnn.variance >= 0.0) || !std::isfinite(bnn.variance) || !std::isfinite(bnn.mean)) {
        throw InputError("fuse: BNN moments must be finite with variance >= 0");
    }
    if (!(prior.variance > 0.0)) throw InputError("fuse: prior variance must be > 0");
    if (std::isinf(prior.variance)) return bnn;
    if (!std::isfinite(prior.mean)) throw InputError("fuse: prior mean must be finite");
    if (bnn.variance == 0.0) return {bnn.mean, 0.0};

    const double p_bnn = 1.0 / bnn.variance;
    const double p_fv = 1.0 / prior.variance;
    const double p_sum = p_bnn + p_fv;
    double mean = (p_bnn * bnn.mean + p_fv * prior.mean) / p_sum;
    double variance = 1.0 / p_sum;
    // The exact values satisfy both bounds; rounding must not break them.
    mean = std::clamp(mean, std::min(bnn.mean, prior.mean), std::max(bnn.mean, prior.mean));
    variance = std::min({variance, bnn.variance, prior.variance});
    return {mean, variance};
}

double prior_weight(double bnn_variance, double prior_variance) {
    if (!(bnn_variance >= 0.0) || !(prior_variance > 0.0)) {
        throw InputError("prior_weight: need bnn_variance >= 0 and prior_variance > 0");
    }
    if (std::isinf(prior_variance)) return 0.0;
    if (std::isinf(bnn_variance)) return 1.0;
    return bnn_variance / (bnn_variance + prior_variance);
}

PosteriorPredictive posterior_predictive(const GaussianPrediction& fused, double noise_variance) {
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw InputError("posterior_predictive: noise variance must be finite and >= 0");
    }
    if (!std::isfinite(fused.variance)) {
        throw InputError("posterior_predictive: function variance must be finite");
    }
    return {fused.mean, fused.variance, noise_variance};
}

double estimate_noise_variance(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.empty() || predictions.size() != labels.size()) {
        throw InputError("estimate_noise_variance: need equal, non-empty inputs");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double r = predictions[i] - labels[i];
        ss += r * r;
    }
    return ss / static_cast<double>(labels.size());
}

std::vector<GaussianPrediction> predict_moments(const Backend& backend, const Eigen::MatrixXd& X) {
    return std::visit(
        [&](const auto& b) -> std::vector<GaussianPrediction> {
            if constexpr (std::is_same_v<std::decay_t<decltype(b)>, TrainedNetwork>) {
                const Eigen::VectorXd out = b.predict(X);
                std::vector<GaussianPrediction> moments;
                moments.reserve(static_cast<std::size_t>(out.size()));
                for (double m : out) moments.push_back({m, 0.0});
                return moments;
            } else {
                return predict_moments(b, X);
            }
        },
        backend);
}

std::vector<PosteriorPredictive> fuse_all(std::span<const GaussianPrediction> bnn,
                                          std::span<const GaussianPrediction> prior,
                                          double noise_variance) {
    if (bnn.size() != prior.size()) throw InputError("fuse_all: length mismatch");
    std::vector<PosteriorPredictive> out;
    out.reserve(bnn.size());
    for (std::size_t i = 0; i < bnn.size(); ++i) {
        out.push_back(posterior_predictive(fuse(bnn[i], prior[i]), noise_variance));
    }
    return out;
}

std::vector<PosteriorPredictive> predict_fused(const Backend& backend,
                                               const FunctionValuePrior& prior,
                                               double noise_variance, const Dataset& data) {
    validate_prior(prior);
    const auto moments = predict_moments(backend, data.features);
    const auto priors = evaluate_prior(prior, data);
    return fuse_all(moments, priors, noise_variance);
}

}  // namespace fvbnn
