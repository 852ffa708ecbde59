#include "laplace.hpp"

#include "error.hpp"
#include "metrics.hpp"
#include "serialize.hpp"

#include <cmath>
#include <string>

namespace fvbnn {

namespace {

void check_hyper(double noise_variance, double prior_precision) {
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
        throw InputError("laplace: noise_variance must be finite and > 0");
    }
    if (!(prior_precision > 0.0) || !std::isfinite(prior_precision)) {
        throw InputError("laplace: prior_precision must be finite and > 0");
    }
}

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& features) {
    Eigen::MatrixXd phi(features.rows(), features.cols() + 1);
    phi.leftCols(features.cols()) = features;
    phi.col(features.cols()).setOnes();
    return phi;
}

LaplacePosterior solve_posterior(LaplacePosterior post, const Eigen::MatrixXd& phi,
                                 const Eigen::VectorXd& y) {
    const Eigen::Index m = phi.cols();
    Eigen::MatrixXd precision = phi.transpose() * phi / post.noise_variance;
    precision.diagonal().array() += post.prior_precision;

    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    double jitter = 1e-10;
    for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
        if (attempt == 3) throw NumericalError("laplace: posterior precision is not positive definite");
        Eigen::MatrixXd jittered = precision;
        jittered.diagonal().array() += jitter;
        llt.compute(jittered);
        jitter *= 10.0;
    }
    post.covariance_last = llt.solve(Eigen::MatrixXd::Identity(m, m));
    post.covariance_last = 0.5 * (post.covariance_last + post.covariance_last.transpose()).eval();
    post.mean_last = llt.solve(phi.transpose() * y / post.noise_variance);
    return post;
}

}  // namespace

Eigen::MatrixXd LaplacePosterior::design(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != input_dim) {
        throw InputError("laplace: feature dimension " + std::to_string(X.cols()) + " != " +
                         std::to_string(input_dim));
    }
    if (!backbone) return with_bias(X);
    return with_bias(last_hidden_activations(backbone->architecture, backbone->weights, X));
}

LaplacePosterior fit_last_layer_laplace(const TrainedNetwork& network, const Dataset& train_set,
                                        double noise_variance, double prior_precision) {
    check_hyper(noise_variance, prior_precision);
    if (train_set.empty()) throw InputError("laplace: empty training set");
    LaplacePosterior post;
    post.backbone = network;
    post.input_dim = network.architecture.input_dim;
    post.noise_variance = noise_variance;
    post.prior_precision = prior_precision;
    const Eigen::MatrixXd phi = post.design(train_set.features);
    return solve_posterior(std::move(post), phi, train_set.labels);
}

LaplacePosterior fit_identity_laplace(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      double noise_variance, double prior_precision) {
    check_hyper(noise_variance, prior_precision);
    if (X.rows() == 0 || X.rows() != y.size()) throw InputError("laplace: bad data shape");
    LaplacePosterior post;
    post.input_dim = static_cast<std::size_t>(X.cols());
    post.noise_variance = noise_variance;
    post.prior_precision = prior_precision;
    return solve_posterior(std::move(post), with_bias(X), y);
}

std::vector<GaussianPrediction> predict_moments(const LaplacePosterior& posterior,
                                                const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd phi = posterior.design(X);
    const Eigen::VectorXd means = phi * posterior.mean_last;
    const Eigen::VectorXd quad = (phi * posterior.covariance_last).cwiseProduct(phi).rowwise().sum();
    std::vector<GaussianPrediction> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = {means[i], std::max(0.0, quad[i])};
    }
    return out;
}

std::vector<double> default_precision_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
    return grid;
}

PrecisionSelection select_prior_precision(const TrainedNetwork& network, const Dataset& train_set,
                                          const Dataset& val_set, double noise_variance,
                                          std::span<const double> precision_grid) {
    if (precision_grid.empty()) throw ConfigError("laplace: prior precision grid is empty");
    std::optional<PrecisionSelection> best;
    std::vector<PrecisionCell> cells;
    double best_ll = -INFINITY;
    for (double alpha : precision_grid) {
        auto post = fit_last_layer_laplace(network, train_set, noise_variance, alpha);
        std::vector<PosteriorPredictive> preds;
        for (const auto& g : predict_moments(post, val_set.features)) {
            preds.push_back({g.mean, g.variance, noise_variance});
        }
        const double ll = mean_log_likelihood(preds, val_set.label_vector());
        cells.push_back({alpha, ll});
        const bool better = ll > best_ll ||
                            (ll == best_ll && best && alpha < best->posterior.prior_precision);
        if (!best || better) {
            best_ll = ll;
            best = PrecisionSelection{std::move(post), {}};
        }
    }
    best->cells = std::move(cells);
    return std::move(*best);
}

void save_laplace(const LaplacePosterior& posterior, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["kind"] = "last_layer_laplace";
    meta["input_dim"] = posterior.input_dim;
    meta["prior_precision"] = posterior.prior_precision;
    meta["noise_variance"] = posterior.noise_variance;
    meta["last_layer_size"] = posterior.mean_last.size();
    if (posterior.backbone) meta["backbone"] = save_network(*posterior.backbone, dir / "backbone.bin");
    write_f64_file(dir / "mean_last.bin",
                   {posterior.mean_last.data(), static_cast<std::size_t>(posterior.mean_last.size())});
    write_f64_file(dir / "covariance_last.bin",
                   {posterior.covariance_last.data(),
                    static_cast<std::size_t>(posterior.covariance_last.size())});
    write_json_file(dir / "manifest.json", meta);
}

LaplacePosterior load_laplace(const std::filesystem::path& dir) {
    const auto meta = read_json_file(dir / "manifest.json");
    LaplacePosterior post;
    try {
        post.input_dim = meta.at("input_dim").get<std::size_t>();
        post.prior_precision = meta.at("prior_precision").get<double>();
        post.noise_variance = meta.at("noise_variance").get<double>();
        if (meta.contains("backbone")) post.backbone = load_network(meta.at("backbone"), dir / "backbone.bin");
        const auto m = meta.at("last_layer_size").get<Eigen::Index>();
        const auto mean = read_f64_file(dir / "mean_last.bin");
        const auto cov = read_f64_file(dir / "covariance_last.bin");
        if (static_cast<Eigen::Index>(mean.size()) != m ||
            static_cast<Eigen::Index>(cov.size()) != m * m) {
            throw DataError(dir.string() + ": last-layer files have the wrong size");
        }
        post.mean_last = Eigen::Map<const Eigen::VectorXd>(mean.data(), m);
        post.covariance_last = Eigen::Map<const Eigen::MatrixXd>(cov.data(), m, m);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + "/manifest.json: " + e.what());
    }
    return post;
}

}  // namespace fvbnn
