#include "nn.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace fvbnn {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajorMatrix> weight_block(const WeightVector& w, const LayerSlice& s) {
    return {w.values.data() + s.weight_offset, static_cast<Eigen::Index>(s.fan_out),
            static_cast<Eigen::Index>(s.fan_in)};
}

Eigen::Map<const Eigen::VectorXd> bias_block(const WeightVector& w, const LayerSlice& s) {
    return {w.values.data() + s.bias_offset, static_cast<Eigen::Index>(s.fan_out)};
}

void check_weights(const NetworkArchitecture& arch, const WeightVector& w) {
    if (w.size() != arch.parameter_count() || w.layout.size() != arch.hidden_dims.size() + 1) {
        throw InputError("weight vector does not match architecture (" + std::to_string(w.size()) +
                         " values, expected " + std::to_string(arch.parameter_count()) + ")");
    }
}

void check_inputs(const NetworkArchitecture& arch, const Eigen::MatrixXd& X) {
    if (static_cast<std::size_t>(X.cols()) != arch.input_dim) {
        throw InputError("feature dimension " + std::to_string(X.cols()) +
                         " does not match network input_dim " + std::to_string(arch.input_dim));
    }
}

// Activations of every layer; element 0 is the input, element k the output
// of hidden layer k. Pre-activations of hidden layers go to `pre` if given.
std::vector<Eigen::MatrixXd> hidden_pass(const WeightVector& w, const Eigen::MatrixXd& X,
                                         std::vector<Eigen::MatrixXd>* pre) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(w.layout.size());
    acts.push_back(X);
    for (std::size_t l = 0; l + 1 < w.layout.size(); ++l) {
        const auto& s = w.layout[l];
        Eigen::MatrixXd z = acts.back() * weight_block(w, s).transpose();
        z.rowwise() += bias_block(w, s).transpose();
        acts.push_back(z.cwiseMax(0.0));
        if (pre != nullptr) pre->push_back(std::move(z));
    }
    return acts;
}

Eigen::VectorXd output_layer(const WeightVector& w, const Eigen::MatrixXd& last) {
    const auto& s = w.layout.back();
    Eigen::VectorXd out = last * weight_block(w, s).transpose();
    out.array() += w.values[static_cast<Eigen::Index>(s.bias_offset)];
    return out;
}

}  // namespace

void NetworkArchitecture::validate() const {
    if (input_dim == 0) throw InputError("architecture input_dim must be >= 1");
    if (hidden_dims.empty() || hidden_dims.size() > 2) {
        throw InputError("architecture must have 1 or 2 hidden layers, got " +
                         std::to_string(hidden_dims.size()));
    }
    for (auto h : hidden_dims) {
        if (h == 0) throw InputError("hidden layer width must be >= 1");
    }
}

std::size_t NetworkArchitecture::parameter_count() const {
    std::size_t total = 0;
    std::size_t fan_in = input_dim;
    for (auto h : hidden_dims) {
        total += (fan_in + 1) * h;
        fan_in = h;
    }
    return total + fan_in + 1;
}

std::vector<LayerSlice> weight_layout(const NetworkArchitecture& arch) {
    std::vector<LayerSlice> layout;
    std::size_t offset = 0;
    std::size_t fan_in = arch.input_dim;
    auto push = [&](std::size_t fan_out) {
        LayerSlice s{fan_in, fan_out, offset, offset + fan_in * fan_out};
        offset = s.end();
        layout.push_back(s);
        fan_in = fan_out;
    };
    for (auto h : arch.hidden_dims) push(h);
    push(1);
    return layout;
}

WeightVector zero_weights(const NetworkArchitecture& arch) {
    arch.validate();
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count())),
            weight_layout(arch)};
}

WeightVector init_weights(const NetworkArchitecture& arch, std::uint64_t seed) {
    WeightVector w = zero_weights(arch);
    std::mt19937_64 rng(seed);
    for (const auto& s : w.layout) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s.fan_in)));
        for (std::size_t i = 0; i < s.fan_in * s.fan_out; ++i) {
            w.values[static_cast<Eigen::Index>(s.weight_offset + i)] = dist(rng);
        }
    }
    return w;
}

Eigen::VectorXd forward_batch(const NetworkArchitecture& arch, const WeightVector& weights,
                              const Eigen::MatrixXd& X) {
    check_weights(arch, weights);
    check_inputs(arch, X);
    auto acts = hidden_pass(weights, X, nullptr);
    return output_layer(weights, acts.back());
}

double forward(const NetworkArchitecture& arch, const WeightVector& weights,
               std::span<const double> x) {
    if (x.size() != arch.input_dim) {
        throw InputError("input has " + std::to_string(x.size()) + " features, network expects " +
                         std::to_string(arch.input_dim));
    }
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    return forward_batch(arch, weights, row)[0];
}

Eigen::MatrixXd last_hidden_activations(const NetworkArchitecture& arch,
                                        const WeightVector& weights, const Eigen::MatrixXd& X) {
    check_weights(arch, weights);
    check_inputs(arch, X);
    auto acts = hidden_pass(weights, X, nullptr);
    return std::move(acts.back());
}

LossAndGradient loss_and_gradient(const NetworkArchitecture& arch, const WeightVector& weights,
                                  const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double weight_decay) {
    check_weights(arch, weights);
    check_inputs(arch, X);
    if (X.rows() == 0) throw InputError("loss_and_gradient: empty batch");
    if (y.size() != X.rows()) throw InputError("loss_and_gradient: label count mismatch");

    const double n = static_cast<double>(X.rows());
    std::vector<Eigen::MatrixXd> pre;
    auto acts = hidden_pass(weights, X, &pre);
    const Eigen::VectorXd residual = output_layer(weights, acts.back()) - y;

    LossAndGradient out;
    out.loss = residual.squaredNorm() / n + 0.5 * weight_decay * weights.values.squaredNorm();
    out.gradient = Eigen::VectorXd::Zero(weights.values.size());

    Eigen::MatrixXd delta = (2.0 / n) * residual;  // d loss / d output, n x 1
    for (std::size_t l = weights.layout.size(); l-- > 0;) {
        const auto& s = weights.layout[l];
        Eigen::Map<RowMajorMatrix> g_w(out.gradient.data() + s.weight_offset,
                                       static_cast<Eigen::Index>(s.fan_out),
                                       static_cast<Eigen::Index>(s.fan_in));
        g_w.noalias() = delta.transpose() * acts[l];
        out.gradient.segment(static_cast<Eigen::Index>(s.bias_offset),
                             static_cast<Eigen::Index>(s.fan_out)) = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * weight_block(weights, s);
            delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
        }
    }
    if (weight_decay != 0.0) out.gradient += weight_decay * weights.values;
    return out;
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InputError("training.learning_rate must be > 0");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw InputError("training.weight_decay must be >= 0");
    }
    if (batch_size == 0) throw InputError("training.batch_size must be >= 1");
    if (max_epochs == 0) throw InputError("training.max_epochs must be >= 1");
    if (patience > max_epochs) throw InputError("training.patience must not exceed max_epochs");
}

AdamState AdamState::zeros(std::size_t n) {
    const auto len = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Zero(len), Eigen::VectorXd::Zero(len), 0};
}

void adam_step(WeightVector& weights, AdamState& state, const Eigen::VectorXd& gradient,
               const TrainingConfig& config) {
    if (state.first_moment.size() != gradient.size() ||
        state.second_moment.size() != gradient.size() || weights.values.size() != gradient.size()) {
        throw InputError("adam_step: state, weights and gradient sizes differ");
    }
    state.step += 1;
    state.first_moment = kAdamBeta1 * state.first_moment + (1.0 - kAdamBeta1) * gradient;
    state.second_moment =
        kAdamBeta2 * state.second_moment + (1.0 - kAdamBeta2) * gradient.cwiseAbs2();
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    if (config.decoupled_weight_decay && config.weight_decay != 0.0) {
        weights.values -= config.learning_rate * config.weight_decay * weights.values;
    }
    weights.values.array() -= config.learning_rate * (state.first_moment.array() / c1) /
                              ((state.second_moment.array() / c2).sqrt() + kAdamEpsilon);
}

double mean_squared_error(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels) {
    if (predictions.size() != labels.size() || labels.size() == 0) {
        throw InputError("mean_squared_error: sizes differ or are empty");
    }
    return (predictions - labels).squaredNorm() / static_cast<double>(labels.size());
}

TrainedNetwork train(const NetworkArchitecture& arch, const TrainingConfig& config,
                     const Dataset& train_set, const Dataset& val_set) {
    arch.validate();
    config.validate();
    if (train_set.empty() || val_set.empty()) {
        throw InputError("train: training and validation sets must be non-empty");
    }
    check_inputs(arch, train_set.features);
    check_inputs(arch, val_set.features);

    TrainedNetwork result;
    result.architecture = arch;
    result.seed = config.seed;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    WeightVector w = init_weights(arch, config.seed);
    AdamState state = AdamState::zeros(w.size());
    // Shuffling draws from a stream separate from initialization.
    std::seed_seq shuffle_seed{static_cast<std::uint32_t>(config.seed),
                               static_cast<std::uint32_t>(config.seed >> 32), 0x5eedu};
    std::mt19937_64 rng(shuffle_seed);

    const std::size_t n = train_set.size();
    const std::size_t batch = std::min(config.batch_size, n);
    const double grad_decay = config.decoupled_weight_decay ? 0.0 : config.weight_decay;
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            Eigen::MatrixXd xb = train_set.features(rows, Eigen::all);
            Eigen::VectorXd yb = train_set.labels(rows);
            auto lg = loss_and_gradient(arch, w, xb, yb, grad_decay);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
                throw TrainingError("training diverged (non-finite loss) at epoch " +
                                        std::to_string(epoch),
                                    static_cast<int>(epoch));
            }
            adam_step(w, state, lg.gradient, config);
        }
        const double val = mean_squared_error(forward_batch(arch, w, val_set.features), val_set.labels);
        if (!std::isfinite(val)) {
            throw TrainingError("validation loss became non-finite at epoch " + std::to_string(epoch),
                                static_cast<int>(epoch));
        }
        result.val_history.push_back(val);
        result.epochs_run = epoch;
        if (val < result.best_val_loss) {
            result.best_val_loss = val;
            result.weights = w;
            since_best = 0;
        } else if (++since_best > config.patience) {
            break;
        }
    }
    return result;
}

}  // namespace fvbnn
