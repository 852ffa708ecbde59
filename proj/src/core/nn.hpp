#pragma once

// Small fully connected regression networks: ReLU hidden layers, one linear
// output unit, squared-error loss and Adam.

#include "dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fvbnn {

enum class Activation { ReLU };

struct NetworkArchitecture {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_dims{50};
    Activation activation = Activation::ReLU;

    /// Throws InputError unless input_dim >= 1 and there are 1 or 2 hidden
    /// layers of positive width.
    void validate() const;

    /// Sum over layers of (fan_in + 1) * fan_out.
    std::size_t parameter_count() const;

    std::size_t last_hidden_dim() const { return hidden_dims.back(); }

    friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

/// Where one dense layer lives inside the flat parameter array. The weight
/// block is fan_out x fan_in stored row-major, followed by fan_out biases.
struct LayerSlice {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    std::size_t end() const { return bias_offset + fan_out; }
};

std::vector<LayerSlice> weight_layout(const NetworkArchitecture& arch);

struct WeightVector {
    Eigen::VectorXd values;
    std::vector<LayerSlice> layout;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

/// Zero-valued weights with the layout of `arch`.
WeightVector zero_weights(const NetworkArchitecture& arch);

/// He fan-in Gaussian weights, zero biases. Deterministic in `seed`.
WeightVector init_weights(const NetworkArchitecture& arch, std::uint64_t seed);

double forward(const NetworkArchitecture& arch, const WeightVector& weights,
               std::span<const double> x);

/// Network outputs for every row of X.
Eigen::VectorXd forward_batch(const NetworkArchitecture& arch, const WeightVector& weights,
                              const Eigen::MatrixXd& X);

/// Activations of the last hidden layer for every row of X (n x width).
Eigen::MatrixXd last_hidden_activations(const NetworkArchitecture& arch,
                                        const WeightVector& weights, const Eigen::MatrixXd& X);

struct LossAndGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

/// loss = mean((f(x_i) - y_i)^2) + weight_decay * |theta|^2 / 2 and its exact
/// gradient.
LossAndGradient loss_and_gradient(const NetworkArchitecture& arch, const WeightVector& weights,
                                  const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double weight_decay);

struct TrainingConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    // AdamW-style decay applied to the weights instead of the gradient.
    bool decoupled_weight_decay = false;

    void validate() const;
};

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    std::uint64_t step = 0;

    static AdamState zeros(std::size_t n);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One bias-corrected Adam update of `weights` in place. With
/// config.decoupled_weight_decay the decay is applied here (scaled by the
/// learning rate); otherwise the caller folds it into `gradient`.
void adam_step(WeightVector& weights, AdamState& state, const Eigen::VectorXd& gradient,
               const TrainingConfig& config);

struct TrainedNetwork {
    NetworkArchitecture architecture;
    WeightVector weights;
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
    std::uint64_t seed = 0;
    // Validation MSE after every epoch that ran.
    std::vector<double> val_history;

    double predict(std::span<const double> x) const { return forward(architecture, weights, x); }
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        return forward_batch(architecture, weights, X);
    }
};

/// Mini-batch Adam with early stopping on validation MSE. Returns the weights
/// of the best validation epoch. Throws TrainingError on a non-finite loss.
TrainedNetwork train(const NetworkArchitecture& arch, const TrainingConfig& config,
                     const Dataset& train_set, const Dataset& val_set);

double mean_squared_error(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels);

}  // namespace fvbnn
