#pragma once

// Config-driven experiment runner: dataset + split preparation, model
// fitting (backend, noise, prior hyperparameters), evaluation, method
// comparison and 1-D plots. Every random choice derives from the seeds in
// the config.

#include "baselines.hpp"
#include "data.hpp"
#include "empirical_bayes.hpp"
#include "fusion.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fvbnn {

struct DataSource {
    enum class Kind { Csv, Synthetic1d, Landscape };
    Kind kind = Kind::Synthetic1d;
    // Generator seed; follows the top-level seed when unset.
    std::optional<std::uint64_t> seed;
    std::filesystem::path path;  // Csv
    CsvSchema schema;            // Csv
    Synthetic1dSpec synthetic;
    LandscapeSpec landscape;
};

struct SplitSpec {
    enum class Kind {
        Generated,  // the train/val split produced by the synthetic 1-D generator
        Hamming,
        Fraction,
        Column,  // per-row tags in a CSV column
    };
    Kind kind = Kind::Generated;
    HammingSplitSpec hamming;
    FractionSplitSpec fraction;
    std::string column;
};

enum class BackendKind { Network, Ensemble, Laplace };

struct BackendSpec {
    BackendKind kind = BackendKind::Ensemble;
    std::size_t members = kDefaultEnsembleSize;
    std::vector<double> precision_grid = default_precision_grid();
};

enum class PriorType { None, Constant, Gated, Scaled };

struct PriorSpec {
    PriorType type = PriorType::None;
    std::string column;
    double mean = 0.0;
    // Gated: fixed threshold, or fitted by ROC-AUC against label > fitness_threshold.
    std::optional<double> threshold;
    double fitness_threshold = 0.5;
    // Scaled: fixed coefficients, or fitted by least squares on the training set.
    std::optional<double> slope;
    std::optional<double> intercept;
    // Fixed variance (Constant/Scaled) or variances (Gated: below, above);
    // otherwise chosen by grid search on the validation set.
    std::vector<double> variance;
    std::vector<double> variance_grid;  // empty: default grid from the label variance
};

enum class MethodKind { FunctionValue, Stacking };

struct MethodSpec {
    std::string name;
    MethodKind kind = MethodKind::FunctionValue;
    BackendSpec backend;
    PriorSpec prior;
};

struct ArchitectureSearchSpec {
    bool enabled = false;
    std::vector<NetworkArchitecture> candidates;  // empty: default grid
    std::vector<double> weight_decays = default_weight_decay_grid();
    std::size_t folds = 5;
};

struct PlotSpec {
    double x_min = -6.0;
    double x_max = 6.0;
    std::size_t points = 241;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DataSource data;
    SplitSpec split;
    NetworkArchitecture architecture;
    ArchitectureSearchSpec architecture_search;
    TrainingConfig training;
    BackendSpec backend;
    PriorSpec prior;
    std::size_t n_splits = 10;
    std::vector<MethodSpec> methods;  // compare only
    PlotSpec plot;
};

/// Parses and validates a config. Errors are ConfigError messages that start
/// with the offending field path, e.g. "backend.kind: ...". Relative dataset
/// paths are resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json prior_to_json(const FunctionValuePrior& prior);
FunctionValuePrior prior_from_json(const nlohmann::json& j);

std::string backend_name(BackendKind kind);

nlohmann::json data_schema_to_json(const CsvSchema& schema);
CsvSchema data_schema_from_json(const nlohmann::json& j);

/// The configured methods, or NN / BNN / fv-BNN (zero prior), plus the
/// score prior and stacking when the config declares a score prior.
std::vector<MethodSpec> resolved_methods(const ExperimentConfig& cfg);

struct PreparedData {
    Dataset all;
    Split split;
    Dataset train;
    Dataset val;
    Dataset test;
    CsvSchema schema;  // columns written to / read from split CSVs
};

/// Loads or generates the dataset and applies split number `split_index`
/// (split seed = config seed + split_index).
PreparedData prepare_data(const ExperimentConfig& cfg, std::size_t split_index = 0);

/// Seed used for network training on split `split_index`.
std::uint64_t training_seed(const ExperimentConfig& cfg, std::size_t split_index);

struct FittedBackend {
    Backend backend;
    BackendKind kind = BackendKind::Ensemble;
    NetworkArchitecture architecture;
    double weight_decay = 0.0;
    double noise_variance = 0.0;  // validation MSE of the backend mean
    std::optional<ArchitectureSearchResult> architecture_search;
    std::vector<PrecisionCell> precision_cells;
};

FittedBackend fit_backend(const ExperimentConfig& cfg, const BackendSpec& spec, const Dataset& train_set,
                          const Dataset& val_set, std::uint64_t seed);

struct FittedModel {
    FittedBackend backend;
    MethodKind method = MethodKind::FunctionValue;
    FunctionValuePrior prior;
    std::optional<PriorSearchResult> prior_search;
    std::optional<StabilityGate> gate;
    std::optional<LinearScaling> scaling;
    std::optional<StackingModel> stacker;
};

/// Fits prior hyperparameters (and the stacker) on top of a trained backend.
FittedModel fit_method(const MethodSpec& method, FittedBackend backend, const Dataset& train_set,
                       const Dataset& val_set);

/// Per-row signal the stacker combines with the BNN mean: the prior mean,
/// or for a gated prior the indicator score > threshold.
std::vector<double> stacking_signal(const FunctionValuePrior& prior, const Dataset& data);

std::vector<PosteriorPredictive> predict(const FittedModel& model, const Dataset& data);

struct MetricSummary {
    std::size_t n = 0;
    double log_likelihood = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
};

MetricSummary summarize(std::span<const PosteriorPredictive> predictions, std::span<const double> labels);

/// Writes backend files, prior.json, search_report.csv and manifest.json;
/// the keys of `extra` are merged into the manifest.
void save_model(const FittedModel& model, const std::filesystem::path& dir, const nlohmann::json& extra = {});
FittedModel load_model(const std::filesystem::path& dir);

/// Writes id, label, mean, function_variance, noise_variance, total_variance.
void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       std::span<const PosteriorPredictive> predictions);

// ---------------------------------------------------------------- commands

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<BackendKind> backend;
    std::optional<std::size_t> n_splits;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides);

/// Trains the configured backend and prior; writes a model directory.
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Predictions and the LL/RMSE/MAE summary of a saved model on a CSV that
/// follows the model's data schema. Writes predictions.csv and metrics.csv.
void cmd_evaluate(const std::filesystem::path& model_dir, const std::filesystem::path& data_path,
                  const std::filesystem::path& out_dir);

/// Runs every method on cfg.n_splits seeded splits and writes per-split
/// predictions, per_split.csv, comparison.csv/.md and wilcoxon.csv.
void cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Writes <prefix>_band.csv, <prefix>_points.csv and <prefix>.svg.
void cmd_plot_1d(const std::filesystem::path& model_dir, const std::filesystem::path& out_prefix);

/// Config used by synth-demo when none is given: the 1-D regression task,
/// a two-hidden-layer network with a last-layer Laplace backend and a
/// zero-mean prior of variance 0.43^2.
ExperimentConfig synth_demo_config();

/// Trains on the synthetic 1-D task and plots: <out>/model, <out>/plot*.
void cmd_synth_demo(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fvbnn
