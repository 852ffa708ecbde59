#pragma once

#include "dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fvbnn {

/// Which CSV columns play which role. A sequence column, when set, is
/// one-hot encoded into the feature matrix (feature_columns must then be
/// empty).
struct CsvSchema {
    std::string id_column = "id";
    std::string label_column = "label";
    std::vector<std::string> feature_columns;
    std::string sequence_column;
    std::string alphabet;
    std::vector<std::string> aux_columns;
    std::string group_column;
};

/// Throws DataError naming the missing column, or citing the 1-based data
/// row of an unparsable / non-finite value. IoError if the file is missing.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Raw string values of one column, in row order.
std::vector<std::string> read_csv_column(const std::filesystem::path& path, const std::string& column);

/// Writes the columns named by `schema` so that load_csv(path, schema)
/// reproduces the dataset bit for bit.
void write_csv(const std::filesystem::path& path, const Dataset& data, const CsvSchema& schema);

/// n x (L * |alphabet|) indicator matrix, position-major.
Eigen::MatrixXd one_hot_encode(std::span<const std::string> sequences, std::string_view alphabet);
std::vector<std::string> one_hot_decode(const Eigen::MatrixXd& encoded, std::string_view alphabet);

std::size_t hamming_distance(std::string_view a, std::string_view b);

/// Row indices of a train / validation / test partition.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// True when the three index sets are disjoint and together cover 0..n-1.
bool is_partition(const Split& split, std::size_t n);

/// Label > threshold counts as fit. Returns ceil(n/2) fit and floor(n/2)
/// unfit rows drawn from `within`, sorted.
std::vector<std::size_t> balanced_sample(const Dataset& data, double fitness_threshold,
                                         std::span<const std::size_t> within, std::size_t n_sample,
                                         std::uint64_t seed);

struct HammingSplitSpec {
    std::string wildtype_id;
    std::size_t radius = 2;
    std::size_t n_sample = 3000;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    // When set, the sample is class-balanced around this fitness threshold.
    std::optional<double> balance_threshold;
};

/// Sample rows within `radius` mutations of the wild type, split them
/// train/val, and put every other row in the test set.
Split hamming_radius_split(const Dataset& data, const HammingSplitSpec& spec);

struct FractionSplitSpec {
    double train_fraction = 0.6;
    double val_fraction_of_train = 0.2;
    std::uint64_t seed = 0;
    bool by_group = false;  // keep rows of one group together
};

Split fraction_split(const Dataset& data, const FractionSplitSpec& spec);

/// Tags "train" / "val" / "test" per row.
Split precomputed_split(std::span<const std::string> tags);

/// 0.3 sin(pi x / 2) + 0.4 sin(pi x)
double synthetic_1d_truth(double x);

struct Synthetic1dSpec {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double x_min = -2.0;
    double x_max = 2.0;
    double noise_sd = 0.25;
    double train_fraction = 0.8;
};

struct Synthetic1d {
    Dataset data;
    Split split;  // test is empty
};

Synthetic1d generate_synthetic_1d(const Synthetic1dSpec& spec);

/// Toy protein-style fitness landscape over every sequence of `length`
/// letters. Mutations away from the wild type (all first letters) mostly
/// destabilize; unstable sequences have fitness near zero. The aux column
/// "stability" is a noisy energy proxy where larger means less stable.
struct LandscapeSpec {
    std::size_t length = 6;
    std::string alphabet = "ACDE";
    std::uint64_t seed = 0;
    double noise_sd = 0.05;
    double proxy_noise_sd = 0.15;
};

Dataset generate_landscape(const LandscapeSpec& spec);

}  // namespace fvbnn
