#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fvbnn {

using AuxColumns = std::map<std::string, std::vector<double>, std::less<>>;

/// Tabular regression data. Row i of `features` pairs with `labels[i]`,
/// `ids[i]`, every aux column entry i and, when present, `sequences[i]` and
/// `groups[i]`.
struct Dataset {
    std::vector<std::string> ids;
    Eigen::MatrixXd features;  // n x d
    Eigen::VectorXd labels;
    AuxColumns aux;
    std::vector<std::string> sequences;  // empty when the data has no sequences
    std::string alphabet;
    std::vector<std::string> groups;  // empty when no group column

    std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
    bool empty() const { return size() == 0; }
    bool has_sequences() const { return !sequences.empty(); }

    /// Throws DataError when row counts disagree, values are non-finite or
    /// sequences are ragged / use characters outside the alphabet.
    void validate() const;

    /// Rows in the given order (duplicates allowed).
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Index of the row with the given id, or throws DataError.
    std::size_t row_of(std::string_view id) const;

    std::vector<double> label_vector() const {
        return {labels.data(), labels.data() + labels.size()};
    }
};

}  // namespace fvbnn
