#pragma once

#include "nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fvbnn {

/// Raw little-endian float64 array, no header.
void write_f64_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Shortest text that parses back to exactly `value` ("inf"/"-inf"/"nan" for
/// non-finite values).
std::string format_double(double value);

/// JSON has no infinity; +inf is written as the string "inf".
nlohmann::json double_to_json(double value);
double double_from_json(const nlohmann::json& j);

nlohmann::json architecture_to_json(const NetworkArchitecture& arch);
NetworkArchitecture architecture_from_json(const nlohmann::json& j);

nlohmann::json training_config_to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const nlohmann::json& j, const TrainingConfig& defaults);

/// Network metadata as JSON; weights go to `weights_path`.
nlohmann::json save_network(const TrainedNetwork& net, const std::filesystem::path& weights_path);
TrainedNetwork load_network(const nlohmann::json& meta, const std::filesystem::path& weights_path);

}  // namespace fvbnn
