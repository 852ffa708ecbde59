#include "serialize.hpp"

#include "error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fvbnn {

void write_f64_file(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (std::size_t b = 0; b < 8; ++b) {
            bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
        }
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<double> read_f64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % 8 != 0) {
        throw DataError(path.string() + ": size is not a multiple of 8 bytes");
    }
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(bits);
    }
    return values;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, res.ptr};
}

nlohmann::json double_to_json(double value) {
    if (std::isfinite(value)) return value;
    return format_double(value);
}

double double_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity") return INFINITY;
        if (s == "-inf") return -INFINITY;
    }
    throw ConfigError("expected a number, got " + j.dump());
}

nlohmann::json architecture_to_json(const NetworkArchitecture& arch) {
    return {{"input_dim", arch.input_dim}, {"hidden_dims", arch.hidden_dims}, {"activation", "relu"}};
}

NetworkArchitecture architecture_from_json(const nlohmann::json& j) {
    NetworkArchitecture arch;
    try {
        arch.input_dim = j.value("input_dim", std::size_t{1});
        if (j.contains("hidden_dims")) arch.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        if (j.value("activation", std::string("relu")) != "relu") {
            throw ConfigError("architecture.activation: only \"relu\" is supported");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("architecture: ") + e.what());
    }
    return arch;
}

nlohmann::json training_config_to_json(const TrainingConfig& cfg) {
    return {{"learning_rate", cfg.learning_rate},
            {"weight_decay", cfg.weight_decay},
            {"batch_size", cfg.batch_size},
            {"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"seed", cfg.seed},
            {"decoupled_weight_decay", cfg.decoupled_weight_decay}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j, const TrainingConfig& defaults) {
    TrainingConfig cfg = defaults;
    try {
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
        cfg.patience = j.value("patience", cfg.patience);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.decoupled_weight_decay = j.value("decoupled_weight_decay", cfg.decoupled_weight_decay);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("training: ") + e.what());
    }
    return cfg;
}

nlohmann::json save_network(const TrainedNetwork& net, const std::filesystem::path& weights_path) {
    write_f64_file(weights_path, {net.weights.values.data(), net.weights.size()});
    return {{"architecture", architecture_to_json(net.architecture)},
            {"seed", net.seed},
            {"best_val_loss", net.best_val_loss},
            {"epochs_run", net.epochs_run},
            {"weights_file", weights_path.filename().string()}};
}

TrainedNetwork load_network(const nlohmann::json& meta, const std::filesystem::path& weights_path) {
    TrainedNetwork net;
    net.architecture = architecture_from_json(meta.at("architecture"));
    net.architecture.validate();
    net.seed = meta.value("seed", std::uint64_t{0});
    net.best_val_loss = meta.value("best_val_loss", 0.0);
    net.epochs_run = meta.value("epochs_run", std::size_t{0});
    const auto values = read_f64_file(weights_path);
    if (values.size() != net.architecture.parameter_count()) {
        throw DataError(weights_path.string() + ": holds " + std::to_string(values.size()) +
                        " weights, architecture needs " +
                        std::to_string(net.architecture.parameter_count()));
    }
    net.weights = zero_weights(net.architecture);
    net.weights.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return net;
}

}  // namespace fvbnn
