#include "ensemble.hpp"

#include "error.hpp"
#include "serialize.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace fvbnn {

namespace {

std::string member_file(std::size_t k) { return "member_" + std::to_string(k) + ".bin"; }

}  // namespace

TrainedEnsemble::TrainedEnsemble(std::vector<TrainedNetwork> members) : members_(std::move(members)) {
    if (members_.size() < 2) throw InputError("an ensemble needs at least 2 members");
    std::set<std::uint64_t> seen;
    for (const auto& m : members_) {
        if (!(m.architecture == members_.front().architecture)) {
            throw InputError("ensemble members must share one architecture");
        }
        if (!seen.insert(m.seed).second) {
            throw InputError("ensemble member seeds must be distinct (repeated " +
                             std::to_string(m.seed) + ")");
        }
    }
    std::sort(members_.begin(), members_.end(),
              [](const TrainedNetwork& a, const TrainedNetwork& b) { return a.seed < b.seed; });
}

std::vector<std::uint64_t> TrainedEnsemble::seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& m : members_) out.push_back(m.seed);
    return out;
}

Eigen::MatrixXd TrainedEnsemble::member_outputs(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(members_.size()));
    for (std::size_t k = 0; k < members_.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = members_[k].predict(X);
    }
    return out;
}

TrainedEnsemble train_ensemble(const NetworkArchitecture& arch, const TrainingConfig& config,
                               const Dataset& train_set, const Dataset& val_set,
                               std::size_t members) {
    if (members < 2) throw InputError("train_ensemble: K must be >= 2, got " + std::to_string(members));
    std::vector<TrainedNetwork> nets;
    nets.reserve(members);
    for (std::size_t k = 0; k < members; ++k) {
        TrainingConfig member_cfg = config;
        member_cfg.seed = config.seed + k;
        try {
            nets.push_back(train(arch, member_cfg, train_set, val_set));
        } catch (const TrainingError& e) {
            throw TrainingError("ensemble member " + std::to_string(k) + ": " + e.what(), e.epoch(),
                                static_cast<int>(k));
        }
    }
    return TrainedEnsemble(std::move(nets));
}

std::vector<GaussianPrediction> predict_moments(const TrainedEnsemble& ensemble,
                                                const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd outputs = ensemble.member_outputs(X);
    const auto k = static_cast<double>(outputs.cols());
    std::vector<GaussianPrediction> result(static_cast<std::size_t>(outputs.rows()));
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        // Deviations from the first member, so identical members give
        // exactly their common output and zero variance.
        const double shift = outputs(i, 0);
        double sum = 0.0;
        for (Eigen::Index m = 0; m < outputs.cols(); ++m) sum += outputs(i, m) - shift;
        const double offset = sum / k;
        const double mean = shift + offset;
        double ss = 0.0;
        for (Eigen::Index m = 0; m < outputs.cols(); ++m) {
            const double d = outputs(i, m) - shift - offset;
            ss += d * d;
        }
        result[static_cast<std::size_t>(i)] = {mean, ss / (k - 1.0)};
    }
    return result;
}

void save_ensemble(const TrainedEnsemble& ensemble, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["kind"] = "deep_ensemble";
    manifest["architecture"] = architecture_to_json(ensemble.architecture());
    manifest["members"] = ensemble.size();
    manifest["seeds"] = ensemble.seeds();
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        list.push_back(save_network(ensemble.members()[k], dir / member_file(k)));
    }
    manifest["networks"] = list;
    write_json_file(dir / "manifest.json", manifest);
}

TrainedEnsemble load_ensemble(const std::filesystem::path& dir) {
    const auto manifest = read_json_file(dir / "manifest.json");
    std::vector<TrainedNetwork> nets;
    try {
        for (const auto& meta : manifest.at("networks")) {
            nets.push_back(load_network(meta, dir / meta.at("weights_file").get<std::string>()));
        }
        if (nets.size() != manifest.at("members").get<std::size_t>()) {
            throw DataError(dir.string() + ": manifest member count disagrees with network list");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + "/manifest.json: " + e.what());
    }
    return TrainedEnsemble(std::move(nets));
}

}  // namespace fvbnn
