#pragma once

#include "gaussian.hpp"
#include "nn.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fvbnn {

inline constexpr std::size_t kDefaultEnsembleSize = 5;

/// Deep ensemble of point-predicting networks. Members are kept sorted by
/// seed so that reductions over members do not depend on insertion order.
class TrainedEnsemble {
public:
    /// Throws InputError for fewer than two members, mixed architectures or
    /// repeated seeds.
    explicit TrainedEnsemble(std::vector<TrainedNetwork> members);

    const std::vector<TrainedNetwork>& members() const { return members_; }
    const NetworkArchitecture& architecture() const { return members_.front().architecture; }
    std::size_t size() const { return members_.size(); }
    std::vector<std::uint64_t> seeds() const;

    /// Member outputs, one column per member (in seed order), one row per x.
    Eigen::MatrixXd member_outputs(const Eigen::MatrixXd& X) const;

private:
    std::vector<TrainedNetwork> members_;
};

/// Trains `members` networks with seeds config.seed + k. Training errors are
/// rethrown with the member index attached.
TrainedEnsemble train_ensemble(const NetworkArchitecture& arch, const TrainingConfig& config,
                               const Dataset& train_set, const Dataset& val_set,
                               std::size_t members = kDefaultEnsembleSize);

/// Per-point mean and unbiased (n - 1) sample variance over members.
std::vector<GaussianPrediction> predict_moments(const TrainedEnsemble& ensemble,
                                                const Eigen::MatrixXd& X);

/// manifest.json + member_<k>.bin (little-endian float64 weights).
void save_ensemble(const TrainedEnsemble& ensemble, const std::filesystem::path& dir);
TrainedEnsemble load_ensemble(const std::filesystem::path& dir);

}  // namespace fvbnn
