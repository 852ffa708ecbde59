#include "ensemble.hpp"
#include "error.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace fvbnn;

namespace {

Dataset wave(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(n), 1);
    d.labels.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u(rng);
        d.features(static_cast<Eigen::Index>(i), 0) = x;
        d.labels[static_cast<Eigen::Index>(i)] = std::sin(3.0 * x);
        d.ids.push_back("r" + std::to_string(i));
    }
    return d;
}

NetworkArchitecture small_arch() {
    NetworkArchitecture a;
    a.hidden_dims = {8};
    return a;
}

TrainingConfig quick_config(std::uint64_t seed) {
    TrainingConfig cfg;
    cfg.max_epochs = 20;
    cfg.learning_rate = 1e-2;
    cfg.seed = seed;
    return cfg;
}

TrainedNetwork constant_network(double bias, std::uint64_t seed) {
    TrainedNetwork net;
    net.architecture = small_arch();
    net.weights = zero_weights(net.architecture);
    net.weights.values[static_cast<Eigen::Index>(net.weights.layout.back().bias_offset)] = bias;
    net.seed = seed;
    return net;
}

}  // namespace

TEST_CASE("ensemble training") {
    const auto train_set = wave(60, 1);
    const auto val_set = wave(20, 2);
    SUBCASE("default size is five members seeded base + k") {
        const auto e = train_ensemble(small_arch(), quick_config(100), train_set, val_set);
        CHECK(e.size() == kDefaultEnsembleSize);
        CHECK(e.size() == 5);
        CHECK(e.seeds() == std::vector<std::uint64_t>{100, 101, 102, 103, 104});
    }
    SUBCASE("members are reproducible from their own seeds") {
        const auto e = train_ensemble(small_arch(), quick_config(40), train_set, val_set, 2);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto solo = train(small_arch(), quick_config(40 + k), train_set, val_set);
            CHECK(solo.weights.values == e.members()[k].weights.values);
        }
    }
    SUBCASE("a single member is rejected") {
        CHECK_THROWS_AS(train_ensemble(small_arch(), quick_config(0), train_set, val_set, 1), InputError);
    }
}

TEST_CASE("ensemble construction checks") {
    CHECK_THROWS_AS(TrainedEnsemble({constant_network(0.0, 1)}), InputError);
    CHECK_THROWS_AS(TrainedEnsemble({constant_network(0.0, 1), constant_network(1.0, 1)}), InputError);
    auto other = constant_network(0.0, 2);
    other.architecture.hidden_dims = {9};
    other.weights = zero_weights(other.architecture);
    CHECK_THROWS_AS(TrainedEnsemble({constant_network(0.0, 1), other}), InputError);
}

TEST_CASE("ensemble moments") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(7, 1);
    SUBCASE("identical members have zero variance") {
        const TrainedEnsemble e({constant_network(0.4, 1), constant_network(0.4, 2), constant_network(0.4, 3)});
        for (const auto& m : predict_moments(e, X)) {
            CHECK(m.mean == doctest::Approx(0.4));
            CHECK(m.variance == 0.0);
        }
    }
    SUBCASE("outputs 1 and 3 give mean 2 and unbiased variance 2") {
        const TrainedEnsemble e({constant_network(1.0, 1), constant_network(3.0, 2)});
        for (const auto& m : predict_moments(e, X)) {
            CHECK(m.mean == 2.0);
            CHECK(m.variance == 2.0);
        }
    }
    SUBCASE("matches direct statistics of member outputs") {
        const auto train_set = wave(40, 3);
        const auto e = train_ensemble(small_arch(), quick_config(7), train_set, train_set, 4);
        const Eigen::MatrixXd grid = Eigen::VectorXd::LinSpaced(25, -2.0, 2.0);
        const auto moments = predict_moments(e, grid);
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            std::vector<double> outs;
            for (const auto& member : e.members()) outs.push_back(member.predict(Eigen::MatrixXd(grid.row(i)))[0]);
            const auto idx = static_cast<std::size_t>(i);
            CHECK(std::abs(moments[idx].mean - oracle::sample_mean(outs)) < 1e-12);
            CHECK(std::abs(moments[idx].variance - oracle::sample_variance(outs)) < 1e-12);
        }
    }
}

TEST_CASE("ensemble save and load round trip") {
    testing::TempDir dir("ensemble");
    const auto train_set = wave(30, 5);
    const auto e = train_ensemble(small_arch(), quick_config(3), train_set, train_set, 3);
    save_ensemble(e, dir.path());
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    for (int k = 0; k < 3; ++k) CHECK(std::filesystem::exists(dir / ("member_" + std::to_string(k) + ".bin")));
    const auto back = load_ensemble(dir.path());
    REQUIRE(back.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(back.members()[k].weights.values == e.members()[k].weights.values);
    CHECK(back.seeds() == e.seeds());
}
