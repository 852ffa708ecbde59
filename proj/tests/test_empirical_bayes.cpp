#include "empirical_bayes.hpp"
#include "error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace fvbnn;

namespace {

struct ValProblem {
    Dataset val;
    std::vector<GaussianPrediction> bnn;
    double noise = 0.01;
};

// Validation labels = truth + small noise; the BNN is biased with variance 1.
ValProblem planted_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    ValProblem p;
    const int n = 40;
    p.val.features.resize(n, 1);
    p.val.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        p.val.features(i, 0) = i;
        p.val.labels[i] = 0.1 * normal(rng);
        p.val.ids.push_back("v" + std::to_string(i));
        p.bnn.push_back({3.0 + normal(rng), 1.0});
    }
    p.val.aux["s"] = std::vector<double>(n);
    for (int i = 0; i < n; ++i) p.val.aux["s"][static_cast<std::size_t>(i)] = i % 2 ? 1.0 : -1.0;
    return p;
}

double objective(const FunctionValuePrior& prior, const ValProblem& p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < p.bnn.size(); ++i) {
        const auto g = evaluate_prior(prior, p.val, i);
        const auto [m, v] = oracle::gaussian_product(p.bnn[i].mean, p.bnn[i].variance, g.mean, g.variance);
        ll += oracle::gaussian_log_density(p.val.labels[static_cast<Eigen::Index>(i)], m, v + p.noise);
    }
    return ll / static_cast<double>(p.bnn.size());
}

}  // namespace

TEST_CASE("prior variance grid search") {
    const auto p = planted_problem(3);
    SUBCASE("selects the argmax of an independently recomputed objective") {
        const std::vector<double> grid{0.01, 1.0, 100.0};
        const auto r = grid_search_prior(ConstantFamily{0.0}, {grid}, p.bnn, p.val, p.noise);
        REQUIRE(r.cells.size() == 3);
        std::size_t arg = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double ll = objective(ConstantPrior{0.0, grid[i]}, p);
            CHECK(r.cells[i].objective == doctest::Approx(ll).epsilon(1e-12));
            if (ll > objective(ConstantPrior{0.0, grid[arg]}, p)) arg = i;
        }
        CHECK(r.best_index == arg);
        CHECK(std::get<ConstantPrior>(r.prior).variance == grid[arg]);
        CHECK(arg == 0);
    }
    SUBCASE("zero BNN variance makes every cell tie; the largest variance wins") {
        auto q = p;
        for (auto& b : q.bnn) b.variance = 0.0;
        const auto r = grid_search_prior(ConstantFamily{0.0}, {{1.0, 0.01, 100.0}}, q.bnn, q.val, q.noise);
        for (const auto& c : r.cells) CHECK(c.objective == r.cells.front().objective);
        CHECK(std::get<ConstantPrior>(r.prior).variance == 100.0);
    }
    SUBCASE("two-parameter gated grid is a full Cartesian product") {
        const std::vector<double> g{0.1, 1.0, 10.0};
        const auto r = grid_search_prior(GatedFamily{"s", 0.0, 0.0}, {g, g}, p.bnn, p.val, p.noise);
        CHECK(r.cells.size() == 9);
        double best = -1e300;
        for (const auto& c : r.cells) best = std::max(best, c.objective);
        CHECK(r.best_log_likelihood == best);
        CHECK(r.cells[r.best_index].objective == best);
        const auto& gp = std::get<BinaryGatedPrior>(r.prior);
        CHECK(objective(gp, p) == doctest::Approx(best).epsilon(1e-12));
    }
    SUBCASE("configuration errors") {
        CHECK_THROWS_AS(grid_search_prior(ConstantFamily{}, {{}}, p.bnn, p.val, p.noise), ConfigError);
        CHECK_THROWS_AS(grid_search_prior(ConstantFamily{}, {{1.0}, {1.0}}, p.bnn, p.val, p.noise), ConfigError);
        CHECK_THROWS_AS(grid_search_prior(ConstantFamily{}, {{-1.0}}, p.bnn, p.val, p.noise), ConfigError);
    }
    SUBCASE("default grid spans 1e-3 to 1e3 times the label variance") {
        const auto g = default_variance_grid(2.0);
        REQUIRE(g.size() == 13);
        CHECK(g.front() == doctest::Approx(2e-3));
        CHECK(g.back() == doctest::Approx(2e3));
    }
}

TEST_CASE("architecture grid search") {
    Dataset data;
    data.features = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
    data.labels = Eigen::VectorXd::Zero(20);
    for (int i = 0; i < 20; ++i) data.ids.push_back("r" + std::to_string(i));
    const CrossValidation cv{5, 1};

    SUBCASE("a single candidate is returned unconditionally") {
        NetworkArchitecture a;
        const auto r = grid_search_architecture(std::vector<NetworkArchitecture>{a}, std::vector<double>{1e-4}, cv,
                                                data, [](auto&&...) { return 3.0; });
        CHECK(r.architecture == a);
        CHECK(r.weight_decay == 1e-4);
    }
    SUBCASE("the appendix grid evaluates 18 configurations") {
        const auto candidates = default_architecture_grid(1);
        const auto decays = default_weight_decay_grid();
        CHECK(candidates.size() == 6);
        CHECK(decays == std::vector<double>{1e-2, 1e-4, 1e-6});
        std::set<std::pair<std::vector<std::size_t>, double>> seen;
        std::size_t calls = 0;
        const auto r = grid_search_architecture(candidates, decays, cv, data,
                                                [&](const NetworkArchitecture& a, double wd, const Dataset& tr,
                                                    const Dataset& va) {
                                                    ++calls;
                                                    CHECK(tr.size() + va.size() == data.size());
                                                    seen.insert({a.hidden_dims, wd});
                                                    return 1.0;
                                                });
        CHECK(seen.size() == 18);
        CHECK(calls == 18 * cv.folds);
        CHECK(r.cells.size() == 18);
        // all tie: fewest parameters, then the larger decay
        CHECK(r.architecture.hidden_dims == std::vector<std::size_t>{100});
        CHECK(r.weight_decay == 1e-2);
    }
    SUBCASE("a planted candidate is found") {
        const auto candidates = default_architecture_grid(1);
        const std::vector<std::size_t> planted{200, 200};
        const auto r = grid_search_architecture(
            candidates, default_weight_decay_grid(), cv, data,
            [&](const NetworkArchitecture& a, double wd, const Dataset&, const Dataset&) {
                return a.hidden_dims == planted && wd == 1e-4 ? 0.0 : 1.0 + static_cast<double>(a.parameter_count()) * 1e-9;
            });
        CHECK(r.architecture.hidden_dims == planted);
        CHECK(r.weight_decay == 1e-4);
        CHECK(r.mean_val_mse == 0.0);
    }
    SUBCASE("fold count must fit the data") {
        NetworkArchitecture a;
        CHECK_THROWS_AS(grid_search_architecture(std::vector<NetworkArchitecture>{a}, std::vector<double>{1e-4},
                                                 CrossValidation{50, 0}, data, [](auto&&...) { return 0.0; }),
                        ConfigError);
        CHECK_THROWS_AS(grid_search_architecture(std::vector<NetworkArchitecture>{}, std::vector<double>{1e-4}, cv,
                                                 data, [](auto&&...) { return 0.0; }),
                        ConfigError);
    }
}
