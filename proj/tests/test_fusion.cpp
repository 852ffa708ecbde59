#include "error.hpp"
#include "fusion.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace fvbnn;

TEST_CASE("Gaussian fusion") {
    SUBCASE("equal precisions average the means") {
        const auto f = fuse({2.0, 1.0}, {0.0, 1.0});
        CHECK(f.mean == 1.0);
        CHECK(f.variance == 0.5);
    }
    SUBCASE("precision-weighted average") {
        const auto f = fuse({2.0, 4.0}, {0.0, 1.0});
        CHECK(f.mean == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(f.variance == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("an infinite prior variance returns the BNN moments") {
        for (const GaussianPrediction bnn : {GaussianPrediction{-3.0, 0.2}, GaussianPrediction{5.5, 0.0}}) {
            CHECK(fuse(bnn, {100.0, kInfiniteVariance}) == bnn);
        }
    }
    SUBCASE("zero BNN variance keeps the BNN mean") {
        CHECK(fuse({1.25, 0.0}, {-7.0, 0.01}) == GaussianPrediction{1.25, 0.0});
    }
    SUBCASE("agrees with the convex-combination form") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> logv(-4.0, 4.0);
        for (int t = 0; t < 500; ++t) {
            const double m1 = normal(rng), m2 = normal(rng);
            const double v1 = std::exp(logv(rng)), v2 = std::exp(logv(rng));
            const auto f = fuse({m1, v1}, {m2, v2});
            const auto [m, v] = oracle::gaussian_product(m1, v1, m2, v2);
            CHECK(f.mean == doctest::Approx(m).epsilon(1e-12));
            CHECK(f.variance == doctest::Approx(v).epsilon(1e-12));
            CHECK(f.variance <= std::min(v1, v2));
            CHECK(f.mean >= std::min(m1, m2) - 1e-12);
            CHECK(f.mean <= std::max(m1, m2) + 1e-12);
        }
    }
    SUBCASE("invalid inputs") {
        CHECK_THROWS_AS(fuse({0.0, -1.0}, {0.0, 1.0}), InputError);
        CHECK_THROWS_AS(fuse({0.0, 1.0}, {0.0, 0.0}), InputError);
        CHECK_THROWS_AS(fuse({std::nan(""), 1.0}, {0.0, 1.0}), InputError);
    }
}

TEST_CASE("prior weight grows with the BNN variance") {
    CHECK(prior_weight(1.0, 1.0) == 0.5);
    CHECK(prior_weight(0.0, 1.0) == 0.0);
    double previous = 0.0;
    for (double v : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        const double w = prior_weight(v, 0.5);
        CHECK(w > previous);
        previous = w;
    }
}

TEST_CASE("posterior predictive adds the observation noise") {
    const auto p = posterior_predictive({1.0, 0.5}, 0.25);
    CHECK(p.mean == 1.0);
    CHECK(p.total_variance() == 0.75);
    const auto q = posterior_predictive({1.0, 0.5}, 0.0);
    CHECK(q.mean == 1.0);
    CHECK(q.total_variance() == 0.5);
    CHECK(posterior_predictive({2.0, 0.0}, 0.04).total_variance() == 0.04);
    CHECK_THROWS_AS(posterior_predictive({0.0, 1.0}, -1.0), InputError);
}

TEST_CASE("noise variance estimate") {
    CHECK(estimate_noise_variance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(estimate_noise_variance(std::vector<double>{0, 0}, std::vector<double>{1, -1}) == 1.0);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> normal;
    std::vector<double> p(10), y(10);
    for (int i = 0; i < 10; ++i) p[i] = normal(rng), y[i] = normal(rng);
    double s = 0.0;
    for (int i = 0; i < 10; ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
    CHECK(std::abs(estimate_noise_variance(p, y) - s / 10.0) < 1e-14);
    CHECK_THROWS_AS(estimate_noise_variance(std::vector<double>{}, std::vector<double>{}), InputError);
}

TEST_CASE("fused prediction over a backend") {
    // A trained-network backend with hand-set weights: f(x) = x for x > 0.
    TrainedNetwork net;
    net.architecture.hidden_dims = {1};
    net.weights = zero_weights(net.architecture);
    net.weights.values << 1.0, 0.0, 1.0, 0.0;
    Dataset d;
    d.features = Eigen::VectorXd::LinSpaced(5, 0.0, 2.0);
    d.labels = Eigen::VectorXd::Zero(5);
    d.ids = {"a", "b", "c", "d", "e"};
    d.aux["s"] = {1, 2, 3, 4, 5};

    SUBCASE("an uninformative prior gives the plain BNN plus noise") {
        const auto out = predict_fused(Backend{net}, ConstantPrior{}, 0.1, d);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].mean == d.features(static_cast<Eigen::Index>(i), 0));
            CHECK(out[i].function_variance == 0.0);
            CHECK(out[i].noise_variance == 0.1);
        }
    }
    SUBCASE("zero epistemic variance ignores any prior") {
        const auto out = predict_fused(Backend{net}, LinearScaledScorePrior{"s", 3.0, -1.0, 1e-3}, 0.1, d);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].mean == d.features(static_cast<Eigen::Index>(i), 0));
    }
    SUBCASE("far-field bound: a large BNN variance pulls the mean within one prior sd") {
        const double v_fv = 0.43 * 0.43;
        std::mt19937_64 rng(2);
        std::normal_distribution<double> normal;
        for (int t = 0; t < 200; ++t) {
            const double mu_bnn = 5.0 * normal(rng);
            const double v_bnn = v_fv * (100.0 + 50.0 * std::abs(normal(rng)));
            const auto f = fuse({mu_bnn, v_bnn}, {0.0, v_fv});
            const double bound = v_fv / (v_fv + v_bnn) * std::abs(mu_bnn);
            CHECK(std::abs(f.mean) <= bound * (1 + 1e-12));
            if (std::abs(mu_bnn) <= 43.0) CHECK(std::abs(f.mean) <= 0.43);
        }
    }
    SUBCASE("fuse_all matches element-wise fusion") {
        const std::vector<GaussianPrediction> bnn{{1.0, 1.0}, {2.0, 4.0}};
        const std::vector<GaussianPrediction> prior{{0.0, 1.0}, {0.0, 1.0}};
        const auto out = fuse_all(bnn, prior, 0.25);
        CHECK(out[0].mean == 0.5);
        CHECK(out[1].mean == doctest::Approx(0.4));
        CHECK(out[1].total_variance() == doctest::Approx(1.05));
        CHECK_THROWS_AS(fuse_all(bnn, std::vector<GaussianPrediction>{{0.0, 1.0}}, 0.25), InputError);
    }
}
