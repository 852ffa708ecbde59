#include "error.hpp"
#include "metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace fvbnn;

TEST_CASE("mean log-likelihood") {
    const std::vector<PosteriorPredictive> at_mode{{1.0, 0.6, 0.4}};
    CHECK(mean_log_likelihood(at_mode, std::vector<double>{1.0}) ==
          doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));
    CHECK(mean_log_likelihood(at_mode, std::vector<double>{1.0}) == doctest::Approx(-0.918939).epsilon(1e-6));
    const std::vector<PosteriorPredictive> doubled{{1.0, 1.2, 0.8}};
    CHECK(mean_log_likelihood(at_mode, std::vector<double>{1.0}) - mean_log_likelihood(doubled, std::vector<double>{1.0}) ==
          doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    std::vector<PosteriorPredictive> preds;
    std::vector<double> y;
    double expected = 0.0;
    for (int i = 0; i < 30; ++i) {
        preds.push_back({normal(rng), std::abs(normal(rng)), 0.05});
        y.push_back(normal(rng));
        expected += oracle::gaussian_log_density(y.back(), preds.back().mean, preds.back().total_variance());
    }
    CHECK(mean_log_likelihood(preds, y) == doctest::Approx(expected / 30.0).epsilon(1e-13));
    CHECK_THROWS_AS(mean_log_likelihood(std::vector<PosteriorPredictive>{{0.0, 0.0, 0.0}}, std::vector<double>{0.0}),
                    InputError);
}

TEST_CASE("RMSE and MAE") {
    const std::vector<PosteriorPredictive> p{{0.0, 1, 1}, {0.0, 1, 1}};
    CHECK(rmse(p, std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(mae(p, std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(rmse(p, std::vector<double>{3.0, -4.0}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(mae(p, std::vector<double>{3.0, -4.0}) == 3.5);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 50; ++t) {
        std::vector<PosteriorPredictive> q;
        std::vector<double> y;
        for (int i = 0; i < 7; ++i) q.push_back({normal(rng), 1, 0}), y.push_back(normal(rng));
        CHECK(rmse(q, y) >= mae(q, y));
    }
    CHECK_THROWS_AS(rmse(p, std::vector<double>{1.0}), InputError);
}

TEST_CASE("standard error") {
    CHECK(standard_error(std::vector<double>{2, 2, 2}) == 0.0);
    CHECK(standard_error(std::vector<double>{0, 2}) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> base{0.3, -1.2, 2.0, 0.7};
    std::vector<double> rep;
    for (int k = 0; k < 4; ++k) rep.insert(rep.end(), base.begin(), base.end());
    // Replicating the list k times keeps the sum of squares per copy, so the
    // SE shrinks by exactly sqrt((n - 1) / (k n - 1)), i.e. about 1/sqrt(k).
    const double n = 4.0;
    const double k = 4.0;
    CHECK(standard_error(rep) / standard_error(base) == doctest::Approx(std::sqrt((n - 1) / (k * n - 1))).epsilon(1e-14));
    CHECK(standard_error(rep) == doctest::Approx(std::sqrt(oracle::sample_variance(rep) / (k * n))).epsilon(1e-14));
    CHECK_THROWS_AS(standard_error(std::vector<double>{1.0}), InputError);
}

TEST_CASE("Wilcoxon signed-rank test") {
    SUBCASE("ten positive differences give 2^-10") {
        std::vector<double> a, b;
        for (int i = 0; i < 10; ++i) a.push_back(1.0 + i), b.push_back(0.5 * i);
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK(r.exact);
        CHECK(r.p_value == std::ldexp(1.0, -10));
        CHECK(r.w_plus == 55.0);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.3f", r.p_value);
        CHECK(std::string(buf) == "0.001");
    }
    SUBCASE("equal samples are degenerate") {
        const std::vector<double> a{1, 2, 3, 4, 5, 6};
        CHECK_THROWS_AS(wilcoxon_signed_rank(a, a), DataError);
    }
    SUBCASE("matches sign-pattern enumeration for n = 6") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> normal;
        for (int t = 0; t < 30; ++t) {
            std::vector<double> a(6), b(6);
            for (int i = 0; i < 6; ++i) a[i] = normal(rng), b[i] = normal(rng);
            CHECK(wilcoxon_signed_rank(a, b).p_value ==
                  doctest::Approx(oracle::wilcoxon_enumerated_p(a, b)).epsilon(1e-12));
        }
    }
    SUBCASE("ties and zeros") {
        const std::vector<double> a{1, 2, 3, 3, 0, -1, 4, 2};
        const std::vector<double> b{0, 0, 1, 5, 0, 1, 2, 2};
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK(r.n_used == 6);
        CHECK(r.p_value == doctest::Approx(oracle::wilcoxon_enumerated_p(a, b)).epsilon(1e-12));
        const auto ranks = signed_rank_magnitudes(std::vector<double>{1, -2, 2, 0, 3});
        CHECK(ranks == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    }
    SUBCASE("large samples use the normal approximation") {
        std::vector<double> a, b;
        for (int i = 0; i < 40; ++i) a.push_back(i % 3 == 0 ? -0.5 * i : 1.0 * i), b.push_back(0.0);
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK_FALSE(r.exact);
        CHECK(r.p_value > 0.0);
        CHECK(r.p_value < 0.05);
    }
    SUBCASE("exact and normal agree roughly at the switch-over size") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> normal;
        std::vector<double> a(25), b(25, 0.0);
        for (auto& v : a) v = normal(rng) + 0.3;
        const auto exact = wilcoxon_signed_rank(a, b);
        CHECK(exact.exact);
        // the normal approximation with continuity correction, by hand
        double w = exact.w_plus;
        const double n = 25;
        const double mu = n * (n + 1) / 4;
        const double sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24);
        const double z = (w - mu - 0.5) / sd;
        CHECK(exact.p_value == doctest::Approx(0.5 * std::erfc(z / std::sqrt(2.0))).epsilon(0.05));
    }
    SUBCASE("input errors") {
        CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}), InputError);
        CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}), InputError);
    }
}
