// Exercises the shared library through its C header only.

#include "fvbnn/fvbnn.h"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

namespace {

const char* kQuickConfig = R"({
  "seed": 11,
  "dataset": {"kind": "synthetic_1d", "n": 120},
  "architecture": {"hidden_dims": [12]},
  "training": {"learning_rate": 0.01, "max_epochs": 40, "patience": 10},
  "backend": {"kind": "ensemble", "members": 3},
  "prior": {"type": "constant", "variance": [0.1849]}
})";

}  // namespace

TEST_CASE("C API primitives") {
    CHECK(std::string(fvbnn_version()).size() > 0);
    CHECK(std::string(fvbnn_status_name(FVBNN_ERR_DATA)) == "data error");

    double mean = 0, var = 0;
    REQUIRE(fvbnn_fuse(2.0, 4.0, 0.0, 1.0, &mean, &var) == FVBNN_OK);
    CHECK(mean == doctest::Approx(0.4));
    CHECK(var == doctest::Approx(0.8));
    REQUIRE(fvbnn_fuse(2.0, 4.0, 0.0, INFINITY, &mean, &var) == FVBNN_OK);
    CHECK(mean == 2.0);
    CHECK(var == 4.0);

    CHECK(fvbnn_fuse(2.0, 4.0, 0.0, 0.0, &mean, &var) == FVBNN_ERR_INPUT);
    CHECK(std::string(fvbnn_last_error()).find("prior variance") != std::string::npos);
    CHECK(fvbnn_fuse(2.0, 4.0, 0.0, 1.0, nullptr, &var) == FVBNN_ERR_INPUT);

    std::vector<double> a, b;
    for (int i = 0; i < 10; ++i) a.push_back(i + 1.0), b.push_back(0.0);
    double p = 0, w = 0;
    REQUIRE(fvbnn_wilcoxon(a.data(), b.data(), a.size(), &p, &w) == FVBNN_OK);
    CHECK(p == std::ldexp(1.0, -10));
    CHECK(w == 55.0);
    CHECK(fvbnn_wilcoxon(a.data(), a.data(), a.size(), &p, nullptr) == FVBNN_ERR_DATA);

    fvbnn_model_free(nullptr);
    fvbnn_dataset_free(nullptr);
    CHECK(fvbnn_dataset_size(nullptr) == 0);
}

TEST_CASE("C API commands and handles") {
    testing::TempDir dir("capi");
    testing::spit(dir / "config.json", kQuickConfig);
    const std::string config = (dir / "config.json").string();
    const std::string model_dir = (dir / "model").string();

    SUBCASE("error codes") {
        CHECK(fvbnn_train((dir / "missing.json").string().c_str(), model_dir.c_str(), nullptr) == FVBNN_ERR_IO);
        testing::spit(dir / "bad.json", R"({"backend": {"kind": "gp"}})");
        CHECK(fvbnn_train((dir / "bad.json").string().c_str(), model_dir.c_str(), nullptr) == FVBNN_ERR_CONFIG);
        CHECK(std::string(fvbnn_last_error()).rfind("backend.kind", 0) == 0);
        testing::spit(dir / "broken.json", "{ not json");
        CHECK(fvbnn_train((dir / "broken.json").string().c_str(), model_dir.c_str(), nullptr) == FVBNN_ERR_CONFIG);
        fvbnn_options options{};
        options.backend = "gp";
        CHECK(fvbnn_train(config.c_str(), model_dir.c_str(), &options) == FVBNN_ERR_CONFIG);
        CHECK(fvbnn_train(nullptr, model_dir.c_str(), nullptr) == FVBNN_ERR_INPUT);
        fvbnn_model* model = nullptr;
        CHECK(fvbnn_model_load((dir / "nowhere").string().c_str(), &model) != FVBNN_OK);
        CHECK(model == nullptr);
    }

    SUBCASE("train, load and predict agree with evaluate") {
        REQUIRE(fvbnn_train(config.c_str(), model_dir.c_str(), nullptr) == FVBNN_OK);
        const std::string val = model_dir + "/val.csv";
        REQUIRE(fvbnn_evaluate(model_dir.c_str(), val.c_str(), (dir / "eval").string().c_str()) == FVBNN_OK);

        fvbnn_model* model = nullptr;
        REQUIRE(fvbnn_model_load(model_dir.c_str(), &model) == FVBNN_OK);
        double noise = 0;
        REQUIRE(fvbnn_model_noise_variance(model, &noise) == FVBNN_OK);
        CHECK(noise > 0.0);
        fvbnn_dataset* data = nullptr;
        REQUIRE(fvbnn_dataset_load(model, val.c_str(), &data) == FVBNN_OK);
        const std::size_t n = fvbnn_dataset_size(data);
        CHECK(n == 24);
        std::vector<double> mean(n), fvar(n), total(n);
        CHECK(fvbnn_model_predict(model, data, mean.data(), fvar.data(), total.data(), n - 1) == FVBNN_ERR_INPUT);
        REQUIRE(fvbnn_model_predict(model, data, mean.data(), fvar.data(), total.data(), n) == FVBNN_OK);

        const auto rows = testing::read_rows(dir / "eval/predictions.csv");
        REQUIRE(rows.size() == n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::stod(rows[i + 1][2]) == mean[i]);
            CHECK(std::stod(rows[i + 1][3]) == fvar[i]);
            CHECK(std::stod(rows[i + 1][5]) == total[i]);
            CHECK(total[i] == doctest::Approx(fvar[i] + noise));
        }
        fvbnn_dataset_free(data);
        fvbnn_model_free(model);
    }

    SUBCASE("options override the config") {
        fvbnn_options options{};
        options.has_seed = 1;
        options.seed = 99;
        options.backend = "nn";
        REQUIRE(fvbnn_train(config.c_str(), model_dir.c_str(), &options) == FVBNN_OK);
        const std::string manifest = testing::slurp(dir / "model/manifest.json");
        CHECK(manifest.find("\"seed\": 99") != std::string::npos);
        CHECK(std::filesystem::exists(dir / "model/network.json"));
    }

    SUBCASE("plot through the C API") {
        REQUIRE(fvbnn_train(config.c_str(), model_dir.c_str(), nullptr) == FVBNN_OK);
        REQUIRE(fvbnn_plot_1d(model_dir.c_str(), (dir / "plot").string().c_str()) == FVBNN_OK);
        CHECK(std::filesystem::exists(dir / "plot.svg"));
        CHECK(std::filesystem::exists(dir / "plot_band.csv"));
    }
}
