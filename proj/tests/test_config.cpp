#include "error.hpp"
#include "experiment.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace fvbnn;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("config defaults") {
    const auto cfg = parse_config(json::object());
    CHECK(cfg.seed == 0);
    CHECK(cfg.data.kind == DataSource::Kind::Synthetic1d);
    CHECK_FALSE(cfg.data.seed.has_value());
    CHECK(cfg.split.kind == SplitSpec::Kind::Generated);
    CHECK(cfg.backend.kind == BackendKind::Ensemble);
    CHECK(cfg.backend.members == 5);
    CHECK(cfg.prior.type == PriorType::None);
    CHECK(cfg.n_splits == 10);
    CHECK(cfg.architecture.hidden_dims == std::vector<std::size_t>{50});
}

TEST_CASE("config errors carry the field path") {
    CHECK(starts_with(config_error({{"bogus", 1}}), "bogus: unknown field"));
    CHECK(starts_with(config_error({{"backend", {{"kind", "gp"}}}}), "backend.kind"));
    CHECK(starts_with(config_error({{"backend", {{"members", 1}}}}), "backend.members"));
    CHECK(starts_with(config_error({{"prior", {{"type", "gated"}}}}), "prior.column"));
    CHECK(starts_with(config_error({{"prior", {{"type", "constant"}, {"variance", {-1.0}}}}}), "prior.variance"));
    CHECK(starts_with(config_error({{"prior", {{"type", "gated"}, {"column", "s"}, {"variance", {1.0}}}}}),
                      "prior.variance"));
    CHECK(starts_with(config_error({{"training", {{"learning_rate", -1.0}}}}), "training"));
    CHECK(starts_with(config_error({{"architecture", {{"hidden_dims", {3, 3, 3}}}}}), "architecture.hidden_dims"));
    CHECK(starts_with(config_error({{"n_splits", 0}}), "n_splits"));
    CHECK(starts_with(config_error({{"seed", -4}}), "seed"));
    CHECK(starts_with(config_error({{"dataset", {{"kind", "csv"}}}}), "dataset.path"));
    CHECK(starts_with(config_error({{"split", {{"kind", "hamming"}}}}), "split.wildtype_id"));
    CHECK(starts_with(config_error({{"methods", {{{"kind", "stacking"}, {"name", "S"}}}}}), "methods[0].prior"));
    CHECK(starts_with(config_error({{"methods", {{{"name", "A"}}, {{"name", "A"}}}}}), "methods[1].name"));
    CHECK(starts_with(config_error({{"plot", {{"x_min", 1.0}, {"x_max", 0.0}}}}), "plot.x_max"));
}

TEST_CASE("config survives a JSON round trip") {
    const json j = {
        {"seed", 7},
        {"dataset", {{"kind", "landscape"}, {"length", 5}, {"alphabet", "ACD"}, {"seed", 3}}},
        {"split", {{"kind", "hamming"}, {"radius", 2}, {"n_sample", 50}, {"balance_threshold", 0.5}}},
        {"architecture", {{"hidden_dims", {20, 10}}}},
        {"architecture_search", {{"enabled", true}, {"candidates", {{4}, {4, 4}}}, {"folds", 3}}},
        {"training", {{"learning_rate", 0.01}, {"max_epochs", 30}, {"patience", 5}}},
        {"backend", {{"kind", "laplace"}, {"precision_grid", {0.1, 1.0}}}},
        {"prior", {{"type", "gated"}, {"column", "stability"}, {"variance_grid", {0.1, 1.0}}}},
        {"n_splits", 3},
        {"methods",
         {{{"name", "plain"}, {"backend", {{"kind", "nn"}}}},
          {{"name", "stack"}, {"kind", "stacking"}, {"prior", {{"type", "scaled"}, {"column", "stability"}}}}}},
    };
    const auto cfg = parse_config(j);
    CHECK(*cfg.data.seed == 3);
    CHECK(cfg.architecture_search.candidates.size() == 2);
    CHECK(cfg.methods[0].backend.kind == BackendKind::Network);
    CHECK(cfg.methods[1].backend.kind == BackendKind::Laplace);
    const json once = config_to_json(cfg);
    CHECK(config_to_json(parse_config(once)) == once);
}

TEST_CASE("default method list") {
    auto cfg = parse_config(json::object());
    auto methods = resolved_methods(cfg);
    REQUIRE(methods.size() == 3);
    CHECK(methods[0].name == "NN");
    CHECK(methods[0].backend.kind == BackendKind::Network);
    CHECK(methods[1].backend.kind == BackendKind::Ensemble);
    CHECK(methods[2].prior.type == PriorType::Constant);
    cfg.prior.type = PriorType::Gated;
    cfg.prior.column = "stability";
    methods = resolved_methods(cfg);
    REQUIRE(methods.size() == 5);
    CHECK(methods[4].kind == MethodKind::Stacking);
}

TEST_CASE("command-line overrides") {
    auto cfg = parse_config(json::object());
    apply_overrides(cfg, Overrides{42, BackendKind::Laplace, 3});
    CHECK(cfg.seed == 42);
    CHECK(cfg.backend.kind == BackendKind::Laplace);
    CHECK(cfg.n_splits == 3);
    CHECK_THROWS_AS(apply_overrides(cfg, Overrides{std::nullopt, std::nullopt, 0}), ConfigError);
}

TEST_CASE("data preparation") {
    SUBCASE("synthetic data follows the seed of each split") {
        const auto cfg = parse_config({{"seed", 5}, {"dataset", {{"n", 50}}}});
        const auto a = prepare_data(cfg, 0);
        const auto b = prepare_data(cfg, 0);
        CHECK(a.train.labels == b.train.labels);
        CHECK(prepare_data(cfg, 1).train.labels != a.train.labels);
        CHECK(a.train.size() == 40);
        CHECK(a.val.size() == 10);
        CHECK(a.test.empty());
        CHECK(training_seed(cfg, 0) != training_seed(cfg, 1));
    }
    SUBCASE("a fixed dataset seed keeps the data across top-level seeds") {
        const auto one = parse_config({{"seed", 1}, {"dataset", {{"n", 30}, {"seed", 9}}}});
        const auto two = parse_config({{"seed", 2}, {"dataset", {{"n", 30}, {"seed", 9}}}});
        CHECK(prepare_data(one).all.labels == prepare_data(two).all.labels);
    }
    SUBCASE("csv data with a split column") {
        testing::TempDir dir("cfgcsv");
        std::string csv = "id,x,label,part\n";
        const char* parts[] = {"train", "train", "val", "test", "train", "val", "test", "train"};
        for (int i = 0; i < 8; ++i) csv += "r" + std::to_string(i) + "," + std::to_string(i) + "," + std::to_string(2 * i) + "," + parts[i] + "\n";
        testing::spit(dir / "d.csv", csv);
        testing::spit(dir / "c.json",
                      json{{"dataset", {{"kind", "csv"}, {"path", "d.csv"}, {"schema", {{"features", {"x"}}}}}},
                           {"split", {{"kind", "column"}, {"column", "part"}}}}
                          .dump());
        const auto cfg = load_config(dir / "c.json");
        CHECK(cfg.data.path == dir / "d.csv");
        const auto d = prepare_data(cfg);
        CHECK(d.train.ids == std::vector<std::string>{"r0", "r1", "r4", "r7"});
        CHECK(d.val.ids == std::vector<std::string>{"r2", "r5"});
        CHECK(d.test.ids == std::vector<std::string>{"r3", "r6"});
    }
    SUBCASE("landscape with a Hamming split") {
        const auto cfg = parse_config({{"dataset", {{"kind", "landscape"}, {"length", 4}, {"alphabet", "ACD"}}},
                                       {"split", {{"n_sample", 20}}}});
        const auto d = prepare_data(cfg);
        CHECK(d.train.size() == 16);
        CHECK(d.val.size() == 4);
        CHECK(d.test.size() == 81 - 20);
        CHECK(d.schema.sequence_column == "sequence");
    }
}
