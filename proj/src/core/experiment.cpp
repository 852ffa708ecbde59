#include "experiment.hpp"

#include "error.hpp"
#include "metrics.hpp"
#include "serialize.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <set>
#include <sstream>

namespace fvbnn {

namespace {

using nlohmann::json;

// Read access to one JSON object that reports errors by field path.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + "expected an object");
    }

    std::string field(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    bool has(const char* key) const { return j_.contains(key); }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& item : j_.items()) {
            const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; });
            if (!known) throw ConfigError(field(item.key()) + ": unknown field");
        }
    }

    Section child(const char* key) const {
        if (!has(key)) return Section(empty_object(), field(key));
        return Section(j_.at(key), field(key));
    }

    const json& raw(const char* key) const { return j_.at(key); }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        return as_number(j_.at(key), field(key));
    }

    std::optional<double> optional_number(const char* key) const {
        if (!has(key) || j_.at(key).is_null()) return std::nullopt;
        return as_number(j_.at(key), field(key));
    }

    std::uint64_t count(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        // Integers built in code are signed; parsed text gives unsigned.
        const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        if (!ok) throw ConfigError(field(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string text(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
        return v.get<std::string>();
    }

    bool flag(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const char* key) const {
        const auto& v = j_.at(key);
        if (v.is_number()) return {as_number(v, field(key))};
        if (!v.is_array()) throw ConfigError(field(key) + ": expected a number or a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    std::vector<std::string> strings(const char* key) const {
        if (!has(key)) return {};
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(field(key) + ": expected a list of strings");
        std::vector<std::string> out;
        for (const auto& s : v) {
            if (!s.is_string()) throw ConfigError(field(key) + ": expected a list of strings");
            out.push_back(s.get<std::string>());
        }
        return out;
    }

    std::vector<std::size_t> widths(const json& v, const std::string& path) const {
        if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a non-empty list of layer widths");
        std::vector<std::size_t> out;
        for (const auto& w : v) {
            if (!w.is_number_integer() || w.get<std::int64_t>() <= 0) {
                throw ConfigError(path + ": layer widths must be positive integers");
            }
            out.push_back(w.get<std::size_t>());
        }
        return out;
    }

private:
    static const json& empty_object() {
        static const json e = json::object();
        return e;
    }

    std::string where() const { return path_.empty() ? std::string("config: ") : path_ + ": "; }

    static double as_number(const json& v, const std::string& path) {
        try {
            return double_from_json(v);
        } catch (const ConfigError&) {
            throw ConfigError(path + ": expected a number");
        }
    }

    const json& j_;
    std::string path_;
};

template <class Enum>
Enum parse_choice(const Section& s, const char* key, Enum fallback,
                  std::initializer_list<std::pair<const char*, Enum>> choices) {
    if (!s.has(key)) return fallback;
    const auto value = s.text(key, "");
    std::string names;
    for (const auto& [name, e] : choices) {
        if (value == name) return e;
        names += names.empty() ? "" : ", ";
        names += name;
    }
    throw ConfigError(s.field(key) + ": '" + value + "' is not one of " + names);
}

std::string join_doubles(std::span<const double> values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(sep);
        out += format_double(values[i]);
    }
    return out;
}

json doubles_to_json(std::span<const double> values) {
    json out = json::array();
    for (double v : values) out.push_back(double_to_json(v));
    return out;
}

BackendSpec parse_backend(const Section& s, const BackendSpec& base) {
    s.allow({"kind", "members", "precision_grid"});
    BackendSpec spec = base;
    spec.kind = parse_choice(s, "kind", base.kind,
                             {{"nn", BackendKind::Network},
                              {"ensemble", BackendKind::Ensemble},
                              {"laplace", BackendKind::Laplace}});
    spec.members = s.count("members", base.members);
    if (spec.members < 2) throw ConfigError(s.field("members") + ": an ensemble needs at least 2 members");
    if (s.has("precision_grid")) {
        spec.precision_grid = s.numbers("precision_grid");
        if (spec.precision_grid.empty()) throw ConfigError(s.field("precision_grid") + ": empty grid");
        for (double a : spec.precision_grid) {
            if (!(a > 0.0) || !std::isfinite(a)) {
                throw ConfigError(s.field("precision_grid") + ": precisions must be finite and > 0");
            }
        }
    }
    return spec;
}

json backend_to_json(const BackendSpec& spec) {
    return {{"kind", backend_name(spec.kind)},
            {"members", spec.members},
            {"precision_grid", doubles_to_json(spec.precision_grid)}};
}

PriorSpec parse_prior(const Section& s) {
    s.allow({"type", "column", "mean", "threshold", "fitness_threshold", "slope", "intercept", "variance",
             "variance_grid"});
    PriorSpec p;
    p.type = parse_choice(s, "type", PriorType::None,
                          {{"none", PriorType::None},
                           {"constant", PriorType::Constant},
                           {"gated", PriorType::Gated},
                           {"scaled", PriorType::Scaled}});
    p.column = s.text("column", "");
    p.mean = s.number("mean", 0.0);
    p.threshold = s.optional_number("threshold");
    p.fitness_threshold = s.number("fitness_threshold", 0.5);
    p.slope = s.optional_number("slope");
    p.intercept = s.optional_number("intercept");
    if (s.has("variance")) p.variance = s.numbers("variance");
    if (s.has("variance_grid")) {
        p.variance_grid = s.numbers("variance_grid");
        if (p.variance_grid.empty()) throw ConfigError(s.field("variance_grid") + ": empty grid");
    }
    for (double v : p.variance) {
        if (!(v > 0.0)) throw ConfigError(s.field("variance") + ": variances must be > 0");
    }
    for (double v : p.variance_grid) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(s.field("variance_grid") + ": variances must be finite and > 0");
        }
    }
    const bool needs_column = p.type == PriorType::Gated || p.type == PriorType::Scaled;
    if (needs_column && p.column.empty()) throw ConfigError(s.field("column") + ": required for this prior type");
    const std::size_t free = p.type == PriorType::Gated ? 2 : 1;
    if (!p.variance.empty() && p.variance.size() != free) {
        throw ConfigError(s.field("variance") + ": expected " + std::to_string(free) + " value(s)");
    }
    if (p.slope.has_value() != p.intercept.has_value()) {
        throw ConfigError(s.field("slope") + ": give both slope and intercept, or neither");
    }
    return p;
}

json prior_spec_to_json(const PriorSpec& p) {
    static const char* names[] = {"none", "constant", "gated", "scaled"};
    json j{{"type", names[static_cast<int>(p.type)]},
           {"column", p.column},
           {"mean", p.mean},
           {"fitness_threshold", p.fitness_threshold}};
    if (p.threshold) j["threshold"] = *p.threshold;
    if (p.slope) j["slope"] = *p.slope;
    if (p.intercept) j["intercept"] = *p.intercept;
    if (!p.variance.empty()) j["variance"] = doubles_to_json(p.variance);
    if (!p.variance_grid.empty()) j["variance_grid"] = doubles_to_json(p.variance_grid);
    return j;
}

CsvSchema parse_schema(const Section& s) {
    s.allow({"id", "label", "features", "sequence", "alphabet", "aux", "group"});
    CsvSchema schema;
    schema.id_column = s.text("id", schema.id_column);
    schema.label_column = s.text("label", schema.label_column);
    schema.feature_columns = s.strings("features");
    schema.sequence_column = s.text("sequence", "");
    schema.alphabet = s.text("alphabet", "");
    schema.aux_columns = s.strings("aux");
    schema.group_column = s.text("group", "");
    if (schema.sequence_column.empty() == schema.feature_columns.empty()) {
        throw ConfigError(s.field("features") + ": give either feature columns or a sequence column");
    }
    if (!schema.sequence_column.empty() && schema.alphabet.empty()) {
        throw ConfigError(s.field("alphabet") + ": required with a sequence column");
    }
    return schema;
}

json schema_to_json(const CsvSchema& schema) {
    return {{"id", schema.id_column},         {"label", schema.label_column},
            {"features", schema.feature_columns}, {"sequence", schema.sequence_column},
            {"alphabet", schema.alphabet},     {"aux", schema.aux_columns},
            {"group", schema.group_column}};
}

CsvSchema schema_from_json(const json& j) {
    CsvSchema schema;
    schema.id_column = j.at("id").get<std::string>();
    schema.label_column = j.at("label").get<std::string>();
    schema.feature_columns = j.at("features").get<std::vector<std::string>>();
    schema.sequence_column = j.at("sequence").get<std::string>();
    schema.alphabet = j.at("alphabet").get<std::string>();
    schema.aux_columns = j.at("aux").get<std::vector<std::string>>();
    schema.group_column = j.at("group").get<std::string>();
    return schema;
}

std::string method_kind_name(MethodKind kind) {
    return kind == MethodKind::Stacking ? "stacking" : "function_value";
}

std::vector<MethodSpec> default_methods(const ExperimentConfig& cfg) {
    BackendSpec bnn = cfg.backend;
    if (bnn.kind == BackendKind::Network) bnn.kind = BackendKind::Ensemble;
    BackendSpec nn = cfg.backend;
    nn.kind = BackendKind::Network;
    PriorSpec zero;
    zero.type = PriorType::Constant;
    std::vector<MethodSpec> methods{{"NN", MethodKind::FunctionValue, nn, {}},
                                    {"BNN", MethodKind::FunctionValue, bnn, {}},
                                    {"fv-BNN (zero prior)", MethodKind::FunctionValue, bnn, zero}};
    if (cfg.prior.type == PriorType::Gated || cfg.prior.type == PriorType::Scaled) {
        methods.push_back({"fv-BNN (score prior)", MethodKind::FunctionValue, bnn, cfg.prior});
        methods.push_back({"Stacking", MethodKind::Stacking, bnn, cfg.prior});
    }
    return methods;
}

double sample_variance(const Eigen::VectorXd& v) {
    if (v.size() < 2) throw DataError("need at least 2 training labels");
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

std::vector<double> means_of(std::span<const GaussianPrediction> moments) {
    std::vector<double> out;
    out.reserve(moments.size());
    for (const auto& m : moments) out.push_back(m.mean);
    return out;
}

const std::vector<double>& aux_column(const Dataset& data, const std::string& name) {
    auto it = data.aux.find(name);
    if (it == data.aux.end()) throw ConfigError("prior.column: dataset has no aux column '" + name + "'");
    return it->second;
}

}  // namespace

// ---------------------------------------------------------------- config

std::string backend_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::Network: return "nn";
        case BackendKind::Ensemble: return "ensemble";
        case BackendKind::Laplace: return "laplace";
    }
    return "?";
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    const Section root(j, "");
    root.allow({"seed", "dataset", "split", "architecture", "architecture_search", "training", "backend", "prior",
                "n_splits", "methods", "plot"});
    ExperimentConfig cfg;
    cfg.seed = root.count("seed", 0);

    const Section ds = root.child("dataset");
    cfg.data.kind = parse_choice(ds, "kind", DataSource::Kind::Synthetic1d,
                                 {{"synthetic_1d", DataSource::Kind::Synthetic1d},
                                  {"landscape", DataSource::Kind::Landscape},
                                  {"csv", DataSource::Kind::Csv}});
    if (ds.has("seed")) cfg.data.seed = ds.count("seed", 0);
    switch (cfg.data.kind) {
        case DataSource::Kind::Synthetic1d: {
            ds.allow({"kind", "seed", "n", "x_min", "x_max", "noise_sd", "train_fraction"});
            auto& s = cfg.data.synthetic;
            s.n = ds.count("n", s.n);
            s.x_min = ds.number("x_min", s.x_min);
            s.x_max = ds.number("x_max", s.x_max);
            s.noise_sd = ds.number("noise_sd", s.noise_sd);
            s.train_fraction = ds.number("train_fraction", s.train_fraction);
            if (s.n < 2) throw ConfigError(ds.field("n") + ": need at least 2 points");
            if (!(s.x_max > s.x_min)) throw ConfigError(ds.field("x_max") + ": must exceed x_min");
            if (!(s.noise_sd >= 0.0)) throw ConfigError(ds.field("noise_sd") + ": must be >= 0");
            if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) {
                throw ConfigError(ds.field("train_fraction") + ": must lie in (0, 1)");
            }
            break;
        }
        case DataSource::Kind::Landscape: {
            ds.allow({"kind", "seed", "length", "alphabet", "noise_sd", "proxy_noise_sd"});
            auto& l = cfg.data.landscape;
            l.length = ds.count("length", l.length);
            l.alphabet = ds.text("alphabet", l.alphabet);
            l.noise_sd = ds.number("noise_sd", l.noise_sd);
            l.proxy_noise_sd = ds.number("proxy_noise_sd", l.proxy_noise_sd);
            if (l.length == 0 || l.length > 10) throw ConfigError(ds.field("length") + ": must be 1..10");
            if (l.alphabet.size() < 2) throw ConfigError(ds.field("alphabet") + ": need at least 2 letters");
            break;
        }
        case DataSource::Kind::Csv: {
            ds.allow({"kind", "path", "schema"});
            if (!ds.has("path")) throw ConfigError(ds.field("path") + ": required for csv datasets");
            cfg.data.path = ds.text("path", "");
            if (cfg.data.path.is_relative() && !base_dir.empty()) cfg.data.path = base_dir / cfg.data.path;
            if (!ds.has("schema")) throw ConfigError(ds.field("schema") + ": required for csv datasets");
            cfg.data.schema = parse_schema(ds.child("schema"));
            break;
        }
    }

    const Section sp = root.child("split");
    const auto default_split = cfg.data.kind == DataSource::Kind::Synthetic1d ? SplitSpec::Kind::Generated
                               : cfg.data.kind == DataSource::Kind::Landscape ? SplitSpec::Kind::Hamming
                                                                              : SplitSpec::Kind::Fraction;
    cfg.split.kind = parse_choice(sp, "kind", default_split,
                                  {{"generated", SplitSpec::Kind::Generated},
                                   {"hamming", SplitSpec::Kind::Hamming},
                                   {"fraction", SplitSpec::Kind::Fraction},
                                   {"column", SplitSpec::Kind::Column}});
    switch (cfg.split.kind) {
        case SplitSpec::Kind::Generated:
            sp.allow({"kind"});
            if (cfg.data.kind != DataSource::Kind::Synthetic1d) {
                throw ConfigError(sp.field("kind") + ": 'generated' needs the synthetic_1d dataset");
            }
            break;
        case SplitSpec::Kind::Hamming: {
            sp.allow({"kind", "wildtype_id", "radius", "n_sample", "train_fraction", "balance_threshold"});
            auto& h = cfg.split.hamming;
            const std::string default_wt = cfg.data.kind == DataSource::Kind::Landscape ? "v0" : "";
            h.wildtype_id = sp.text("wildtype_id", default_wt);
            if (h.wildtype_id.empty()) throw ConfigError(sp.field("wildtype_id") + ": required");
            h.radius = sp.count("radius", h.radius);
            h.n_sample = sp.count("n_sample", h.n_sample);
            h.train_fraction = sp.number("train_fraction", h.train_fraction);
            h.balance_threshold = sp.optional_number("balance_threshold");
            if (!(h.train_fraction > 0.0 && h.train_fraction < 1.0)) {
                throw ConfigError(sp.field("train_fraction") + ": must lie in (0, 1)");
            }
            break;
        }
        case SplitSpec::Kind::Fraction: {
            sp.allow({"kind", "train_fraction", "val_fraction_of_train", "by_group"});
            auto& f = cfg.split.fraction;
            f.train_fraction = sp.number("train_fraction", f.train_fraction);
            f.val_fraction_of_train = sp.number("val_fraction_of_train", f.val_fraction_of_train);
            f.by_group = sp.flag("by_group", f.by_group);
            for (const char* key : {"train_fraction", "val_fraction_of_train"}) {
                const double v = sp.number(key, 0.5);
                if (!(v > 0.0 && v < 1.0)) throw ConfigError(sp.field(key) + ": must lie in (0, 1)");
            }
            break;
        }
        case SplitSpec::Kind::Column:
            sp.allow({"kind", "column"});
            cfg.split.column = sp.text("column", "");
            if (cfg.split.column.empty()) throw ConfigError(sp.field("column") + ": required");
            if (cfg.data.kind != DataSource::Kind::Csv) {
                throw ConfigError(sp.field("kind") + ": 'column' needs a csv dataset");
            }
            break;
    }

    const Section arch = root.child("architecture");
    arch.allow({"hidden_dims"});
    if (arch.has("hidden_dims")) {
        cfg.architecture.hidden_dims = arch.widths(arch.raw("hidden_dims"), arch.field("hidden_dims"));
    }
    if (cfg.architecture.hidden_dims.size() > 2) {
        throw ConfigError(arch.field("hidden_dims") + ": at most 2 hidden layers are supported");
    }

    const Section search = root.child("architecture_search");
    search.allow({"enabled", "candidates", "weight_decays", "folds"});
    cfg.architecture_search.enabled = search.flag("enabled", false);
    if (search.has("candidates")) {
        const auto& list = search.raw("candidates");
        if (!list.is_array() || list.empty()) {
            throw ConfigError(search.field("candidates") + ": expected a non-empty list of layer-width lists");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            NetworkArchitecture a;
            a.hidden_dims = search.widths(list[i], search.field("candidates") + "[" + std::to_string(i) + "]");
            if (a.hidden_dims.size() > 2) {
                throw ConfigError(search.field("candidates") + "[" + std::to_string(i) +
                                  "]: at most 2 hidden layers are supported");
            }
            cfg.architecture_search.candidates.push_back(a);
        }
    }
    if (search.has("weight_decays")) cfg.architecture_search.weight_decays = search.numbers("weight_decays");
    cfg.architecture_search.folds = search.count("folds", 5);
    if (cfg.architecture_search.folds < 2) throw ConfigError(search.field("folds") + ": need at least 2 folds");

    const Section tr = root.child("training");
    tr.allow({"learning_rate", "weight_decay", "batch_size", "max_epochs", "patience", "decoupled_weight_decay"});
    cfg.training.learning_rate = tr.number("learning_rate", cfg.training.learning_rate);
    cfg.training.weight_decay = tr.number("weight_decay", cfg.training.weight_decay);
    cfg.training.batch_size = tr.count("batch_size", cfg.training.batch_size);
    cfg.training.max_epochs = tr.count("max_epochs", cfg.training.max_epochs);
    cfg.training.patience = tr.count("patience", cfg.training.patience);
    cfg.training.decoupled_weight_decay = tr.flag("decoupled_weight_decay", false);
    try {
        cfg.training.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("training: ") + e.what());
    }

    cfg.backend = parse_backend(root.child("backend"), BackendSpec{});
    cfg.prior = parse_prior(root.child("prior"));
    cfg.n_splits = root.count("n_splits", cfg.n_splits);
    if (cfg.n_splits == 0) throw ConfigError("n_splits: must be >= 1");

    if (root.has("methods")) {
        const auto& list = root.raw("methods");
        if (!list.is_array()) throw ConfigError("methods: expected a list");
        std::set<std::string> names;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const Section m(list[i], "methods[" + std::to_string(i) + "]");
            m.allow({"name", "kind", "backend", "prior"});
            MethodSpec spec;
            spec.name = m.text("name", "");
            if (spec.name.empty()) throw ConfigError(m.field("name") + ": required");
            if (!names.insert(spec.name).second) throw ConfigError(m.field("name") + ": duplicate method name");
            spec.kind = parse_choice(m, "kind", MethodKind::FunctionValue,
                                     {{"function_value", MethodKind::FunctionValue},
                                      {"stacking", MethodKind::Stacking}});
            spec.backend = parse_backend(m.child("backend"), cfg.backend);
            spec.prior = parse_prior(m.child("prior"));
            if (spec.kind == MethodKind::Stacking && spec.prior.type == PriorType::None) {
                throw ConfigError(m.field("prior") + ": stacking needs a prior to combine with");
            }
            cfg.methods.push_back(std::move(spec));
        }
    }

    const Section plot = root.child("plot");
    plot.allow({"x_min", "x_max", "points"});
    cfg.plot.x_min = plot.number("x_min", cfg.plot.x_min);
    cfg.plot.x_max = plot.number("x_max", cfg.plot.x_max);
    cfg.plot.points = plot.count("points", cfg.plot.points);
    if (!(cfg.plot.x_max > cfg.plot.x_min)) throw ConfigError("plot.x_max: must exceed plot.x_min");
    if (cfg.plot.points < 2) throw ConfigError("plot.points: need at least 2 grid points");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_json_file(path), path.parent_path());
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    switch (cfg.data.kind) {
        case DataSource::Kind::Synthetic1d: {
            const auto& s = cfg.data.synthetic;
            j["dataset"] = {{"kind", "synthetic_1d"}, {"n", s.n},
                            {"x_min", s.x_min},       {"x_max", s.x_max},     {"noise_sd", s.noise_sd},
                            {"train_fraction", s.train_fraction}};
            break;
        }
        case DataSource::Kind::Landscape: {
            const auto& l = cfg.data.landscape;
            j["dataset"] = {{"kind", "landscape"},      {"length", l.length},
                            {"alphabet", l.alphabet},   {"noise_sd", l.noise_sd},
                            {"proxy_noise_sd", l.proxy_noise_sd}};
            break;
        }
        case DataSource::Kind::Csv:
            j["dataset"] = {{"kind", "csv"}, {"path", cfg.data.path.string()}, {"schema", schema_to_json(cfg.data.schema)}};
            break;
    }
    if (cfg.data.seed) j["dataset"]["seed"] = *cfg.data.seed;
    switch (cfg.split.kind) {
        case SplitSpec::Kind::Generated: j["split"] = {{"kind", "generated"}}; break;
        case SplitSpec::Kind::Hamming: {
            const auto& h = cfg.split.hamming;
            j["split"] = {{"kind", "hamming"},         {"wildtype_id", h.wildtype_id},
                          {"radius", h.radius},        {"n_sample", h.n_sample},
                          {"train_fraction", h.train_fraction}};
            if (h.balance_threshold) j["split"]["balance_threshold"] = *h.balance_threshold;
            break;
        }
        case SplitSpec::Kind::Fraction: {
            const auto& f = cfg.split.fraction;
            j["split"] = {{"kind", "fraction"},
                          {"train_fraction", f.train_fraction},
                          {"val_fraction_of_train", f.val_fraction_of_train},
                          {"by_group", f.by_group}};
            break;
        }
        case SplitSpec::Kind::Column: j["split"] = {{"kind", "column"}, {"column", cfg.split.column}}; break;
    }
    j["architecture"] = {{"hidden_dims", cfg.architecture.hidden_dims}};
    json candidates = json::array();
    for (const auto& a : cfg.architecture_search.candidates) candidates.push_back(a.hidden_dims);
    j["architecture_search"] = {{"enabled", cfg.architecture_search.enabled},
                                {"weight_decays", cfg.architecture_search.weight_decays},
                                {"folds", cfg.architecture_search.folds}};
    if (!candidates.empty()) j["architecture_search"]["candidates"] = candidates;
    json training = training_config_to_json(cfg.training);
    training.erase("seed");
    j["training"] = training;
    j["backend"] = backend_to_json(cfg.backend);
    j["prior"] = prior_spec_to_json(cfg.prior);
    j["n_splits"] = cfg.n_splits;
    json methods = json::array();
    for (const auto& m : cfg.methods) {
        methods.push_back({{"name", m.name},
                           {"kind", method_kind_name(m.kind)},
                           {"backend", backend_to_json(m.backend)},
                           {"prior", prior_spec_to_json(m.prior)}});
    }
    if (!methods.empty()) j["methods"] = methods;
    j["plot"] = {{"x_min", cfg.plot.x_min}, {"x_max", cfg.plot.x_max}, {"points", cfg.plot.points}};
    return j;
}

json prior_to_json(const FunctionValuePrior& prior) {
    if (const auto* c = std::get_if<ConstantPrior>(&prior)) {
        return {{"type", "constant"}, {"mean", c->mean}, {"variance", double_to_json(c->variance)}};
    }
    if (const auto* g = std::get_if<BinaryGatedPrior>(&prior)) {
        return {{"type", "gated"},
                {"column", g->score_column},
                {"threshold", g->threshold},
                {"mean", g->mean},
                {"variance_below", double_to_json(g->variance_below)},
                {"variance_above", double_to_json(g->variance_above)}};
    }
    const auto& s = std::get<LinearScaledScorePrior>(prior);
    return {{"type", "scaled"},
            {"column", s.score_column},
            {"slope", s.slope},
            {"intercept", s.intercept},
            {"variance", double_to_json(s.variance)}};
}

FunctionValuePrior prior_from_json(const json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        FunctionValuePrior prior;
        if (type == "constant") {
            prior = ConstantPrior{j.at("mean").get<double>(), double_from_json(j.at("variance"))};
        } else if (type == "gated") {
            prior = BinaryGatedPrior{j.at("column").get<std::string>(), j.at("threshold").get<double>(),
                                     j.at("mean").get<double>(), double_from_json(j.at("variance_below")),
                                     double_from_json(j.at("variance_above"))};
        } else if (type == "scaled") {
            prior = LinearScaledScorePrior{j.at("column").get<std::string>(), j.at("slope").get<double>(),
                                           j.at("intercept").get<double>(), double_from_json(j.at("variance"))};
        } else {
            throw ConfigError("prior.type: unknown prior type '" + type + "'");
        }
        validate_prior(prior);
        return prior;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("prior: ") + e.what());
    }
}

// ---------------------------------------------------------------- data

PreparedData prepare_data(const ExperimentConfig& cfg, std::size_t split_index) {
    PreparedData out;
    const std::uint64_t split_seed = cfg.seed + split_index;
    const std::uint64_t data_seed = cfg.data.seed.value_or(cfg.seed);
    switch (cfg.data.kind) {
        case DataSource::Kind::Synthetic1d: {
            Synthetic1dSpec spec = cfg.data.synthetic;
            spec.seed = data_seed + split_index;
            auto generated = generate_synthetic_1d(spec);
            out.all = std::move(generated.data);
            out.split = std::move(generated.split);
            out.schema.feature_columns = {"x"};
            break;
        }
        case DataSource::Kind::Landscape:
        {
            LandscapeSpec spec = cfg.data.landscape;
            spec.seed = data_seed;
            out.all = generate_landscape(spec);
            out.schema.sequence_column = "sequence";
            out.schema.alphabet = cfg.data.landscape.alphabet;
            out.schema.aux_columns = {"stability"};
            break;
        }
        case DataSource::Kind::Csv:
            out.all = load_csv(cfg.data.path, cfg.data.schema);
            out.schema = cfg.data.schema;
            break;
    }
    switch (cfg.split.kind) {
        case SplitSpec::Kind::Generated: break;
        case SplitSpec::Kind::Hamming: {
            HammingSplitSpec spec = cfg.split.hamming;
            spec.seed = split_seed;
            out.split = hamming_radius_split(out.all, spec);
            break;
        }
        case SplitSpec::Kind::Fraction: {
            FractionSplitSpec spec = cfg.split.fraction;
            spec.seed = split_seed;
            out.split = fraction_split(out.all, spec);
            break;
        }
        case SplitSpec::Kind::Column:
            out.split = precomputed_split(read_csv_column(cfg.data.path, cfg.split.column));
            break;
    }
    if (out.split.train.size() < 2 || out.split.val.size() < 2) {
        throw DataError("split: need at least 2 training and 2 validation rows");
    }
    out.train = out.all.subset(out.split.train);
    out.val = out.all.subset(out.split.val);
    out.test = out.all.subset(out.split.test);
    return out;
}

std::uint64_t training_seed(const ExperimentConfig& cfg, std::size_t split_index) {
    // Ensemble members use consecutive seeds, so splits are spaced apart.
    return cfg.seed + 1000 * (split_index + 1);
}

// ---------------------------------------------------------------- fitting

FittedBackend fit_backend(const ExperimentConfig& cfg, const BackendSpec& spec, const Dataset& train_set,
                          const Dataset& val_set, std::uint64_t seed) {
    FittedBackend fb;
    fb.kind = spec.kind;
    NetworkArchitecture arch = cfg.architecture;
    arch.input_dim = train_set.feature_dim();
    TrainingConfig tc = cfg.training;
    tc.seed = seed;

    if (cfg.architecture_search.enabled) {
        auto candidates = cfg.architecture_search.candidates.empty()
                              ? default_architecture_grid(arch.input_dim)
                              : cfg.architecture_search.candidates;
        for (auto& c : candidates) c.input_dim = arch.input_dim;
        const CrossValidation cv{cfg.architecture_search.folds, seed};
        auto result = grid_search_architecture(candidates, cfg.architecture_search.weight_decays, cv, train_set,
                                               network_cv_evaluator(tc));
        arch = result.architecture;
        tc.weight_decay = result.weight_decay;
        fb.architecture_search = std::move(result);
    }
    fb.architecture = arch;
    fb.weight_decay = tc.weight_decay;

    switch (spec.kind) {
        case BackendKind::Network: fb.backend = train(arch, tc, train_set, val_set); break;
        case BackendKind::Ensemble:
            fb.backend = train_ensemble(arch, tc, train_set, val_set, spec.members);
            break;
        case BackendKind::Laplace: {
            auto net = train(arch, tc, train_set, val_set);
            const double noise = mean_squared_error(net.predict(val_set.features), val_set.labels);
            auto selection = select_prior_precision(net, train_set, val_set, noise, spec.precision_grid);
            fb.precision_cells = std::move(selection.cells);
            fb.backend = std::move(selection.posterior);
            break;
        }
    }
    const auto moments = predict_moments(fb.backend, val_set.features);
    const auto labels = val_set.label_vector();
    fb.noise_variance = estimate_noise_variance(means_of(moments), labels);
    if (!(fb.noise_variance > 0.0)) {
        throw NumericalError("noise variance estimate is zero: the backend interpolates the validation set");
    }
    return fb;
}

std::vector<double> stacking_signal(const FunctionValuePrior& prior, const Dataset& data) {
    std::vector<double> out;
    if (const auto* g = std::get_if<BinaryGatedPrior>(&prior)) {
        for (double s : aux_column(data, g->score_column)) out.push_back(s > g->threshold ? 1.0 : 0.0);
        return out;
    }
    for (const auto& p : evaluate_prior(prior, data)) out.push_back(p.mean);
    return out;
}

FittedModel fit_method(const MethodSpec& method, FittedBackend backend, const Dataset& train_set,
                       const Dataset& val_set) {
    FittedModel model;
    model.backend = std::move(backend);
    model.method = method.kind;
    const PriorSpec& ps = method.prior;
    if (ps.type == PriorType::None) {
        if (method.kind == MethodKind::Stacking) throw ConfigError("stacking needs a prior to combine with");
        model.prior = ConstantPrior{};
        return model;
    }

    PriorFamily family;
    switch (ps.type) {
        case PriorType::None:
        case PriorType::Constant: family = ConstantFamily{ps.mean}; break;
        case PriorType::Gated: {
            double threshold = 0.0;
            if (ps.threshold) {
                threshold = *ps.threshold;
            } else {
                const auto& scores = aux_column(train_set, ps.column);
                std::vector<int> fit;
                for (std::size_t i = 0; i < train_set.size(); ++i) {
                    fit.push_back(train_set.labels[static_cast<Eigen::Index>(i)] > ps.fitness_threshold ? 1 : 0);
                }
                const auto grid = midpoint_grid(scores);
                if (grid.empty()) throw DataError("gated prior: training scores are all equal");
                model.gate = fit_stability_gate(scores, fit, grid);
                threshold = model.gate->threshold;
            }
            family = GatedFamily{ps.column, threshold, ps.mean};
            break;
        }
        case PriorType::Scaled: {
            LinearScaling scaling;
            if (ps.slope) {
                scaling = {*ps.slope, *ps.intercept};
            } else {
                scaling = fit_linear_scaling(aux_column(train_set, ps.column), train_set.label_vector());
                model.scaling = scaling;
            }
            family = ScaledFamily{ps.column, scaling.slope, scaling.intercept};
            break;
        }
    }

    const auto bnn_val = predict_moments(model.backend.backend, val_set.features);
    if (!ps.variance.empty()) {
        model.prior = instantiate(family, ps.variance);
    } else {
        const auto grid = ps.variance_grid.empty() ? default_variance_grid(sample_variance(train_set.labels))
                                                   : ps.variance_grid;
        const std::vector<std::vector<double>> grids(free_parameter_count(family), grid);
        model.prior_search = grid_search_prior(family, grids, bnn_val, val_set, model.backend.noise_variance);
        model.prior = model.prior_search->prior;
    }

    if (method.kind == MethodKind::Stacking) {
        model.stacker = fit_stacker(means_of(bnn_val), stacking_signal(model.prior, val_set), val_set.label_vector(),
                                    ConstantPriorFeature::Drop);
    }
    return model;
}

std::vector<PosteriorPredictive> predict(const FittedModel& model, const Dataset& data) {
    const auto moments = predict_moments(model.backend.backend, data.features);
    if (model.method == MethodKind::Stacking) {
        if (!model.stacker) throw InputError("predict: stacking model has no fitted stacker");
        const auto signal = stacking_signal(model.prior, data);
        std::vector<PosteriorPredictive> out;
        out.reserve(moments.size());
        for (std::size_t i = 0; i < moments.size(); ++i) {
            out.push_back(predict_stacker(*model.stacker, moments[i].mean, signal[i]));
        }
        return out;
    }
    return fuse_all(moments, evaluate_prior(model.prior, data), model.backend.noise_variance);
}

MetricSummary summarize(std::span<const PosteriorPredictive> predictions, std::span<const double> labels) {
    return {labels.size(), mean_log_likelihood(predictions, labels), rmse(predictions, labels),
            mae(predictions, labels)};
}

// ---------------------------------------------------------------- persistence

namespace {

json backend_summary(const FittedBackend& fb) {
    return {{"kind", backend_name(fb.kind)},
            {"architecture", architecture_to_json(fb.architecture)},
            {"weight_decay", fb.weight_decay},
            {"noise_variance", fb.noise_variance}};
}

std::string search_report(const FittedModel& model) {
    std::ostringstream out;
    out << "search,cell,parameters,objective,selected\n";
    if (model.backend.architecture_search) {
        const auto& r = *model.backend.architecture_search;
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            const auto& c = r.cells[i];
            std::string widths;
            for (auto w : c.architecture.hidden_dims) widths += (widths.empty() ? "" : "x") + std::to_string(w);
            const bool chosen = c.architecture == r.architecture && c.weight_decay == r.weight_decay;
            out << "architecture," << i << ",hidden=" << widths << ";weight_decay=" << format_double(c.weight_decay)
                << ',' << format_double(c.mean_val_mse) << ',' << (chosen ? 1 : 0) << '\n';
        }
    }
    const auto* laplace = std::get_if<LaplacePosterior>(&model.backend.backend);
    for (std::size_t i = 0; i < model.backend.precision_cells.size(); ++i) {
        const auto& c = model.backend.precision_cells[i];
        const bool chosen = laplace && laplace->prior_precision == c.prior_precision;
        out << "prior_precision," << i << ',' << format_double(c.prior_precision) << ','
            << format_double(c.log_likelihood) << ',' << (chosen ? 1 : 0) << '\n';
    }
    if (model.prior_search) {
        const auto& r = *model.prior_search;
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            out << "prior_variance," << i << ',' << join_doubles(r.cells[i].params, ';') << ','
                << format_double(r.cells[i].objective) << ',' << (i == r.best_index ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace

void save_model(const FittedModel& model, const std::filesystem::path& dir, const json& extra) {
    std::filesystem::create_directories(dir);
    json manifest = {{"format", "fvbnn-model"}, {"version", 1}};
    manifest["method"] = method_kind_name(model.method);
    manifest["backend"] = backend_summary(model.backend);
    manifest["prior"] = prior_to_json(model.prior);
    if (model.gate) {
        manifest["stability_gate"] = {{"threshold", model.gate->threshold},
                                      {"auc", model.gate->auc},
                                      {"low_scores_fit", model.gate->low_scores_fit}};
    }
    if (model.scaling) manifest["score_scaling"] = {{"slope", model.scaling->slope}, {"intercept", model.scaling->intercept}};
    if (model.stacker) {
        manifest["stacker"] = {{"w_bnn", model.stacker->w_bnn},
                               {"w_prior", model.stacker->w_prior},
                               {"intercept", model.stacker->intercept},
                               {"residual_variance", model.stacker->residual_variance}};
    }
    if (model.prior_search) manifest["prior_search_log_likelihood"] = model.prior_search->best_log_likelihood;

    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TrainedNetwork>) {
                write_json_file(dir / "network.json", save_network(b, dir / "network.bin"));
            } else if constexpr (std::is_same_v<T, TrainedEnsemble>) {
                save_ensemble(b, dir / "ensemble");
            } else {
                save_laplace(b, dir / "laplace");
            }
        },
        model.backend.backend);

    write_json_file(dir / "prior.json", prior_to_json(model.prior));
    write_text_file(dir / "search_report.csv", search_report(model));
    for (const auto& item : extra.items()) manifest[item.key()] = item.value();
    write_json_file(dir / "manifest.json", manifest);
}

FittedModel load_model(const std::filesystem::path& dir) {
    const auto manifest = read_json_file(dir / "manifest.json");
    FittedModel model;
    try {
        if (manifest.value("format", std::string()) != "fvbnn-model") {
            throw DataError(dir.string() + ": not a model directory");
        }
        model.method = manifest.at("method").get<std::string>() == "stacking" ? MethodKind::Stacking
                                                                              : MethodKind::FunctionValue;
        const auto& b = manifest.at("backend");
        const auto kind = b.at("kind").get<std::string>();
        model.backend.architecture = architecture_from_json(b.at("architecture"));
        model.backend.weight_decay = b.at("weight_decay").get<double>();
        model.backend.noise_variance = b.at("noise_variance").get<double>();
        if (kind == "nn") {
            model.backend.kind = BackendKind::Network;
            model.backend.backend = load_network(read_json_file(dir / "network.json"), dir / "network.bin");
        } else if (kind == "ensemble") {
            model.backend.kind = BackendKind::Ensemble;
            model.backend.backend = load_ensemble(dir / "ensemble");
        } else if (kind == "laplace") {
            model.backend.kind = BackendKind::Laplace;
            model.backend.backend = load_laplace(dir / "laplace");
        } else {
            throw DataError(dir.string() + ": unknown backend kind '" + kind + "'");
        }
        model.prior = prior_from_json(manifest.at("prior"));
        if (manifest.contains("stacker")) {
            const auto& s = manifest.at("stacker");
            model.stacker = StackingModel{s.at("w_bnn").get<double>(), s.at("w_prior").get<double>(),
                                          s.at("intercept").get<double>(), s.at("residual_variance").get<double>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + "/manifest.json: " + e.what());
    }
    return model;
}

nlohmann::json data_schema_to_json(const CsvSchema& schema) { return schema_to_json(schema); }
CsvSchema data_schema_from_json(const nlohmann::json& j) {
    try {
        return schema_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("data_schema: ") + e.what());
    }
}

void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       std::span<const PosteriorPredictive> predictions) {
    if (predictions.size() != data.size()) throw InputError("write_predictions: length mismatch");
    std::ostringstream out;
    out << "id,label,mean,function_variance,noise_variance,total_variance\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& p = predictions[i];
        out << data.ids[i] << ',' << format_double(data.labels[static_cast<Eigen::Index>(i)]) << ','
            << format_double(p.mean) << ',' << format_double(p.function_variance) << ','
            << format_double(p.noise_variance) << ',' << format_double(p.total_variance()) << '\n';
    }
    write_text_file(path, out.str());
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides) {
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.backend) cfg.backend.kind = *overrides.backend;
    if (overrides.n_splits) {
        if (*overrides.n_splits == 0) throw ConfigError("--splits: must be >= 1");
        cfg.n_splits = *overrides.n_splits;
    }
}

std::vector<MethodSpec> resolved_methods(const ExperimentConfig& cfg) {
    return cfg.methods.empty() ? default_methods(cfg) : cfg.methods;
}

}  // namespace fvbnn
