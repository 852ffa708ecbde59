#include "error.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "serialize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace fvbnn {

namespace {

using nlohmann::json;

json metrics_to_json(const MetricSummary& m) {
    return {{"n", m.n}, {"log_likelihood", m.log_likelihood}, {"rmse", m.rmse}, {"mae", m.mae}};
}

std::string fixed(double value, int digits) {
    if (!std::isfinite(value)) return format_double(value);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

std::string slug(const std::string& name) {
    std::string out;
    for (char c : name) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            out.push_back(static_cast<char>(std::tolower(u)));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "method" : out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

std::string split_dir_name(std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "split_%02zu", s);
    return buf;
}

Dataset grid_dataset(const PlotSpec& plot) {
    Dataset grid;
    grid.features.resize(static_cast<Eigen::Index>(plot.points), 1);
    grid.labels = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plot.points));
    for (std::size_t i = 0; i < plot.points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(plot.points - 1);
        grid.features(static_cast<Eigen::Index>(i), 0) = plot.x_min + t * (plot.x_max - plot.x_min);
        grid.ids.push_back("g" + std::to_string(i));
    }
    return grid;
}

}  // namespace

// ---------------------------------------------------------------- train / evaluate

void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const PreparedData data = prepare_data(cfg, 0);
    MethodSpec method{"model", MethodKind::FunctionValue, cfg.backend, cfg.prior};
    auto backend = fit_backend(cfg, cfg.backend, data.train, data.val, training_seed(cfg, 0));
    const FittedModel model = fit_method(method, std::move(backend), data.train, data.val);

    std::filesystem::create_directories(out_dir);
    write_csv(out_dir / "train.csv", data.train, data.schema);
    write_csv(out_dir / "val.csv", data.val, data.schema);
    if (!data.test.empty()) write_csv(out_dir / "test.csv", data.test, data.schema);

    json metrics;
    metrics["train"] = metrics_to_json(summarize(predict(model, data.train), data.train.label_vector()));
    metrics["val"] = metrics_to_json(summarize(predict(model, data.val), data.val.label_vector()));
    if (!data.test.empty()) {
        metrics["test"] = metrics_to_json(summarize(predict(model, data.test), data.test.label_vector()));
    }
    const char* kinds[] = {"csv", "synthetic_1d", "landscape"};
    json extra{{"config", config_to_json(cfg)},
               {"dataset_kind", kinds[static_cast<int>(cfg.data.kind)]},
               {"data_schema", data_schema_to_json(data.schema)},
               {"metrics", metrics}};
    save_model(model, out_dir, extra);
}

void cmd_evaluate(const std::filesystem::path& model_dir, const std::filesystem::path& data_path,
                  const std::filesystem::path& out_dir) {
    const FittedModel model = load_model(model_dir);
    const auto manifest = read_json_file(model_dir / "manifest.json");
    if (!manifest.contains("data_schema")) throw DataError(model_dir.string() + ": manifest has no data_schema");
    const CsvSchema schema = data_schema_from_json(manifest.at("data_schema"));
    const Dataset data = load_csv(data_path, schema);
    if (data.empty()) throw DataError(data_path.string() + ": no rows to evaluate");
    if (data.feature_dim() != model.backend.architecture.input_dim) {
        throw DataError(data_path.string() + ": " + std::to_string(data.feature_dim()) +
                        " features, model expects " + std::to_string(model.backend.architecture.input_dim));
    }
    const auto predictions = predict(model, data);
    const auto summary = summarize(predictions, data.label_vector());

    std::filesystem::create_directories(out_dir);
    write_predictions(out_dir / "predictions.csv", data, predictions);
    std::ostringstream out;
    out << "n,log_likelihood,rmse,mae\n"
        << summary.n << ',' << format_double(summary.log_likelihood) << ',' << format_double(summary.rmse) << ','
        << format_double(summary.mae) << '\n';
    write_text_file(out_dir / "metrics.csv", out.str());
}

// ---------------------------------------------------------------- compare

namespace {

struct CellResult {
    bool ok = false;
    MetricSummary metrics;
    std::string message;
};

enum Metric { kLogLikelihood, kRmse, kMae };
const char* kMetricNames[] = {"log_likelihood", "rmse", "mae"};

double metric_value(const MetricSummary& m, int metric) {
    return metric == kLogLikelihood ? m.log_likelihood : metric == kRmse ? m.rmse : m.mae;
}

struct PairTest {
    std::size_t n_pairs = 0;
    double w_plus = 0.0;
    double p_value = 1.0;
    std::string flag;  // exact | normal | degenerate | insufficient
};

// One-sided test that method a beats method b (higher LL, lower errors).
PairTest compare_pair(const std::vector<std::vector<CellResult>>& cells, std::size_t a, std::size_t b, int metric) {
    std::vector<double> va;
    std::vector<double> vb;
    for (const auto& split : cells) {
        if (!split[a].ok || !split[b].ok) continue;
        const double sign = metric == kLogLikelihood ? 1.0 : -1.0;
        va.push_back(sign * metric_value(split[a].metrics, metric));
        vb.push_back(sign * metric_value(split[b].metrics, metric));
    }
    PairTest t;
    t.n_pairs = va.size();
    if (a == b || std::equal(va.begin(), va.end(), vb.begin())) {
        t.flag = "degenerate";
        return t;
    }
    try {
        const auto r = wilcoxon_signed_rank(va, vb, Alternative::AGreater);
        t.w_plus = r.w_plus;
        t.p_value = r.p_value;
        t.flag = r.exact ? "exact" : "normal";
    } catch (const InputError&) {
        t.p_value = std::nan("");
        t.flag = "insufficient";
    }
    return t;
}

}  // namespace

void cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const auto methods = resolved_methods(cfg);
    if (methods.size() < 2) throw ConfigError("methods: compare needs at least 2 methods");
    std::set<std::string> slugs;
    for (const auto& m : methods) {
        if (!slugs.insert(slug(m.name)).second) {
            throw ConfigError("methods: names '" + m.name + "' and another map to the same file name");
        }
    }
    std::filesystem::create_directories(out_dir / "predictions");

    std::vector<std::vector<CellResult>> cells(cfg.n_splits, std::vector<CellResult>(methods.size()));
    for (std::size_t s = 0; s < cfg.n_splits; ++s) {
        const auto split_dir = out_dir / "predictions" / split_dir_name(s);
        std::filesystem::create_directories(split_dir);
        std::optional<PreparedData> data;
        std::string data_error;
        try {
            data = prepare_data(cfg, s);
            if (data->test.empty()) throw DataError("split has no test rows");
        } catch (const Error& e) {
            data_error = e.what();
        }
        // Methods with the same backend settings share one trained backend.
        std::map<std::string, std::shared_ptr<const FittedBackend>> backends;
        std::map<std::string, std::string> backend_errors;
        for (std::size_t m = 0; m < methods.size(); ++m) {
            CellResult& cell = cells[s][m];
            if (!data) {
                cell.message = data_error;
                continue;
            }
            try {
                const std::string key = json{{"kind", backend_name(methods[m].backend.kind)},
                                             {"members", methods[m].backend.members},
                                             {"grid", methods[m].backend.precision_grid}}
                                            .dump();
                if (auto err = backend_errors.find(key); err != backend_errors.end()) throw DataError(err->second);
                if (!backends.count(key)) {
                    try {
                        backends[key] = std::make_shared<const FittedBackend>(
                            fit_backend(cfg, methods[m].backend, data->train, data->val, training_seed(cfg, s)));
                    } catch (const Error& e) {
                        backend_errors[key] = e.what();
                        throw;
                    }
                }
                const FittedModel model = fit_method(methods[m], *backends.at(key), data->train, data->val);
                const auto predictions = predict(model, data->test);
                cell.metrics = summarize(predictions, data->test.label_vector());
                cell.ok = true;
                write_predictions(split_dir / (slug(methods[m].name) + ".csv"), data->test, predictions);
            } catch (const Error& e) {
                cell.message = e.what();
            }
        }
    }

    // Per-split metrics.
    std::ostringstream per_split;
    per_split << "split,method,status,n,log_likelihood,rmse,mae,message\n";
    for (std::size_t s = 0; s < cfg.n_splits; ++s) {
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const auto& c = cells[s][m];
            per_split << s << ',' << csv_field(methods[m].name) << ',' << (c.ok ? "ok" : "failed") << ',';
            if (c.ok) {
                per_split << c.metrics.n << ',' << format_double(c.metrics.log_likelihood) << ','
                          << format_double(c.metrics.rmse) << ',' << format_double(c.metrics.mae) << ",\n";
            } else {
                per_split << ",,,," << csv_field(c.message) << '\n';
            }
        }
    }
    write_text_file(out_dir / "per_split.csv", per_split.str());

    // Mean +- standard error tables.
    std::ostringstream table;
    std::ostringstream md;
    table << "method,n_ok,log_likelihood_mean,log_likelihood_se,rmse_mean,rmse_se,mae_mean,mae_se\n";
    md << "# Method comparison (" << cfg.n_splits << " splits)\n\n"
       << "Mean ± standard error over successful splits. Higher LL is better; lower RMSE/MAE is better.\n\n"
       << "| Method | LL | RMSE | MAE | splits |\n|---|---|---|---|---|\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
        table << csv_field(methods[m].name);
        md << "| " << methods[m].name;
        std::size_t n_ok = 0;
        for (std::size_t s = 0; s < cfg.n_splits; ++s) n_ok += cells[s][m].ok ? 1 : 0;
        table << ',' << n_ok;
        for (int metric = 0; metric < 3; ++metric) {
            std::vector<double> values;
            for (std::size_t s = 0; s < cfg.n_splits; ++s) {
                if (cells[s][m].ok) values.push_back(metric_value(cells[s][m].metrics, metric));
            }
            const double mean = values.empty() ? std::nan("")
                                               : std::accumulate(values.begin(), values.end(), 0.0) /
                                                     static_cast<double>(values.size());
            const double se = values.size() >= 2 ? standard_error(values) : std::nan("");
            table << ',' << format_double(mean) << ',' << format_double(se);
            md << " | " << fixed(mean, 3) << " ± " << fixed(se, 3);
        }
        table << '\n';
        md << " | " << n_ok << " |\n";
    }

    // Pairwise one-sided Wilcoxon tests: p-value that the row method beats the column method.
    std::ostringstream wilcoxon;
    wilcoxon << "metric,method_a,method_b,n_pairs,w_plus,p_value,flag\n";
    for (int metric = 0; metric < 3; ++metric) {
        md << "\n## Wilcoxon signed-rank p-values, " << kMetricNames[metric]
           << " (row better than column)\n\n| |";
        for (const auto& m : methods) md << ' ' << m.name << " |";
        md << "\n|---|";
        for (std::size_t i = 0; i < methods.size(); ++i) md << "---|";
        md << '\n';
        for (std::size_t a = 0; a < methods.size(); ++a) {
            md << "| " << methods[a].name << " |";
            for (std::size_t b = 0; b < methods.size(); ++b) {
                const auto t = compare_pair(cells, a, b, metric);
                wilcoxon << kMetricNames[metric] << ',' << csv_field(methods[a].name) << ','
                         << csv_field(methods[b].name) << ',' << t.n_pairs << ',' << format_double(t.w_plus) << ','
                         << format_double(t.p_value) << ',' << t.flag << '\n';
                md << ' ' << fixed(t.p_value, 3) << (t.flag == "degenerate" ? "†" : "") << " |";
            }
            md << '\n';
        }
    }
    md << "\n† degenerate comparison (all paired differences zero), reported as 1.000.\n";
    write_text_file(out_dir / "comparison.csv", table.str());
    write_text_file(out_dir / "wilcoxon.csv", wilcoxon.str());
    write_text_file(out_dir / "comparison.md", md.str());
}

// ---------------------------------------------------------------- plot

namespace {

struct SvgFrame {
    double x_min, x_max, y_min, y_max;
    double width = 800.0, height = 450.0, margin = 50.0;

    double px(double x) const { return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin); }
    double py(double y) const { return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin); }
};

std::string svg_number(double v) { return fixed(v, 2); }

std::string polyline(const SvgFrame& f, std::span<const double> xs, std::span<const double> ys) {
    std::string pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) pts.push_back(' ');
        pts += svg_number(f.px(xs[i])) + "," + svg_number(f.py(ys[i]));
    }
    return pts;
}

std::string band_polygon(const SvgFrame& f, std::span<const double> xs, std::span<const double> lo,
                         std::span<const double> hi) {
    std::vector<double> px(xs.begin(), xs.end());
    std::vector<double> py(hi.begin(), hi.end());
    for (std::size_t i = xs.size(); i-- > 0;) {
        px.push_back(xs[i]);
        py.push_back(lo[i]);
    }
    return polyline(f, px, py);
}

}  // namespace

void cmd_plot_1d(const std::filesystem::path& model_dir, const std::filesystem::path& out_prefix) {
    const FittedModel model = load_model(model_dir);
    const auto manifest = read_json_file(model_dir / "manifest.json");
    if (model.backend.architecture.input_dim != 1) {
        throw DataError("plot-1d: the model has " + std::to_string(model.backend.architecture.input_dim) +
                        " input features, plotting needs exactly 1");
    }
    PlotSpec plot;
    bool synthetic = false;
    if (manifest.contains("config")) {
        const auto cfg = parse_config(manifest.at("config"));
        plot = cfg.plot;
        synthetic = cfg.data.kind == DataSource::Kind::Synthetic1d;
    }
    const Dataset grid = grid_dataset(plot);
    const auto fused = predict(model, grid);
    const auto moments = predict_moments(model.backend.backend, grid.features);

    const std::size_t n = plot.points;
    std::vector<double> xs(n), mean(n), lo1(n), hi1(n), lo2(n), hi2(n), truth(n);
    std::ostringstream band;
    band << "x,mean,lower2,lower1,upper1,upper2," << (synthetic ? "true," : "") << "bnn_mean,bnn_sd\n";
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = grid.features(static_cast<Eigen::Index>(i), 0);
        const double sd = std::sqrt(fused[i].total_variance());
        mean[i] = fused[i].mean;
        lo1[i] = mean[i] - sd;
        hi1[i] = mean[i] + sd;
        lo2[i] = mean[i] - 2 * sd;
        hi2[i] = mean[i] + 2 * sd;
        truth[i] = synthetic_1d_truth(xs[i]);
        const double bnn_sd = std::sqrt(moments[i].variance + model.backend.noise_variance);
        band << format_double(xs[i]) << ',' << format_double(mean[i]) << ',' << format_double(lo2[i]) << ','
             << format_double(lo1[i]) << ',' << format_double(hi1[i]) << ',' << format_double(hi2[i]) << ','
             << (synthetic ? format_double(truth[i]) + "," : "") << format_double(moments[i].mean) << ','
             << format_double(bnn_sd) << '\n';
    }

    const auto manifest_schema = data_schema_from_json(manifest.at("data_schema"));
    const Dataset train_set = load_csv(model_dir / "train.csv", manifest_schema);
    std::ostringstream points;
    points << "x,y\n";
    std::vector<double> pxs, pys;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        pxs.push_back(train_set.features(r, 0));
        pys.push_back(train_set.labels[r]);
        points << format_double(pxs.back()) << ',' << format_double(pys.back()) << '\n';
    }

    const auto parent = out_prefix.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const std::string prefix = out_prefix.string();
    write_text_file(prefix + "_band.csv", band.str());
    write_text_file(prefix + "_points.csv", points.str());

    // The vertical range follows the data so that exploding bands are clipped.
    double y_lo = 0.0;
    double y_hi = 0.0;
    for (double y : pys) y_lo = std::min(y_lo, y), y_hi = std::max(y_hi, y);
    if (synthetic) {
        for (double t : truth) y_lo = std::min(y_lo, t), y_hi = std::max(y_hi, t);
    }
    const double pad = 0.5 * (y_hi - y_lo) + 0.5;
    const SvgFrame f{plot.x_min, plot.x_max, y_lo - pad, y_hi + pad};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
        << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n"
        << "<desc>px = " << f.margin << " + (x - " << format_double(f.x_min) << ") / "
        << format_double(f.x_max - f.x_min) << " * " << f.width - 2 * f.margin << "; py = "
        << f.height - f.margin << " - (y - " << format_double(f.y_min) << ") / " << format_double(f.y_max - f.y_min)
        << " * " << f.height - 2 * f.margin << "</desc>\n"
        << "<defs><clipPath id=\"plot\"><rect x=\"" << f.margin << "\" y=\"" << f.margin << "\" width=\""
        << f.width - 2 * f.margin << "\" height=\"" << f.height - 2 * f.margin << "\"/></clipPath></defs>\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<g clip-path=\"url(#plot)\">\n"
        << "<polygon id=\"band2\" fill=\"#c6dbef\" points=\"" << band_polygon(f, xs, lo2, hi2) << "\"/>\n"
        << "<polygon id=\"band1\" fill=\"#6baed6\" points=\"" << band_polygon(f, xs, lo1, hi1) << "\"/>\n";
    if (synthetic) {
        svg << "<polyline id=\"true\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\" points=\""
            << polyline(f, xs, truth) << "\"/>\n";
    }
    svg << "<polyline id=\"mean\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\""
        << polyline(f, xs, mean) << "\"/>\n<g id=\"points\" fill=\"#d94801\">\n";
    for (std::size_t i = 0; i < pxs.size(); ++i) {
        svg << "<circle cx=\"" << svg_number(f.px(pxs[i])) << "\" cy=\"" << svg_number(f.py(pys[i]))
            << "\" r=\"1.5\"/>\n";
    }
    svg << "</g>\n</g>\n"
        << "<rect x=\"" << f.margin << "\" y=\"" << f.margin << "\" width=\"" << f.width - 2 * f.margin
        << "\" height=\"" << f.height - 2 * f.margin << "\" fill=\"none\" stroke=\"black\"/>\n"
        << "<text x=\"" << f.margin << "\" y=\"" << f.height - 15 << "\" font-size=\"12\">x from "
        << format_double(f.x_min) << " to " << format_double(f.x_max) << "</text>\n"
        << "</svg>\n";
    write_text_file(prefix + ".svg", svg.str());
}

// ---------------------------------------------------------------- synth-demo

ExperimentConfig synth_demo_config() {
    ExperimentConfig cfg;
    cfg.data.kind = DataSource::Kind::Synthetic1d;
    cfg.split.kind = SplitSpec::Kind::Generated;
    cfg.architecture.hidden_dims = {50, 50};
    cfg.training.patience = 100;
    cfg.training.max_epochs = 2000;
    cfg.backend.kind = BackendKind::Laplace;
    cfg.prior.type = PriorType::Constant;
    cfg.prior.mean = 0.0;
    cfg.prior.variance = {0.43 * 0.43};
    return cfg;
}

void cmd_synth_demo(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.data.kind != DataSource::Kind::Synthetic1d) {
        throw ConfigError("dataset.kind: synth-demo runs on the synthetic_1d dataset");
    }
    cmd_train(cfg, out_dir / "model");
    cmd_plot_1d(out_dir / "model", out_dir / "plot");

    // Extrapolation summary over |x| in [3, 6]: fused vs plain-BNN mean error.
    const FittedModel model = load_model(out_dir / "model");
    PlotSpec region{-6.0, 6.0, 1201};
    const Dataset grid = grid_dataset(region);
    const auto fused = predict(model, grid);
    const auto bnn = predict_moments(model.backend.backend, grid.features);
    double fused_abs = 0.0;
    double bnn_abs = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < region.points; ++i) {
        const double x = grid.features(static_cast<Eigen::Index>(i), 0);
        if (std::abs(x) < 3.0) continue;
        const double truth = synthetic_1d_truth(x);
        fused_abs += std::abs(fused[i].mean - truth);
        bnn_abs += std::abs(bnn[i].mean - truth);
        ++count;
    }
    std::ostringstream out;
    out << "region,points,fused_mae,bnn_mae\n"
        << "abs_x_3_to_6," << count << ',' << format_double(fused_abs / static_cast<double>(count)) << ','
        << format_double(bnn_abs / static_cast<double>(count)) << '\n';
    write_text_file(out_dir / "extrapolation.csv", out.str());
}

}  // namespace fvbnn
