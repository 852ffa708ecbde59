// Command-line front end. Every verb goes through the C interface.

#include "fvbnn/fvbnn.h"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

// 0 success, 1 usage/config, 2 data, 3 numerical (and anything unexpected).
int exit_code(fvbnn_status status) {
    switch (status) {
        case FVBNN_OK: return 0;
        case FVBNN_ERR_CONFIG:
        case FVBNN_ERR_INPUT: return 1;
        case FVBNN_ERR_DATA:
        case FVBNN_ERR_IO: return 2;
        case FVBNN_ERR_NUMERICAL:
        case FVBNN_ERR_INTERNAL: return 3;
    }
    return 3;
}

int report(fvbnn_status status) {
    if (status != FVBNN_OK) {
        std::cerr << "fvbnn: " << fvbnn_status_name(status) << ": " << fvbnn_last_error() << '\n';
    }
    return exit_code(status);
}

struct OptionFlags {
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::size_t splits = 0;

    fvbnn_options to_options() const {
        fvbnn_options o{};
        o.has_seed = seed.has_value() ? 1 : 0;
        o.seed = seed.value_or(0);
        o.backend = backend.empty() ? nullptr : backend.c_str();
        o.n_splits = splits;
        return o;
    }
};

void add_seed_backend(CLI::App* cmd, OptionFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Override the top-level seed");
    cmd->add_option("--backend", flags.backend, "Override the backend")
        ->check(CLI::IsMember({"nn", "ensemble", "laplace"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian neural network regression with function-value priors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(fvbnn_version()));

    std::string config;
    std::string out;
    std::string model;
    std::string data;
    OptionFlags flags;

    auto* train = app.add_subcommand("train", "Train a backend and fit the prior; writes a model directory");
    train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out, "Model directory to write")->required();
    add_seed_backend(train, flags);

    auto* evaluate = app.add_subcommand("evaluate", "Predict on a CSV and summarize LL / RMSE / MAE");
    evaluate->add_option("--model", model, "Model directory")->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--data", data, "CSV with the model's columns")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", out, "Output directory")->required();

    auto* compare = app.add_subcommand("compare", "Compare methods over seeded splits with Wilcoxon tests");
    compare->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", out, "Output directory")->required();
    compare->add_option("--splits", flags.splits, "Number of splits")->check(CLI::PositiveNumber);
    add_seed_backend(compare, flags);

    auto* demo = app.add_subcommand("synth-demo", "Generate the 1-D task, train and plot");
    demo->add_option("--config", config, "Optional config replacing the built-in demo")->check(CLI::ExistingFile);
    demo->add_option("--out", out, "Output directory")->required();
    add_seed_backend(demo, flags);

    auto* plot = app.add_subcommand("plot-1d", "Band CSV and SVG for a model with one input feature");
    plot->add_option("--model", model, "Model directory")->required()->check(CLI::ExistingDirectory);
    plot->add_option("--out", out, "Output prefix (writes <out>_band.csv, <out>_points.csv, <out>.svg)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const fvbnn_options options = flags.to_options();
    if (*train) return report(fvbnn_train(config.c_str(), out.c_str(), &options));
    if (*evaluate) return report(fvbnn_evaluate(model.c_str(), data.c_str(), out.c_str()));
    if (*compare) return report(fvbnn_compare(config.c_str(), out.c_str(), &options));
    if (*demo) return report(fvbnn_synth_demo(config.empty() ? nullptr : config.c_str(), out.c_str(), &options));
    if (*plot) return report(fvbnn_plot_1d(model.c_str(), out.c_str()));
    return 1;
}
