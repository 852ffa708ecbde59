#include "fvbnn/fvbnn.h"

#include "error.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "serialize.hpp"

#include <exception>
#include <memory>
#include <new>
#include <string>

struct fvbnn_model {
    fvbnn::FittedModel model;
    fvbnn::CsvSchema schema;
};

struct fvbnn_dataset {
    fvbnn::Dataset data;
};

namespace {

thread_local std::string last_error;

fvbnn_status status_of(fvbnn::ErrorKind kind) {
    switch (kind) {
        case fvbnn::ErrorKind::Config: return FVBNN_ERR_CONFIG;
        case fvbnn::ErrorKind::Data: return FVBNN_ERR_DATA;
        case fvbnn::ErrorKind::Numerical: return FVBNN_ERR_NUMERICAL;
        case fvbnn::ErrorKind::Input: return FVBNN_ERR_INPUT;
        case fvbnn::ErrorKind::Io: return FVBNN_ERR_IO;
    }
    return FVBNN_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
fvbnn_status guarded(F&& body) noexcept {
    try {
        body();
        return FVBNN_OK;
    } catch (const fvbnn::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return FVBNN_ERR_IO;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return FVBNN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return FVBNN_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return FVBNN_ERR_INTERNAL;
    }
}

void require(const void* p, const char* name) {
    if (p == nullptr) throw fvbnn::InputError(std::string(name) + " must not be NULL");
}

fvbnn::Overrides to_overrides(const fvbnn_options* options) {
    fvbnn::Overrides o;
    if (options == nullptr) return o;
    if (options->has_seed) o.seed = options->seed;
    if (options->backend != nullptr) {
        const std::string b = options->backend;
        if (b == "nn") {
            o.backend = fvbnn::BackendKind::Network;
        } else if (b == "ensemble") {
            o.backend = fvbnn::BackendKind::Ensemble;
        } else if (b == "laplace") {
            o.backend = fvbnn::BackendKind::Laplace;
        } else {
            throw fvbnn::ConfigError("backend: '" + b + "' is not one of nn, ensemble, laplace");
        }
    }
    if (options->n_splits != 0) o.n_splits = options->n_splits;
    return o;
}

fvbnn::ExperimentConfig config_with(const char* config_path, const fvbnn_options* options) {
    require(config_path, "config_path");
    auto cfg = fvbnn::load_config(config_path);
    fvbnn::apply_overrides(cfg, to_overrides(options));
    return cfg;
}

}  // namespace

extern "C" {

const char* fvbnn_version(void) { return "1.0.0"; }

const char* fvbnn_last_error(void) { return last_error.c_str(); }

const char* fvbnn_status_name(fvbnn_status status) {
    switch (status) {
        case FVBNN_OK: return "ok";
        case FVBNN_ERR_CONFIG: return "config error";
        case FVBNN_ERR_DATA: return "data error";
        case FVBNN_ERR_NUMERICAL: return "numerical error";
        case FVBNN_ERR_INPUT: return "invalid argument";
        case FVBNN_ERR_IO: return "i/o error";
        case FVBNN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

fvbnn_status fvbnn_train(const char* config_path, const char* out_dir, const fvbnn_options* options) {
    return guarded([&] {
        require(out_dir, "out_dir");
        fvbnn::cmd_train(config_with(config_path, options), out_dir);
    });
}

fvbnn_status fvbnn_evaluate(const char* model_dir, const char* data_path, const char* out_dir) {
    return guarded([&] {
        require(model_dir, "model_dir");
        require(data_path, "data_path");
        require(out_dir, "out_dir");
        fvbnn::cmd_evaluate(model_dir, data_path, out_dir);
    });
}

fvbnn_status fvbnn_compare(const char* config_path, const char* out_dir, const fvbnn_options* options) {
    return guarded([&] {
        require(out_dir, "out_dir");
        fvbnn::cmd_compare(config_with(config_path, options), out_dir);
    });
}

fvbnn_status fvbnn_plot_1d(const char* model_dir, const char* out_prefix) {
    return guarded([&] {
        require(model_dir, "model_dir");
        require(out_prefix, "out_prefix");
        fvbnn::cmd_plot_1d(model_dir, out_prefix);
    });
}

fvbnn_status fvbnn_synth_demo(const char* config_path, const char* out_dir, const fvbnn_options* options) {
    return guarded([&] {
        require(out_dir, "out_dir");
        auto cfg = config_path ? fvbnn::load_config(config_path) : fvbnn::synth_demo_config();
        fvbnn::apply_overrides(cfg, to_overrides(options));
        fvbnn::cmd_synth_demo(cfg, out_dir);
    });
}

fvbnn_status fvbnn_model_load(const char* model_dir, fvbnn_model** out) {
    return guarded([&] {
        require(model_dir, "model_dir");
        require(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<fvbnn_model>();
        handle->model = fvbnn::load_model(model_dir);
        const auto manifest = fvbnn::read_json_file(std::filesystem::path(model_dir) / "manifest.json");
        if (!manifest.contains("data_schema")) throw fvbnn::DataError("model manifest has no data_schema");
        handle->schema = fvbnn::data_schema_from_json(manifest.at("data_schema"));
        *out = handle.release();
    });
}

void fvbnn_model_free(fvbnn_model* model) { delete model; }

fvbnn_status fvbnn_model_noise_variance(const fvbnn_model* model, double* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->model.backend.noise_variance;
    });
}

fvbnn_status fvbnn_dataset_load(const fvbnn_model* model, const char* csv_path, fvbnn_dataset** out) {
    return guarded([&] {
        require(model, "model");
        require(csv_path, "csv_path");
        require(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<fvbnn_dataset>();
        handle->data = fvbnn::load_csv(csv_path, model->schema);
        *out = handle.release();
    });
}

void fvbnn_dataset_free(fvbnn_dataset* dataset) { delete dataset; }

size_t fvbnn_dataset_size(const fvbnn_dataset* dataset) { return dataset ? dataset->data.size() : 0; }

fvbnn_status fvbnn_model_predict(const fvbnn_model* model, const fvbnn_dataset* dataset, double* mean,
                                 double* function_variance, double* total_variance, size_t capacity) {
    return guarded([&] {
        require(model, "model");
        require(dataset, "dataset");
        if (capacity < dataset->data.size()) {
            throw fvbnn::InputError("capacity " + std::to_string(capacity) + " is smaller than the dataset (" +
                                    std::to_string(dataset->data.size()) + " rows)");
        }
        if (dataset->data.feature_dim() != model->model.backend.architecture.input_dim) {
            throw fvbnn::DataError("dataset feature width does not match the model");
        }
        const auto predictions = fvbnn::predict(model->model, dataset->data);
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (mean) mean[i] = predictions[i].mean;
            if (function_variance) function_variance[i] = predictions[i].function_variance;
            if (total_variance) total_variance[i] = predictions[i].total_variance();
        }
    });
}

fvbnn_status fvbnn_fuse(double bnn_mean, double bnn_variance, double prior_mean, double prior_variance,
                        double* mean, double* variance) {
    return guarded([&] {
        require(mean, "mean");
        require(variance, "variance");
        const auto fused = fvbnn::fuse({bnn_mean, bnn_variance}, {prior_mean, prior_variance});
        *mean = fused.mean;
        *variance = fused.variance;
    });
}

fvbnn_status fvbnn_wilcoxon(const double* a, const double* b, size_t n, double* p_value, double* w_plus) {
    return guarded([&] {
        require(a, "a");
        require(b, "b");
        require(p_value, "p_value");
        const auto r = fvbnn::wilcoxon_signed_rank({a, n}, {b, n}, fvbnn::Alternative::AGreater);
        *p_value = r.p_value;
        if (w_plus) *w_plus = r.w_plus;
    });
}

}  // extern "C"
