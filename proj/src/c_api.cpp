#include "stressfuse/stressfuse.h"

#include <cstring>
#include <new>
#include <string>

#include "stressfuse/dataset.hpp"
#include "stressfuse/errors.hpp"
#include "stressfuse/synth.hpp"
#include "stressfuse/timeline.hpp"
#include "stressfuse/workflow.hpp"

using namespace stressfuse;

struct sf_dataset {
    data::LoadedDataset loaded;
};

struct sf_model {
    workflow::Bundle bundle;
};

struct sf_timeline {
    timeline::StressTimeline timeline;
};

namespace {

thread_local std::string g_last_error;

sf_status status_of(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return SF_ERROR_INVALID_ARGUMENT;
    case ErrorKind::dimension_mismatch: return SF_ERROR_DIMENSION;
    case ErrorKind::numeric_input: return SF_ERROR_NUMERIC;
    case ErrorKind::parse: return SF_ERROR_PARSE;
    case ErrorKind::schema: return SF_ERROR_SCHEMA;
    case ErrorKind::io: return SF_ERROR_IO;
    case ErrorKind::corrupt_file: return SF_ERROR_CORRUPT_FILE;
    case ErrorKind::version_mismatch: return SF_ERROR_VERSION;
    case ErrorKind::divergence: return SF_ERROR_DIVERGENCE;
    case ErrorKind::missing_modality: return SF_ERROR_MISSING_MODALITY;
    case ErrorKind::empty_result: return SF_ERROR_EMPTY_RESULT;
    case ErrorKind::undefined_metric: return SF_ERROR_UNDEFINED_METRIC;
    }
    return SF_ERROR_INTERNAL;
}

sf_status fail_status(sf_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <class Fn>
sf_status guarded(Fn&& fn) {
    try {
        fn();
        return SF_OK;
    } catch (const Error& e) {
        return fail_status(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail_status(SF_ERROR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail_status(SF_ERROR_INTERNAL, e.what());
    } catch (...) {
        return fail_status(SF_ERROR_INTERNAL, "unknown error");
    }
}

sf_status require(bool ok, const char* message) {
    return ok ? SF_OK : fail_status(SF_ERROR_INVALID_ARGUMENT, message);
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string text_or(const char* text, const char* fallback) {
    return text ? std::string(text) : std::string(fallback);
}

fusion::Record record_from_blocks(const sf_model* m,
                                  const double* posture, size_t posture_len,
                                  const double* facial, size_t facial_len,
                                  const double* keystroke, size_t keystroke_len,
                                  const double* physiology, size_t physiology_len) {
    // Raw values come in; the bundle's stored stats normalize them here so
    // callers never have to know the training statistics.
    const double* blocks[4] = {posture, facial, keystroke, physiology};
    const size_t lens[4] = {posture_len, facial_len, keystroke_len, physiology_len};

    fusion::Record record;
    std::optional<Vector>* slots[4] = {&record.posture, &record.facial, &record.keystroke,
                                       &record.physiology};
    for (std::size_t b = 0; b < 4; ++b) {
        data::Modality m_b = data::kAllModalities[b];
        if (!blocks[b])
            fail(ErrorKind::missing_modality,
                 std::string(data::modality_name(m_b)) + " block pointer is null");
        std::size_t stat_index = m->bundle.stat_modalities.size();
        for (std::size_t i = 0; i < m->bundle.stat_modalities.size(); ++i)
            if (m->bundle.stat_modalities[i] == m_b) stat_index = i;
        if (stat_index == m->bundle.stat_modalities.size())
            fail(ErrorKind::invalid_argument,
                 std::string("bundle carries no normalization stats for ") +
                     data::modality_name(m_b));
        const data::NormalizationStats& stats = m->bundle.stats[stat_index];
        if (lens[b] != stats.mean.size())
            fail(ErrorKind::dimension_mismatch,
                 std::string(data::modality_name(m_b)) + " expects " +
                     std::to_string(stats.mean.size()) + " values, got " +
                     std::to_string(lens[b]));
        Vector v(lens[b]);
        for (std::size_t j = 0; j < lens[b]; ++j) {
            if (!std::isfinite(blocks[b][j]))
                fail(ErrorKind::numeric_input,
                     std::string("non-finite value in the ") + data::modality_name(m_b) +
                         " block");
            v[j] = stats.stddev[j] == 0.0
                       ? 0.0
                       : (blocks[b][j] - stats.mean[j]) / stats.stddev[j];
        }
        *slots[b] = std::move(v);
    }
    return record;
}

} // namespace

extern "C" {

const char* sf_version(void) { return "1.0.0"; }

const char* sf_status_name(sf_status status) {
    switch (status) {
    case SF_OK: return "ok";
    case SF_ERROR_INVALID_ARGUMENT: return "invalid_argument";
    case SF_ERROR_DIMENSION: return "dimension_mismatch";
    case SF_ERROR_NUMERIC: return "numeric_input";
    case SF_ERROR_PARSE: return "parse";
    case SF_ERROR_SCHEMA: return "schema";
    case SF_ERROR_IO: return "io";
    case SF_ERROR_CORRUPT_FILE: return "corrupt_file";
    case SF_ERROR_VERSION: return "version_mismatch";
    case SF_ERROR_DIVERGENCE: return "divergence";
    case SF_ERROR_MISSING_MODALITY: return "missing_modality";
    case SF_ERROR_EMPTY_RESULT: return "empty_result";
    case SF_ERROR_UNDEFINED_METRIC: return "undefined_metric";
    case SF_ERROR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

void sf_string_free(char* s) { delete[] s; }

sf_status sf_synth_generate(const char* config_json, const char* out_dir) {
    if (sf_status s = require(out_dir != nullptr, "out_dir is null"); s != SF_OK) return s;
    return guarded([&] {
        synth::SynthConfig config =
            synth::config_from_json_text(text_or(config_json, "{}"));
        synth::write_dataset(synth::generate(config), out_dir);
    });
}

sf_status sf_dataset_open(const char* manifest_path, sf_dataset** out) {
    if (sf_status s = require(manifest_path && out, "manifest_path or out is null");
        s != SF_OK)
        return s;
    *out = nullptr;
    return guarded([&] { *out = new sf_dataset{data::load_dataset(manifest_path)}; });
}

void sf_dataset_close(sf_dataset* ds) { delete ds; }

sf_status sf_dataset_row_count(const sf_dataset* ds, size_t* out) {
    if (sf_status s = require(ds && out, "dataset or out is null"); s != SF_OK) return s;
    *out = ds->loaded.dataset.rows();
    return SF_OK;
}

sf_status sf_dataset_report_json(const sf_dataset* ds, char** out_json) {
    if (sf_status s = require(ds && out_json, "dataset or out is null"); s != SF_OK) return s;
    return guarded(
        [&] { *out_json = copy_string(workflow::dataset_report(ds->loaded).dump(2)); });
}

sf_status sf_train(const sf_dataset* ds, const char* options_json, const char* bundle_dir,
                   const char* reports_dir) {
    if (sf_status s = require(ds && bundle_dir, "dataset or bundle_dir is null"); s != SF_OK)
        return s;
    return guarded([&] {
        workflow::TrainOptions options =
            workflow::train_options_from_json_text(text_or(options_json, "{}"));
        if (reports_dir) {
            workflow::train_to_directories(ds->loaded.dataset, options, bundle_dir,
                                           reports_dir);
        } else {
            workflow::TrainResult result = workflow::train_bundle(ds->loaded.dataset, options);
            workflow::save_bundle(result.bundle, bundle_dir);
        }
    });
}

sf_status sf_model_open(const char* bundle_dir, sf_model** out) {
    if (sf_status s = require(bundle_dir && out, "bundle_dir or out is null"); s != SF_OK)
        return s;
    *out = nullptr;
    return guarded([&] { *out = new sf_model{workflow::load_bundle(bundle_dir)}; });
}

void sf_model_close(sf_model* m) { delete m; }

sf_status sf_model_info_json(const sf_model* m, char** out_json) {
    if (sf_status s = require(m && out_json, "model or out is null"); s != SF_OK) return s;
    return guarded([&] {
        workflow::json info;
        info["mode"] = fusion::fusion_mode_name(m->bundle.model.mode);
        info["threshold"] = m->bundle.model.threshold;
        info["fused_input_dim"] = m->bundle.model.fused_input_dim();
        info["has_tlx"] = m->bundle.tlx.has_value();
        workflow::json blocks = workflow::json::array();
        for (std::size_t b = 0; b < m->bundle.stat_modalities.size(); ++b)
            blocks.push_back({{"modality", data::modality_name(m->bundle.stat_modalities[b])},
                              {"width", m->bundle.stats[b].mean.size()}});
        info["blocks"] = blocks;
        info["train_rows"] = m->bundle.train_keys.size();
        info["test_rows"] = m->bundle.test_keys.size();
        *out_json = copy_string(info.dump(2));
    });
}

sf_status sf_model_predict(const sf_model* m,
                           const double* posture, size_t posture_len,
                           const double* facial, size_t facial_len,
                           const double* keystroke, size_t keystroke_len,
                           const double* physiology, size_t physiology_len,
                           double* probability_out, int* label_out) {
    if (sf_status s = require(m && probability_out && label_out, "model or outputs null");
        s != SF_OK)
        return s;
    return guarded([&] {
        fusion::Record record =
            record_from_blocks(m, posture, posture_len, facial, facial_len, keystroke,
                               keystroke_len, physiology, physiology_len);
        fusion::Prediction p = fusion::predict_stress(m->bundle.model, record);
        *probability_out = p.probability;
        *label_out = p.label;
    });
}

sf_status sf_model_predict_tlx(const sf_model* m,
                               const double* posture, size_t posture_len,
                               const double* facial, size_t facial_len,
                               const double* keystroke, size_t keystroke_len,
                               const double* physiology, size_t physiology_len,
                               double* tlx_out) {
    if (sf_status s = require(m && tlx_out, "model or output null"); s != SF_OK) return s;
    return guarded([&] {
        if (!m->bundle.tlx)
            fail(ErrorKind::invalid_argument,
                 "this bundle was trained without a workload regressor");
        fusion::Record record =
            record_from_blocks(m, posture, posture_len, facial, facial_len, keystroke,
                               keystroke_len, physiology, physiology_len);
        *tlx_out = fusion::predict_tlx(m->bundle.model, *m->bundle.tlx, record);
    });
}

sf_status sf_evaluate(const sf_model* m, const sf_dataset* ds, const char* options_json,
                      char** report_json_out) {
    if (sf_status s = require(m && ds && report_json_out, "model, dataset or out is null");
        s != SF_OK)
        return s;
    return guarded([&] {
        workflow::EvaluateOptions options =
            workflow::evaluate_options_from_json_text(text_or(options_json, "{}"));
        *report_json_out =
            copy_string(workflow::evaluate_bundle(m->bundle, ds->loaded.dataset, options)
                            .dump(2));
    });
}

sf_status sf_predict_dataset(const sf_model* m, const sf_dataset* ds, char** csv_out) {
    if (sf_status s = require(m && ds && csv_out, "model, dataset or out is null");
        s != SF_OK)
        return s;
    return guarded(
        [&] { *csv_out = copy_string(workflow::predict_csv(m->bundle, ds->loaded.dataset)); });
}

sf_status sf_timeline_run(const sf_model* m, const sf_dataset* ds, const char* options_json,
                          sf_timeline** out) {
    if (sf_status s = require(m && ds && out, "model, dataset or out is null"); s != SF_OK)
        return s;
    *out = nullptr;
    return guarded([&] {
        workflow::TimelineOptions options =
            workflow::timeline_options_from_json_text(text_or(options_json, "{}"));
        *out = new sf_timeline{workflow::run_timeline(m->bundle, ds->loaded.dataset, options)};
    });
}

void sf_timeline_close(sf_timeline* t) { delete t; }

sf_status sf_timeline_entry_count(const sf_timeline* t, size_t* out) {
    if (sf_status s = require(t && out, "timeline or out is null"); s != SF_OK) return s;
    *out = t->timeline.entries.size();
    return SF_OK;
}

sf_status sf_timeline_alert_count(const sf_timeline* t, size_t* out) {
    if (sf_status s = require(t && out, "timeline or out is null"); s != SF_OK) return s;
    *out = t->timeline.alerts.size();
    return SF_OK;
}

sf_status sf_timeline_export(const sf_timeline* t, const char* path, const char* format) {
    if (sf_status s = require(t && path && format, "timeline, path or format is null");
        s != SF_OK)
        return s;
    return guarded([&] {
        std::string name = format;
        timeline::ExportFormat f;
        if (name == "table")
            f = timeline::ExportFormat::table;
        else if (name == "structured")
            f = timeline::ExportFormat::structured;
        else
            fail(ErrorKind::invalid_argument, "unknown export format \"" + name + "\"");
        timeline::export_timeline(t->timeline, path, f);
    });
}

sf_status sf_timeline_render_svg(const sf_timeline* t, const char* path) {
    if (sf_status s = require(t && path, "timeline or path is null"); s != SF_OK) return s;
    return guarded([&] { timeline::render_timeline(t->timeline, path); });
}

sf_status sf_timeline_json(const sf_timeline* t, char** out_json) {
    if (sf_status s = require(t && out_json, "timeline or out is null"); s != SF_OK) return s;
    return guarded([&] { *out_json = copy_string(timeline::structured_text(t->timeline)); });
}

sf_status sf_crossval(const sf_dataset* ds, const char* options_json, char** report_json_out) {
    if (sf_status s = require(ds && report_json_out, "dataset or out is null"); s != SF_OK)
        return s;
    return guarded([&] {
        workflow::CrossvalOptions options =
            workflow::crossval_options_from_json_text(text_or(options_json, "{}"));
        *report_json_out =
            copy_string(workflow::crossval(ds->loaded.dataset, options).dump(2));
    });
}

} // extern "C"
