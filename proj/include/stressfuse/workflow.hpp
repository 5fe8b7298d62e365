#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stressfuse/dataset.hpp"
#include "stressfuse/errors.hpp"
#include "stressfuse/fusion.hpp"
#include "stressfuse/timeline.hpp"

namespace stressfuse::workflow {

using json = nlohmann::ordered_json;

struct TrainOptions {
    fusion::FusionMode mode = fusion::FusionMode::early;
    std::size_t epochs = 200;
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    double split_fraction = 0.7;
    bool stratified = true;
    std::uint64_t seed = 42;
    bool with_tlx = false;

    fusion::EncoderSpec posture_spec{data::Modality::posture, {64, 32}, 0.5};
    fusion::EncoderSpec facial_spec{data::Modality::facial, {64, 32}, 0.5};
    fusion::EncoderSpec keystroke_spec{data::Modality::keystroke, {16}, 0.5};
    fusion::HeadSpec fusion_head{};
    fusion::HeadSpec tlx_head{};

    void validate() const;
};

TrainOptions train_options_from_json_text(const std::string& json_text);

/// Everything a saved model bundle holds.
struct Bundle {
    fusion::FusionModel model;
    std::optional<fusion::TlxRegressor> tlx;
    std::vector<data::Modality> stat_modalities;     // block order of stats
    std::vector<data::NormalizationStats> stats;     // fitted on the train rows
    std::vector<std::vector<std::string>> feature_names;
    std::vector<std::string> train_keys;
    std::vector<std::string> test_keys;
    TrainOptions options; // echo of the training configuration
};

struct TrainResult {
    Bundle bundle;
    json report;                            // per-stage metrics
    std::vector<std::pair<std::string, nn::TrainHistory>> histories;
};

/// Full recipe: split -> normalize (train-fit) -> three unimodal trainings
/// (run concurrently) -> fusion head -> optional workload regressor. The
/// returned report's test metrics come from the same code path as
/// evaluate(), so re-evaluating the saved bundle reproduces them.
TrainResult train_bundle(const data::AlignedDataset& raw, const TrainOptions& options);

void save_bundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle load_bundle(const std::filesystem::path& dir);

/// Writes bundle + report.json + histories/*.csv under the two directories.
TrainResult train_to_directories(const data::AlignedDataset& raw, const TrainOptions& options,
                                 const std::filesystem::path& bundle_dir,
                                 const std::filesystem::path& reports_dir);

enum class RowSelection { test, train, all };

struct EvaluateOptions {
    RowSelection on = RowSelection::test;
};

EvaluateOptions evaluate_options_from_json_text(const std::string& json_text);

/// Classification report + confusion + ROC (+ regression report when the
/// bundle has a workload head and the data carries targets).
json evaluate_bundle(const Bundle& bundle, const data::AlignedDataset& raw,
                     const EvaluateOptions& options);

/// Per-row predictions as csv text: key,probability,label[,tlx].
std::string predict_csv(const Bundle& bundle, const data::AlignedDataset& raw);

struct TimelineOptions {
    std::size_t min_run = 5;
    bool with_tlx = true; // use the regressor when the bundle has one
};

TimelineOptions timeline_options_from_json_text(const std::string& json_text);

timeline::StressTimeline run_timeline(const Bundle& bundle, const data::AlignedDataset& raw,
                                      const TimelineOptions& options);

struct CrossvalOptions {
    TrainOptions train;
    std::size_t k = 5;
};

CrossvalOptions crossval_options_from_json_text(const std::string& json_text);

/// Runs the full recipe per fold; reports per-fold metrics plus mean and
/// population stddev of each.
json crossval(const data::AlignedDataset& raw, const CrossvalOptions& options);

json dataset_report(const data::LoadedDataset& loaded);

/// Runs fn with stage-tagged error messages ("stage <name>: ...").
template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "stage " + name + ": " + e.what());
    }
}

} // namespace stressfuse::workflow
