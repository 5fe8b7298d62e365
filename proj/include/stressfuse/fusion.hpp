#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stressfuse/dataset.hpp"
#include "stressfuse/matrix.hpp"
#include "stressfuse/metrics.hpp"
#include "stressfuse/nn.hpp"

namespace stressfuse::fusion {

/// The three encoder-backed modalities, in block order. Physiology bypasses
/// encoders and feeds the fusion head raw.
inline constexpr std::array<data::Modality, 3> kEncoderModalities = {
    data::Modality::posture, data::Modality::facial, data::Modality::keystroke};

struct EncoderSpec {
    data::Modality modality = data::Modality::posture;
    std::vector<std::size_t> hidden_dims; // non-empty
    double dropout_rate = 0.5;

    std::size_t feature_dim() const { return hidden_dims.empty() ? 0 : hidden_dims.back(); }
};

/// Hidden ReLU+dropout stack with a scalar sigmoid head for standalone
/// training. extract_features() reads the last hidden layer.
nn::DenseNet build_encoder(const EncoderSpec& spec, std::size_t input_dim, std::uint64_t seed);

/// Last-hidden-layer activations, inference mode, head excluded.
Vector extract_features(const nn::DenseNet& encoder, const Vector& input);

/// Scalar stressed-probability from a standalone encoder.
double encoder_probability(const nn::DenseNet& encoder, const Vector& input);

struct UnimodalResult {
    metrics::ClassificationReport report; // on the evaluation block
    nn::TrainHistory history;
    bool degenerate_labels = false; // evaluation block had a single class
};

/// Trains the encoder (with its sigmoid head) on BCE and reports on the
/// held-out block.
UnimodalResult train_unimodal(nn::DenseNet& encoder,
                              const Matrix& train_block, const std::vector<int>& train_labels,
                              const Matrix& eval_block, const std::vector<int>& eval_labels,
                              const nn::TrainConfig& cfg);

enum class FusionMode { early, late };

const char* fusion_mode_name(FusionMode mode);
FusionMode fusion_mode_from_name(std::string_view name);

/// A single multimodal observation. Missing blocks are diagnosed, never
/// silently defaulted.
struct Record {
    std::optional<Vector> posture;
    std::optional<Vector> facial;
    std::optional<Vector> keystroke;
    std::optional<Vector> physiology;

    static Record from_dataset_row(const data::AlignedDataset& ds, std::size_t row);
};

struct FusionModel {
    FusionMode mode = FusionMode::early;
    std::array<nn::DenseNet, 3> encoders; // posture, facial, keystroke
    nn::DenseNet fusion_head;             // ends in sigmoid
    double threshold = 0.5;

    std::size_t fused_input_dim() const { return fusion_head.input_dim; }

    /// Head input for one record: early = concat(encoder features, physio),
    /// late = [p_posture, p_facial, p_keystroke] ++ physio.
    Vector fused_input(const Record& record) const;
};

struct Prediction {
    double probability = 0.0;
    int label = 0; // 1 iff probability >= threshold
};

Prediction predict_stress(const FusionModel& model, const Record& record);

struct FusionTrainResult {
    FusionModel model;
    metrics::ClassificationReport report; // on the evaluation rows
    nn::TrainHistory history;
};

struct HeadSpec {
    std::vector<std::size_t> hidden_dims = {32, 16};
    double dropout_rate = 0.5;
};

/// Encoders stay frozen; only the fusion head trains (BCE).
FusionTrainResult assemble_and_train_early(const std::array<nn::DenseNet, 3>& encoders,
                                           const data::AlignedDataset& train,
                                           const data::AlignedDataset& eval,
                                           const HeadSpec& head,
                                           const nn::TrainConfig& cfg);

FusionTrainResult assemble_and_train_late(const std::array<nn::DenseNet, 3>& encoders,
                                          const data::AlignedDataset& train,
                                          const data::AlignedDataset& eval,
                                          const HeadSpec& head,
                                          const nn::TrainConfig& cfg);

enum class TargetScale { raw_0_100, normalized_0_1 };

const char* target_scale_name(TargetScale s);

/// Workload regressor head over the early-fusion feature map. Trains on
/// targets normalized to [0,1]; predictions clamp to the 0-100 scale.
struct TlxRegressor {
    nn::DenseNet head; // scalar identity output
    TargetScale training_scale = TargetScale::normalized_0_1;
};

struct TlxTrainResult {
    TlxRegressor regressor;
    double rmse_normalized = 0.0; // on the evaluation rows, clamped predictions
    double rmse_raw = 0.0;        // same, on the 0-100 scale
    nn::TrainHistory history;
    metrics::RegressionReport report; // residuals on the raw 0-100 scale
};

TlxTrainResult train_tlx_regressor(const FusionModel& early_model,
                                   const data::AlignedDataset& train,
                                   const data::AlignedDataset& eval,
                                   const HeadSpec& head,
                                   const nn::TrainConfig& cfg);

/// Clamped to [0, 100].
double predict_tlx(const FusionModel& early_model, const TlxRegressor& regressor,
                   const Record& record);

} // namespace stressfuse::fusion
