#include "stressfuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "stressfuse/errors.hpp"

namespace stressfuse::fusion {

namespace {

// Substreams for parameter init so head seeds never collide with the
// training shuffle stream.
constexpr std::uint64_t kHeadInitStream = 101;
constexpr std::uint64_t kTlxInitStream = 102;

Matrix label_targets(const std::vector<int>& labels) {
    Matrix t(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        t.at(i, 0) = static_cast<double>(labels[i]);
    return t;
}

metrics::ClassificationReport classify_report(const std::vector<int>& predictions,
                                              const std::vector<int>& labels) {
    return metrics::report(metrics::confusion(predictions, labels));
}

bool single_class(const std::vector<int>& labels) {
    for (int l : labels)
        if (l != labels.front()) return false;
    return true;
}

nn::DenseNet build_head(std::size_t input_dim, const HeadSpec& spec,
                        nn::Activation output_activation, std::uint64_t seed) {
    std::vector<nn::LayerSpec> layers;
    for (std::size_t width : spec.hidden_dims)
        layers.push_back({width, nn::Activation::relu, spec.dropout_rate});
    layers.push_back({1, output_activation, 0.0});
    return nn::make_net(input_dim, layers, seed);
}

const Vector& require_block(const std::optional<Vector>& block, data::Modality m) {
    if (!block)
        fail(ErrorKind::missing_modality,
             std::string("record is missing its ") + data::modality_name(m) + " block");
    return *block;
}

} // namespace

nn::DenseNet build_encoder(const EncoderSpec& spec, std::size_t input_dim,
                           std::uint64_t seed) {
    if (input_dim == 0)
        fail(ErrorKind::invalid_argument, "encoder input dimension must be positive");
    if (spec.hidden_dims.empty())
        fail(ErrorKind::invalid_argument,
             std::string(data::modality_name(spec.modality)) +
                 " encoder needs at least one hidden layer");
    std::vector<nn::LayerSpec> layers;
    for (std::size_t width : spec.hidden_dims)
        layers.push_back({width, nn::Activation::relu, spec.dropout_rate});
    layers.push_back({1, nn::Activation::sigmoid, 0.0});
    return nn::make_net(input_dim, layers, seed);
}

Vector extract_features(const nn::DenseNet& encoder, const Vector& input) {
    if (encoder.layers.size() < 2)
        fail(ErrorKind::invalid_argument,
             "encoder needs a hidden stack below its classifier head");
    return nn::forward_partial(encoder, input, encoder.layers.size() - 1);
}

double encoder_probability(const nn::DenseNet& encoder, const Vector& input) {
    return nn::forward(encoder, input, nn::Mode::infer, nullptr).front();
}

UnimodalResult train_unimodal(nn::DenseNet& encoder,
                              const Matrix& train_block, const std::vector<int>& train_labels,
                              const Matrix& eval_block, const std::vector<int>& eval_labels,
                              const nn::TrainConfig& cfg) {
    if (train_block.rows != train_labels.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(train_block.rows) + " training rows vs " +
                 std::to_string(train_labels.size()) + " labels");
    if (eval_block.rows != eval_labels.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(eval_block.rows) + " evaluation rows vs " +
                 std::to_string(eval_labels.size()) + " labels");

    UnimodalResult result;
    result.history = nn::train(encoder, train_block, label_targets(train_labels), cfg,
                               nn::LossKind::bce);

    std::vector<int> predictions(eval_block.rows);
    for (std::size_t r = 0; r < eval_block.rows; ++r) {
        double p = encoder_probability(encoder, eval_block.row_vector(r));
        predictions[r] = p >= 0.5 ? 1 : 0;
    }
    result.report = classify_report(predictions, eval_labels);
    result.degenerate_labels = single_class(eval_labels);
    return result;
}

const char* fusion_mode_name(FusionMode mode) {
    return mode == FusionMode::early ? "early" : "late";
}

FusionMode fusion_mode_from_name(std::string_view name) {
    if (name == "early") return FusionMode::early;
    if (name == "late") return FusionMode::late;
    fail(ErrorKind::parse, "unknown fusion mode \"" + std::string(name) + "\"");
}

Record Record::from_dataset_row(const data::AlignedDataset& ds, std::size_t row) {
    if (row >= ds.rows())
        fail(ErrorKind::invalid_argument,
             "row " + std::to_string(row) + " out of range (" + std::to_string(ds.rows()) +
                 " rows)");
    Record rec;
    for (std::size_t b = 0; b < ds.modalities.size(); ++b) {
        Vector v = ds.blocks[b].row_vector(row);
        switch (ds.modalities[b]) {
        case data::Modality::posture: rec.posture = std::move(v); break;
        case data::Modality::facial: rec.facial = std::move(v); break;
        case data::Modality::keystroke: rec.keystroke = std::move(v); break;
        case data::Modality::physiology: rec.physiology = std::move(v); break;
        }
    }
    return rec;
}

Vector FusionModel::fused_input(const Record& record) const {
    const std::optional<Vector>* blocks[3] = {&record.posture, &record.facial,
                                              &record.keystroke};
    Vector fused;
    for (std::size_t i = 0; i < kEncoderModalities.size(); ++i) {
        const Vector& block = require_block(*blocks[i], kEncoderModalities[i]);
        if (mode == FusionMode::early) {
            Vector features = extract_features(encoders[i], block);
            fused.insert(fused.end(), features.begin(), features.end());
        } else {
            double p = encoder_probability(encoders[i], block);
            if (!(p >= 0.0 && p <= 1.0))
                fail(ErrorKind::numeric_input,
                     std::string(data::modality_name(kEncoderModalities[i])) +
                         " probability " + std::to_string(p) + " outside [0,1]");
            fused.push_back(p);
        }
    }
    const Vector& physio = require_block(record.physiology, data::Modality::physiology);
    if (physio.size() != data::kPhysiologyWidth)
        fail(ErrorKind::dimension_mismatch,
             "physiology block must be " + std::to_string(data::kPhysiologyWidth) +
                 " wide, got " + std::to_string(physio.size()));
    fused.insert(fused.end(), physio.begin(), physio.end());
    return fused;
}

Prediction predict_stress(const FusionModel& model, const Record& record) {
    Vector input = model.fused_input(record);
    Prediction pred;
    pred.probability = nn::forward(model.fusion_head, input, nn::Mode::infer, nullptr).front();
    pred.label = pred.probability >= model.threshold ? 1 : 0;
    return pred;
}

namespace {

Matrix fused_matrix(const FusionModel& model, const data::AlignedDataset& ds) {
    Matrix m(ds.rows(), model.fused_input_dim());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        Vector input = model.fused_input(Record::from_dataset_row(ds, r));
        if (input.size() != m.cols)
            fail(ErrorKind::dimension_mismatch,
                 "fused row width " + std::to_string(input.size()) +
                     " != head input dim " + std::to_string(m.cols));
        std::copy(input.begin(), input.end(), m.row(r).begin());
    }
    return m;
}

FusionTrainResult assemble_and_train(FusionMode mode,
                                     const std::array<nn::DenseNet, 3>& encoders,
                                     const data::AlignedDataset& train,
                                     const data::AlignedDataset& eval,
                                     const HeadSpec& head,
                                     const nn::TrainConfig& cfg) {
    if (!train.has_labels() || !eval.has_labels())
        fail(ErrorKind::invalid_argument, "fusion training needs labeled data");
    const Matrix& physio = train.block_or_throw(data::Modality::physiology);
    if (physio.cols != data::kPhysiologyWidth)
        fail(ErrorKind::dimension_mismatch,
             "physiology block must be " + std::to_string(data::kPhysiologyWidth) +
                 " wide, got " + std::to_string(physio.cols));

    std::size_t width = data::kPhysiologyWidth;
    if (mode == FusionMode::early)
        for (const nn::DenseNet& enc : encoders)
            width += enc.layers[enc.layers.size() - 2].out_dim();
    else
        width += kEncoderModalities.size();

    FusionTrainResult result;
    result.model.mode = mode;
    result.model.encoders = encoders;
    result.model.fusion_head =
        build_head(width, head, nn::Activation::sigmoid, derive_seed(cfg.seed, kHeadInitStream));

    // Encoders are frozen, so their per-row contributions are constants that
    // can be materialized once before head training.
    Matrix inputs = fused_matrix(result.model, train);
    result.history = nn::train(result.model.fusion_head, inputs, label_targets(train.labels),
                               cfg, nn::LossKind::bce);

    std::vector<int> predictions(eval.rows());
    for (std::size_t r = 0; r < eval.rows(); ++r) {
        Prediction p = predict_stress(result.model, Record::from_dataset_row(eval, r));
        predictions[r] = p.label;
    }
    result.report = classify_report(predictions, eval.labels);
    return result;
}

} // namespace

FusionTrainResult assemble_and_train_early(const std::array<nn::DenseNet, 3>& encoders,
                                           const data::AlignedDataset& train,
                                           const data::AlignedDataset& eval,
                                           const HeadSpec& head,
                                           const nn::TrainConfig& cfg) {
    return assemble_and_train(FusionMode::early, encoders, train, eval, head, cfg);
}

FusionTrainResult assemble_and_train_late(const std::array<nn::DenseNet, 3>& encoders,
                                          const data::AlignedDataset& train,
                                          const data::AlignedDataset& eval,
                                          const HeadSpec& head,
                                          const nn::TrainConfig& cfg) {
    return assemble_and_train(FusionMode::late, encoders, train, eval, head, cfg);
}

const char* target_scale_name(TargetScale s) {
    return s == TargetScale::raw_0_100 ? "raw_0_100" : "normalized_0_1";
}

TlxTrainResult train_tlx_regressor(const FusionModel& early_model,
                                   const data::AlignedDataset& train,
                                   const data::AlignedDataset& eval,
                                   const HeadSpec& head,
                                   const nn::TrainConfig& cfg) {
    if (early_model.mode != FusionMode::early)
        fail(ErrorKind::invalid_argument,
             "workload regression transfers from an early-fusion model");
    if (!train.has_tlx() || !eval.has_tlx())
        fail(ErrorKind::invalid_argument, "workload regression needs tlx targets");

    // The regressor shares the classifier's input map: encoder features
    // plus raw physiology. fused_matrix never touches encoder weights.
    Matrix inputs = fused_matrix(early_model, train);
    Matrix targets(train.rows(), 1);
    for (std::size_t r = 0; r < train.rows(); ++r)
        targets.at(r, 0) = train.tlx[r] / 100.0;

    TlxTrainResult result;
    result.regressor.head = build_head(inputs.cols, head, nn::Activation::identity,
                                       derive_seed(cfg.seed, kTlxInitStream));
    result.regressor.training_scale = TargetScale::normalized_0_1;
    result.history = nn::train(result.regressor.head, inputs, targets, cfg,
                               nn::LossKind::mse_for_rmse);

    Vector raw_predictions(eval.rows());
    Vector norm_predictions(eval.rows());
    Vector norm_targets(eval.rows());
    for (std::size_t r = 0; r < eval.rows(); ++r) {
        double raw = predict_tlx(early_model, result.regressor,
                                 Record::from_dataset_row(eval, r));
        raw_predictions[r] = raw;
        norm_predictions[r] = raw / 100.0;
        norm_targets[r] = eval.tlx[r] / 100.0;
    }
    result.report = metrics::regression_report(raw_predictions, eval.tlx);
    result.rmse_raw = result.report.rmse;
    result.rmse_normalized =
        metrics::regression_report(norm_predictions, norm_targets).rmse;
    return result;
}

double predict_tlx(const FusionModel& early_model, const TlxRegressor& regressor,
                   const Record& record) {
    Vector input = early_model.fused_input(record);
    double normalized =
        nn::forward(regressor.head, input, nn::Mode::infer, nullptr).front();
    return 100.0 * std::clamp(normalized, 0.0, 1.0);
}

} // namespace stressfuse::fusion
