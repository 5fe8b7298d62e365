#include "stressfuse/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "stressfuse/textio.hpp"

namespace stressfuse::workflow {

namespace {

// Substreams off the user seed, one per consumer, so that adding a stage
// never shifts the randomness of another.
constexpr std::uint64_t kSplitStream = 10;
constexpr std::uint64_t kTrainStream[3] = {11, 12, 13}; // posture, facial, keystroke
constexpr std::uint64_t kFusionStream = 14;
constexpr std::uint64_t kTlxStream = 15;
constexpr std::uint64_t kInitStream[3] = {21, 22, 23};
constexpr std::uint64_t kFoldStream = 30;
constexpr std::uint64_t kFoldSeedBase = 40;

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

json classification_json(const metrics::ClassificationReport& r) {
    json out;
    out["accuracy"] = round4(r.accuracy);
    out["precision"] = round4(r.precision);
    out["recall"] = round4(r.recall);
    out["f1"] = round4(r.f1);
    json degenerate = json::array();
    if (r.precision_degenerate) degenerate.push_back("precision");
    if (r.recall_degenerate) degenerate.push_back("recall");
    if (r.f1_degenerate) degenerate.push_back("f1");
    out["degenerate"] = degenerate;
    out["confusion"] = {{"tp", r.cm.tp}, {"fp", r.cm.fp}, {"tn", r.cm.tn}, {"fn", r.cm.fn}};
    return out;
}

// get<std::size_t> on a negative json integer wraps silently, so counts
// are type-checked before extraction.
std::size_t count_from_json(const json& v, const std::string& what) {
    if (!v.is_number_unsigned())
        fail(ErrorKind::parse, what + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::uint64_t seed_from_json(const json& v, const std::string& what) {
    if (!v.is_number_unsigned())
        fail(ErrorKind::parse, what + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::vector<std::size_t> hidden_dims_from_json(const json& arr, const std::string& what) {
    std::vector<std::size_t> dims;
    if (!arr.is_array())
        fail(ErrorKind::parse, what + " must be an array of layer widths");
    for (const json& v : arr) dims.push_back(count_from_json(v, what + " entry"));
    return dims;
}

} // namespace

void TrainOptions::validate() const {
    if (epochs == 0) fail(ErrorKind::invalid_argument, "epochs must be >= 1");
    if (batch_size == 0) fail(ErrorKind::invalid_argument, "batch size must be >= 1");
    if (learning_rate < 0.0)
        fail(ErrorKind::invalid_argument, "learning rate must not be negative");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        fail(ErrorKind::invalid_argument,
             "split fraction " + format_double(split_fraction) + " outside (0,1)");
    for (const fusion::EncoderSpec* spec : {&posture_spec, &facial_spec, &keystroke_spec}) {
        if (spec->hidden_dims.empty())
            fail(ErrorKind::invalid_argument,
                 std::string(data::modality_name(spec->modality)) +
                     " encoder needs at least one hidden layer");
        if (!(spec->dropout_rate >= 0.0 && spec->dropout_rate < 1.0))
            fail(ErrorKind::invalid_argument, "encoder dropout rate outside [0,1)");
    }
    for (const fusion::HeadSpec* spec : {&fusion_head, &tlx_head}) {
        if (spec->hidden_dims.empty())
            fail(ErrorKind::invalid_argument, "head needs at least one hidden layer");
        if (!(spec->dropout_rate >= 0.0 && spec->dropout_rate < 1.0))
            fail(ErrorKind::invalid_argument, "head dropout rate outside [0,1)");
    }
}

TrainOptions train_options_from_json_text(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::parse, "training options: malformed json");
    if (!doc.is_object()) fail(ErrorKind::parse, "training options: expected an object");

    TrainOptions opt;
    try {
        if (doc.contains("mode"))
            opt.mode = fusion::fusion_mode_from_name(doc["mode"].get<std::string>());
        if (doc.contains("epochs")) opt.epochs = count_from_json(doc["epochs"], "epochs");
        if (doc.contains("lr")) opt.learning_rate = doc["lr"].get<double>();
        if (doc.contains("batch")) opt.batch_size = count_from_json(doc["batch"], "batch");
        if (doc.contains("split")) opt.split_fraction = doc["split"].get<double>();
        if (doc.contains("stratified")) opt.stratified = doc["stratified"].get<bool>();
        if (doc.contains("seed")) opt.seed = seed_from_json(doc["seed"], "seed");
        if (doc.contains("with_tlx")) opt.with_tlx = doc["with_tlx"].get<bool>();
        if (doc.contains("posture_hidden"))
            opt.posture_spec.hidden_dims =
                hidden_dims_from_json(doc["posture_hidden"], "posture_hidden");
        if (doc.contains("facial_hidden"))
            opt.facial_spec.hidden_dims =
                hidden_dims_from_json(doc["facial_hidden"], "facial_hidden");
        if (doc.contains("keystroke_hidden"))
            opt.keystroke_spec.hidden_dims =
                hidden_dims_from_json(doc["keystroke_hidden"], "keystroke_hidden");
        if (doc.contains("fusion_hidden"))
            opt.fusion_head.hidden_dims =
                hidden_dims_from_json(doc["fusion_hidden"], "fusion_hidden");
        if (doc.contains("tlx_hidden"))
            opt.tlx_head.hidden_dims = hidden_dims_from_json(doc["tlx_hidden"], "tlx_hidden");
        if (doc.contains("dropout")) {
            double rate = doc["dropout"].get<double>();
            opt.posture_spec.dropout_rate = rate;
            opt.facial_spec.dropout_rate = rate;
            opt.keystroke_spec.dropout_rate = rate;
            opt.fusion_head.dropout_rate = rate;
            opt.tlx_head.dropout_rate = rate;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("training options: ") + e.what());
    }
    opt.validate();
    return opt;
}

namespace {

json options_json(const TrainOptions& opt) {
    json out;
    out["mode"] = fusion::fusion_mode_name(opt.mode);
    out["epochs"] = opt.epochs;
    out["lr"] = opt.learning_rate;
    out["batch"] = opt.batch_size;
    out["split"] = opt.split_fraction;
    out["stratified"] = opt.stratified;
    out["seed"] = opt.seed;
    out["with_tlx"] = opt.with_tlx;
    out["posture_hidden"] = opt.posture_spec.hidden_dims;
    out["facial_hidden"] = opt.facial_spec.hidden_dims;
    out["keystroke_hidden"] = opt.keystroke_spec.hidden_dims;
    out["fusion_hidden"] = opt.fusion_head.hidden_dims;
    out["tlx_hidden"] = opt.tlx_head.hidden_dims;
    out["dropout"] = opt.posture_spec.dropout_rate;
    return out;
}

const fusion::EncoderSpec& spec_for(const TrainOptions& opt, data::Modality m) {
    switch (m) {
    case data::Modality::posture: return opt.posture_spec;
    case data::Modality::facial: return opt.facial_spec;
    case data::Modality::keystroke: return opt.keystroke_spec;
    default: break;
    }
    fail(ErrorKind::invalid_argument,
         std::string(data::modality_name(m)) + " has no encoder");
}

nn::TrainConfig train_config(const TrainOptions& opt, std::uint64_t stream) {
    nn::TrainConfig cfg;
    cfg.epochs = opt.epochs;
    cfg.learning_rate = opt.learning_rate;
    cfg.batch_size = opt.batch_size;
    cfg.seed = derive_seed(opt.seed, stream);
    return cfg;
}

// Normalize `raw` with the bundle's stored statistics, matching stat blocks
// to the dataset's block order by modality.
data::AlignedDataset normalized_view(const Bundle& bundle, const data::AlignedDataset& raw) {
    std::vector<data::NormalizationStats> ordered;
    ordered.reserve(raw.modalities.size());
    for (data::Modality m : raw.modalities) {
        bool found = false;
        for (std::size_t i = 0; i < bundle.stat_modalities.size(); ++i) {
            if (bundle.stat_modalities[i] == m) {
                ordered.push_back(bundle.stats[i]);
                found = true;
                break;
            }
        }
        if (!found)
            fail(ErrorKind::invalid_argument,
                 std::string("bundle carries no normalization stats for ") +
                     data::modality_name(m));
    }
    for (data::Modality m : bundle.stat_modalities)
        if (!raw.block(m))
            fail(ErrorKind::missing_modality,
                 std::string("dataset lacks the ") + data::modality_name(m) +
                     " block the model was trained on");
    return data::apply_stats(raw, ordered);
}

std::vector<std::size_t> rows_for_selection(const Bundle& bundle,
                                            const data::AlignedDataset& raw,
                                            RowSelection on) {
    if (on == RowSelection::all) {
        std::vector<std::size_t> rows(raw.rows());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return rows;
    }
    std::unordered_map<std::string, std::size_t> row_of;
    row_of.reserve(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i) row_of[raw.keys[i]] = i;

    const std::vector<std::string>& keys =
        on == RowSelection::test ? bundle.test_keys : bundle.train_keys;
    if (keys.empty())
        fail(ErrorKind::empty_result, "the bundle records no keys for that selection");
    std::vector<std::size_t> rows;
    rows.reserve(keys.size());
    for (const std::string& key : keys) {
        auto it = row_of.find(key);
        if (it == row_of.end())
            fail(ErrorKind::invalid_argument,
                 "dataset has no row for key \"" + key + "\" from the bundle's split");
        rows.push_back(it->second);
    }
    return rows;
}

// The shared trunk of train_bundle and crossval: fit stats on the training
// rows, train the three encoders concurrently, then the fusion head, then
// the optional workload head. Test metrics come from evaluate_bundle so a
// later re-evaluation of the saved bundle reproduces them bit for bit.
TrainResult train_on_indices(const data::AlignedDataset& raw, const TrainOptions& options,
                             const std::vector<std::size_t>& train_rows,
                             const std::vector<std::size_t>& eval_rows) {
    data::AlignedDataset normalized =
        run_stage("normalize", [&] { return data::normalize(raw, train_rows); });
    data::AlignedDataset train_ds = normalized.take_rows(train_rows);
    data::AlignedDataset eval_ds = normalized.take_rows(eval_rows);

    TrainResult result;
    result.bundle.options = options;
    result.bundle.stat_modalities = normalized.modalities;
    result.bundle.stats = normalized.stats;
    result.bundle.feature_names = normalized.feature_names;
    for (std::size_t i : train_rows) result.bundle.train_keys.push_back(raw.keys[i]);
    for (std::size_t i : eval_rows) result.bundle.test_keys.push_back(raw.keys[i]);

    std::array<nn::DenseNet, 3> encoders;
    std::array<fusion::UnimodalResult, 3> unimodal;
    std::array<std::exception_ptr, 3> failures{};
    {
        std::array<std::thread, 3> workers;
        for (std::size_t i = 0; i < 3; ++i) {
            workers[i] = std::thread([&, i] {
                try {
                    data::Modality m = fusion::kEncoderModalities[i];
                    const Matrix& train_block = train_ds.block_or_throw(m);
                    const Matrix& eval_block = eval_ds.block_or_throw(m);
                    encoders[i] =
                        fusion::build_encoder(spec_for(options, m), train_block.cols,
                                              derive_seed(options.seed, kInitStream[i]));
                    unimodal[i] = fusion::train_unimodal(
                        encoders[i], train_block, train_ds.labels, eval_block,
                        eval_ds.labels, train_config(options, kTrainStream[i]));
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            });
        }
        for (std::thread& w : workers) w.join();
    }
    run_stage("unimodal-train", [&] {
        for (const std::exception_ptr& failure : failures)
            if (failure) std::rethrow_exception(failure);
    });

    fusion::FusionTrainResult fused = run_stage("fusion-train", [&] {
        return options.mode == fusion::FusionMode::early
                   ? fusion::assemble_and_train_early(encoders, train_ds, eval_ds,
                                                      options.fusion_head,
                                                      train_config(options, kFusionStream))
                   : fusion::assemble_and_train_late(encoders, train_ds, eval_ds,
                                                     options.fusion_head,
                                                     train_config(options, kFusionStream));
    });
    result.bundle.model = std::move(fused.model);

    json unimodal_json;
    for (std::size_t i = 0; i < 3; ++i) {
        result.histories.emplace_back(data::modality_name(fusion::kEncoderModalities[i]),
                                      std::move(unimodal[i].history));
        unimodal_json[data::modality_name(fusion::kEncoderModalities[i])] =
            classification_json(unimodal[i].report);
    }
    result.histories.emplace_back("fusion", std::move(fused.history));

    if (options.with_tlx) {
        fusion::TlxTrainResult tlx = run_stage("tlx-train", [&] {
            if (options.mode != fusion::FusionMode::early)
                fail(ErrorKind::invalid_argument,
                     "workload regression requires early fusion mode");
            if (!raw.has_tlx())
                fail(ErrorKind::invalid_argument,
                     "workload regression needs tlx targets in the dataset");
            return fusion::train_tlx_regressor(result.bundle.model, train_ds, eval_ds,
                                               options.tlx_head,
                                               train_config(options, kTlxStream));
        });
        result.bundle.tlx = std::move(tlx.regressor);
        result.histories.emplace_back("tlx", std::move(tlx.history));
    }

    result.report["rows"] = raw.rows();
    result.report["train_rows"] = train_rows.size();
    result.report["test_rows"] = eval_rows.size();
    result.report["mode"] = fusion::fusion_mode_name(options.mode);
    result.report["unimodal"] = unimodal_json;
    EvaluateOptions eval_opt;
    eval_opt.on = RowSelection::test;
    result.report["evaluation"] = evaluate_bundle(result.bundle, raw, eval_opt);
    return result;
}

} // namespace

TrainResult train_bundle(const data::AlignedDataset& raw, const TrainOptions& options) {
    options.validate();
    if (!raw.has_labels())
        fail(ErrorKind::invalid_argument, "training needs labeled data");

    data::SplitSpec split_spec;
    split_spec.train_fraction = options.split_fraction;
    split_spec.stratified = options.stratified;
    split_spec.seed = derive_seed(options.seed, kSplitStream);
    data::SplitIndices split =
        run_stage("split", [&] { return data::split_indices(raw, split_spec); });
    return train_on_indices(raw, options, split.train, split.test);
}

namespace {

constexpr const char* kBundleFormat = "stressfuse-bundle";
constexpr int kBundleVersion = 1;

std::string encoder_file_name(data::Modality m) {
    return std::string(data::modality_name(m)) + "_encoder.weights";
}

} // namespace

void save_bundle(const Bundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    json doc;
    doc["format"] = kBundleFormat;
    doc["format_version"] = kBundleVersion;
    doc["mode"] = fusion::fusion_mode_name(bundle.model.mode);
    doc["threshold"] = bundle.model.threshold;

    doc["encoders"] = json::array();
    for (std::size_t i = 0; i < fusion::kEncoderModalities.size(); ++i) {
        data::Modality m = fusion::kEncoderModalities[i];
        std::string file = encoder_file_name(m);
        nn::save_weights(bundle.model.encoders[i], dir / file);
        doc["encoders"].push_back({{"modality", data::modality_name(m)}, {"weights", file}});
    }
    nn::save_weights(bundle.model.fusion_head, dir / "fusion_head.weights");
    doc["fusion_head"] = "fusion_head.weights";
    if (bundle.tlx) {
        nn::save_weights(bundle.tlx->head, dir / "tlx_head.weights");
        doc["tlx_head"] = "tlx_head.weights";
        doc["target_scale"] = fusion::target_scale_name(bundle.tlx->training_scale);
    }

    doc["normalization"] = json::array();
    for (std::size_t b = 0; b < bundle.stat_modalities.size(); ++b) {
        json entry;
        entry["modality"] = data::modality_name(bundle.stat_modalities[b]);
        entry["feature_names"] = bundle.feature_names[b];
        entry["mean"] = bundle.stats[b].mean;
        entry["stddev"] = bundle.stats[b].stddev;
        doc["normalization"].push_back(entry);
    }
    doc["train_keys"] = bundle.train_keys;
    doc["test_keys"] = bundle.test_keys;
    doc["options"] = options_json(bundle.options);
    write_text_file(dir / "bundle.json", doc.dump(2) + "\n");
}

Bundle load_bundle(const std::filesystem::path& dir) {
    nlohmann::json doc =
        nlohmann::json::parse(read_text_file(dir / "bundle.json"), nullptr, false);
    if (doc.is_discarded())
        fail(ErrorKind::corrupt_file, (dir / "bundle.json").string() + ": malformed json");
    if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string() ||
        doc["format"].get<std::string>() != kBundleFormat)
        fail(ErrorKind::corrupt_file,
             (dir / "bundle.json").string() + ": not a model bundle manifest");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
        fail(ErrorKind::corrupt_file,
             (dir / "bundle.json").string() + ": missing format version");
    if (doc["format_version"].get<int>() != kBundleVersion)
        fail(ErrorKind::version_mismatch,
             (dir / "bundle.json").string() + ": unsupported bundle version");

    Bundle bundle;
    try {
        bundle.model.mode = fusion::fusion_mode_from_name(doc.at("mode").get<std::string>());
        bundle.model.threshold = doc.at("threshold").get<double>();

        const nlohmann::json& encoders = doc.at("encoders");
        if (!encoders.is_array() || encoders.size() != fusion::kEncoderModalities.size())
            fail(ErrorKind::corrupt_file,
                 (dir / "bundle.json").string() + ": expected three encoder entries");
        for (const nlohmann::json& entry : encoders) {
            data::Modality m =
                data::modality_from_name(entry.at("modality").get<std::string>());
            std::size_t slot = fusion::kEncoderModalities.size();
            for (std::size_t i = 0; i < fusion::kEncoderModalities.size(); ++i)
                if (fusion::kEncoderModalities[i] == m) slot = i;
            if (slot == fusion::kEncoderModalities.size())
                fail(ErrorKind::corrupt_file,
                     (dir / "bundle.json").string() + ": unexpected encoder modality");
            bundle.model.encoders[slot] =
                nn::load_weights(dir / entry.at("weights").get<std::string>());
        }
        bundle.model.fusion_head =
            nn::load_weights(dir / doc.at("fusion_head").get<std::string>());

        if (doc.contains("tlx_head")) {
            fusion::TlxRegressor reg;
            reg.head = nn::load_weights(dir / doc["tlx_head"].get<std::string>());
            std::string scale = doc.value("target_scale", "normalized_0_1");
            if (scale == "raw_0_100")
                reg.training_scale = fusion::TargetScale::raw_0_100;
            else if (scale == "normalized_0_1")
                reg.training_scale = fusion::TargetScale::normalized_0_1;
            else
                fail(ErrorKind::corrupt_file,
                     (dir / "bundle.json").string() + ": unknown target scale");
            bundle.tlx = std::move(reg);
        }

        for (const nlohmann::json& entry : doc.at("normalization")) {
            bundle.stat_modalities.push_back(
                data::modality_from_name(entry.at("modality").get<std::string>()));
            bundle.feature_names.push_back(
                entry.at("feature_names").get<std::vector<std::string>>());
            data::NormalizationStats stats;
            stats.mean = entry.at("mean").get<std::vector<double>>();
            stats.stddev = entry.at("stddev").get<std::vector<double>>();
            if (stats.mean.size() != stats.stddev.size())
                fail(ErrorKind::corrupt_file,
                     (dir / "bundle.json").string() + ": mean/stddev length mismatch");
            bundle.stats.push_back(std::move(stats));
        }
        bundle.train_keys = doc.at("train_keys").get<std::vector<std::string>>();
        bundle.test_keys = doc.at("test_keys").get<std::vector<std::string>>();

        if (doc.contains("options")) {
            bundle.options = train_options_from_json_text(doc["options"].dump());
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::corrupt_file, (dir / "bundle.json").string() + ": " + e.what());
    }

    // Cross-check that the stored heads fit the stored encoders.
    std::size_t expect = data::kPhysiologyWidth;
    if (bundle.model.mode == fusion::FusionMode::early)
        for (const nn::DenseNet& enc : bundle.model.encoders)
            expect += enc.layers[enc.layers.size() - 2].out_dim();
    else
        expect += fusion::kEncoderModalities.size();
    if (bundle.model.fusion_head.input_dim != expect)
        fail(ErrorKind::dimension_mismatch,
             "fusion head expects " + std::to_string(bundle.model.fusion_head.input_dim) +
                 " inputs but the encoders provide " + std::to_string(expect));
    if (bundle.tlx) {
        if (bundle.model.mode != fusion::FusionMode::early)
            fail(ErrorKind::corrupt_file,
                 "bundle pairs a workload head with late fusion");
        std::size_t tlx_expect = data::kPhysiologyWidth;
        for (const nn::DenseNet& enc : bundle.model.encoders)
            tlx_expect += enc.layers[enc.layers.size() - 2].out_dim();
        if (bundle.tlx->head.input_dim != tlx_expect)
            fail(ErrorKind::dimension_mismatch,
                 "workload head expects " + std::to_string(bundle.tlx->head.input_dim) +
                     " inputs but the encoders provide " + std::to_string(tlx_expect));
    }
    return bundle;
}

TrainResult train_to_directories(const data::AlignedDataset& raw, const TrainOptions& options,
                                 const std::filesystem::path& bundle_dir,
                                 const std::filesystem::path& reports_dir) {
    TrainResult result = train_bundle(raw, options);
    save_bundle(result.bundle, bundle_dir);

    std::filesystem::create_directories(reports_dir);
    write_text_file(reports_dir / "report.json", result.report.dump(2) + "\n");
    std::filesystem::path history_dir = reports_dir / "histories";
    std::filesystem::create_directories(history_dir);
    for (const auto& [name, history] : result.histories) {
        std::string csv = "epoch,loss\n";
        for (std::size_t e = 0; e < history.epoch_loss.size(); ++e)
            csv += std::to_string(e + 1) + "," + format_double(history.epoch_loss[e]) + "\n";
        write_text_file(history_dir / (name + ".csv"), csv);
    }
    return result;
}

EvaluateOptions evaluate_options_from_json_text(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::parse, "evaluate options: malformed json");
    EvaluateOptions opt;
    if (doc.is_object() && doc.contains("on")) {
        std::string on = doc["on"].get<std::string>();
        if (on == "test")
            opt.on = RowSelection::test;
        else if (on == "train")
            opt.on = RowSelection::train;
        else if (on == "all")
            opt.on = RowSelection::all;
        else
            fail(ErrorKind::parse, "evaluate options: unknown row selection \"" + on + "\"");
    }
    return opt;
}

json evaluate_bundle(const Bundle& bundle, const data::AlignedDataset& raw,
                     const EvaluateOptions& options) {
    if (!raw.has_labels())
        fail(ErrorKind::invalid_argument, "evaluation needs labeled data");
    data::AlignedDataset normalized = normalized_view(bundle, raw);
    std::vector<std::size_t> rows = rows_for_selection(bundle, raw, options.on);

    std::vector<double> probabilities(rows.size());
    std::vector<int> predictions(rows.size());
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        fusion::Record record = fusion::Record::from_dataset_row(normalized, rows[i]);
        fusion::Prediction p = fusion::predict_stress(bundle.model, record);
        probabilities[i] = p.probability;
        predictions[i] = p.label;
        labels[i] = raw.labels[rows[i]];
    }

    json out;
    out["rows"] = rows.size();
    out["on"] = options.on == RowSelection::test    ? "test"
                : options.on == RowSelection::train ? "train"
                                                    : "all";
    metrics::ClassificationReport cls = metrics::report(metrics::confusion(predictions, labels));
    out["classification"] = classification_json(cls);

    bool both_classes = false;
    for (int l : labels)
        if (l != labels.front()) both_classes = true;
    if (both_classes) {
        metrics::RocCurve curve = metrics::roc(probabilities, labels);
        json roc_json;
        roc_json["auc"] = round4(curve.auc);
        json points = json::array();
        for (const metrics::RocPoint& p : curve.points)
            points.push_back({p.fpr, p.tpr});
        roc_json["points"] = points;
        out["roc"] = roc_json;
    } else {
        out["roc"] = nullptr;
    }

    if (bundle.tlx && raw.has_tlx()) {
        Vector raw_predictions(rows.size());
        Vector raw_targets(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            fusion::Record record = fusion::Record::from_dataset_row(normalized, rows[i]);
            raw_predictions[i] = fusion::predict_tlx(bundle.model, *bundle.tlx, record);
            raw_targets[i] = raw.tlx[rows[i]];
        }
        metrics::RegressionReport reg =
            metrics::regression_report(raw_predictions, raw_targets);
        json tlx_json;
        tlx_json["rmse_raw"] = round4(reg.rmse);
        tlx_json["rmse_normalized"] = round4(reg.rmse / 100.0);
        tlx_json["within_half"] = round4(reg.within_half);
        tlx_json["within_two"] = round4(reg.within_two);
        out["tlx"] = tlx_json;
    }
    return out;
}

std::string predict_csv(const Bundle& bundle, const data::AlignedDataset& raw) {
    data::AlignedDataset normalized = normalized_view(bundle, raw);
    bool with_tlx = bundle.tlx.has_value();
    std::string out = with_tlx ? "key,probability,label,tlx\n" : "key,probability,label\n";
    for (std::size_t r = 0; r < normalized.rows(); ++r) {
        fusion::Record record = fusion::Record::from_dataset_row(normalized, r);
        fusion::Prediction p = fusion::predict_stress(bundle.model, record);
        out += csv_quote(normalized.keys[r]);
        out += "," + format_double(p.probability);
        out += "," + std::to_string(p.label);
        if (with_tlx)
            out += "," + format_double(fusion::predict_tlx(bundle.model, *bundle.tlx, record));
        out += '\n';
    }
    return out;
}

TimelineOptions timeline_options_from_json_text(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::parse, "timeline options: malformed json");
    TimelineOptions opt;
    try {
        if (doc.is_object() && doc.contains("min_run"))
            opt.min_run = count_from_json(doc["min_run"], "min_run");
        if (doc.is_object() && doc.contains("with_tlx"))
            opt.with_tlx = doc["with_tlx"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("timeline options: ") + e.what());
    }
    if (opt.min_run == 0) fail(ErrorKind::invalid_argument, "min_run must be at least 1");
    return opt;
}

timeline::StressTimeline run_timeline(const Bundle& bundle, const data::AlignedDataset& raw,
                                      const TimelineOptions& options) {
    data::AlignedDataset normalized = normalized_view(bundle, raw);
    std::vector<timeline::TimedRecord> records;
    records.reserve(normalized.rows());
    for (std::size_t r = 0; r < normalized.rows(); ++r) {
        timeline::TimedRecord tr;
        double ts = 0.0;
        if (!try_parse_double(normalized.keys[r], ts))
            fail(ErrorKind::invalid_argument,
                 "timeline needs numeric keys; \"" + normalized.keys[r] +
                     "\" is not a timestamp");
        tr.timestamp = ts;
        tr.record = fusion::Record::from_dataset_row(normalized, r);
        records.push_back(std::move(tr));
    }
    const fusion::TlxRegressor* regressor =
        options.with_tlx && bundle.tlx ? &*bundle.tlx : nullptr;
    timeline::StressTimeline tl = timeline::run_timeline(bundle.model, regressor, records);
    timeline::PersistencePolicy policy;
    policy.min_run = options.min_run;
    return timeline::apply_persistence(std::move(tl), policy);
}

CrossvalOptions crossval_options_from_json_text(const std::string& json_text) {
    CrossvalOptions opt;
    opt.train = train_options_from_json_text(json_text);
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_object() && doc.contains("k")) {
        try {
            opt.k = count_from_json(doc["k"], "k");
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse, std::string("crossval options: ") + e.what());
        }
    }
    return opt;
}

json crossval(const data::AlignedDataset& raw, const CrossvalOptions& options) {
    options.train.validate();
    if (!raw.has_labels())
        fail(ErrorKind::invalid_argument, "cross-validation needs labeled data");
    std::vector<data::Fold> folds =
        data::kfold(raw.rows(), options.k, derive_seed(options.train.seed, kFoldStream));

    const char* metric_names[4] = {"accuracy", "precision", "recall", "f1"};
    std::vector<std::array<double, 4>> values;
    json fold_reports = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        TrainOptions fold_options = options.train;
        fold_options.seed = derive_seed(options.train.seed, kFoldSeedBase + f);
        TrainResult result =
            train_on_indices(raw, fold_options, folds[f].train, folds[f].validation);
        const json& cls = result.report["evaluation"]["classification"];
        json entry;
        entry["fold"] = f + 1;
        entry["validation_rows"] = folds[f].validation.size();
        entry["classification"] = cls;
        if (result.report["evaluation"].contains("tlx"))
            entry["tlx"] = result.report["evaluation"]["tlx"];
        fold_reports.push_back(entry);
        std::array<double, 4> row{};
        for (std::size_t m = 0; m < 4; ++m) row[m] = cls[metric_names[m]].get<double>();
        values.push_back(row);
    }

    json out;
    out["k"] = options.k;
    out["rows"] = raw.rows();
    out["mode"] = fusion::fusion_mode_name(options.train.mode);
    out["folds"] = fold_reports;
    json mean_json;
    json stddev_json;
    for (std::size_t m = 0; m < 4; ++m) {
        double mean = 0.0;
        for (const auto& row : values) mean += row[m];
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (const auto& row : values) var += (row[m] - mean) * (row[m] - mean);
        var /= static_cast<double>(values.size());
        mean_json[metric_names[m]] = round4(mean);
        stddev_json[metric_names[m]] = round4(std::sqrt(var));
    }
    out["mean"] = mean_json;
    out["stddev"] = stddev_json;
    return out;
}

json dataset_report(const data::LoadedDataset& loaded) {
    json out;
    out["aligned_rows"] = loaded.dataset.rows();
    out["union_keys"] = loaded.align_report.union_keys;
    json per_modality = json::array();
    for (std::size_t i = 0; i < loaded.load_reports.size(); ++i) {
        const auto& [modality, report] = loaded.load_reports[i];
        json entry;
        entry["modality"] = data::modality_name(modality);
        entry["rows_read"] = report.rows_read;
        entry["dropped_rows"] = report.dropped;
        for (const auto& [m, missing] : loaded.align_report.excluded_by_modality)
            if (m == modality) entry["missing_keys"] = missing;
        per_modality.push_back(entry);
    }
    out["modalities"] = per_modality;
    out["has_labels"] = loaded.dataset.has_labels();
    out["has_tlx"] = loaded.dataset.has_tlx();
    if (loaded.dataset.has_labels()) {
        std::size_t stressed = 0;
        for (int l : loaded.dataset.labels) stressed += static_cast<std::size_t>(l);
        out["stressed"] = stressed;
        out["relaxed"] = loaded.dataset.rows() - stressed;
    }
    return out;
}

} // namespace stressfuse::workflow
