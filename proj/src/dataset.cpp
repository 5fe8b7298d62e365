#include "stressfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "stressfuse/errors.hpp"
#include "stressfuse/rng.hpp"
#include "stressfuse/textio.hpp"

namespace stressfuse::data {

const char* modality_name(Modality m) {
    switch (m) {
    case Modality::posture: return "posture";
    case Modality::facial: return "facial";
    case Modality::keystroke: return "keystroke";
    case Modality::physiology: return "physiology";
    }
    return "posture";
}

Modality modality_from_name(std::string_view name) {
    if (name == "posture") return Modality::posture;
    if (name == "facial") return Modality::facial;
    if (name == "keystroke") return Modality::keystroke;
    if (name == "physiology") return Modality::physiology;
    fail(ErrorKind::schema, "unknown modality \"" + std::string(name) + "\"");
}

void ModalitySchema::validate() const {
    if (key_column.empty())
        fail(ErrorKind::schema,
             std::string(modality_name(modality)) + " schema: key column missing");
    if (feature_columns.empty())
        fail(ErrorKind::schema,
             std::string(modality_name(modality)) + " schema: no feature columns");
    std::set<std::string> seen;
    for (const std::string& c : feature_columns) {
        if (!seen.insert(c).second)
            fail(ErrorKind::schema,
                 std::string(modality_name(modality)) + " schema: duplicate feature column \"" +
                     c + "\"");
        if (c == key_column || (label_column && c == *label_column) ||
            (tlx_column && c == *tlx_column))
            fail(ErrorKind::schema,
                 std::string(modality_name(modality)) + " schema: column \"" + c +
                     "\" used as both feature and key/label/tlx");
    }
}

namespace {

std::size_t column_index(const CsvTable& table, const std::string& name,
                         const std::filesystem::path& path) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == name) return i;
    fail(ErrorKind::schema, path.string() + ": missing column \"" + name + "\"");
}

} // namespace

ModalityFrame load_modality(const std::filesystem::path& path, const ModalitySchema& schema) {
    schema.validate();
    CsvTable table = read_csv(path);

    std::size_t key_idx = column_index(table, schema.key_column, path);
    std::vector<std::size_t> feature_idx;
    feature_idx.reserve(schema.feature_columns.size());
    for (const std::string& c : schema.feature_columns)
        feature_idx.push_back(column_index(table, c, path));
    std::optional<std::size_t> label_idx;
    if (schema.label_column) label_idx = column_index(table, *schema.label_column, path);
    std::optional<std::size_t> tlx_idx;
    if (schema.tlx_column) tlx_idx = column_index(table, *schema.tlx_column, path);

    ModalityFrame frame;
    frame.schema = schema;
    frame.report.rows_read = table.rows.size();
    std::unordered_set<std::string> seen_keys;

    for (const auto& row : table.rows) {
        const std::string& key = row[key_idx];
        if (key.empty()) {
            ++frame.report.dropped;
            continue;
        }
        Vector features(feature_idx.size());
        bool ok = true;
        for (std::size_t j = 0; j < feature_idx.size(); ++j) {
            double v = 0.0;
            if (!try_parse_double(row[feature_idx[j]], v) || !std::isfinite(v)) {
                ok = false;
                break;
            }
            features[j] = v;
        }
        double label = 0.0;
        if (ok && label_idx &&
            (!try_parse_double(row[*label_idx], label) || !std::isfinite(label)))
            ok = false;
        double tlx = 0.0;
        if (ok && tlx_idx && (!try_parse_double(row[*tlx_idx], tlx) || !std::isfinite(tlx)))
            ok = false;
        if (!ok) {
            ++frame.report.dropped;
            continue;
        }
        if (!seen_keys.insert(key).second)
            fail(ErrorKind::schema, path.string() + ": duplicate key \"" + key + "\"");
        frame.keys.push_back(key);
        frame.features.push_back(std::move(features));
        if (label_idx) frame.labels.push_back(label);
        if (tlx_idx) frame.tlx.push_back(tlx);
    }

    if (frame.keys.empty())
        fail(ErrorKind::empty_result, path.string() + ": no usable rows after filtering");
    return frame;
}

const Matrix* AlignedDataset::block(Modality m) const {
    for (std::size_t i = 0; i < modalities.size(); ++i)
        if (modalities[i] == m) return &blocks[i];
    return nullptr;
}

const Matrix& AlignedDataset::block_or_throw(Modality m) const {
    const Matrix* b = block(m);
    if (!b)
        fail(ErrorKind::missing_modality,
             std::string("dataset has no ") + modality_name(m) + " block");
    return *b;
}

AlignedDataset AlignedDataset::take_rows(std::span<const std::size_t> indices) const {
    AlignedDataset out;
    out.modalities = modalities;
    out.feature_names = feature_names;
    out.stats = stats;
    out.normalized = normalized;
    out.keys.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= rows())
            fail(ErrorKind::invalid_argument,
                 "row index " + std::to_string(i) + " out of range");
        out.keys.push_back(keys[i]);
    }
    for (const Matrix& b : blocks) out.blocks.push_back(b.take_rows(indices));
    if (has_labels())
        for (std::size_t i : indices) out.labels.push_back(labels[i]);
    if (has_tlx())
        for (std::size_t i : indices) out.tlx.push_back(tlx[i]);
    return out;
}

namespace {

struct KeyOrder {
    bool numeric;
    // (value, original string); string breaks numeric ties deterministically
    bool operator()(const std::pair<double, std::string>& a,
                    const std::pair<double, std::string>& b) const {
        if (numeric && a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    }
};

} // namespace

AlignedDataset align(const std::vector<ModalityFrame>& frames,
                     std::optional<Modality> labels_from,
                     std::optional<Modality> tlx_from,
                     AlignReport* out_report) {
    if (frames.size() < 2)
        fail(ErrorKind::invalid_argument, "alignment needs at least two modality frames");
    std::set<Modality> present;
    for (const ModalityFrame& f : frames)
        if (!present.insert(f.schema.modality).second)
            fail(ErrorKind::invalid_argument,
                 std::string("duplicate ") + modality_name(f.schema.modality) + " frame");

    // Count key occurrences; keys hitting every frame survive the join.
    std::unordered_map<std::string, std::size_t> occurrences;
    for (const ModalityFrame& f : frames)
        for (const std::string& k : f.keys) ++occurrences[k];

    std::vector<std::pair<double, std::string>> shared;
    bool numeric = true;
    for (const auto& [key, count] : occurrences) {
        if (count != frames.size()) continue;
        double v = 0.0;
        if (!try_parse_double(key, v)) numeric = false;
        shared.emplace_back(v, key);
    }
    if (shared.empty())
        fail(ErrorKind::empty_result, "no key is present in every modality");
    if (numeric)
        for (auto& [v, key] : shared) v = parse_double(key, "key");
    std::sort(shared.begin(), shared.end(), KeyOrder{numeric});

    if (out_report) {
        out_report->union_keys = occurrences.size();
        out_report->aligned = shared.size();
        out_report->excluded_by_modality.clear();
        for (const ModalityFrame& f : frames) {
            std::unordered_set<std::string> own(f.keys.begin(), f.keys.end());
            std::size_t missing = 0;
            for (const auto& [key, count] : occurrences)
                if (!own.count(key)) ++missing;
            out_report->excluded_by_modality.emplace_back(f.schema.modality, missing);
        }
    }

    AlignedDataset out;
    out.keys.reserve(shared.size());
    for (const auto& [v, key] : shared) out.keys.push_back(key);

    for (const ModalityFrame& f : frames) {
        std::unordered_map<std::string, std::size_t> row_of;
        row_of.reserve(f.keys.size());
        for (std::size_t i = 0; i < f.keys.size(); ++i) row_of[f.keys[i]] = i;

        std::size_t width = f.features.empty() ? 0 : f.features.front().size();
        if (f.schema.modality == Modality::physiology && width != kPhysiologyWidth)
            fail(ErrorKind::dimension_mismatch,
                 "physiology block must be exactly " + std::to_string(kPhysiologyWidth) +
                     " features wide, got " + std::to_string(width));

        Matrix block(out.keys.size(), width);
        for (std::size_t r = 0; r < out.keys.size(); ++r) {
            const Vector& src = f.features[row_of.at(out.keys[r])];
            std::copy(src.begin(), src.end(), block.row(r).begin());
        }
        out.modalities.push_back(f.schema.modality);
        out.blocks.push_back(std::move(block));
        out.feature_names.push_back(f.schema.feature_columns);

        if (labels_from && f.schema.modality == *labels_from) {
            if (f.labels.empty())
                fail(ErrorKind::schema,
                     std::string(modality_name(*labels_from)) +
                         " frame declares no label column");
            for (const std::string& key : out.keys) {
                double v = f.labels[row_of.at(key)];
                if (v != 0.0 && v != 1.0)
                    fail(ErrorKind::invalid_argument,
                         "label for key \"" + key + "\" is " + format_double(v) +
                             ", expected 0 or 1");
                out.labels.push_back(static_cast<int>(v));
            }
        }
        if (tlx_from && f.schema.modality == *tlx_from) {
            if (f.tlx.empty())
                fail(ErrorKind::schema,
                     std::string(modality_name(*tlx_from)) + " frame declares no tlx column");
            for (const std::string& key : out.keys) {
                double v = f.tlx[row_of.at(key)];
                if (!(v >= 0.0 && v <= 100.0))
                    fail(ErrorKind::invalid_argument,
                         "workload score for key \"" + key + "\" is " + format_double(v) +
                             ", outside [0,100]");
                out.tlx.push_back(v);
            }
        }
    }

    if (labels_from && !out.has_labels())
        fail(ErrorKind::invalid_argument,
             std::string("label source ") + modality_name(*labels_from) +
                 " is not among the frames");
    if (tlx_from && !out.has_tlx())
        fail(ErrorKind::invalid_argument,
             std::string("tlx source ") + modality_name(*tlx_from) +
                 " is not among the frames");
    return out;
}

namespace {

std::vector<NormalizationStats> fit_stats(const AlignedDataset& dataset,
                                          std::span<const std::size_t> fit_rows) {
    std::vector<NormalizationStats> stats;
    stats.reserve(dataset.blocks.size());
    for (const Matrix& block : dataset.blocks) {
        NormalizationStats s;
        s.mean.assign(block.cols, 0.0);
        s.stddev.assign(block.cols, 0.0);
        for (std::size_t r : fit_rows) {
            if (r >= block.rows)
                fail(ErrorKind::invalid_argument,
                     "fit row " + std::to_string(r) + " out of range");
            auto row = block.row(r);
            for (std::size_t c = 0; c < block.cols; ++c) s.mean[c] += row[c];
        }
        double n = static_cast<double>(fit_rows.size());
        for (double& m : s.mean) m /= n;
        for (std::size_t r : fit_rows) {
            auto row = block.row(r);
            for (std::size_t c = 0; c < block.cols; ++c) {
                double d = row[c] - s.mean[c];
                s.stddev[c] += d * d;
            }
        }
        for (double& v : s.stddev) v = std::sqrt(v / n);
        stats.push_back(std::move(s));
    }
    return stats;
}

AlignedDataset transform(const AlignedDataset& dataset,
                         const std::vector<NormalizationStats>& stats) {
    AlignedDataset out = dataset;
    for (std::size_t b = 0; b < out.blocks.size(); ++b) {
        Matrix& block = out.blocks[b];
        const NormalizationStats& s = stats[b];
        if (s.mean.size() != block.cols || s.stddev.size() != block.cols)
            fail(ErrorKind::dimension_mismatch,
                 "normalization stats width " + std::to_string(s.mean.size()) +
                     " != block width " + std::to_string(block.cols));
        for (std::size_t r = 0; r < block.rows; ++r) {
            auto row = block.row(r);
            for (std::size_t c = 0; c < block.cols; ++c)
                row[c] = s.stddev[c] == 0.0 ? 0.0 : (row[c] - s.mean[c]) / s.stddev[c];
        }
    }
    out.stats = stats;
    out.normalized = true;
    return out;
}

} // namespace

AlignedDataset normalize(const AlignedDataset& dataset, std::span<const std::size_t> fit_rows) {
    if (fit_rows.empty())
        fail(ErrorKind::invalid_argument, "normalization needs at least one fit row");
    return transform(dataset, fit_stats(dataset, fit_rows));
}

AlignedDataset apply_stats(const AlignedDataset& dataset,
                           const std::vector<NormalizationStats>& stats) {
    if (stats.size() != dataset.blocks.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(stats.size()) + " stat blocks vs " +
                 std::to_string(dataset.blocks.size()) + " feature blocks");
    return transform(dataset, stats);
}

namespace {

// Snap products like 100 * 0.7 that land a hair below an integer.
std::size_t floor_snapped(double x) {
    return static_cast<std::size_t>(std::floor(x + 1e-9));
}

} // namespace

SplitIndices split_indices(const AlignedDataset& dataset, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        fail(ErrorKind::invalid_argument,
             "train fraction " + format_double(spec.train_fraction) + " outside (0,1)");
    std::size_t rows = dataset.rows();
    if (rows < 10)
        fail(ErrorKind::invalid_argument,
             "split needs at least 10 rows, got " + std::to_string(rows));

    std::size_t train_total = floor_snapped(static_cast<double>(rows) * spec.train_fraction);
    Rng rng(spec.seed);
    SplitIndices out;

    if (!spec.stratified) {
        std::vector<std::size_t> order(rows);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        out.train.assign(order.begin(), order.begin() + train_total);
        out.test.assign(order.begin() + train_total, order.end());
    } else {
        if (!dataset.has_labels())
            fail(ErrorKind::invalid_argument, "stratified split needs labels");

        std::array<std::vector<std::size_t>, 2> by_class;
        for (std::size_t i = 0; i < rows; ++i)
            by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

        // Largest-remainder allocation: per-class floor quotas, then the
        // leftover train slots go to the largest fractional parts.
        std::array<std::size_t, 2> alloc{};
        std::array<double, 2> frac{};
        std::size_t assigned = 0;
        for (int c = 0; c < 2; ++c) {
            double quota = static_cast<double>(by_class[c].size()) * spec.train_fraction;
            alloc[c] = floor_snapped(quota);
            frac[c] = quota - static_cast<double>(alloc[c]);
            if (frac[c] < 0.0) frac[c] = 0.0;
            assigned += alloc[c];
        }
        std::array<int, 2> award_order = frac[1] > frac[0] ? std::array<int, 2>{1, 0}
                                                           : std::array<int, 2>{0, 1};
        while (assigned < train_total) {
            for (int c : award_order)
                if (assigned < train_total && alloc[c] < by_class[c].size()) {
                    ++alloc[c];
                    ++assigned;
                }
        }
        while (assigned > train_total) {
            for (int c : award_order)
                if (assigned > train_total && alloc[c] > 0) {
                    --alloc[c];
                    --assigned;
                }
        }

        for (int c = 0; c < 2; ++c) {
            auto& members = by_class[c];
            if (members.empty()) continue;
            if (alloc[c] == 0 || alloc[c] == members.size())
                fail(ErrorKind::invalid_argument,
                     "stratified split leaves class " + std::to_string(c) +
                         " absent from one side");
            rng.shuffle(members);
            out.train.insert(out.train.end(), members.begin(), members.begin() + alloc[c]);
            out.test.insert(out.test.end(), members.begin() + alloc[c], members.end());
        }
    }

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<Fold> kfold(std::size_t rows, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::invalid_argument, "k must be at least 2");
    if (k > rows)
        fail(ErrorKind::invalid_argument,
             "k = " + std::to_string(k) + " exceeds " + std::to_string(rows) + " rows");

    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Fold> folds(k);
    std::size_t base = rows / k;
    std::size_t extra = rows % k;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].validation.assign(order.begin() + cursor, order.begin() + cursor + size);
        folds[f].train.reserve(rows - size);
        folds[f].train.insert(folds[f].train.end(), order.begin(), order.begin() + cursor);
        folds[f].train.insert(folds[f].train.end(), order.begin() + cursor + size, order.end());
        cursor += size;
        std::sort(folds[f].validation.begin(), folds[f].validation.end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

namespace {

using json = nlohmann::json;

json parse_json(const std::string& text, const std::string& where) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::parse, where + ": malformed json");
    return doc;
}

} // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
    json doc = parse_json(read_text_file(path), path.string());
    if (!doc.is_object() || !doc.contains("modalities") || !doc["modalities"].is_array())
        fail(ErrorKind::schema, path.string() + ": expected a \"modalities\" array");

    DatasetManifest manifest;
    std::filesystem::path base = path.parent_path();
    try {
        for (const json& entry : doc["modalities"]) {
            if (!entry.is_object() || !entry.contains("modality") || !entry.contains("path") ||
                !entry.contains("key_column") || !entry.contains("feature_columns"))
                fail(ErrorKind::schema,
                     path.string() +
                         ": each modality needs modality, path, key_column, feature_columns");
            ModalitySchema schema;
            schema.modality = modality_from_name(entry["modality"].get<std::string>());
            schema.key_column = entry["key_column"].get<std::string>();
            for (const json& c : entry["feature_columns"])
                schema.feature_columns.push_back(c.get<std::string>());
            if (entry.contains("label_column") && !entry["label_column"].is_null())
                schema.label_column = entry["label_column"].get<std::string>();
            if (entry.contains("tlx_column") && !entry["tlx_column"].is_null())
                schema.tlx_column = entry["tlx_column"].get<std::string>();
            schema.validate();
            std::filesystem::path file = entry["path"].get<std::string>();
            if (file.is_relative()) file = base / file;
            manifest.sources.emplace_back(std::move(schema), std::move(file));
        }
        if (doc.contains("labels_from") && !doc["labels_from"].is_null())
            manifest.labels_from = modality_from_name(doc["labels_from"].get<std::string>());
        if (doc.contains("tlx_from") && !doc["tlx_from"].is_null())
            manifest.tlx_from = modality_from_name(doc["tlx_from"].get<std::string>());
    } catch (const json::exception& e) {
        fail(ErrorKind::schema, path.string() + ": " + e.what());
    }
    if (manifest.sources.empty())
        fail(ErrorKind::schema, path.string() + ": manifest lists no modalities");
    return manifest;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
    DatasetManifest manifest = read_manifest(manifest_path);
    LoadedDataset out;
    std::vector<ModalityFrame> frames;
    frames.reserve(manifest.sources.size());
    for (const auto& [schema, file] : manifest.sources) {
        frames.push_back(load_modality(file, schema));
        out.load_reports.emplace_back(schema.modality, frames.back().report);
    }
    out.dataset = align(frames, manifest.labels_from, manifest.tlx_from, &out.align_report);
    return out;
}

} // namespace stressfuse::data
