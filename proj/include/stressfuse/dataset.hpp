#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stressfuse/matrix.hpp"

namespace stressfuse::data {

enum class Modality { posture, facial, keystroke, physiology };

inline constexpr std::array<Modality, 4> kAllModalities = {
    Modality::posture, Modality::facial, Modality::keystroke, Modality::physiology};

inline constexpr std::size_t kPhysiologyWidth = 3;

const char* modality_name(Modality m);
Modality modality_from_name(std::string_view name);

struct ModalitySchema {
    Modality modality = Modality::posture;
    std::string key_column;
    std::vector<std::string> feature_columns;
    std::optional<std::string> label_column;
    std::optional<std::string> tlx_column;

    void validate() const;
};

struct LoadReport {
    std::size_t rows_read = 0; // data rows in the file
    std::size_t dropped = 0;   // rows excluded for missing/unparsable cells
};

/// One modality's table: unique keys, full-width finite feature rows.
/// Labels/tlx ride along when the schema declares their columns.
struct ModalityFrame {
    ModalitySchema schema;
    std::vector<std::string> keys;
    std::vector<Vector> features;
    std::vector<double> labels; // parallel to keys when schema.label_column set
    std::vector<double> tlx;    // parallel to keys when schema.tlx_column set
    LoadReport report;

    std::size_t size() const { return keys.size(); }
};

ModalityFrame load_modality(const std::filesystem::path& path, const ModalitySchema& schema);

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev; // population stddev; 0 marks a constant column

    bool operator==(const NormalizationStats&) const = default;
};

struct AlignReport {
    std::size_t union_keys = 0;
    std::size_t aligned = 0;
    // keys present somewhere but absent from this modality
    std::vector<std::pair<Modality, std::size_t>> excluded_by_modality;
};

/// Inner join of the modality frames on key. Rows are ordered by key
/// (numeric order when every key parses as a number, lexicographic
/// otherwise).
struct AlignedDataset {
    std::vector<std::string> keys;
    std::vector<Modality> modalities;           // block order
    std::vector<Matrix> blocks;                 // parallel to modalities
    std::vector<std::vector<std::string>> feature_names; // parallel to blocks
    std::vector<int> labels;                    // empty when no label source
    std::vector<double> tlx;                    // empty when no tlx source
    std::vector<NormalizationStats> stats;      // parallel to blocks; empty pre-normalize
    bool normalized = false;

    std::size_t rows() const { return keys.size(); }
    bool has_labels() const { return !labels.empty(); }
    bool has_tlx() const { return !tlx.empty(); }
    const Matrix* block(Modality m) const;
    const Matrix& block_or_throw(Modality m) const;

    AlignedDataset take_rows(std::span<const std::size_t> indices) const;
};

AlignedDataset align(const std::vector<ModalityFrame>& frames,
                     std::optional<Modality> labels_from,
                     std::optional<Modality> tlx_from,
                     AlignReport* out_report = nullptr);

/// Z-score every feature column with mean/stddev computed on fit_rows only,
/// then applied to all rows. Zero-variance columns map to 0. Stats are
/// stored on the result.
AlignedDataset normalize(const AlignedDataset& dataset, std::span<const std::size_t> fit_rows);

/// Apply previously fitted stats (e.g. from a saved model bundle).
AlignedDataset apply_stats(const AlignedDataset& dataset,
                           const std::vector<NormalizationStats>& stats);

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitIndices {
    std::vector<std::size_t> train; // sorted
    std::vector<std::size_t> test;  // sorted
};

/// Disjoint, exhaustive split with train size = floor(rows * fraction).
/// Stratified mode keeps each class within one row of its proportional
/// quota (largest-remainder allocation), preserving the total.
SplitIndices split_indices(const AlignedDataset& dataset, const SplitSpec& spec);

struct Fold {
    std::vector<std::size_t> train;      // sorted
    std::vector<std::size_t> validation; // sorted
};

/// Seeded k-fold partition; every index validates exactly once and fold
/// sizes differ by at most one.
std::vector<Fold> kfold(std::size_t rows, std::size_t k, std::uint64_t seed);

/// Schema manifest: JSON file naming per-modality csv paths and columns.
struct DatasetManifest {
    std::vector<std::pair<ModalitySchema, std::filesystem::path>> sources;
    std::optional<Modality> labels_from;
    std::optional<Modality> tlx_from;
};

DatasetManifest read_manifest(const std::filesystem::path& path);

struct LoadedDataset {
    AlignedDataset dataset;
    std::vector<std::pair<Modality, LoadReport>> load_reports;
    AlignReport align_report;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

} // namespace stressfuse::data
