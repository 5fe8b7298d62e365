#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "stressfuse/fusion.hpp"

namespace stressfuse::timeline {

struct TimelineEntry {
    double timestamp = 0.0;
    double probability = 0.0;
    int label = 0;
    std::optional<double> tlx;

    bool operator==(const TimelineEntry&) const = default;
};

/// Half-open in time, inclusive in entries: covers entries
/// [first_index, last_index], timestamps [start_ts, end_ts].
struct AlertSpan {
    double start_ts = 0.0;
    double end_ts = 0.0;
    std::size_t first_index = 0;
    std::size_t last_index = 0;

    bool operator==(const AlertSpan&) const = default;
};

struct StressTimeline {
    std::vector<TimelineEntry> entries; // strictly increasing timestamps
    std::vector<AlertSpan> alerts;      // non-overlapping, in order

    bool operator==(const StressTimeline&) const = default;
};

struct PersistencePolicy {
    std::size_t min_run = 5; // consecutive stressed entries needed to alert
};

struct TimedRecord {
    double timestamp = 0.0;
    fusion::Record record;
};

/// One entry per record, in input order. Records must be sorted by
/// timestamp with no duplicates. No alerts are assigned; run
/// apply_persistence for that.
StressTimeline run_timeline(const fusion::FusionModel& model,
                            const fusion::TlxRegressor* regressor,
                            const std::vector<TimedRecord>& records);

/// Alerts become the maximal runs of consecutive stressed labels with
/// length >= min_run. Recomputes from labels, so it is idempotent.
StressTimeline apply_persistence(StressTimeline timeline, const PersistencePolicy& policy);

enum class ExportFormat { table, structured }; // csv / json

/// Exact text of the two export formats; both parse back losslessly.
std::string table_text(const StressTimeline& timeline);
std::string structured_text(const StressTimeline& timeline);
StressTimeline timeline_from_table(const std::string& text);
StressTimeline timeline_from_structured(const std::string& text);

void export_timeline(const StressTimeline& timeline, const std::filesystem::path& path,
                     ExportFormat format);
StressTimeline import_timeline(const std::filesystem::path& path, ExportFormat format);

/// Standalone SVG: one mark per entry colored by state, alert spans shaded.
/// Errors on an empty timeline.
void render_timeline(const StressTimeline& timeline, const std::filesystem::path& path);

} // namespace stressfuse::timeline
