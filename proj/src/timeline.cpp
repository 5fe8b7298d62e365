#include "stressfuse/timeline.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "stressfuse/errors.hpp"
#include "stressfuse/textio.hpp"

namespace stressfuse::timeline {

StressTimeline run_timeline(const fusion::FusionModel& model,
                            const fusion::TlxRegressor* regressor,
                            const std::vector<TimedRecord>& records) {
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].timestamp == records[i - 1].timestamp)
            fail(ErrorKind::invalid_argument,
                 "duplicate timestamp " + format_double(records[i].timestamp));
        if (records[i].timestamp < records[i - 1].timestamp)
            fail(ErrorKind::invalid_argument,
                 "records not sorted: timestamp " + format_double(records[i].timestamp) +
                     " follows " + format_double(records[i - 1].timestamp));
    }

    StressTimeline timeline;
    timeline.entries.reserve(records.size());
    for (const TimedRecord& tr : records) {
        TimelineEntry entry;
        entry.timestamp = tr.timestamp;
        fusion::Prediction p = fusion::predict_stress(model, tr.record);
        entry.probability = p.probability;
        entry.label = p.label;
        if (regressor)
            entry.tlx = fusion::predict_tlx(model, *regressor, tr.record);
        timeline.entries.push_back(std::move(entry));
    }
    return timeline;
}

StressTimeline apply_persistence(StressTimeline timeline, const PersistencePolicy& policy) {
    if (policy.min_run == 0)
        fail(ErrorKind::invalid_argument, "min_run must be at least 1");

    timeline.alerts.clear();
    std::size_t n = timeline.entries.size();
    std::size_t i = 0;
    while (i < n) {
        if (timeline.entries[i].label != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && timeline.entries[j].label == 1) ++j;
        if (j - i >= policy.min_run) {
            AlertSpan span;
            span.first_index = i;
            span.last_index = j - 1;
            span.start_ts = timeline.entries[i].timestamp;
            span.end_ts = timeline.entries[j - 1].timestamp;
            timeline.alerts.push_back(span);
        }
        i = j;
    }
    return timeline;
}

std::string table_text(const StressTimeline& timeline) {
    std::vector<bool> in_alert(timeline.entries.size(), false);
    for (const AlertSpan& span : timeline.alerts)
        for (std::size_t i = span.first_index;
             i <= span.last_index && i < in_alert.size(); ++i)
            in_alert[i] = true;

    std::string out = "timestamp,probability,label,tlx_score,in_alert\n";
    for (std::size_t i = 0; i < timeline.entries.size(); ++i) {
        const TimelineEntry& e = timeline.entries[i];
        out += format_double(e.timestamp);
        out += "," + format_double(e.probability);
        out += "," + std::to_string(e.label);
        out += ",";
        if (e.tlx) out += format_double(*e.tlx);
        out += ",";
        out += in_alert[i] ? '1' : '0';
        out += '\n';
    }
    return out;
}

StressTimeline timeline_from_table(const std::string& text) {
    CsvTable table = read_csv_text(text, "timeline table");
    const std::vector<std::string> expected = {"timestamp", "probability", "label",
                                               "tlx_score", "in_alert"};
    if (table.header != expected)
        fail(ErrorKind::corrupt_file, "timeline table: unexpected columns");

    StressTimeline timeline;
    std::vector<bool> in_alert;
    for (const auto& row : table.rows) {
        TimelineEntry e;
        e.timestamp = parse_double(row[0], "timestamp");
        e.probability = parse_double(row[1], "probability");
        if (row[2] != "0" && row[2] != "1")
            fail(ErrorKind::corrupt_file,
                 "timeline table: label must be 0 or 1, got \"" + row[2] + "\"");
        e.label = row[2] == "1" ? 1 : 0;
        if (!row[3].empty()) e.tlx = parse_double(row[3], "tlx_score");
        if (row[4] != "0" && row[4] != "1")
            fail(ErrorKind::corrupt_file,
                 "timeline table: in_alert must be 0 or 1, got \"" + row[4] + "\"");
        if (!timeline.entries.empty() && e.timestamp <= timeline.entries.back().timestamp)
            fail(ErrorKind::corrupt_file,
                 "timeline table: timestamps not strictly increasing");
        in_alert.push_back(row[4] == "1");
        timeline.entries.push_back(std::move(e));
    }

    // in_alert runs are exactly the alert spans: spans are maximal stressed
    // runs, so two spans are never adjacent.
    std::size_t i = 0;
    while (i < in_alert.size()) {
        if (!in_alert[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < in_alert.size() && in_alert[j]) ++j;
        AlertSpan span;
        span.first_index = i;
        span.last_index = j - 1;
        span.start_ts = timeline.entries[i].timestamp;
        span.end_ts = timeline.entries[j - 1].timestamp;
        timeline.alerts.push_back(span);
        i = j;
    }
    return timeline;
}

std::string structured_text(const StressTimeline& timeline) {
    nlohmann::ordered_json doc;
    doc["entries"] = nlohmann::ordered_json::array();
    for (const TimelineEntry& e : timeline.entries) {
        nlohmann::ordered_json entry;
        entry["timestamp"] = e.timestamp;
        entry["probability"] = e.probability;
        entry["label"] = e.label;
        if (e.tlx)
            entry["tlx_score"] = *e.tlx;
        else
            entry["tlx_score"] = nullptr;
        doc["entries"].push_back(entry);
    }
    doc["alerts"] = nlohmann::ordered_json::array();
    for (const AlertSpan& span : timeline.alerts) {
        nlohmann::ordered_json s;
        s["start_ts"] = span.start_ts;
        s["end_ts"] = span.end_ts;
        s["first_index"] = span.first_index;
        s["last_index"] = span.last_index;
        doc["alerts"].push_back(s);
    }
    return doc.dump(2) + "\n";
}

StressTimeline timeline_from_structured(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded())
        fail(ErrorKind::corrupt_file, "timeline json: malformed json");

    StressTimeline timeline;
    try {
        for (const nlohmann::json& entry : doc.at("entries")) {
            TimelineEntry e;
            e.timestamp = entry.at("timestamp").get<double>();
            e.probability = entry.at("probability").get<double>();
            e.label = entry.at("label").get<int>();
            if (e.label != 0 && e.label != 1)
                fail(ErrorKind::corrupt_file, "timeline json: label must be 0 or 1");
            if (entry.contains("tlx_score") && !entry["tlx_score"].is_null())
                e.tlx = entry["tlx_score"].get<double>();
            if (!timeline.entries.empty() &&
                e.timestamp <= timeline.entries.back().timestamp)
                fail(ErrorKind::corrupt_file,
                     "timeline json: timestamps not strictly increasing");
            timeline.entries.push_back(std::move(e));
        }
        for (const nlohmann::json& span : doc.at("alerts")) {
            AlertSpan s;
            s.start_ts = span.at("start_ts").get<double>();
            s.end_ts = span.at("end_ts").get<double>();
            s.first_index = span.at("first_index").get<std::size_t>();
            s.last_index = span.at("last_index").get<std::size_t>();
            if (s.last_index >= timeline.entries.size() || s.first_index > s.last_index)
                fail(ErrorKind::corrupt_file, "timeline json: alert span out of range");
            timeline.alerts.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::corrupt_file, std::string("timeline json: ") + e.what());
    }
    return timeline;
}

void export_timeline(const StressTimeline& timeline, const std::filesystem::path& path,
                     ExportFormat format) {
    if (format == ExportFormat::table)
        write_text_file(path, table_text(timeline));
    else
        write_text_file(path, structured_text(timeline));
}

StressTimeline import_timeline(const std::filesystem::path& path, ExportFormat format) {
    std::string text = read_text_file(path);
    try {
        if (format == ExportFormat::table) return timeline_from_table(text);
        return timeline_from_structured(text);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void render_timeline(const StressTimeline& timeline, const std::filesystem::path& path) {
    if (timeline.entries.empty())
        fail(ErrorKind::empty_result, "cannot render an empty timeline");

    constexpr double kWidth = 960.0;
    constexpr double kHeight = 260.0;
    constexpr double kLeft = 50.0;
    constexpr double kRight = kWidth - 20.0;
    constexpr double kTop = 30.0;
    constexpr double kBottom = kHeight - 40.0;

    double t0 = timeline.entries.front().timestamp;
    double t1 = timeline.entries.back().timestamp;
    double span = t1 - t0;
    auto x_of = [&](double ts) {
        if (span == 0.0) return (kLeft + kRight) / 2.0;
        return kLeft + (ts - t0) / span * (kRight - kLeft);
    };
    auto y_of = [&](double probability) {
        return kBottom - probability * (kBottom - kTop);
    };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(kWidth) +
           "\" height=\"" + format_double(kHeight) + "\" viewBox=\"0 0 " +
           format_double(kWidth) + " " + format_double(kHeight) + "\">\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"" + format_double(kWidth) + "\" height=\"" +
           format_double(kHeight) + "\" fill=\"#ffffff\"/>\n";

    for (const AlertSpan& alert : timeline.alerts) {
        double x1 = x_of(alert.start_ts) - 3.0;
        double x2 = x_of(alert.end_ts) + 3.0;
        svg += "  <rect x=\"" + format_double(x1) + "\" y=\"" + format_double(kTop) +
               "\" width=\"" + format_double(x2 - x1) + "\" height=\"" +
               format_double(kBottom - kTop) + "\" fill=\"#f28c28\" fill-opacity=\"0.18\"/>\n";
    }

    // Threshold guide and axes.
    svg += "  <line x1=\"" + format_double(kLeft) + "\" y1=\"" + format_double(y_of(0.5)) +
           "\" x2=\"" + format_double(kRight) + "\" y2=\"" + format_double(y_of(0.5)) +
           "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
    svg += "  <line x1=\"" + format_double(kLeft) + "\" y1=\"" + format_double(kBottom) +
           "\" x2=\"" + format_double(kRight) + "\" y2=\"" + format_double(kBottom) +
           "\" stroke=\"#333333\"/>\n";
    svg += "  <line x1=\"" + format_double(kLeft) + "\" y1=\"" + format_double(kTop) +
           "\" x2=\"" + format_double(kLeft) + "\" y2=\"" + format_double(kBottom) +
           "\" stroke=\"#333333\"/>\n";

    for (const TimelineEntry& e : timeline.entries) {
        const char* color = e.label == 1 ? "#f28c28" : "#2a6fb0";
        svg += "  <circle cx=\"" + format_double(x_of(e.timestamp)) + "\" cy=\"" +
               format_double(y_of(e.probability)) + "\" r=\"2.5\" fill=\"" + color +
               "\"/>\n";
    }

    svg += "  <text x=\"" + format_double(kLeft) + "\" y=\"18\" font-family=\"sans-serif\" "
           "font-size=\"13\" fill=\"#333333\">stress probability over time</text>\n";
    svg += "</svg>\n";
    write_text_file(path, svg);
}

} // namespace stressfuse::timeline
