#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "stressfuse/errors.hpp"
#include "stressfuse/matrix.hpp"
#include "stressfuse/nn.hpp"
#include "stressfuse/rng.hpp"
#include "stressfuse/timeline.hpp"

using namespace stressfuse;
using doctest::Approx;

namespace {

// Model whose fused head ignores everything except the sign of the posture
// block's first component, saturating to probability 0 or 1.
fusion::FusionModel sign_model() {
    fusion::FusionModel model;
    model.mode = fusion::FusionMode::late;
    for (std::size_t i = 0; i < 3; ++i) {
        nn::DenseNet enc;
        std::size_t dim = i == 2 ? 3 : 4;
        enc.input_dim = dim;
        nn::DenseLayer hidden;
        hidden.weights = Matrix(2, dim);
        hidden.weights.at(0, 0) = 1.0;
        hidden.weights.at(1, 0) = -1.0;
        hidden.biases = Vector(2, 0.0);
        hidden.activation = nn::Activation::relu;
        enc.layers.push_back(std::move(hidden));
        nn::DenseLayer out;
        out.weights = Matrix(1, 2);
        out.weights.at(0, 0) = 1000.0;
        out.weights.at(0, 1) = -1000.0;
        out.biases = Vector(1, 0.0);
        out.activation = nn::Activation::sigmoid;
        enc.layers.push_back(std::move(out));
        model.encoders[i] = std::move(enc);
    }
    nn::DenseLayer head;
    head.weights = Matrix(1, 6);
    head.weights.at(0, 0) = 1000.0;
    head.biases = Vector(1, -500.0);
    head.activation = nn::Activation::sigmoid;
    model.fusion_head.input_dim = 6;
    model.fusion_head.layers.push_back(std::move(head));
    return model;
}

timeline::TimedRecord record_at(double ts, double signal) {
    timeline::TimedRecord tr;
    tr.timestamp = ts;
    tr.record.posture = Vector{signal, 0.0, 0.0, 0.0};
    tr.record.facial = Vector{signal, 0.0, 0.0, 0.0};
    tr.record.keystroke = Vector{signal, 0.0, 0.0};
    tr.record.physiology = Vector{0.0, 0.0, 0.0};
    return tr;
}

timeline::StressTimeline from_labels(const std::vector<int>& labels) {
    timeline::StressTimeline t;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        timeline::TimelineEntry e;
        e.timestamp = static_cast<double>(i);
        e.probability = labels[i] ? 0.9 : 0.1;
        e.label = labels[i];
        t.entries.push_back(e);
    }
    return t;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("empty record list gives an empty timeline") {
    auto model = sign_model();
    auto t = timeline::run_timeline(model, nullptr, {});
    CHECK(t.entries.empty());
    CHECK(t.alerts.empty());
}

TEST_CASE("constant relaxed input stays relaxed") {
    auto model = sign_model();
    std::vector<timeline::TimedRecord> records;
    for (int i = 0; i < 40; ++i) records.push_back(record_at(i, -1.0));
    auto t = timeline::run_timeline(model, nullptr, records);
    REQUIRE(t.entries.size() == 40);
    for (const auto& e : t.entries) {
        CHECK(e.label == 0);
        CHECK_FALSE(e.tlx.has_value());
    }
}

TEST_CASE("one entry per record with labels following the signal") {
    auto model = sign_model();
    Rng rng(11);
    std::vector<timeline::TimedRecord> records;
    std::vector<int> expected;
    for (int i = 0; i < 100; ++i) {
        double signal = rng.bernoulli(0.5) ? 1.0 : -1.0;
        records.push_back(record_at(i, signal));
        expected.push_back(signal > 0 ? 1 : 0);
    }
    auto t = timeline::run_timeline(model, nullptr, records);
    REQUIRE(t.entries.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(t.entries[i].label == expected[i]);
        CHECK(t.entries[i].timestamp == Approx(double(i)));
    }
}

TEST_CASE("run_timeline fills tlx when a regressor is supplied") {
    auto model = sign_model();
    model.mode = fusion::FusionMode::early;
    // Early feature width: three 2-unit hidden layers = 6, + 3 physio = 9.
    model.fusion_head.input_dim = 9;
    model.fusion_head.layers[0].weights = Matrix(1, 9);
    model.fusion_head.layers[0].biases = Vector(1, 0.0);

    fusion::TlxRegressor reg;
    reg.head.input_dim = 9;
    nn::DenseLayer out;
    out.weights = Matrix(1, 9);
    out.biases = Vector(1, 0.55);
    out.activation = nn::Activation::identity;
    reg.head.layers.push_back(std::move(out));

    std::vector<timeline::TimedRecord> records{record_at(0, 1.0), record_at(1, -1.0)};
    auto t = timeline::run_timeline(model, &reg, records);
    REQUIRE(t.entries.size() == 2);
    for (const auto& e : t.entries) {
        REQUIRE(e.tlx.has_value());
        CHECK(*e.tlx == Approx(55.0).epsilon(1e-9));
    }
}

TEST_CASE("run_timeline rejects unsorted and duplicate timestamps") {
    auto model = sign_model();
    std::vector<timeline::TimedRecord> unsorted{record_at(5, 1.0), record_at(3, 1.0)};
    try {
        timeline::run_timeline(model, nullptr, unsorted);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
    }
    std::vector<timeline::TimedRecord> duplicated{record_at(5, 1.0), record_at(5, 1.0)};
    CHECK_THROWS_AS(timeline::run_timeline(model, nullptr, duplicated), Error);
}

TEST_CASE("persistence suppresses isolated stressed entries") {
    auto t = from_labels({0, 1, 0, 1, 0});
    auto out = timeline::apply_persistence(t, {3});
    CHECK(out.alerts.empty());
}

TEST_CASE("persistence keeps a long run") {
    auto t = from_labels({0, 1, 1, 1, 1, 0});
    auto out = timeline::apply_persistence(t, {3});
    REQUIRE(out.alerts.size() == 1);
    CHECK(out.alerts[0].first_index == 1);
    CHECK(out.alerts[0].last_index == 4);
    CHECK(out.alerts[0].start_ts == Approx(1.0));
    CHECK(out.alerts[0].end_ts == Approx(4.0));
}

TEST_CASE("min_run of one alerts on every stressed run") {
    auto t = from_labels({1, 0, 1, 1, 0, 1});
    auto out = timeline::apply_persistence(t, {1});
    REQUIRE(out.alerts.size() == 3);
    CHECK(out.alerts[0].first_index == 0);
    CHECK(out.alerts[0].last_index == 0);
    CHECK(out.alerts[1].first_index == 2);
    CHECK(out.alerts[1].last_index == 3);
    CHECK(out.alerts[2].first_index == 5);
    CHECK(out.alerts[2].last_index == 5);
}

TEST_CASE("persistence policy validation") {
    auto t = from_labels({1, 1, 1});
    CHECK_THROWS_AS(timeline::apply_persistence(t, {0}), Error);
}

TEST_CASE("persistence matches the run-length oracle on random sequences") {
    Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.uniform_index(60);
        std::vector<int> labels(n);
        for (auto& l : labels) l = rng.bernoulli(0.45) ? 1 : 0;
        std::size_t min_run = 1 + rng.uniform_index(8);

        auto out = timeline::apply_persistence(from_labels(labels), {min_run});
        auto oracle = testutil::run_length_alerts(labels, min_run);
        REQUIRE(out.alerts.size() == oracle.size());
        for (std::size_t a = 0; a < oracle.size(); ++a) {
            REQUIRE(out.alerts[a].first_index == oracle[a].first);
            REQUIRE(out.alerts[a].last_index == oracle[a].second);
            REQUIRE(out.alerts[a].start_ts ==
                    Approx(double(oracle[a].first)).epsilon(1e-12));
            REQUIRE(out.alerts[a].end_ts ==
                    Approx(double(oracle[a].second)).epsilon(1e-12));
        }
    }
}

TEST_CASE("persistence is idempotent and monotone in min_run") {
    Rng rng(424242);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 5 + rng.uniform_index(50);
        std::vector<int> labels(n);
        for (auto& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
        auto base = from_labels(labels);

        std::size_t previous_count = SIZE_MAX;
        for (std::size_t min_run = 1; min_run <= 6; ++min_run) {
            auto once = timeline::apply_persistence(base, {min_run});
            auto twice = timeline::apply_persistence(once, {min_run});
            REQUIRE(once == twice);

            // Monotone: every alert at min_run k is contained in one at k-1,
            // and counts never grow.
            REQUIRE(once.alerts.size() <= previous_count);
            previous_count = once.alerts.size();
            if (min_run > 1) {
                auto looser = timeline::apply_persistence(base, {min_run - 1});
                for (const auto& span : once.alerts) {
                    bool contained = false;
                    for (const auto& wide : looser.alerts)
                        if (wide.first_index <= span.first_index &&
                            span.last_index <= wide.last_index)
                            contained = true;
                    REQUIRE(contained);
                }
            }
        }
    }
}

TEST_CASE("flipping one label inside a long run splits at most one alert into two") {
    Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t min_run = 2 + rng.uniform_index(4);
        std::size_t run = min_run + 2 + rng.uniform_index(6); // > min_run + 1
        std::vector<int> labels(run + 6, 0);
        for (std::size_t i = 0; i < run; ++i) labels[3 + i] = 1;
        auto before = timeline::apply_persistence(from_labels(labels), {min_run});
        REQUIRE(before.alerts.size() == 1);

        auto flipped = labels;
        flipped[3 + 1 + rng.uniform_index(run - 2)] = 0; // interior flip
        auto after = timeline::apply_persistence(from_labels(flipped), {min_run});
        CHECK(after.alerts.size() <= 2);
    }
}

TEST_CASE("alert spans stay within the timeline and respect min_run") {
    Rng rng(99);
    std::vector<int> labels(80);
    for (auto& l : labels) l = rng.bernoulli(0.6) ? 1 : 0;
    auto out = timeline::apply_persistence(from_labels(labels), {4});
    for (std::size_t a = 0; a < out.alerts.size(); ++a) {
        const auto& span = out.alerts[a];
        CHECK(span.last_index < out.entries.size());
        CHECK(span.last_index - span.first_index + 1 >= 4);
        if (a > 0) CHECK(span.first_index > out.alerts[a - 1].last_index);
        for (std::size_t i = span.first_index; i <= span.last_index; ++i)
            CHECK(out.entries[i].label == 1);
    }
}

TEST_CASE("table export round-trips") {
    auto t = from_labels({0, 1, 1, 1, 0, 1, 1, 1, 1, 0});
    t.entries[2].tlx = 71.25;
    t.entries[5].tlx = 33.5;
    auto with_alerts = timeline::apply_persistence(t, {3});

    testutil::TempDir dir("tl_table");
    auto path = dir.path() / "timeline.csv";
    timeline::export_timeline(with_alerts, path, timeline::ExportFormat::table);
    auto back = timeline::import_timeline(path, timeline::ExportFormat::table);
    CHECK(back == with_alerts);

    auto text = slurp(path);
    CHECK(text.find("timestamp,probability,label,tlx_score,in_alert") == 0);
}

TEST_CASE("structured export round-trips") {
    auto t = from_labels({1, 1, 1, 1, 0, 0, 1});
    t.entries[0].tlx = 90.0;
    auto with_alerts = timeline::apply_persistence(t, {2});

    testutil::TempDir dir("tl_json");
    auto path = dir.path() / "timeline.json";
    timeline::export_timeline(with_alerts, path, timeline::ExportFormat::structured);
    auto back = timeline::import_timeline(path, timeline::ExportFormat::structured);
    CHECK(back == with_alerts);

    // Alert spans serialize as their timestamps.
    auto text = slurp(path);
    CHECK(text.find("\"start_ts\"") != std::string::npos);
    CHECK(text.find("\"end_ts\"") != std::string::npos);
}

TEST_CASE("empty timeline exports a header-only table") {
    timeline::StressTimeline empty;
    testutil::TempDir dir("tl_empty");
    auto path = dir.path() / "empty.csv";
    timeline::export_timeline(empty, path, timeline::ExportFormat::table);
    auto text = slurp(path);
    CHECK(text == "timestamp,probability,label,tlx_score,in_alert\n");
    auto back = timeline::import_timeline(path, timeline::ExportFormat::table);
    CHECK(back.entries.empty());
    CHECK(back.alerts.empty());
}

TEST_CASE("imports reject corrupt files") {
    testutil::TempDir dir("tl_bad");

    auto bad_header = dir.path() / "h.csv";
    std::ofstream(bad_header) << "time,prob\n1,0.5\n";
    CHECK_THROWS_AS(timeline::import_timeline(bad_header, timeline::ExportFormat::table),
                    Error);

    auto bad_label = dir.path() / "l.csv";
    std::ofstream(bad_label) << "timestamp,probability,label,tlx_score,in_alert\n"
                                "1,0.5,2,,0\n";
    CHECK_THROWS_AS(timeline::import_timeline(bad_label, timeline::ExportFormat::table),
                    Error);

    auto bad_order = dir.path() / "o.csv";
    std::ofstream(bad_order) << "timestamp,probability,label,tlx_score,in_alert\n"
                                "2,0.5,1,,0\n1,0.5,1,,0\n";
    CHECK_THROWS_AS(timeline::import_timeline(bad_order, timeline::ExportFormat::table),
                    Error);

    auto bad_json = dir.path() / "b.json";
    std::ofstream(bad_json) << "{\"entries\": 12}";
    CHECK_THROWS_AS(timeline::import_timeline(bad_json, timeline::ExportFormat::structured),
                    Error);

    CHECK_THROWS_AS(
        timeline::import_timeline(dir.path() / "missing.csv", timeline::ExportFormat::table),
        Error);
}

TEST_CASE("text round-trip preserves probability precision") {
    timeline::StressTimeline t;
    timeline::TimelineEntry e;
    e.timestamp = 1.0;
    e.probability = 0.12345678901234567;
    e.label = 0;
    t.entries.push_back(e);
    e.timestamp = 2.0;
    e.probability = 1.0 / 3.0;
    e.label = 1;
    e.tlx = 100.0 / 3.0;
    t.entries.push_back(e);

    auto table = timeline::timeline_from_table(timeline::table_text(t));
    CHECK(table == t);
    auto structured = timeline::timeline_from_structured(timeline::structured_text(t));
    CHECK(structured == t);
}

TEST_CASE("render produces one mark per entry") {
    auto t = from_labels({0, 1, 1, 1, 0, 0, 1});
    auto with_alerts = timeline::apply_persistence(t, {3});
    testutil::TempDir dir("tl_svg");
    auto path = dir.path() / "plot.svg";
    timeline::render_timeline(with_alerts, path);
    auto text = slurp(path);

    std::size_t marks = 0;
    for (std::size_t pos = text.find("<circle"); pos != std::string::npos;
         pos = text.find("<circle", pos + 1))
        ++marks;
    CHECK(marks == 7);
    CHECK(text.find("<svg") != std::string::npos);
}

TEST_CASE("all-relaxed render has no stressed marks") {
    auto t = from_labels({0, 0, 0, 0});
    testutil::TempDir dir("tl_svg2");
    auto path = dir.path() / "calm.svg";
    timeline::render_timeline(t, path);
    auto text = slurp(path);
    // No alert shading and no stressed-colored marks anywhere.
    CHECK(text.find("fill=\"#f28c28\"") == std::string::npos);
    std::size_t marks = 0;
    for (std::size_t pos = text.find("<circle"); pos != std::string::npos;
         pos = text.find("<circle", pos + 1))
        ++marks;
    CHECK(marks == 4);
}

TEST_CASE("render output is well-formed markup") {
    auto t = from_labels({0, 1, 1, 1, 1, 0});
    auto with_alerts = timeline::apply_persistence(t, {2});
    testutil::TempDir dir("tl_svg3");
    auto path = dir.path() / "check.svg";
    timeline::render_timeline(with_alerts, path);
    auto text = slurp(path);

    // Minimal XML well-formedness: every opened tag closes in order.
    std::vector<std::string> stack;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string::npos) {
        std::size_t end = text.find('>', pos);
        REQUIRE(end != std::string::npos);
        std::string tag = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            REQUIRE(!stack.empty());
            REQUIRE(stack.back() == tag.substr(1));
            stack.pop_back();
        } else if (tag.back() != '/') {
            auto space = tag.find_first_of(" \t\n");
            stack.push_back(space == std::string::npos ? tag : tag.substr(0, space));
        }
    }
    CHECK(stack.empty());

    CHECK_THROWS_AS(timeline::render_timeline(timeline::StressTimeline{}, dir.path() / "e.svg"),
                    Error);
}
