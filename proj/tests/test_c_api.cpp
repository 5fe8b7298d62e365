#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>
#include <unistd.h>

#include "stressfuse/stressfuse.h"

namespace fs = std::filesystem;

namespace {

constexpr const char* kSynthConfig =
    R"({"rows":140,"posture_dim":4,"facial_dim":4,"keystroke_dim":3,)"
    R"("noise_sigma":0.4,"signal_strength":1.0,"seed":91})";

constexpr const char* kTrainConfig =
    R"({"epochs":12,"lr":0.05,"batch":16,"seed":3,"with_tlx":true,)"
    R"("posture_hidden":[10],"facial_hidden":[10],"keystroke_hidden":[8],)"
    R"("fusion_hidden":[8],"tlx_hidden":[8,4],"dropout":0.3})";

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { sf_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// One synthetic dataset and one trained bundle shared by every case; the
// first case asserts the setup status codes.
struct Fixture {
    fs::path root;
    fs::path data_dir;
    fs::path bundle_dir;
    fs::path reports_dir;
    sf_dataset* dataset = nullptr;
    sf_model* model = nullptr;
    sf_status synth_status = SF_OK;
    sf_status open_status = SF_OK;
    sf_status train_status = SF_OK;
    sf_status model_status = SF_OK;

    static Fixture& get() {
        static Fixture f;
        return f;
    }

    Fixture() {
        root = fs::temp_directory_path() /
               ("stressfuse_capi_" + std::to_string(::getpid()));
        fs::create_directories(root);
        data_dir = root / "data";
        bundle_dir = root / "bundle";
        reports_dir = root / "reports";

        synth_status = sf_synth_generate(kSynthConfig, data_dir.string().c_str());
        if (synth_status != SF_OK) return;
        open_status =
            sf_dataset_open((data_dir / "manifest.json").string().c_str(), &dataset);
        if (open_status != SF_OK) return;
        train_status = sf_train(dataset, kTrainConfig, bundle_dir.string().c_str(),
                                reports_dir.string().c_str());
        if (train_status != SF_OK) return;
        model_status = sf_model_open(bundle_dir.string().c_str(), &model);
    }

    ~Fixture() {
        sf_model_close(model);
        sf_dataset_close(dataset);
        std::error_code ec;
        fs::remove_all(root, ec);
    }
};

} // namespace

TEST_CASE("version and status names") {
    CHECK(std::string(sf_version()) == "1.0.0");
    CHECK(std::string(sf_status_name(SF_OK)) == "ok");
    CHECK(std::string(sf_status_name(SF_ERROR_DIMENSION)) == "dimension_mismatch");
    CHECK(std::string(sf_status_name(SF_ERROR_MISSING_MODALITY)) == "missing_modality");
    CHECK(std::string(sf_status_name(SF_ERROR_VERSION)) == "version_mismatch");
}

TEST_CASE("pipeline setup succeeds") {
    Fixture& f = Fixture::get();
    REQUIRE(f.synth_status == SF_OK);
    REQUIRE(f.open_status == SF_OK);
    REQUIRE(f.train_status == SF_OK);
    REQUIRE(f.model_status == SF_OK);
    REQUIRE(f.dataset != nullptr);
    REQUIRE(f.model != nullptr);
    CHECK(fs::exists(f.bundle_dir / "bundle.json"));
    CHECK(fs::exists(f.reports_dir / "report.json"));

    size_t rows = 0;
    REQUIRE(sf_dataset_row_count(f.dataset, &rows) == SF_OK);
    CHECK(rows == 140);
}

TEST_CASE("synth argument validation") {
    CHECK(sf_synth_generate(kSynthConfig, nullptr) == SF_ERROR_INVALID_ARGUMENT);
    Fixture& f = Fixture::get();
    auto out = (f.root / "bad_synth").string();
    CHECK(sf_synth_generate("{broken", out.c_str()) == SF_ERROR_PARSE);
    CHECK(std::string(sf_last_error()).size() > 0);
    CHECK(sf_synth_generate(R"({"rows":0})", out.c_str()) == SF_ERROR_INVALID_ARGUMENT);
    CHECK(sf_synth_generate(R"({"rows":-10})", out.c_str()) == SF_ERROR_PARSE);
}

TEST_CASE("dataset report json") {
    Fixture& f = Fixture::get();
    REQUIRE(f.dataset != nullptr);
    OwnedString report;
    REQUIRE(sf_dataset_report_json(f.dataset, &report.ptr) == SF_OK);
    auto doc = nlohmann::json::parse(report.str());
    CHECK(doc["aligned_rows"] == 140);
    CHECK(doc["has_labels"] == true);
    CHECK(doc["has_tlx"] == true);
    CHECK(doc["modalities"].size() == 4);
}

TEST_CASE("dataset open failures") {
    sf_dataset* ds = nullptr;
    CHECK(sf_dataset_open("/no/such/manifest.json", &ds) != SF_OK);
    CHECK(ds == nullptr);
    CHECK(std::string(sf_last_error()).size() > 0);
    CHECK(sf_dataset_open(nullptr, &ds) == SF_ERROR_INVALID_ARGUMENT);
    size_t n = 0;
    CHECK(sf_dataset_row_count(nullptr, &n) == SF_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("train rejects bad options") {
    Fixture& f = Fixture::get();
    REQUIRE(f.dataset != nullptr);
    auto dir = (f.root / "bad_bundle").string();
    CHECK(sf_train(f.dataset, R"({"epochs":0})", dir.c_str(), nullptr) ==
          SF_ERROR_INVALID_ARGUMENT);
    CHECK(sf_train(nullptr, "{}", dir.c_str(), nullptr) == SF_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("model info") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    OwnedString info;
    REQUIRE(sf_model_info_json(f.model, &info.ptr) == SF_OK);
    auto doc = nlohmann::json::parse(info.str());
    CHECK(doc["mode"] == "early");
    CHECK(doc["has_tlx"] == true);
    CHECK(doc["fused_input_dim"] == 10 + 10 + 8 + 3);
    CHECK(doc["blocks"].size() == 4);
    CHECK(doc["train_rows"] == 98); // floor(140 * 0.7)
    CHECK(doc["test_rows"] == 42);
}

TEST_CASE("model open failures") {
    sf_model* m = nullptr;
    CHECK(sf_model_open("/no/such/bundle", &m) != SF_OK);
    CHECK(m == nullptr);
    CHECK(sf_model_open(nullptr, &m) == SF_ERROR_INVALID_ARGUMENT);
    OwnedString info;
    CHECK(sf_model_info_json(nullptr, &info.ptr) == SF_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("single-record prediction") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    double posture[4] = {0.5, -0.2, 0.1, 0.3};
    double facial[4] = {0.0, 0.4, -0.1, 0.2};
    double keystroke[3] = {1.0, 0.5, -0.5};
    double physiology[3] = {70.0, 45.0, 6.0};

    double probability = -1.0;
    int label = -1;
    REQUIRE(sf_model_predict(f.model, posture, 4, facial, 4, keystroke, 3, physiology, 3,
                             &probability, &label) == SF_OK);
    CHECK(probability >= 0.0);
    CHECK(probability <= 1.0);
    CHECK((label == 0 || label == 1));
    CHECK(label == (probability >= 0.5 ? 1 : 0));

    // Deterministic: the same inputs give bit-identical outputs.
    double probability2 = -1.0;
    int label2 = -1;
    REQUIRE(sf_model_predict(f.model, posture, 4, facial, 4, keystroke, 3, physiology, 3,
                             &probability2, &label2) == SF_OK);
    CHECK(probability2 == probability);
    CHECK(label2 == label);

    SUBCASE("null block") {
        CHECK(sf_model_predict(f.model, nullptr, 0, facial, 4, keystroke, 3, physiology, 3,
                               &probability, &label) == SF_ERROR_MISSING_MODALITY);
        CHECK(std::string(sf_last_error()).find("posture") != std::string::npos);
    }
    SUBCASE("wrong width") {
        CHECK(sf_model_predict(f.model, posture, 2, facial, 4, keystroke, 3, physiology, 3,
                               &probability, &label) == SF_ERROR_DIMENSION);
    }
    SUBCASE("non-finite input") {
        facial[1] = std::numeric_limits<double>::quiet_NaN();
        CHECK(sf_model_predict(f.model, posture, 4, facial, 4, keystroke, 3, physiology, 3,
                               &probability, &label) == SF_ERROR_NUMERIC);
    }
    SUBCASE("null handle") {
        CHECK(sf_model_predict(nullptr, posture, 4, facial, 4, keystroke, 3, physiology, 3,
                               &probability, &label) == SF_ERROR_INVALID_ARGUMENT);
    }
}

TEST_CASE("workload prediction") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    double posture[4] = {0.5, -0.2, 0.1, 0.3};
    double facial[4] = {0.0, 0.4, -0.1, 0.2};
    double keystroke[3] = {1.0, 0.5, -0.5};
    double physiology[3] = {70.0, 45.0, 6.0};
    double tlx = -1.0;
    REQUIRE(sf_model_predict_tlx(f.model, posture, 4, facial, 4, keystroke, 3, physiology,
                                 3, &tlx) == SF_OK);
    CHECK(tlx >= 0.0);
    CHECK(tlx <= 100.0);

    // A bundle trained without the regressor refuses workload queries.
    auto plain_dir = (f.root / "plain_bundle").string();
    REQUIRE(sf_train(f.dataset,
                     R"({"epochs":4,"seed":5,"posture_hidden":[8],"facial_hidden":[8],)"
                     R"("keystroke_hidden":[6],"fusion_hidden":[6],"dropout":0.2})",
                     plain_dir.c_str(), nullptr) == SF_OK);
    sf_model* plain = nullptr;
    REQUIRE(sf_model_open(plain_dir.c_str(), &plain) == SF_OK);
    CHECK(sf_model_predict_tlx(plain, posture, 4, facial, 4, keystroke, 3, physiology, 3,
                               &tlx) == SF_ERROR_INVALID_ARGUMENT);
    sf_model_close(plain);
}

TEST_CASE("evaluation over the dataset") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    OwnedString report;
    REQUIRE(sf_evaluate(f.model, f.dataset, R"({"on":"test"})", &report.ptr) == SF_OK);
    auto doc = nlohmann::json::parse(report.str());
    CHECK(doc["rows"] == 42);
    CHECK(doc["on"] == "test");
    CHECK(doc.contains("classification"));
    CHECK(doc.contains("tlx"));

    OwnedString bad;
    CHECK(sf_evaluate(f.model, f.dataset, R"({"on":"half"})", &bad.ptr) == SF_ERROR_PARSE);
}

TEST_CASE("batch prediction csv") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    OwnedString csv;
    REQUIRE(sf_predict_dataset(f.model, f.dataset, &csv.ptr) == SF_OK);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "key,probability,label,tlx");
    size_t rows = 0;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 140);
}

TEST_CASE("timeline lifecycle") {
    Fixture& f = Fixture::get();
    REQUIRE(f.model != nullptr);
    sf_timeline* t = nullptr;
    REQUIRE(sf_timeline_run(f.model, f.dataset, R"({"min_run":4})", &t) == SF_OK);
    REQUIRE(t != nullptr);

    size_t entries = 0;
    REQUIRE(sf_timeline_entry_count(t, &entries) == SF_OK);
    CHECK(entries == 140);
    size_t alerts = 0;
    REQUIRE(sf_timeline_alert_count(t, &alerts) == SF_OK);

    auto table_path = f.root / "timeline.csv";
    REQUIRE(sf_timeline_export(t, table_path.string().c_str(), "table") == SF_OK);
    CHECK(slurp(table_path).rfind("timestamp,probability,label,tlx_score,in_alert", 0) == 0);

    auto json_path = f.root / "timeline.json";
    REQUIRE(sf_timeline_export(t, json_path.string().c_str(), "structured") == SF_OK);
    auto doc = nlohmann::json::parse(slurp(json_path));
    CHECK(doc["entries"].size() == 140);
    CHECK(doc["alerts"].size() == alerts);

    CHECK(sf_timeline_export(t, json_path.string().c_str(), "yaml") ==
          SF_ERROR_INVALID_ARGUMENT);

    auto svg_path = f.root / "timeline.svg";
    REQUIRE(sf_timeline_render_svg(t, svg_path.string().c_str()) == SF_OK);
    CHECK(slurp(svg_path).find("<svg") != std::string::npos);

    OwnedString structured;
    REQUIRE(sf_timeline_json(t, &structured.ptr) == SF_OK);
    CHECK(nlohmann::json::parse(structured.str())["entries"].size() == 140);

    sf_timeline_close(t);

    size_t n = 0;
    CHECK(sf_timeline_entry_count(nullptr, &n) == SF_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("cross validation through the c api") {
    Fixture& f = Fixture::get();
    REQUIRE(f.dataset != nullptr);
    OwnedString report;
    REQUIRE(sf_crossval(f.dataset,
                        R"({"k":3,"epochs":6,"seed":9,"posture_hidden":[8],)"
                        R"("facial_hidden":[8],"keystroke_hidden":[6],)"
                        R"("fusion_hidden":[6],"dropout":0.2})",
                        &report.ptr) == SF_OK);
    auto doc = nlohmann::json::parse(report.str());
    CHECK(doc["k"] == 3);
    CHECK(doc["folds"].size() == 3);
    CHECK(doc["mean"].contains("accuracy"));
    CHECK(doc["stddev"].contains("f1"));

    OwnedString bad;
    CHECK(sf_crossval(f.dataset, R"({"k":100000,"epochs":2})", &bad.ptr) ==
          SF_ERROR_INVALID_ARGUMENT);
}
