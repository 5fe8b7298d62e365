// Command-line front end. Talks to the library exclusively through the C
// API so it exercises the same surface that external callers see.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stressfuse/stressfuse.h"

namespace {

using ordered_json = nlohmann::ordered_json;

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(sf_status status, const std::string& stage) {
    if (status == SF_OK) return;
    throw CliError("stage " + stage + ": " + sf_last_error() + " [" +
                   sf_status_name(status) + "]");
}

std::string take_string(char* owned) {
    std::string out = owned ? owned : "";
    sf_string_free(owned);
    return out;
}

struct DatasetHandle {
    sf_dataset* ds = nullptr;
    ~DatasetHandle() { sf_dataset_close(ds); }
};

struct ModelHandle {
    sf_model* m = nullptr;
    ~ModelHandle() { sf_model_close(m); }
};

struct TimelineHandle {
    sf_timeline* t = nullptr;
    ~TimelineHandle() { sf_timeline_close(t); }
};

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("stage write: cannot open " + path.string());
    out << content;
    if (!out) throw CliError("stage write: write failed for " + path.string());
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError("stage config: cannot open " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw CliError("stage config: " + path + " is not a json object");
    return doc;
}

// Config-file values first, then every flag the user actually passed on
// top. The merged object goes through the library's option parsing, so
// validation lives in one place.
class OptionMerge {
public:
    explicit OptionMerge(const std::string& config_path) {
        if (!config_path.empty()) merged_ = load_config_file(config_path);
    }

    template <class T>
    void overlay(const CLI::Option* opt, const char* name, const T& value) {
        if (opt && opt->count() > 0) merged_[name] = value;
    }

    std::string text() const { return merged_.dump(); }

private:
    nlohmann::json merged_ = nlohmann::json::object();
};

struct CommonArgs {
    std::string manifest;
    std::string bundle;
    std::string out_dir;
    std::string config;
    std::string mode;
    std::uint64_t seed = 42;
    std::size_t epochs = 200;
    double lr = 0.01;
    std::size_t batch = 32;
    double split = 0.7;
    std::size_t k = 5;
    std::size_t min_run = 5;
    bool with_tlx = false;
};

DatasetHandle open_dataset(const std::string& manifest) {
    DatasetHandle handle;
    check(sf_dataset_open(manifest.c_str(), &handle.ds), "ingest");
    return handle;
}

ModelHandle open_model(const std::string& bundle) {
    ModelHandle handle;
    check(sf_model_open(bundle.c_str(), &handle.m), "load-bundle");
    return handle;
}

int cmd_synth(const CommonArgs& args, const std::string& preset, const CLI::Option* preset_opt,
              std::size_t rows, const CLI::Option* rows_opt, double noise,
              const CLI::Option* noise_opt, double missing, const CLI::Option* missing_opt,
              const CLI::Option* seed_opt) {
    OptionMerge merge(args.config);
    merge.overlay(preset_opt, "preset", preset);
    merge.overlay(rows_opt, "rows", rows);
    merge.overlay(noise_opt, "noise_sigma", noise);
    merge.overlay(seed_opt, "seed", args.seed);
    for (const char* field :
         {"missing_posture", "missing_facial", "missing_keystroke", "missing_physiology"})
        merge.overlay(missing_opt, field, missing);
    check(sf_synth_generate(merge.text().c_str(), args.out_dir.c_str()), "synth");
    std::cout << "wrote synthetic dataset to " << args.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const OptionMerge& merge) {
    DatasetHandle ds = open_dataset(args.manifest);
    const char* reports = args.out_dir.empty() ? nullptr : args.out_dir.c_str();
    check(sf_train(ds.ds, merge.text().c_str(), args.bundle.c_str(), reports), "train");
    std::cout << "bundle written to " << args.bundle << "\n";
    if (reports) std::cout << "reports written to " << args.out_dir << "\n";
    return 0;
}

ordered_json evaluate_one(sf_model* model, sf_dataset* ds, const std::string& options) {
    char* text = nullptr;
    check(sf_evaluate(model, ds, options.c_str(), &text), "evaluate");
    return ordered_json::parse(take_string(text));
}

std::string roc_csv(const ordered_json& report) {
    std::string out = "fpr,tpr\n";
    if (report.contains("roc") && report["roc"].is_object())
        for (const ordered_json& p : report["roc"]["points"])
            out += p[0].dump() + "," + p[1].dump() + "\n";
    return out;
}

int cmd_evaluate(const CommonArgs& args, const std::vector<std::string>& bundles,
                 const std::string& on, const CLI::Option* on_opt) {
    OptionMerge merge(args.config);
    merge.overlay(on_opt, "on", on);
    std::filesystem::create_directories(args.out_dir);
    DatasetHandle ds = open_dataset(args.manifest);

    ordered_json comparison_rows = ordered_json::array();
    for (const std::string& bundle_path : bundles) {
        ModelHandle model = open_model(bundle_path);
        ordered_json report = evaluate_one(model.m, ds.ds, merge.text());

        char* info_text = nullptr;
        check(sf_model_info_json(model.m, &info_text), "evaluate");
        ordered_json info = ordered_json::parse(take_string(info_text));
        std::string mode = info["mode"].get<std::string>();

        std::string suffix = bundles.size() > 1 ? "_" + mode : "";
        write_file(args.out_dir + "/report" + suffix + ".json", report.dump(2) + "\n");
        write_file(args.out_dir + "/roc" + suffix + ".csv", roc_csv(report));

        ordered_json row;
        row["bundle"] = bundle_path;
        row["mode"] = mode;
        for (const char* key : {"accuracy", "precision", "recall", "f1"})
            row[key] = report["classification"][key];
        row["auc"] = report["roc"].is_object() ? report["roc"]["auc"] : ordered_json();
        if (report.contains("tlx")) row["rmse_raw"] = report["tlx"]["rmse_raw"];
        comparison_rows.push_back(row);
        std::cout << bundle_path << ": accuracy "
                  << report["classification"]["accuracy"].dump() << "\n";
    }

    if (bundles.size() > 1) {
        std::string csv = "bundle,mode,accuracy,precision,recall,f1,auc\n";
        for (const ordered_json& row : comparison_rows) {
            csv += row["bundle"].get<std::string>() + "," + row["mode"].get<std::string>();
            for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"})
                csv += "," + (row[key].is_null() ? std::string() : row[key].dump());
            csv += "\n";
        }
        write_file(args.out_dir + "/comparison.csv", csv);
    }
    return 0;
}

int cmd_predict(const CommonArgs& args) {
    std::filesystem::create_directories(args.out_dir);
    DatasetHandle ds = open_dataset(args.manifest);
    ModelHandle model = open_model(args.bundle);
    char* csv = nullptr;
    check(sf_predict_dataset(model.m, ds.ds, &csv), "predict");
    write_file(args.out_dir + "/predictions.csv", take_string(csv));
    std::cout << "predictions written to " << args.out_dir << "/predictions.csv\n";
    return 0;
}

int cmd_timeline(const CommonArgs& args, const OptionMerge& merge) {
    std::filesystem::create_directories(args.out_dir);
    DatasetHandle ds = open_dataset(args.manifest);
    ModelHandle model = open_model(args.bundle);

    TimelineHandle timeline;
    check(sf_timeline_run(model.m, ds.ds, merge.text().c_str(), &timeline.t), "timeline");
    check(sf_timeline_export(timeline.t, (args.out_dir + "/timeline.csv").c_str(), "table"),
          "export");
    check(sf_timeline_export(timeline.t, (args.out_dir + "/timeline.json").c_str(),
                             "structured"),
          "export");
    check(sf_timeline_render_svg(timeline.t, (args.out_dir + "/timeline.svg").c_str()),
          "render");

    char* text = nullptr;
    check(sf_timeline_json(timeline.t, &text), "export");
    ordered_json doc = ordered_json::parse(take_string(text));
    std::string alerts = "start_ts,end_ts,first_index,last_index\n";
    for (const ordered_json& span : doc["alerts"])
        alerts += span["start_ts"].dump() + "," + span["end_ts"].dump() + "," +
                  span["first_index"].dump() + "," + span["last_index"].dump() + "\n";
    write_file(args.out_dir + "/alerts.csv", alerts);

    size_t entries = 0;
    size_t alert_count = 0;
    check(sf_timeline_entry_count(timeline.t, &entries), "timeline");
    check(sf_timeline_alert_count(timeline.t, &alert_count), "timeline");
    std::cout << entries << " entries, " << alert_count << " alert span"
              << (alert_count == 1 ? "" : "s") << "; outputs in " << args.out_dir << "\n";
    return 0;
}

int cmd_crossval(const CommonArgs& args, const OptionMerge& merge) {
    DatasetHandle ds = open_dataset(args.manifest);
    char* text = nullptr;
    check(sf_crossval(ds.ds, merge.text().c_str(), &text), "crossval");
    std::string report = take_string(text);
    if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        write_file(args.out_dir + "/crossval.json", report + "\n");
        std::cout << "crossval report written to " << args.out_dir << "/crossval.json\n";
    } else {
        std::cout << report << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stressfuse: multimodal stress detection toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sf_version()));

    CommonArgs args;
    std::string preset;
    std::size_t rows = 3000;
    double noise = 0.5;
    double missing = 0.0;
    std::vector<std::string> eval_bundles;
    std::string eval_on = "test";
    bool stratified = true;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* synth_preset = synth->add_option("--preset", preset, "named preset (paper-shape)");
    auto* synth_rows = synth->add_option("--rows", rows, "rows to generate");
    auto* synth_noise = synth->add_option("--noise-sigma", noise, "feature noise scale");
    auto* synth_missing =
        synth->add_option("--missing", missing, "per-modality missing fraction");
    auto* synth_seed = synth->add_option("--seed", args.seed, "generator seed");
    synth->add_option("--out-dir", args.out_dir, "output directory")->required();
    synth->add_option("--config", args.config, "json config file");

    auto* train = app.add_subcommand("train", "train a fusion model bundle");
    train->add_option("--manifest", args.manifest, "dataset schema manifest")->required();
    train->add_option("--bundle", args.bundle, "bundle output directory")->required();
    train->add_option("--out-dir", args.out_dir, "reports output directory");
    auto* train_mode = train->add_option("--mode", args.mode, "fusion mode: early or late")
                           ->check(CLI::IsMember({"early", "late"}));
    auto* train_epochs = train->add_option("--epochs", args.epochs, "training epochs");
    auto* train_lr = train->add_option("--lr", args.lr, "learning rate");
    auto* train_batch = train->add_option("--batch", args.batch, "mini-batch size");
    auto* train_split = train->add_option("--split", args.split, "train fraction");
    auto* train_seed = train->add_option("--seed", args.seed, "master seed");
    auto* train_tlx = train->add_flag("--with-tlx", args.with_tlx,
                                      "also train the workload regressor");
    auto* train_strat =
        train->add_flag("--stratified,!--no-stratified", stratified, "stratify the split");
    train->add_option("--config", args.config, "json config file");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate bundles on a dataset");
    evaluate->add_option("--manifest", args.manifest, "dataset schema manifest")->required();
    evaluate->add_option("--bundle", eval_bundles, "bundle directory (repeatable)")
        ->required();
    evaluate->add_option("--out-dir", args.out_dir, "report output directory")->required();
    auto* eval_on_opt =
        evaluate->add_option("--on", eval_on, "rows to evaluate: test, train or all")
            ->check(CLI::IsMember({"test", "train", "all"}));
    evaluate->add_option("--config", args.config, "json config file");

    auto* predict = app.add_subcommand("predict", "write per-row predictions");
    predict->add_option("--manifest", args.manifest, "dataset schema manifest")->required();
    predict->add_option("--bundle", args.bundle, "bundle directory")->required();
    predict->add_option("--out-dir", args.out_dir, "output directory")->required();

    auto* timeline = app.add_subcommand("timeline", "score a time-ordered dataset");
    timeline->add_option("--manifest", args.manifest, "dataset schema manifest")->required();
    timeline->add_option("--bundle", args.bundle, "bundle directory")->required();
    timeline->add_option("--out-dir", args.out_dir, "output directory")->required();
    auto* timeline_min_run =
        timeline->add_option("--min-run", args.min_run, "entries needed to open an alert");
    auto* timeline_tlx = timeline->add_flag("--with-tlx,!--no-tlx", args.with_tlx,
                                            "include workload scores when available");
    timeline->add_option("--config", args.config, "json config file");

    auto* crossval = app.add_subcommand("crossval", "k-fold cross validation");
    crossval->add_option("--manifest", args.manifest, "dataset schema manifest")->required();
    crossval->add_option("--out-dir", args.out_dir, "report output directory");
    auto* cv_k = crossval->add_option("--k", args.k, "fold count");
    auto* cv_mode = crossval->add_option("--mode", args.mode, "fusion mode: early or late")
                        ->check(CLI::IsMember({"early", "late"}));
    auto* cv_epochs = crossval->add_option("--epochs", args.epochs, "training epochs");
    auto* cv_lr = crossval->add_option("--lr", args.lr, "learning rate");
    auto* cv_batch = crossval->add_option("--batch", args.batch, "mini-batch size");
    auto* cv_seed = crossval->add_option("--seed", args.seed, "master seed");
    auto* cv_tlx =
        crossval->add_flag("--with-tlx", args.with_tlx, "also train the workload regressor");
    crossval->add_option("--config", args.config, "json config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(args, preset, synth_preset, rows, synth_rows, noise, synth_noise,
                             missing, synth_missing, synth_seed);
        if (train->parsed()) {
            OptionMerge merge(args.config);
            merge.overlay(train_mode, "mode", args.mode);
            merge.overlay(train_epochs, "epochs", args.epochs);
            merge.overlay(train_lr, "lr", args.lr);
            merge.overlay(train_batch, "batch", args.batch);
            merge.overlay(train_split, "split", args.split);
            merge.overlay(train_seed, "seed", args.seed);
            merge.overlay(train_tlx, "with_tlx", args.with_tlx);
            merge.overlay(train_strat, "stratified", stratified);
            return cmd_train(args, merge);
        }
        if (evaluate->parsed()) return cmd_evaluate(args, eval_bundles, eval_on, eval_on_opt);
        if (predict->parsed()) return cmd_predict(args);
        if (timeline->parsed()) {
            OptionMerge merge(args.config);
            merge.overlay(timeline_min_run, "min_run", args.min_run);
            merge.overlay(timeline_tlx, "with_tlx", args.with_tlx);
            return cmd_timeline(args, merge);
        }
        if (crossval->parsed()) {
            OptionMerge merge(args.config);
            merge.overlay(cv_k, "k", args.k);
            merge.overlay(cv_mode, "mode", args.mode);
            merge.overlay(cv_epochs, "epochs", args.epochs);
            merge.overlay(cv_lr, "lr", args.lr);
            merge.overlay(cv_batch, "batch", args.batch);
            merge.overlay(cv_seed, "seed", args.seed);
            merge.overlay(cv_tlx, "with_tlx", args.with_tlx);
            return cmd_crossval(args, merge);
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
