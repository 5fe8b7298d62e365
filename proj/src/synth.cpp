#include "stressfuse/synth.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "stressfuse/errors.hpp"
#include "stressfuse/rng.hpp"
#include "stressfuse/textio.hpp"

namespace stressfuse::synth {

namespace {

// Latent process shape. The confounder amplitude and per-modality gains are
// sized so that one modality reads z through heavy interference while the
// modality mix cancels it (posture and facial carry it with opposite sign).
constexpr double kReversion = 0.2;
constexpr double kWalkNoise = 0.05;
constexpr std::size_t kEpisodeMin = 60;
constexpr std::size_t kEpisodeSpread = 120;
constexpr double kConfounderRho = 0.9;
constexpr double kConfounderScale = 1.35;
constexpr double kConfounderGain[3] = {0.8, -0.8, 0.5}; // posture, facial, keystroke
constexpr double kResidualLeak = 0.15;
constexpr double kPhysioNoiseScale = 3.5;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Loadings {
    Vector wz;
    Vector wu;
    Vector bias;
};

Loadings draw_loadings(Rng& rng, std::size_t dim, double gain, bool confounded) {
    Loadings l;
    l.wz.resize(dim);
    l.wu.assign(dim, 0.0);
    l.bias.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        if (confounded) {
            l.wz[j] = sign * rng.uniform(0.6, 1.4);
            l.wu[j] = gain * l.wz[j] + kResidualLeak * rng.uniform(-1.0, 1.0);
        } else {
            l.wz[j] = sign * rng.uniform(0.3, 0.7);
        }
        l.bias[j] = rng.uniform(-1.0, 1.0);
    }
    return l;
}

std::vector<std::string> feature_names(data::Modality m, std::size_t dim) {
    if (m == data::Modality::physiology) return {"hr", "hrv", "scl"};
    const char* prefix = m == data::Modality::posture  ? "pos"
                         : m == data::Modality::facial ? "face"
                                                       : "ks";
    std::vector<std::string> names;
    names.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) names.push_back(prefix + std::to_string(j));
    return names;
}

} // namespace

void SynthConfig::validate() const {
    if (rows == 0) fail(ErrorKind::invalid_argument, "rows must be positive");
    if (posture_dim == 0 || facial_dim == 0 || keystroke_dim == 0)
        fail(ErrorKind::invalid_argument, "modality dims must all be positive");
    if (noise_sigma < 0.0) fail(ErrorKind::invalid_argument, "noise sigma must be >= 0");
    for (double m : {missing_posture, missing_facial, missing_keystroke, missing_physiology})
        if (!(m >= 0.0 && m < 1.0))
            fail(ErrorKind::invalid_argument,
                 "missing fraction " + format_double(m) + " outside [0,1)");
    if (!(signal_strength > 0.0))
        fail(ErrorKind::invalid_argument, "signal strength must be positive");
}

SynthConfig paper_shape_preset() {
    SynthConfig cfg;
    cfg.rows = 3000;
    // (1 - m)^4 = 956/3000 => each modality keeps ~75.13% of rows.
    cfg.missing_posture = 0.2487;
    cfg.missing_facial = 0.2487;
    cfg.missing_keystroke = 0.2487;
    cfg.missing_physiology = 0.2487;
    cfg.noise_sigma = 0.5;
    cfg.signal_strength = 1.0;
    cfg.seed = 42;
    return cfg;
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    const double A = cfg.signal_strength;
    SynthResult out;

    Rng walk_rng(derive_seed(cfg.seed, 0));
    std::size_t start = 0;
    std::size_t index = 0;
    while (start < cfg.rows) {
        std::size_t length = kEpisodeMin + walk_rng.uniform_index(kEpisodeSpread);
        Episode ep;
        ep.start = start;
        ep.end = std::min(start + length, cfg.rows);
        ep.level = (index % 2 == 0) ? -A : A;
        out.episodes.push_back(ep);
        start = ep.end;
        ++index;
    }

    out.latent_z.resize(cfg.rows);
    double z = out.episodes.front().level;
    for (const Episode& ep : out.episodes) {
        for (std::size_t t = ep.start; t < ep.end; ++t) {
            z += kReversion * (ep.level - z) + kWalkNoise * A * walk_rng.normal();
            out.latent_z[t] = z;
        }
    }

    Rng conf_rng(derive_seed(cfg.seed, 1));
    out.latent_u.resize(cfg.rows);
    double u = kConfounderScale * A * conf_rng.normal();
    double innovation = std::sqrt(1.0 - kConfounderRho * kConfounderRho);
    for (std::size_t t = 0; t < cfg.rows; ++t) {
        out.latent_u[t] = u;
        u = kConfounderRho * u + innovation * kConfounderScale * A * conf_rng.normal();
    }

    out.labels.resize(cfg.rows);
    out.tlx.resize(cfg.rows);
    for (std::size_t t = 0; t < cfg.rows; ++t) {
        out.labels[t] = out.latent_z[t] > 0.0 ? 1 : 0;
        out.tlx[t] = 100.0 * sigmoid(out.latent_z[t]);
    }

    struct Plan {
        data::Modality modality;
        std::size_t dim;
        double missing;
        double gain;
        bool confounded;
        double noise;
    };
    const Plan plans[4] = {
        {data::Modality::posture, cfg.posture_dim, cfg.missing_posture, kConfounderGain[0],
         true, cfg.noise_sigma},
        {data::Modality::facial, cfg.facial_dim, cfg.missing_facial, kConfounderGain[1], true,
         cfg.noise_sigma},
        {data::Modality::keystroke, cfg.keystroke_dim, cfg.missing_keystroke,
         kConfounderGain[2], true, cfg.noise_sigma},
        {data::Modality::physiology, data::kPhysiologyWidth, cfg.missing_physiology, 0.0,
         false, kPhysioNoiseScale * cfg.noise_sigma},
    };

    Rng structure_rng(derive_seed(cfg.seed, 2));
    std::uint64_t stream = 3;
    for (const Plan& plan : plans) {
        Loadings loadings = draw_loadings(structure_rng, plan.dim, plan.gain, plan.confounded);
        Rng noise_rng(derive_seed(cfg.seed, stream));
        Rng drop_rng(derive_seed(cfg.seed, stream + 4));
        ++stream;

        data::ModalityFrame frame;
        frame.schema.modality = plan.modality;
        frame.schema.key_column = "t";
        frame.schema.feature_columns = feature_names(plan.modality, plan.dim);
        bool carries_targets = plan.modality == data::Modality::physiology;
        if (carries_targets) {
            frame.schema.label_column = "stressed";
            frame.schema.tlx_column = "tlx";
        }
        frame.report.rows_read = cfg.rows;

        for (std::size_t t = 0; t < cfg.rows; ++t) {
            Vector row(plan.dim);
            for (std::size_t j = 0; j < plan.dim; ++j)
                row[j] = loadings.wz[j] * out.latent_z[t] +
                         loadings.wu[j] * out.latent_u[t] + loadings.bias[j] +
                         plan.noise * noise_rng.normal();
            // Attrition draw happens after the noise draws so the kept rows
            // carry the same values regardless of the missing fraction.
            if (drop_rng.bernoulli(plan.missing)) {
                ++frame.report.dropped;
                continue;
            }
            frame.keys.push_back(std::to_string(t));
            frame.features.push_back(std::move(row));
            if (carries_targets) {
                frame.labels.push_back(static_cast<double>(out.labels[t]));
                frame.tlx.push_back(out.tlx[t]);
            }
        }
        if (frame.keys.empty())
            fail(ErrorKind::empty_result,
                 std::string(data::modality_name(plan.modality)) +
                     ": attrition removed every row");
        out.frames.push_back(std::move(frame));
    }
    return out;
}

void write_dataset(const SynthResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    nlohmann::ordered_json manifest;
    manifest["modalities"] = nlohmann::ordered_json::array();
    for (const data::ModalityFrame& frame : result.frames) {
        std::string name = data::modality_name(frame.schema.modality);
        std::string text;
        text += frame.schema.key_column;
        for (const std::string& c : frame.schema.feature_columns) text += "," + c;
        if (frame.schema.label_column) text += "," + *frame.schema.label_column;
        if (frame.schema.tlx_column) text += "," + *frame.schema.tlx_column;
        text += '\n';
        for (std::size_t i = 0; i < frame.size(); ++i) {
            text += frame.keys[i];
            for (double v : frame.features[i]) text += "," + format_double(v);
            if (frame.schema.label_column)
                text += "," + format_double(frame.labels[i]);
            if (frame.schema.tlx_column) text += "," + format_double(frame.tlx[i]);
            text += '\n';
        }
        write_text_file(dir / (name + ".csv"), text);

        nlohmann::ordered_json entry;
        entry["modality"] = name;
        entry["path"] = name + ".csv";
        entry["key_column"] = frame.schema.key_column;
        entry["feature_columns"] = frame.schema.feature_columns;
        if (frame.schema.label_column) entry["label_column"] = *frame.schema.label_column;
        if (frame.schema.tlx_column) entry["tlx_column"] = *frame.schema.tlx_column;
        manifest["modalities"].push_back(entry);
    }
    manifest["labels_from"] = "physiology";
    manifest["tlx_from"] = "physiology";
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::string truth = "t,z,u,stressed,tlx\n";
    for (std::size_t t = 0; t < result.latent_z.size(); ++t) {
        truth += std::to_string(t);
        truth += "," + format_double(result.latent_z[t]);
        truth += "," + format_double(result.latent_u[t]);
        truth += "," + std::to_string(result.labels[t]);
        truth += "," + format_double(result.tlx[t]);
        truth += '\n';
    }
    write_text_file(dir / "ground_truth.csv", truth);

    std::string episodes = "start,end,level\n";
    for (const Episode& ep : result.episodes) {
        episodes += std::to_string(ep.start);
        episodes += "," + std::to_string(ep.end);
        episodes += "," + format_double(ep.level);
        episodes += '\n';
    }
    write_text_file(dir / "episodes.csv", episodes);
}

namespace {

// get<std::size_t> on a negative json integer wraps silently.
std::size_t count_field(const nlohmann::json& v, const std::string& what) {
    if (!v.is_number_unsigned())
        fail(ErrorKind::parse, what + " must be a non-negative integer");
    return v.get<std::size_t>();
}

} // namespace

SynthConfig config_from_json_text(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded())
        fail(ErrorKind::parse, "generator config: malformed json");
    if (!doc.is_object())
        fail(ErrorKind::parse, "generator config: expected an object");

    SynthConfig cfg;
    try {
        if (doc.contains("preset")) {
            std::string preset = doc["preset"].get<std::string>();
            if (preset != "paper-shape")
                fail(ErrorKind::invalid_argument,
                     "unknown generator preset \"" + preset + "\"");
            cfg = paper_shape_preset();
        }
        if (doc.contains("rows")) cfg.rows = count_field(doc["rows"], "rows");
        if (doc.contains("posture_dim"))
            cfg.posture_dim = count_field(doc["posture_dim"], "posture_dim");
        if (doc.contains("facial_dim"))
            cfg.facial_dim = count_field(doc["facial_dim"], "facial_dim");
        if (doc.contains("keystroke_dim"))
            cfg.keystroke_dim = count_field(doc["keystroke_dim"], "keystroke_dim");
        if (doc.contains("noise_sigma")) cfg.noise_sigma = doc["noise_sigma"].get<double>();
        if (doc.contains("missing_posture"))
            cfg.missing_posture = doc["missing_posture"].get<double>();
        if (doc.contains("missing_facial"))
            cfg.missing_facial = doc["missing_facial"].get<double>();
        if (doc.contains("missing_keystroke"))
            cfg.missing_keystroke = doc["missing_keystroke"].get<double>();
        if (doc.contains("missing_physiology"))
            cfg.missing_physiology = doc["missing_physiology"].get<double>();
        if (doc.contains("signal_strength"))
            cfg.signal_strength = doc["signal_strength"].get<double>();
        if (doc.contains("seed")) {
            if (!doc["seed"].is_number_unsigned())
                fail(ErrorKind::parse, "seed must be a non-negative integer");
            cfg.seed = doc["seed"].get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("generator config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

} // namespace stressfuse::synth
