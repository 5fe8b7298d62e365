#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stressfuse/dataset.hpp"

namespace stressfuse::synth {

/// Generator for seeded multimodal datasets with a known latent stress
/// process, so pipeline and model behavior can be tested end to end.
///
/// The latent state z follows episode-wise mean reversion between a relaxed
/// and a stressed level. A shared confounder series u leaks into the three
/// encoder modalities with modality-specific gain, which caps what any
/// single modality can resolve at moderate noise while the combined feature
/// set still separates z cleanly.
struct SynthConfig {
    std::size_t rows = 3000;
    std::size_t posture_dim = 10;
    std::size_t facial_dim = 10;
    std::size_t keystroke_dim = 7;
    double noise_sigma = 0.5;
    double missing_posture = 0.0;
    double missing_facial = 0.0;
    double missing_keystroke = 0.0;
    double missing_physiology = 0.0;
    double signal_strength = 1.0;
    std::uint64_t seed = 42;

    void validate() const;
};

/// 3000 rows with per-modality attrition tuned so roughly 956 rows survive
/// alignment.
SynthConfig paper_shape_preset();

struct Episode {
    std::size_t start = 0; // first row index
    std::size_t end = 0;   // one past the last row index
    double level = 0.0;    // episode target for z
    bool stressed() const { return level > 0.0; }
};

struct SynthResult {
    std::vector<data::ModalityFrame> frames; // posture, facial, keystroke, physiology
    std::vector<double> latent_z;
    std::vector<double> latent_u;
    std::vector<int> labels;      // 1 iff z > 0
    std::vector<double> tlx;      // 100 * sigmoid(z)
    std::vector<Episode> episodes;
};

SynthResult generate(const SynthConfig& cfg);

/// Writes the modality csv files, the schema manifest, the ground-truth
/// latent series and the episode list. Same config => byte-identical files.
void write_dataset(const SynthResult& result, const std::filesystem::path& dir);

SynthConfig config_from_json_text(const std::string& json_text);

} // namespace stressfuse::synth
