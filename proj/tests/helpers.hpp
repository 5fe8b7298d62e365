#pragma once

// Shared test utilities: independent oracles and scratch-directory plumbing.
// Oracles here deliberately avoid the library's own code paths so that a
// bug cannot hide by appearing on both sides of a comparison.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "stressfuse/dataset.hpp"
#include "stressfuse/nn.hpp"
#include "stressfuse/rng.hpp"

namespace testutil {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("stressfuse_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Central finite differences on the training objective, parameter by
// parameter. Independent of backward(): only forward passes are used.
inline stressfuse::nn::Gradients finite_difference_gradients(stressfuse::nn::DenseNet net,
                                                             const stressfuse::Vector& input,
                                                             const stressfuse::Vector& target,
                                                             stressfuse::nn::LossKind kind,
                                                             double step) {
    using namespace stressfuse;
    nn::Gradients grads;
    auto objective_at = [&]() {
        Vector out = nn::forward(net, input, nn::Mode::infer, nullptr);
        return nn::objective(kind, out, target);
    };
    for (auto& layer : net.layers) {
        Matrix gw(layer.weights.rows, layer.weights.cols);
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            double saved = layer.weights.data[i];
            layer.weights.data[i] = saved + step;
            double up = objective_at();
            layer.weights.data[i] = saved - step;
            double down = objective_at();
            layer.weights.data[i] = saved;
            gw.data[i] = (up - down) / (2.0 * step);
        }
        Vector gb(layer.biases.size());
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            double saved = layer.biases[i];
            layer.biases[i] = saved + step;
            double up = objective_at();
            layer.biases[i] = saved - step;
            double down = objective_at();
            layer.biases[i] = saved;
            gb[i] = (up - down) / (2.0 * step);
        }
        grads.weights.push_back(std::move(gw));
        grads.biases.push_back(std::move(gb));
    }
    return grads;
}

// Normalized gradient error: |a-b| / max(1, |a|, |b|). The guard at 1 keeps
// near-zero gradients from inflating the ratio past what finite-difference
// roundoff can resolve.
inline double gradient_rel_error(const stressfuse::nn::Gradients& a,
                                 const stressfuse::nn::Gradients& b) {
    double worst = 0.0;
    auto update = [&](double x, double y) {
        double denom = std::max({1.0, std::fabs(x), std::fabs(y)});
        worst = std::max(worst, std::fabs(x - y) / denom);
    };
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        for (std::size_t i = 0; i < a.weights[l].data.size(); ++i)
            update(a.weights[l].data[i], b.weights[l].data[i]);
        for (std::size_t i = 0; i < a.biases[l].size(); ++i)
            update(a.biases[l][i], b.biases[l][i]);
    }
    return worst;
}

struct CountedConfusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// One pair at a time, if/else per case: no arithmetic shared with the
// library's implementation.
inline CountedConfusion enumerate_confusion(const std::vector<int>& preds,
                                            const std::vector<int>& labels) {
    CountedConfusion c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] == 1) {
            if (preds[i] == 1)
                ++c.tp;
            else
                ++c.fn;
        } else {
            if (preds[i] == 1)
                ++c.fp;
            else
                ++c.tn;
        }
    }
    return c;
}

// AUC as the Mann-Whitney statistic: over all (positive, negative) pairs,
// count score_pos > score_neg as 1 and ties as 1/2.
inline double mann_whitney_auc(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Alert spans by direct run-length scanning, as (first, last) entry indices.
inline std::vector<std::pair<std::size_t, std::size_t>>
run_length_alerts(const std::vector<int>& labels, std::size_t min_run) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t run = 0;
    for (std::size_t i = 0; i <= labels.size(); ++i) {
        bool stressed = i < labels.size() && labels[i] == 1;
        if (stressed) {
            ++run;
            continue;
        }
        if (run >= min_run && run > 0) spans.emplace_back(i - run, i - 1);
        run = 0;
    }
    return spans;
}

// Least-squares fit target ~ affine(features) via normal equations with
// Gaussian elimination. Used to probe linear separability of generated
// data without involving any trained network.
inline std::vector<double> least_squares_affine(const std::vector<stressfuse::Vector>& rows,
                                                const std::vector<double>& targets) {
    std::size_t d = rows.front().size() + 1; // + intercept
    std::vector<std::vector<double>> ata(d, std::vector<double>(d, 0.0));
    std::vector<double> atb(d, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<double> x(d, 1.0);
        for (std::size_t j = 0; j + 1 < d; ++j) x[j] = rows[r][j];
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) ata[i][j] += x[i] * x[j];
            atb[i] += x[i] * targets[r];
        }
    }
    for (std::size_t i = 0; i < d; ++i) ata[i][i] += 1e-9; // ridge for safety
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::fabs(ata[r][col]) > std::fabs(ata[pivot][col])) pivot = r;
        std::swap(ata[col], ata[pivot]);
        std::swap(atb[col], atb[pivot]);
        for (std::size_t r = 0; r < d; ++r) {
            if (r == col || ata[r][col] == 0.0) continue;
            double f = ata[r][col] / ata[col][col];
            for (std::size_t c = col; c < d; ++c) ata[r][c] -= f * ata[col][c];
            atb[r] -= f * atb[col];
        }
    }
    std::vector<double> beta(d);
    for (std::size_t i = 0; i < d; ++i) beta[i] = atb[i] / ata[i][i];
    return beta;
}

inline double affine_apply(const std::vector<double>& beta, const stressfuse::Vector& x) {
    double y = beta.back();
    for (std::size_t j = 0; j + 1 < beta.size(); ++j) y += beta[j] * x[j];
    return y;
}

// In-memory dataset builder for tests that do not need files.
struct DatasetSpec {
    std::size_t rows = 0;
    std::size_t posture_dim = 4;
    std::size_t facial_dim = 4;
    std::size_t keystroke_dim = 3;
};

inline stressfuse::data::AlignedDataset build_dataset(
    const DatasetSpec& spec, const std::vector<int>& labels,
    const std::vector<double>& tlx, std::uint64_t seed) {
    using namespace stressfuse;
    data::AlignedDataset ds;
    Rng rng(seed);
    std::size_t dims[4] = {spec.posture_dim, spec.facial_dim, spec.keystroke_dim,
                           data::kPhysiologyWidth};
    for (std::size_t r = 0; r < spec.rows; ++r) ds.keys.push_back(std::to_string(r));
    for (std::size_t b = 0; b < 4; ++b) {
        Matrix block(spec.rows, dims[b]);
        for (double& v : block.data) v = rng.uniform(-1.0, 1.0);
        if (!labels.empty()) {
            // Give every block a usable signal: shift column 0 by the label.
            for (std::size_t r = 0; r < spec.rows; ++r)
                block.at(r, 0) += labels[r] == 1 ? 2.0 : -2.0;
        }
        ds.blocks.push_back(std::move(block));
        ds.modalities.push_back(data::kAllModalities[b]);
        std::vector<std::string> names;
        for (std::size_t j = 0; j < dims[b]; ++j)
            names.push_back("c" + std::to_string(b) + "_" + std::to_string(j));
        ds.feature_names.push_back(std::move(names));
    }
    ds.labels = labels;
    ds.tlx = tlx;
    return ds;
}

} // namespace testutil
