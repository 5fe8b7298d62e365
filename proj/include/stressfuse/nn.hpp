#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stressfuse/matrix.hpp"
#include "stressfuse/rng.hpp"

namespace stressfuse::nn {

enum class Activation { relu, sigmoid, identity };

const char* activation_name(Activation a);
Activation activation_from_name(std::string_view name);

enum class LossKind {
    bce,          // binary cross-entropy; targets in {0,1}
    mse_for_rmse, // trained on mean squared error, reported as its square root
};

enum class Mode { train, infer };

struct DenseLayer {
    Matrix weights;          // out x in
    Vector biases;           // out
    Activation activation = Activation::identity;
    double dropout_rate = 0.0; // in [0,1); applied after activation, train mode only

    std::size_t out_dim() const { return weights.rows; }
    std::size_t in_dim() const { return weights.cols; }
};

/// Fully connected stack. Consecutive layer dims must chain and the final
/// layer must not carry dropout.
struct DenseNet {
    std::size_t input_dim = 0;
    std::vector<DenseLayer> layers;

    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
    void validate() const;

    bool operator==(const DenseNet& other) const;
};

/// Per-layer record of a forward pass, enough to run backward.
struct ForwardTrace {
    Vector input;
    std::vector<Vector> pre;   // z = W a + b
    std::vector<Vector> post;  // activation output, after the dropout mask
    std::vector<Vector> mask;  // per-unit scale: 1/(1-rate) kept, 0 dropped; empty when unused
};

struct Gradients {
    std::vector<Matrix> weights; // shapes mirror net parameters
    std::vector<Vector> biases;
};

struct TrainConfig {
    std::size_t epochs = 200;
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct TrainHistory {
    std::vector<double> epoch_loss; // one reported-loss value per epoch
};

Vector activate(Activation kind, const Vector& x);

/// Reported loss value: mean BCE, or RMSE for mse_for_rmse.
double loss(LossKind kind, const Vector& predictions, const Vector& targets);

/// Quantity the optimizer actually minimizes (MSE for mse_for_rmse; equal to
/// loss() for bce). Gradients from backward() correspond to this function.
double objective(LossKind kind, const Vector& predictions, const Vector& targets);

/// In train mode inverted dropout is applied (surviving units scaled by
/// 1/(1-rate)); rng must be non-null when any layer has dropout. In infer
/// mode dropout is a no-op and rng may be null.
Vector forward(const DenseNet& net, const Vector& input, Mode mode, Rng* rng,
               ForwardTrace* trace = nullptr);

/// Forward through the first `layer_count` layers only, inference mode.
Vector forward_partial(const DenseNet& net, const Vector& input, std::size_t layer_count);

Gradients backward(const DenseNet& net, const ForwardTrace& trace,
                   const Vector& target, LossKind kind);

/// Mini-batch SGD. Targets are one row per input row. Same (seed, data,
/// config) always produces bit-identical weights. Throws a divergence error
/// naming the epoch if the loss turns non-finite.
TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets,
                   const TrainConfig& cfg, LossKind kind);

/// Layer dims chained from input_dim; weights uniform in
/// +-sqrt(6/(fan_in+fan_out)), biases zero.
struct LayerSpec {
    std::size_t width = 0;
    Activation activation = Activation::relu;
    double dropout_rate = 0.0;
};

DenseNet make_net(std::size_t input_dim, const std::vector<LayerSpec>& layers,
                  std::uint64_t seed);

/// Versioned text format; parameters are written with 17 significant digits
/// so that load reproduces every double exactly.
void save_weights(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_weights(const std::filesystem::path& path);

std::string weights_to_string(const DenseNet& net);
DenseNet weights_from_string(const std::string& text);

} // namespace stressfuse::nn
