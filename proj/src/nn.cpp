#include "stressfuse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stressfuse/errors.hpp"
#include "stressfuse/textio.hpp"

namespace stressfuse::nn {

namespace {

constexpr double kBceClamp = 1e-7;

double apply_one(Activation kind, double x) {
    switch (kind) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity: return x;
    }
    return x;
}

double activation_derivative(Activation kind, double pre) {
    switch (kind) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
        double s = 1.0 / (1.0 + std::exp(-pre));
        return s * (1.0 - s);
    }
    case Activation::identity: return 1.0;
    }
    return 1.0;
}

void check_pair(const Vector& predictions, const Vector& targets) {
    if (predictions.empty())
        fail(ErrorKind::invalid_argument, "loss over empty vectors");
    if (predictions.size() != targets.size())
        fail(ErrorKind::dimension_mismatch,
             "loss: " + std::to_string(predictions.size()) + " predictions vs " +
                 std::to_string(targets.size()) + " targets");
}

double bce_mean(const Vector& predictions, const Vector& targets) {
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double y = targets[i];
        if (y != 0.0 && y != 1.0)
            fail(ErrorKind::invalid_argument,
                 "binary cross-entropy target must be 0 or 1, got " + format_double(y));
        double p = std::clamp(predictions[i], kBceClamp, 1.0 - kBceClamp);
        sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(predictions.size());
}

double mse_mean(const Vector& predictions, const Vector& targets) {
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

} // namespace

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    fail(ErrorKind::parse, "unknown activation \"" + std::string(name) + "\"");
}

void DenseNet::validate() const {
    if (input_dim == 0)
        fail(ErrorKind::invalid_argument, "network input dimension must be positive");
    if (layers.empty())
        fail(ErrorKind::invalid_argument, "network needs at least one layer");
    std::size_t expect = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        if (layer.weights.rows == 0)
            fail(ErrorKind::invalid_argument,
                 "layer " + std::to_string(l) + " has no units");
        if (layer.weights.cols != expect)
            fail(ErrorKind::dimension_mismatch,
                 "layer " + std::to_string(l) + " expects " +
                     std::to_string(layer.weights.cols) + " inputs but receives " +
                     std::to_string(expect));
        if (layer.biases.size() != layer.weights.rows)
            fail(ErrorKind::dimension_mismatch,
                 "layer " + std::to_string(l) + " bias length " +
                     std::to_string(layer.biases.size()) + " != " +
                     std::to_string(layer.weights.rows) + " units");
        if (!(layer.dropout_rate >= 0.0 && layer.dropout_rate < 1.0))
            fail(ErrorKind::invalid_argument,
                 "layer " + std::to_string(l) + " dropout rate " +
                     format_double(layer.dropout_rate) + " outside [0,1)");
        expect = layer.weights.rows;
    }
    if (layers.back().dropout_rate != 0.0)
        fail(ErrorKind::invalid_argument, "output layer must not carry dropout");
}

bool DenseNet::operator==(const DenseNet& other) const {
    if (input_dim != other.input_dim || layers.size() != other.layers.size())
        return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& a = layers[l];
        const DenseLayer& b = other.layers[l];
        if (a.weights != b.weights || a.biases != b.biases ||
            a.activation != b.activation || a.dropout_rate != b.dropout_rate)
            return false;
    }
    return true;
}

Vector activate(Activation kind, const Vector& x) {
    if (!all_finite(x))
        fail(ErrorKind::numeric_input, "activation input contains a non-finite value");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply_one(kind, x[i]);
    return out;
}

double loss(LossKind kind, const Vector& predictions, const Vector& targets) {
    check_pair(predictions, targets);
    if (kind == LossKind::bce) return bce_mean(predictions, targets);
    return std::sqrt(mse_mean(predictions, targets));
}

double objective(LossKind kind, const Vector& predictions, const Vector& targets) {
    check_pair(predictions, targets);
    if (kind == LossKind::bce) return bce_mean(predictions, targets);
    return mse_mean(predictions, targets);
}

Vector forward(const DenseNet& net, const Vector& input, Mode mode, Rng* rng,
               ForwardTrace* trace) {
    if (input.size() != net.input_dim)
        fail(ErrorKind::dimension_mismatch,
             "input length " + std::to_string(input.size()) + " != network input dim " +
                 std::to_string(net.input_dim));
    if (trace) {
        trace->input = input;
        trace->pre.assign(net.layers.size(), {});
        trace->post.assign(net.layers.size(), {});
        trace->mask.assign(net.layers.size(), {});
    }

    Vector a = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        Vector z(layer.out_dim());
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            double acc = layer.biases[i];
            auto w = layer.weights.row(i);
            for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * a[j];
            z[i] = acc;
        }
        Vector h(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) h[i] = apply_one(layer.activation, z[i]);

        if (mode == Mode::train && layer.dropout_rate > 0.0) {
            if (!rng)
                fail(ErrorKind::invalid_argument,
                     "training forward pass through a dropout layer needs a generator");
            // One draw per unit in index order; tests replay this sequence.
            double keep_scale = 1.0 / (1.0 - layer.dropout_rate);
            Vector mask(h.size());
            for (std::size_t i = 0; i < h.size(); ++i) {
                mask[i] = rng->bernoulli(layer.dropout_rate) ? 0.0 : keep_scale;
                h[i] *= mask[i];
            }
            if (trace) trace->mask[l] = std::move(mask);
        }

        if (trace) {
            trace->pre[l] = std::move(z);
            trace->post[l] = h;
        }
        a = std::move(h);
    }
    return a;
}

Vector forward_partial(const DenseNet& net, const Vector& input, std::size_t layer_count) {
    if (layer_count > net.layers.size())
        fail(ErrorKind::invalid_argument,
             "layer count " + std::to_string(layer_count) + " exceeds depth " +
                 std::to_string(net.layers.size()));
    if (input.size() != net.input_dim)
        fail(ErrorKind::dimension_mismatch,
             "input length " + std::to_string(input.size()) + " != network input dim " +
                 std::to_string(net.input_dim));
    Vector a = input;
    for (std::size_t l = 0; l < layer_count; ++l) {
        const DenseLayer& layer = net.layers[l];
        Vector z(layer.out_dim());
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            double acc = layer.biases[i];
            auto w = layer.weights.row(i);
            for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * a[j];
            z[i] = apply_one(layer.activation, acc);
        }
        a = std::move(z);
    }
    return a;
}

Gradients backward(const DenseNet& net, const ForwardTrace& trace,
                   const Vector& target, LossKind kind) {
    const std::size_t depth = net.layers.size();
    if (trace.pre.size() != depth || trace.post.size() != depth ||
        trace.input.size() != net.input_dim)
        fail(ErrorKind::dimension_mismatch, "trace does not match the network shape");
    for (std::size_t l = 0; l < depth; ++l)
        if (trace.pre[l].size() != net.layers[l].out_dim())
            fail(ErrorKind::dimension_mismatch,
                 "trace layer " + std::to_string(l) + " does not match the network shape");
    const Vector& output = trace.post.back();
    if (target.size() != output.size())
        fail(ErrorKind::dimension_mismatch,
             "target length " + std::to_string(target.size()) + " != output length " +
                 std::to_string(output.size()));

    const std::size_t n = output.size();
    const DenseLayer& last = net.layers.back();
    Vector delta(n);
    if (kind == LossKind::bce && last.activation == Activation::sigmoid) {
        // d(mean bce)/dz collapses to (a - y)/n through the sigmoid.
        for (std::size_t i = 0; i < n; ++i)
            delta[i] = (output[i] - target[i]) / static_cast<double>(n);
    } else if (kind == LossKind::mse_for_rmse && last.activation == Activation::identity) {
        for (std::size_t i = 0; i < n; ++i)
            delta[i] = 2.0 * (output[i] - target[i]) / static_cast<double>(n);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double dl_da;
            if (kind == LossKind::bce) {
                double p = std::clamp(output[i], kBceClamp, 1.0 - kBceClamp);
                dl_da = (p - target[i]) / (p * (1.0 - p) * static_cast<double>(n));
            } else {
                dl_da = 2.0 * (output[i] - target[i]) / static_cast<double>(n);
            }
            delta[i] = dl_da * activation_derivative(last.activation, trace.pre.back()[i]);
        }
    }

    Gradients grads;
    grads.weights.resize(depth);
    grads.biases.resize(depth);
    for (std::size_t li = depth; li-- > 0;) {
        const DenseLayer& layer = net.layers[li];
        const Vector& below = li == 0 ? trace.input : trace.post[li - 1];
        Matrix dw(layer.out_dim(), layer.in_dim());
        for (std::size_t i = 0; i < layer.out_dim(); ++i)
            for (std::size_t j = 0; j < layer.in_dim(); ++j)
                dw.at(i, j) = delta[i] * below[j];
        grads.weights[li] = std::move(dw);
        grads.biases[li] = delta;

        if (li == 0) break;
        const DenseLayer& prev = net.layers[li - 1];
        Vector next(prev.out_dim(), 0.0);
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            auto w = layer.weights.row(i);
            for (std::size_t j = 0; j < w.size(); ++j) next[j] += w[j] * delta[i];
        }
        const Vector& mask = trace.mask[li - 1];
        for (std::size_t j = 0; j < next.size(); ++j) {
            double scale = mask.empty() ? 1.0 : mask[j];
            next[j] *= scale * activation_derivative(prev.activation, trace.pre[li - 1][j]);
        }
        delta = std::move(next);
    }
    return grads;
}

TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets,
                   const TrainConfig& cfg, LossKind kind) {
    net.validate();
    if (cfg.epochs == 0) fail(ErrorKind::invalid_argument, "epochs must be >= 1");
    if (cfg.batch_size == 0) fail(ErrorKind::invalid_argument, "batch size must be >= 1");
    if (cfg.learning_rate < 0.0)
        fail(ErrorKind::invalid_argument, "learning rate must not be negative");
    if (inputs.rows != targets.rows)
        fail(ErrorKind::dimension_mismatch,
             std::to_string(inputs.rows) + " input rows vs " +
                 std::to_string(targets.rows) + " target rows");
    if (inputs.rows == 0) fail(ErrorKind::invalid_argument, "no training rows");
    if (inputs.cols != net.input_dim)
        fail(ErrorKind::dimension_mismatch,
             "input width " + std::to_string(inputs.cols) + " != network input dim " +
                 std::to_string(net.input_dim));
    if (targets.cols != net.output_dim())
        fail(ErrorKind::dimension_mismatch,
             "target width " + std::to_string(targets.cols) + " != network output dim " +
                 std::to_string(net.output_dim()));
    if (!inputs.all_finite() || !targets.all_finite())
        fail(ErrorKind::numeric_input, "training data contains a non-finite value");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(inputs.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Gradients sum;
    sum.weights.reserve(net.layers.size());
    sum.biases.reserve(net.layers.size());
    for (const DenseLayer& layer : net.layers) {
        sum.weights.emplace_back(layer.out_dim(), layer.in_dim());
        sum.biases.emplace_back(layer.out_dim(), 0.0);
    }

    TrainHistory history;
    history.epoch_loss.reserve(cfg.epochs);
    ForwardTrace trace;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t stop = std::min(start + cfg.batch_size, order.size());
            for (auto& m : sum.weights) std::fill(m.data.begin(), m.data.end(), 0.0);
            for (auto& v : sum.biases) std::fill(v.begin(), v.end(), 0.0);

            for (std::size_t k = start; k < stop; ++k) {
                std::size_t r = order[k];
                forward(net, inputs.row_vector(r), Mode::train, &rng, &trace);
                Gradients g = backward(net, trace, targets.row_vector(r), kind);
                for (std::size_t l = 0; l < net.layers.size(); ++l) {
                    for (std::size_t i = 0; i < sum.weights[l].data.size(); ++i)
                        sum.weights[l].data[i] += g.weights[l].data[i];
                    for (std::size_t i = 0; i < sum.biases[l].size(); ++i)
                        sum.biases[l][i] += g.biases[l][i];
                }
            }

            double inv = cfg.learning_rate / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                DenseLayer& layer = net.layers[l];
                for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
                    layer.weights.data[i] -= inv * sum.weights[l].data[i];
                for (std::size_t i = 0; i < layer.biases.size(); ++i)
                    layer.biases[i] -= inv * sum.biases[l][i];
            }
        }

        // Reported per-epoch loss is a clean inference pass over the whole
        // training set, so it is independent of the epoch's dropout draws.
        Vector flat_pred;
        Vector flat_targ;
        flat_pred.reserve(inputs.rows * net.output_dim());
        flat_targ.reserve(inputs.rows * net.output_dim());
        for (std::size_t r = 0; r < inputs.rows; ++r) {
            Vector out = forward(net, inputs.row_vector(r), Mode::infer, nullptr);
            flat_pred.insert(flat_pred.end(), out.begin(), out.end());
            auto t = targets.row(r);
            flat_targ.insert(flat_targ.end(), t.begin(), t.end());
        }
        double epoch_loss = loss(kind, flat_pred, flat_targ);
        if (!std::isfinite(epoch_loss))
            fail(ErrorKind::divergence,
                 "loss became non-finite at epoch " + std::to_string(epoch + 1));
        history.epoch_loss.push_back(epoch_loss);
    }
    return history;
}

DenseNet make_net(std::size_t input_dim, const std::vector<LayerSpec>& layers,
                  std::uint64_t seed) {
    if (layers.empty())
        fail(ErrorKind::invalid_argument, "network needs at least one layer");
    Rng rng(seed);
    DenseNet net;
    net.input_dim = input_dim;
    std::size_t fan_in = input_dim;
    for (const LayerSpec& spec : layers) {
        DenseLayer layer;
        layer.activation = spec.activation;
        layer.dropout_rate = spec.dropout_rate;
        layer.weights = Matrix(spec.width, fan_in);
        layer.biases = Vector(spec.width, 0.0);
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.width));
        for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
        net.layers.push_back(std::move(layer));
        fan_in = spec.width;
    }
    net.validate();
    return net;
}

namespace {

constexpr const char* kWeightsMagic = "stressfuse-weights";
constexpr int kWeightsVersion = 1;

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    // Empty line or EOF both end the document; the caller checks for "end".
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    }

private:
    std::istringstream in_;
};

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> parts;
    std::istringstream s(line);
    std::string tok;
    while (s >> tok) parts.push_back(tok);
    return parts;
}

std::size_t parse_count(const std::string& tok, const char* what) {
    std::size_t value = 0;
    for (char c : tok) {
        if (c < '0' || c > '9')
            fail(ErrorKind::corrupt_file,
                 std::string("weights file: bad ") + what + " \"" + tok + "\"");
        value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    if (tok.empty())
        fail(ErrorKind::corrupt_file, std::string("weights file: missing ") + what);
    return value;
}

Vector parse_values(const std::string& line, std::size_t expected, const char* what) {
    auto parts = split_ws(line);
    if (parts.size() != expected)
        fail(ErrorKind::dimension_mismatch,
             std::string("weights file: ") + what + " has " +
                 std::to_string(parts.size()) + " values, expected " +
                 std::to_string(expected));
    Vector out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        if (!try_parse_double(parts[i], out[i]))
            fail(ErrorKind::corrupt_file,
                 std::string("weights file: ") + what + ": bad number \"" + parts[i] + "\"");
    }
    return out;
}

} // namespace

std::string weights_to_string(const DenseNet& net) {
    net.validate();
    std::string out;
    out += kWeightsMagic;
    out += ' ';
    out += std::to_string(kWeightsVersion);
    out += '\n';
    out += "input_dim " + std::to_string(net.input_dim) + "\n";
    out += "layers " + std::to_string(net.layers.size()) + "\n";
    for (const DenseLayer& layer : net.layers) {
        out += "layer " + std::to_string(layer.out_dim()) + " " +
               std::to_string(layer.in_dim()) + " " + activation_name(layer.activation) +
               " " + format_double17(layer.dropout_rate) + "\n";
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            auto row = layer.weights.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (j) out += ' ';
                out += format_double17(row[j]);
            }
            out += '\n';
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            if (i) out += ' ';
            out += format_double17(layer.biases[i]);
        }
        out += '\n';
    }
    out += "end\n";
    return out;
}

DenseNet weights_from_string(const std::string& text) {
    LineReader reader(text);
    std::string line;

    if (!reader.next(line))
        fail(ErrorKind::corrupt_file, "weights file: empty");
    auto head = split_ws(line);
    if (head.size() != 2 || head[0] != kWeightsMagic)
        fail(ErrorKind::corrupt_file, "weights file: unrecognized header");
    if (head[1] != std::to_string(kWeightsVersion))
        fail(ErrorKind::version_mismatch,
             "weights file: format version " + head[1] + ", expected " +
                 std::to_string(kWeightsVersion));

    if (!reader.next(line))
        fail(ErrorKind::corrupt_file, "weights file: truncated before input_dim");
    auto dim_parts = split_ws(line);
    if (dim_parts.size() != 2 || dim_parts[0] != "input_dim")
        fail(ErrorKind::corrupt_file, "weights file: expected input_dim line");
    DenseNet net;
    net.input_dim = parse_count(dim_parts[1], "input_dim");

    if (!reader.next(line))
        fail(ErrorKind::corrupt_file, "weights file: truncated before layer count");
    auto count_parts = split_ws(line);
    if (count_parts.size() != 2 || count_parts[0] != "layers")
        fail(ErrorKind::corrupt_file, "weights file: expected layers line");
    std::size_t layer_count = parse_count(count_parts[1], "layer count");

    std::size_t expect_in = net.input_dim;
    for (std::size_t l = 0; l < layer_count; ++l) {
        if (!reader.next(line))
            fail(ErrorKind::corrupt_file,
                 "weights file: truncated at layer " + std::to_string(l));
        auto parts = split_ws(line);
        if (parts.size() != 5 || parts[0] != "layer")
            fail(ErrorKind::corrupt_file,
                 "weights file: malformed layer header at layer " + std::to_string(l));
        DenseLayer layer;
        std::size_t out_dim = parse_count(parts[1], "layer out dim");
        std::size_t in_dim = parse_count(parts[2], "layer in dim");
        if (in_dim != expect_in)
            fail(ErrorKind::dimension_mismatch,
                 "weights file: layer " + std::to_string(l) + " declares " +
                     std::to_string(in_dim) + " inputs but the stack provides " +
                     std::to_string(expect_in));
        if (parts[3] != "relu" && parts[3] != "sigmoid" && parts[3] != "identity")
            fail(ErrorKind::corrupt_file,
                 "weights file: unknown activation \"" + parts[3] + "\"");
        layer.activation = activation_from_name(parts[3]);
        if (!try_parse_double(parts[4], layer.dropout_rate))
            fail(ErrorKind::corrupt_file,
                 "weights file: bad dropout rate \"" + parts[4] + "\"");

        layer.weights = Matrix(out_dim, in_dim);
        for (std::size_t i = 0; i < out_dim; ++i) {
            if (!reader.next(line))
                fail(ErrorKind::corrupt_file,
                     "weights file: truncated inside layer " + std::to_string(l));
            Vector row = parse_values(line, in_dim, "weight row");
            std::copy(row.begin(), row.end(), layer.weights.row(i).begin());
        }
        if (!reader.next(line))
            fail(ErrorKind::corrupt_file,
                 "weights file: truncated before biases of layer " + std::to_string(l));
        layer.biases = parse_values(line, out_dim, "bias row");

        net.layers.push_back(std::move(layer));
        expect_in = out_dim;
    }

    if (!reader.next(line) || split_ws(line) != std::vector<std::string>{"end"})
        fail(ErrorKind::corrupt_file, "weights file: missing end marker");
    net.validate();
    return net;
}

void save_weights(const DenseNet& net, const std::filesystem::path& path) {
    write_text_file(path, weights_to_string(net));
}

DenseNet load_weights(const std::filesystem::path& path) {
    return weights_from_string(read_text_file(path));
}

} // namespace stressfuse::nn
