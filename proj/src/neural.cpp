#include "dressing/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dressing/rng.hpp"

namespace dressing {

namespace {

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::kIdentity: return z;
        case Activation::kRelu: return z > 0.0 ? z : 0.0;
        case Activation::kTanh: return std::tanh(z);
    }
    return z;
}

// derivative expressed via the pre-activation z and activation value y
double activation_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::kIdentity: return 1.0;
        case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: return 1.0 - y * y;
    }
    return 1.0;
}

void layer_forward(const DenseLayer& layer, std::span<const double> input, double* pre,
                   double* out) {
    for (int o = 0; o < layer.out_dim; ++o) {
        const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
        double z = layer.biases[o];
        for (int i = 0; i < layer.in_dim; ++i) z += w[i] * input[i];
        pre[o] = z;
        out[o] = apply_activation(layer.activation, z);
    }
}

}  // namespace

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kTanh: return "tanh";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::kIdentity;
    if (name == "relu") return Activation::kRelu;
    if (name == "tanh") return Activation::kTanh;
    throw std::invalid_argument("unknown activation: " + name);
}

DenseLayer DenseLayer::zeros(int in_dim, int out_dim, Activation act) {
    DenseLayer l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.weights.assign(static_cast<std::size_t>(in_dim) * out_dim, 0.0);
    l.biases.assign(out_dim, 0.0);
    l.activation = act;
    return l;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    if (encoder)
        for (const DenseLayer& l : encoder->layers) n += l.parameter_count();
    for (const DenseLayer& l : head) n += l.parameter_count();
    return n;
}

std::vector<double> MlpModel::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    auto push = [&](const DenseLayer& l) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.biases.begin(), l.biases.end());
    };
    if (encoder)
        for (const DenseLayer& l : encoder->layers) push(l);
    for (const DenseLayer& l : head) push(l);
    return out;
}

void MlpModel::unflatten(std::span<const double> params) {
    if (params.size() != parameter_count())
        throw std::invalid_argument("unflatten: parameter count mismatch");
    std::size_t off = 0;
    auto pull = [&](DenseLayer& l) {
        std::copy_n(params.begin() + off, l.weights.size(), l.weights.begin());
        off += l.weights.size();
        std::copy_n(params.begin() + off, l.biases.size(), l.biases.begin());
        off += l.biases.size();
    };
    if (encoder)
        for (DenseLayer& l : encoder->layers) pull(l);
    for (DenseLayer& l : head) pull(l);
}

void MlpModel::validate() const {
    auto check_chain = [](const std::vector<DenseLayer>& layers, const char* what) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const DenseLayer& l = layers[i];
            if (l.in_dim <= 0 || l.out_dim <= 0)
                throw std::invalid_argument(std::string(what) + ": non-positive layer dims");
            if (l.weights.size() != static_cast<std::size_t>(l.in_dim) * l.out_dim ||
                l.biases.size() != static_cast<std::size_t>(l.out_dim))
                throw std::invalid_argument(std::string(what) + ": parameter shape mismatch");
            if (i > 0 && layers[i - 1].out_dim != l.in_dim)
                throw std::invalid_argument(std::string(what) + ": layer dims do not chain");
        }
    };
    if (encoder) check_chain(encoder->layers, "encoder");
    check_chain(head, "head");
    if (head.empty()) throw std::invalid_argument("model: head must be non-empty");
    int expected = latent_dim() + extra_dim;
    if (head.front().in_dim != expected)
        throw std::invalid_argument("model: head input dim must equal latent + extras");
}

MlpModel make_mlp(int point_dim, const std::vector<int>& per_point_hidden, int extra_dim,
                  const std::vector<int>& head_hidden, int output_dim, Activation hidden_act,
                  Activation output_act, std::uint64_t seed) {
    Rng rng(seed);
    auto init_layer = [&](int in, int out, Activation act) {
        DenseLayer l = DenseLayer::zeros(in, out, act);
        double bound = std::sqrt(1.0 / in);
        for (double& w : l.weights) w = uniform_range(rng, -bound, bound);
        for (double& b : l.biases) b = uniform_range(rng, -bound, bound);
        return l;
    };

    MlpModel model;
    model.extra_dim = extra_dim;
    int latent = 0;
    if (!per_point_hidden.empty()) {
        SetEncoder enc;
        int in = point_dim;
        for (int h : per_point_hidden) {
            enc.layers.push_back(init_layer(in, h, hidden_act));
            in = h;
        }
        latent = in;
        model.encoder = std::move(enc);
    }
    int in = latent + extra_dim;
    for (int h : head_hidden) {
        model.head.push_back(init_layer(in, h, hidden_act));
        in = h;
    }
    model.head.push_back(init_layer(in, output_dim, output_act));
    model.validate();
    return model;
}

std::vector<double> forward(const MlpModel& model, const PointSet& points,
                            std::span<const double> extras, ForwardCache* cache) {
    if (static_cast<int>(extras.size()) != model.extra_dim)
        throw std::invalid_argument("forward: extras dim mismatch");

    std::vector<double> latent;
    if (model.encoder) {
        const SetEncoder& enc = *model.encoder;
        if (points.count <= 0) throw std::invalid_argument("forward: encoder needs >= 1 point");
        if (points.dim != enc.point_dim())
            throw std::invalid_argument("forward: point feature dim mismatch");

        const std::size_t n_layers = enc.layers.size();
        std::vector<std::vector<double>> pre(n_layers), act(n_layers);
        for (std::size_t li = 0; li < n_layers; ++li) {
            pre[li].resize(static_cast<std::size_t>(points.count) * enc.layers[li].out_dim);
            act[li].resize(pre[li].size());
        }
        for (int pi = 0; pi < points.count; ++pi) {
            std::span<const double> in = points.point(pi);
            for (std::size_t li = 0; li < n_layers; ++li) {
                const DenseLayer& l = enc.layers[li];
                double* p = pre[li].data() + static_cast<std::size_t>(pi) * l.out_dim;
                double* a = act[li].data() + static_cast<std::size_t>(pi) * l.out_dim;
                layer_forward(l, in, p, a);
                in = {a, static_cast<std::size_t>(l.out_dim)};
            }
        }

        int latent_dim = enc.latent_dim();
        latent.resize(latent_dim);
        std::vector<int> argmax(latent_dim, 0);
        const std::vector<double>& last = act.back();
        for (int j = 0; j < latent_dim; ++j) {
            double best = last[j];
            int best_i = 0;
            for (int pi = 1; pi < points.count; ++pi) {
                double v = last[static_cast<std::size_t>(pi) * latent_dim + j];
                if (v > best) {  // strict '>' keeps the lowest index on ties
                    best = v;
                    best_i = pi;
                }
            }
            latent[j] = best;
            argmax[j] = best_i;
        }
        if (cache) {
            cache->enc_pre = std::move(pre);
            cache->enc_act = std::move(act);
            cache->pool_argmax = std::move(argmax);
            cache->points = points;
        }
    }

    std::vector<double> head_input;
    head_input.reserve(latent.size() + extras.size());
    head_input.insert(head_input.end(), latent.begin(), latent.end());
    head_input.insert(head_input.end(), extras.begin(), extras.end());

    const std::size_t n_head = model.head.size();
    std::vector<std::vector<double>> hpre(n_head), hact(n_head);
    std::span<const double> in = head_input;
    for (std::size_t li = 0; li < n_head; ++li) {
        const DenseLayer& l = model.head[li];
        if (static_cast<int>(in.size()) != l.in_dim)
            throw std::invalid_argument("forward: head input dim mismatch");
        hpre[li].resize(l.out_dim);
        hact[li].resize(l.out_dim);
        layer_forward(l, in, hpre[li].data(), hact[li].data());
        in = hact[li];
    }
    std::vector<double> output = hact.back();
    if (cache) {
        cache->head_input = std::move(head_input);
        cache->head_pre = std::move(hpre);
        cache->head_act = std::move(hact);
    }
    return output;
}

std::vector<double> backward(const MlpModel& model, const ForwardCache& cache,
                             std::span<const double> output_grad) {
    // Gradient buffers mirroring flatten() layout.
    std::vector<double> grads(model.parameter_count(), 0.0);
    std::size_t enc_param_count = 0;
    if (model.encoder)
        for (const DenseLayer& l : model.encoder->layers) enc_param_count += l.parameter_count();

    // --- head ---
    const std::size_t n_head = model.head.size();
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::size_t off_end = grads.size();
    std::vector<double> prev_delta;
    for (std::size_t li = n_head; li-- > 0;) {
        const DenseLayer& l = model.head[li];
        for (int o = 0; o < l.out_dim; ++o)
            delta[o] *= activation_grad(l.activation, cache.head_pre[li][o], cache.head_act[li][o]);

        std::span<const double> input = li == 0
            ? std::span<const double>(cache.head_input)
            : std::span<const double>(cache.head_act[li - 1]);

        off_end -= l.parameter_count();
        double* gw = grads.data() + off_end;
        double* gb = gw + l.weights.size();
        prev_delta.assign(l.in_dim, 0.0);
        for (int o = 0; o < l.out_dim; ++o) {
            const double* w = l.weights.data() + static_cast<std::size_t>(o) * l.in_dim;
            double* gwo = gw + static_cast<std::size_t>(o) * l.in_dim;
            for (int i = 0; i < l.in_dim; ++i) {
                gwo[i] += delta[o] * input[i];
                prev_delta[i] += delta[o] * w[i];
            }
            gb[o] += delta[o];
        }
        delta = prev_delta;
    }

    if (!model.encoder) return grads;

    // --- max pool routing: only the argmax point of each channel receives gradient ---
    const SetEncoder& enc = *model.encoder;
    int latent_dim = enc.latent_dim();
    // delta currently holds d(loss)/d(head_input); first latent_dim entries are the latent.
    std::vector<std::vector<double>> point_grad;  // per point, grad of encoder output
    point_grad.assign(cache.points.count, std::vector<double>());
    for (int j = 0; j < latent_dim; ++j) {
        double g = delta[j];
        if (g == 0.0) continue;
        int winner = cache.pool_argmax[j];
        if (point_grad[winner].empty()) point_grad[winner].assign(latent_dim, 0.0);
        point_grad[winner][j] += g;
    }

    const std::size_t n_enc = enc.layers.size();
    std::vector<double> d, pd;
    for (int pi = 0; pi < cache.points.count; ++pi) {
        if (point_grad[pi].empty()) continue;
        d = point_grad[pi];
        std::size_t enc_off_end = enc_param_count;
        for (std::size_t li = n_enc; li-- > 0;) {
            const DenseLayer& l = enc.layers[li];
            const double* pre = cache.enc_pre[li].data() + static_cast<std::size_t>(pi) * l.out_dim;
            const double* act = cache.enc_act[li].data() + static_cast<std::size_t>(pi) * l.out_dim;
            for (int o = 0; o < l.out_dim; ++o) d[o] *= activation_grad(l.activation, pre[o], act[o]);

            std::span<const double> input = li == 0
                ? cache.points.point(pi)
                : std::span<const double>(cache.enc_act[li - 1].data() +
                                              static_cast<std::size_t>(pi) * l.in_dim,
                                          static_cast<std::size_t>(l.in_dim));

            enc_off_end -= l.parameter_count();
            double* gw = grads.data() + enc_off_end;
            double* gb = gw + l.weights.size();
            pd.assign(l.in_dim, 0.0);
            for (int o = 0; o < l.out_dim; ++o) {
                const double* w = l.weights.data() + static_cast<std::size_t>(o) * l.in_dim;
                double* gwo = gw + static_cast<std::size_t>(o) * l.in_dim;
                for (int i = 0; i < l.in_dim; ++i) {
                    gwo[i] += d[o] * input[i];
                    pd[i] += d[o] * w[i];
                }
                gb[o] += d[o];
            }
            d = pd;
        }
    }
    return grads;
}

AdamState AdamState::init(std::size_t parameter_count, double lr_) {
    AdamState s;
    s.first_moment.assign(parameter_count, 0.0);
    s.second_moment.assign(parameter_count, 0.0);
    s.lr = lr_;
    return s;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        double m_hat = state.first_moment[i] / bc1;
        double v_hat = state.second_moment[i] / bc2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

double mse_loss(const MlpModel& model, const std::vector<TrainSample>& dataset) {
    double total = 0.0;
    std::size_t terms = 0;
    for (const TrainSample& s : dataset) {
        std::vector<double> pred = forward(model, s.points, s.extras);
        for (std::size_t d = 0; d < pred.size(); ++d) {
            double e = pred[d] - s.target[d];
            total += e * e;
        }
        terms += pred.size();
    }
    return terms ? total / static_cast<double>(terms) : 0.0;
}

TrainResult train_mse(MlpModel& model, const std::vector<TrainSample>& dataset,
                      const TrainOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("train_mse: dataset is empty");
    model.validate();
    const int out_dim = model.output_dim();
    for (const TrainSample& s : dataset)
        if (static_cast<int>(s.target.size()) != out_dim)
            throw std::invalid_argument("train_mse: target dim mismatch");

    std::vector<double> params = model.flatten();
    AdamState adam = AdamState::init(params.size(), options.lr);
    Rng rng(derive_seed(options.seed, "train_mse"));

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<double> batch_grads(params.size());
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            std::size_t j = i + uniform_index(rng, order.size() - i);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t epoch_terms = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(options.batch_size)) {
            std::size_t end = std::min(order.size(), start + options.batch_size);
            std::fill(batch_grads.begin(), batch_grads.end(), 0.0);
            double batch_count = static_cast<double>(end - start);
            for (std::size_t bi = start; bi < end; ++bi) {
                const TrainSample& s = dataset[order[bi]];
                ForwardCache cache;
                std::vector<double> pred = forward(model, s.points, s.extras, &cache);
                std::vector<double> out_grad(out_dim);
                for (int d = 0; d < out_dim; ++d) {
                    double e = pred[d] - s.target[d];
                    epoch_loss += e * e;
                    out_grad[d] = 2.0 * e / (batch_count * out_dim);
                }
                epoch_terms += out_dim;
                std::vector<double> g = backward(model, cache, out_grad);
                for (std::size_t k = 0; k < batch_grads.size(); ++k) batch_grads[k] += g[k];
            }
            adam_step(params, batch_grads, adam);
            model.unflatten(params);
        }
        double mean_loss = epoch_loss / static_cast<double>(epoch_terms);
        if (!std::isfinite(mean_loss))
            throw std::runtime_error("train_mse: loss diverged at epoch " + std::to_string(epoch));
        result.loss_curve.push_back(mean_loss);
    }
    return result;
}

namespace {

void write_doubles_le(std::ofstream& out, const std::vector<double>& values) {
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

std::vector<double> read_doubles_le(std::ifstream& in, std::size_t count) {
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        if (!in) throw std::runtime_error("checkpoint: truncated parameter blob");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        values[i] = std::bit_cast<double>(bits);
    }
    return values;
}

nlohmann::json layer_shapes(const std::vector<DenseLayer>& layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const DenseLayer& l : layers)
        arr.push_back({{"in", l.in_dim}, {"out", l.out_dim}, {"act", activation_name(l.activation)}});
    return arr;
}

std::vector<DenseLayer> layers_from_shapes(const nlohmann::json& arr) {
    std::vector<DenseLayer> layers;
    for (const auto& j : arr)
        layers.push_back(DenseLayer::zeros(j.at("in").get<int>(), j.at("out").get<int>(),
                                           activation_from_name(j.at("act").get<std::string>())));
    return layers;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const MlpModel& model, const std::string& extra_json, const std::string& path) {
    nlohmann::json header;
    header["format"] = "mlp-checkpoint";
    header["version"] = kCheckpointVersion;
    header["extra_dim"] = model.extra_dim;
    header["head"] = layer_shapes(model.head);
    if (model.encoder) header["encoder"] = layer_shapes(model.encoder->layers);
    if (!extra_json.empty()) header["extra"] = nlohmann::json::parse(extra_json);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out << header.dump() << "\n";
    write_doubles_le(out, model.flatten());
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

MlpModel load_checkpoint(const std::string& path, std::string* extra_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint missing header: " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != "mlp-checkpoint")
        throw std::runtime_error("not a model checkpoint: " + path);
    if (header.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);

    MlpModel model;
    model.extra_dim = header.at("extra_dim").get<int>();
    if (header.contains("encoder")) {
        SetEncoder enc;
        enc.layers = layers_from_shapes(header.at("encoder"));
        model.encoder = std::move(enc);
    }
    model.head = layers_from_shapes(header.at("head"));
    model.unflatten(read_doubles_le(in, model.parameter_count()));
    model.validate();
    if (extra_json) *extra_json = header.contains("extra") ? header.at("extra").dump() : "";
    return model;
}

}  // namespace dressing
