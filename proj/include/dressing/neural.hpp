#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dressing {

enum class Activation { kIdentity, kRelu, kTanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> weights;  // out_dim x in_dim, row-major
    std::vector<double> biases;   // out_dim
    Activation activation = Activation::kIdentity;

    static DenseLayer zeros(int in_dim, int out_dim, Activation act);
    std::size_t parameter_count() const { return weights.size() + biases.size(); }
};

// Point features laid out row-major: count rows of dim values each.
struct PointSet {
    int count = 0;
    int dim = 0;
    std::vector<double> features;

    std::span<const double> point(int i) const {
        return {features.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
};

// Shared per-point MLP followed by channel-wise max pooling; permutation
// invariant by construction. Ties in the pool resolve to the lowest point
// index so the backward pass is deterministic.
struct SetEncoder {
    std::vector<DenseLayer> layers;
    int point_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    int latent_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
};

struct MlpModel {
    std::optional<SetEncoder> encoder;
    std::vector<DenseLayer> head;
    int extra_dim = 0;

    int latent_dim() const { return encoder ? encoder->latent_dim() : 0; }
    int output_dim() const { return head.empty() ? 0 : head.back().out_dim; }
    std::size_t parameter_count() const;

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> params);

    // Throws if layer shapes do not chain up.
    void validate() const;
};

// Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization.
MlpModel make_mlp(int point_dim, const std::vector<int>& per_point_hidden, int extra_dim,
                  const std::vector<int>& head_hidden, int output_dim, Activation hidden_act,
                  Activation output_act, std::uint64_t seed);

struct ForwardCache {
    // encoder: per layer, per point pre-activations/activations (row-major)
    std::vector<std::vector<double>> enc_pre;
    std::vector<std::vector<double>> enc_act;
    std::vector<int> pool_argmax;  // winning point per latent channel
    PointSet points;               // inputs kept for the backward pass
    std::vector<double> head_input;
    std::vector<std::vector<double>> head_pre;
    std::vector<std::vector<double>> head_act;
};

std::vector<double> forward(const MlpModel& model, const PointSet& points,
                            std::span<const double> extras, ForwardCache* cache = nullptr);

// Exact gradients of all parameters for the given output gradient; layout
// matches MlpModel::flatten().
std::vector<double> backward(const MlpModel& model, const ForwardCache& cache,
                             std::span<const double> output_grad);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step = 0;
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(std::size_t parameter_count, double lr);
};

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state);

struct TrainSample {
    PointSet points;
    std::vector<double> extras;
    std::vector<double> target;
};

struct TrainOptions {
    int epochs = 100;
    double lr = 5e-4;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean squared error per epoch
};

// Minimizes mean squared error over shuffled mini-batches with Adam. Aborts
// with an exception if the loss goes non-finite.
TrainResult train_mse(MlpModel& model, const std::vector<TrainSample>& dataset,
                      const TrainOptions& options);

double mse_loss(const MlpModel& model, const std::vector<TrainSample>& dataset);

// Checkpoint: one-line JSON header (version, shapes, extra metadata) followed
// by the little-endian 64-bit float parameter blob. Round-trips bit-exactly.
void save_checkpoint(const MlpModel& model, const std::string& extra_json, const std::string& path);
MlpModel load_checkpoint(const std::string& path, std::string* extra_json = nullptr);

}  // namespace dressing
