#include "dressing/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dressing {

Action ActionProposer::sample(const Observation& obs, const ForceHistory& history,
                              Rng& rng) const {
    Action mean = mean_action(obs, history);
    std::array<double, 6> a = mean.to_array();
    const std::array<double, 6>& sig = sigma();
    for (int d = 0; d < 6; ++d) a[d] += sig[d] * normal01(rng);
    return Action::from_array(a).clamped();
}

double ActionProposer::log_prob(const Observation& obs, const ForceHistory& history,
                                const Action& a) const {
    Action mean = mean_action(obs, history);
    std::array<double, 6> mu = mean.to_array();
    std::array<double, 6> x = a.to_array();
    const std::array<double, 6>& sig = sigma();
    double lp = 0.0;
    for (int d = 0; d < 6; ++d) {
        double z = (x[d] - mu[d]) / sig[d];
        lp += -0.5 * z * z - std::log(sig[d]) - 0.5 * std::log(2.0 * M_PI);
    }
    return lp;
}

GaussianPolicy::GaussianPolicy(MlpModel mean_network, double sigma)
    : network_(std::move(mean_network)) {
    if (sigma <= 0.0) throw std::invalid_argument("GaussianPolicy: sigma must be positive");
    network_.validate();
    if (network_.output_dim() != 6)
        throw std::invalid_argument("GaussianPolicy: mean network must output 6 values");
    sigma_.fill(sigma);
}

Action GaussianPolicy::mean_action(const Observation& obs, const ForceHistory&) const {
    std::vector<double> out = forward(network_, obs.to_point_set(), {});
    return Action::from_array({out[0], out[1], out[2], out[3], out[4], out[5]});
}

ScriptedPolicy::ScriptedPolicy(const ArmModel& arm, double speed, double lift,
                               double translation_scale, double rotation_scale,
                               double stop_margin, double sigma)
    : arm_(arm),
      speed_(speed),
      lift_(lift),
      translation_scale_(translation_scale),
      rotation_scale_(rotation_scale),
      stop_margin_(stop_margin) {
    sigma_.fill(sigma);
}

Action ScriptedPolicy::mean_action(const Observation& obs, const ForceHistory&) const {
    const Vec3 eef = obs.eef_point;
    // Track the dressing path: project the end-effector onto the arm polyline
    // and head for a point slightly further along, lifted above the axis.
    double arc = dressed_distance(arm_, eef);
    if (arc >= arm_.total_length() - stop_margin_) return Action{};
    const double lookahead = 0.05;
    double target_arc = std::min(arc + lookahead, arm_.total_length());

    double fore_len = arm_.forearm_length();
    Vec3 fore_dir = normalized(arm_.elbow - arm_.fingertip);
    Vec3 upper_dir = normalized(arm_.shoulder - arm_.elbow);
    Vec3 axis_target = target_arc <= fore_len
                           ? arm_.fingertip + fore_dir * target_arc
                           : arm_.elbow + upper_dir * (target_arc - fore_len);
    Vec3 target = axis_target + Vec3{0.0, 0.0, lift_};
    Action a;
    a.translation = normalized(target - eef) * speed_;

    // Reorient the cuff across the elbow: spread the full bend over a window
    // around the corner so the ring normal tracks the local segment.
    constexpr double kCornerWindow = 0.08;
    if (arc > fore_len - kCornerWindow && arc < fore_len + kCornerWindow) {
        Vec3 axis = cross(fore_dir, upper_dir);
        double bend = std::atan2(norm(axis), dot(fore_dir, upper_dir));
        if (norm(axis) > 1e-12 && rotation_scale_ > 0.0) {
            double steps_in_window = 2.0 * kCornerWindow / (speed_ * translation_scale_);
            double per_step = bend / steps_in_window;
            a.rotation = normalized(axis) * (per_step / rotation_scale_);
        }
    }
    return a.clamped();
}

void CemConfig::validate() const {
    if (population < 4) throw std::invalid_argument("CemConfig: population must be >= 4");
    if (elite_frac <= 0.0 || elite_frac >= 1.0)
        throw std::invalid_argument("CemConfig: elite_frac must be in (0,1)");
    if (iterations < 1 || eval_episodes < 1)
        throw std::invalid_argument("CemConfig: iterations and eval_episodes must be >= 1");
    if (init_param_std <= 0.0) throw std::invalid_argument("CemConfig: init_param_std must be > 0");
}

CemResult cem_optimize(const std::function<double(std::span<const double>, int, int)>& objective,
                       std::size_t dim, const CemConfig& config, std::uint64_t seed,
                       const std::vector<double>* init_mean) {
    config.validate();
    if (init_mean && init_mean->size() != dim)
        throw std::invalid_argument("cem_optimize: init_mean size mismatch");

    std::vector<double> mean(dim, 0.0);
    if (init_mean) mean = *init_mean;
    std::vector<double> stddev(dim, config.init_param_std);

    Rng rng(derive_seed(seed, "cem"));
    const int elite_count =
        std::max(1, static_cast<int>(std::ceil(config.elite_frac * config.population)));

    CemResult result;
    result.best_return = -std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> candidates(config.population, std::vector<double>(dim));
    std::vector<double> returns(config.population);
    std::vector<int> order(config.population);

    for (int iter = 0; iter < config.iterations; ++iter) {
        for (int c = 0; c < config.population; ++c) {
            for (std::size_t i = 0; i < dim; ++i)
                candidates[c][i] = mean[i] + stddev[i] * normal01(rng);
            returns[c] = objective(candidates[c], iter, c);
        }

        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return returns[a] > returns[b]; });

        if (returns[order[0]] > result.best_return) {
            result.best_return = returns[order[0]];
            result.best_params = candidates[order[0]];
        }

        double elite_sum = 0.0;
        for (int e = 0; e < elite_count; ++e) elite_sum += returns[order[e]];

        for (std::size_t i = 0; i < dim; ++i) {
            double m = 0.0;
            for (int e = 0; e < elite_count; ++e) m += candidates[order[e]][i];
            m /= elite_count;
            double var = 0.0;
            for (int e = 0; e < elite_count; ++e) {
                double d = candidates[order[e]][i] - m;
                var += d * d;
            }
            var /= elite_count;
            mean[i] = m;
            stddev[i] = std::max(std::sqrt(var), config.sigma_floor);
        }

        result.log.push_back({iter, elite_sum / elite_count, result.best_return});
    }
    return result;
}

double evaluate_policy_return(const ActionProposer& policy, const EpisodeConfig& config) {
    DressingEnv env;
    Observation obs = env.reset(config);
    ForceHistory history(5);
    double total = 0.0;
    while (!env.done()) {
        Action a = policy.mean_action(obs, history);
        StepOutput out = env.step(a);
        total += out.reward.total();
        history.push(out.force.vector);
        obs = std::move(out.observation);
    }
    return total;
}

PolicyTrainResult train_policy_cem(const EnvConfigFactory& env_factory, const PolicyArch& arch,
                                   double sigma, const CemConfig& config, std::uint64_t seed,
                                   const MlpModel* warm_start) {
    EpisodeConfig probe = env_factory(0);
    MlpModel proto;
    if (warm_start) {
        proto = *warm_start;
    } else {
        proto = make_mlp(Observation::kFeatureDim, arch.per_point_hidden, 0, arch.head_hidden, 6,
                         Activation::kRelu, Activation::kTanh, derive_seed(seed, "policy_init"));
    }
    (void)probe;

    std::vector<double> init = proto.flatten();
    GaussianPolicy scratch(proto, sigma);

    auto objective = [&](std::span<const double> params, int iter, int) {
        scratch.network().unflatten(params);
        double total = 0.0;
        for (int e = 0; e < config.eval_episodes; ++e) {
            // common episodes across candidates within an iteration
            EpisodeConfig ep = env_factory(iter * config.eval_episodes + e);
            total += evaluate_policy_return(scratch, ep);
        }
        return total / config.eval_episodes;
    };

    CemResult cem = cem_optimize(objective, init.size(), config, seed, &init);
    proto.unflatten(cem.best_params);

    PolicyTrainResult out{GaussianPolicy(std::move(proto), sigma), std::move(cem.log),
                          cem.best_return};
    return out;
}

std::vector<TrainSample> collect_scripted_demos(const EnvConfigFactory& env_factory, int episodes,
                                                double speed, double lift, double stop_margin) {
    std::vector<TrainSample> demos;
    for (int e = 0; e < episodes; ++e) {
        EpisodeConfig config = env_factory(e);
        DressingEnv env;
        Observation obs = env.reset(config);
        ScriptedPolicy scripted(env.arm(), speed, lift, config.action_translation_scale,
                                config.action_rotation_scale, stop_margin);
        ForceHistory history(1);
        while (!env.done()) {
            Action a = scripted.mean_action(obs, history);
            TrainSample s;
            s.points = obs.to_point_set();
            std::array<double, 6> arr = a.to_array();
            s.target.assign(arr.begin(), arr.end());
            demos.push_back(std::move(s));
            StepOutput out = env.step(a);
            obs = std::move(out.observation);
        }
    }
    return demos;
}

MlpModel behavior_clone(const PolicyArch& arch, const std::vector<TrainSample>& demos, int epochs,
                        double lr, std::uint64_t seed) {
    if (demos.empty()) throw std::invalid_argument("behavior_clone: no demos");
    MlpModel model = make_mlp(Observation::kFeatureDim, arch.per_point_hidden, 0, arch.head_hidden,
                              6, Activation::kRelu, Activation::kTanh, derive_seed(seed, "bc_init"));
    TrainOptions opts;
    opts.epochs = epochs;
    opts.lr = lr;
    opts.batch_size = 32;
    opts.seed = derive_seed(seed, "bc_train");
    train_mse(model, demos, opts);
    return model;
}

}  // namespace dressing
