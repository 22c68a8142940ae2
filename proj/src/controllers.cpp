#include "dressing/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dressing {

void FcvpConfig::validate() const {
    if (candidates < 1) throw std::invalid_argument("FcvpConfig: candidates must be >= 1");
    if (force_threshold <= 0.0)
        throw std::invalid_argument("FcvpConfig: force threshold must be positive");
    if (uniform_prob < 0.0 || uniform_prob > 1.0)
        throw std::invalid_argument("FcvpConfig: uniform_prob must be in [0,1]");
    if (resample_budget < 0) throw std::invalid_argument("FcvpConfig: resample_budget must be >= 0");
}

int select_constrained(const CandidateSet& candidates, double tau) {
    if (candidates.size() == 0) throw std::invalid_argument("select_constrained: empty candidate set");
    int best_feasible = -1;
    int lowest_force = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates.predicted_forces[i] < candidates.predicted_forces[lowest_force])
            lowest_force = static_cast<int>(i);
        if (candidates.predicted_forces[i] <= tau) {
            if (best_feasible < 0 ||
                candidates.log_probs[i] > candidates.log_probs[best_feasible])
                best_feasible = static_cast<int>(i);
        }
    }
    return best_feasible >= 0 ? best_feasible : lowest_force;
}

namespace {

CandidateSet draw_candidates(const ActionProposer& policy, const ForceModel& force_model,
                             const Observation& obs, const ForceHistory& history, int k, double p,
                             Rng& rng) {
    CandidateSet set;
    set.actions.reserve(k);
    set.from_uniform.reserve(k);
    set.log_probs.reserve(k);
    set.predicted_forces.reserve(k);
    for (int i = 0; i < k; ++i) {
        bool uniform = false;
        Action a = mixture_sample(policy, obs, history, p, rng, &uniform);
        set.actions.push_back(a);
        set.from_uniform.push_back(uniform);
        set.log_probs.push_back(policy.log_prob(obs, history, a));
        set.predicted_forces.push_back(force_model.predict(obs, history, a));
    }
    return set;
}

}  // namespace

Action fcvp_select(const ActionProposer& policy, const ForceModel& force_model,
                   const Observation& obs, const ForceHistory& history, const FcvpConfig& config,
                   Rng& rng, FcvpDiagnostics* diagnostics) {
    config.validate();
    CandidateSet set = draw_candidates(policy, force_model, obs, history, config.candidates,
                                       config.uniform_prob, rng);
    int feasible = 0;
    for (double f : set.predicted_forces)
        if (f <= config.force_threshold) ++feasible;

    int rounds = 0;
    while (feasible == 0 && rounds < config.resample_budget) {
        ++rounds;
        CandidateSet extra = draw_candidates(policy, force_model, obs, history, config.candidates,
                                             config.uniform_prob, rng);
        for (std::size_t i = 0; i < extra.size(); ++i) {
            set.actions.push_back(extra.actions[i]);
            set.from_uniform.push_back(extra.from_uniform[i]);
            set.log_probs.push_back(extra.log_probs[i]);
            set.predicted_forces.push_back(extra.predicted_forces[i]);
            if (extra.predicted_forces[i] <= config.force_threshold) ++feasible;
        }
    }

    int chosen = select_constrained(set, config.force_threshold);
    if (diagnostics) {
        diagnostics->feasible_count = feasible;
        diagnostics->chosen_index = chosen;
        diagnostics->chosen_from_uniform = set.from_uniform[chosen];
        diagnostics->chosen_predicted_force = set.predicted_forces[chosen];
        diagnostics->resample_rounds = rounds;
    }
    return set.actions[chosen];
}

Action vision_only_select(const ActionProposer& policy, const Observation& obs,
                          const ForceHistory& history) {
    return policy.mean_action(obs, history);
}

Action vision_random_select(const ActionProposer& policy, const Observation& obs,
                            const ForceHistory& history, double p, Rng& rng) {
    return mixture_sample(policy, obs, history, p, rng);
}

double force_only_cost(double predicted_force, const Vec3& direction, const Action& action,
                       const ForceOnlyConfig& config) {
    std::array<double, 6> a = action.to_array();
    double sq = 0.0;
    for (double v : a) sq += v * v;
    return config.weight_force * std::abs(predicted_force) -
           config.weight_progress * dot(direction, action.translation) +
           config.weight_magnitude * sq;
}

GarmentStage garment_stage_for(const ArmModel& arm, double dressed) {
    return dressed > arm.forearm_length() ? GarmentStage::kUpperarm : GarmentStage::kForearm;
}

Action force_only_select(const ForceModel& force_model, const Observation& obs,
                         const ForceHistory& history, const ArmModel& arm, GarmentStage stage,
                         const ForceOnlyConfig& config, Rng& rng) {
    if (config.candidates < 1) throw std::invalid_argument("force_only_select: candidates >= 1");
    Vec3 d = stage == GarmentStage::kForearm ? normalized(arm.elbow - arm.fingertip)
                                             : normalized(arm.shoulder - arm.elbow);
    Vec3 ref = std::abs(d.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 n1 = normalized(cross(d, ref));
    Vec3 n2 = cross(d, n1);

    double best_cost = 0.0;
    Action best;
    for (int i = 0; i < config.candidates; ++i) {
        // translation uniform over the cone's solid angle, magnitude in (0,1]
        double cos_theta = uniform_range(rng, std::cos(config.cone_half_angle), 1.0);
        double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
        double phi = uniform_range(rng, 0.0, 2.0 * M_PI);
        Vec3 dir = d * cos_theta + (n1 * std::cos(phi) + n2 * std::sin(phi)) * sin_theta;
        double mag = 1.0 - uniform01(rng);
        Action a;
        a.translation = dir * mag;  // rotation stays zero: the cone heuristic is translational
        double pred = force_model.predict(obs, history, a);
        double cost = force_only_cost(pred, d, a, config);
        if (i == 0 || cost < best_cost) {
            best_cost = cost;
            best = a;
        }
    }
    return best;
}

double penalized_reward(double reward, double force, double tau, double w) {
    if (w < 0.0) throw std::invalid_argument("penalized_reward: w must be >= 0");
    return reward - w * std::max(0.0, force - tau);
}

MultimodalPolicy::MultimodalPolicy(MlpModel network, int history_n, double sigma)
    : network_(std::move(network)), history_n_(history_n) {
    if (sigma <= 0.0) throw std::invalid_argument("MultimodalPolicy: sigma must be positive");
    network_.validate();
    if (network_.output_dim() != 6 || network_.extra_dim != 3 * history_n)
        throw std::invalid_argument("MultimodalPolicy: network shape mismatch");
    sigma_.fill(sigma);
}

Action MultimodalPolicy::mean_action(const Observation& obs, const ForceHistory& history) const {
    ForceHistory window = history.size() == history_n_ ? history : history.truncated(history_n_);
    std::vector<double> out = forward(network_, obs.to_point_set(), window.flatten());
    return Action::from_array({out[0], out[1], out[2], out[3], out[4], out[5]});
}

ResidualPolicy::ResidualPolicy(GaussianPolicy base, MlpModel residual, int history_n, double sigma)
    : base_(std::move(base)), residual_(std::move(residual)), history_n_(history_n) {
    if (sigma <= 0.0) throw std::invalid_argument("ResidualPolicy: sigma must be positive");
    residual_.validate();
    if (residual_.output_dim() != 6 || residual_.extra_dim != 3 * history_n + 6)
        throw std::invalid_argument("ResidualPolicy: residual network shape mismatch");
    sigma_.fill(sigma);
}

Action ResidualPolicy::mean_action(const Observation& obs, const ForceHistory& history) const {
    Action base_action = base_.mean_action(obs, history);
    ForceHistory window = history.size() == history_n_ ? history : history.truncated(history_n_);
    std::vector<double> extras = window.flatten();
    std::array<double, 6> b = base_action.to_array();
    extras.insert(extras.end(), b.begin(), b.end());
    std::vector<double> res = forward(residual_, obs.to_point_set(), extras);
    std::array<double, 6> sum;
    for (int d = 0; d < 6; ++d) sum[d] = b[d] + res[d];
    return Action::from_array(sum).clamped();
}

double evaluate_penalized_return(const ActionProposer& policy, const EpisodeConfig& config,
                                 int history_n, double tau, double w) {
    DressingEnv env;
    Observation obs = env.reset(config);
    ForceHistory history(history_n);
    double total = 0.0;
    while (!env.done()) {
        Action a = policy.mean_action(obs, history);
        StepOutput out = env.step(a);
        total += penalized_reward(out.reward.total(), out.force.magnitude, tau, w);
        history.push(out.force.vector);
        obs = std::move(out.observation);
    }
    return total;
}

MultimodalPolicy pretrain_multimodal(const EnvConfigFactory& env_factory_a,
                                     const FinetuneConfig& config, const MlpModel* warm_start) {
    MlpModel proto;
    if (warm_start) {
        proto = *warm_start;
    } else {
        proto = make_mlp(Observation::kFeatureDim, config.arch.per_point_hidden,
                         3 * config.history_n, config.arch.head_hidden, 6, Activation::kRelu,
                         Activation::kTanh, derive_seed(config.seed, "multimodal_init"));
    }
    MultimodalPolicy scratch(proto, config.history_n, config.sigma);
    std::vector<double> init = scratch.network().flatten();

    auto objective = [&](std::span<const double> params, int iter, int) {
        scratch.network().unflatten(params);
        double total = 0.0;
        for (int e = 0; e < config.cem.eval_episodes; ++e) {
            EpisodeConfig ep = env_factory_a(iter * config.cem.eval_episodes + e);
            // plain task reward during pretraining
            total += evaluate_penalized_return(scratch, ep, config.history_n, config.tau, 0.0);
        }
        return total / config.cem.eval_episodes;
    };
    CemResult cem = cem_optimize(objective, init.size(), config.cem,
                                 derive_seed(config.seed, "multimodal_pretrain"), &init);
    scratch.network().unflatten(cem.best_params);
    return scratch;
}

MultimodalPolicy finetune_multimodal(const MultimodalPolicy& pretrained,
                                     const EnvConfigFactory& env_factory_b,
                                     const FinetuneConfig& config) {
    MultimodalPolicy scratch = pretrained;
    std::vector<double> init = scratch.network().flatten();

    auto objective = [&](std::span<const double> params, int iter, int) {
        scratch.network().unflatten(params);
        double total = 0.0;
        for (int e = 0; e < config.cem.eval_episodes; ++e) {
            EpisodeConfig ep = env_factory_b(iter * config.cem.eval_episodes + e);
            total += evaluate_penalized_return(scratch, ep, config.history_n, config.tau,
                                               config.penalty_weight);
        }
        return total / config.cem.eval_episodes;
    };
    CemResult cem = cem_optimize(objective, init.size(), config.cem,
                                 derive_seed(config.seed, "multimodal_finetune"), &init);
    scratch.network().unflatten(cem.best_params);
    return scratch;
}

ResidualPolicy train_residual(const GaussianPolicy& base, const EnvConfigFactory& env_factory_b,
                              const FinetuneConfig& config) {
    // zero initialization: at the start the residual output is exactly zero
    MlpModel residual;
    {
        SetEncoder enc;
        int in = Observation::kFeatureDim;
        for (int h : config.arch.per_point_hidden) {
            enc.layers.push_back(DenseLayer::zeros(in, h, Activation::kRelu));
            in = h;
        }
        residual.encoder = std::move(enc);
        residual.extra_dim = 3 * config.history_n + 6;
        int head_in = in + residual.extra_dim;
        for (int h : config.arch.head_hidden) {
            residual.head.push_back(DenseLayer::zeros(head_in, h, Activation::kRelu));
            head_in = h;
        }
        residual.head.push_back(DenseLayer::zeros(head_in, 6, Activation::kTanh));
        residual.validate();
    }

    ResidualPolicy scratch(base, residual, config.history_n, config.sigma);
    std::vector<double> init = scratch.residual().flatten();

    auto objective = [&](std::span<const double> params, int iter, int) {
        scratch.residual().unflatten(params);
        double total = 0.0;
        for (int e = 0; e < config.cem.eval_episodes; ++e) {
            EpisodeConfig ep = env_factory_b(iter * config.cem.eval_episodes + e);
            total += evaluate_penalized_return(scratch, ep, config.history_n, config.tau,
                                               config.penalty_weight);
        }
        return total / config.cem.eval_episodes;
    };
    CemResult cem = cem_optimize(objective, init.size(), config.cem,
                                 derive_seed(config.seed, "residual_train"), &init);
    scratch.residual().unflatten(cem.best_params);
    return scratch;
}

void save_gaussian_policy(const GaussianPolicy& policy, const std::string& path) {
    nlohmann::json extra;
    extra["kind"] = "gaussian_policy";
    extra["sigma"] = policy.sigma_scalar();
    save_checkpoint(policy.network(), extra.dump(), path);
}

GaussianPolicy load_gaussian_policy(const std::string& path) {
    std::string extra_str;
    MlpModel net = load_checkpoint(path, &extra_str);
    if (extra_str.empty()) throw std::runtime_error("policy checkpoint missing metadata");
    nlohmann::json extra = nlohmann::json::parse(extra_str);
    if (extra.at("kind").get<std::string>() != "gaussian_policy")
        throw std::runtime_error("not a policy checkpoint: " + path);
    return GaussianPolicy(std::move(net), extra.at("sigma").get<double>());
}

void save_multimodal_policy(const MultimodalPolicy& policy, const std::string& path) {
    nlohmann::json extra;
    extra["kind"] = "multimodal_policy";
    extra["sigma"] = policy.sigma_scalar();
    extra["history_n"] = policy.history_n();
    save_checkpoint(policy.network(), extra.dump(), path);
}

MultimodalPolicy load_multimodal_policy(const std::string& path) {
    std::string extra_str;
    MlpModel net = load_checkpoint(path, &extra_str);
    if (extra_str.empty()) throw std::runtime_error("policy checkpoint missing metadata");
    nlohmann::json extra = nlohmann::json::parse(extra_str);
    if (extra.at("kind").get<std::string>() != "multimodal_policy")
        throw std::runtime_error("not a multimodal policy checkpoint: " + path);
    return MultimodalPolicy(std::move(net), extra.at("history_n").get<int>(),
                            extra.at("sigma").get<double>());
}

void save_residual_policy(const ResidualPolicy& policy, const std::string& path) {
    nlohmann::json extra;
    extra["kind"] = "residual_policy";
    extra["sigma"] = policy.sigma_scalar();
    extra["history_n"] = policy.history_n();
    save_checkpoint(policy.residual(), extra.dump(), path);
}

ResidualPolicy load_residual_policy(const std::string& path, const GaussianPolicy& base) {
    std::string extra_str;
    MlpModel net = load_checkpoint(path, &extra_str);
    if (extra_str.empty()) throw std::runtime_error("policy checkpoint missing metadata");
    nlohmann::json extra = nlohmann::json::parse(extra_str);
    if (extra.at("kind").get<std::string>() != "residual_policy")
        throw std::runtime_error("not a residual policy checkpoint: " + path);
    return ResidualPolicy(base, std::move(net), extra.at("history_n").get<int>(),
                          extra.at("sigma").get<double>());
}

}  // namespace dressing
