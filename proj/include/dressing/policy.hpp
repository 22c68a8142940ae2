#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dressing/env.hpp"
#include "dressing/neural.hpp"
#include "dressing/rng.hpp"
#include "dressing/types.hpp"

namespace dressing {

// Common surface for everything that proposes actions: a deterministic mean
// plus a diagonal Gaussian for sampling and density evaluation.
class ActionProposer {
public:
    virtual ~ActionProposer() = default;

    virtual Action mean_action(const Observation& obs, const ForceHistory& history) const = 0;
    virtual const std::array<double, 6>& sigma() const = 0;

    // mean + diagonal Gaussian noise, clamped to the action cube
    Action sample(const Observation& obs, const ForceHistory& history, Rng& rng) const;

    // log density of the unclamped Gaussian about the mean
    double log_prob(const Observation& obs, const ForceHistory& history, const Action& a) const;
};

// Vision-based policy: set encoder + tanh head producing the 6D action mean.
class GaussianPolicy : public ActionProposer {
public:
    GaussianPolicy() = default;
    GaussianPolicy(MlpModel mean_network, double sigma);

    Action mean_action(const Observation& obs, const ForceHistory& history) const override;
    const std::array<double, 6>& sigma() const override { return sigma_; }

    MlpModel& network() { return network_; }
    const MlpModel& network() const { return network_; }
    double sigma_scalar() const { return sigma_[0]; }

private:
    MlpModel network_;
    std::array<double, 6> sigma_{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
};

// Deterministic fallback that tracks a lifted version of the
// fingertip->elbow->shoulder path at a fixed speed, reorienting the cuff
// through the elbow corner. Useful as a behavior source before any policy is
// trained and as a probe of the simulators.
class ScriptedPolicy : public ActionProposer {
public:
    ScriptedPolicy(const ArmModel& arm, double speed, double lift,
                   double translation_scale = 0.015, double rotation_scale = 0.08,
                   double stop_margin = 0.06, double sigma = 0.3);

    Action mean_action(const Observation& obs, const ForceHistory& history) const override;
    const std::array<double, 6>& sigma() const override { return sigma_; }

private:
    ArmModel arm_;
    double speed_;
    double lift_;
    double translation_scale_;
    double rotation_scale_;
    double stop_margin_;
    std::array<double, 6> sigma_;
};

struct CemConfig {
    int population = 24;
    double elite_frac = 0.25;
    int iterations = 12;
    int eval_episodes = 2;
    double init_param_std = 0.05;
    double sigma_floor = 1e-3;

    void validate() const;
};

struct CemIterationLog {
    int iteration = 0;
    double elite_mean_return = 0.0;
    double best_return = 0.0;
};

struct CemResult {
    std::vector<double> best_params;
    double best_return = 0.0;
    std::vector<CemIterationLog> log;
};

// Derivative-free maximization: sample parameter vectors from a diagonal
// Gaussian, refit it on the elite fraction, keep the best candidate ever seen.
// The objective receives (params, iteration, candidate index).
CemResult cem_optimize(
    const std::function<double(std::span<const double>, int, int)>& objective, std::size_t dim,
    const CemConfig& config, std::uint64_t seed,
    const std::vector<double>* init_mean = nullptr);

using EnvConfigFactory = std::function<EpisodeConfig(int episode_index)>;

struct PolicyArch {
    std::vector<int> per_point_hidden{32, 64};
    std::vector<int> head_hidden{64, 64};
};

// Episodic return of the policy mean over one episode.
double evaluate_policy_return(const ActionProposer& policy, const EpisodeConfig& config);

struct PolicyTrainResult {
    GaussianPolicy policy;
    std::vector<CemIterationLog> cem_log;
    double best_return = 0.0;
};

// CEM over the mean-network parameters, maximizing mean episodic return.
// Pass a warm start (e.g. from behavior cloning) to seed the search.
PolicyTrainResult train_policy_cem(const EnvConfigFactory& env_factory, const PolicyArch& arch,
                                   double sigma, const CemConfig& config, std::uint64_t seed,
                                   const MlpModel* warm_start = nullptr);

// Rolls out the scripted policy and records (observation -> action) pairs.
// Demos press closer to the shoulder than the shipped baseline parks.
std::vector<TrainSample> collect_scripted_demos(const EnvConfigFactory& env_factory, int episodes,
                                                double speed, double lift,
                                                double stop_margin = 0.015);

// Fits the mean network to demos with MSE; the usual warm start for CEM.
MlpModel behavior_clone(const PolicyArch& arch, const std::vector<TrainSample>& demos, int epochs,
                        double lr, std::uint64_t seed);

}  // namespace dressing
