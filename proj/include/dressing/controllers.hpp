#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dressing/force_model.hpp"
#include "dressing/policy.hpp"
#include "dressing/types.hpp"

namespace dressing {

struct FcvpConfig {
    int candidates = 64;        // K
    double force_threshold = 25.0;  // tau
    double uniform_prob = 0.1;  // p, shared with data collection
    int resample_budget = 0;    // extra rounds when nothing is feasible; 0 = off

    void validate() const;
};

struct CandidateSet {
    std::vector<Action> actions;
    std::vector<bool> from_uniform;
    std::vector<double> log_probs;
    std::vector<double> predicted_forces;

    std::size_t size() const { return actions.size(); }
};

// The constrained decision rule: among candidates with predicted force <= tau
// pick the highest log density; if none qualify, the lowest predicted force.
// Ties break to the lowest index.
int select_constrained(const CandidateSet& candidates, double tau);

struct FcvpDiagnostics {
    int feasible_count = 0;
    int chosen_index = 0;
    bool chosen_from_uniform = false;
    double chosen_predicted_force = 0.0;
    int resample_rounds = 0;
};

// Constrained random shooting: sample K mixture candidates, score densities
// under the policy, predict forces, then select_constrained.
Action fcvp_select(const ActionProposer& policy, const ForceModel& force_model,
                   const Observation& obs, const ForceHistory& history, const FcvpConfig& config,
                   Rng& rng, FcvpDiagnostics* diagnostics = nullptr);

// Highest-probability action under the policy: its mean.
Action vision_only_select(const ActionProposer& policy, const Observation& obs,
                          const ForceHistory& history);

// Same distribution as training-time collection.
Action vision_random_select(const ActionProposer& policy, const Observation& obs,
                            const ForceHistory& history, double p, Rng& rng);

enum class GarmentStage { kForearm, kUpperarm };

struct ForceOnlyConfig {
    int candidates = 64;
    double cone_half_angle = M_PI / 4.0;
    double weight_force = 0.001;     // w1
    double weight_progress = 1.0;    // w2
    double weight_magnitude = 0.1;   // w3
};

double force_only_cost(double predicted_force, const Vec3& direction, const Action& action,
                       const ForceOnlyConfig& config = {});

// Plans by cost alone: candidates sampled inside a forward progression cone
// about the active arm-segment direction, lowest cost wins.
Action force_only_select(const ForceModel& force_model, const Observation& obs,
                         const ForceHistory& history, const ArmModel& arm, GarmentStage stage,
                         const ForceOnlyConfig& config, Rng& rng);

GarmentStage garment_stage_for(const ArmModel& arm, double dressed);

// r' = r - w * max(0, f - tau)
double penalized_reward(double reward, double force, double tau, double w);

// Vision policy that also consumes the force history through the head extras.
class MultimodalPolicy : public ActionProposer {
public:
    MultimodalPolicy() = default;
    MultimodalPolicy(MlpModel network, int history_n, double sigma);

    Action mean_action(const Observation& obs, const ForceHistory& history) const override;
    const std::array<double, 6>& sigma() const override { return sigma_; }

    MlpModel& network() { return network_; }
    const MlpModel& network() const { return network_; }
    int history_n() const { return history_n_; }
    double sigma_scalar() const { return sigma_[0]; }

private:
    MlpModel network_;
    int history_n_ = 5;
    std::array<double, 6> sigma_{};
};

// Frozen vision base plus a learned residual on (points, history, base action);
// final action = clamp(base + residual).
class ResidualPolicy : public ActionProposer {
public:
    ResidualPolicy() = default;
    ResidualPolicy(GaussianPolicy base, MlpModel residual, int history_n, double sigma);

    Action mean_action(const Observation& obs, const ForceHistory& history) const override;
    const std::array<double, 6>& sigma() const override { return sigma_; }

    const GaussianPolicy& base() const { return base_; }
    MlpModel& residual() { return residual_; }
    const MlpModel& residual() const { return residual_; }
    int history_n() const { return history_n_; }
    double sigma_scalar() const { return sigma_[0]; }

private:
    GaussianPolicy base_;
    MlpModel residual_;
    int history_n_ = 5;
    std::array<double, 6> sigma_{};
};

struct FinetuneConfig {
    int history_n = 5;
    double penalty_weight = 0.5;  // w in the penalized reward
    double tau = 25.0;
    double sigma = 0.3;
    PolicyArch arch;
    CemConfig cem;
    std::uint64_t seed = 0;
};

// Episodic penalized return of a proposer's mean behavior.
double evaluate_penalized_return(const ActionProposer& policy, const EpisodeConfig& config,
                                 int history_n, double tau, double w);

// Fine-tunes a multimodal policy in the target sim under the penalized reward.
MultimodalPolicy finetune_multimodal(const MultimodalPolicy& pretrained,
                                     const EnvConfigFactory& env_factory_b,
                                     const FinetuneConfig& config);

// Trains a zero-initialized residual head on top of a frozen base policy in
// the target sim under the penalized reward.
ResidualPolicy train_residual(const GaussianPolicy& base, const EnvConfigFactory& env_factory_b,
                              const FinetuneConfig& config);

// Fresh multimodal policy (history extras) pretrained in the source sim on the
// plain reward; step one of the multimodal baseline.
MultimodalPolicy pretrain_multimodal(const EnvConfigFactory& env_factory_a,
                                     const FinetuneConfig& config,
                                     const MlpModel* warm_start = nullptr);

void save_gaussian_policy(const GaussianPolicy& policy, const std::string& path);
GaussianPolicy load_gaussian_policy(const std::string& path);
void save_multimodal_policy(const MultimodalPolicy& policy, const std::string& path);
MultimodalPolicy load_multimodal_policy(const std::string& path);
void save_residual_policy(const ResidualPolicy& policy, const std::string& path);
ResidualPolicy load_residual_policy(const std::string& path, const GaussianPolicy& base);

}  // namespace dressing
