#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dressing/config.hpp"
#include "dressing/controllers.hpp"
#include "dressing/env.hpp"
#include "dressing/force_model.hpp"
#include "dressing/policy.hpp"

namespace dressing {

struct ResultRow {
    std::string method;
    int pose_region = 0;
    int garment_id = 0;
    std::uint64_t seed = 0;
    double dressed_ratio = 0.0;
    double avg_violation = 0.0;
    bool episode_fault = false;
};

// Per-step action source used by the evaluation loop. Implementations wrap
// the controller operations; `env` grants read access for privileged
// baselines (scripted path, stage switching).
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    virtual void begin_episode(const DressingEnv& env, std::uint64_t seed) {}
    virtual Action act(const Observation& obs, const ForceHistory& history,
                       const DressingEnv& env, Rng& rng) = 0;
};

// Everything eval-time controllers may need; missing pieces fail fast when a
// method that requires them is requested.
struct EvalArtifacts {
    std::optional<GaussianPolicy> policy;
    std::optional<ForceModel> force_model;
    std::optional<MultimodalPolicy> multimodal;
    std::optional<ResidualPolicy> residual;
};

std::unique_ptr<Controller> make_controller(const std::string& method,
                                            const ExperimentConfig& config,
                                            const EvalArtifacts& artifacts);

struct EpisodeRun {
    Trajectory trajectory;
    double total_reward = 0.0;
    bool fault = false;
};

EpisodeRun run_episode(Controller& controller, const EpisodeConfig& config, int history_n,
                       std::uint64_t seed);

struct EvalOutput {
    std::vector<ResultRow> rows;
    std::vector<std::string> trajectory_files;  // one per cell, same order as rows
};

// Runs every (method, region, garment, seed) cell once in sim B, writes
// per-cell trajectories under <out_dir>/trajectories and results.csv.
EvalOutput run_eval(const ExperimentConfig& config, const std::vector<std::string>& methods,
                    const EvalArtifacts& artifacts, const std::string& out_dir);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);

struct MethodSummary {
    std::string method;
    int cells = 0;
    int faults = 0;
    double mean_ratio = 0.0;
    double std_ratio_trials = 0.0;
    double std_ratio_regions = 0.0;  // std over per-region means
    double mean_violation = 0.0;
    double std_violation_trials = 0.0;
    double std_violation_regions = 0.0;
};

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows);

struct AblationRow {
    int history_n = 0;
    double mean_ratio = 0.0;
    double mean_violation = 0.0;
    double heldout_mse = 0.0;
    double persistence_mse = 0.0;
};

// Trains one force model per N on the same dataset (re-windowed) and runs the
// constrained controller with each.
std::vector<AblationRow> ablate_history(const ExperimentConfig& config,
                                        const std::vector<TransitionSample>& dataset,
                                        int dataset_history_n, const GaussianPolicy& policy,
                                        const std::vector<int>& history_lengths,
                                        const std::string& out_dir);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

struct ReportOutput {
    std::vector<MethodSummary> summaries;
    std::string summary_csv;
    std::string forces_csv;
};

// Aggregates results.csv and extracts post-skip per-step forces from every
// stored trajectory into forces.csv (for density/box plots).
ReportOutput report(const std::string& out_dir, int skip_steps);

}  // namespace dressing
