#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dressing/env.hpp"
#include "dressing/neural.hpp"
#include "dressing/policy.hpp"
#include "dressing/types.hpp"

namespace dressing {

// Learned regressor (observation, force history, action) -> next-step force
// magnitude. Targets are z-scored inside training; predictions come back in
// raw sim units.
struct ForceModel {
    MlpModel core;  // extras = 3*history_n (history) ++ 6 (action)
    int history_n = 5;
    double target_mean = 0.0;
    double target_std = 1.0;

    double predict(const Observation& obs, const ForceHistory& history, const Action& a) const;
};

// With probability p a uniform action from the cube, otherwise a policy
// sample. `used_uniform` (optional) reports which branch was taken.
Action mixture_sample(const ActionProposer& policy, const Observation& obs,
                      const ForceHistory& history, double p, Rng& rng,
                      bool* used_uniform = nullptr);

struct TransitionSample {
    Observation observation;
    std::vector<Vec3> history;  // newest-first force vectors, length = collect history
    Action action;
    double target = 0.0;  // next-step force magnitude

    ForceHistory history_window(int n) const;
};

struct CollectOptions {
    int trajectories = 8;
    double p = 0.1;       // uniform mixture probability
    int history_n = 7;    // window stored with each sample
    std::uint64_t seed = 0;
};

struct CollectResult {
    std::vector<TransitionSample> samples;
    std::vector<Trajectory> trajectories;  // kept for replay checks and logging
    int dropped_episodes = 0;              // diverged rollouts, excluded from samples
};

// Rolls out mixture-sampled actions and emits one aligned sample per step
// after the first: the stored window holds the forces measured before the
// step's action, the target is the force that action produced.
CollectResult collect_dataset(const EnvConfigFactory& env_factory, const ActionProposer& policy,
                              const CollectOptions& options);

struct ForceTrainOptions {
    std::vector<int> per_point_hidden{32, 64};
    std::vector<int> head_hidden{64, 64};
    int epochs = 600;
    int patience = 25;  // early stop on held-out MSE; <= 0 trains all epochs
    double lr = 5e-4;
    int batch_size = 32;
    double holdout_frac = 0.1;
    std::uint64_t seed = 0;
};

struct ForceTrainResult {
    ForceModel model;
    double heldout_mse = 0.0;      // raw sim units
    double persistence_mse = 0.0;  // predict f_{t+1} = f_t on the same split
    std::vector<double> loss_curve;
    int epochs_run = 0;
};

// 90/10 train/held-out split (seeded), early stopping, and the persistence
// baseline every learned model must beat. `n` may be smaller than the stored
// window; the newest n entries are used.
ForceTrainResult train_force_model(const std::vector<TransitionSample>& dataset, int n,
                                   const ForceTrainOptions& options);

// Dataset file I/O: JSON lines with a schema-version header record.
void save_dataset(const std::vector<TransitionSample>& samples, int history_n,
                  const std::string& path);
std::vector<TransitionSample> load_dataset(const std::string& path, int* history_n = nullptr);

void save_force_model(const ForceModel& model, const std::string& path);
ForceModel load_force_model(const std::string& path);

}  // namespace dressing
