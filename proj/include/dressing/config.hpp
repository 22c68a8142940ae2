#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dressing/controllers.hpp"
#include "dressing/env.hpp"
#include "dressing/force_model.hpp"
#include "dressing/policy.hpp"

namespace dressing {

// Shortest round-trip decimal encoding; parsing it back is bit-exact.
std::string format_double(double v);
double parse_double(const std::string& s);

// Flat "[section]\nkey = value" configuration. Reading a missing key through
// a *_or accessor materializes the default into the map, so dumping after a
// full read yields the resolved configuration with nothing hidden.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::vector<std::string> sections_matching(const std::string& prefix) const;

    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback);
    double get_double_or(const std::string& key, double fallback);
    int get_int_or(const std::string& key, int fallback);
    std::vector<double> get_doubles_or(const std::string& key, const std::vector<double>& fallback);
    std::vector<int> get_ints_or(const std::string& key, const std::vector<int>& fallback);
    std::vector<std::string> get_strings_or(const std::string& key,
                                            const std::vector<std::string>& fallback);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // Sorted key=value dump, grouped into sections.
    std::string resolved() const;

private:
    std::map<std::string, std::string> values_;
};

// A pose region: per-field [lo, hi] ranges sampled uniformly per cell seed.
struct PoseRegion {
    ArmPoseSpec lo;
    ArmPoseSpec hi;
    ArmPoseSpec sample(Rng& rng) const;
};

struct ExperimentConfig {
    std::vector<PoseRegion> pose_regions;
    std::vector<SleeveTopology> garments;
    ClothParams sim_a;
    ClothParams sim_b;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;

    int horizon = 150;
    double tau = 25.0;
    double mixture_p = 0.1;
    int history_n = 5;
    int candidates = 64;
    int skip_steps = 25;
    int garment_point_count = 32;
    int arm_point_count = 32;
    double action_translation_scale = 0.012;
    double action_rotation_scale = 0.05;
    double gripper_lead_offset = 0.07;
    RewardParams reward;

    double sigma = 0.3;
    double scripted_speed = 0.6;
    double scripted_lift = 0.015;
    double scripted_stop_margin = 0.06;
    double demo_stop_margin = 0.015;
    PolicyArch arch;
    CemConfig cem;
    int bc_demos = 6;
    int bc_epochs = 150;
    double bc_lr = 1e-3;

    int collect_trajectories = 10;
    int collect_history_n = 7;
    ForceTrainOptions force_train;

    FinetuneConfig finetune;

    // Episode for a grid cell; sim B is the evaluation world.
    EpisodeConfig episode(int region, int garment, std::uint64_t seed, bool use_sim_b) const;

    // Deterministic factories cycling over the grid for training/collection.
    EnvConfigFactory env_factory(bool use_sim_b, std::uint64_t seed_salt) const;
};

ExperimentConfig experiment_config_from(ConfigMap& map);

}  // namespace dressing
