#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dressing/clothsim.hpp"
#include "dressing/geometry.hpp"
#include "dressing/types.hpp"

namespace dressing {

struct RewardParams {
    double progress_scale = 10.0;          // r_m per meter of dressed progress
    double penetration_force_limit = 1000; // force past which r_p penalizes
    double penetration_coeff = 0.001;
    double contact_min_distance = 0.01;    // eef closer than this to the arm costs r_c
    double contact_penalty = 0.01;
    double deviation_near = 0.03;          // sleeve center within this of the axis earns the bonus
    double deviation_far = 0.075;          // beyond this it is penalized
    double deviation_bonus = 0.02;
    double deviation_penalty = 0.05;
};

struct RewardBreakdown {
    double r_m = 0.0;  // progress
    double r_p = 0.0;  // penetration-level force penalty
    double r_c = 0.0;  // eef-too-close penalty
    double r_d = 0.0;  // sleeve deviation term
    double total() const { return r_m + r_p + r_c + r_d; }
};

RewardBreakdown compute_reward(double force, double eef_distance, double garment_axis_distance,
                               double progress_delta, const RewardParams& params = {});

struct EpisodeConfig {
    int horizon = 150;
    double force_threshold = 60.0;  // tau, sim units
    ArmPoseSpec arm_spec;
    ClothParams cloth_params;
    SleeveTopology topology;
    double action_translation_scale = 0.015;  // meters per unit action
    double action_rotation_scale = 0.08;      // radians per unit action
    double gripper_lead_offset = 0.07;        // initial gap between gripper and fingertip
    int garment_point_count = 32;
    int arm_point_count = 32;
    RewardParams reward;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StepOutput {
    Observation observation;
    RewardBreakdown reward;
    ForceRecord force;
    bool done = false;
    bool fault = false;  // simulator divergence
    double dressed = 0.0;
    double eef_distance = 0.0;
    double garment_axis_distance = 0.0;
};

// One dressing episode: a sleeve grasped at the fingertip end of a static arm,
// advanced by delta end-effector actions.
class DressingEnv {
public:
    Observation reset(const EpisodeConfig& config);
    StepOutput step(const Action& action);

    bool done() const { return done_; }
    int step_count() const { return step_count_; }
    const ArmModel& arm() const { return arm_; }
    const Sleeve& sleeve() const { return sleeve_; }
    const EpisodeConfig& config() const { return config_; }
    double dressed() const { return dressed_distance(arm_, leading_ring_centroid(sleeve_)); }

    Observation observe() const;

private:
    EpisodeConfig config_;
    ArmModel arm_;
    Sleeve sleeve_;
    std::vector<Vec3> static_arm_points_;
    std::vector<int> garment_sample_indices_;
    double last_dressed_ = 0.0;
    int step_count_ = 0;
    bool done_ = true;
    bool fault_ = false;
};

// Per-step record used for logging, metrics, and dataset building.
struct TrajectoryStep {
    int step = 0;
    std::uint64_t observation_hash = 0;
    Action action;
    Vec3 force_vector;
    double force_magnitude = 0.0;
    RewardBreakdown reward;
    double dressed = 0.0;
    double eef_distance = 0.0;
    double garment_axis_distance = 0.0;
    bool fault = false;
};

struct Trajectory {
    ArmPoseSpec arm_spec;
    double arm_total_length = 0.0;
    double force_threshold = 0.0;
    int horizon = 0;
    std::uint64_t seed = 0;
    std::vector<TrajectoryStep> steps;
};

// Final dressed distance over total arm length, in [0, 1].
double arm_dressed_ratio(const Trajectory& trajectory);

// Mean of max(0, f_t - tau) over steps after the first `skip`. Throws if the
// trajectory has no post-skip steps.
double average_force_violation(const std::vector<double>& forces, double tau, int skip);
double average_force_violation(const Trajectory& trajectory, double tau, int skip);

std::uint64_t observation_hash(const Observation& obs);

}  // namespace dressing
