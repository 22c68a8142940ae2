#include "dressing/env.hpp"

#include <cstring>
#include <stdexcept>

#include "dressing/rng.hpp"

namespace dressing {

PointSet Observation::to_point_set() const {
    PointSet ps;
    ps.dim = kFeatureDim;
    ps.count = static_cast<int>(garment_points.size() + arm_points.size()) + 1;
    ps.features.reserve(static_cast<std::size_t>(ps.count) * kFeatureDim);
    auto push = [&](const Vec3& p, double t0, double t1, double t2) {
        ps.features.insert(ps.features.end(), {p.x, p.y, p.z, t0, t1, t2});
    };
    for (const Vec3& p : garment_points) push(p, 1.0, 0.0, 0.0);
    for (const Vec3& p : arm_points) push(p, 0.0, 1.0, 0.0);
    push(eef_point, 0.0, 0.0, 1.0);
    return ps;
}

RewardBreakdown compute_reward(double force, double eef_distance, double garment_axis_distance,
                               double progress_delta, const RewardParams& params) {
    if (eef_distance < 0.0 || garment_axis_distance < 0.0)
        throw std::invalid_argument("compute_reward: distances must be non-negative");
    RewardBreakdown r;
    r.r_m = params.progress_scale * progress_delta;
    r.r_p = -params.penetration_coeff * std::max(force - params.penetration_force_limit, 0.0);
    r.r_c = eef_distance < params.contact_min_distance ? -params.contact_penalty : 0.0;
    if (garment_axis_distance < params.deviation_near)
        r.r_d = params.deviation_bonus;
    else if (garment_axis_distance > params.deviation_far)
        r.r_d = -params.deviation_penalty;
    else
        r.r_d = 0.0;
    return r;
}

void EpisodeConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("EpisodeConfig: horizon must be >= 1");
    if (force_threshold <= 0.0)
        throw std::invalid_argument("EpisodeConfig: force_threshold must be positive");
    if (garment_point_count < 1 || arm_point_count < 1)
        throw std::invalid_argument("EpisodeConfig: point counts must be >= 1");
    if (action_translation_scale <= 0.0 || action_rotation_scale < 0.0)
        throw std::invalid_argument("EpisodeConfig: invalid action scales");
    cloth_params.validate();
}

Observation DressingEnv::reset(const EpisodeConfig& config) {
    config.validate();
    config_ = config;
    arm_ = arm_from_pose(config.arm_spec);
    sleeve_ = build_sleeve(config.topology, arm_, config.gripper_lead_offset);

    // Static arm cloud captured once, before the garment can occlude it.
    static_arm_points_ =
        sample_arm_surface(arm_, config.arm_point_count, derive_seed(config.seed, "arm_points"));

    int particle_count = sleeve_.topology.particle_count();
    int n = std::min(config.garment_point_count, particle_count);
    std::vector<int> indices(particle_count);
    for (int i = 0; i < particle_count; ++i) indices[i] = i;
    Rng rng(derive_seed(config.seed, "garment_points"));
    for (int i = 0; i < n; ++i) {
        std::size_t j = i + uniform_index(rng, particle_count - i);
        std::swap(indices[i], indices[j]);
    }
    garment_sample_indices_.assign(indices.begin(), indices.begin() + n);

    last_dressed_ = dressed();
    step_count_ = 0;
    done_ = false;
    fault_ = false;
    return observe();
}

Observation DressingEnv::observe() const {
    Observation obs;
    obs.garment_points.reserve(garment_sample_indices_.size());
    for (int idx : garment_sample_indices_)
        obs.garment_points.push_back(sleeve_.state.positions[idx]);
    obs.arm_points = static_arm_points_;
    obs.eef_point = sleeve_.gripper.position;
    return obs;
}

StepOutput DressingEnv::step(const Action& action) {
    if (done_) throw std::logic_error("DressingEnv::step called on a finished episode");

    Action a = action.clamped();
    RigidDelta delta;
    delta.translation = a.translation * config_.action_translation_scale;
    delta.rotation = a.rotation * config_.action_rotation_scale;

    StepResult sim = step_cloth(sleeve_, config_.cloth_params, delta, arm_);
    step_count_ += 1;

    StepOutput out;
    out.force = sim.force;
    out.fault = sim.diverged;
    out.dressed = dressed();
    out.eef_distance = std::max(0.0, signed_distance(arm_, sleeve_.gripper.position));
    out.garment_axis_distance = distance_to_arm_axis(arm_, leading_ring_centroid(sleeve_));
    out.reward = compute_reward(sim.force.magnitude, out.eef_distance, out.garment_axis_distance,
                                out.dressed - last_dressed_, config_.reward);
    last_dressed_ = out.dressed;

    done_ = sim.diverged || step_count_ >= config_.horizon;
    fault_ = sim.diverged;
    out.done = done_;
    out.observation = observe();
    return out;
}

double arm_dressed_ratio(const Trajectory& trajectory) {
    if (trajectory.steps.empty()) throw std::invalid_argument("arm_dressed_ratio: empty trajectory");
    if (trajectory.arm_total_length <= 0.0)
        throw std::invalid_argument("arm_dressed_ratio: invalid arm length");
    double ratio = trajectory.steps.back().dressed / trajectory.arm_total_length;
    return std::clamp(ratio, 0.0, 1.0);
}

double average_force_violation(const std::vector<double>& forces, double tau, int skip) {
    if (static_cast<int>(forces.size()) <= skip)
        throw std::invalid_argument("average_force_violation: trajectory shorter than skip window");
    double sum = 0.0;
    int count = 0;
    for (std::size_t t = static_cast<std::size_t>(skip); t < forces.size(); ++t) {
        sum += std::max(0.0, forces[t] - tau);
        count += 1;
    }
    return sum / count;
}

double average_force_violation(const Trajectory& trajectory, double tau, int skip) {
    std::vector<double> forces;
    forces.reserve(trajectory.steps.size());
    for (const TrajectoryStep& s : trajectory.steps) forces.push_back(s.force_magnitude);
    return average_force_violation(forces, tau, skip);
}

std::uint64_t observation_hash(const Observation& obs) {
    // FNV-1a over the raw feature bytes.
    PointSet ps = obs.to_point_set();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : ps.features) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace dressing
