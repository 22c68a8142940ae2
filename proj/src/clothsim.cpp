#include "dressing/clothsim.hpp"

#include <algorithm>
#include <stdexcept>

#include "dressing/rng.hpp"

namespace dressing {

void ClothParams::validate() const {
    if (stretch_stiffness <= 0.0 || shear_stiffness <= 0.0 || contact_stiffness <= 0.0)
        throw std::invalid_argument("ClothParams: stiffnesses must be positive");
    if (particle_mass <= 0.0) throw std::invalid_argument("ClothParams: particle_mass must be positive");
    if (dt <= 0.0) throw std::invalid_argument("ClothParams: dt must be positive");
    if (substeps < 1) throw std::invalid_argument("ClothParams: substeps must be >= 1");
    if (friction_coeff < 0.0) throw std::invalid_argument("ClothParams: friction_coeff must be >= 0");
    if (damping < 0.0) throw std::invalid_argument("ClothParams: damping must be >= 0");
    if (force_unit_scale <= 0.0)
        throw std::invalid_argument("ClothParams: force_unit_scale must be positive");
}

SleeveTopology make_sleeve_topology(int rings, int circumference, double ring_radius,
                                    double ring_spacing) {
    if (rings < 2) throw std::invalid_argument("sleeve topology: rings must be >= 2");
    if (circumference < 3) throw std::invalid_argument("sleeve topology: circumference must be >= 3");
    if (ring_radius <= 0.0 || ring_spacing <= 0.0)
        throw std::invalid_argument("sleeve topology: ring_radius and ring_spacing must be positive");

    SleeveTopology topo;
    topo.rings = rings;
    topo.circumference = circumference;
    topo.ring_radius = ring_radius;
    topo.ring_spacing = ring_spacing;

    auto canonical = [&](int r, int c) -> Vec3 {
        double phi = 2.0 * M_PI * c / circumference;
        return {r * ring_spacing, ring_radius * std::cos(phi), ring_radius * std::sin(phi)};
    };
    auto add = [&](int r0, int c0, int r1, int c1, SpringKind kind) {
        Spring s;
        s.a = topo.index(r0, (c0 + circumference) % circumference);
        s.b = topo.index(r1, (c1 + circumference) % circumference);
        s.rest_length = norm(canonical(r1, (c1 + circumference) % circumference) -
                             canonical(r0, (c0 + circumference) % circumference));
        s.kind = kind;
        topo.springs.push_back(s);
    };

    for (int r = 0; r < rings; ++r)
        for (int c = 0; c < circumference; ++c) {
            add(r, c, r, c + 1, SpringKind::kStretch);  // around the ring
            if (r + 1 < rings) {
                add(r, c, r + 1, c, SpringKind::kStretch);  // along the axis
                add(r, c, r + 1, c + 1, SpringKind::kShear);
                add(r, c + 1, r + 1, c, SpringKind::kShear);
            }
        }
    return topo;
}

Vec3 spring_force(const Vec3& pa, const Vec3& pb, double rest_length, double stiffness) {
    Vec3 d = pb - pa;
    double len = norm(d);
    if (len < 1e-12) return {0.0, 0.0, 0.0};
    return d * (stiffness * (len - rest_length) / len);
}

Sleeve build_sleeve(const SleeveTopology& topology, const ArmModel& arm, double lead_offset) {
    Sleeve sleeve;
    sleeve.topology = topology;

    Vec3 dressing_dir = normalized(arm.elbow - arm.fingertip);
    Vec3 ref = std::abs(dressing_dir.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 n1 = normalized(cross(dressing_dir, ref));
    Vec3 n2 = cross(dressing_dir, n1);

    Vec3 lead_center = arm.fingertip - dressing_dir * lead_offset;
    int count = topology.particle_count();
    sleeve.state.positions.resize(count);
    sleeve.state.velocities.assign(count, Vec3{});
    for (int r = 0; r < topology.rings; ++r) {
        Vec3 ring_center = lead_center - dressing_dir * (r * topology.ring_spacing);
        for (int c = 0; c < topology.circumference; ++c) {
            double phi = 2.0 * M_PI * c / topology.circumference;
            sleeve.state.positions[topology.index(r, c)] =
                ring_center + (n1 * std::cos(phi) + n2 * std::sin(phi)) * topology.ring_radius;
        }
    }

    for (const Vec3& p : sleeve.state.positions)
        if (signed_distance(arm, p) < 0.0)
            throw std::runtime_error("build_sleeve: initial placement penetrates the arm");

    // Gripper sits at the leading ring center; ring 0 is grasped.
    sleeve.gripper.position = lead_center;
    sleeve.gripper.orientation.c0 = n1;
    sleeve.gripper.orientation.c1 = n2;
    sleeve.gripper.orientation.c2 = dressing_dir;
    sleeve.gripper.attached = true;

    for (int c = 0; c < topology.circumference; ++c) {
        int idx = topology.index(0, c);
        sleeve.state.grasped_indices.push_back(idx);
        Vec3 world_offset = sleeve.state.positions[idx] - sleeve.gripper.position;
        sleeve.grasp_anchors.push_back(sleeve.gripper.orientation.transposed() * world_offset);
    }
    return sleeve;
}

StepResult step_cloth(Sleeve& sleeve, const ClothParams& params, const RigidDelta& gripper_delta,
                      const ArmModel& arm) {
    params.validate();
    ClothState& st = sleeve.state;
    const SleeveTopology& topo = sleeve.topology;
    const int n = static_cast<int>(st.positions.size());
    const double dt = params.dt;
    const double inv_mass = 1.0 / params.particle_mass;

    std::vector<char> pinned(n, 0);
    if (sleeve.gripper.attached)
        for (int idx : st.grasped_indices) pinned[idx] = 1;

    const double sub_frac = 1.0 / params.substeps;
    const Vec3 sub_translation = gripper_delta.translation * sub_frac;
    const Mat3 sub_rotation = Mat3::from_axis_angle(gripper_delta.rotation * sub_frac);

    std::vector<Vec3> forces(n);
    Vec3 arm_force_accum{};
    StepResult result;

    for (int sub = 0; sub < params.substeps; ++sub) {
        for (int i = 0; i < n; ++i) forces[i] = params.gravity * params.particle_mass;

        for (const Spring& s : topo.springs) {
            double k = s.kind == SpringKind::kStretch ? params.stretch_stiffness
                                                      : params.shear_stiffness;
            Vec3 f = spring_force(st.positions[s.a], st.positions[s.b], s.rest_length, k);
            forces[s.a] += f;
            forces[s.b] -= f;
        }

        for (int i = 0; i < n; ++i) forces[i] -= st.velocities[i] * params.damping;

        for (int i = 0; i < n; ++i) {
            SurfaceQuery q = nearest_surface(arm, st.positions[i]);
            if (q.distance >= 0.0) continue;
            double penetration = -q.distance;
            Vec3 normal_force = q.normal * (params.contact_stiffness * penetration);
            Vec3 friction_force{};
            Vec3 v_tan = st.velocities[i] - q.normal * dot(st.velocities[i], q.normal);
            double v_tan_norm = norm(v_tan);
            if (v_tan_norm > 1e-9 && params.friction_coeff > 0.0) {
                // Coulomb limit, additionally capped so friction alone cannot
                // reverse the tangential motion within one substep.
                double cap = std::min(params.friction_coeff * norm(normal_force),
                                      params.particle_mass * v_tan_norm / dt);
                friction_force = v_tan * (-cap / v_tan_norm);
            }
            forces[i] += normal_force + friction_force;
            arm_force_accum -= (normal_force + friction_force);  // reaction on the arm
        }

        // Gripper advances a fraction of the delta each substep; grasped
        // particles track it rigidly with matching velocities.
        if (sleeve.gripper.attached) {
            sleeve.gripper.position += sub_translation;
            sleeve.gripper.orientation = sub_rotation * sleeve.gripper.orientation;
            for (std::size_t g = 0; g < st.grasped_indices.size(); ++g) {
                int idx = st.grasped_indices[g];
                Vec3 target = sleeve.gripper.position +
                              sleeve.gripper.orientation * sleeve.grasp_anchors[g];
                st.velocities[idx] = (target - st.positions[idx]) / dt;
                st.positions[idx] = target;
            }
        }

        for (int i = 0; i < n; ++i) {
            if (pinned[i]) continue;
            st.velocities[i] += forces[i] * (dt * inv_mass);
            st.positions[i] += st.velocities[i] * dt;
        }

        for (int i = 0; i < n; ++i) {
            if (!is_finite(st.positions[i]) || !is_finite(st.velocities[i]) ||
                norm(st.velocities[i]) > params.blowup_speed) {
                result.diverged = true;
            }
        }
        if (result.diverged) break;
    }

    result.force.vector = arm_force_accum * (sub_frac * params.force_unit_scale);
    result.force.magnitude = norm(result.force.vector);
    return result;
}

Vec3 total_spring_force(const Sleeve& sleeve, const ClothParams& params) {
    // Accumulate per particle exactly as the stepper does, then reduce.
    std::vector<Vec3> forces(sleeve.state.positions.size());
    for (const Spring& s : sleeve.topology.springs) {
        double k = s.kind == SpringKind::kStretch ? params.stretch_stiffness
                                                  : params.shear_stiffness;
        Vec3 f = spring_force(sleeve.state.positions[s.a], sleeve.state.positions[s.b],
                              s.rest_length, k);
        forces[s.a] += f;
        forces[s.b] -= f;
    }
    Vec3 sum{};
    for (const Vec3& f : forces) sum += f;
    return sum;
}

double kinetic_energy(const ClothState& state, double particle_mass) {
    double ke = 0.0;
    for (const Vec3& v : state.velocities) ke += 0.5 * particle_mass * norm_sq(v);
    return ke;
}

std::vector<Vec3> sample_garment_points(const ClothState& state, int n, std::uint64_t seed) {
    const int count = static_cast<int>(state.positions.size());
    if (n <= 0 || n > count)
        throw std::invalid_argument("sample_garment_points: n must be in [1, particle count]");
    std::vector<int> indices(count);
    for (int i = 0; i < count; ++i) indices[i] = i;
    Rng rng(seed);
    // partial Fisher-Yates: the first n entries are the sample
    for (int i = 0; i < n; ++i) {
        std::size_t j = i + uniform_index(rng, count - i);
        std::swap(indices[i], indices[j]);
    }
    std::vector<Vec3> points(n);
    for (int i = 0; i < n; ++i) points[i] = state.positions[indices[i]];
    return points;
}

Vec3 leading_ring_centroid(const Sleeve& sleeve) {
    Vec3 sum{};
    int c = sleeve.topology.circumference;
    for (int i = 0; i < c; ++i) sum += sleeve.state.positions[sleeve.topology.index(0, i)];
    return sum / static_cast<double>(c);
}

}  // namespace dressing
