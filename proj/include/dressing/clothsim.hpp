#pragma once

#include <cstdint>
#include <vector>

#include "dressing/geometry.hpp"
#include "dressing/vec3.hpp"

namespace dressing {

struct ClothParams {
    double stretch_stiffness = 300.0;   // force/length
    double shear_stiffness = 120.0;     // force/length
    double damping = 0.05;              // force*time/length, drag on particle velocity
    double friction_coeff = 0.3;        // Coulomb coefficient against the arm
    double contact_stiffness = 6e4;     // force/length penalty
    double particle_mass = 0.01;
    double dt = 2.5e-4;                 // substep timestep
    int substeps = 200;
    Vec3 gravity{0.0, 0.0, -9.81};
    double blowup_speed = 100.0;        // particle speed that flags divergence
    double force_unit_scale = 1.0;      // converts internal force to reported sim units

    void validate() const;
};

enum class SpringKind { kStretch, kShear };

struct Spring {
    int a = 0;
    int b = 0;
    double rest_length = 0.0;
    SpringKind kind = SpringKind::kStretch;
};

struct SleeveTopology {
    int rings = 0;          // R
    int circumference = 0;  // C
    double ring_radius = 0.0;
    double ring_spacing = 0.0;
    std::vector<Spring> springs;

    int particle_count() const { return rings * circumference; }
    int index(int ring, int c) const { return ring * circumference + c; }
};

// Tube topology: stretch springs along rings and along the axis, shear springs
// across the diagonals of each quad. Rest lengths from the undeformed tube.
SleeveTopology make_sleeve_topology(int rings, int circumference, double ring_radius,
                                    double ring_spacing);

struct ClothState {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<int> grasped_indices;  // pinned to the gripper
};

struct GripperState {
    Vec3 position;
    Mat3 orientation = Mat3::identity();
    bool attached = true;
};

// Hookean force on pa from the spring to pb. Degenerate (<1e-12) separations
// return zero force.
Vec3 spring_force(const Vec3& pa, const Vec3& pb, double rest_length, double stiffness);

struct ForceRecord {
    Vec3 vector;             // net contact force exerted on the arm (sim units)
    double magnitude = 0.0;  // |vector|
};

// The sleeve plus everything needed to step it: topology, gripper, and the
// grasped particles' offsets in the gripper frame.
struct Sleeve {
    SleeveTopology topology;
    ClothState state;
    GripperState gripper;
    std::vector<Vec3> grasp_anchors;  // gripper-frame offsets, one per grasped index
};

// Instantiates the sleeve coaxial with the forearm axis just beyond the
// fingertip, leading ring (ring 0) encircling the gripper. Throws if the
// initial placement penetrates the arm.
Sleeve build_sleeve(const SleeveTopology& topology, const ArmModel& arm, double lead_offset);

struct RigidDelta {
    Vec3 translation;
    Vec3 rotation;  // axis-angle
};

struct StepResult {
    ForceRecord force;
    bool diverged = false;
};

// Semi-implicit Euler over params.substeps. Grasped particles follow the
// gripper rigidly (when attached); contact with the arm is a penalty force
// along the capsule normal plus Coulomb-capped friction. The returned force is
// the substep-averaged net contact force on the arm.
StepResult step_cloth(Sleeve& sleeve, const ClothParams& params, const RigidDelta& gripper_delta,
                      const ArmModel& arm);

// Sum of all internal spring forces (diagnostic; zero up to roundoff).
Vec3 total_spring_force(const Sleeve& sleeve, const ClothParams& params);

double kinetic_energy(const ClothState& state, double particle_mass);

// Deterministic subsample (without repetition) of particle positions.
std::vector<Vec3> sample_garment_points(const ClothState& state, int n, std::uint64_t seed);

// Centroid of the leading (grasped) ring; the garment's leading point for
// dressed-distance measurements.
Vec3 leading_ring_centroid(const Sleeve& sleeve);

}  // namespace dressing
