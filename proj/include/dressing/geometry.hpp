#pragma once

#include <cstdint>
#include <vector>

#include "dressing/vec3.hpp"

namespace dressing {

struct Capsule {
    Vec3 endpoint_a;
    Vec3 endpoint_b;
    double radius = 0.0;
};

// Signed distance from p to the capsule surface; negative inside.
double signed_distance(const Capsule& capsule, const Vec3& p);

// Closest point on the segment [a,b] to p.
Vec3 closest_point_on_segment(const Vec3& a, const Vec3& b, const Vec3& p);

// Two-capsule arm: forearm (fingertip->elbow) and upper arm (elbow->shoulder).
// The fingertip->elbow->shoulder polyline is the dressing axis.
struct ArmModel {
    Vec3 fingertip;
    Vec3 elbow;
    Vec3 shoulder;
    double forearm_radius = 0.0;
    double upperarm_radius = 0.0;

    Capsule forearm() const { return {fingertip, elbow, forearm_radius}; }
    Capsule upperarm() const { return {elbow, shoulder, upperarm_radius}; }
    double forearm_length() const { return norm(elbow - fingertip); }
    double upperarm_length() const { return norm(shoulder - elbow); }
    double total_length() const { return forearm_length() + upperarm_length(); }
};

// Min signed distance over both arm capsules.
double signed_distance(const ArmModel& arm, const Vec3& p);

// Outward unit normal of the nearest arm capsule at p, and the penetration-free
// signed distance it corresponds to.
struct SurfaceQuery {
    double distance = 0.0;  // signed
    Vec3 normal;            // outward from the capsule axis
};
SurfaceQuery nearest_surface(const ArmModel& arm, const Vec3& p);

struct ArmPoseSpec {
    double shoulder_angle = 0.0;  // radians, elevation of shoulder->elbow from +x; <= 0 keeps the elbow non-upward
    double elbow_angle = 0.0;     // radians, bend of the forearm relative to the upper-arm line
    double forearm_length = 0.3;
    double upperarm_length = 0.3;
    double forearm_radius = 0.04;
    double upperarm_radius = 0.05;
};

// Forward kinematics in the x-z plane, shoulder at the origin.
ArmModel arm_from_pose(const ArmPoseSpec& spec);

// Recovers (shoulder_angle, elbow_angle) from an arm built by arm_from_pose.
struct ArmAngles {
    double shoulder_angle = 0.0;
    double elbow_angle = 0.0;
};
ArmAngles arm_angles(const ArmModel& arm);

// Arc length from the fingertip to the projection of p onto the
// fingertip->elbow->shoulder polyline, clamped to [0, total_length].
// Ties at the elbow resolve to the forearm segment.
double dressed_distance(const ArmModel& arm, const Vec3& garment_leading_point);

// Distance from p to the fingertip->elbow->shoulder axis polyline.
double distance_to_arm_axis(const ArmModel& arm, const Vec3& p);

// Deterministic point sample of the two capsule surfaces (cylindrical part),
// used for the static arm point cloud.
std::vector<Vec3> sample_arm_surface(const ArmModel& arm, int count, std::uint64_t seed);

}  // namespace dressing
