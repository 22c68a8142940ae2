#include "dressing/geometry.hpp"

#include <algorithm>
#include <stdexcept>

#include "dressing/rng.hpp"

namespace dressing {

Vec3 closest_point_on_segment(const Vec3& a, const Vec3& b, const Vec3& p) {
    Vec3 ab = b - a;
    double len_sq = norm_sq(ab);
    if (len_sq < 1e-24) return a;
    double t = dot(p - a, ab) / len_sq;
    t = std::clamp(t, 0.0, 1.0);
    return a + ab * t;
}

double signed_distance(const Capsule& capsule, const Vec3& p) {
    Vec3 c = closest_point_on_segment(capsule.endpoint_a, capsule.endpoint_b, p);
    return norm(p - c) - capsule.radius;
}

double signed_distance(const ArmModel& arm, const Vec3& p) {
    return std::min(signed_distance(arm.forearm(), p), signed_distance(arm.upperarm(), p));
}

SurfaceQuery nearest_surface(const ArmModel& arm, const Vec3& p) {
    Capsule caps[2] = {arm.forearm(), arm.upperarm()};
    SurfaceQuery best;
    bool first = true;
    for (const Capsule& c : caps) {
        Vec3 axis_point = closest_point_on_segment(c.endpoint_a, c.endpoint_b, p);
        double d = norm(p - axis_point) - c.radius;
        if (first || d < best.distance) {
            best.distance = d;
            Vec3 n = normalized(p - axis_point);
            // Point exactly on the axis has no well-defined normal; push along
            // a fixed direction so the contact response stays deterministic.
            if (norm_sq(n) == 0.0) n = {0.0, 0.0, 1.0};
            best.normal = n;
            first = false;
        }
    }
    return best;
}

ArmModel arm_from_pose(const ArmPoseSpec& spec) {
    if (spec.forearm_length <= 0.0 || spec.upperarm_length <= 0.0)
        throw std::invalid_argument("arm_from_pose: segment lengths must be positive");
    if (spec.forearm_radius <= 0.0 || spec.upperarm_radius <= 0.0)
        throw std::invalid_argument("arm_from_pose: radii must be positive");

    ArmModel arm;
    arm.shoulder = {0.0, 0.0, 0.0};
    Vec3 upper_dir{std::cos(spec.shoulder_angle), 0.0, std::sin(spec.shoulder_angle)};
    arm.elbow = arm.shoulder + upper_dir * spec.upperarm_length;
    double fore_angle = spec.shoulder_angle + spec.elbow_angle;
    Vec3 fore_dir{std::cos(fore_angle), 0.0, std::sin(fore_angle)};
    arm.fingertip = arm.elbow + fore_dir * spec.forearm_length;
    arm.forearm_radius = spec.forearm_radius;
    arm.upperarm_radius = spec.upperarm_radius;
    return arm;
}

ArmAngles arm_angles(const ArmModel& arm) {
    Vec3 u = arm.elbow - arm.shoulder;
    Vec3 f = arm.fingertip - arm.elbow;
    ArmAngles out;
    out.shoulder_angle = std::atan2(u.z, u.x);
    double fore_angle = std::atan2(f.z, f.x);
    double e = fore_angle - out.shoulder_angle;
    // wrap to (-pi, pi]
    while (e <= -M_PI) e += 2.0 * M_PI;
    while (e > M_PI) e -= 2.0 * M_PI;
    out.elbow_angle = e;
    return out;
}

double dressed_distance(const ArmModel& arm, const Vec3& p) {
    struct Segment {
        Vec3 a, b;
        double arc_start;
    };
    Segment segs[2] = {
        {arm.fingertip, arm.elbow, 0.0},
        {arm.elbow, arm.shoulder, arm.forearm_length()},
    };
    double best_dist_sq = 0.0;
    double best_arc = 0.0;
    bool first = true;
    for (const Segment& s : segs) {
        Vec3 c = closest_point_on_segment(s.a, s.b, p);
        double d_sq = norm_sq(p - c);
        if (first || d_sq < best_dist_sq) {  // strict '<': elbow ties stay on the forearm
            best_dist_sq = d_sq;
            best_arc = s.arc_start + norm(c - s.a);
            first = false;
        }
    }
    return std::clamp(best_arc, 0.0, arm.total_length());
}

double distance_to_arm_axis(const ArmModel& arm, const Vec3& p) {
    double d1 = norm(p - closest_point_on_segment(arm.fingertip, arm.elbow, p));
    double d2 = norm(p - closest_point_on_segment(arm.elbow, arm.shoulder, p));
    return std::min(d1, d2);
}

std::vector<Vec3> sample_arm_surface(const ArmModel& arm, int count, std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("sample_arm_surface: count must be positive");
    Rng rng(seed);
    Capsule caps[2] = {arm.forearm(), arm.upperarm()};
    double len0 = arm.forearm_length();
    double len1 = arm.upperarm_length();
    double total = len0 + len1;

    std::vector<Vec3> points;
    points.reserve(count);
    for (int i = 0; i < count; ++i) {
        double pick = uniform01(rng) * total;
        const Capsule& c = (pick < len0) ? caps[0] : caps[1];
        Vec3 axis = normalized(c.endpoint_b - c.endpoint_a);
        // orthonormal frame around the axis
        Vec3 ref = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 n1 = normalized(cross(axis, ref));
        Vec3 n2 = cross(axis, n1);
        double t = uniform01(rng);
        double phi = uniform01(rng) * 2.0 * M_PI;
        Vec3 center = c.endpoint_a + (c.endpoint_b - c.endpoint_a) * t;
        points.push_back(center + (n1 * std::cos(phi) + n2 * std::sin(phi)) * c.radius);
    }
    return points;
}

}  // namespace dressing
