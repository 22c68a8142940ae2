#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dressing/geometry.hpp"
#include "dressing/rng.hpp"

using namespace dressing;

TEST_CASE("capsule signed distance") {
    Capsule cap{{0, 0, 0}, {1, 0, 0}, 0.1};
    CHECK(signed_distance(cap, {0.5, 0.5, 0}) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(signed_distance(cap, {0.5, 0, 0}) == doctest::Approx(-0.1).epsilon(1e-12));
    // beyond the endpoint: distance to the end cap
    CHECK(signed_distance(cap, {2, 0, 0}) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("signed distance is 1-Lipschitz") {
    Capsule cap{{-0.2, 0.1, 0}, {0.4, 0.3, -0.2}, 0.07};
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
        Vec3 p{uniform_range(rng, -1, 1), uniform_range(rng, -1, 1), uniform_range(rng, -1, 1)};
        Vec3 eps{uniform_range(rng, -1e-3, 1e-3), uniform_range(rng, -1e-3, 1e-3),
                 uniform_range(rng, -1e-3, 1e-3)};
        double d0 = signed_distance(cap, p);
        double d1 = signed_distance(cap, p + eps);
        CHECK(std::abs(d1 - d0) <= norm(eps) + 1e-12);
    }
}

TEST_CASE("arm_from_pose straight arm is collinear") {
    ArmPoseSpec spec;
    spec.shoulder_angle = 0.0;
    spec.elbow_angle = 0.0;
    spec.forearm_length = 0.3;
    spec.upperarm_length = 0.25;
    ArmModel arm = arm_from_pose(spec);

    Vec3 u = normalized(arm.elbow - arm.shoulder);
    Vec3 f = normalized(arm.fingertip - arm.elbow);
    CHECK(norm(cross(u, f)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(arm.total_length() == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("arm_from_pose preserves segment lengths") {
    ArmPoseSpec spec;
    spec.shoulder_angle = -0.3;
    spec.elbow_angle = M_PI / 2.0;
    spec.forearm_length = 0.28;
    spec.upperarm_length = 0.26;
    ArmModel arm = arm_from_pose(spec);
    CHECK(arm.upperarm_length() == doctest::Approx(0.26).epsilon(1e-12));
    CHECK(arm.forearm_length() == doctest::Approx(0.28).epsilon(1e-12));
}

TEST_CASE("arm_from_pose inverse kinematics round-trip") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        ArmPoseSpec spec;
        spec.shoulder_angle = uniform_range(rng, -0.9, 0.0);
        spec.elbow_angle = uniform_range(rng, -0.2, 1.4);
        spec.forearm_length = uniform_range(rng, 0.2, 0.4);
        spec.upperarm_length = uniform_range(rng, 0.2, 0.4);
        ArmModel arm = arm_from_pose(spec);
        ArmAngles angles = arm_angles(arm);
        CHECK(angles.shoulder_angle == doctest::Approx(spec.shoulder_angle).epsilon(1e-9));
        CHECK(angles.elbow_angle == doctest::Approx(spec.elbow_angle).epsilon(1e-9));
        CHECK(arm.forearm_length() == doctest::Approx(spec.forearm_length).epsilon(1e-9));
        CHECK(arm.upperarm_length() == doctest::Approx(spec.upperarm_length).epsilon(1e-9));
    }
}

TEST_CASE("arm_from_pose rejects bad specs") {
    ArmPoseSpec spec;
    spec.forearm_length = -0.1;
    CHECK_THROWS_AS(arm_from_pose(spec), std::invalid_argument);
    spec.forearm_length = 0.3;
    spec.upperarm_radius = 0.0;
    CHECK_THROWS_AS(arm_from_pose(spec), std::invalid_argument);
}

namespace {

// polyline (0,0,0)->(0.3,0,0)->(0.3,0.3,0) as an arm
ArmModel bent_arm() {
    ArmModel arm;
    arm.fingertip = {0, 0, 0};
    arm.elbow = {0.3, 0, 0};
    arm.shoulder = {0.3, 0.3, 0};
    arm.forearm_radius = 0.03;
    arm.upperarm_radius = 0.03;
    return arm;
}

}  // namespace

TEST_CASE("dressed_distance on the polyline") {
    ArmModel arm = bent_arm();
    CHECK(dressed_distance(arm, {0.15, 0, 0}) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(dressed_distance(arm, {0.3, 0.1, 0}) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(dressed_distance(arm, {0.3, 5, 0}) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("dressed_distance is monotone along the polyline") {
    ArmModel arm = bent_arm();
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        double arc = 0.6 * i / 100.0;
        Vec3 p = arc <= 0.3 ? Vec3{arc, 0, 0} : Vec3{0.3, arc - 0.3, 0};
        // jitter slightly off-axis
        p.z = 0.01;
        double d = dressed_distance(arm, p);
        CHECK(d >= prev - 1e-12);
        prev = d;
    }
}

TEST_CASE("dressed_distance elbow tie resolves to the forearm") {
    ArmModel arm = bent_arm();
    // equidistant to both segments at the corner bisector
    CHECK(dressed_distance(arm, {0.35, -0.05, 0}) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("sample_arm_surface is deterministic and on the surface") {
    ArmModel arm = bent_arm();
    auto a = sample_arm_surface(arm, 64, 99);
    auto b = sample_arm_surface(arm, 64, 99);
    REQUIRE(a.size() == 64);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    for (const Vec3& p : a) {
        double d = signed_distance(arm, p);
        CHECK(std::abs(d) < 0.031);  // on one capsule, possibly inside the other near the elbow
    }
}
