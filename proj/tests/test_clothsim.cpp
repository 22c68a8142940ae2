#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dressing/clothsim.hpp"
#include "dressing/rng.hpp"

using namespace dressing;

namespace {

ArmModel test_arm() {
    ArmModel arm;
    arm.fingertip = {0, 0, 0};
    arm.elbow = {0.3, 0, 0};
    arm.shoulder = {0.52, 0.2, 0};
    arm.forearm_radius = 0.04;
    arm.upperarm_radius = 0.05;
    return arm;
}

ArmModel far_arm() {
    ArmModel arm = test_arm();
    Vec3 offset{100, 100, 100};
    arm.fingertip += offset;
    arm.elbow += offset;
    arm.shoulder += offset;
    return arm;
}

ClothParams quiet_params() {
    ClothParams p;
    p.gravity = {0, 0, 0};
    return p;
}

}  // namespace

TEST_CASE("spring_force basics") {
    // at rest length: zero
    Vec3 f = spring_force({0, 0, 0}, {1, 0, 0}, 1.0, 10.0);
    CHECK(norm(f) == doctest::Approx(0.0).epsilon(1e-15));

    // stretched: pulls pa toward pb with magnitude k * (d - rest)
    f = spring_force({0, 0, 0}, {1.2, 0, 0}, 1.0, 10.0);
    CHECK(f.x == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.y == doctest::Approx(0.0));

    // degenerate separation: zero force, no NaN
    f = spring_force({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, 1.0, 10.0);
    CHECK(f == Vec3{0, 0, 0});
}

TEST_CASE("spring_force obeys Newton's third law") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        Vec3 a{uniform_range(rng, -1, 1), uniform_range(rng, -1, 1), uniform_range(rng, -1, 1)};
        Vec3 b{uniform_range(rng, -1, 1), uniform_range(rng, -1, 1), uniform_range(rng, -1, 1)};
        double rest = uniform_range(rng, 0.1, 2.0);
        double k = uniform_range(rng, 1.0, 100.0);
        Vec3 fab = spring_force(a, b, rest, k);
        Vec3 fba = spring_force(b, a, rest, k);
        CHECK(norm(fab + fba) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("build_sleeve particle counting and grasp") {
    SleeveTopology topo = make_sleeve_topology(2, 3, 0.11, 0.035);
    Sleeve sleeve = build_sleeve(topo, test_arm(), 0.07);
    CHECK(sleeve.state.positions.size() == 6);
    CHECK(!sleeve.state.grasped_indices.empty());
}

TEST_CASE("build_sleeve starts penetration-free") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    ArmModel arm = test_arm();
    Sleeve sleeve = build_sleeve(topo, arm, 0.07);
    double worst = 0.0;
    for (const Vec3& p : sleeve.state.positions)
        worst = std::max(worst, -signed_distance(arm, p));
    CHECK(worst <= 0.0);
}

TEST_CASE("build_sleeve rest-length audit") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    Sleeve sleeve = build_sleeve(topo, test_arm(), 0.07);
    for (const Spring& s : sleeve.topology.springs) {
        double len = norm(sleeve.state.positions[s.a] - sleeve.state.positions[s.b]);
        CHECK(len == doctest::Approx(s.rest_length).epsilon(1e-6));
    }
}

TEST_CASE("every particle belongs to at least two springs") {
    SleeveTopology topo = make_sleeve_topology(4, 6, 0.1, 0.03);
    std::vector<int> degree(topo.particle_count(), 0);
    for (const Spring& s : topo.springs) {
        degree[s.a] += 1;
        degree[s.b] += 1;
    }
    for (int d : degree) CHECK(d >= 2);
}

TEST_CASE("step at equilibrium leaves the state unchanged") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    ArmModel arm = far_arm();
    Sleeve sleeve = build_sleeve(topo, arm, 0.07);
    Sleeve before = sleeve;
    StepResult r = step_cloth(sleeve, quiet_params(), {}, arm);
    CHECK(!r.diverged);
    CHECK(r.force.magnitude == 0.0);
    for (std::size_t i = 0; i < sleeve.state.positions.size(); ++i) {
        CHECK(norm(sleeve.state.positions[i] - before.state.positions[i]) < 1e-9);
        CHECK(norm(sleeve.state.velocities[i]) < 1e-9);
    }
}

TEST_CASE("contact-free step reports exactly zero force") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    ArmModel arm = far_arm();
    Sleeve sleeve = build_sleeve(topo, arm, 0.07);
    ClothParams params;  // gravity on: the tube sags but touches nothing
    for (int t = 0; t < 10; ++t) {
        StepResult r = step_cloth(sleeve, params, {}, arm);
        CHECK(r.force.magnitude == 0.0);
        CHECK(r.force.vector == Vec3{0, 0, 0});
    }
}

TEST_CASE("penetration produces positive force") {
    SleeveTopology topo = make_sleeve_topology(2, 3, 0.02, 0.02);
    ArmModel arm = test_arm();
    // hand-built system sitting inside the forearm capsule
    Sleeve sleeve;
    sleeve.topology = topo;
    sleeve.state.positions.assign(6, Vec3{});
    for (int i = 0; i < 6; ++i) sleeve.state.positions[i] = Vec3{0.15 + 0.001 * i, 0.0, 0.0};
    sleeve.state.velocities.assign(6, Vec3{});
    sleeve.state.grasped_indices = {0};
    sleeve.grasp_anchors = {Vec3{}};
    sleeve.gripper.position = sleeve.state.positions[0];
    sleeve.gripper.attached = true;

    ClothParams params = quiet_params();
    StepResult r = step_cloth(sleeve, params, {}, arm);
    CHECK(r.force.magnitude > 0.0);
}

TEST_CASE("single spring matches the closed-form damped oscillator") {
    // pinned anchor at the origin, one free particle on the x axis
    const double mass = 1.0, k = 25.0, c = 2.0, rest = 0.2, x0 = 0.1;
    Sleeve sleeve;
    sleeve.topology.rings = 1;
    sleeve.topology.circumference = 2;
    sleeve.topology.ring_radius = rest;
    sleeve.topology.ring_spacing = rest;
    sleeve.topology.springs = {{0, 1, rest, SpringKind::kStretch}};
    sleeve.state.positions = {{0, 0, 0}, {rest + x0, 0, 0}};
    sleeve.state.velocities = {{0, 0, 0}, {0, 0, 0}};
    sleeve.state.grasped_indices = {0};
    sleeve.grasp_anchors = {Vec3{}};
    sleeve.gripper.position = {0, 0, 0};
    sleeve.gripper.attached = true;

    ClothParams params;
    params.stretch_stiffness = k;
    params.damping = c;
    params.particle_mass = mass;
    params.dt = 1e-3;
    params.substeps = 1;
    params.gravity = {0, 0, 0};

    ArmModel arm = far_arm();
    const double gamma = c / (2.0 * mass);
    const double omega_d = std::sqrt(k / mass - gamma * gamma);
    double max_err = 0.0;
    for (int step = 1; step <= 100; ++step) {
        step_cloth(sleeve, params, {}, arm);
        double t = step * params.dt;
        double expected =
            std::exp(-gamma * t) * (x0 * std::cos(omega_d * t) +
                                    (gamma * x0 / omega_d) * std::sin(omega_d * t));
        double actual = sleeve.state.positions[1].x - rest;
        max_err = std::max(max_err, std::abs(actual - expected));
    }
    CHECK(max_err < 1e-3);
}

TEST_CASE("internal spring forces sum to zero") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    Sleeve sleeve = build_sleeve(topo, test_arm(), 0.07);
    Rng rng(11);
    ClothParams params;
    for (int trial = 0; trial < 20; ++trial) {
        for (Vec3& p : sleeve.state.positions)
            p += Vec3{uniform_range(rng, -0.02, 0.02), uniform_range(rng, -0.02, 0.02),
                      uniform_range(rng, -0.02, 0.02)};
        Vec3 sum = total_spring_force(sleeve, params);
        double bound = 1e-9 * sleeve.topology.springs.size() * params.stretch_stiffness;
        CHECK(norm(sum) < bound);
    }
}

TEST_CASE("kinetic energy is non-increasing under damping") {
    // detached sleeve in rigid translation: springs stay at rest length, drag
    // is the only force, so energy decays monotonically
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    ArmModel arm = far_arm();
    Sleeve sleeve = build_sleeve(topo, arm, 0.07);
    sleeve.gripper.attached = false;
    for (Vec3& v : sleeve.state.velocities) v = {0.05, -0.02, 0.03};

    ClothParams params = quiet_params();
    params.damping = 0.05;
    double prev = kinetic_energy(sleeve.state, params.particle_mass);
    CHECK(prev > 0.0);
    for (int t = 0; t < 50; ++t) {
        step_cloth(sleeve, params, {}, arm);
        double ke = kinetic_energy(sleeve.state, params.particle_mass);
        CHECK(ke <= prev + 1e-12);
        prev = ke;
    }
}

TEST_CASE("stepping is bit-deterministic") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    ArmModel arm = test_arm();
    ClothParams params;
    RigidDelta delta{{0.01, 0.002, -0.001}, {0.0, 0.01, 0.0}};

    Sleeve a = build_sleeve(topo, arm, 0.07);
    Sleeve b = build_sleeve(topo, arm, 0.07);
    for (int t = 0; t < 20; ++t) {
        step_cloth(a, params, delta, arm);
        step_cloth(b, params, delta, arm);
    }
    for (std::size_t i = 0; i < a.state.positions.size(); ++i) {
        CHECK(a.state.positions[i] == b.state.positions[i]);
        CHECK(a.state.velocities[i] == b.state.velocities[i]);
    }
}

TEST_CASE("blow-up is reported as divergence") {
    SleeveTopology topo = make_sleeve_topology(4, 4, 0.05, 0.02);
    ArmModel arm = far_arm();
    Sleeve sleeve = build_sleeve(topo, arm, 0.07);
    ClothParams params;
    params.stretch_stiffness = 1e9;  // far past the stable region
    params.dt = 0.1;
    params.substeps = 10;
    // pre-stretch so spring forces act
    sleeve.state.positions.back() += Vec3{0.5, 0, 0};
    StepResult r = step_cloth(sleeve, params, {}, arm);
    CHECK(r.diverged);
}

TEST_CASE("sample_garment_points determinism and membership") {
    SleeveTopology topo = make_sleeve_topology(8, 8, 0.11, 0.035);
    Sleeve sleeve = build_sleeve(topo, test_arm(), 0.07);

    auto all = sample_garment_points(sleeve.state, 64, 5);
    CHECK(all.size() == 64);

    auto a = sample_garment_points(sleeve.state, 10, 77);
    auto b = sample_garment_points(sleeve.state, 10, 77);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    for (const Vec3& p : a) {
        bool found = false;
        for (const Vec3& q : sleeve.state.positions)
            if (p == q) found = true;
        CHECK(found);
    }

    CHECK_THROWS_AS(sample_garment_points(sleeve.state, 65, 0), std::invalid_argument);
}
