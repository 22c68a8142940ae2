#include "dressing/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dressing {

namespace {

constexpr int kTrajectorySchemaVersion = 1;

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

void serialize_trajectory(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trajectory for writing: " + path);

    nlohmann::json header;
    header["schema_version"] = kTrajectorySchemaVersion;
    header["kind"] = "trajectory";
    header["arm_spec"] = {
        {"shoulder_angle", trajectory.arm_spec.shoulder_angle},
        {"elbow_angle", trajectory.arm_spec.elbow_angle},
        {"forearm_length", trajectory.arm_spec.forearm_length},
        {"upperarm_length", trajectory.arm_spec.upperarm_length},
        {"forearm_radius", trajectory.arm_spec.forearm_radius},
        {"upperarm_radius", trajectory.arm_spec.upperarm_radius},
    };
    header["arm_total_length"] = trajectory.arm_total_length;
    header["force_threshold"] = trajectory.force_threshold;
    header["horizon"] = trajectory.horizon;
    header["seed"] = trajectory.seed;
    out << header.dump() << "\n";

    for (const TrajectoryStep& s : trajectory.steps) {
        nlohmann::json j;
        j["step"] = s.step;
        std::ostringstream hash;
        hash << std::hex << s.observation_hash;
        j["obs_hash"] = hash.str();
        j["action"] = s.action.to_array();
        j["force"] = vec3_json(s.force_vector);
        j["force_mag"] = s.force_magnitude;
        j["reward"] = {{"r_m", s.reward.r_m},
                       {"r_p", s.reward.r_p},
                       {"r_c", s.reward.r_c},
                       {"r_d", s.reward.r_d},
                       {"total", s.reward.total()}};
        j["dressed"] = s.dressed;
        j["eef_distance"] = s.eef_distance;
        j["garment_axis_distance"] = s.garment_axis_distance;
        j["fault"] = s.fault;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("trajectory write failed: " + path);
}

Trajectory deserialize_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory: " + path);
    std::string line;
    int line_no = 0;

    auto parse_line = [&](const std::string& text) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed trajectory line: " + e.what());
        }
    };

    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty trajectory file");
    ++line_no;
    nlohmann::json header = parse_line(line);
    if (!header.contains("kind") || header.at("kind").get<std::string>() != "trajectory")
        throw std::runtime_error(path + ": not a trajectory file");
    if (header.at("schema_version").get<int>() != kTrajectorySchemaVersion)
        throw std::runtime_error(path + ": unsupported trajectory schema version " +
                                 std::to_string(header.at("schema_version").get<int>()));

    Trajectory traj;
    const nlohmann::json& spec = header.at("arm_spec");
    traj.arm_spec.shoulder_angle = spec.at("shoulder_angle").get<double>();
    traj.arm_spec.elbow_angle = spec.at("elbow_angle").get<double>();
    traj.arm_spec.forearm_length = spec.at("forearm_length").get<double>();
    traj.arm_spec.upperarm_length = spec.at("upperarm_length").get<double>();
    traj.arm_spec.forearm_radius = spec.at("forearm_radius").get<double>();
    traj.arm_spec.upperarm_radius = spec.at("upperarm_radius").get<double>();
    traj.arm_total_length = header.at("arm_total_length").get<double>();
    traj.force_threshold = header.at("force_threshold").get<double>();
    traj.horizon = header.at("horizon").get<int>();
    traj.seed = header.at("seed").get<std::uint64_t>();

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = parse_line(line);
        TrajectoryStep s;
        s.step = j.at("step").get<int>();
        s.observation_hash = std::stoull(j.at("obs_hash").get<std::string>(), nullptr, 16);
        auto a = j.at("action").get<std::array<double, 6>>();
        s.action = Action::from_array(a);
        s.force_vector = vec3_from(j.at("force"));
        s.force_magnitude = j.at("force_mag").get<double>();
        s.reward.r_m = j.at("reward").at("r_m").get<double>();
        s.reward.r_p = j.at("reward").at("r_p").get<double>();
        s.reward.r_c = j.at("reward").at("r_c").get<double>();
        s.reward.r_d = j.at("reward").at("r_d").get<double>();
        s.dressed = j.at("dressed").get<double>();
        s.eef_distance = j.at("eef_distance").get<double>();
        s.garment_axis_distance = j.at("garment_axis_distance").get<double>();
        s.fault = j.at("fault").get<bool>();
        traj.steps.push_back(s);
    }
    return traj;
}

}  // namespace dressing
