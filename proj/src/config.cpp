#include "dressing/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dressing {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument("bad floating-point value: '" + s + "'");
    return v;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream iss(s);
    std::vector<std::string> parts;
    std::string tok;
    while (iss >> tok) parts.push_back(tok);
    return parts;
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
        map.values_[section.empty() ? key : section + "." + key] = value;
    }
    return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

std::vector<std::string> ConfigMap::sections_matching(const std::string& prefix) const {
    std::set<std::string> found;
    for (const auto& [key, _] : values_) {
        if (key.rfind(prefix, 0) == 0) {
            std::size_t dot = key.find('.', prefix.size());
            if (dot != std::string::npos) found.insert(key.substr(0, dot));
        }
    }
    return {found.begin(), found.end()};
}

std::string ConfigMap::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing config key: " + key);
    return it->second;
}

std::string ConfigMap::get_string_or(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        values_[key] = fallback;
        return fallback;
    }
    return it->second;
}

double ConfigMap::get_double_or(const std::string& key, double fallback) {
    return parse_double(get_string_or(key, format_double(fallback)));
}

int ConfigMap::get_int_or(const std::string& key, int fallback) {
    std::string s = get_string_or(key, std::to_string(fallback));
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + ": bad integer '" + s + "'");
    }
}

std::vector<double> ConfigMap::get_doubles_or(const std::string& key,
                                              const std::vector<double>& fallback) {
    if (!has(key)) {
        std::string joined;
        for (double v : fallback) {
            if (!joined.empty()) joined += " ";
            joined += format_double(v);
        }
        values_[key] = joined;
        return fallback;
    }
    std::vector<double> out;
    for (const std::string& tok : split_ws(values_.at(key))) out.push_back(parse_double(tok));
    return out;
}

std::vector<int> ConfigMap::get_ints_or(const std::string& key, const std::vector<int>& fallback) {
    if (!has(key)) {
        std::string joined;
        for (int v : fallback) {
            if (!joined.empty()) joined += " ";
            joined += std::to_string(v);
        }
        values_[key] = joined;
        return fallback;
    }
    std::vector<int> out;
    for (const std::string& tok : split_ws(values_.at(key))) out.push_back(std::stoi(tok));
    return out;
}

std::vector<std::string> ConfigMap::get_strings_or(const std::string& key,
                                                   const std::vector<std::string>& fallback) {
    if (!has(key)) {
        std::string joined;
        for (const std::string& v : fallback) {
            if (!joined.empty()) joined += " ";
            joined += v;
        }
        values_[key] = joined;
        return fallback;
    }
    return split_ws(values_.at(key));
}

std::string ConfigMap::resolved() const {
    // std::map iteration is already sorted by key; emit section headers lazily
    std::ostringstream out;
    std::string current_section;
    bool first = true;
    for (const auto& [key, value] : values_) {
        std::size_t dot = key.rfind('.');
        std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        if (section != current_section || first) {
            if (!first) out << "\n";
            if (!section.empty()) out << "[" << section << "]\n";
            current_section = section;
            first = false;
        }
        out << name << " = " << value << "\n";
    }
    return out.str();
}

ArmPoseSpec PoseRegion::sample(Rng& rng) const {
    ArmPoseSpec spec;
    spec.shoulder_angle = uniform_range(rng, lo.shoulder_angle, hi.shoulder_angle);
    spec.elbow_angle = uniform_range(rng, lo.elbow_angle, hi.elbow_angle);
    spec.forearm_length = uniform_range(rng, lo.forearm_length, hi.forearm_length);
    spec.upperarm_length = uniform_range(rng, lo.upperarm_length, hi.upperarm_length);
    spec.forearm_radius = uniform_range(rng, lo.forearm_radius, hi.forearm_radius);
    spec.upperarm_radius = uniform_range(rng, lo.upperarm_radius, hi.upperarm_radius);
    return spec;
}

namespace {

ClothParams cloth_params_from(ConfigMap& map, const std::string& section,
                              const ClothParams& defaults) {
    ClothParams p;
    p.stretch_stiffness = map.get_double_or(section + ".stretch_stiffness", defaults.stretch_stiffness);
    p.shear_stiffness = map.get_double_or(section + ".shear_stiffness", defaults.shear_stiffness);
    p.damping = map.get_double_or(section + ".damping", defaults.damping);
    p.friction_coeff = map.get_double_or(section + ".friction", defaults.friction_coeff);
    p.contact_stiffness = map.get_double_or(section + ".contact_stiffness", defaults.contact_stiffness);
    p.particle_mass = map.get_double_or(section + ".particle_mass", defaults.particle_mass);
    p.dt = map.get_double_or(section + ".dt", defaults.dt);
    p.substeps = map.get_int_or(section + ".substeps", defaults.substeps);
    p.gravity = {0.0, 0.0, map.get_double_or(section + ".gravity_z", defaults.gravity.z)};
    p.blowup_speed = map.get_double_or(section + ".blowup_speed", defaults.blowup_speed);
    p.force_unit_scale = map.get_double_or(section + ".force_unit_scale", defaults.force_unit_scale);
    p.validate();
    return p;
}

PoseRegion pose_region_from(ConfigMap& map, const std::string& section) {
    auto range = [&](const std::string& key, double lo, double hi) {
        std::vector<double> v = map.get_doubles_or(section + "." + key, {lo, hi});
        if (v.size() == 1) v.push_back(v[0]);
        if (v.size() != 2 || v[0] > v[1])
            throw std::runtime_error("config key " + section + "." + key +
                                     ": expected 'min max' range");
        return std::pair<double, double>{v[0], v[1]};
    };
    PoseRegion region;
    auto [sa0, sa1] = range("shoulder_angle", -0.35, -0.15);
    auto [ea0, ea1] = range("elbow_angle", 0.6, 0.9);
    auto [fl0, fl1] = range("forearm_length", 0.27, 0.31);
    auto [ul0, ul1] = range("upperarm_length", 0.26, 0.3);
    auto [fr0, fr1] = range("forearm_radius", 0.032, 0.038);
    auto [ur0, ur1] = range("upperarm_radius", 0.04, 0.046);
    region.lo = {sa0, ea0, fl0, ul0, fr0, ur0};
    region.hi = {sa1, ea1, fl1, ul1, fr1, ur1};
    return region;
}

SleeveTopology garment_from(ConfigMap& map, const std::string& section) {
    int rings = map.get_int_or(section + ".rings", 8);
    int circumference = map.get_int_or(section + ".circumference", 8);
    double ring_radius = map.get_double_or(section + ".ring_radius", 0.065);
    double ring_spacing = map.get_double_or(section + ".ring_spacing", 0.035);
    return make_sleeve_topology(rings, circumference, ring_radius, ring_spacing);
}

}  // namespace

ExperimentConfig experiment_config_from(ConfigMap& map) {
    ExperimentConfig cfg;

    cfg.horizon = map.get_int_or("run.horizon", 150);
    cfg.tau = map.get_double_or("run.tau", 60.0);
    cfg.mixture_p = map.get_double_or("run.p", 0.1);
    cfg.history_n = map.get_int_or("run.history", 5);
    cfg.candidates = map.get_int_or("run.candidates", 64);
    cfg.skip_steps = map.get_int_or("run.skip_steps", 25);
    cfg.garment_point_count = map.get_int_or("run.garment_points", 48);
    cfg.arm_point_count = map.get_int_or("run.arm_points", 32);
    cfg.action_translation_scale = map.get_double_or("run.action_translation_scale", 0.015);
    cfg.action_rotation_scale = map.get_double_or("run.action_rotation_scale", 0.08);
    cfg.gripper_lead_offset = map.get_double_or("run.gripper_lead_offset", 0.07);
    cfg.methods = map.get_strings_or("run.methods", {"fcvp", "vision_only", "force_only"});
    std::vector<int> seeds = map.get_ints_or("run.seeds", {0, 1});
    for (int s : seeds) cfg.seeds.push_back(static_cast<std::uint64_t>(s));

    cfg.reward.progress_scale = map.get_double_or("reward.progress_scale", 10.0);
    cfg.reward.penetration_force_limit = map.get_double_or("reward.penetration_force_limit", 1000.0);
    cfg.reward.penetration_coeff = map.get_double_or("reward.penetration_coeff", 0.001);
    cfg.reward.contact_min_distance = map.get_double_or("reward.contact_min_distance", 0.01);
    cfg.reward.contact_penalty = map.get_double_or("reward.contact_penalty", 0.01);
    cfg.reward.deviation_near = map.get_double_or("reward.deviation_near", 0.03);
    cfg.reward.deviation_far = map.get_double_or("reward.deviation_far", 0.075);
    cfg.reward.deviation_bonus = map.get_double_or("reward.deviation_bonus", 0.02);
    cfg.reward.deviation_penalty = map.get_double_or("reward.deviation_penalty", 0.05);

    ClothParams base;
    cfg.sim_a = cloth_params_from(map, "sim_a", base);
    ClothParams sim_b_default = cfg.sim_a;
    sim_b_default.friction_coeff = cfg.sim_a.friction_coeff * 2.0;
    sim_b_default.stretch_stiffness = cfg.sim_a.stretch_stiffness * 1.5;
    sim_b_default.damping = cfg.sim_a.damping * 0.7;
    sim_b_default.contact_stiffness = cfg.sim_a.contact_stiffness * 2.5;
    cfg.sim_b = cloth_params_from(map, "sim_b", sim_b_default);

    std::vector<std::string> region_sections = map.sections_matching("region.");
    if (region_sections.empty()) region_sections = {"region.0"};
    for (const std::string& sec : region_sections) cfg.pose_regions.push_back(pose_region_from(map, sec));

    std::vector<std::string> garment_sections = map.sections_matching("garment.");
    if (garment_sections.empty()) garment_sections = {"garment.0"};
    for (const std::string& sec : garment_sections) cfg.garments.push_back(garment_from(map, sec));

    cfg.sigma = map.get_double_or("policy.sigma", 0.3);
    cfg.scripted_speed = map.get_double_or("policy.scripted_speed", 0.6);
    cfg.scripted_lift = map.get_double_or("policy.scripted_lift", 0.015);
    cfg.scripted_stop_margin = map.get_double_or("policy.scripted_stop_margin", 0.06);
    cfg.demo_stop_margin = map.get_double_or("policy.demo_stop_margin", 0.015);
    cfg.arch.per_point_hidden = map.get_ints_or("policy.per_point_hidden", {32, 64});
    cfg.arch.head_hidden = map.get_ints_or("policy.head_hidden", {64, 64});
    cfg.bc_demos = map.get_int_or("policy.bc_demos", 6);
    cfg.bc_epochs = map.get_int_or("policy.bc_epochs", 100);
    cfg.bc_lr = map.get_double_or("policy.bc_lr", 1e-3);

    cfg.cem.population = map.get_int_or("cem.population", 16);
    cfg.cem.elite_frac = map.get_double_or("cem.elite_frac", 0.25);
    cfg.cem.iterations = map.get_int_or("cem.iterations", 8);
    cfg.cem.eval_episodes = map.get_int_or("cem.eval_episodes", 2);
    cfg.cem.init_param_std = map.get_double_or("cem.init_param_std", 0.02);
    cfg.cem.sigma_floor = map.get_double_or("cem.sigma_floor", 1e-3);

    cfg.collect_trajectories = map.get_int_or("force_model.collect_trajectories", 20);
    cfg.collect_history_n = map.get_int_or("force_model.collect_history", 7);
    cfg.force_train.per_point_hidden = map.get_ints_or("force_model.per_point_hidden", {64, 128});
    cfg.force_train.head_hidden = map.get_ints_or("force_model.head_hidden", {128, 128});
    cfg.force_train.epochs = map.get_int_or("force_model.epochs", 300);
    cfg.force_train.patience = map.get_int_or("force_model.patience", 30);
    cfg.force_train.lr = map.get_double_or("force_model.lr", 5e-4);
    cfg.force_train.batch_size = map.get_int_or("force_model.batch", 32);
    cfg.force_train.holdout_frac = map.get_double_or("force_model.holdout_frac", 0.1);

    cfg.finetune.history_n = cfg.history_n;
    cfg.finetune.penalty_weight = map.get_double_or("finetune.penalty_weight", 0.5);
    cfg.finetune.tau = cfg.tau;
    cfg.finetune.sigma = cfg.sigma;
    cfg.finetune.arch = cfg.arch;
    cfg.finetune.cem.population = map.get_int_or("finetune.population", 12);
    cfg.finetune.cem.elite_frac = map.get_double_or("finetune.elite_frac", 0.25);
    cfg.finetune.cem.iterations = map.get_int_or("finetune.iterations", 6);
    cfg.finetune.cem.eval_episodes = map.get_int_or("finetune.eval_episodes", 2);
    cfg.finetune.cem.init_param_std = map.get_double_or("finetune.init_param_std", 0.02);
    cfg.finetune.cem.sigma_floor = cfg.cem.sigma_floor;

    if (cfg.methods.empty()) throw std::runtime_error("config: run.methods must be non-empty");
    if (cfg.seeds.empty()) throw std::runtime_error("config: run.seeds must be non-empty");
    return cfg;
}

EpisodeConfig ExperimentConfig::episode(int region, int garment, std::uint64_t seed,
                                        bool use_sim_b) const {
    if (region < 0 || region >= static_cast<int>(pose_regions.size()))
        throw std::out_of_range("episode: region index");
    if (garment < 0 || garment >= static_cast<int>(garments.size()))
        throw std::out_of_range("episode: garment index");

    EpisodeConfig ep;
    Rng rng(derive_seed(seed, "arm_pose", static_cast<std::uint64_t>(region)));
    ep.arm_spec = pose_regions[region].sample(rng);
    ep.cloth_params = use_sim_b ? sim_b : sim_a;
    ep.topology = garments[garment];
    ep.horizon = horizon;
    ep.force_threshold = tau;
    ep.action_translation_scale = action_translation_scale;
    ep.action_rotation_scale = action_rotation_scale;
    ep.gripper_lead_offset = gripper_lead_offset;
    ep.garment_point_count = garment_point_count;
    ep.arm_point_count = arm_point_count;
    ep.reward = reward;
    ep.seed = derive_seed(seed, "episode", static_cast<std::uint64_t>(region) * 1000 + garment);
    return ep;
}

EnvConfigFactory ExperimentConfig::env_factory(bool use_sim_b, std::uint64_t seed_salt) const {
    int regions = static_cast<int>(pose_regions.size());
    int garment_count = static_cast<int>(garments.size());
    ExperimentConfig copy = *this;
    return [copy, use_sim_b, seed_salt, regions, garment_count](int episode_index) {
        int cell = episode_index % (regions * garment_count);
        int region = cell / garment_count;
        int garment = cell % garment_count;
        std::uint64_t seed = derive_seed(seed_salt, "factory", static_cast<std::uint64_t>(episode_index));
        return copy.episode(region, garment, seed, use_sim_b);
    };
}

}  // namespace dressing
