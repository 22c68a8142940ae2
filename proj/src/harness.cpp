#include "dressing/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dressing/trajectory.hpp"

namespace fs = std::filesystem;

namespace dressing {

namespace {

class FcvpController : public Controller {
public:
    FcvpController(const GaussianPolicy& policy, const ForceModel& model,
                   const ExperimentConfig& config)
        : policy_(policy), model_(model) {
        fcvp_.candidates = config.candidates;
        fcvp_.force_threshold = config.tau;
        fcvp_.uniform_prob = config.mixture_p;
    }
    std::string name() const override { return "fcvp"; }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv&,
               Rng& rng) override {
        return fcvp_select(policy_, model_, obs, history, fcvp_, rng);
    }

private:
    const GaussianPolicy& policy_;
    const ForceModel& model_;
    FcvpConfig fcvp_;
};

class VisionOnlyController : public Controller {
public:
    explicit VisionOnlyController(const GaussianPolicy& policy) : policy_(policy) {}
    std::string name() const override { return "vision_only"; }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv&,
               Rng&) override {
        return vision_only_select(policy_, obs, history);
    }

private:
    const GaussianPolicy& policy_;
};

class VisionRandomController : public Controller {
public:
    VisionRandomController(const GaussianPolicy& policy, double p) : policy_(policy), p_(p) {}
    std::string name() const override { return "vision_random"; }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv&,
               Rng& rng) override {
        return vision_random_select(policy_, obs, history, p_, rng);
    }

private:
    const GaussianPolicy& policy_;
    double p_;
};

class ForceOnlyController : public Controller {
public:
    ForceOnlyController(const ForceModel& model, int candidates) : model_(model) {
        config_.candidates = candidates;
    }
    std::string name() const override { return "force_only"; }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv& env,
               Rng& rng) override {
        GarmentStage stage = garment_stage_for(env.arm(), env.dressed());
        return force_only_select(model_, obs, history, env.arm(), stage, config_, rng);
    }

private:
    const ForceModel& model_;
    ForceOnlyConfig config_;
};

class ScriptedController : public Controller {
public:
    ScriptedController(double speed, double lift, double stop_margin)
        : speed_(speed), lift_(lift), stop_margin_(stop_margin) {}
    std::string name() const override { return "scripted"; }
    void begin_episode(const DressingEnv& env, std::uint64_t) override {
        scripted_.emplace(env.arm(), speed_, lift_, env.config().action_translation_scale,
                          env.config().action_rotation_scale, stop_margin_);
    }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv&,
               Rng&) override {
        return scripted_->mean_action(obs, history);
    }

private:
    double speed_;
    double lift_;
    double stop_margin_;
    std::optional<ScriptedPolicy> scripted_;
};

class ProposerController : public Controller {
public:
    ProposerController(const ActionProposer& proposer, std::string name)
        : proposer_(proposer), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    Action act(const Observation& obs, const ForceHistory& history, const DressingEnv&,
               Rng&) override {
        return proposer_.mean_action(obs, history);
    }

private:
    const ActionProposer& proposer_;
    std::string name_;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::sqrt(var / v.size());
}

}  // namespace

std::unique_ptr<Controller> make_controller(const std::string& method,
                                            const ExperimentConfig& config,
                                            const EvalArtifacts& artifacts) {
    auto need_policy = [&]() -> const GaussianPolicy& {
        if (!artifacts.policy) throw std::runtime_error(method + ": needs a policy checkpoint");
        return *artifacts.policy;
    };
    auto need_force_model = [&]() -> const ForceModel& {
        if (!artifacts.force_model)
            throw std::runtime_error(method + ": needs a force model checkpoint");
        return *artifacts.force_model;
    };

    if (method == "fcvp")
        return std::make_unique<FcvpController>(need_policy(), need_force_model(), config);
    if (method == "vision_only") return std::make_unique<VisionOnlyController>(need_policy());
    if (method == "vision_random")
        return std::make_unique<VisionRandomController>(need_policy(), config.mixture_p);
    if (method == "force_only")
        return std::make_unique<ForceOnlyController>(need_force_model(), config.candidates);
    if (method == "scripted")
        return std::make_unique<ScriptedController>(config.scripted_speed, config.scripted_lift,
                                                    config.scripted_stop_margin);
    if (method == "multimodal") {
        if (!artifacts.multimodal)
            throw std::runtime_error("multimodal: needs a multimodal checkpoint");
        return std::make_unique<ProposerController>(*artifacts.multimodal, "multimodal");
    }
    if (method == "residual") {
        if (!artifacts.residual) throw std::runtime_error("residual: needs a residual checkpoint");
        return std::make_unique<ProposerController>(*artifacts.residual, "residual");
    }
    throw std::runtime_error("unknown method: " + method);
}

EpisodeRun run_episode(Controller& controller, const EpisodeConfig& config, int history_n,
                       std::uint64_t seed) {
    DressingEnv env;
    Observation obs = env.reset(config);
    controller.begin_episode(env, seed);
    Rng rng(derive_seed(seed, "controller"));
    ForceHistory history(history_n);

    EpisodeRun run;
    run.trajectory.arm_spec = config.arm_spec;
    run.trajectory.arm_total_length = env.arm().total_length();
    run.trajectory.force_threshold = config.force_threshold;
    run.trajectory.horizon = config.horizon;
    run.trajectory.seed = config.seed;

    int t = 0;
    while (!env.done()) {
        Action a = controller.act(obs, history, env, rng);
        StepOutput out = env.step(a);

        TrajectoryStep step;
        step.step = t;
        step.observation_hash = observation_hash(obs);
        step.action = a;
        step.force_vector = out.force.vector;
        step.force_magnitude = out.force.magnitude;
        step.reward = out.reward;
        step.dressed = out.dressed;
        step.eef_distance = out.eef_distance;
        step.garment_axis_distance = out.garment_axis_distance;
        step.fault = out.fault;
        run.trajectory.steps.push_back(step);

        run.total_reward += out.reward.total();
        run.fault = run.fault || out.fault;
        history.push(out.force.vector);
        obs = std::move(out.observation);
        ++t;
    }
    return run;
}

EvalOutput run_eval(const ExperimentConfig& config, const std::vector<std::string>& methods,
                    const EvalArtifacts& artifacts, const std::string& out_dir) {
    if (methods.empty()) throw std::runtime_error("run_eval: no methods requested");
    fs::create_directories(fs::path(out_dir) / "trajectories");

    EvalOutput output;
    for (const std::string& method : methods) {
        std::unique_ptr<Controller> controller = make_controller(method, config, artifacts);
        for (std::size_t r = 0; r < config.pose_regions.size(); ++r) {
            for (std::size_t g = 0; g < config.garments.size(); ++g) {
                for (std::uint64_t seed : config.seeds) {
                    EpisodeConfig ep = config.episode(static_cast<int>(r), static_cast<int>(g),
                                                      seed, /*use_sim_b=*/true);
                    std::uint64_t cell_seed =
                        derive_seed(seed, method + "/cell",
                                    r * 1000 + g * 10 + 1);
                    EpisodeRun run = run_episode(*controller, ep, config.history_n, cell_seed);

                    ResultRow row;
                    row.method = method;
                    row.pose_region = static_cast<int>(r);
                    row.garment_id = static_cast<int>(g);
                    row.seed = seed;
                    row.dressed_ratio = arm_dressed_ratio(run.trajectory);
                    // faulted episodes may end before the skip window; fall
                    // back to the whole trajectory so the row stays defined
                    int skip = static_cast<int>(run.trajectory.steps.size()) > config.skip_steps
                                   ? config.skip_steps
                                   : 0;
                    row.avg_violation = average_force_violation(run.trajectory, config.tau, skip);
                    row.episode_fault = run.fault;
                    output.rows.push_back(row);

                    std::ostringstream name;
                    name << method << "_r" << r << "_g" << g << "_s" << seed << ".jsonl";
                    std::string path = (fs::path(out_dir) / "trajectories" / name.str()).string();
                    serialize_trajectory(run.trajectory, path);
                    output.trajectory_files.push_back(path);
                }
            }
        }
    }
    write_results_csv(output.rows, (fs::path(out_dir) / "results.csv").string());
    return output;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open results csv for writing: " + path);
    out << "method,pose_region,garment_id,seed,dressed_ratio,avg_violation,episode_fault\n";
    for (const ResultRow& r : rows) {
        out << r.method << "," << r.pose_region << "," << r.garment_id << "," << r.seed << ","
            << format_double(r.dressed_ratio) << "," << format_double(r.avg_violation) << ","
            << (r.episode_fault ? 1 : 0) << "\n";
    }
    if (!out) throw std::runtime_error("results csv write failed: " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("results csv is empty: " + path);

    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        ResultRow r;
        std::getline(ss, r.method, ',');
        std::getline(ss, field, ',');
        r.pose_region = std::stoi(field);
        std::getline(ss, field, ',');
        r.garment_id = std::stoi(field);
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        std::getline(ss, field, ',');
        r.dressed_ratio = parse_double(field);
        std::getline(ss, field, ',');
        r.avg_violation = parse_double(field);
        std::getline(ss, field, ',');
        r.episode_fault = field == "1";
        rows.push_back(r);
    }
    return rows;
}

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw std::runtime_error("summarize: no rows");
    std::vector<std::string> method_order;
    std::map<std::string, std::vector<const ResultRow*>> by_method;
    for (const ResultRow& r : rows) {
        if (!by_method.count(r.method)) method_order.push_back(r.method);
        by_method[r.method].push_back(&r);
    }

    std::vector<MethodSummary> out;
    for (const std::string& method : method_order) {
        const auto& cells = by_method[method];
        MethodSummary s;
        s.method = method;
        s.cells = static_cast<int>(cells.size());
        std::vector<double> ratios, violations;
        std::map<int, std::vector<double>> region_ratios, region_violations;
        for (const ResultRow* r : cells) {
            ratios.push_back(r->dressed_ratio);
            violations.push_back(r->avg_violation);
            region_ratios[r->pose_region].push_back(r->dressed_ratio);
            region_violations[r->pose_region].push_back(r->avg_violation);
            if (r->episode_fault) s.faults += 1;
        }
        s.mean_ratio = mean_of(ratios);
        s.std_ratio_trials = std_of(ratios);
        s.mean_violation = mean_of(violations);
        s.std_violation_trials = std_of(violations);
        std::vector<double> region_ratio_means, region_violation_means;
        for (auto& [_, v] : region_ratios) region_ratio_means.push_back(mean_of(v));
        for (auto& [_, v] : region_violations) region_violation_means.push_back(mean_of(v));
        s.std_ratio_regions = std_of(region_ratio_means);
        s.std_violation_regions = std_of(region_violation_means);
        out.push_back(s);
    }
    return out;
}

std::vector<AblationRow> ablate_history(const ExperimentConfig& config,
                                        const std::vector<TransitionSample>& dataset,
                                        int dataset_history_n, const GaussianPolicy& policy,
                                        const std::vector<int>& history_lengths,
                                        const std::string& out_dir) {
    if (history_lengths.empty()) throw std::runtime_error("ablate_history: no history lengths");
    for (int n : history_lengths)
        if (n > dataset_history_n)
            throw std::runtime_error(
                "ablate_history: dataset was collected with a shorter window than requested");

    std::vector<AblationRow> rows;
    for (int n : history_lengths) {
        ForceTrainOptions opts = config.force_train;
        opts.seed = derive_seed(opts.seed, "ablate", static_cast<std::uint64_t>(n));
        ForceTrainResult trained = train_force_model(dataset, n, opts);

        ExperimentConfig per_n = config;
        per_n.history_n = n;
        EvalArtifacts artifacts;
        artifacts.policy = policy;
        artifacts.force_model = trained.model;

        std::string n_dir = (fs::path(out_dir) / ("ablate_n" + std::to_string(n))).string();
        fs::create_directories(n_dir);
        save_force_model(trained.model, (fs::path(n_dir) / "force_model.ckpt").string());
        EvalOutput eval = run_eval(per_n, {"fcvp"}, artifacts, n_dir);

        AblationRow row;
        row.history_n = n;
        std::vector<double> ratios, violations;
        for (const ResultRow& r : eval.rows) {
            ratios.push_back(r.dressed_ratio);
            violations.push_back(r.avg_violation);
        }
        row.mean_ratio = mean_of(ratios);
        row.mean_violation = mean_of(violations);
        row.heldout_mse = trained.heldout_mse;
        row.persistence_mse = trained.persistence_mse;
        rows.push_back(row);
    }
    write_ablation_csv(rows, (fs::path(out_dir) / "ablation.csv").string());
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open ablation csv for writing: " + path);
    out << "history_n,mean_dressed_ratio,mean_avg_violation,heldout_mse,persistence_mse\n";
    for (const AblationRow& r : rows) {
        out << r.history_n << "," << format_double(r.mean_ratio) << ","
            << format_double(r.mean_violation) << "," << format_double(r.heldout_mse) << ","
            << format_double(r.persistence_mse) << "\n";
    }
}

ReportOutput report(const std::string& out_dir, int skip_steps) {
    std::string results_path = (fs::path(out_dir) / "results.csv").string();
    std::vector<ResultRow> rows = read_results_csv(results_path);
    if (rows.empty()) throw std::runtime_error("report: no rows in " + results_path);

    ReportOutput output;
    output.summaries = summarize(rows);

    output.summary_csv = (fs::path(out_dir) / "summary.csv").string();
    std::ofstream summary(output.summary_csv);
    if (!summary) throw std::runtime_error("cannot open summary csv: " + output.summary_csv);
    summary << "method,cells,faults,mean_dressed_ratio,std_ratio_trials,std_ratio_regions,"
               "mean_avg_violation,std_violation_trials,std_violation_regions\n";
    for (const MethodSummary& s : output.summaries) {
        summary << s.method << "," << s.cells << "," << s.faults << ","
                << format_double(s.mean_ratio) << "," << format_double(s.std_ratio_trials) << ","
                << format_double(s.std_ratio_regions) << "," << format_double(s.mean_violation)
                << "," << format_double(s.std_violation_trials) << ","
                << format_double(s.std_violation_regions) << "\n";
    }

    // every post-skip per-step force of every stored trajectory
    output.forces_csv = (fs::path(out_dir) / "forces.csv").string();
    std::ofstream forces(output.forces_csv);
    if (!forces) throw std::runtime_error("cannot open forces csv: " + output.forces_csv);
    forces << "trajectory,step,force\n";
    fs::path traj_dir = fs::path(out_dir) / "trajectories";
    std::vector<fs::path> files;
    if (fs::exists(traj_dir))
        for (const auto& entry : fs::directory_iterator(traj_dir))
            if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        Trajectory traj = deserialize_trajectory(file.string());
        for (const TrajectoryStep& s : traj.steps) {
            if (s.step < skip_steps) continue;
            forces << file.stem().string() << "," << s.step << ","
                   << format_double(s.force_magnitude) << "\n";
        }
    }
    return output;
}

}  // namespace dressing
