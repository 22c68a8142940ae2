#include "dressing/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dressing/config.hpp"
#include "dressing/harness.hpp"
#include "dressing/trajectory.hpp"

namespace fs = std::filesystem;

namespace dressing {

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::vector<std::string> checkpoints;  // name=path
    std::vector<std::string> methods;
};

std::map<std::string, std::string> checkpoint_map(const std::vector<std::string>& entries) {
    std::map<std::string, std::string> out;
    for (const std::string& e : entries) {
        std::size_t eq = e.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == e.size())
            throw std::runtime_error("--checkpoint expects name=path, got '" + e + "'");
        out[e.substr(0, eq)] = e.substr(eq + 1);
    }
    return out;
}

ExperimentConfig load_config(const CommonArgs& args, ConfigMap& map) {
    if (args.config_path.empty()) throw std::runtime_error("--config is required");
    map = ConfigMap::parse_file(args.config_path);
    ExperimentConfig cfg = experiment_config_from(map);
    fs::create_directories(args.out_dir);
    std::ofstream resolved(fs::path(args.out_dir) / "resolved_config");
    resolved << map.resolved();
    return cfg;
}

EvalArtifacts load_artifacts(const std::map<std::string, std::string>& ckpts) {
    EvalArtifacts artifacts;
    auto it = ckpts.find("policy");
    if (it != ckpts.end()) artifacts.policy = load_gaussian_policy(it->second);
    it = ckpts.find("force_model");
    if (it != ckpts.end()) artifacts.force_model = load_force_model(it->second);
    it = ckpts.find("multimodal");
    if (it != ckpts.end()) artifacts.multimodal = load_multimodal_policy(it->second);
    it = ckpts.find("residual");
    if (it != ckpts.end()) {
        if (!artifacts.policy)
            throw std::runtime_error("residual checkpoint needs --checkpoint policy=... as base");
        artifacts.residual = load_residual_policy(it->second, *artifacts.policy);
    }
    return artifacts;
}

int cmd_train_policy(const CommonArgs& args) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);

    EnvConfigFactory sim_a = cfg.env_factory(/*use_sim_b=*/false, derive_seed(args.seed, "train_a"));
    std::cout << "collecting " << cfg.bc_demos << " scripted demo episodes...\n";
    std::vector<TrainSample> demos =
        collect_scripted_demos(sim_a, cfg.bc_demos, cfg.scripted_speed,
                               cfg.scripted_lift, cfg.demo_stop_margin);
    std::cout << "behavior cloning on " << demos.size() << " samples...\n";
    MlpModel cloned = behavior_clone(cfg.arch, demos, cfg.bc_epochs, cfg.bc_lr,
                                     derive_seed(args.seed, "bc"));

    std::cout << "refining with CEM (" << cfg.cem.population << " x " << cfg.cem.iterations
              << ")...\n";
    PolicyTrainResult result = train_policy_cem(sim_a, cfg.arch, cfg.sigma, cfg.cem,
                                                derive_seed(args.seed, "cem_policy"), &cloned);

    std::string ckpt = (fs::path(args.out_dir) / "policy.ckpt").string();
    save_gaussian_policy(result.policy, ckpt);

    std::ofstream log(fs::path(args.out_dir) / "policy_training.csv");
    log << "iteration,elite_mean_return,best_return\n";
    for (const CemIterationLog& l : result.cem_log)
        log << l.iteration << "," << format_double(l.elite_mean_return) << ","
            << format_double(l.best_return) << "\n";

    std::cout << "saved " << ckpt << " (best return " << result.best_return << ")\n";
    return 0;
}

int cmd_collect(const CommonArgs& args) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);
    auto ckpts = checkpoint_map(args.checkpoints);
    if (!ckpts.count("policy")) throw std::runtime_error("collect: --checkpoint policy=... required");
    GaussianPolicy policy = load_gaussian_policy(ckpts.at("policy"));

    CollectOptions opts;
    opts.trajectories = cfg.collect_trajectories;
    opts.p = cfg.mixture_p;
    opts.history_n = cfg.collect_history_n;
    opts.seed = derive_seed(args.seed, "collect");

    EnvConfigFactory sim_b = cfg.env_factory(/*use_sim_b=*/true, derive_seed(args.seed, "collect_b"));
    std::cout << "collecting " << opts.trajectories << " trajectories in the evaluation sim...\n";
    CollectResult result = collect_dataset(sim_b, policy, opts);
    if (result.dropped_episodes > 0)
        std::cout << "dropped " << result.dropped_episodes << " diverged episodes\n";

    std::string dataset_path = (fs::path(args.out_dir) / "dataset.jsonl").string();
    save_dataset(result.samples, opts.history_n, dataset_path);

    fs::path traj_dir = fs::path(args.out_dir) / "collect_trajectories";
    fs::create_directories(traj_dir);
    for (std::size_t i = 0; i < result.trajectories.size(); ++i)
        serialize_trajectory(result.trajectories[i],
                             (traj_dir / ("traj_" + std::to_string(i) + ".jsonl")).string());

    std::cout << "saved " << result.samples.size() << " samples to " << dataset_path << "\n";
    return 0;
}

int cmd_train_force_model(const CommonArgs& args, const std::string& dataset_path, int history_n) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);
    if (dataset_path.empty()) throw std::runtime_error("train-force-model: --dataset required");

    int stored_n = 0;
    std::vector<TransitionSample> dataset = load_dataset(dataset_path, &stored_n);
    int n = history_n > 0 ? history_n : cfg.history_n;
    if (n > stored_n)
        throw std::runtime_error("requested history " + std::to_string(n) +
                                 " exceeds the dataset window " + std::to_string(stored_n));

    ForceTrainOptions opts = cfg.force_train;
    opts.seed = derive_seed(args.seed, "force_train");
    std::cout << "training force model (N=" << n << ") on " << dataset.size() << " samples...\n";
    ForceTrainResult result = train_force_model(dataset, n, opts);

    std::string ckpt = (fs::path(args.out_dir) / "force_model.ckpt").string();
    save_force_model(result.model, ckpt);
    std::cout << "saved " << ckpt << "\n"
              << "held-out MSE " << result.heldout_mse << " vs persistence "
              << result.persistence_mse << " (" << result.epochs_run << " epochs)\n";
    if (result.heldout_mse >= result.persistence_mse)
        std::cout << "warning: model does not beat the persistence baseline\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);
    EvalArtifacts artifacts = load_artifacts(checkpoint_map(args.checkpoints));
    std::vector<std::string> methods = args.methods.empty() ? cfg.methods : args.methods;

    EvalOutput output = run_eval(cfg, methods, artifacts, args.out_dir);
    std::cout << "wrote " << output.rows.size() << " rows to "
              << (fs::path(args.out_dir) / "results.csv").string() << "\n";
    for (const MethodSummary& s : summarize(output.rows))
        std::cout << "  " << s.method << ": dressed ratio " << s.mean_ratio << ", avg violation "
                  << s.mean_violation << (s.faults ? (", faults " + std::to_string(s.faults)) : "")
                  << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& dataset_path, std::vector<int> ns) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);
    auto ckpts = checkpoint_map(args.checkpoints);
    if (!ckpts.count("policy")) throw std::runtime_error("ablate-history: --checkpoint policy=... required");
    if (dataset_path.empty()) throw std::runtime_error("ablate-history: --dataset required");
    GaussianPolicy policy = load_gaussian_policy(ckpts.at("policy"));

    int stored_n = 0;
    std::vector<TransitionSample> dataset = load_dataset(dataset_path, &stored_n);
    if (ns.empty()) ns = {3, 5, 7};

    std::vector<AblationRow> rows = ablate_history(cfg, dataset, stored_n, policy, ns, args.out_dir);
    std::cout << "history_n  dressed_ratio  avg_violation\n";
    for (const AblationRow& r : rows)
        std::cout << "  N=" << r.history_n << "      " << r.mean_ratio << "        "
                  << r.mean_violation << "\n";
    return 0;
}

int cmd_train_finetune(const CommonArgs& args, const std::string& variant) {
    ConfigMap map;
    ExperimentConfig cfg = load_config(args, map);
    auto ckpts = checkpoint_map(args.checkpoints);

    FinetuneConfig fin = cfg.finetune;
    fin.seed = derive_seed(args.seed, "finetune");
    EnvConfigFactory sim_a = cfg.env_factory(false, derive_seed(args.seed, "finetune_a"));
    EnvConfigFactory sim_b = cfg.env_factory(true, derive_seed(args.seed, "finetune_b"));

    if (variant == "multimodal") {
        std::cout << "pretraining multimodal policy in the source sim...\n";
        MultimodalPolicy pre = pretrain_multimodal(sim_a, fin);
        save_multimodal_policy(pre,
                               (fs::path(args.out_dir) / "multimodal_pretrained.ckpt").string());
        std::cout << "fine-tuning with the force-penalized reward...\n";
        MultimodalPolicy tuned = finetune_multimodal(pre, sim_b, fin);
        std::string ckpt = (fs::path(args.out_dir) / "multimodal.ckpt").string();
        save_multimodal_policy(tuned, ckpt);
        std::cout << "saved " << ckpt << "\n";
        return 0;
    }
    if (variant == "residual") {
        if (!ckpts.count("policy"))
            throw std::runtime_error("residual fine-tune needs --checkpoint policy=...");
        GaussianPolicy base = load_gaussian_policy(ckpts.at("policy"));
        std::cout << "training residual head with the force-penalized reward...\n";
        ResidualPolicy residual = train_residual(base, sim_b, fin);
        std::string ckpt = (fs::path(args.out_dir) / "residual.ckpt").string();
        save_residual_policy(residual, ckpt);
        std::cout << "saved " << ckpt << "\n";
        return 0;
    }
    throw std::runtime_error("--variant must be multimodal or residual");
}

int cmd_report(const CommonArgs& args, int skip_override) {
    int skip = skip_override;
    if (!args.config_path.empty()) {
        ConfigMap map = ConfigMap::parse_file(args.config_path);
        ExperimentConfig cfg = experiment_config_from(map);
        if (skip < 0) skip = cfg.skip_steps;
    }
    if (skip < 0) skip = 25;

    ReportOutput output = report(args.out_dir, skip);
    std::cout << "method            cells  dressed_ratio (trial/region std)   avg_violation\n";
    for (const MethodSummary& s : output.summaries) {
        std::cout << "  " << s.method << std::string(std::max<int>(1, 16 - s.method.size()), ' ')
                  << s.cells << "     " << s.mean_ratio << " (" << s.std_ratio_trials << " / "
                  << s.std_ratio_regions << ")   " << s.mean_violation << "\n";
    }
    std::cout << "wrote " << output.summary_csv << " and " << output.forces_csv << "\n";
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"sleeve-dressing sim2sim pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string dataset_path;
    std::string variant;
    std::vector<int> ns;
    int skip_override = -1;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* c = cmd->add_option("--config", args.config_path, "experiment config file");
        if (needs_config) c->required();
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "master seed");
        cmd->add_option("--checkpoint", args.checkpoints, "named checkpoint, name=path");
        cmd->add_option("--method", args.methods, "controller to evaluate (repeatable)");
    };

    CLI::App* train_policy = app.add_subcommand("train-policy", "train the vision policy in sim A");
    add_common(train_policy);
    CLI::App* collect = app.add_subcommand("collect", "collect a force dataset in sim B");
    add_common(collect);
    CLI::App* train_fm = app.add_subcommand("train-force-model", "fit the force dynamics model");
    add_common(train_fm);
    int fm_history = 0;
    train_fm->add_option("--dataset", dataset_path, "collected dataset (.jsonl)");
    train_fm->add_option("--history", fm_history, "history length override");
    CLI::App* eval = app.add_subcommand("eval", "evaluate controllers in sim B");
    add_common(eval);
    CLI::App* ablate = app.add_subcommand("ablate-history", "sweep the force-history length");
    add_common(ablate);
    ablate->add_option("--dataset", dataset_path, "collected dataset (.jsonl)");
    ablate->add_option("--n", ns, "history length (repeatable)");
    CLI::App* finetune = app.add_subcommand("train-finetune", "train multimodal/residual baselines");
    add_common(finetune);
    finetune->add_option("--variant", variant, "multimodal or residual")->required();
    CLI::App* rep = app.add_subcommand("report", "aggregate results into summary/forces CSVs");
    add_common(rep, /*needs_config=*/false);
    rep->add_option("--skip", skip_override, "steps to exclude from force distributions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (train_policy->parsed()) return cmd_train_policy(args);
        if (collect->parsed()) return cmd_collect(args);
        if (train_fm->parsed()) return cmd_train_force_model(args, dataset_path, fm_history);
        if (eval->parsed()) return cmd_eval(args);
        if (ablate->parsed()) return cmd_ablate(args, dataset_path, ns);
        if (finetune->parsed()) return cmd_train_finetune(args, variant);
        if (rep->parsed()) return cmd_report(args, skip_override);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace dressing
