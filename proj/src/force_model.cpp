#include "dressing/force_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dressing {

namespace {

std::vector<double> model_extras(const ForceHistory& history, const Action& a, double force_scale) {
    std::vector<double> extras = history.flatten();
    for (double& v : extras) v /= force_scale;
    std::array<double, 6> arr = a.to_array();
    extras.insert(extras.end(), arr.begin(), arr.end());
    return extras;
}

}  // namespace

double ForceModel::predict(const Observation& obs, const ForceHistory& history,
                           const Action& a) const {
    ForceHistory window = history.size() == history_n ? history : history.truncated(history_n);
    double scale = std::max(target_std, 1e-6);
    std::vector<double> out = forward(core, obs.to_point_set(), model_extras(window, a, scale));
    return out[0] * scale + target_mean;
}

Action mixture_sample(const ActionProposer& policy, const Observation& obs,
                      const ForceHistory& history, double p, Rng& rng, bool* used_uniform) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mixture_sample: p must be in [0,1]");
    if (uniform01(rng) < p) {
        if (used_uniform) *used_uniform = true;
        Action a;
        a.translation = {uniform_range(rng, -1, 1), uniform_range(rng, -1, 1),
                         uniform_range(rng, -1, 1)};
        a.rotation = {uniform_range(rng, -1, 1), uniform_range(rng, -1, 1),
                      uniform_range(rng, -1, 1)};
        return a;
    }
    if (used_uniform) *used_uniform = false;
    return policy.sample(obs, history, rng);
}

ForceHistory TransitionSample::history_window(int n) const {
    ForceHistory h(n);
    // stored newest-first; replay oldest-first so push() rebuilds the order
    int m = std::min<int>(n, static_cast<int>(history.size()));
    for (int i = m; i-- > 0;) h.push(history[i]);
    return h;
}

CollectResult collect_dataset(const EnvConfigFactory& env_factory, const ActionProposer& policy,
                              const CollectOptions& options) {
    if (options.trajectories < 1)
        throw std::invalid_argument("collect_dataset: need at least one trajectory");
    if (options.history_n < 1) throw std::invalid_argument("collect_dataset: history_n must be >= 1");

    CollectResult result;
    for (int traj = 0; traj < options.trajectories; ++traj) {
        EpisodeConfig config = env_factory(traj);
        DressingEnv env;
        Observation obs = env.reset(config);
        Rng rng(derive_seed(options.seed, "collect", static_cast<std::uint64_t>(traj)));

        Trajectory log;
        log.arm_spec = config.arm_spec;
        log.arm_total_length = env.arm().total_length();
        log.force_threshold = config.force_threshold;
        log.horizon = config.horizon;
        log.seed = config.seed;

        ForceHistory history(options.history_n);
        std::vector<TransitionSample> episode_samples;
        bool faulted = false;
        int t = 0;
        while (!env.done()) {
            Action a = mixture_sample(policy, obs, history, options.p, rng);

            // the sample for step t>0: window of forces measured before this
            // action, target filled in after the step
            TransitionSample sample;
            if (t > 0) {
                sample.observation = obs;
                sample.history = history.window();
                sample.action = a;
            }

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
            log.steps.push_back(step);

            if (t > 0) {
                sample.target = out.force.magnitude;
                episode_samples.push_back(std::move(sample));
            }
            history.push(out.force.vector);
            obs = std::move(out.observation);
            faulted = faulted || out.fault;
            ++t;
        }

        result.trajectories.push_back(std::move(log));
        if (faulted) {
            result.dropped_episodes += 1;
            std::cerr << "collect: dropping diverged trajectory " << traj << "\n";
            continue;
        }
        for (TransitionSample& s : episode_samples) result.samples.push_back(std::move(s));
    }
    return result;
}

namespace {

double persistence_prediction(const TransitionSample& s) {
    return s.history.empty() ? 0.0 : norm(s.history.front());
}

}  // namespace

ForceTrainResult train_force_model(const std::vector<TransitionSample>& dataset, int n,
                                   const ForceTrainOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("train_force_model: dataset is empty");
    if (n < 1) throw std::invalid_argument("train_force_model: history length must be >= 1");
    for (const TransitionSample& s : dataset)
        if (static_cast<int>(s.history.size()) < n)
            throw std::invalid_argument(
                "train_force_model: dataset window shorter than requested history");

    // seeded split
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(options.seed, "force_split"));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::size_t j = i + uniform_index(rng, order.size() - i);
        std::swap(order[i], order[j]);
    }
    std::size_t holdout_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(options.holdout_frac * dataset.size()));
    if (holdout_count >= dataset.size())
        throw std::invalid_argument("train_force_model: dataset too small to split");

    std::vector<const TransitionSample*> train_split, heldout_split;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < holdout_count)
            heldout_split.push_back(&dataset[order[i]]);
        else
            train_split.push_back(&dataset[order[i]]);
    }

    double mean = 0.0;
    for (const TransitionSample* s : train_split) mean += s->target;
    mean /= train_split.size();
    double var = 0.0;
    for (const TransitionSample* s : train_split) {
        double d = s->target - mean;
        var += d * d;
    }
    var /= train_split.size();
    double std_dev = std::sqrt(var);
    double scale = std::max(std_dev, 1e-6);

    auto to_train_sample = [&](const TransitionSample& s) {
        TrainSample t;
        t.points = s.observation.to_point_set();
        t.extras = model_extras(s.history_window(n), s.action, scale);
        t.target = {(s.target - mean) / scale};
        return t;
    };
    std::vector<TrainSample> train_data;
    train_data.reserve(train_split.size());
    for (const TransitionSample* s : train_split) train_data.push_back(to_train_sample(*s));

    ForceModel model;
    model.history_n = n;
    model.target_mean = mean;
    model.target_std = std_dev;
    model.core = make_mlp(Observation::kFeatureDim, options.per_point_hidden, 3 * n + 6,
                          options.head_hidden, 1, Activation::kRelu, Activation::kIdentity,
                          derive_seed(options.seed, "force_init"));

    auto heldout_mse = [&]() {
        double total = 0.0;
        for (const TransitionSample* s : heldout_split) {
            double pred = model.predict(s->observation, s->history_window(n), s->action);
            double e = pred - s->target;
            total += e * e;
        }
        return total / heldout_split.size();
    };

    ForceTrainResult result;
    double best_heldout = heldout_mse();
    std::vector<double> best_params = model.core.flatten();
    int since_best = 0;

    TrainOptions epoch_opts;
    epoch_opts.epochs = 1;
    epoch_opts.lr = options.lr;
    epoch_opts.batch_size = options.batch_size;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        epoch_opts.seed = derive_seed(options.seed, "force_epoch", epoch);
        TrainResult tr = train_mse(model.core, train_data, epoch_opts);
        result.loss_curve.push_back(tr.loss_curve.front());
        result.epochs_run = epoch + 1;

        double h = heldout_mse();
        if (h < best_heldout) {
            best_heldout = h;
            best_params = model.core.flatten();
            since_best = 0;
        } else if (options.patience > 0 && ++since_best >= options.patience) {
            break;
        }
    }
    model.core.unflatten(best_params);

    result.heldout_mse = best_heldout;
    double persistence = 0.0;
    for (const TransitionSample* s : heldout_split) {
        double e = persistence_prediction(*s) - s->target;
        persistence += e * e;
    }
    result.persistence_mse = persistence / heldout_split.size();
    result.model = std::move(model);
    return result;
}

namespace {

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

constexpr int kDatasetSchemaVersion = 1;

}  // namespace

void save_dataset(const std::vector<TransitionSample>& samples, int history_n,
                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open dataset for writing: " + path);
    nlohmann::json header;
    header["schema_version"] = kDatasetSchemaVersion;
    header["kind"] = "force_dataset";
    header["history_n"] = history_n;
    header["target"] = "contact_force_magnitude";
    header["count"] = samples.size();
    out << header.dump() << "\n";
    for (const TransitionSample& s : samples) {
        nlohmann::json j;
        nlohmann::json garment = nlohmann::json::array();
        for (const Vec3& p : s.observation.garment_points) garment.push_back(vec3_json(p));
        nlohmann::json arm = nlohmann::json::array();
        for (const Vec3& p : s.observation.arm_points) arm.push_back(vec3_json(p));
        j["garment"] = std::move(garment);
        j["arm"] = std::move(arm);
        j["eef"] = vec3_json(s.observation.eef_point);
        nlohmann::json hist = nlohmann::json::array();
        for (const Vec3& f : s.history) hist.push_back(vec3_json(f));
        j["history"] = std::move(hist);
        std::array<double, 6> a = s.action.to_array();
        j["action"] = a;
        j["target"] = s.target;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("dataset write failed: " + path);
}

std::vector<TransitionSample> load_dataset(const std::string& path, int* history_n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset missing header: " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("kind").get<std::string>() != "force_dataset")
        throw std::runtime_error("not a force dataset: " + path);
    if (header.at("schema_version").get<int>() != kDatasetSchemaVersion)
        throw std::runtime_error("unsupported dataset schema version in " + path);
    if (history_n) *history_n = header.at("history_n").get<int>();

    std::vector<TransitionSample> samples;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed dataset line: " + e.what());
        }
        TransitionSample s;
        for (const auto& p : j.at("garment")) s.observation.garment_points.push_back(vec3_from(p));
        for (const auto& p : j.at("arm")) s.observation.arm_points.push_back(vec3_from(p));
        s.observation.eef_point = vec3_from(j.at("eef"));
        for (const auto& f : j.at("history")) s.history.push_back(vec3_from(f));
        auto a = j.at("action").get<std::array<double, 6>>();
        s.action = Action::from_array(a);
        s.target = j.at("target").get<double>();
        samples.push_back(std::move(s));
    }
    return samples;
}

void save_force_model(const ForceModel& model, const std::string& path) {
    nlohmann::json extra;
    extra["kind"] = "force_model";
    extra["history_n"] = model.history_n;
    extra["target_mean"] = model.target_mean;
    extra["target_std"] = model.target_std;
    extra["activation"] = "relu";
    save_checkpoint(model.core, extra.dump(), path);
}

ForceModel load_force_model(const std::string& path) {
    std::string extra_str;
    MlpModel core = load_checkpoint(path, &extra_str);
    if (extra_str.empty()) throw std::runtime_error("force model checkpoint missing metadata");
    nlohmann::json extra = nlohmann::json::parse(extra_str);
    if (extra.at("kind").get<std::string>() != "force_model")
        throw std::runtime_error("not a force model checkpoint: " + path);
    ForceModel model;
    model.history_n = extra.at("history_n").get<int>();
    model.target_mean = extra.at("target_mean").get<double>();
    model.target_std = extra.at("target_std").get<double>();
    model.core = std::move(core);
    if (model.core.extra_dim != 3 * model.history_n + 6)
        throw std::runtime_error("force model checkpoint has inconsistent history length");
    return model;
}

}  // namespace dressing
