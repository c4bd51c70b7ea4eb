#include "sdh/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace sdh::harness {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config error at '" + where + "': " + what);
}

template <typename T>
T get_or(const json& j, const std::string& where, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(where + "." + key, e.what());
    }
}

template <typename T>
T get_required(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) config_error(where + "." + key, "missing required key");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(where + "." + key, e.what());
    }
}

Schedule schedule_from_json(const json& j, const std::string& where) {
    Schedule schedule;
    const auto target = get_required<std::string>(j, where, "target");
    if (target == "lambda")
        schedule.target = ScheduleTarget::Lambda;
    else if (target == "p_max")
        schedule.target = ScheduleTarget::PMax;
    else
        config_error(where + ".target", "expected 'lambda' or 'p_max'");

    const auto kind = get_required<std::string>(j, where, "kind");
    if (kind == "constant") {
        schedule.kind = ScheduleKind::Constant;
        schedule.start_value = schedule.end_value = get_required<double>(j, where, "value");
    } else if (kind == "linear") {
        schedule.kind = ScheduleKind::Linear;
        schedule.start_value = get_required<double>(j, where, "start_value");
        schedule.end_value = get_required<double>(j, where, "end_value");
        schedule.start_step = get_required<std::int64_t>(j, where, "start_step");
        schedule.end_step = get_required<std::int64_t>(j, where, "end_step");
        if (schedule.end_step < schedule.start_step)
            config_error(where + ".end_step", "must be >= start_step");
    } else {
        config_error(where + ".kind", "expected 'constant' or 'linear'");
    }
    return schedule;
}

json schedule_to_json(const Schedule& schedule) {
    json j;
    j["target"] = schedule.target == ScheduleTarget::Lambda ? "lambda" : "p_max";
    if (schedule.kind == ScheduleKind::Constant) {
        j["kind"] = "constant";
        j["value"] = schedule.start_value;
    } else {
        j["kind"] = "linear";
        j["start_value"] = schedule.start_value;
        j["end_value"] = schedule.end_value;
        j["start_step"] = schedule.start_step;
        j["end_step"] = schedule.end_step;
    }
    return j;
}

EnvSpec env_from_json(const json& j) {
    EnvSpec spec;
    spec.name = get_required<std::string>(j, "env", "name");
    spec.gamma = get_or(j, "env", "gamma", 0.9);
    if (spec.name == "counterexample") {
        spec.r = get_or(j, "env", "r", 0.4);
    } else if (spec.name == "hazard_chain") {
        spec.n = get_required<int>(j, "env", "n");
        spec.hazards = get_or(j, "env", "hazards", std::vector<int>{});
        spec.hazard_cost = get_or(j, "env", "hazard_cost", 1.0);
        spec.shelter_reward = get_or(j, "env", "shelter_reward", 0.0);
        spec.goal_reward = get_or(j, "env", "goal_reward", 1.0);
        spec.uniform_start = get_or(j, "env", "uniform_start", false);
    } else if (spec.name == "hazard_gridworld") {
        spec.width = get_required<int>(j, "env", "width");
        spec.height = get_required<int>(j, "env", "height");
        const auto goal = get_required<std::vector<int>>(j, "env", "goal");
        if (goal.size() != 2) config_error("env.goal", "expected [x, y]");
        spec.goal = {goal[0], goal[1]};
        spec.hazard_cells.clear();
        for (const auto& cell : get_or(j, "env", "hazards", std::vector<std::vector<int>>{})) {
            if (cell.size() != 2) config_error("env.hazards", "expected [[x, y], ...]");
            spec.hazard_cells.emplace_back(cell[0], cell[1]);
        }
    } else if (spec.name == "file") {
        spec.path = get_required<std::string>(j, "env", "path");
    } else {
        config_error("env.name",
                     "expected counterexample | hazard_chain | hazard_gridworld | file");
    }
    return spec;
}

json env_to_json(const EnvSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["gamma"] = spec.gamma;
    if (spec.name == "counterexample") {
        j["r"] = spec.r;
    } else if (spec.name == "hazard_chain") {
        j["n"] = spec.n;
        j["hazards"] = spec.hazards;
        j["hazard_cost"] = spec.hazard_cost;
        j["shelter_reward"] = spec.shelter_reward;
        j["goal_reward"] = spec.goal_reward;
        j["uniform_start"] = spec.uniform_start;
    } else if (spec.name == "hazard_gridworld") {
        j["width"] = spec.width;
        j["height"] = spec.height;
        j["goal"] = {spec.goal.first, spec.goal.second};
        auto cells = json::array();
        for (const auto& cell : spec.hazard_cells) cells.push_back({cell.first, cell.second});
        j["hazards"] = cells;
    } else if (spec.name == "file") {
        j["path"] = spec.path;
    }
    return j;
}

ContinuationSpec continuation_from_json(const json& j) {
    ContinuationSpec spec;
    spec.variant = get_required<std::string>(j, "continuation", "variant");
    if (spec.variant == "exponential") {
        spec.lambda = get_or(j, "continuation", "lambda", 0.0);
    } else if (spec.variant == "cat") {
        spec.p_max = get_or(j, "continuation", "p_max", 0.75);
        spec.c_max_init = get_or(j, "continuation", "c_max_init", 1.0);
        spec.eps = get_or(j, "continuation", "eps", 1e-3);
        spec.limit_b = get_or(j, "continuation", "limit_b", 0.0);
        spec.rho = get_or(j, "continuation", "rho", 0.9);
        spec.ema = get_or(j, "continuation", "ema", std::string("batch_max"));
    } else if (spec.variant == "constant") {
        spec.alpha = get_or(j, "continuation", "alpha", 1.0);
    } else if (spec.variant != "hard") {
        config_error("continuation.variant", "expected exponential | cat | hard | constant");
    }
    spec.aggregate = get_or(j, "continuation", "aggregate", std::string());
    if (j.contains("schedules")) {
        int index = 0;
        for (const auto& item : j.at("schedules"))
            spec.schedules.push_back(
                schedule_from_json(item, "continuation.schedules[" + std::to_string(index++) + "]"));
    }
    return spec;
}

json continuation_to_json(const ContinuationSpec& spec) {
    json j;
    j["variant"] = spec.variant;
    if (spec.variant == "exponential") j["lambda"] = spec.lambda;
    if (spec.variant == "cat") {
        j["p_max"] = spec.p_max;
        j["c_max_init"] = spec.c_max_init;
        j["eps"] = spec.eps;
        j["limit_b"] = spec.limit_b;
        j["rho"] = spec.rho;
        j["ema"] = spec.ema;
    }
    if (spec.variant == "constant") j["alpha"] = spec.alpha;
    if (!spec.aggregate.empty()) j["aggregate"] = spec.aggregate;
    auto schedules = json::array();
    for (const auto& schedule : spec.schedules) schedules.push_back(schedule_to_json(schedule));
    j["schedules"] = schedules;
    return j;
}

agents::LearnerConfig learner_from_json(const json& j) {
    agents::LearnerConfig config;
    config.variant = agents::variant_from_name(get_required<std::string>(j, "agent", "variant"));
    config.n_step = get_or(j, "agent", "n_step", config.n_step);
    config.batch_size = get_or(j, "agent", "batch_size", config.batch_size);
    config.lr_actor = get_or(j, "agent", "lr_actor", config.lr_actor);
    config.lr_critic = get_or(j, "agent", "lr_critic", config.lr_critic);
    config.lr_dual = get_or(j, "agent", "lr_dual", config.lr_dual);
    config.tau = get_or(j, "agent", "tau", config.tau);
    const auto living = get_or(j, "agent", "living_cost", std::string("target_entropy"));
    if (living == "target_entropy")
        config.living_cost = agents::LivingCost::TargetEntropy;
    else if (living == "zero")
        config.living_cost = agents::LivingCost::Zero;
    else
        config_error("agent.living_cost", "expected 'target_entropy' or 'zero'");
    config.kappa_init = get_or(j, "agent", "kappa_init", config.kappa_init);
    config.kl_budget_eps = get_or(j, "agent", "kl_budget_eps", config.kl_budget_eps);
    config.mpo_kl_eps = get_or(j, "agent", "mpo_kl_eps", config.mpo_kl_eps);
    config.target_entropy = get_or(j, "agent", "target_entropy", config.target_entropy);
    config.gi_variant = get_or(j, "agent", "gi_variant", config.gi_variant);
    config.stack_boot_states = get_or(j, "agent", "stack_boot_states", config.stack_boot_states);
    config.explore_eps = get_or(j, "agent", "explore_eps", config.explore_eps);
    config.warmup_steps = get_or(j, "agent", "warmup_steps", config.warmup_steps);
    config.update_every = get_or(j, "agent", "update_every", config.update_every);
    config.actor_every = get_or(j, "agent", "actor_every", config.actor_every);
    config.m_step_iters = get_or(j, "agent", "m_step_iters", config.m_step_iters);
    config.m_step_lr = get_or(j, "agent", "m_step_lr", config.m_step_lr);
    config.buffer_capacity = get_or(j, "agent", "buffer_capacity", config.buffer_capacity);
    config.max_episode_steps = get_or(j, "agent", "max_episode_steps", config.max_episode_steps);
    config.eval_episodes = get_or(j, "agent", "eval_episodes", config.eval_episodes);
    config.n_action_samples = get_or(j, "agent", "n_action_samples", config.n_action_samples);
    config.logit_clamp = get_or(j, "agent", "logit_clamp", config.logit_clamp);
    config.ema_every = get_or(j, "agent", "ema_every", config.ema_every);
    return config;
}

json learner_to_json(const agents::LearnerConfig& config) {
    json j;
    j["variant"] = agents::variant_name(config.variant);
    j["n_step"] = config.n_step;
    j["batch_size"] = config.batch_size;
    j["lr_actor"] = config.lr_actor;
    j["lr_critic"] = config.lr_critic;
    j["lr_dual"] = config.lr_dual;
    j["tau"] = config.tau;
    j["living_cost"] =
        config.living_cost == agents::LivingCost::TargetEntropy ? "target_entropy" : "zero";
    j["kappa_init"] = config.kappa_init;
    j["kl_budget_eps"] = config.kl_budget_eps;
    j["mpo_kl_eps"] = config.mpo_kl_eps;
    j["target_entropy"] = config.target_entropy;
    j["gi_variant"] = config.gi_variant;
    j["stack_boot_states"] = config.stack_boot_states;
    j["explore_eps"] = config.explore_eps;
    j["warmup_steps"] = config.warmup_steps;
    j["update_every"] = config.update_every;
    j["actor_every"] = config.actor_every;
    j["m_step_iters"] = config.m_step_iters;
    j["m_step_lr"] = config.m_step_lr;
    j["buffer_capacity"] = config.buffer_capacity;
    j["max_episode_steps"] = config.max_episode_steps;
    j["eval_episodes"] = config.eval_episodes;
    j["n_action_samples"] = config.n_action_samples;
    j["logit_clamp"] = config.logit_clamp;
    j["ema_every"] = config.ema_every;
    return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig config;
    if (!doc.contains("env")) config_error("env", "missing required key");
    config.env = env_from_json(doc.at("env"));
    if (!doc.contains("continuation")) config_error("continuation", "missing required key");
    config.continuation = continuation_from_json(doc.at("continuation"));
    if (!doc.contains("agent")) config_error("agent", "missing required key");
    config.learner = learner_from_json(doc.at("agent"));
    config.learner.total_steps = get_required<std::int64_t>(doc, "", "total_steps");
    config.learner.eval_interval = get_or<std::int64_t>(doc, "", "eval_interval", 1000);
    config.seeds = get_or(doc, "", "seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    if (config.seeds.empty()) config_error("seeds", "must not be empty");
    config.out_dir = get_or(doc, "", "out_dir", std::string("runs/out"));
    if (config.learner.total_steps < 1) config_error("total_steps", "must be >= 1");
    if (config.learner.eval_interval < 1) config_error("eval_interval", "must be >= 1");
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& config) {
    json doc;
    doc["env"] = env_to_json(config.env);
    doc["continuation"] = continuation_to_json(config.continuation);
    doc["agent"] = learner_to_json(config.learner);
    doc["total_steps"] = config.learner.total_steps;
    doc["eval_interval"] = config.learner.eval_interval;
    doc["seeds"] = config.seeds;
    doc["out_dir"] = config.out_dir;
    return doc.dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
    // identifies the experiment content; the output location is not part of it
    ExperimentConfig keyed = config;
    keyed.out_dir.clear();
    const std::string canonical = config_to_json(keyed);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << hash;
    return out.str();
}

FiniteMdp build_env(const EnvSpec& spec) {
    if (spec.name == "counterexample") return build_counterexample_mdp(spec.r, spec.gamma);
    if (spec.name == "hazard_chain")
        return build_hazard_chain(spec.n, spec.hazards, spec.hazard_cost, spec.shelter_reward,
                                  spec.goal_reward, spec.gamma, spec.uniform_start);
    if (spec.name == "hazard_gridworld")
        return build_hazard_gridworld(spec.width, spec.height, spec.goal, spec.hazard_cells,
                                      spec.gamma);
    if (spec.name == "file") {
        std::ifstream in(spec.path);
        if (!in) throw std::invalid_argument("cannot open env file: " + spec.path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return mdp_from_json(buffer.str());
    }
    throw std::invalid_argument("unknown env name: " + spec.name);
}

ContinuationModel build_continuation(const ContinuationSpec& spec) {
    const bool has_aggregate = !spec.aggregate.empty();
    if (spec.variant == "exponential") {
        const auto aggregate = has_aggregate && spec.aggregate == "min" ? ChannelAggregate::MinAlpha
                                                                        : ChannelAggregate::SumCosts;
        return ContinuationModel::exponential(spec.lambda, aggregate);
    }
    if (spec.variant == "cat") {
        const auto aggregate = has_aggregate && spec.aggregate == "sum" ? ChannelAggregate::SumCosts
                                                                        : ChannelAggregate::MinAlpha;
        const auto ema = spec.ema == "per_sample" ? EmaMode::PerSample : EmaMode::BatchMax;
        return ContinuationModel::cat_normalized(spec.p_max, spec.c_max_init, spec.eps, spec.limit_b,
                                                 spec.rho, ema, aggregate);
    }
    if (spec.variant == "hard") return ContinuationModel::hard_indicator();
    if (spec.variant == "constant") return ContinuationModel::constant(spec.alpha);
    throw std::invalid_argument("unknown continuation variant: " + spec.variant);
}

}  // namespace sdh::harness
