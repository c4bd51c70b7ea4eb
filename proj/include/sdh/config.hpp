#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdh/agents.hpp"
#include "sdh/continuation.hpp"
#include "sdh/mdp.hpp"

namespace sdh::harness {

struct EnvSpec {
    std::string name = "hazard_chain";  // counterexample | hazard_chain | hazard_gridworld | file
    double gamma = 0.9;
    // counterexample
    double r = 0.4;
    // hazard chain
    int n = 8;
    std::vector<int> hazards;
    double hazard_cost = 1.0;
    double shelter_reward = 0.0;
    double goal_reward = 1.0;
    bool uniform_start = false;
    // gridworld
    int width = 3;
    int height = 3;
    std::pair<int, int> goal{2, 2};
    std::vector<std::pair<int, int>> hazard_cells;
    // file
    std::string path;
};

struct ContinuationSpec {
    std::string variant = "constant";  // exponential | cat | hard | constant
    double lambda = 0.0;
    double p_max = 0.75;
    double c_max_init = 1.0;
    double eps = 1e-3;
    double limit_b = 0.0;
    double rho = 0.9;
    std::string ema = "batch_max";  // batch_max | per_sample
    std::string aggregate;          // "" = variant default, else sum | min
    double alpha = 1.0;
    std::vector<Schedule> schedules;
};

struct ExperimentConfig {
    EnvSpec env;
    ContinuationSpec continuation;
    agents::LearnerConfig learner;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = "runs/out";
};

/// Parse a config document; errors name the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical serialization (all keys present, sorted); a parsed config
/// serializes to a fixed point.
std::string config_to_json(const ExperimentConfig& config);

/// FNV-1a hash of the canonical serialization, as a hex string.
std::string config_hash(const ExperimentConfig& config);

FiniteMdp build_env(const EnvSpec& spec);
ContinuationModel build_continuation(const ContinuationSpec& spec);

}  // namespace sdh::harness
