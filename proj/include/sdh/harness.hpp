#pragma once

#include <string>
#include <vector>

#include "sdh/agents.hpp"
#include "sdh/config.hpp"

namespace sdh::harness {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct SeedResult {
    std::uint64_t seed = 0;
    double final_reward_return = 0.0;
    double final_cost_return = 0.0;
    std::string metrics_path;
    std::string checkpoint_path;
};

struct RunResult {
    std::string config_hash;
    std::vector<SeedResult> seeds;
    std::string summary_path;
};

/// Execute a full experiment: one metrics JSONL and checkpoint per seed
/// (seeds run as independent parallel jobs), plus a summary JSON with
/// per-seed finals and interquartile statistics. SDH_SEED overrides the
/// config seed list.
RunResult run_experiment(const ExperimentConfig& config);

/// Render per-metric SVG plots (per-seed traces plus their mean) from
/// metrics JSONL files. The cost plot gets a horizontal reference line at
/// the configured limit when one is present in the file headers.
std::vector<std::string> plot_metrics(const std::vector<std::string>& metrics_files,
                                      const std::string& out_dir);

/// Interquartile mean (middle 50% after sorting).
double interquartile_mean(std::vector<double> values);

}  // namespace sdh::harness
