#include "sdh/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nlohmann/json.hpp"
#include "sdh/svg.hpp"

namespace sdh::harness {

namespace {

using nlohmann::json;

json metrics_row_to_json(const agents::MetricsRow& row) {
    json j;
    j["step"] = row.step;
    j["reward_return"] = row.reward_return;
    j["cost_return"] = row.cost_return;
    j["kappa"] = row.kappa;
    j["eta_E"] = row.eta_e;
    j["c_max"] = row.c_max;
    j["entropy"] = row.entropy;
    j["critic_loss"] = row.critic_loss;
    return j;
}

json table_to_json(const Table& table) {
    json j;
    j["rows"] = table.rows();
    j["cols"] = table.cols();
    j["data"] = table.data();
    return j;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

struct SeedJob {
    std::uint64_t seed = 0;
    agents::TrainResult result;
    std::string error;
    bool failed = false;
};

std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& config) {
    if (const char* override_seed = std::getenv("SDH_SEED")) {
        return {static_cast<std::uint64_t>(std::stoull(override_seed))};
    }
    return config.seeds;
}

}  // namespace

double interquartile_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t trim = values.size() / 4;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = trim; i < values.size() - trim; ++i) {
        total += values[i];
        ++count;
    }
    return total / static_cast<double>(count);
}

RunResult run_experiment(const ExperimentConfig& config) {
    const FiniteMdp mdp = build_env(config.env);
    const ContinuationModel cont = build_continuation(config.continuation);
    const std::string hash = config_hash(config);
    const auto seeds = effective_seeds(config);

    std::filesystem::create_directories(config.out_dir);
    write_file(config.out_dir + "/config.json", config_to_json(config));

    std::vector<SeedJob> jobs(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) jobs[i].seed = seeds[i];

    // seeds are independent parallel jobs with no shared mutable state
    auto worker = [&](SeedJob& job) {
        try {
            job.result = agents::train(mdp, cont, config.continuation.schedules, config.learner,
                                       job.seed, nullptr);
        } catch (const std::exception& e) {
            job.failed = true;
            job.error = e.what();
        }
    };
    const unsigned max_threads = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t begin = 0; begin < jobs.size(); begin += max_threads) {
        std::vector<std::thread> pool;
        for (std::size_t i = begin; i < std::min(begin + max_threads, jobs.size()); ++i)
            pool.emplace_back(worker, std::ref(jobs[i]));
        for (auto& t : pool) t.join();
    }

    RunResult out;
    out.config_hash = hash;

    json summary;
    summary["config_hash"] = hash;
    summary["artifact_version"] = kArtifactVersion;
    summary["per_seed"] = json::array();
    std::vector<double> reward_finals;
    std::vector<double> cost_finals;

    for (auto& job : jobs) {
        const std::string tag = std::to_string(job.seed);
        if (job.failed) {
            // diagnostic snapshot for aborted runs
            json abort_doc;
            abort_doc["config_hash"] = hash;
            abort_doc["artifact_version"] = kArtifactVersion;
            abort_doc["seed"] = job.seed;
            abort_doc["error"] = job.error;
            write_file(config.out_dir + "/abort_seed" + tag + ".json", abort_doc.dump(2));
            throw std::runtime_error("seed " + tag + " aborted: " + job.error);
        }

        std::ostringstream metrics;
        json header;
        header["config_hash"] = hash;
        header["artifact_version"] = kArtifactVersion;
        header["seed"] = job.seed;
        header["cost_limit"] = config.continuation.limit_b;
        metrics << header.dump() << "\n";
        for (const auto& row : job.result.metrics) metrics << metrics_row_to_json(row).dump() << "\n";
        const std::string metrics_path = config.out_dir + "/metrics_seed" + tag + ".jsonl";
        write_file(metrics_path, metrics.str());

        json checkpoint;
        checkpoint["version"] = 1;
        checkpoint["config_hash"] = hash;
        checkpoint["artifact_version"] = kArtifactVersion;
        checkpoint["seed"] = job.seed;
        checkpoint["step"] = config.learner.total_steps;
        checkpoint["actor_logits"] = table_to_json(job.result.policy.logits());
        checkpoint["q_primary"] = table_to_json(job.result.q_r);
        checkpoint["q_info"] = table_to_json(job.result.q_kl);
        checkpoint["dual"] = {{"log_kappa", job.result.dual.log_kappa},
                              {"eta_E", job.result.dual.eta_e},
                              {"kl_budget_eps", job.result.dual.kl_budget_eps},
                              {"mpo_kl_eps", job.result.dual.mpo_kl_eps},
                              {"h_tgt", job.result.dual.h_tgt}};
        checkpoint["c_max"] = job.result.c_max;
        const std::string checkpoint_path = config.out_dir + "/checkpoint_seed" + tag + ".json";
        write_file(checkpoint_path, checkpoint.dump(2));

        SeedResult seed_result;
        seed_result.seed = job.seed;
        seed_result.final_reward_return = job.result.final_reward_return;
        seed_result.final_cost_return = job.result.final_cost_return;
        seed_result.metrics_path = metrics_path;
        seed_result.checkpoint_path = checkpoint_path;
        out.seeds.push_back(seed_result);

        summary["per_seed"].push_back({{"seed", job.seed},
                                       {"final_reward_return", job.result.final_reward_return},
                                       {"final_cost_return", job.result.final_cost_return}});
        reward_finals.push_back(job.result.final_reward_return);
        cost_finals.push_back(job.result.final_cost_return);
    }

    const double reward_mean =
        std::accumulate(reward_finals.begin(), reward_finals.end(), 0.0) / reward_finals.size();
    const double cost_mean =
        std::accumulate(cost_finals.begin(), cost_finals.end(), 0.0) / cost_finals.size();
    summary["aggregate"] = {{"reward_return_mean", reward_mean},
                            {"reward_return_iqm", interquartile_mean(reward_finals)},
                            {"cost_return_mean", cost_mean},
                            {"cost_return_iqm", interquartile_mean(cost_finals)}};
    out.summary_path = config.out_dir + "/summary.json";
    write_file(out.summary_path, summary.dump(2));
    return out;
}

namespace {

struct MetricsFile {
    std::string label;
    json header;
    std::vector<json> rows;
};

MetricsFile read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open metrics file: " + path);
    MetricsFile file;
    file.label = std::filesystem::path(path).stem().string();
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (first && j.contains("artifact_version")) {
            file.header = j;
            first = false;
            continue;
        }
        first = false;
        file.rows.push_back(std::move(j));
    }
    return file;
}

const char* kSeedColors[] = {"#bbbbbb", "#b3c7dd", "#c9b8d6", "#bcd6b8", "#dcc9a8",
                             "#d6b8b8", "#a8c4cc", "#ccb8cc", "#c4ccA8", "#b8c4d6"};

}  // namespace

std::vector<std::string> plot_metrics(const std::vector<std::string>& metrics_files,
                                      const std::string& out_dir) {
    if (metrics_files.empty()) throw std::invalid_argument("plot: no metrics files given");
    std::vector<MetricsFile> files;
    files.reserve(metrics_files.size());
    for (const auto& path : metrics_files) files.push_back(read_metrics(path));

    std::filesystem::create_directories(out_dir);
    const char* metric_keys[] = {"reward_return", "cost_return", "kappa",  "eta_E",
                                 "c_max",         "entropy",     "critic_loss"};
    std::vector<std::string> written;
    for (const char* key : metric_keys) {
        std::vector<svg::Series> series;
        std::vector<double> mean_x;
        std::vector<double> mean_acc;
        for (std::size_t f = 0; f < files.size(); ++f) {
            svg::Series trace;
            trace.label = files[f].label;
            trace.color = kSeedColors[f % (sizeof(kSeedColors) / sizeof(kSeedColors[0]))];
            for (const auto& row : files[f].rows) {
                if (!row.contains(key)) continue;
                trace.x.push_back(row.at("step").get<double>());
                trace.y.push_back(row.at(key).get<double>());
            }
            if (f == 0) {
                mean_x = trace.x;
                mean_acc.assign(trace.y.begin(), trace.y.end());
            } else if (trace.y.size() == mean_acc.size()) {
                for (std::size_t i = 0; i < mean_acc.size(); ++i) mean_acc[i] += trace.y[i];
            }
            series.push_back(std::move(trace));
        }
        if (series.front().x.empty()) continue;
        bool aligned = true;
        for (const auto& s : series) aligned = aligned && s.y.size() == mean_acc.size();
        if (aligned && files.size() > 1) {
            svg::Series mean;
            mean.label = "mean";
            mean.color = "#1f5fa8";
            mean.width = 2.5;
            mean.x = mean_x;
            for (double y : mean_acc) mean.y.push_back(y / static_cast<double>(files.size()));
            series.push_back(std::move(mean));
        }

        double reference = 0.0;
        bool with_reference = false;
        if (std::string(key) == "cost_return" && files.front().header.contains("cost_limit")) {
            reference = files.front().header.at("cost_limit").get<double>();
            with_reference = reference > 0.0;
        }
        std::string chart = svg::line_chart(key, "step", key, series, reference, with_reference);
        std::string provenance = "<!-- artifact_version " + std::string(kArtifactVersion);
        if (files.front().header.contains("config_hash"))
            provenance += " config_hash " + files.front().header.at("config_hash").get<std::string>();
        provenance += " -->\n";
        chart.insert(chart.find('\n') + 1, provenance);
        const std::string path = out_dir + "/" + key + ".svg";
        write_file(path, chart);
        written.push_back(path);
    }
    return written;
}

}  // namespace sdh::harness
