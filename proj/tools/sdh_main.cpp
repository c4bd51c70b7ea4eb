#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "sdh/bellman.hpp"
#include "sdh/config.hpp"
#include "sdh/harness.hpp"
#include "sdh/oracle.hpp"
#include "sdh/svg.hpp"
#include "sdh/verify.hpp"

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

int cmd_run(const std::string& config_path) {
    const auto config = sdh::harness::load_config(config_path);
    const auto result = sdh::harness::run_experiment(config);
    std::cout << "config hash " << result.config_hash << "\n";
    for (const auto& seed : result.seeds)
        std::cout << "seed " << seed.seed << ": reward " << seed.final_reward_return << ", cost "
                  << seed.final_cost_return << "  (" << seed.metrics_path << ")\n";
    std::cout << "summary: " << result.summary_path << "\n";
    return 0;
}

int cmd_verify(const std::string& suite, const std::string& out_path) {
    std::vector<sdh::verify::SuiteReport> reports;
    if (suite == "all") {
        for (const auto& name : sdh::verify::suite_names())
            reports.push_back(sdh::verify::run_suite(name));
    } else {
        reports.push_back(sdh::verify::run_suite(suite));
    }

    json doc = json::array();
    bool all_passed = true;
    for (const auto& report : reports) {
        json entry;
        entry["suite"] = report.suite;
        entry["passed"] = report.passed;
        entry["seconds"] = report.seconds;
        entry["checks"] = json::array();
        for (const auto& check : report.checks) {
            entry["checks"].push_back(
                {{"name", check.name}, {"passed", check.passed}, {"details", check.details}});
            std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << report.suite << ": " << check.name
                      << " - " << check.details << "\n";
        }
        all_passed = all_passed && report.passed;
        doc.push_back(entry);
    }
    if (!out_path.empty()) write_file(out_path, doc.dump(2));
    return all_passed ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out_dir) {
    const auto written = sdh::harness::plot_metrics(files, out_dir);
    for (const auto& path : written) std::cout << path << "\n";
    return 0;
}

int cmd_oracle_counterexample(double gamma, double kappa, double r, const std::string& out_dir) {
    const auto j_as = [&](double p) {
        return sdh::oracle::counterexample_objectives(p, gamma, kappa, r).j_as;
    };
    const auto j_asn = [&](double p) {
        return sdh::oracle::counterexample_objectives(p, gamma, kappa, r).j_as_naive;
    };
    const double p_as = sdh::oracle::argmax_scan(j_as, 0.0, 1.0);
    const double p_asn = sdh::oracle::argmax_scan(j_asn, 0.0, 1.0);

    json doc;
    doc["gamma"] = gamma;
    doc["kappa"] = kappa;
    doc["r"] = r;
    doc["argmax_exact"] = p_as;
    doc["argmax_no_living_cost"] = p_asn;
    doc["value_exact_at_argmax"] = j_as(p_as);
    doc["value_no_living_cost_at_argmax"] = j_asn(p_asn);
    std::cout << doc.dump(2) << "\n";

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/counterexample.json", doc.dump(2));
        sdh::svg::Series exact{"exact objective", "#1f5fa8", 2.0, {}, {}};
        sdh::svg::Series naive{"living cost dropped", "#c0392b", 2.0, {}, {}};
        for (int i = 1; i < 400; ++i) {
            const double p = i / 400.0;
            exact.x.push_back(p);
            exact.y.push_back(j_as(p));
            naive.x.push_back(p);
            naive.y.push_back(j_asn(p));
        }
        write_file(out_dir + "/counterexample.svg",
                   sdh::svg::line_chart("one-state objective vs continue probability", "p", "J(p)",
                                        {exact, naive}));
        std::cout << "curves written to " << out_dir << "\n";
    }
    return 0;
}

int cmd_oracle_chance_bound(const std::string& config_path, double lambda, double threshold,
                            int horizon, std::int64_t samples, const std::string& out_path) {
    const auto config = sdh::harness::load_config(config_path);
    const auto mdp = sdh::harness::build_env(config.env);
    const auto policy = sdh::SoftmaxPolicy::uniform(mdp.n_states, mdp.n_actions);

    sdh::rng::Stream stream = sdh::rng::Stream::derive(config.seeds.front(), sdh::rng::kOracle);
    const double s_h = sdh::oracle::survival_statistic(mdp, policy, lambda, horizon,
                                                       sdh::oracle::SurvivalMode::Exact, samples,
                                                       stream);
    const auto cert = sdh::oracle::chance_bound(s_h, lambda, threshold, horizon);
    const double freq = sdh::oracle::empirical_violation_frequency(mdp, policy, threshold, horizon,
                                                                   samples, stream);
    json doc;
    doc["lambda"] = cert.lambda;
    doc["threshold_b"] = cert.threshold_b;
    doc["horizon"] = cert.horizon;
    doc["survival_statistic"] = cert.s_h;
    doc["bound"] = cert.bound;
    doc["empirical_violation_frequency"] = freq;
    doc["config_hash"] = sdh::harness::config_hash(config);
    std::cout << doc.dump(2) << "\n";
    if (!out_path.empty()) write_file(out_path, doc.dump(2));
    return 0;
}

int cmd_env_export(const std::string& name, const std::string& config_path,
                   const std::string& out_path) {
    sdh::harness::EnvSpec spec;
    if (!config_path.empty()) {
        spec = sdh::harness::load_config(config_path).env;
    } else {
        spec.name = name;
        if (name == "hazard_chain") {
            spec.n = 8;
            spec.hazards = {3, 4};
        } else if (name == "hazard_gridworld") {
            spec.width = 3;
            spec.height = 3;
            spec.goal = {2, 2};
            spec.hazard_cells = {{1, 1}};
        }
    }
    const auto mdp = sdh::harness::build_env(spec);
    const std::string text = sdh::mdp_to_json(mdp);
    if (out_path.empty())
        std::cout << text << "\n";
    else
        write_file(out_path, text);
    return 0;
}

int cmd_solve(const std::string& config_path, const std::string& out_dir, double kappa,
              bool soft) {
    const auto config = sdh::harness::load_config(config_path);
    const auto mdp = sdh::harness::build_env(config.env);
    const auto cont = sdh::harness::build_continuation(config.continuation);
    const auto policy = sdh::SoftmaxPolicy::uniform(mdp.n_states, mdp.n_actions);
    const auto shaped = sdh::bellman::shape(mdp, cont);

    std::filesystem::create_directories(out_dir);
    if (soft) {
        const double ell_c = std::log(static_cast<double>(mdp.n_actions));
        const auto solution = sdh::bellman::soft_evaluate_as(policy, shaped, kappa, ell_c);
        write_file(out_dir + "/V.csv", sdh::bellman::values_to_csv(solution.v));
        write_file(out_dir + "/Q.csv", sdh::bellman::q_table_to_csv(solution.q));
    } else {
        const auto v = sdh::bellman::evaluate_policy(policy, shaped, sdh::Table());
        sdh::Table q(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                double next = 0.0;
                for (int s2 = 0; s2 < mdp.n_states; ++s2) next += shaped.p(s, a, s2) * v[s2];
                q(s, a) = shaped.r_tilde(s, a) + shaped.gamma_tilde(s, a) * next;
            }
        }
        write_file(out_dir + "/V.csv", sdh::bellman::values_to_csv(v));
        write_file(out_dir + "/Q.csv", sdh::bellman::q_table_to_csv(q));
    }
    std::cout << "wrote " << out_dir << "/V.csv and " << out_dir << "/Q.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic-decision-horizon laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment config (one metrics file per seed)");
    run->add_option("config", config_path, "experiment config JSON")->required();

    std::string suite = "all";
    std::string verify_out;
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", suite, "suite name or 'all'");
    verify->add_option("-o,--out", verify_out, "write the JSON report here");

    std::vector<std::string> plot_files;
    std::string plot_out = "plots";
    auto* plot = app.add_subcommand("plot", "render SVG plots from metrics files");
    plot->add_option("files", plot_files, "metrics JSONL files")->required()->expected(-1);
    plot->add_option("-o,--out", plot_out, "output directory");

    auto* oracle_cmd = app.add_subcommand("oracle", "closed-form oracles and certificates");
    oracle_cmd->require_subcommand(1);

    double gamma = 0.9, kappa = 1.0, r = 0.4;
    std::string oracle_out;
    auto* cex = oracle_cmd->add_subcommand("counterexample",
                                           "optimizers of the one-state continue/stop objective");
    cex->add_option("--gamma", gamma, "discount factor");
    cex->add_option("--kappa", kappa, "temperature");
    cex->add_option("--r", r, "continue reward");
    cex->add_option("-o,--out", oracle_out, "also write JSON + SVG curves to this directory");

    std::string cb_config;
    double cb_lambda = 1.0, cb_threshold = 1.0;
    int cb_horizon = 10;
    std::int64_t cb_samples = 100000;
    std::string cb_out;
    auto* chance = oracle_cmd->add_subcommand("chance-bound",
                                              "survival-statistic certificate for an env config");
    chance->add_option("config", cb_config, "experiment config JSON (env block is used)")->required();
    chance->add_option("--lambda", cb_lambda, "continuation scale");
    chance->add_option("--threshold", cb_threshold, "cumulative-cost threshold b");
    chance->add_option("--horizon", cb_horizon, "certificate horizon H");
    chance->add_option("--samples", cb_samples, "rollouts for the empirical frequency");
    chance->add_option("-o,--out", cb_out, "write the JSON certificate here");

    auto* env_cmd = app.add_subcommand("env", "environment utilities");
    env_cmd->require_subcommand(1);
    std::string env_name = "hazard_chain";
    std::string env_config;
    std::string env_out;
    auto* env_export = env_cmd->add_subcommand("export", "serialize a built-in env to JSON");
    env_export->add_option("name", env_name, "counterexample | hazard_chain | hazard_gridworld");
    env_export->add_option("--config", env_config, "take the env block from this config instead");
    env_export->add_option("-o,--out", env_out, "output file (stdout when omitted)");

    std::string solve_config;
    std::string solve_out = "solve_out";
    double solve_kappa = 0.0;
    bool solve_soft = false;
    auto* solve = app.add_subcommand("solve", "tabular policy evaluation; exports V/Q as CSV");
    solve->add_option("config", solve_config, "experiment config JSON")->required();
    solve->add_option("-o,--out", solve_out, "output directory");
    solve->add_option("--kappa", solve_kappa, "temperature for the soft evaluation");
    solve->add_flag("--soft", solve_soft, "solve the soft recursion instead of the plain one");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path);
        if (*verify) return cmd_verify(suite, verify_out);
        if (*plot) return cmd_plot(plot_files, plot_out);
        if (*cex) return cmd_oracle_counterexample(gamma, kappa, r, oracle_out);
        if (*chance)
            return cmd_oracle_chance_bound(cb_config, cb_lambda, cb_threshold, cb_horizon, cb_samples,
                                           cb_out);
        if (*env_export) return cmd_env_export(env_name, env_config, env_out);
        if (*solve) return cmd_solve(solve_config, solve_out, solve_kappa, solve_soft);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
