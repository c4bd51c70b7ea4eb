#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdh/agents.hpp"
#include "sdh/bellman.hpp"
#include "sdh/config.hpp"
#include "sdh/harness.hpp"
#include "sdh/mdp.hpp"
#include "sdh/oracle.hpp"
#include "sdh/replay.hpp"
#include "sdh/verify.hpp"

namespace py = pybind11;
using namespace sdh;

namespace {

Table table_from_nested(const std::vector<std::vector<double>>& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    Table table(r, c);
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(rows[i].size()) != c)
            throw std::invalid_argument("table rows must have equal length");
        for (int j = 0; j < c; ++j) table(i, j) = rows[i][j];
    }
    return table;
}

std::vector<std::vector<double>> table_to_nested(const Table& table) {
    std::vector<std::vector<double>> rows(table.rows(), std::vector<double>(table.cols()));
    for (int i = 0; i < table.rows(); ++i)
        for (int j = 0; j < table.cols(); ++j) rows[i][j] = table(i, j);
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "tabular laboratory for survival-weighted constrained RL";

    py::class_<rng::Stream>(m, "Stream")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform", [](rng::Stream& s) { return s.uniform(); })
        .def("uniform_int", &rng::Stream::uniform_int, py::arg("n"));

    py::class_<Table>(m, "Table")
        .def(py::init(&table_from_nested))
        .def_property_readonly("rows", &Table::rows)
        .def_property_readonly("cols", &Table::cols)
        .def("to_list", &table_to_nested)
        .def("__getitem__", [](const Table& t, std::pair<int, int> idx) {
            return t(idx.first, idx.second);
        });

    py::class_<SoftmaxPolicy>(m, "SoftmaxPolicy")
        .def(py::init<int, int>(), py::arg("n_states"), py::arg("n_actions"))
        .def_static("uniform", &SoftmaxPolicy::uniform)
        .def_property_readonly("n_states", &SoftmaxPolicy::n_states)
        .def_property_readonly("n_actions", &SoftmaxPolicy::n_actions)
        .def("probs", &SoftmaxPolicy::probs, py::arg("state"))
        .def("log_probs", &SoftmaxPolicy::log_probs, py::arg("state"))
        .def("entropy", &SoftmaxPolicy::entropy, py::arg("state"))
        .def("set_probs", &SoftmaxPolicy::set_probs, py::arg("state"), py::arg("probs"),
             py::arg("logit_clamp") = 30.0)
        .def("set_logit", [](SoftmaxPolicy& p, int s, int a, double v) { p.logits()(s, a) = v; })
        .def("logits", [](const SoftmaxPolicy& p) { return table_to_nested(p.logits()); });

    py::class_<FiniteMdp>(m, "FiniteMdp")
        .def_readonly("n_states", &FiniteMdp::n_states)
        .def_readonly("n_actions", &FiniteMdp::n_actions)
        .def_readonly("gamma", &FiniteMdp::gamma)
        .def("reward", [](const FiniteMdp& mdp, int s, int a) { return mdp.reward(s, a); })
        .def("cost_vec", &FiniteMdp::cost_vec, py::arg("s"), py::arg("a"))
        .def("p", [](const FiniteMdp& mdp, int s, int a, int s2) { return mdp.p(s, a, s2); })
        .def("is_terminal", [](const FiniteMdp& mdp, int s) { return mdp.terminal[s] != 0; })
        .def("validate", &FiniteMdp::validate)
        .def("to_json", [](const FiniteMdp& mdp) { return mdp_to_json(mdp); })
        .def_static("from_json", &mdp_from_json, py::arg("text"));

    m.def("build_counterexample_mdp", &build_counterexample_mdp, py::arg("r"), py::arg("gamma"));
    m.def("build_hazard_chain", &build_hazard_chain, py::arg("n"), py::arg("hazard_states"),
          py::arg("hazard_cost"), py::arg("shelter_reward") = 0.0, py::arg("goal_reward") = 1.0,
          py::arg("gamma") = 0.9, py::arg("uniform_start") = false);
    m.def("build_hazard_gridworld", &build_hazard_gridworld, py::arg("width"), py::arg("height"),
          py::arg("goal"), py::arg("hazards"), py::arg("gamma") = 0.9);

    py::class_<StepOutcome>(m, "StepOutcome")
        .def_readonly("next_state", &StepOutcome::next_state)
        .def_readonly("reward", &StepOutcome::reward)
        .def_readonly("cost_vec", &StepOutcome::cost_vec)
        .def_readonly("terminated", &StepOutcome::terminated)
        .def_readonly("truncated", &StepOutcome::truncated);
    m.def("step", &step, py::arg("mdp"), py::arg("s"), py::arg("a"), py::arg("stream"));

    py::enum_<ChannelAggregate>(m, "ChannelAggregate")
        .value("SumCosts", ChannelAggregate::SumCosts)
        .value("MinAlpha", ChannelAggregate::MinAlpha);
    py::enum_<EmaMode>(m, "EmaMode")
        .value("BatchMax", EmaMode::BatchMax)
        .value("PerSample", EmaMode::PerSample);

    py::class_<ContinuationModel>(m, "ContinuationModel")
        .def_static("exponential", &ContinuationModel::exponential, py::arg("lambda_"),
                    py::arg("aggregate") = ChannelAggregate::SumCosts)
        .def_static("cat_normalized", &ContinuationModel::cat_normalized, py::arg("p_max"),
                    py::arg("c_max_init"), py::arg("eps"), py::arg("limit_b"), py::arg("rho"),
                    py::arg("ema_mode") = EmaMode::BatchMax,
                    py::arg("aggregate") = ChannelAggregate::MinAlpha)
        .def_static("hard_indicator", &ContinuationModel::hard_indicator)
        .def_static("constant", &ContinuationModel::constant, py::arg("alpha"))
        .def("alpha", &ContinuationModel::alpha, py::arg("cost_vec"))
        .def("update_scale", &ContinuationModel::update_scale, py::arg("batch_costs"))
        .def_property_readonly("c_max", &ContinuationModel::c_max)
        .def("set_lambda", &ContinuationModel::set_lambda)
        .def("set_p_max", &ContinuationModel::set_p_max);

    m.def("alpha_exponential", &alpha_exponential, py::arg("cost_vec"), py::arg("lambda_"));
    m.def("alpha_cat", &alpha_cat, py::arg("violation"), py::arg("p_max"), py::arg("c_max"),
          py::arg("eps"));
    m.def("aggregate_min", &aggregate_min, py::arg("alphas"));
    m.def("ema_update", &ema_update, py::arg("c_max"), py::arg("batch_costs"), py::arg("limit_b"),
          py::arg("rho"));
    m.def("hazard", [](double alpha) {
        const auto h = hazard(alpha);
        return py::make_tuple(h.value, h.infinite);
    });

    // bellman
    py::class_<bellman::ShapedMdp>(m, "ShapedMdp")
        .def_property_readonly("r_tilde",
                               [](const bellman::ShapedMdp& s) { return table_to_nested(s.r_tilde); })
        .def_property_readonly("gamma_tilde", [](const bellman::ShapedMdp& s) {
            return table_to_nested(s.gamma_tilde);
        });
    py::class_<bellman::CriticTables>(m, "CriticTables")
        .def_property_readonly("q_r",
                               [](const bellman::CriticTables& c) { return table_to_nested(c.q_r); })
        .def_property_readonly("q_kl",
                               [](const bellman::CriticTables& c) { return table_to_nested(c.q_kl); })
        .def_readonly("v_r", &bellman::CriticTables::v_r)
        .def_readonly("v_kl", &bellman::CriticTables::v_kl);

    m.def("shape", &bellman::shape, py::arg("mdp"), py::arg("cont"));
    m.def(
        "evaluate_policy",
        [](const SoftmaxPolicy& policy, const bellman::ShapedMdp& shaped, double tol) {
            return bellman::evaluate_policy(policy, shaped, Table(), tol);
        },
        py::arg("policy"), py::arg("shaped"), py::arg("tol") = 1e-10);
    m.def(
        "soft_evaluate_as",
        [](const SoftmaxPolicy& policy, const bellman::ShapedMdp& shaped, double kappa, double ell_c,
           double tol) {
            const auto out = bellman::soft_evaluate_as(policy, shaped, kappa, ell_c, tol);
            return py::make_tuple(table_to_nested(out.q), out.v);
        },
        py::arg("policy"), py::arg("shaped"), py::arg("kappa"), py::arg("ell_c"),
        py::arg("tol") = 1e-10);
    m.def("two_critic_fixed_point", &bellman::two_critic_fixed_point, py::arg("policy"),
          py::arg("shaped"), py::arg("h_tgt"), py::arg("tol") = 1e-10);
    m.def(
        "combine_kappa",
        [](const bellman::CriticTables& critics, double kappa) {
            return table_to_nested(bellman::combine_kappa(critics, kappa));
        },
        py::arg("critics"), py::arg("kappa"));
    m.def("contraction_check", &bellman::contraction_check, py::arg("shaped"), py::arg("policy"),
          py::arg("n_trials"), py::arg("stream"));

    // oracle
    py::enum_<oracle::Semantics>(m, "Semantics")
        .value("AS", oracle::Semantics::AS)
        .value("VT", oracle::Semantics::VT)
        .value("SurvOnly", oracle::Semantics::SurvOnly);

    py::class_<oracle::ObjectiveSpec>(m, "ObjectiveSpec")
        .def(py::init<>())
        .def_readwrite("semantics", &oracle::ObjectiveSpec::semantics)
        .def_readwrite("kappa", &oracle::ObjectiveSpec::kappa)
        .def_readwrite("ell_c", &oracle::ObjectiveSpec::ell_c)
        .def_readwrite("horizon", &oracle::ObjectiveSpec::horizon)
        .def_readwrite("tail_tol", &oracle::ObjectiveSpec::tail_tol);

    m.def(
        "j_surv_exact",
        [](const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
           const oracle::ObjectiveSpec& spec) {
            const auto out = oracle::j_surv_exact(mdp, policy, cont, spec);
            return py::make_tuple(out.value, out.tail_bound);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("cont"), py::arg("spec"));
    m.def("j_as_exact", &oracle::j_as_exact, py::arg("mdp"), py::arg("policy"), py::arg("cont"),
          py::arg("spec"));
    m.def("j_vt_exact", &oracle::j_vt_exact, py::arg("mdp"), py::arg("policy"), py::arg("cont"),
          py::arg("spec"));
    m.def("decision_mass_z", &oracle::decision_mass_z, py::arg("mdp"), py::arg("policy"),
          py::arg("cont"), py::arg("spec"));
    m.def(
        "counterexample_objectives",
        [](double p, double gamma, double kappa, double r) {
            const auto out = oracle::counterexample_objectives(p, gamma, kappa, r);
            return py::make_tuple(out.j_as, out.j_as_naive);
        },
        py::arg("p"), py::arg("gamma"), py::arg("kappa"), py::arg("r"));
    m.def(
        "argmax_scan",
        [](const std::function<double(double)>& f, double lo, double hi, int grid_n,
           int refine_iters) { return oracle::argmax_scan(f, lo, hi, grid_n, refine_iters); },
        py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("grid_n") = 512,
        py::arg("refine_iters") = 60);

    py::enum_<oracle::SurvivalMode>(m, "SurvivalMode")
        .value("Exact", oracle::SurvivalMode::Exact)
        .value("MonteCarlo", oracle::SurvivalMode::MonteCarlo);
    m.def("survival_statistic", &oracle::survival_statistic, py::arg("mdp"), py::arg("policy"),
          py::arg("lambda_"), py::arg("horizon"), py::arg("mode"), py::arg("n_samples"),
          py::arg("stream"));
    m.def("violation_probability_exact", &oracle::violation_probability_exact, py::arg("mdp"),
          py::arg("policy"), py::arg("threshold"), py::arg("horizon"));
    m.def("empirical_violation_frequency", &oracle::empirical_violation_frequency, py::arg("mdp"),
          py::arg("policy"), py::arg("threshold"), py::arg("horizon"), py::arg("n_samples"),
          py::arg("stream"));

    py::class_<oracle::ChanceCertificate>(m, "ChanceCertificate")
        .def_readonly("lambda_", &oracle::ChanceCertificate::lambda)
        .def_readonly("threshold_b", &oracle::ChanceCertificate::threshold_b)
        .def_readonly("horizon", &oracle::ChanceCertificate::horizon)
        .def_readonly("s_h", &oracle::ChanceCertificate::s_h)
        .def_readonly("bound", &oracle::ChanceCertificate::bound);
    m.def("chance_bound", &oracle::chance_bound, py::arg("s_h"), py::arg("lambda_"), py::arg("b"),
          py::arg("horizon"));

    m.def(
        "mc_gate_estimate",
        [](const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont, int t,
           oracle::Semantics semantics, std::int64_t n_samples, rng::Stream& stream) {
            const auto out = oracle::mc_gate_estimate(mdp, policy, cont, t, semantics, n_samples,
                                                      stream);
            return py::make_tuple(out.gamma_gate, out.decision_gate);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("cont"), py::arg("t"), py::arg("semantics"),
        py::arg("n_samples"), py::arg("stream"));
    m.def(
        "mc_elbo_estimate",
        [](const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
           const oracle::ObjectiveSpec& spec, std::int64_t n_samples, rng::Stream& stream) {
            const auto out = oracle::mc_elbo_estimate(mdp, policy, cont, spec, n_samples, stream);
            return py::make_tuple(out.mean, out.std_error);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("cont"), py::arg("spec"), py::arg("n_samples"),
        py::arg("stream"));

    // replay
    py::class_<replay::NStepRecord>(m, "NStepRecord")
        .def_readonly("s", &replay::NStepRecord::s)
        .def_readonly("a", &replay::NStepRecord::a)
        .def_readonly("r_n", &replay::NStepRecord::r_n)
        .def_readonly("cost", &replay::NStepRecord::cost)
        .def_readonly("s_boot", &replay::NStepRecord::s_boot)
        .def_readonly("u_boot", &replay::NStepRecord::u_boot)
        .def_readonly("done", &replay::NStepRecord::done);
    m.def(
        "compress_window",
        [](const std::vector<std::tuple<int, int, double, double, double, int>>& steps, double gamma,
           bool done) {
            std::vector<replay::WindowStep> window;
            window.reserve(steps.size());
            for (const auto& [s, a, reward, cost, alpha, s_next] : steps)
                window.push_back({s, a, reward, cost, alpha, s_next, 0.0});
            return replay::compress_window(window, gamma, done);
        },
        py::arg("steps"), py::arg("gamma"), py::arg("done") = false,
        "steps: list of (s, a, reward, cost, alpha, s_next) tuples");
    m.def("terminal_mask", &replay::terminal_mask, py::arg("done"), py::arg("truncated"),
          py::arg("gamma_tilde"));

    // agents
    py::enum_<agents::Variant>(m, "Variant")
        .value("AsSacFull", agents::Variant::AsSacFull)
        .value("AsSacNaiveCritic", agents::Variant::AsSacNaiveCritic)
        .value("AsSacConstKappa", agents::Variant::AsSacConstKappa)
        .value("AsSacNaiveTuning", agents::Variant::AsSacNaiveTuning)
        .value("VtMpo", agents::Variant::VtMpo);
    py::enum_<agents::LivingCost>(m, "LivingCost")
        .value("TargetEntropy", agents::LivingCost::TargetEntropy)
        .value("Zero", agents::LivingCost::Zero);

    py::class_<agents::LearnerConfig>(m, "LearnerConfig")
        .def(py::init<>())
        .def_readwrite("variant", &agents::LearnerConfig::variant)
        .def_readwrite("n_step", &agents::LearnerConfig::n_step)
        .def_readwrite("batch_size", &agents::LearnerConfig::batch_size)
        .def_readwrite("lr_actor", &agents::LearnerConfig::lr_actor)
        .def_readwrite("lr_critic", &agents::LearnerConfig::lr_critic)
        .def_readwrite("lr_dual", &agents::LearnerConfig::lr_dual)
        .def_readwrite("tau", &agents::LearnerConfig::tau)
        .def_readwrite("living_cost", &agents::LearnerConfig::living_cost)
        .def_readwrite("kappa_init", &agents::LearnerConfig::kappa_init)
        .def_readwrite("kl_budget_eps", &agents::LearnerConfig::kl_budget_eps)
        .def_readwrite("mpo_kl_eps", &agents::LearnerConfig::mpo_kl_eps)
        .def_readwrite("target_entropy", &agents::LearnerConfig::target_entropy)
        .def_readwrite("gi_variant", &agents::LearnerConfig::gi_variant)
        .def_readwrite("warmup_steps", &agents::LearnerConfig::warmup_steps)
        .def_readwrite("update_every", &agents::LearnerConfig::update_every)
        .def_readwrite("actor_every", &agents::LearnerConfig::actor_every)
        .def_readwrite("m_step_iters", &agents::LearnerConfig::m_step_iters)
        .def_readwrite("m_step_lr", &agents::LearnerConfig::m_step_lr)
        .def_readwrite("buffer_capacity", &agents::LearnerConfig::buffer_capacity)
        .def_readwrite("max_episode_steps", &agents::LearnerConfig::max_episode_steps)
        .def_readwrite("eval_episodes", &agents::LearnerConfig::eval_episodes)
        .def_readwrite("total_steps", &agents::LearnerConfig::total_steps)
        .def_readwrite("eval_interval", &agents::LearnerConfig::eval_interval);

    py::class_<agents::MetricsRow>(m, "MetricsRow")
        .def_readonly("step", &agents::MetricsRow::step)
        .def_readonly("reward_return", &agents::MetricsRow::reward_return)
        .def_readonly("cost_return", &agents::MetricsRow::cost_return)
        .def_readonly("kappa", &agents::MetricsRow::kappa)
        .def_readonly("eta_E", &agents::MetricsRow::eta_e)
        .def_readonly("c_max", &agents::MetricsRow::c_max)
        .def_readonly("entropy", &agents::MetricsRow::entropy)
        .def_readonly("critic_loss", &agents::MetricsRow::critic_loss);

    py::class_<agents::TrainResult>(m, "TrainResult")
        .def_readonly("policy", &agents::TrainResult::policy)
        .def_readonly("final_reward_return", &agents::TrainResult::final_reward_return)
        .def_readonly("final_cost_return", &agents::TrainResult::final_cost_return)
        .def_readonly("metrics", &agents::TrainResult::metrics);

    m.def(
        "train",
        [](const FiniteMdp& mdp, const ContinuationModel& cont,
           const agents::LearnerConfig& config, std::uint64_t seed) {
            return agents::train(mdp, cont, {}, config, seed);
        },
        py::arg("mdp"), py::arg("cont"), py::arg("config"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());

    // harness
    m.def(
        "run_experiment_json",
        [](const std::string& config_json) {
            const auto config = harness::parse_config(config_json);
            const auto result = harness::run_experiment(config);
            py::dict out;
            out["config_hash"] = result.config_hash;
            out["summary_path"] = result.summary_path;
            py::list seeds;
            for (const auto& seed : result.seeds) {
                py::dict entry;
                entry["seed"] = seed.seed;
                entry["final_reward_return"] = seed.final_reward_return;
                entry["final_cost_return"] = seed.final_cost_return;
                entry["metrics_path"] = seed.metrics_path;
                seeds.append(entry);
            }
            out["seeds"] = seeds;
            return out;
        },
        py::arg("config_json"));

    // verification suites
    m.def("verify_suite_names", &verify::suite_names);
    m.def(
        "run_verify_suite",
        [](const std::string& name) {
            const auto report = verify::run_suite(name);
            py::dict out;
            out["suite"] = report.suite;
            out["passed"] = report.passed;
            out["seconds"] = report.seconds;
            py::list checks;
            for (const auto& check : report.checks) {
                py::dict entry;
                entry["name"] = check.name;
                entry["passed"] = check.passed;
                entry["details"] = check.details;
                checks.append(entry);
            }
            out["checks"] = checks;
            return out;
        },
        py::arg("name"));
}
