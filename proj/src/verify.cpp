#include "sdh/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "sdh/agents.hpp"
#include "sdh/bellman.hpp"
#include "sdh/harness.hpp"
#include "sdh/oracle.hpp"
#include "sdh/replay.hpp"

namespace sdh::verify {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6g", v);
    return buffer;
}

void add_check(SuiteReport& report, const std::string& name, bool passed,
               const std::string& details) {
    report.checks.push_back({name, passed, details});
}

void finish(SuiteReport& report, Clock::time_point start) {
    report.seconds = seconds_since(start);
    report.passed = !report.checks.empty();
    for (const auto& check : report.checks) report.passed = report.passed && check.passed;
}

std::vector<double> normalized_row(rng::Stream& stream, int n) {
    std::vector<double> row(n);
    double total = 0.0;
    for (double& v : row) {
        v = stream.uniform() + 1e-3;
        total += v;
    }
    for (double& v : row) v /= total;
    // push rounding residue into the largest entry so the row sums to 1 exactly
    double sum = 0.0;
    for (double v : row) sum += v;
    auto top = std::max_element(row.begin(), row.end());
    *top += 1.0 - sum;
    return row;
}

}  // namespace

FiniteMdp random_mdp(rng::Stream& stream, int min_states, int max_states, int min_actions,
                     int max_actions, double gamma_lo, double gamma_hi, double cost_scale) {
    FiniteMdp mdp;
    mdp.n_states = min_states + static_cast<int>(stream.uniform_int(max_states - min_states + 1));
    mdp.n_actions = min_actions + static_cast<int>(stream.uniform_int(max_actions - min_actions + 1));
    mdp.gamma = stream.uniform(gamma_lo, gamma_hi);
    mdp.transition.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states);
    mdp.reward = Table(mdp.n_states, mdp.n_actions);
    Table cost(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto row = normalized_row(stream, mdp.n_states);
            for (int s2 = 0; s2 < mdp.n_states; ++s2) mdp.p(s, a, s2) = row[s2];
            mdp.reward(s, a) = stream.uniform();
            cost(s, a) = stream.bernoulli(0.4) ? cost_scale * stream.uniform() : 0.0;
        }
    }
    mdp.costs = {cost};
    mdp.initial_dist = normalized_row(stream, mdp.n_states);
    mdp.terminal.assign(mdp.n_states, 0);
    mdp.validate();
    return mdp;
}

SoftmaxPolicy random_policy(rng::Stream& stream, int n_states, int n_actions, double logit_range) {
    SoftmaxPolicy policy(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            policy.logits()(s, a) = stream.uniform(-logit_range, logit_range);
    return policy;
}

namespace {

// ---------------------------------------------------------------------------
// counterexample: optimizer locations of the exact and living-cost-free
// objectives (gamma, kappa, r) = (0.9, 1, 0.4)
// ---------------------------------------------------------------------------

SuiteReport suite_counterexample() {
    const auto start = Clock::now();
    SuiteReport report{"counterexample"};

    const auto j_as = [](double p) { return oracle::counterexample_objectives(p, 0.9, 1.0, 0.4).j_as; };
    const auto j_asn = [](double p) {
        return oracle::counterexample_objectives(p, 0.9, 1.0, 0.4).j_as_naive;
    };
    const double p_as = oracle::argmax_scan(j_as, 0.0, 1.0);
    const double p_asn = oracle::argmax_scan(j_asn, 0.0, 1.0);
    add_check(report, "argmax of exact objective near 0.707", std::abs(p_as - 0.707) <= 0.005,
              "observed " + fmt(p_as) + ", expected 0.707 +/- 0.005");
    add_check(report, "argmax without living cost near 0.984", std::abs(p_asn - 0.984) <= 0.005,
              "observed " + fmt(p_asn) + ", expected 0.984 +/- 0.005");
    const double elapsed = seconds_since(start);
    add_check(report, "runtime under 1 s", elapsed < 1.0, fmt(elapsed) + " s");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// contraction: observed operator modulus stays below gamma
// ---------------------------------------------------------------------------

SuiteReport suite_contraction() {
    const auto start = Clock::now();
    SuiteReport report{"contraction"};
    rng::Stream stream = rng::Stream::derive(0xC0117AC7, rng::kVerify);

    int instances = 0;
    double worst_excess = -1.0;
    bool all_ok = true;
    for (int i = 0; i < 1000; ++i) {
        const FiniteMdp mdp = random_mdp(stream, 2, 6, 2, 4, 0.5, 0.99);
        const auto cont = ContinuationModel::exponential(stream.uniform(0.0, 2.0));
        const auto shaped = bellman::shape(mdp, cont);
        const auto policy = random_policy(stream, mdp.n_states, mdp.n_actions, 2.0);
        const double modulus = bellman::contraction_check(shaped, policy, 2, stream);
        instances += 2;
        worst_excess = std::max(worst_excess, modulus - mdp.gamma);
        all_ok = all_ok && modulus <= mdp.gamma + 1e-12;
    }
    add_check(report, "modulus <= gamma + 1e-12 on " + std::to_string(instances) + " tuples", all_ok,
              "worst modulus - gamma = " + fmt(worst_excess));
    const double elapsed = seconds_since(start);
    add_check(report, "runtime under 30 s", elapsed < 30.0, fmt(elapsed) + " s");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// objectives-mc: gate-explicit Monte Carlo brackets the closed-form
// objectives within 4 sigma
// ---------------------------------------------------------------------------

SuiteReport suite_objectives_mc() {
    const auto start = Clock::now();
    SuiteReport report{"objectives-mc"};
    rng::Stream stream = rng::Stream::derive(0x0B1EC7, rng::kVerify);

    bool all_ok = true;
    double worst_sigma = 0.0;
    for (int i = 0; i < 10; ++i) {
        FiniteMdp mdp = random_mdp(stream, 3, 3, 2, 3, 0.9, 0.9);
        const auto cont = ContinuationModel::exponential(stream.uniform(0.3, 1.5));
        const auto policy = random_policy(stream, mdp.n_states, mdp.n_actions, 1.5);

        oracle::ObjectiveSpec spec;
        spec.kappa = 0.5;
        spec.ell_c = std::log(static_cast<double>(mdp.n_actions));
        spec.horizon = 700;
        spec.tail_tol = 1e-8;

        spec.semantics = oracle::Semantics::AS;
        const double exact_as = oracle::j_as_exact(mdp, policy, cont, spec);
        rng::Stream mc_stream = rng::Stream::derive(0x0B1EC7, rng::kOracle, 2 * i);
        const auto mc_as = oracle::mc_elbo_estimate(mdp, policy, cont, spec, 1000000, mc_stream);

        spec.semantics = oracle::Semantics::VT;
        const double exact_vt = oracle::j_vt_exact(mdp, policy, cont, spec);
        rng::Stream mc_stream_vt = rng::Stream::derive(0x0B1EC7, rng::kOracle, 2 * i + 1);
        const auto mc_vt = oracle::mc_elbo_estimate(mdp, policy, cont, spec, 1000000, mc_stream_vt);

        const double z_as = std::abs(mc_as.mean - exact_as) / mc_as.std_error;
        const double z_vt = std::abs(mc_vt.mean - exact_vt) / mc_vt.std_error;
        worst_sigma = std::max({worst_sigma, z_as, z_vt});
        all_ok = all_ok && z_as <= 4.0 && z_vt <= 4.0;
    }
    add_check(report, "MC estimates bracket exact objectives on 10 random 3-state MDPs (4 sigma)",
              all_ok, "worst |z| = " + fmt(worst_sigma));
    const double elapsed = seconds_since(start);
    add_check(report, "runtime under 2 min", elapsed < 120.0, fmt(elapsed) + " s");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// two-critic: V_kappa assembled from the kappa-free fixed points equals the
// exact objective
// ---------------------------------------------------------------------------

SuiteReport suite_two_critic() {
    const auto start = Clock::now();
    SuiteReport report{"two-critic"};
    rng::Stream stream = rng::Stream::derive(0x7C0117, rng::kVerify);

    bool value_ok = true;
    bool kappa_free_ok = true;
    double worst_gap = 0.0;
    for (int i = 0; i < 20; ++i) {
        const FiniteMdp mdp = random_mdp(stream, 2, 5, 2, 4, 0.8, 0.95);
        const auto cont = ContinuationModel::exponential(stream.uniform(0.0, 2.0));
        const auto policy = random_policy(stream, mdp.n_states, mdp.n_actions, 2.0);
        const auto shaped = bellman::shape(mdp, cont);
        const double ell_c = std::log(static_cast<double>(mdp.n_actions));

        const auto critics = bellman::two_critic_fixed_point(policy, shaped, ell_c, 1e-12);
        kappa_free_ok = kappa_free_ok && bellman::combine_kappa(critics, 0.0) == critics.q_r;

        for (double kappa : {0.0, 0.5, 2.0}) {
            oracle::ObjectiveSpec spec;
            spec.semantics = oracle::Semantics::AS;
            spec.kappa = kappa;
            spec.ell_c = ell_c;
            spec.horizon = 3000;
            spec.tail_tol = 1e-10;
            const double exact = oracle::j_as_exact(mdp, policy, cont, spec);
            double assembled = 0.0;
            for (int s = 0; s < mdp.n_states; ++s)
                assembled += mdp.initial_dist[s] * (critics.v_r[s] - kappa * critics.v_kl[s]);
            worst_gap = std::max(worst_gap, std::abs(assembled - exact));
            value_ok = value_ok && std::abs(assembled - exact) <= 1e-8;
        }
    }
    add_check(report, "V_kappa equals exact objective on 20 instances x kappa in {0, 0.5, 2}",
              value_ok, "worst |gap| = " + fmt(worst_gap) + " (tolerance 1e-8)");
    add_check(report, "critic recursions are kappa-free", kappa_free_ok,
              "Q_R recovered bit-exactly at kappa = 0");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// living-cost: trained continue-probabilities on the one-state MDP land on
// the exact-objective optimizer only when the living cost is kept
// ---------------------------------------------------------------------------

agents::LearnerConfig counterexample_learner(agents::Variant variant) {
    agents::LearnerConfig config;
    config.variant = variant;
    config.living_cost = variant == agents::Variant::AsSacNaiveCritic ? agents::LivingCost::Zero
                                                                      : agents::LivingCost::TargetEntropy;
    config.batch_size = 64;
    config.lr_critic = 0.2;
    config.lr_actor = 0.2;
    config.lr_dual = 0.0;  // the analytic optimizer locations assume kappa = 1
    config.kappa_init = 1.0;
    config.tau = 0.05;
    config.warmup_steps = 300;
    config.update_every = 1;
    config.actor_every = 2;
    config.max_episode_steps = 100;
    config.eval_episodes = 2;
    config.total_steps = 60000;
    config.eval_interval = 20000;
    config.buffer_capacity = 20000;
    return config;
}

SuiteReport suite_living_cost() {
    const auto start = Clock::now();
    SuiteReport report{"living-cost"};
    const FiniteMdp mdp = build_counterexample_mdp(0.4, 0.9);
    const auto cont = ContinuationModel::hard_indicator();

    const struct {
        agents::Variant variant;
        double target;
    } cases[] = {{agents::Variant::AsSacFull, 0.707}, {agents::Variant::AsSacNaiveCritic, 0.984}};

    for (const auto& scenario : cases) {
        const auto config = counterexample_learner(scenario.variant);
        int hits = 0;
        std::ostringstream observed;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto result = agents::train(mdp, cont, {}, config, seed);
            const double p_cont = result.policy.probs(0)[kActionContinue];
            if (std::abs(p_cont - scenario.target) <= 0.03) ++hits;
            observed << fmt(p_cont) << " ";
        }
        add_check(report,
                  agents::variant_name(scenario.variant) + " converges to " + fmt(scenario.target) +
                      " +/- 0.03 on >= 4/5 seeds",
                  hits >= 4, "continue-probabilities: " + observed.str());
    }
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// chance-bound: certificates dominate empirical violation frequencies
// ---------------------------------------------------------------------------

FiniteMdp iid_violation_mdp(double q) {
    FiniteMdp mdp;
    mdp.n_states = 2;  // state 1 is the violating state
    mdp.n_actions = 2;
    mdp.gamma = 0.9;
    mdp.transition.resize(8);
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            mdp.p(s, a, 0) = 1.0 - q;
            mdp.p(s, a, 1) = q;
        }
    }
    mdp.reward = Table(2, 2, 0.0);
    Table cost(2, 2, 0.0);
    cost(1, 0) = 1.0;
    cost(1, 1) = 1.0;
    mdp.costs = {cost};
    mdp.initial_dist = {1.0 - q, q};
    mdp.terminal = {0, 0};
    mdp.validate();
    return mdp;
}

SuiteReport suite_chance_bound() {
    const auto start = Clock::now();
    SuiteReport report{"chance-bound"};
    rng::Stream stream = rng::Stream::derive(0xCB0117D, rng::kVerify);

    {
        const FiniteMdp mdp = iid_violation_mdp(0.1);
        const auto policy = SoftmaxPolicy::uniform(2, 2);
        rng::Stream mc = rng::Stream::derive(0xCB0117D, rng::kOracle, 0);
        const double s5 =
            oracle::survival_statistic(mdp, policy, 1.0, 5, oracle::SurvivalMode::Exact, 0, mc);
        const auto cert = oracle::chance_bound(s5, 1.0, 1.0, 5);
        const double freq = oracle::empirical_violation_frequency(mdp, policy, 1.0, 5, 100000, mc);
        const bool closed_form_ok = std::abs(cert.bound - 0.4406) <= 5e-4 &&
                                    std::abs((1.0 - std::pow(0.9, 5)) - 0.40951) <= 1e-9;
        add_check(report, "Bernoulli closed form: bound near 0.4406 dominates true 0.40951",
                  closed_form_ok && cert.bound >= freq,
                  "bound " + fmt(cert.bound) + ", empirical " + fmt(freq));
    }

    bool all_ok = true;
    double min_margin = 1.0;
    const int n_chains = 50;
    for (int i = 0; i < n_chains; ++i) {
        const int n = 4 + static_cast<int>(stream.uniform_int(6));
        std::vector<int> hazards;
        for (int s = 1; s < n - 1; ++s)
            if (stream.bernoulli(0.4)) hazards.push_back(s);
        if (hazards.empty()) hazards.push_back(1 + static_cast<int>(stream.uniform_int(n - 2)));
        const FiniteMdp mdp = build_hazard_chain(n, hazards, 1.0);
        const auto policy = random_policy(stream, n, 2, 0.5);

        const int horizon = 12;
        const double lambda = 1.0;
        const double threshold = 2.0;
        rng::Stream mc = rng::Stream::derive(0xCB0117D, rng::kOracle, 100 + i);
        const double s_h = oracle::survival_statistic(mdp, policy, lambda, horizon,
                                                      oracle::SurvivalMode::Exact, 0, mc);
        const auto cert = oracle::chance_bound(s_h, lambda, threshold, horizon);
        const double exact_p = oracle::violation_probability_exact(mdp, policy, threshold, horizon);
        const double freq =
            oracle::empirical_violation_frequency(mdp, policy, threshold, horizon, 100000, mc);
        all_ok = all_ok && cert.bound >= exact_p && cert.bound >= freq;
        min_margin = std::min(min_margin, cert.bound - freq);
    }
    add_check(report,
              "certificate >= empirical frequency (1e5 rollouts) on " + std::to_string(n_chains) +
                  " random hazard chains",
              all_ok, "min bound - frequency margin = " + fmt(min_margin));
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// replay: compressed records match brute-force recomputation bit-exactly
// ---------------------------------------------------------------------------

replay::NStepRecord brute_force_compress(const std::vector<replay::WindowStep>& window, double gamma,
                                         bool done) {
    // independent recomputation: per-k products from scratch
    replay::NStepRecord record;
    record.s = window.front().s;
    record.a = window.front().a;
    record.cost = window.front().cost;
    record.behavior_logp = window.front().behavior_logp;
    record.done = done;
    record.s_boot = window.back().s_next;
    double r_n = 0.0;
    for (std::size_t k = 0; k < window.size(); ++k) {
        double weight = 1.0;
        for (std::size_t j = 0; j < k; ++j) weight *= gamma * window[j].alpha;
        r_n += weight * (window[k].alpha * window[k].reward);
    }
    double u = 1.0;
    for (const auto& entry : window) u *= gamma * entry.alpha;
    record.r_n = r_n;
    record.u_boot = u;
    return record;
}

SuiteReport suite_replay() {
    const auto start = Clock::now();
    SuiteReport report{"replay"};
    rng::Stream stream = rng::Stream::derive(0x8E91A7, rng::kVerify);

    bool exact_ok = true;
    for (int i = 0; i < 10000 && exact_ok; ++i) {
        const int n = 1 + static_cast<int>(stream.uniform_int(8));
        const double gamma = stream.uniform(0.05, 0.999);
        std::vector<replay::WindowStep> window(n);
        for (auto& entry : window) {
            entry.s = static_cast<int>(stream.uniform_int(10));
            entry.a = static_cast<int>(stream.uniform_int(4));
            entry.reward = stream.uniform(-2.0, 2.0);
            entry.cost = stream.uniform();
            entry.alpha = stream.uniform();
            entry.s_next = static_cast<int>(stream.uniform_int(10));
            entry.behavior_logp = -stream.uniform();
        }
        const auto fast = replay::compress_window(window, gamma, false);
        const auto slow = brute_force_compress(window, gamma, false);
        exact_ok = fast.r_n == slow.r_n && fast.u_boot == slow.u_boot && fast.s_boot == slow.s_boot;
    }
    add_check(report, "compress_window equals brute force bit-exactly on 10000 random windows",
              exact_ok, exact_ok ? "all equal" : "mismatch found");

    // boundary handling: shortened flushes still satisfy the sum identity
    bool boundary_ok = true;
    for (int episode = 0; episode < 200 && boundary_ok; ++episode) {
        const int n = 2 + static_cast<int>(stream.uniform_int(5));
        const int length = 1 + static_cast<int>(stream.uniform_int(12));
        const double gamma = stream.uniform(0.5, 0.99);
        replay::RollingWindow window(n, gamma);
        std::vector<replay::WindowStep> raw;
        std::vector<replay::NStepRecord> emitted;
        for (int t = 0; t < length; ++t) {
            replay::WindowStep entry;
            entry.s = t;
            entry.a = 0;
            entry.reward = stream.uniform();
            entry.cost = 0.0;
            entry.alpha = stream.uniform();
            entry.s_next = t + 1;
            raw.push_back(entry);
            const bool terminal_now = t == length - 1 && stream.bernoulli(0.5);
            for (const auto& rec : window.push(entry, terminal_now)) emitted.push_back(rec);
            if (terminal_now) break;
        }
        for (const auto& rec : window.flush()) emitted.push_back(rec);

        boundary_ok = boundary_ok && static_cast<int>(emitted.size()) == static_cast<int>(raw.size());
        for (std::size_t t = 0; t < emitted.size() && boundary_ok; ++t) {
            const int horizon =
                std::min<int>(n, static_cast<int>(raw.size()) - static_cast<int>(t));
            const std::vector<replay::WindowStep> span(raw.begin() + t, raw.begin() + t + horizon);
            const auto expected = brute_force_compress(span, gamma, emitted[t].done);
            boundary_ok = emitted[t].r_n == expected.r_n && emitted[t].u_boot == expected.u_boot &&
                          emitted[t].s_boot == expected.s_boot;
        }
    }
    add_check(report, "episode-boundary windows satisfy the sum identity", boundary_ok,
              boundary_ok ? "200 random episodes reconstructed" : "mismatch found");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// gradients: analytic actor and dual gradients match central differences
// ---------------------------------------------------------------------------

SuiteReport suite_gradients() {
    const auto start = Clock::now();
    SuiteReport report{"gradients"};
    rng::Stream stream = rng::Stream::derive(0x96AD1E27, rng::kVerify);

    bool all_ok = true;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int n_states = 2 + static_cast<int>(stream.uniform_int(4));
        const int n_actions = 2 + static_cast<int>(stream.uniform_int(3));
        const auto policy = random_policy(stream, n_states, n_actions, 2.0);
        Table q_r(n_states, n_actions), q_kl(n_states, n_actions);
        for (auto& v : q_r.data()) v = stream.uniform(-3.0, 3.0);
        for (auto& v : q_kl.data()) v = stream.uniform(-3.0, 3.0);
        const double kappa = std::exp(stream.uniform(-1.0, 1.0));
        std::vector<int> batch;
        for (int b = 0; b < 8; ++b) batch.push_back(static_cast<int>(stream.uniform_int(n_states)));

        // two-critic actor loss
        const auto actor = agents::as_sac_actor_loss(batch, policy, q_r, q_kl, kappa, false);
        const double err_actor = agents::gradient_check(
            [&](const SoftmaxPolicy& p) {
                return agents::as_sac_actor_loss(batch, p, q_r, q_kl, kappa, false).loss;
            },
            actor.grad, policy);

        // single-critic soft actor loss
        const auto soft = agents::soft_actor_loss(batch, policy, q_r, kappa);
        const double err_soft = agents::gradient_check(
            [&](const SoftmaxPolicy& p) { return agents::soft_actor_loss(batch, p, q_r, kappa).loss; },
            soft.grad, policy);

        // batch-mean entropy
        Table entropy_grad(n_states, n_actions, 0.0);
        for (int s : batch) {
            const auto pi = policy.probs(s);
            const auto lp = policy.log_probs(s);
            const double h = policy.entropy(s);
            for (int a = 0; a < n_actions; ++a)
                entropy_grad(s, a) += -pi[a] * (lp[a] + h) / static_cast<double>(batch.size());
        }
        const double err_entropy = agents::gradient_check(
            [&](const SoftmaxPolicy& p) {
                double h = 0.0;
                for (int s : batch) h += p.entropy(s);
                return h / static_cast<double>(batch.size());
            },
            entropy_grad, policy);

        // M-step weighted log-likelihood
        std::vector<std::vector<double>> weights;
        for (int s : batch) {
            (void)s;
            std::vector<double> w(n_actions);
            double total = 0.0;
            for (auto& x : w) {
                x = stream.uniform() + 1e-3;
                total += x;
            }
            for (auto& x : w) x /= total;
            weights.push_back(w);
        }
        Table mstep_grad(n_states, n_actions, 0.0);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto pi = policy.probs(batch[b]);
            for (int a = 0; a < n_actions; ++a)
                mstep_grad(batch[b], a) +=
                    -(weights[b][a] - pi[a]) / static_cast<double>(batch.size());
        }
        const double err_mstep = agents::gradient_check(
            [&](const SoftmaxPolicy& p) {
                double total = 0.0;
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const auto lp = p.log_probs(batch[b]);
                    for (int a = 0; a < n_actions; ++a) total -= weights[b][a] * lp[a];
                }
                return total / static_cast<double>(batch.size());
            },
            mstep_grad, policy);

        // dual losses: 1-D central differences over log kappa
        agents::DualState dual;
        dual.log_kappa = stream.uniform(-1.0, 1.0);
        dual.kl_budget_eps = stream.uniform(0.0, 0.5);
        double kl_mass = 0.0;
        for (int s : batch) {
            const auto pi = policy.probs(s);
            for (int a = 0; a < n_actions; ++a) kl_mass += pi[a] * q_kl(s, a);
        }
        kl_mass /= static_cast<double>(batch.size());
        const auto dual_loss = [&](double log_kappa) {
            return -std::exp(log_kappa) * (kl_mass - dual.kl_budget_eps);
        };
        const double h_step = 1e-5;
        const double fd_dual =
            (dual_loss(dual.log_kappa + h_step) - dual_loss(dual.log_kappa - h_step)) / (2 * h_step);
        const double analytic_dual = -std::exp(dual.log_kappa) * (kl_mass - dual.kl_budget_eps);
        const double err_dual = std::abs(analytic_dual - fd_dual) / std::max(1.0, std::abs(fd_dual));

        double mean_entropy = 0.0;
        for (int s : batch) mean_entropy += policy.entropy(s);
        mean_entropy /= static_cast<double>(batch.size());
        const double target_entropy = stream.uniform(-1.0, 1.0);
        const auto tuning_loss = [&](double log_kappa) {
            return -std::exp(log_kappa) * (target_entropy - mean_entropy);
        };
        const double fd_tuning =
            (tuning_loss(dual.log_kappa + h_step) - tuning_loss(dual.log_kappa - h_step)) /
            (2 * h_step);
        const double analytic_tuning = -std::exp(dual.log_kappa) * (target_entropy - mean_entropy);
        const double err_tuning =
            std::abs(analytic_tuning - fd_tuning) / std::max(1.0, std::abs(fd_tuning));

        const double instance_worst =
            std::max({err_actor, err_soft, err_entropy, err_mstep, err_dual, err_tuning});
        worst = std::max(worst, instance_worst);
        all_ok = all_ok && instance_worst < 1e-4;
    }
    add_check(report, "analytic gradients match central differences on 100 random instances", all_ok,
              "worst relative error = " + fmt(worst) + " (tolerance 1e-4)");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// lambda-sweep: raising the exponential-continuation schedule endpoint does
// not raise the final cost return, for either agent
// ---------------------------------------------------------------------------

harness::ExperimentConfig sweep_config(agents::Variant variant, double lambda_end,
                                       const std::string& out_dir) {
    harness::ExperimentConfig config;
    config.env.name = "hazard_chain";
    config.env.n = 8;
    config.env.hazards = {3, 4};
    config.env.hazard_cost = 1.5;
    config.env.shelter_reward = 0.1;
    config.env.goal_reward = 3.0;
    config.env.gamma = 0.9;
    config.env.uniform_start = true;
    config.continuation.variant = "exponential";
    config.continuation.lambda = 0.0;
    Schedule schedule;
    schedule.kind = ScheduleKind::Linear;
    schedule.target = ScheduleTarget::Lambda;
    schedule.start_value = 0.0;
    schedule.end_value = lambda_end;
    schedule.start_step = 0;
    schedule.end_step = 24000;
    config.continuation.schedules = {schedule};

    auto& learner = config.learner;
    learner.variant = variant;
    learner.total_steps = 40000;
    learner.eval_interval = 10000;
    learner.batch_size = 64;
    learner.warmup_steps = 3000;
    learner.explore_eps = 0.1;
    learner.update_every = 1;
    learner.max_episode_steps = 60;
    learner.eval_episodes = 24;
    learner.lr_critic = 0.2;
    learner.tau = 0.05;
    if (variant == agents::Variant::VtMpo) {
        learner.n_step = 5;
        learner.mpo_kl_eps = 0.1;
        learner.m_step_iters = 30;
        learner.actor_every = 4;
    } else {
        learner.lr_actor = 0.3;
        learner.kappa_init = 0.02;
        learner.lr_dual = 0.0;
        learner.actor_every = 2;
    }
    config.seeds = {1, 2, 3, 4, 5};
    config.out_dir = out_dir;
    return config;
}

SuiteReport suite_lambda_sweep() {
    const auto start = Clock::now();
    SuiteReport report{"lambda-sweep"};
    const double lambda_grid[] = {0.0, 0.45, 0.9};
    const auto tmp_root = std::filesystem::temp_directory_path() / "sdh_lambda_sweep";

    for (agents::Variant variant : {agents::Variant::VtMpo, agents::Variant::AsSacConstKappa}) {
        std::vector<double> mean_costs;
        for (double lambda_end : lambda_grid) {
            const auto out_dir = tmp_root / (agents::variant_name(variant) + "_" + fmt(lambda_end));
            const auto config = sweep_config(variant, lambda_end, out_dir.string());
            const auto run = harness::run_experiment(config);
            double total = 0.0;
            for (const auto& seed : run.seeds) total += seed.final_cost_return;
            mean_costs.push_back(total / static_cast<double>(run.seeds.size()));
        }
        bool monotone = true;
        std::ostringstream observed;
        for (std::size_t i = 0; i < mean_costs.size(); ++i) {
            observed << "lambda_end " << lambda_grid[i] << " -> cost " << fmt(mean_costs[i]) << "; ";
            if (i > 0) monotone = monotone && mean_costs[i] <= mean_costs[i - 1] + 1e-9;
        }
        add_check(report,
                  std::string(agents::variant_name(variant)) +
                      ": final cost non-increasing in the schedule endpoint",
                  monotone, observed.str());
    }
    std::filesystem::remove_all(tmp_root);
    const double elapsed = seconds_since(start);
    add_check(report, "runtime under 15 min", elapsed < 900.0, fmt(elapsed) + " s");
    finish(report, start);
    return report;
}

// ---------------------------------------------------------------------------
// determinism: a (config, seed) pair reproduces byte-identical metrics
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

SuiteReport suite_determinism() {
    const auto start = Clock::now();
    SuiteReport report{"determinism"};
    const auto tmp_root = std::filesystem::temp_directory_path() / "sdh_determinism";

    for (agents::Variant variant : {agents::Variant::VtMpo, agents::Variant::AsSacNaiveTuning}) {
        auto config = sweep_config(variant, 0.45, (tmp_root / "a").string());
        config.learner.total_steps = 4000;
        config.learner.eval_interval = 1000;
        config.seeds = {7, 8};
        const auto first = harness::run_experiment(config);
        config.out_dir = (tmp_root / "b").string();
        const auto second = harness::run_experiment(config);

        bool identical = first.seeds.size() == second.seeds.size();
        for (std::size_t i = 0; identical && i < first.seeds.size(); ++i)
            identical = slurp(first.seeds[i].metrics_path) == slurp(second.seeds[i].metrics_path);
        add_check(report,
                  std::string(agents::variant_name(variant)) +
                      ": repeated runs produce byte-identical metrics",
                  identical, identical ? "metrics files match" : "metrics files differ");
        std::filesystem::remove_all(tmp_root);
    }
    finish(report, start);
    return report;
}

}  // namespace

std::vector<std::string> suite_names() {
    return {"counterexample", "contraction", "objectives-mc", "two-critic",  "living-cost",
            "chance-bound",   "replay",      "gradients",     "lambda-sweep", "determinism"};
}

SuiteReport run_suite(const std::string& name) {
    if (name == "counterexample") return suite_counterexample();
    if (name == "contraction") return suite_contraction();
    if (name == "objectives-mc") return suite_objectives_mc();
    if (name == "two-critic") return suite_two_critic();
    if (name == "living-cost") return suite_living_cost();
    if (name == "chance-bound") return suite_chance_bound();
    if (name == "replay") return suite_replay();
    if (name == "gradients") return suite_gradients();
    if (name == "lambda-sweep") return suite_lambda_sweep();
    if (name == "determinism") return suite_determinism();
    throw std::invalid_argument("unknown verification suite: " + name);
}

}  // namespace sdh::verify
