#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdh/agents.hpp"
#include "sdh/bellman.hpp"
#include "sdh/oracle.hpp"
#include "sdh/verify.hpp"

using namespace sdh;
using namespace sdh::agents;

TEST_CASE("single-critic target arithmetic") {
    SoftmaxPolicy policy(2, 2);
    Table q1(2, 2, 1.0), q2(2, 2, 2.0);
    rng::Stream stream(3);

    SUBCASE("done disables the bootstrap") {
        replay::TransitionRecord rec{0, 0, 0.7, 0.0, 1, 0.0, true};
        const double y = as_sac_target_single(rec, policy, q1, q2, 0.5, std::log(2.0), stream);
        CHECK(y == doctest::Approx(0.7 - 0.5 * std::log(2.0)));
    }
    SUBCASE("kappa = 0 and alpha = 1 is a plain TD(0) target") {
        // uniform policy, q1 = q2 per action, so V = min Q = 1
        replay::TransitionRecord rec{0, 0, 1.0, 0.0, 1, 0.9, false};
        const double y = as_sac_target_single(rec, policy, q1, q1, 0.0, 0.0, stream);
        CHECK(y == doctest::Approx(1.0 + 0.9 * 1.0));
    }
    SUBCASE("worked example y = 1 - 0.13863 + 0.45") {
        // r = 2, alpha = 0.5, gamma = 0.9, V^ = 1, kappa = 0.2, c_LC = ln 2
        SoftmaxPolicy deterministic(2, 2);
        deterministic.set_probs(1, {1.0, 0.0});
        Table q(2, 2, 1.0);  // log pi(a'|s') = 0 on support, so V^ = 1
        replay::TransitionRecord rec{0, 0, 1.0, 0.0, 1, 0.45, false};
        const double y = as_sac_target_single(rec, deterministic, q, q, 0.2, std::log(2.0), stream);
        CHECK(y == doctest::Approx(1.3113705638880109).epsilon(1e-9));
    }
}

TEST_CASE("two-critic targets are kappa-free") {
    SoftmaxPolicy policy(2, 2);
    Table qr1(2, 2, 1.0), qr2(2, 2, 1.5), qkl1(2, 2, 0.2), qkl2(2, 2, 0.4);
    replay::TransitionRecord rec{0, 1, 0.8, 0.0, 1, 0.45, false};
    // identical rng state must give identical targets regardless of any kappa
    rng::Stream a(11), b(11);
    const auto ta = as_sac_targets_two(rec, policy, qr1, qr2, qkl1, qkl2, std::log(2.0), a);
    const auto tb = as_sac_targets_two(rec, policy, qr1, qr2, qkl1, qkl2, std::log(2.0), b);
    CHECK(ta.y_r == tb.y_r);
    CHECK(ta.y_kl == tb.y_kl);
    CHECK(ta.y_r == doctest::Approx(0.8 + 0.45 * 1.0));
}

TEST_CASE("two-critic target hand examples") {
    rng::Stream stream(7);

    SUBCASE("done record regresses y_R to the shaped reward") {
        SoftmaxPolicy policy(1, 2);
        Table q(1, 2, 3.0);
        replay::TransitionRecord rec{0, 0, 0.42, 0.0, 0, 0.0, true};
        const auto y = as_sac_targets_two(rec, policy, q, q, q, q, 0.0, stream);
        CHECK(y.y_r == doctest::Approx(0.42));
    }
    SUBCASE("deterministic policy on support with H_tgt = 0 gives zero y_KL when done") {
        SoftmaxPolicy deterministic(1, 2);
        deterministic.set_probs(0, {1.0, 0.0});
        Table q(1, 2, 0.0);
        replay::TransitionRecord rec{0, 0, 0.0, 0.0, 0, 0.0, true};
        const auto y = as_sac_targets_two(rec, deterministic, q, q, q, q, 0.0, stream);
        CHECK(y.y_kl == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("uniform two-action policy with H_tgt = ln 2 gives zero y_KL when done") {
        SoftmaxPolicy uniform(1, 2);
        Table q(1, 2, 0.0);
        replay::TransitionRecord rec{0, 1, 0.0, 0.0, 0, 0.0, true};
        const auto y = as_sac_targets_two(rec, uniform, q, q, q, q, std::log(2.0), stream);
        CHECK(y.y_kl == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("actor loss value and gradient") {
    SUBCASE("kappa = 0 loss is the negative expected reward critic") {
        SoftmaxPolicy policy(1, 2);
        Table q_r(1, 2, 0.0);
        q_r(0, 0) = 1.0;
        q_r(0, 1) = 3.0;
        Table q_kl(1, 2, 7.0);
        const auto loss = as_sac_actor_loss({0}, policy, q_r, q_kl, 0.0, false);
        CHECK(loss.loss == doctest::Approx(-2.0));
        // ascent direction favors the better action
        CHECK(loss.grad(0, 1) < 0.0);
        CHECK(loss.grad(0, 0) > 0.0);
    }
    SUBCASE("counterexample with exact fixed-point critics recovers the exact objective") {
        const FiniteMdp mdp = build_counterexample_mdp(0.4, 0.9);
        const auto shaped = bellman::shape(mdp, ContinuationModel::hard_indicator());
        rng::Stream stream(100);
        for (int i = 0; i < 5; ++i) {
            const double p = stream.uniform(0.15, 0.9);
            SoftmaxPolicy policy(1, 2);
            policy.set_probs(0, {p, 1.0 - p});
            const auto critics =
                bellman::two_critic_fixed_point(policy, shaped, std::log(2.0), 1e-12);
            const auto loss = as_sac_actor_loss({0}, policy, critics.q_r, critics.q_kl, 1.0, false);
            // the realized p after the logit clamp in set_probs
            const double p_used = policy.probs(0)[0];
            const auto closed = oracle::counterexample_objectives(p_used, 0.9, 1.0, 0.4);
            CHECK(loss.loss == doctest::Approx(-closed.j_as).epsilon(1e-8));
        }
    }
    SUBCASE("GI variant keeps the value and shifts the gradient by the entropy path") {
        rng::Stream stream(42);
        const auto policy = verify::random_policy(stream, 3, 3, 1.5);
        Table q_r(3, 3), q_kl(3, 3);
        for (auto& v : q_r.data()) v = stream.uniform(-2.0, 2.0);
        for (auto& v : q_kl.data()) v = stream.uniform(-2.0, 2.0);
        const double kappa = 0.8;
        const std::vector<int> batch = {0, 1, 2, 1};

        const auto plain = as_sac_actor_loss(batch, policy, q_r, q_kl, kappa, false);
        const auto gi = as_sac_actor_loss(batch, policy, q_r, q_kl, kappa, true);
        CHECK(gi.loss == doctest::Approx(plain.loss).epsilon(1e-14));

        // difference equals kappa times the gradient of E_pi[log pi]
        for (int s = 0; s < 3; ++s) {
            const auto pi = policy.probs(s);
            const auto lp = policy.log_probs(s);
            double mean_lp = 0.0;
            for (int a = 0; a < 3; ++a) mean_lp += pi[a] * lp[a];
            double count = 0.0;
            for (int b : batch) count += b == s ? 1.0 : 0.0;
            for (int a = 0; a < 3; ++a) {
                const double expected =
                    count / batch.size() * kappa * pi[a] * (lp[a] - mean_lp);
                CHECK(gi.grad(s, a) - plain.grad(s, a) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("kappa dual steps move the temperature the right way") {
    SoftmaxPolicy policy(1, 2);
    DualState dual;
    dual.log_kappa = 0.0;
    dual.kl_budget_eps = 0.0;

    SUBCASE("stationary at the budget") {
        Table q_kl(1, 2, 0.0);
        CHECK(kappa_dual_step({0}, policy, q_kl, dual, 0.1) == doctest::Approx(0.0));
    }
    SUBCASE("excess KL mass grows kappa") {
        Table q_kl(1, 2, 0.5);
        const double updated = kappa_dual_step({0}, policy, q_kl, dual, 0.1);
        CHECK(updated == doctest::Approx(0.05));  // gradient -0.5, lr 0.1
    }
    SUBCASE("KL mass below the budget shrinks kappa") {
        dual.kl_budget_eps = 1.0;
        Table q_kl(1, 2, 0.5);
        CHECK(kappa_dual_step({0}, policy, q_kl, dual, 0.1) < 0.0);
    }
}

TEST_CASE("naive tuning follows the standard temperature rule") {
    DualState dual;
    dual.log_kappa = 0.0;

    SUBCASE("entropy at the target is stationary") {
        SoftmaxPolicy uniform(1, 2);
        const double target = std::log(2.0);
        CHECK(naive_tuning_step({0}, uniform, dual, 0.1, target) == doctest::Approx(0.0));
    }
    SUBCASE("entropy below the target raises kappa") {
        SoftmaxPolicy skewed(1, 2);
        skewed.set_probs(0, {0.95, 0.05});
        CHECK(naive_tuning_step({0}, skewed, dual, 0.1, std::log(2.0)) > 0.0);
    }
    SUBCASE("deterministic policy above a negative target lowers kappa") {
        SoftmaxPolicy deterministic(1, 2);
        deterministic.set_probs(0, {1.0, 0.0});
        CHECK(naive_tuning_step({0}, deterministic, dual, 0.1, -std::log(2.0)) < 0.0);
    }
}

TEST_CASE("TD(n) targets") {
    SoftmaxPolicy policy(3, 2);
    Table q(3, 2, 1.0);
    rng::Stream stream(5);

    SUBCASE("done records return R_n") {
        replay::NStepRecord rec{0, 0, 1.4, 0.0, 2, 0.405, true, 0.0};
        CHECK(vt_mpo_td_target(rec, policy, q, 0, stream) == doctest::Approx(1.4));
    }
    SUBCASE("closed-form expectation continues the replay example") {
        replay::NStepRecord rec{0, 0, 1.4, 0.0, 2, 0.405, false, 0.0};
        CHECK(vt_mpo_td_target(rec, policy, q, 0, stream) == doctest::Approx(1.805));
    }
    SUBCASE("constant critic gives R_n + u_boot c under any entropy") {
        Table constant(3, 2, 4.0);
        replay::NStepRecord rec{1, 0, 0.5, 0.0, 2, 0.2, false, 0.0};
        CHECK(vt_mpo_td_target(rec, policy, constant, 0, stream) == doctest::Approx(0.5 + 0.2 * 4.0));
        CHECK(vt_mpo_td_target(rec, policy, constant, 16, stream) ==
              doctest::Approx(0.5 + 0.2 * 4.0));
    }
}

TEST_CASE("E-step weights") {
    SUBCASE("constant scores return the prior") {
        SoftmaxPolicy prior(2, 3);
        prior.logits()(0, 0) = 0.4;
        Table q(2, 3, 2.5);
        const auto weights = boltzmann_weights({0, 1}, prior, q, 1.0);
        const auto p0 = prior.probs(0);
        for (int a = 0; a < 3; ++a) CHECK(weights[0][a] == doctest::Approx(p0[a]).epsilon(1e-12));
    }
    SUBCASE("huge temperature returns the prior in total variation") {
        rng::Stream stream(88);
        const auto prior = verify::random_policy(stream, 3, 4, 1.0);
        Table q(3, 4);
        for (auto& v : q.data()) v = stream.uniform(-2.0, 2.0);
        const auto weights = boltzmann_weights({0, 1, 2}, prior, q, 1e6);
        for (int s = 0; s < 3; ++s) {
            const auto p0 = prior.probs(s);
            double tv = 0.0;
            for (int a = 0; a < 4; ++a) tv += std::abs(weights[s][a] - p0[a]);
            CHECK(tv / 2.0 < 1e-4);
        }
    }
    SUBCASE("two actions, Q = (1, 0), eta = 1 gives the softmax pair") {
        SoftmaxPolicy prior(1, 2);
        Table q(1, 2, 0.0);
        q(0, 0) = 1.0;
        const auto weights = boltzmann_weights({0}, prior, q, 1.0);
        CHECK(weights[0][0] == doctest::Approx(0.7311).epsilon(1e-4));
        CHECK(weights[0][1] == doctest::Approx(0.2689).epsilon(1e-4));
    }
}

TEST_CASE("E-step dual solve satisfies the KL budget") {
    rng::Stream stream(7777);
    for (int i = 0; i < 25; ++i) {
        const int n_states = 2 + static_cast<int>(stream.uniform_int(4));
        const int n_actions = 2 + static_cast<int>(stream.uniform_int(4));
        const auto prior = verify::random_policy(stream, n_states, n_actions, 1.5);
        Table q(n_states, n_actions);
        for (auto& v : q.data()) v = stream.uniform(-4.0, 4.0);
        std::vector<int> states;
        for (int s = 0; s < n_states; ++s) states.push_back(s);

        DualState dual;
        dual.mpo_kl_eps = stream.uniform(0.02, 0.5);
        const auto weights = mpo_e_step(states, prior, q, dual);

        double kl = 0.0;
        for (std::size_t idx = 0; idx < states.size(); ++idx) {
            const auto p0 = prior.probs(states[idx]);
            for (int a = 0; a < n_actions; ++a)
                if (weights[idx][a] > 0.0) kl += weights[idx][a] * std::log(weights[idx][a] / p0[a]);
        }
        kl /= states.size();
        CHECK(kl <= dual.mpo_kl_eps + 1e-6);
        // the budget should be used (not trivially slack) when scores differ
        CHECK(dual.eta_e > 0.0);
    }
}

TEST_CASE("M-step fits the improvement weights") {
    SUBCASE("weights equal to the current policy are a fixed point") {
        SoftmaxPolicy policy(1, 2);
        policy.logits()(0, 0) = 0.3;
        const auto before = policy.probs(0);
        mpo_m_step(policy, {before}, {0}, 1.0, 50);
        const auto after = policy.probs(0);
        for (int a = 0; a < 2; ++a) CHECK(after[a] == doctest::Approx(before[a]).epsilon(1e-12));
    }
    SUBCASE("target weights are recovered within 1e-4 total variation") {
        SoftmaxPolicy policy(1, 2);
        const std::vector<double> target = {0.7311, 0.2689};
        mpo_m_step(policy, {target}, {0}, 1.0, 400);
        const auto probs = policy.probs(0);
        const double tv = 0.5 * (std::abs(probs[0] - target[0]) + std::abs(probs[1] - target[1]));
        CHECK(tv < 1e-4);
    }
    SUBCASE("one-hot weights run into the logit clamp instead of diverging") {
        SoftmaxPolicy policy(1, 2);
        mpo_m_step(policy, {{1.0, 0.0}}, {0}, 1.0, 5000, 30.0);
        CHECK(policy.logits()(0, 0) <= 30.0);
        CHECK(policy.probs(0)[0] > 0.999);
    }
}

TEST_CASE("training loop smoke and collapse checks") {
    SUBCASE("constant alpha = 1 run is bit-identical to an exponential lambda = 0 run") {
        const FiniteMdp mdp = build_hazard_chain(6, {2}, 1.0);
        LearnerConfig config;
        config.variant = Variant::AsSacNaiveTuning;
        config.total_steps = 3000;
        config.eval_interval = 1000;
        config.warmup_steps = 200;
        config.max_episode_steps = 40;
        config.kappa_init = 0.05;

        const auto run_a = train(mdp, ContinuationModel::constant(1.0), {}, config, 33);
        const auto run_b = train(mdp, ContinuationModel::exponential(0.0), {}, config, 33);
        REQUIRE(run_a.metrics.size() == run_b.metrics.size());
        for (std::size_t i = 0; i < run_a.metrics.size(); ++i) {
            CHECK(run_a.metrics[i].reward_return == run_b.metrics[i].reward_return);
            CHECK(run_a.metrics[i].cost_return == run_b.metrics[i].cost_return);
        }
        CHECK(run_a.policy.logits() == run_b.policy.logits());
    }
    SUBCASE("vt-mpo learns the single-state continue task") {
        // sanity: with no stop cost gating, always-continue is optimal
        const FiniteMdp mdp = build_counterexample_mdp(0.4, 0.9);
        LearnerConfig config;
        config.variant = Variant::VtMpo;
        config.total_steps = 8000;
        config.eval_interval = 2000;
        config.warmup_steps = 300;
        config.max_episode_steps = 60;
        config.n_step = 3;
        const auto result = train(mdp, ContinuationModel::hard_indicator(), {}, config, 5);
        CHECK(result.policy.probs(0)[kActionContinue] > 0.9);
    }
}

TEST_CASE("gradient check oracle on a known-quadratic loss") {
    SoftmaxPolicy policy(1, 2);
    policy.logits()(0, 0) = 0.2;
    // loss = sum of squared logits: gradient = 2 z
    Table grad(1, 2, 0.0);
    grad(0, 0) = 2.0 * 0.2;
    const auto loss = [](const SoftmaxPolicy& p) {
        double total = 0.0;
        for (double z : p.logits().data()) total += z * z;
        return total;
    };
    CHECK(gradient_check(loss, grad, policy) < 1e-8);

    // zero loss has zero error
    Table zero(1, 2, 0.0);
    CHECK(gradient_check([](const SoftmaxPolicy&) { return 0.0; }, zero, policy) == 0.0);
}

TEST_CASE("actor loss equals the negated exact objective under exact critics") {
    rng::Stream stream(2718);
    for (int i = 0; i < 20; ++i) {
        const FiniteMdp mdp = verify::random_mdp(stream, 2, 5, 2, 4, 0.8, 0.95);
        const auto cont = ContinuationModel::exponential(stream.uniform(0.0, 1.5));
        const auto policy = verify::random_policy(stream, mdp.n_states, mdp.n_actions, 1.5);
        const double kappa = stream.uniform(0.0, 2.0);
        const double ell_c = std::log(static_cast<double>(mdp.n_actions));

        const auto shaped = bellman::shape(mdp, cont);
        const auto critics = bellman::two_critic_fixed_point(policy, shaped, ell_c, 1e-12);

        // weight single-state losses by the initial distribution
        double loss_under_mu = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            const auto part = as_sac_actor_loss({s}, policy, critics.q_r, critics.q_kl, kappa, false);
            loss_under_mu += mdp.initial_dist[s] * part.loss;
        }

        oracle::ObjectiveSpec spec;
        spec.semantics = oracle::Semantics::AS;
        spec.kappa = kappa;
        spec.ell_c = ell_c;
        spec.horizon = 3000;
        spec.tail_tol = 1e-10;
        const double exact = oracle::j_as_exact(mdp, policy, cont, spec);
        CHECK(loss_under_mu == doctest::Approx(-exact).epsilon(1e-8));
    }
}

TEST_CASE("vt-mpo drives the cost return to zero under a hard gate with a shelter") {
    // crossing the hazards forfeits all gated credit, so sheltering wins
    const FiniteMdp mdp = build_hazard_chain(8, {3, 4}, 1.0, 0.1, 3.0, 0.9);
    LearnerConfig config;
    config.variant = Variant::VtMpo;
    config.total_steps = 20000;
    config.eval_interval = 5000;
    config.warmup_steps = 1500;
    config.max_episode_steps = 60;
    config.eval_episodes = 8;
    config.n_step = 5;
    config.m_step_iters = 30;
    config.actor_every = 4;

    int seeds_at_zero = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto result = train(mdp, ContinuationModel::hard_indicator(), {}, config, seed);
        if (result.final_cost_return == 0.0) ++seeds_at_zero;
    }
    CHECK(seeds_at_zero >= 4);
}
