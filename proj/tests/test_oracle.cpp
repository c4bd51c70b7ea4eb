#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdh/bellman.hpp"
#include "sdh/oracle.hpp"
#include "sdh/verify.hpp"

using namespace sdh;
using namespace sdh::oracle;

namespace {

FiniteMdp single_state_unit_reward(double gamma) {
    FiniteMdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = 1;
    mdp.gamma = gamma;
    mdp.transition = {1.0};
    mdp.reward = Table(1, 1, 1.0);
    mdp.costs = {Table(1, 1, 0.0)};
    mdp.initial_dist = {1.0};
    mdp.terminal = {0};
    mdp.validate();
    return mdp;
}

ObjectiveSpec default_spec(int n_actions, double kappa = 0.0) {
    ObjectiveSpec spec;
    spec.kappa = kappa;
    spec.ell_c = std::log(static_cast<double>(n_actions));
    spec.horizon = 1200;
    spec.tail_tol = 1e-9;
    return spec;
}

}  // namespace

TEST_CASE("survival objective closed forms") {
    SUBCASE("alpha = 1 single state geometric series") {
        const auto mdp = single_state_unit_reward(0.9);
        const auto cont = ContinuationModel::constant(1.0);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        const auto value = j_surv_exact(mdp, policy, cont, default_spec(1));
        CHECK(value.value == doctest::Approx(10.0).epsilon(1e-8));
        CHECK(value.tail_bound <= 1e-9);
    }
    SUBCASE("alpha = 0 gates every reward") {
        const auto mdp = single_state_unit_reward(0.9);
        const auto cont = ContinuationModel::constant(0.0);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        CHECK(j_surv_exact(mdp, policy, cont, default_spec(1)).value == 0.0);
    }
    SUBCASE("counterexample at p = 0.5 gives pr / (1 - gamma p)") {
        const auto mdp = build_counterexample_mdp(0.4, 0.9);
        const auto cont = ContinuationModel::hard_indicator();
        const SoftmaxPolicy half(1, 2);
        const auto value = j_surv_exact(mdp, half, cont, default_spec(2));
        CHECK(value.value == doctest::Approx(0.2 / 0.55).epsilon(1e-10));
    }
}

TEST_CASE("horizon too small for the tail tolerance is an error naming the needed H") {
    const auto mdp = single_state_unit_reward(0.9);
    const auto cont = ContinuationModel::constant(1.0);
    const auto policy = SoftmaxPolicy::uniform(1, 1);
    ObjectiveSpec spec = default_spec(1);
    spec.horizon = 10;
    spec.tail_tol = 1e-12;
    CHECK_THROWS_WITH_AS(j_surv_exact(mdp, policy, cont, spec),
                         doctest::Contains("need H >="), std::invalid_argument);
}

TEST_CASE("objective variants coincide when the KL term vanishes") {
    rng::Stream stream(99);
    const FiniteMdp mdp = verify::random_mdp(stream, 3, 4, 2, 3, 0.85, 0.92);
    const auto cont = ContinuationModel::exponential(0.8);
    const auto policy = verify::random_policy(stream, mdp.n_states, mdp.n_actions, 1.0);

    SUBCASE("kappa = 0 collapses AS and VT onto the survival value") {
        const auto spec = default_spec(mdp.n_actions, 0.0);
        const double surv = j_surv_exact(mdp, policy, cont, spec).value;
        CHECK(j_as_exact(mdp, policy, cont, spec) == doctest::Approx(surv).epsilon(1e-12));
        CHECK(j_vt_exact(mdp, policy, cont, spec) == doctest::Approx(surv).epsilon(1e-12));
    }
    SUBCASE("alpha = 1 makes the AS and VT weights coincide") {
        const auto ones = ContinuationModel::constant(1.0);
        const auto spec = default_spec(mdp.n_actions, 0.7);
        CHECK(j_as_exact(mdp, policy, ones, spec) ==
              doctest::Approx(j_vt_exact(mdp, policy, ones, spec)).epsilon(1e-10));
    }
}

TEST_CASE("counterexample exact objectives at p = 0.5") {
    const auto mdp = build_counterexample_mdp(0.4, 0.9);
    const auto cont = ContinuationModel::hard_indicator();
    const SoftmaxPolicy half(1, 2);
    const auto spec = default_spec(2, 1.0);
    // h(0.5) = ln 2 makes both KL corrections vanish
    CHECK(j_as_exact(mdp, half, cont, spec) == doctest::Approx(0.2 / 0.55).epsilon(1e-9));
    CHECK(j_vt_exact(mdp, half, cont, spec) == doctest::Approx(0.2 / 0.55).epsilon(1e-9));
}

TEST_CASE("decision mass") {
    const auto mdp = build_counterexample_mdp(0.4, 0.9);
    const auto cont = ContinuationModel::hard_indicator();

    SUBCASE("alpha = 1 gives 1 / (1 - gamma)") {
        const auto ones = ContinuationModel::constant(1.0);
        const SoftmaxPolicy half(1, 2);
        CHECK(decision_mass_z(mdp, half, ones, default_spec(2)) ==
              doctest::Approx(10.0).epsilon(1e-8));
    }
    SUBCASE("counterexample p = 0.5 gives 1 / (1 - gamma p)") {
        const SoftmaxPolicy half(1, 2);
        CHECK(decision_mass_z(mdp, half, cont, default_spec(2)) ==
              doctest::Approx(1.0 / 0.55).epsilon(1e-10));
    }
    SUBCASE("p -> 0 leaves only the first decision") {
        SoftmaxPolicy stopper(1, 2);
        stopper.set_probs(0, {0.0, 1.0});
        CHECK(decision_mass_z(mdp, stopper, cont, default_spec(2)) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("closed-form counterexample objectives and optimizers") {
    const auto at_half = counterexample_objectives(0.5, 0.9, 1.0, 0.4);
    CHECK(at_half.j_as == doctest::Approx(0.2 / 0.55).epsilon(1e-12));
    CHECK_THROWS_AS(counterexample_objectives(0.0, 0.9, 1.0, 0.4), std::invalid_argument);
    CHECK_THROWS_AS(counterexample_objectives(1.0, 0.9, 1.0, 0.4), std::invalid_argument);

    const auto f_as = [](double p) { return counterexample_objectives(p, 0.9, 1.0, 0.4).j_as; };
    const auto f_asn = [](double p) {
        return counterexample_objectives(p, 0.9, 1.0, 0.4).j_as_naive;
    };
    CHECK(argmax_scan(f_as, 0.0, 1.0) == doctest::Approx(0.707).epsilon(0.0071));
    CHECK(argmax_scan(f_asn, 0.0, 1.0) == doctest::Approx(0.984).epsilon(0.0051));
}

TEST_CASE("argmax scan behavior") {
    SUBCASE("constant function returns the first cell midpoint") {
        const double result = argmax_scan([](double) { return 1.0; }, 0.0, 1.0, 10, 40);
        CHECK(result == doctest::Approx(0.05).epsilon(1e-12));
    }
    SUBCASE("quadratic maximum is located within 1e-4") {
        const double result =
            argmax_scan([](double p) { return -(p - 0.3) * (p - 0.3); }, 0.0, 1.0, 128, 60);
        CHECK(result == doctest::Approx(0.3).epsilon(1e-4));
    }
}

TEST_CASE("survival statistic") {
    rng::Stream stream(2024);

    SUBCASE("lambda = 0 always yields 1") {
        const auto mdp = build_hazard_chain(6, {2}, 1.0);
        const auto policy = SoftmaxPolicy::uniform(6, 2);
        CHECK(survival_statistic(mdp, policy, 0.0, 8, SurvivalMode::Exact, 0, stream) ==
              doctest::Approx(1.0));
    }
    SUBCASE("zero-cost MDP yields 1 for every lambda") {
        const auto mdp = build_hazard_chain(6, {}, 1.0);
        const auto policy = SoftmaxPolicy::uniform(6, 2);
        for (double lambda : {0.3, 1.0, 4.0})
            CHECK(survival_statistic(mdp, policy, lambda, 8, SurvivalMode::Exact, 0, stream) ==
                  doctest::Approx(1.0));
    }
    SUBCASE("iid binary costs match the Bernoulli closed form") {
        FiniteMdp mdp;
        mdp.n_states = 2;
        mdp.n_actions = 1;
        mdp.gamma = 0.9;
        mdp.transition = {0.9, 0.1, 0.9, 0.1};
        mdp.reward = Table(2, 1, 0.0);
        Table cost(2, 1, 0.0);
        cost(1, 0) = 1.0;
        mdp.costs = {cost};
        mdp.initial_dist = {0.9, 0.1};
        mdp.terminal = {0, 0};
        mdp.validate();
        const auto policy = SoftmaxPolicy::uniform(2, 1);

        const double closed_form = std::pow(0.9 + 0.1 * std::exp(-1.0), 5);
        const double exact = survival_statistic(mdp, policy, 1.0, 5, SurvivalMode::Exact, 0, stream);
        CHECK(exact == doctest::Approx(closed_form).epsilon(1e-12));
        CHECK(exact == doctest::Approx(0.7215).epsilon(1e-4));

        const double mc =
            survival_statistic(mdp, policy, 1.0, 5, SurvivalMode::MonteCarlo, 200000, stream);
        CHECK(mc == doctest::Approx(exact).epsilon(0.01));
    }
}

TEST_CASE("chance bound certificates") {
    CHECK(chance_bound(1.0, 1.0, 1.0, 5).bound == 0.0);
    // cost deterministically equal to b makes the ratio exactly 1
    const double s_at_b = std::exp(-1.3 * 0.8);
    CHECK(chance_bound(s_at_b, 1.3, 0.8, 5).bound == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(chance_bound(0.5, 0.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(chance_bound(0.5, 1.0, -1.0, 5), std::invalid_argument);

    const double s5 = std::pow(0.9 + 0.1 * std::exp(-1.0), 5);
    const auto cert = chance_bound(s5, 1.0, 1.0, 5);
    CHECK(cert.bound == doctest::Approx(0.4406).epsilon(1e-3));
    CHECK(cert.bound >= 1.0 - std::pow(0.9, 5));  // true probability 0.40951
}

TEST_CASE("gate estimates match the closed-form gate expectations") {
    const auto mdp = single_state_unit_reward(0.9);
    rng::Stream stream(555);

    SUBCASE("alpha = 1 reduces to geometric survival") {
        const auto cont = ContinuationModel::constant(1.0);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        for (int t : {0, 1, 3}) {
            const auto est = mc_gate_estimate(mdp, policy, cont, t, Semantics::AS, 200000, stream);
            const double expected = std::pow(0.9, t);
            const double sigma = std::sqrt(expected * (1 - expected) / 200000.0) + 1e-9;
            CHECK(std::abs(est.gamma_gate - expected) <= 4 * sigma + 1e-3);
        }
    }
    SUBCASE("constant alpha = 0.5 at t = 1 matches the closed-form gate constants") {
        const auto cont = ContinuationModel::constant(0.5);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        const std::int64_t n = 400000;
        const auto as = mc_gate_estimate(mdp, policy, cont, 1, Semantics::AS, n, stream);
        CHECK(as.gamma_gate == doctest::Approx(0.225).epsilon(0.03));
        CHECK(as.decision_gate == doctest::Approx(0.45).epsilon(0.02));
        const auto vt = mc_gate_estimate(mdp, policy, cont, 1, Semantics::VT, n, stream);
        CHECK(vt.decision_gate == doctest::Approx(0.9).epsilon(0.01));
    }
    SUBCASE("t = 0 decision gates are exactly 1") {
        const auto cont = ContinuationModel::constant(0.3);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        const auto as = mc_gate_estimate(mdp, policy, cont, 0, Semantics::AS, 20000, stream);
        CHECK(as.decision_gate == 1.0);
        const auto vt = mc_gate_estimate(mdp, policy, cont, 0, Semantics::VT, 20000, stream);
        CHECK(vt.decision_gate == 1.0);
    }
}

TEST_CASE("gate-explicit MC brackets the exact objectives") {
    rng::Stream stream(31337);

    SUBCASE("kappa = 0 estimate brackets the survival value") {
        const auto mdp = build_counterexample_mdp(0.4, 0.9);
        const auto cont = ContinuationModel::hard_indicator();
        const SoftmaxPolicy half(1, 2);
        auto spec = default_spec(2, 0.0);
        spec.semantics = Semantics::AS;
        const auto mc = mc_elbo_estimate(mdp, half, cont, spec, 400000, stream);
        CHECK(std::abs(mc.mean - 0.2 / 0.55) <= 4 * mc.std_error);
    }
    SUBCASE("counterexample p = 0.5 with kappa = 1 brackets 0.3636") {
        const auto mdp = build_counterexample_mdp(0.4, 0.9);
        const auto cont = ContinuationModel::hard_indicator();
        const SoftmaxPolicy half(1, 2);
        auto spec = default_spec(2, 1.0);
        spec.semantics = Semantics::AS;
        const auto mc = mc_elbo_estimate(mdp, half, cont, spec, 1000000, stream);
        CHECK(std::abs(mc.mean - 0.36363636) <= 4 * mc.std_error);
    }
    SUBCASE("single-action MDP has a zero-variance KL term") {
        const auto mdp = single_state_unit_reward(0.9);
        const auto cont = ContinuationModel::constant(1.0);
        const auto policy = SoftmaxPolicy::uniform(1, 1);
        auto spec = default_spec(1, 2.0);  // ell_c = ln 1 = 0 and log pi = 0
        spec.semantics = Semantics::VT;
        const auto with_kl = mc_elbo_estimate(mdp, policy, cont, spec, 50000, stream);
        spec.kappa = 0.0;
        CHECK(with_kl.mean == doctest::Approx(j_vt_exact(mdp, policy, cont, spec)).epsilon(0.05));
    }
}

TEST_CASE("exact objective decomposes into survival, entropy, and living-cost parts") {
    rng::Stream stream(8080);
    for (int i = 0; i < 10; ++i) {
        const FiniteMdp mdp = verify::random_mdp(stream, 2, 5, 2, 4, 0.8, 0.95);
        const auto cont = ContinuationModel::exponential(stream.uniform(0.0, 1.5));
        const auto policy = verify::random_policy(stream, mdp.n_states, mdp.n_actions, 1.5);

        ObjectiveSpec spec = default_spec(mdp.n_actions, stream.uniform(0.1, 2.0));
        spec.horizon = 2500;
        spec.tail_tol = 1e-10;
        const auto parts = exact_breakdown(mdp, policy, cont, spec);
        const double assembled = parts.j_surv + spec.kappa * parts.entropy_mass -
                                 spec.kappa * spec.ell_c * parts.z_mass;
        const double direct = parts.j_surv - spec.kappa * parts.kl_mass_as;
        CHECK(std::abs(assembled - direct) <= 1e-10);
    }
}
