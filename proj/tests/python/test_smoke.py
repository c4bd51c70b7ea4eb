"""Smoke tests for the python bindings: the main operations are callable and
agree with their closed forms."""

import json
import math

import pytest

import sdhlab as sdh


def test_counterexample_optimizers():
    p_exact = sdh.argmax_scan(
        lambda p: sdh.counterexample_objectives(p, 0.9, 1.0, 0.4)[0], 0.0, 1.0
    )
    p_naive = sdh.argmax_scan(
        lambda p: sdh.counterexample_objectives(p, 0.9, 1.0, 0.4)[1], 0.0, 1.0
    )
    assert abs(p_exact - 0.707) <= 0.005
    assert abs(p_naive - 0.984) <= 0.005


def test_exact_objective_matches_closed_form():
    mdp = sdh.build_counterexample_mdp(0.4, 0.9)
    cont = sdh.ContinuationModel.hard_indicator()
    policy = sdh.SoftmaxPolicy(1, 2)  # p = 0.5

    spec = sdh.ObjectiveSpec()
    spec.semantics = sdh.Semantics.AS
    spec.kappa = 1.0
    spec.ell_c = math.log(2.0)
    spec.horizon = 1200
    spec.tail_tol = 1e-9

    j_as = sdh.j_as_exact(mdp, policy, cont, spec)
    assert j_as == pytest.approx(0.2 / 0.55, abs=1e-8)

    value, tail = sdh.j_surv_exact(mdp, policy, cont, spec)
    assert value == pytest.approx(0.2 / 0.55, abs=1e-8)
    assert tail <= 1e-9


def test_two_critic_identity_against_oracle():
    mdp = sdh.build_hazard_chain(5, [2], 1.0, 0.05, 2.0, 0.9)
    cont = sdh.ContinuationModel.exponential(0.7)
    policy = sdh.SoftmaxPolicy.uniform(5, 2)
    shaped = sdh.shape(mdp, cont)
    ell_c = math.log(2.0)

    critics = sdh.two_critic_fixed_point(policy, shaped, ell_c, 1e-12)
    spec = sdh.ObjectiveSpec()
    spec.semantics = sdh.Semantics.AS
    spec.kappa = 0.5
    spec.ell_c = ell_c
    spec.horizon = 3000
    spec.tail_tol = 1e-10
    exact = sdh.j_as_exact(mdp, policy, cont, spec)

    assembled = critics.v_r[0] - 0.5 * critics.v_kl[0]  # initial state is 0
    assert assembled == pytest.approx(exact, abs=1e-8)


def test_chance_bound_dominates_truth():
    mdp = sdh.build_hazard_chain(6, [2, 3], 1.0)
    policy = sdh.SoftmaxPolicy.uniform(6, 2)
    stream = sdh.Stream(7)
    s_h = sdh.survival_statistic(mdp, policy, 1.0, 10, sdh.SurvivalMode.Exact, 0, stream)
    cert = sdh.chance_bound(s_h, 1.0, 2.0, 10)
    exact = sdh.violation_probability_exact(mdp, policy, 2.0, 10)
    assert cert.bound >= exact
    assert 0.0 <= s_h <= 1.0


def test_compressed_window_matches_hand_expansion():
    rec = sdh.compress_window(
        [(0, 0, 1.0, 0.0, 0.5, 1), (1, 0, 2.0, 0.0, 1.0, 2)], 0.9
    )
    assert rec.r_n == pytest.approx(1.4)
    assert rec.u_boot == pytest.approx(0.405)
    assert rec.s_boot == 2


def test_training_is_deterministic():
    mdp = sdh.build_hazard_chain(6, [2], 1.0)
    cont = sdh.ContinuationModel.exponential(0.5)
    config = sdh.LearnerConfig()
    config.variant = sdh.Variant.VtMpo
    config.total_steps = 2000
    config.eval_interval = 1000
    config.warmup_steps = 300
    config.max_episode_steps = 40
    config.m_step_iters = 20
    config.eval_episodes = 4

    first = sdh.train(mdp, cont, config, 11)
    second = sdh.train(mdp, cont, config, 11)
    assert first.final_reward_return == second.final_reward_return
    assert first.final_cost_return == second.final_cost_return
    rows = [(m.step, m.reward_return, m.cost_return) for m in first.metrics]
    rows2 = [(m.step, m.reward_return, m.cost_return) for m in second.metrics]
    assert rows == rows2


def test_experiment_runner_roundtrip(tmp_path):
    config = {
        "env": {"name": "hazard_chain", "n": 5, "hazards": [2], "hazard_cost": 1.0,
                "gamma": 0.9},
        "continuation": {"variant": "hard"},
        "agent": {"variant": "as_sac_const_kappa", "kappa_init": 0.05,
                  "warmup_steps": 200, "max_episode_steps": 30, "eval_episodes": 4},
        "total_steps": 1200,
        "eval_interval": 400,
        "seeds": [3],
        "out_dir": str(tmp_path / "run"),
    }
    result = sdh.run_experiment_json(json.dumps(config))
    assert len(result["seeds"]) == 1
    metrics_path = result["seeds"][0]["metrics_path"]
    with open(metrics_path) as fh:
        header = json.loads(fh.readline())
    assert header["config_hash"] == result["config_hash"]
