#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdh/continuation.hpp"
#include "sdh/mdp.hpp"
#include "sdh/policy.hpp"
#include "sdh/replay.hpp"
#include "sdh/rng.hpp"
#include "sdh/table.hpp"

namespace sdh::agents {

enum class Variant { AsSacFull, AsSacNaiveCritic, AsSacConstKappa, AsSacNaiveTuning, VtMpo };

/// Living-cost constant c_LC used in critic targets: the target-entropy
/// constant (the exact uniform-prior objective) or zero (dropping it).
enum class LivingCost { TargetEntropy, Zero };

/// Temperatures and their budgets.
struct DualState {
    double log_kappa = 0.0;      // kappa = exp(log_kappa)
    double kl_budget_eps = 0.0;  // budget for the discounted KL-mass constraint
    double eta_e = 1.0;          // MPO E-step temperature
    double mpo_kl_eps = 0.1;     // E-step KL budget
    double h_tgt = 0.0;          // target-entropy constant; = ell_c for the exact objective

    double kappa() const;
};

struct LearnerConfig {
    Variant variant = Variant::VtMpo;
    int n_step = 5;
    int batch_size = 64;
    double lr_actor = 0.05;
    double lr_critic = 0.1;
    double lr_dual = 0.0;
    double tau = 0.05;
    LivingCost living_cost = LivingCost::TargetEntropy;
    double kappa_init = 1.0;
    double kl_budget_eps = 0.0;
    double mpo_kl_eps = 0.1;
    double target_entropy = 0.0;  // naive-tuning entropy target
    bool gi_variant = false;
    bool stack_boot_states = false;
    double explore_eps = 0.0;  // uniform-action mixture in the behavior policy
    int warmup_steps = 500;
    int update_every = 1;
    int actor_every = 2;
    int m_step_iters = 200;
    double m_step_lr = 1.0;
    std::int64_t buffer_capacity = 100000;
    int max_episode_steps = 200;
    int eval_episodes = 8;
    int n_action_samples = 0;  // 0: closed-form action expectation in TD(n) targets
    double logit_clamp = 30.0;
    int ema_every = 50;
    std::int64_t total_steps = 20000;
    std::int64_t eval_interval = 1000;
};

bool is_as_sac(Variant variant);
std::string variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// AS-SAC update rules
// ---------------------------------------------------------------------------

/// Single-critic soft target y = r~ - kappa c_LC + gamma~ V^(s') with
/// V^(s') = min_i Q_i(s', a') - kappa log pi(a'|s'), a' sampled from the
/// current policy. The stored gamma~ is terminal-masked.
double as_sac_target_single(const replay::TransitionRecord& rec, const SoftmaxPolicy& policy,
                            const Table& target_q1, const Table& target_q2, double kappa,
                            double c_lc, rng::Stream& stream);

struct TwoCriticTargets {
    double y_r = 0.0;
    double y_kl = 0.0;
};

/// Kappa-free TD targets for the reward and information critics; the
/// current-step log pi enters y_kl as a constant (gradient stopped).
TwoCriticTargets as_sac_targets_two(const replay::TransitionRecord& rec, const SoftmaxPolicy& policy,
                                    const Table& target_qr1, const Table& target_qr2,
                                    const Table& target_qkl1, const Table& target_qkl2, double h_tgt,
                                    rng::Stream& stream);

struct ActorLoss {
    double loss = 0.0;
    Table grad;  // d loss / d logits
};

/// Two-critic actor loss L = E_s E_{a~pi}[kappa Q_KL - Q_R] with its exact
/// gradient for tabular softmax (closed-form action expectation). The GI
/// variant leaves the value unchanged and adds the explicit entropy-path
/// gradient kappa * grad E_pi[log pi].
ActorLoss as_sac_actor_loss(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                            const Table& q_r, const Table& q_kl, double kappa, bool gi_variant);

/// Standard soft actor loss L = E_s E_{a~pi}[kappa log pi - Q], used by the
/// single-critic ablations.
ActorLoss soft_actor_loss(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                          const Table& q, double kappa);

/// Dual loss L(eta) = -exp(eta) (E[Q_KL] - eps); one gradient step on
/// log kappa against the discounted KL-mass budget.
double kappa_dual_step(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                       const Table& q_kl, const DualState& dual, double lr);

/// Standard SAC temperature rule: loss -kappa (log pi + H_tgt) under the
/// current policy.
double naive_tuning_step(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                         const DualState& dual, double lr, double target_entropy);

// ---------------------------------------------------------------------------
// VT-MPO update rules
// ---------------------------------------------------------------------------

/// TD(n) target y = R_n + (1 - done) u_boot E_{a~pi}[Q(s_boot, a)]; the
/// expectation is closed-form when n_action_samples <= 0, sampled otherwise.
double vt_mpo_td_target(const replay::NStepRecord& rec, const SoftmaxPolicy& policy,
                        const Table& target_q, int n_action_samples, rng::Stream& stream);

/// Per-state Boltzmann reweighting q(a|s) proportional to prior * exp(Q/eta).
std::vector<std::vector<double>> boltzmann_weights(const std::vector<int>& states,
                                                   const SoftmaxPolicy& prior, const Table& q,
                                                   double eta);

/// KL-budgeted nonparametric improvement: solves the convex temperature dual
/// g(eta) = eta eps + eta E_s log E_{a~prior} exp(Q/eta) by 1-D search,
/// stores the minimizer in dual.eta_e, and returns the per-state weights.
std::vector<std::vector<double>> mpo_e_step(const std::vector<int>& states,
                                            const SoftmaxPolicy& prior, const Table& q,
                                            DualState& dual);

/// Fits the tabular softmax actor to the improvement weights by gradient
/// ascent on the weighted log-likelihood.
void mpo_m_step(SoftmaxPolicy& policy, const std::vector<std::vector<double>>& weights,
                const std::vector<int>& states, double lr, int n_iters, double logit_clamp = 30.0);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct MetricsRow {
    std::int64_t step = 0;
    double reward_return = 0.0;
    double cost_return = 0.0;
    double kappa = 0.0;
    double eta_e = 0.0;
    double c_max = 0.0;
    double entropy = 0.0;
    double critic_loss = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

struct TrainResult {
    SoftmaxPolicy policy;
    DualState dual;
    double final_reward_return = 0.0;
    double final_cost_return = 0.0;
    std::vector<MetricsRow> metrics;
    Table q_r;   // primary critic (Q_R, Q, or Q_surv depending on variant)
    Table q_kl;  // information critic where the variant has one
    std::vector<std::pair<std::string, Table>> tables;  // every learned table, for checkpoints
    double c_max = 0.0;
};

/// Full training loop for every variant: collection (no resets on
/// violations), replay, critic/actor/dual updates, target soft updates,
/// schedules, CaT scale EMA, periodic frozen-policy evaluation. Aborts with
/// a diagnostic on any non-finite parameter.
TrainResult train(const FiniteMdp& mdp, const ContinuationModel& cont,
                  const std::vector<Schedule>& schedules, const LearnerConfig& config,
                  std::uint64_t seed, const MetricsSink& sink = nullptr);

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Max over logits of |analytic - central difference| / max(1, |fd|).
double gradient_check(const std::function<double(const SoftmaxPolicy&)>& loss,
                      const Table& analytic_grad, const SoftmaxPolicy& policy,
                      double perturbation = 1e-5);

}  // namespace sdh::agents
