#include "sdh/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace sdh::agents {

namespace {

double min_pair(const Table& a, const Table& b, int s, int act) {
    return std::min(a(s, act), b(s, act));
}

Table elementwise_min(const Table& a, const Table& b) {
    Table out = a;
    for (int s = 0; s < out.rows(); ++s)
        for (int act = 0; act < out.cols(); ++act) out(s, act) = std::min(a(s, act), b(s, act));
    return out;
}

bool finite(const Table& t) {
    for (double x : t.data())
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

double DualState::kappa() const { return std::exp(log_kappa); }

bool is_as_sac(Variant variant) { return variant != Variant::VtMpo; }

std::string variant_name(Variant variant) {
    switch (variant) {
        case Variant::AsSacFull: return "as_sac_full";
        case Variant::AsSacNaiveCritic: return "as_sac_naive_critic";
        case Variant::AsSacConstKappa: return "as_sac_const_kappa";
        case Variant::AsSacNaiveTuning: return "as_sac_naive_tuning";
        case Variant::VtMpo: return "vt_mpo";
    }
    return "unknown";
}

Variant variant_from_name(const std::string& name) {
    if (name == "as_sac_full") return Variant::AsSacFull;
    if (name == "as_sac_naive_critic") return Variant::AsSacNaiveCritic;
    if (name == "as_sac_const_kappa") return Variant::AsSacConstKappa;
    if (name == "as_sac_naive_tuning") return Variant::AsSacNaiveTuning;
    if (name == "vt_mpo") return Variant::VtMpo;
    throw std::invalid_argument("unknown agent variant: " + name);
}

// ---------------------------------------------------------------------------
// AS-SAC update rules
// ---------------------------------------------------------------------------

double as_sac_target_single(const replay::TransitionRecord& rec, const SoftmaxPolicy& policy,
                            const Table& target_q1, const Table& target_q2, double kappa,
                            double c_lc, rng::Stream& stream) {
    const double gamma_tilde = rec.done ? 0.0 : rec.gamma_tilde;
    const int a_next = policy.sample(rec.s_next, stream);
    const double v_hat = min_pair(target_q1, target_q2, rec.s_next, a_next) -
                         kappa * policy.log_prob(rec.s_next, a_next);
    return rec.r_tilde - kappa * c_lc + gamma_tilde * v_hat;
}

TwoCriticTargets as_sac_targets_two(const replay::TransitionRecord& rec, const SoftmaxPolicy& policy,
                                    const Table& target_qr1, const Table& target_qr2,
                                    const Table& target_qkl1, const Table& target_qkl2, double h_tgt,
                                    rng::Stream& stream) {
    const double gamma_tilde = rec.done ? 0.0 : rec.gamma_tilde;
    const int a_next = policy.sample(rec.s_next, stream);
    TwoCriticTargets out;
    out.y_r = rec.r_tilde + gamma_tilde * min_pair(target_qr1, target_qr2, rec.s_next, a_next);
    out.y_kl = (policy.log_prob(rec.s, rec.a) + h_tgt) +
               gamma_tilde * min_pair(target_qkl1, target_qkl2, rec.s_next, a_next);
    return out;
}

ActorLoss as_sac_actor_loss(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                            const Table& q_r, const Table& q_kl, double kappa, bool gi_variant) {
    if (batch_states.empty()) throw std::invalid_argument("as_sac_actor_loss: empty batch");
    const int n_actions = policy.n_actions();
    const double inv_batch = 1.0 / static_cast<double>(batch_states.size());

    ActorLoss out;
    out.grad = Table(policy.n_states(), n_actions, 0.0);
    for (int s : batch_states) {
        const auto pi = policy.probs(s);
        const auto lp = policy.log_probs(s);
        double mean_g = 0.0;
        double mean_lp = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            mean_g += pi[a] * (kappa * q_kl(s, a) - q_r(s, a));
            mean_lp += pi[a] * lp[a];
        }
        out.loss += inv_batch * mean_g;
        for (int a = 0; a < n_actions; ++a) {
            double g = pi[a] * ((kappa * q_kl(s, a) - q_r(s, a)) - mean_g);
            if (gi_variant) g += kappa * pi[a] * (lp[a] - mean_lp);
            out.grad(s, a) += inv_batch * g;
        }
    }
    return out;
}

ActorLoss soft_actor_loss(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                          const Table& q, double kappa) {
    if (batch_states.empty()) throw std::invalid_argument("soft_actor_loss: empty batch");
    const int n_actions = policy.n_actions();
    const double inv_batch = 1.0 / static_cast<double>(batch_states.size());

    ActorLoss out;
    out.grad = Table(policy.n_states(), n_actions, 0.0);
    for (int s : batch_states) {
        const auto pi = policy.probs(s);
        const auto lp = policy.log_probs(s);
        double mean_g = 0.0;
        for (int a = 0; a < n_actions; ++a) mean_g += pi[a] * (kappa * lp[a] - q(s, a));
        out.loss += inv_batch * mean_g;
        // full derivative: the distribution path plus the kappa log pi
        // integrand path, which cancels to pi_b (g_b - mean_g) + 0
        for (int a = 0; a < n_actions; ++a)
            out.grad(s, a) += inv_batch * pi[a] * ((kappa * lp[a] - q(s, a)) - mean_g);
    }
    return out;
}

double kappa_dual_step(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                       const Table& q_kl, const DualState& dual, double lr) {
    if (batch_states.empty()) throw std::invalid_argument("kappa_dual_step: empty batch");
    double kl_mass = 0.0;
    for (int s : batch_states) {
        const auto pi = policy.probs(s);
        for (int a = 0; a < policy.n_actions(); ++a) kl_mass += pi[a] * q_kl(s, a);
    }
    kl_mass /= static_cast<double>(batch_states.size());
    // L(eta) = -exp(eta) (E[Q_KL] - eps)  =>  dL/d eta = -kappa (E[Q_KL] - eps)
    const double grad = -dual.kappa() * (kl_mass - dual.kl_budget_eps);
    return dual.log_kappa - lr * grad;
}

double naive_tuning_step(const std::vector<int>& batch_states, const SoftmaxPolicy& policy,
                         const DualState& dual, double lr, double target_entropy) {
    if (batch_states.empty()) throw std::invalid_argument("naive_tuning_step: empty batch");
    double mean_entropy = 0.0;
    for (int s : batch_states) mean_entropy += policy.entropy(s);
    mean_entropy /= static_cast<double>(batch_states.size());
    // loss -kappa (log pi + H_tgt): E[log pi] = -H, so L = -kappa (H_tgt - H)
    const double grad = -dual.kappa() * (target_entropy - mean_entropy);
    return dual.log_kappa - lr * grad;
}

// ---------------------------------------------------------------------------
// VT-MPO update rules
// ---------------------------------------------------------------------------

double vt_mpo_td_target(const replay::NStepRecord& rec, const SoftmaxPolicy& policy,
                        const Table& target_q, int n_action_samples, rng::Stream& stream) {
    if (rec.done) return rec.r_n;
    double expected_q = 0.0;
    if (n_action_samples <= 0) {
        const auto pi = policy.probs(rec.s_boot);
        for (int a = 0; a < policy.n_actions(); ++a) expected_q += pi[a] * target_q(rec.s_boot, a);
    } else {
        for (int i = 0; i < n_action_samples; ++i)
            expected_q += target_q(rec.s_boot, policy.sample(rec.s_boot, stream));
        expected_q /= static_cast<double>(n_action_samples);
    }
    return rec.r_n + rec.u_boot * expected_q;
}

std::vector<std::vector<double>> boltzmann_weights(const std::vector<int>& states,
                                                   const SoftmaxPolicy& prior, const Table& q,
                                                   double eta) {
    std::vector<std::vector<double>> weights;
    weights.reserve(states.size());
    for (int s : states) {
        const auto p0 = prior.probs(s);
        double max_q = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < prior.n_actions(); ++a) max_q = std::max(max_q, q(s, a));
        std::vector<double> w(prior.n_actions());
        double z = 0.0;
        for (int a = 0; a < prior.n_actions(); ++a) {
            w[a] = p0[a] * std::exp((q(s, a) - max_q) / eta);
            z += w[a];
        }
        for (auto& x : w) x /= z;
        weights.push_back(std::move(w));
    }
    return weights;
}

namespace {

double estep_dual_value(const std::vector<int>& states, const SoftmaxPolicy& prior, const Table& q,
                        double eps, double eta) {
    double acc = 0.0;
    for (int s : states) {
        const auto p0 = prior.probs(s);
        double max_q = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < prior.n_actions(); ++a) max_q = std::max(max_q, q(s, a));
        double z = 0.0;
        for (int a = 0; a < prior.n_actions(); ++a) z += p0[a] * std::exp((q(s, a) - max_q) / eta);
        acc += max_q + eta * std::log(z);
    }
    return eta * eps + acc / static_cast<double>(states.size());
}

double mean_kl_to_prior(const std::vector<int>& states,
                        const std::vector<std::vector<double>>& weights, const SoftmaxPolicy& prior) {
    double total = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto p0 = prior.probs(states[i]);
        for (std::size_t a = 0; a < weights[i].size(); ++a) {
            const double w = weights[i][a];
            if (w > 0.0) total += w * std::log(w / p0[a]);
        }
    }
    return total / static_cast<double>(states.size());
}

/// Minimize the convex dual over eta > 0: coarse scan on log eta, then
/// golden-section refinement.
double solve_estep_temperature(const std::vector<int>& states, const SoftmaxPolicy& prior,
                               const Table& q, double eps, double log_lo, double log_hi) {
    const int scan_points = 121;
    double best_log = log_lo;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i < scan_points; ++i) {
        const double log_eta = log_lo + (log_hi - log_lo) * i / (scan_points - 1);
        const double value = estep_dual_value(states, prior, q, eps, std::exp(log_eta));
        if (value < best_value) {
            best_value = value;
            best_log = log_eta;
        }
    }
    const double span = (log_hi - log_lo) / (scan_points - 1);
    double a = best_log - span;
    double b = best_log + span;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = estep_dual_value(states, prior, q, eps, std::exp(x1));
    double f2 = estep_dual_value(states, prior, q, eps, std::exp(x2));
    for (int i = 0; i < 80; ++i) {
        if (f1 > f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = estep_dual_value(states, prior, q, eps, std::exp(x2));
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = estep_dual_value(states, prior, q, eps, std::exp(x1));
        }
    }
    return std::exp(0.5 * (a + b));
}

}  // namespace

std::vector<std::vector<double>> mpo_e_step(const std::vector<int>& states,
                                            const SoftmaxPolicy& prior, const Table& q,
                                            DualState& dual) {
    if (states.empty()) throw std::invalid_argument("mpo_e_step: empty state batch");
    if (dual.mpo_kl_eps <= 0.0) throw std::invalid_argument("mpo_e_step: KL budget must be > 0");

    double eta = solve_estep_temperature(states, prior, q, dual.mpo_kl_eps, -14.0, 14.0);
    auto weights = boltzmann_weights(states, prior, q, eta);
    auto mean_kl = [&](double candidate) {
        return mean_kl_to_prior(states, boltzmann_weights(states, prior, q, candidate), prior);
    };
    if (mean_kl_to_prior(states, weights, prior) > dual.mpo_kl_eps) {
        // The dual is flat near its minimum, so the argmin can sit a hair on
        // the infeasible side. KL(q*_eta || pi0) is decreasing in eta: polish
        // with a bisection toward the budget from above.
        double lo = eta;
        double hi = eta;
        int expansions = 0;
        while (mean_kl(hi) > dual.mpo_kl_eps && expansions++ < 80) hi *= 2.0;
        if (mean_kl(hi) > dual.mpo_kl_eps)
            throw std::runtime_error("mpo_e_step: temperature search failed to satisfy the KL budget");
        for (int i = 0; i < 100; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (mean_kl(mid) > dual.mpo_kl_eps)
                lo = mid;
            else
                hi = mid;
        }
        eta = hi;
        weights = boltzmann_weights(states, prior, q, eta);
    }
    dual.eta_e = eta;
    return weights;
}

void mpo_m_step(SoftmaxPolicy& policy, const std::vector<std::vector<double>>& weights,
                const std::vector<int>& states, double lr, int n_iters, double logit_clamp) {
    if (weights.size() != states.size()) throw std::invalid_argument("mpo_m_step: size mismatch");
    for (int iter = 0; iter < n_iters; ++iter) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            const int s = states[i];
            const auto pi = policy.probs(s);
            for (int a = 0; a < policy.n_actions(); ++a)
                policy.logits()(s, a) += lr * (weights[i][a] - pi[a]);
        }
        policy.clamp_logits(logit_clamp);
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

class Trainer {
  public:
    Trainer(const FiniteMdp& mdp, const ContinuationModel& cont, const std::vector<Schedule>& schedules,
            const LearnerConfig& config, std::uint64_t seed, const MetricsSink& sink)
        : mdp_(mdp),
          cont_(cont),
          schedules_(schedules),
          config_(config),
          sink_(sink),
          env_stream_(rng::Stream::derive(seed, rng::kEnv)),
          agent_stream_(rng::Stream::derive(seed, rng::kAgent)),
          seed_(seed),
          actor_(mdp.n_states, mdp.n_actions),
          target_actor_(mdp.n_states, mdp.n_actions) {
        const int s_count = mdp.n_states;
        const int a_count = mdp.n_actions;
        q_a_ = Table(s_count, a_count);
        q_b_ = Table(s_count, a_count);
        q_kl_a_ = Table(s_count, a_count);
        q_kl_b_ = Table(s_count, a_count);
        t_q_a_ = q_a_;
        t_q_b_ = q_b_;
        t_q_kl_a_ = q_kl_a_;
        t_q_kl_b_ = q_kl_b_;

        dual_.log_kappa = std::log(config.kappa_init);
        dual_.kl_budget_eps = config.kl_budget_eps;
        dual_.eta_e = 1.0;
        dual_.mpo_kl_eps = config.mpo_kl_eps;
        dual_.h_tgt = std::log(static_cast<double>(a_count));

        if (config.variant == Variant::VtMpo) {
            nstep_buffer_ = std::make_unique<replay::NStepBuffer>(config.buffer_capacity);
            window_ = std::make_unique<replay::RollingWindow>(config.n_step, mdp.gamma);
        } else {
            transition_buffer_ = std::make_unique<replay::TransitionBuffer>(config.buffer_capacity);
        }
    }

    TrainResult run() {
        state_ = env_stream_.categorical(mdp_.initial_dist);
        episode_steps_ = 0;
        for (std::int64_t t = 0; t < config_.total_steps; ++t) {
            if (t % config_.eval_interval == 0) emit_metrics(t);
            apply_schedules(t);
            collect_step(t);
            if (t + 1 > config_.warmup_steps && (t + 1) % config_.update_every == 0) update();
        }
        emit_metrics(config_.total_steps);

        TrainResult result;
        result.policy = actor_;
        result.dual = dual_;
        result.metrics = std::move(metrics_);
        result.final_reward_return = result.metrics.back().reward_return;
        result.final_cost_return = result.metrics.back().cost_return;
        result.q_r = q_a_;
        result.q_kl = q_kl_a_;
        result.c_max = cont_.variant() == ContinuationVariant::CatNormalized ? cont_.c_max() : 0.0;

        result.tables.emplace_back("actor_logits", actor_.logits());
        if (config_.variant == Variant::VtMpo) {
            result.tables.emplace_back("q", q_a_);
            result.tables.emplace_back("q_target", t_q_a_);
            result.tables.emplace_back("target_actor_logits", target_actor_.logits());
        } else {
            result.tables.emplace_back("q1", q_a_);
            result.tables.emplace_back("q2", q_b_);
            result.tables.emplace_back("q1_target", t_q_a_);
            result.tables.emplace_back("q2_target", t_q_b_);
            if (config_.variant == Variant::AsSacFull ||
                config_.variant == Variant::AsSacNaiveCritic) {
                result.tables.emplace_back("q_kl1", q_kl_a_);
                result.tables.emplace_back("q_kl2", q_kl_b_);
                result.tables.emplace_back("q_kl1_target", t_q_kl_a_);
                result.tables.emplace_back("q_kl2_target", t_q_kl_b_);
            }
        }
        return result;
    }

  private:
    double living_cost_value() const {
        return config_.living_cost == LivingCost::TargetEntropy ? dual_.h_tgt : 0.0;
    }

    void apply_schedules(std::int64_t t) {
        for (const auto& schedule : schedules_) {
            const double value = schedule_value(schedule, t);
            if (schedule.target == ScheduleTarget::Lambda)
                cont_.set_lambda(value);
            else
                cont_.set_p_max(value);
        }
    }

    void collect_step(std::int64_t t) {
        const int s = state_;
        const bool act_random =
            t < config_.warmup_steps ||
            (config_.explore_eps > 0.0 && env_stream_.bernoulli(config_.explore_eps));
        const int a = act_random ? static_cast<int>(env_stream_.uniform_int(mdp_.n_actions))
                                 : actor_.sample(s, env_stream_);
        const double behavior_logp = actor_.log_prob(s, a);
        const double alpha = cont_.alpha(mdp_.cost_vec(s, a));
        const double reward = mdp_.reward(s, a);
        const double cost = mdp_.cost_sum(s, a);
        const StepOutcome outcome = step(mdp_, s, a, env_stream_);
        ++episode_steps_;
        const bool terminated = outcome.terminated;
        const bool truncated = !terminated && episode_steps_ >= config_.max_episode_steps;

        if (config_.variant == Variant::VtMpo) {
            for (const auto& rec :
                 window_->push({s, a, reward, cost, alpha, outcome.next_state, behavior_logp},
                               terminated))
                nstep_buffer_->push(rec);
            if (truncated)
                for (const auto& rec : window_->flush()) nstep_buffer_->push(rec);
        } else {
            const double gt = replay::terminal_mask(terminated, truncated, mdp_.gamma * alpha);
            transition_buffer_->push({s, a, alpha * reward, cost, outcome.next_state, gt, terminated});
        }

        if (terminated || truncated) {
            state_ = env_stream_.categorical(mdp_.initial_dist);
            episode_steps_ = 0;
        } else {
            state_ = outcome.next_state;
        }
    }

    void update() {
        const std::size_t have = config_.variant == Variant::VtMpo ? nstep_buffer_->size()
                                                                   : transition_buffer_->size();
        if (have < static_cast<std::size_t>(config_.batch_size)) return;
        ++update_round_;
        if (config_.variant == Variant::VtMpo)
            update_vt_mpo();
        else
            update_as_sac();
    }

    void update_as_sac() {
        const auto batch = transition_buffer_->sample_minibatch(config_.batch_size, agent_stream_);
        std::vector<int> batch_states;
        batch_states.reserve(batch.size());
        std::vector<double> batch_costs;
        batch_costs.reserve(batch.size());
        for (const auto& rec : batch) {
            batch_states.push_back(rec.s);
            batch_costs.push_back(rec.cost);
        }
        const double kappa = dual_.kappa();
        const bool two_critic =
            config_.variant == Variant::AsSacFull || config_.variant == Variant::AsSacNaiveCritic;

        double loss = 0.0;
        if (two_critic) {
            const double h_tgt = living_cost_value();
            std::vector<TwoCriticTargets> targets;
            targets.reserve(batch.size());
            for (const auto& rec : batch)
                targets.push_back(as_sac_targets_two(rec, actor_, t_q_a_, t_q_b_, t_q_kl_a_,
                                                     t_q_kl_b_, h_tgt, agent_stream_));
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const auto& rec = batch[i];
                const auto& y = targets[i];
                loss += 0.5 * ((y.y_r - q_a_(rec.s, rec.a)) * (y.y_r - q_a_(rec.s, rec.a)) +
                               (y.y_kl - q_kl_a_(rec.s, rec.a)) * (y.y_kl - q_kl_a_(rec.s, rec.a)));
                q_a_(rec.s, rec.a) += config_.lr_critic * (y.y_r - q_a_(rec.s, rec.a));
                q_b_(rec.s, rec.a) += config_.lr_critic * (y.y_r - q_b_(rec.s, rec.a));
                q_kl_a_(rec.s, rec.a) += config_.lr_critic * (y.y_kl - q_kl_a_(rec.s, rec.a));
                q_kl_b_(rec.s, rec.a) += config_.lr_critic * (y.y_kl - q_kl_b_(rec.s, rec.a));
            }
        } else {
            const double c_lc = living_cost_value();
            std::vector<double> targets;
            targets.reserve(batch.size());
            for (const auto& rec : batch)
                targets.push_back(
                    as_sac_target_single(rec, actor_, t_q_a_, t_q_b_, kappa, c_lc, agent_stream_));
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const auto& rec = batch[i];
                const double y = targets[i];
                loss += (y - q_a_(rec.s, rec.a)) * (y - q_a_(rec.s, rec.a));
                q_a_(rec.s, rec.a) += config_.lr_critic * (y - q_a_(rec.s, rec.a));
                q_b_(rec.s, rec.a) += config_.lr_critic * (y - q_b_(rec.s, rec.a));
            }
        }
        critic_loss_ = loss / static_cast<double>(batch.size());

        if (update_round_ % config_.actor_every == 0) {
            if (two_critic) {
                const Table q_r_min = elementwise_min(q_a_, q_b_);
                const Table q_kl_min = elementwise_min(q_kl_a_, q_kl_b_);
                const auto actor_loss = as_sac_actor_loss(batch_states, actor_, q_r_min, q_kl_min,
                                                          kappa, config_.gi_variant);
                apply_actor_grad(actor_loss.grad);
                if (config_.lr_dual > 0.0)
                    dual_.log_kappa =
                        kappa_dual_step(batch_states, actor_, q_kl_min, dual_, config_.lr_dual);
            } else {
                const Table q_min = elementwise_min(q_a_, q_b_);
                const auto actor_loss = soft_actor_loss(batch_states, actor_, q_min, kappa);
                apply_actor_grad(actor_loss.grad);
                if (config_.variant == Variant::AsSacNaiveTuning && config_.lr_dual > 0.0)
                    dual_.log_kappa = naive_tuning_step(batch_states, actor_, dual_, config_.lr_dual,
                                                        config_.target_entropy);
            }
        }

        soft_update(t_q_a_, q_a_);
        soft_update(t_q_b_, q_b_);
        if (two_critic) {
            soft_update(t_q_kl_a_, q_kl_a_);
            soft_update(t_q_kl_b_, q_kl_b_);
        }
        maybe_update_scale(batch_costs);
    }

    void update_vt_mpo() {
        const auto batch = nstep_buffer_->sample_minibatch(config_.batch_size, agent_stream_);
        std::vector<int> batch_states;
        std::vector<double> batch_costs;
        batch_states.reserve(batch.size());
        batch_costs.reserve(batch.size());
        for (const auto& rec : batch) {
            batch_states.push_back(rec.s);
            batch_costs.push_back(rec.cost);
        }

        std::vector<double> targets;
        targets.reserve(batch.size());
        for (const auto& rec : batch)
            targets.push_back(
                vt_mpo_td_target(rec, actor_, t_q_a_, config_.n_action_samples, agent_stream_));
        double loss = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& rec = batch[i];
            loss += (targets[i] - q_a_(rec.s, rec.a)) * (targets[i] - q_a_(rec.s, rec.a));
            q_a_(rec.s, rec.a) += config_.lr_critic * (targets[i] - q_a_(rec.s, rec.a));
        }
        critic_loss_ = loss / static_cast<double>(batch.size());

        if (update_round_ % config_.actor_every == 0) {
            std::vector<int> estep_states = batch_states;
            if (config_.stack_boot_states)
                for (const auto& rec : batch) estep_states.push_back(rec.s_boot);
            const auto weights = mpo_e_step(estep_states, target_actor_, t_q_a_, dual_);
            mpo_m_step(actor_, weights, estep_states, config_.m_step_lr, config_.m_step_iters,
                       config_.logit_clamp);
        }

        soft_update(t_q_a_, q_a_);
        soft_update_policy(target_actor_, actor_);
        maybe_update_scale(batch_costs);
    }

    void apply_actor_grad(const Table& grad) {
        for (int s = 0; s < actor_.n_states(); ++s)
            for (int a = 0; a < actor_.n_actions(); ++a)
                actor_.logits()(s, a) -= config_.lr_actor * grad(s, a);
        actor_.clamp_logits(config_.logit_clamp);
    }

    void soft_update(Table& target, const Table& online) {
        for (int s = 0; s < target.rows(); ++s)
            for (int a = 0; a < target.cols(); ++a)
                target(s, a) += config_.tau * (online(s, a) - target(s, a));
    }

    void soft_update_policy(SoftmaxPolicy& target, const SoftmaxPolicy& online) {
        for (int s = 0; s < target.n_states(); ++s)
            for (int a = 0; a < target.n_actions(); ++a)
                target.logits()(s, a) += config_.tau * (online.logits()(s, a) - target.logits()(s, a));
    }

    void maybe_update_scale(const std::vector<double>& batch_costs) {
        if (cont_.variant() != ContinuationVariant::CatNormalized) return;
        if (update_round_ % config_.ema_every != 0) return;
        cont_.update_scale(batch_costs);
    }

    void emit_metrics(std::int64_t t) {
        check_finite(t);
        MetricsRow row;
        row.step = t;
        row.kappa = dual_.kappa();
        row.eta_e = dual_.eta_e;
        row.c_max = cont_.variant() == ContinuationVariant::CatNormalized ? cont_.c_max() : 0.0;
        row.entropy = actor_.mean_entropy();
        row.critic_loss = critic_loss_;

        rng::Stream eval_stream = rng::Stream::derive(seed_, rng::kEval, static_cast<std::uint64_t>(t));
        double reward_total = 0.0;
        double cost_total = 0.0;
        for (int episode = 0; episode < config_.eval_episodes; ++episode) {
            const Trajectory traj =
                sample_trajectory(mdp_, actor_, config_.max_episode_steps, cont_, eval_stream);
            for (const auto& entry : traj.steps) {
                reward_total += entry.reward;
                for (double c : entry.cost_vec) cost_total += c;
            }
        }
        row.reward_return = reward_total / config_.eval_episodes;
        row.cost_return = cost_total / config_.eval_episodes;
        metrics_.push_back(row);
        if (sink_) sink_(row);
    }

    void check_finite(std::int64_t t) {
        const bool ok = finite(actor_.logits()) && finite(q_a_) && finite(q_b_) &&
                        finite(q_kl_a_) && finite(q_kl_b_) && std::isfinite(dual_.log_kappa) &&
                        std::isfinite(dual_.eta_e);
        if (ok) return;
        std::ostringstream msg;
        msg << "training aborted: non-finite parameter at step " << t << " (variant "
            << variant_name(config_.variant) << ", seed " << seed_ << ")";
        throw std::runtime_error(msg.str());
    }

    const FiniteMdp& mdp_;
    ContinuationModel cont_;
    std::vector<Schedule> schedules_;
    LearnerConfig config_;
    MetricsSink sink_;
    rng::Stream env_stream_;
    rng::Stream agent_stream_;
    std::uint64_t seed_ = 0;

    SoftmaxPolicy actor_;
    SoftmaxPolicy target_actor_;
    Table q_a_, q_b_, q_kl_a_, q_kl_b_;
    Table t_q_a_, t_q_b_, t_q_kl_a_, t_q_kl_b_;
    DualState dual_;

    std::unique_ptr<replay::TransitionBuffer> transition_buffer_;
    std::unique_ptr<replay::NStepBuffer> nstep_buffer_;
    std::unique_ptr<replay::RollingWindow> window_;

    int state_ = 0;
    int episode_steps_ = 0;
    std::int64_t update_round_ = 0;
    double critic_loss_ = 0.0;
    std::vector<MetricsRow> metrics_;
};

}  // namespace

TrainResult train(const FiniteMdp& mdp, const ContinuationModel& cont,
                  const std::vector<Schedule>& schedules, const LearnerConfig& config,
                  std::uint64_t seed, const MetricsSink& sink) {
    mdp.validate();
    Trainer trainer(mdp, cont, schedules, config, seed, sink);
    return trainer.run();
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

double gradient_check(const std::function<double(const SoftmaxPolicy&)>& loss,
                      const Table& analytic_grad, const SoftmaxPolicy& policy, double perturbation) {
    double worst = 0.0;
    SoftmaxPolicy probe = policy;
    for (int s = 0; s < policy.n_states(); ++s) {
        for (int a = 0; a < policy.n_actions(); ++a) {
            const double original = probe.logits()(s, a);
            probe.logits()(s, a) = original + perturbation;
            const double up = loss(probe);
            probe.logits()(s, a) = original - perturbation;
            const double down = loss(probe);
            probe.logits()(s, a) = original;
            const double fd = (up - down) / (2.0 * perturbation);
            const double rel = std::abs(analytic_grad(s, a) - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace sdh::agents
