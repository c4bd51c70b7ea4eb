#pragma once

#include <vector>

#include "sdh/mdp.hpp"
#include "sdh/policy.hpp"
#include "sdh/rng.hpp"
#include "sdh/table.hpp"

namespace sdh::bellman {

/// Survival-shaped tables r~(s,a) = alpha * r and gamma~(s,a) = gamma * alpha,
/// carried together with the transition kernel so operators are self-contained.
struct ShapedMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // [s][a][s'], row-major
    Table r_tilde;
    Table gamma_tilde;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }

    double max_gamma_tilde() const;
};

/// Fixed points of the kappa-free critic recursions; Q_kappa = Q_R - kappa * Q_KL.
struct CriticTables {
    Table q_r;
    Table q_kl;
    std::vector<double> v_r;
    std::vector<double> v_kl;
};

ShapedMdp shape(const FiniteMdp& mdp, const ContinuationModel& cont);

/// One application of the variable-discount evaluation operator
///   (T V)(s) = E_{a~pi} [ r~(s,a) + f(s,a) + gamma~(s,a) E_{s'} V(s') ].
/// Pass an empty table for f to mean f == 0.
std::vector<double> apply_eval_operator(const std::vector<double>& v, const SoftmaxPolicy& policy,
                                        const ShapedMdp& shaped, const Table& extra_reward);

/// Banach iteration on the evaluation operator; the stopping rule uses the
/// contraction-derived a-posteriori bound, so the result is within tol of the
/// unique fixed point in the sup norm.
std::vector<double> evaluate_policy(const SoftmaxPolicy& policy, const ShapedMdp& shaped,
                                    const Table& extra_reward, double tol = 1e-10);

struct SoftEvaluation {
    Table q;
    std::vector<double> v;
};

/// Fixed point of the soft recursion
///   Q(s,a) = r~(s,a) - kappa * ell_c + gamma~(s,a) E_{s'}[V(s')],
///   V(s)   = E_{a~pi}[Q(s,a) - kappa log pi(a|s)]      (0 log 0 := 0).
SoftEvaluation soft_evaluate_as(const SoftmaxPolicy& policy, const ShapedMdp& shaped, double kappa,
                                double ell_c, double tol = 1e-10);

/// Fixed points of the reward critic Q_R and information critic Q_KL; neither
/// recursion references kappa.
CriticTables two_critic_fixed_point(const SoftmaxPolicy& policy, const ShapedMdp& shaped,
                                    double h_tgt, double tol = 1e-10);

Table combine_kappa(const CriticTables& critics, double kappa);

/// Max observed modulus ||TV - TW||_inf / ||V - W||_inf over random bounded
/// value-function pairs; must not exceed gamma.
double contraction_check(const ShapedMdp& shaped, const SoftmaxPolicy& policy, int n_trials,
                         rng::Stream& stream);

/// CSV export for inspection (one row per state; Q columns per action).
std::string values_to_csv(const std::vector<double>& v);
std::string q_table_to_csv(const Table& q);

}  // namespace sdh::bellman
