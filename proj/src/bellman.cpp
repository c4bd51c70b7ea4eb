#include "sdh/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdh::bellman {

namespace {

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dist = std::max(dist, std::abs(a[i] - b[i]));
    return dist;
}

void check_finite(const std::vector<double>& v, const char* where) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string(where) + ": non-finite value");
}

/// Iterate V <- T V until the a-posteriori bound guarantees sup-norm error <= tol.
std::vector<double> fixed_point(const ShapedMdp& shaped, const SoftmaxPolicy& policy,
                                const Table& extra_reward, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("fixed_point: tol must be > 0");
    const double modulus = shaped.max_gamma_tilde();
    const double residual_goal = modulus > 0.0 ? tol * (1.0 - modulus) / modulus : tol;

    std::vector<double> v(shaped.n_states, 0.0);
    for (int iter = 0; iter < 1000000; ++iter) {
        std::vector<double> next = apply_eval_operator(v, policy, shaped, extra_reward);
        check_finite(next, "evaluate_policy");
        const double residual = sup_distance(next, v);
        v = std::move(next);
        if (residual <= residual_goal) return v;
    }
    throw std::runtime_error("evaluate_policy: no convergence within iteration cap");
}

Table q_from_v(const ShapedMdp& shaped, const std::vector<double>& v, const Table& extra_reward) {
    Table q(shaped.n_states, shaped.n_actions);
    const bool has_extra = extra_reward.rows() > 0;
    for (int s = 0; s < shaped.n_states; ++s) {
        for (int a = 0; a < shaped.n_actions; ++a) {
            double next_value = 0.0;
            for (int s2 = 0; s2 < shaped.n_states; ++s2) next_value += shaped.p(s, a, s2) * v[s2];
            q(s, a) = shaped.r_tilde(s, a) + (has_extra ? extra_reward(s, a) : 0.0) +
                      shaped.gamma_tilde(s, a) * next_value;
        }
    }
    return q;
}

}  // namespace

double ShapedMdp::max_gamma_tilde() const {
    double top = 0.0;
    for (double g : gamma_tilde.data()) top = std::max(top, g);
    return top;
}

ShapedMdp shape(const FiniteMdp& mdp, const ContinuationModel& cont) {
    ShapedMdp shaped;
    shaped.n_states = mdp.n_states;
    shaped.n_actions = mdp.n_actions;
    shaped.transition = mdp.transition;
    shaped.r_tilde = Table(mdp.n_states, mdp.n_actions);
    shaped.gamma_tilde = Table(mdp.n_states, mdp.n_actions);
    const Table alphas = alpha_table(mdp, cont);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            shaped.r_tilde(s, a) = alphas(s, a) * mdp.reward(s, a);
            shaped.gamma_tilde(s, a) = mdp.gamma * alphas(s, a);
        }
    }
    return shaped;
}

std::vector<double> apply_eval_operator(const std::vector<double>& v, const SoftmaxPolicy& policy,
                                        const ShapedMdp& shaped, const Table& extra_reward) {
    if (static_cast<int>(v.size()) != shaped.n_states)
        throw std::invalid_argument("apply_eval_operator: value vector size mismatch");
    if (policy.n_states() != shaped.n_states || policy.n_actions() != shaped.n_actions)
        throw std::invalid_argument("apply_eval_operator: policy shape mismatch");
    const bool has_extra = extra_reward.rows() > 0;
    if (has_extra && (extra_reward.rows() != shaped.n_states || extra_reward.cols() != shaped.n_actions))
        throw std::invalid_argument("apply_eval_operator: extra reward shape mismatch");

    std::vector<double> out(shaped.n_states, 0.0);
    for (int s = 0; s < shaped.n_states; ++s) {
        const auto pi = policy.probs(s);
        double value = 0.0;
        for (int a = 0; a < shaped.n_actions; ++a) {
            if (pi[a] == 0.0) continue;
            double next_value = 0.0;
            for (int s2 = 0; s2 < shaped.n_states; ++s2) next_value += shaped.p(s, a, s2) * v[s2];
            value += pi[a] * (shaped.r_tilde(s, a) + (has_extra ? extra_reward(s, a) : 0.0) +
                              shaped.gamma_tilde(s, a) * next_value);
        }
        out[s] = value;
    }
    return out;
}

std::vector<double> evaluate_policy(const SoftmaxPolicy& policy, const ShapedMdp& shaped,
                                    const Table& extra_reward, double tol) {
    return fixed_point(shaped, policy, extra_reward, tol);
}

SoftEvaluation soft_evaluate_as(const SoftmaxPolicy& policy, const ShapedMdp& shaped, double kappa,
                                double ell_c, double tol) {
    // Fold the per-decision term -kappa (log pi + ell_c) into the generic
    // operator through the extra-reward slot; 0 log 0 is dropped because the
    // operator skips zero-probability actions.
    Table extra(shaped.n_states, shaped.n_actions);
    for (int s = 0; s < shaped.n_states; ++s) {
        const auto lp = policy.log_probs(s);
        for (int a = 0; a < shaped.n_actions; ++a) extra(s, a) = -kappa * (lp[a] + ell_c);
    }
    SoftEvaluation out;
    out.v = fixed_point(shaped, policy, extra, tol);
    // Q excludes the current-step log pi, which belongs to V in the soft form.
    Table q_extra(shaped.n_states, shaped.n_actions, -kappa * ell_c);
    out.q = q_from_v(shaped, out.v, q_extra);
    return out;
}

CriticTables two_critic_fixed_point(const SoftmaxPolicy& policy, const ShapedMdp& shaped,
                                    double h_tgt, double tol) {
    CriticTables critics;
    critics.v_r = fixed_point(shaped, policy, Table(), tol);

    Table info_reward(shaped.n_states, shaped.n_actions);
    for (int s = 0; s < shaped.n_states; ++s) {
        const auto lp = policy.log_probs(s);
        for (int a = 0; a < shaped.n_actions; ++a) info_reward(s, a) = lp[a] + h_tgt;
    }
    ShapedMdp info = shaped;
    for (auto& r : info.r_tilde.data()) r = 0.0;
    critics.v_kl = fixed_point(info, policy, info_reward, tol);

    critics.q_r = q_from_v(shaped, critics.v_r, Table());
    critics.q_kl = q_from_v(info, critics.v_kl, info_reward);
    return critics;
}

Table combine_kappa(const CriticTables& critics, double kappa) {
    Table q = critics.q_r;
    for (int s = 0; s < q.rows(); ++s)
        for (int a = 0; a < q.cols(); ++a) q(s, a) -= kappa * critics.q_kl(s, a);
    return q;
}

double contraction_check(const ShapedMdp& shaped, const SoftmaxPolicy& policy, int n_trials,
                         rng::Stream& stream) {
    if (n_trials < 1) throw std::invalid_argument("contraction_check: n_trials must be >= 1");
    double worst = 0.0;
    std::vector<double> v(shaped.n_states), w(shaped.n_states);
    for (int trial = 0; trial < n_trials; ++trial) {
        for (int s = 0; s < shaped.n_states; ++s) {
            v[s] = stream.uniform(-10.0, 10.0);
            w[s] = stream.uniform(-10.0, 10.0);
        }
        const double gap = sup_distance(v, w);
        if (gap == 0.0) continue;
        const auto tv = apply_eval_operator(v, policy, shaped, Table());
        const auto tw = apply_eval_operator(w, policy, shaped, Table());
        worst = std::max(worst, sup_distance(tv, tw) / gap);
    }
    return worst;
}

std::string values_to_csv(const std::vector<double>& v) {
    std::ostringstream out;
    out.precision(17);
    out << "state,value\n";
    for (std::size_t s = 0; s < v.size(); ++s) out << s << "," << v[s] << "\n";
    return out.str();
}

std::string q_table_to_csv(const Table& q) {
    std::ostringstream out;
    out.precision(17);
    out << "state";
    for (int a = 0; a < q.cols(); ++a) out << ",q_a" << a;
    out << "\n";
    for (int s = 0; s < q.rows(); ++s) {
        out << s;
        for (int a = 0; a < q.cols(); ++a) out << "," << q(s, a);
        out << "\n";
    }
    return out.str();
}

}  // namespace sdh::bellman
