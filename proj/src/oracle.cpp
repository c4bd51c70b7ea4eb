#include "sdh/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>
#include <utility>

namespace sdh::oracle {

namespace {

constexpr std::size_t kExactSupportCap = 500000;

int required_horizon(double gamma, double scale, double tail_tol) {
    // smallest H with gamma^H * scale / (1 - gamma) <= tail_tol
    if (scale <= 0.0) return 1;
    const double target = tail_tol * (1.0 - gamma) / scale;
    if (target >= 1.0) return 1;
    return static_cast<int>(std::ceil(std::log(target) / std::log(gamma)));
}

}  // namespace

ObjectiveBreakdown exact_breakdown(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                                   const ContinuationModel& cont, const ObjectiveSpec& spec) {
    if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
        throw std::invalid_argument("exact_breakdown: policy shape mismatch");
    if (spec.horizon < 1) throw std::invalid_argument("exact_breakdown: horizon must be >= 1");

    const int n_states = mdp.n_states;
    const int n_actions = mdp.n_actions;
    const Table alphas = alpha_table(mdp, cont);

    // Per-state one-step quantities under the policy.
    std::vector<double> shaped_reward(n_states, 0.0);  // E_a[alpha r]
    std::vector<double> info_rate(n_states, 0.0);      // E_a[log pi + ell_c]
    std::vector<double> entropy_rate(n_states, 0.0);
    for (int s = 0; s < n_states; ++s) {
        const auto pi = policy.probs(s);
        const auto lp = policy.log_probs(s);
        for (int a = 0; a < n_actions; ++a) {
            if (pi[a] == 0.0) continue;  // 0 log 0 := 0
            shaped_reward[s] += pi[a] * alphas(s, a) * mdp.reward(s, a);
            info_rate[s] += pi[a] * (lp[a] + spec.ell_c);
            entropy_rate[s] -= pi[a] * lp[a];
        }
    }

    double info_scale = 0.0;
    for (int s = 0; s < n_states; ++s) info_scale = std::max(info_scale, std::abs(info_rate[s]));
    const double kappa = spec.semantics == Semantics::SurvOnly ? 0.0 : spec.kappa;
    const double scale = std::max(mdp.max_reward(), kappa * info_scale);
    const double tail = scale > 0.0
                            ? std::pow(mdp.gamma, spec.horizon) * scale / (1.0 - mdp.gamma)
                            : 0.0;
    if (tail > spec.tail_tol) {
        throw std::invalid_argument("exact objective: horizon " + std::to_string(spec.horizon) +
                                    " too small for tail_tol; need H >= " +
                                    std::to_string(required_horizon(mdp.gamma, scale, spec.tail_tol)));
    }

    // Forward masses: surv[s] carries w_t = gamma^t prod_{k<t} alpha_k,
    // plain[s] carries gamma^t.
    std::vector<double> surv(mdp.initial_dist);
    std::vector<double> plain(mdp.initial_dist);
    std::vector<double> surv_next(n_states), plain_next(n_states);

    ObjectiveBreakdown out;
    out.tail_bound = tail;
    for (int t = 0; t < spec.horizon; ++t) {
        for (int s = 0; s < n_states; ++s) {
            if (surv[s] != 0.0) {
                out.j_surv += surv[s] * shaped_reward[s];
                out.kl_mass_as += surv[s] * info_rate[s];
                out.z_mass += surv[s];
                out.entropy_mass += surv[s] * entropy_rate[s];
            }
            if (plain[s] != 0.0) out.kl_mass_vt += plain[s] * info_rate[s];
        }
        std::fill(surv_next.begin(), surv_next.end(), 0.0);
        std::fill(plain_next.begin(), plain_next.end(), 0.0);
        for (int s = 0; s < n_states; ++s) {
            const double ws = surv[s];
            const double ps = plain[s];
            if (ws == 0.0 && ps == 0.0) continue;
            const auto pi = policy.probs(s);
            for (int a = 0; a < n_actions; ++a) {
                if (pi[a] == 0.0) continue;
                const double w_flow = ws * pi[a] * mdp.gamma * alphas(s, a);
                const double p_flow = ps * pi[a] * mdp.gamma;
                if (w_flow == 0.0 && p_flow == 0.0) continue;
                for (int s2 = 0; s2 < n_states; ++s2) {
                    const double prob = mdp.p(s, a, s2);
                    if (prob == 0.0) continue;
                    surv_next[s2] += w_flow * prob;
                    plain_next[s2] += p_flow * prob;
                }
            }
        }
        surv.swap(surv_next);
        plain.swap(plain_next);
    }
    return out;
}

SurvivalValue j_surv_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                           const ContinuationModel& cont, const ObjectiveSpec& spec) {
    ObjectiveSpec surv_spec = spec;
    surv_spec.semantics = Semantics::SurvOnly;
    const auto breakdown = exact_breakdown(mdp, policy, cont, surv_spec);
    return {breakdown.j_surv, breakdown.tail_bound};
}

double j_as_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
                  const ObjectiveSpec& spec) {
    const auto breakdown = exact_breakdown(mdp, policy, cont, spec);
    return breakdown.j_surv - spec.kappa * breakdown.kl_mass_as;
}

double j_vt_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
                  const ObjectiveSpec& spec) {
    const auto breakdown = exact_breakdown(mdp, policy, cont, spec);
    return breakdown.j_surv - spec.kappa * breakdown.kl_mass_vt;
}

double decision_mass_z(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                       const ContinuationModel& cont, const ObjectiveSpec& spec) {
    return exact_breakdown(mdp, policy, cont, spec).z_mass;
}

CounterexampleObjectives counterexample_objectives(double p, double gamma, double kappa, double r) {
    if (p <= 0.0 || p >= 1.0)
        throw std::invalid_argument("counterexample_objectives: p must be in (0, 1)");
    const double entropy = -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
    const double denom = 1.0 - gamma * p;
    CounterexampleObjectives out;
    out.j_as = (p * r + kappa * entropy - kappa * std::log(2.0)) / denom;
    out.j_as_naive = (p * r + kappa * entropy) / denom;
    return out;
}

double argmax_scan(const std::function<double(double)>& f, double lo, double hi, int grid_n,
                   int refine_iters) {
    if (!(hi > lo)) throw std::invalid_argument("argmax_scan: need hi > lo");
    if (grid_n < 1) throw std::invalid_argument("argmax_scan: grid_n must be >= 1");

    const double cell = (hi - lo) / grid_n;
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> values(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        const double x = lo + (i + 0.5) * cell;
        values[i] = f(x);
        if (values[i] > best_value) {
            best_value = values[i];
            best = i;
        }
    }
    const double center = lo + (best + 0.5) * cell;
    double a = std::max(lo + 1e-12 * (hi - lo), center - cell);
    double b = std::min(hi - 1e-12 * (hi - lo), center + cell);
    if (f(a) == best_value && f(b) == best_value) return center;  // flat: keep the midpoint

    // golden-section maximization on [a, b]
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < refine_iters; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

namespace {

/// Joint distribution over (state, accumulated cost) advanced H steps;
/// the ordered map keeps summation order deterministic.
using CostDist = std::map<std::pair<int, double>, double>;

bool exact_cost_distribution(const FiniteMdp& mdp, const SoftmaxPolicy& policy, int horizon,
                             CostDist& dist) {
    dist.clear();
    for (int s = 0; s < mdp.n_states; ++s)
        if (mdp.initial_dist[s] > 0.0) dist[{s, 0.0}] = mdp.initial_dist[s];

    for (int t = 0; t < horizon; ++t) {
        CostDist next;
        for (const auto& [key, prob] : dist) {
            const auto [s, acc] = key;
            const auto pi = policy.probs(s);
            for (int a = 0; a < mdp.n_actions; ++a) {
                if (pi[a] == 0.0) continue;
                const double acc2 = acc + mdp.cost_sum(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                    const double p = mdp.p(s, a, s2);
                    if (p == 0.0) continue;
                    next[{s2, acc2}] += prob * pi[a] * p;
                }
            }
            if (next.size() > kExactSupportCap) return false;
        }
        dist.swap(next);
    }
    return true;
}

double mc_survival(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double lambda, int horizon,
                   std::int64_t n_samples, rng::Stream& stream) {
    double total = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        int s = stream.categorical(mdp.initial_dist);
        double acc = 0.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = policy.sample(s, stream);
            acc += mdp.cost_sum(s, a);
            s = step(mdp, s, a, stream).next_state;
        }
        total += std::exp(-lambda * acc);
    }
    return total / static_cast<double>(n_samples);
}

}  // namespace

double survival_statistic(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double lambda, int horizon,
                          SurvivalMode mode, std::int64_t n_samples, rng::Stream& stream) {
    if (lambda < 0.0) throw std::invalid_argument("survival_statistic: lambda must be >= 0");
    if (horizon < 1) throw std::invalid_argument("survival_statistic: horizon must be >= 1");
    if (mode == SurvivalMode::Exact) {
        CostDist dist;
        if (exact_cost_distribution(mdp, policy, horizon, dist)) {
            double total = 0.0;
            for (const auto& [key, prob] : dist) total += prob * std::exp(-lambda * key.second);
            return total;
        }
        std::cerr << "[sdh] warning: accumulated-cost support too large for exact mode; "
                     "falling back to Monte Carlo\n";
    }
    if (n_samples < 1) throw std::invalid_argument("survival_statistic: n_samples must be >= 1");
    return mc_survival(mdp, policy, lambda, horizon, n_samples, stream);
}

double violation_probability_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double threshold,
                                   int horizon) {
    CostDist dist;
    if (!exact_cost_distribution(mdp, policy, horizon, dist))
        throw std::runtime_error("violation_probability_exact: cost support too large");
    double total = 0.0;
    for (const auto& [key, prob] : dist)
        if (key.second >= threshold) total += prob;
    return total;
}

double empirical_violation_frequency(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                                     double threshold, int horizon, std::int64_t n_samples,
                                     rng::Stream& stream) {
    if (n_samples < 1)
        throw std::invalid_argument("empirical_violation_frequency: n_samples must be >= 1");
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        int s = stream.categorical(mdp.initial_dist);
        double acc = 0.0;
        for (int t = 0; t < horizon && acc < threshold; ++t) {
            const int a = policy.sample(s, stream);
            acc += mdp.cost_sum(s, a);
            s = step(mdp, s, a, stream).next_state;
        }
        if (acc >= threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n_samples);
}

ChanceCertificate chance_bound(double s_h, double lambda, double b, int horizon) {
    if (lambda <= 0.0 || b <= 0.0) throw std::invalid_argument("chance_bound: need lambda > 0 and b > 0");
    if (s_h < 0.0 || s_h > 1.0) throw std::invalid_argument("chance_bound: S_H must be in [0, 1]");
    ChanceCertificate cert;
    cert.lambda = lambda;
    cert.threshold_b = b;
    cert.horizon = horizon;
    cert.s_h = s_h;
    cert.bound = (1.0 - s_h) / (1.0 - std::exp(-lambda * b));
    return cert;
}

GateEstimate mc_gate_estimate(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                              const ContinuationModel& cont, int t, Semantics semantics,
                              std::int64_t n_samples, rng::Stream& stream) {
    if (t < 0) throw std::invalid_argument("mc_gate_estimate: t must be >= 0");
    if (n_samples < 1) throw std::invalid_argument("mc_gate_estimate: n_samples must be >= 1");
    const Table alphas = alpha_table(mdp, cont);

    std::int64_t gamma_hits = 0;
    std::int64_t decision_hits = 0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        int s = stream.categorical(mdp.initial_dist);
        bool horizon_alive = true;   // H_t: no D fired before t
        bool surv_before = true;     // prod_{k<t} C_k
        bool surv_through = true;    // prod_{k<=t} C_k
        for (int k = 0; k <= t && horizon_alive; ++k) {
            if (k > 0 && stream.bernoulli(1.0 - mdp.gamma)) {
                horizon_alive = false;
                break;
            }
            const int a = policy.sample(s, stream);
            const bool continue_gate = stream.bernoulli(alphas(s, a));
            if (k < t && !continue_gate) surv_before = false;
            if (!continue_gate) surv_through = false;
            s = step(mdp, s, a, stream).next_state;
        }
        // D_k for k = 0..t-1 gate H_t; the loop above draws one D before each
        // step k >= 1, i.e. exactly D_0..D_{t-1}.
        if (!horizon_alive) continue;
        if (surv_through) ++gamma_hits;
        const bool decision = semantics == Semantics::VT ? true : surv_before;
        if (decision) ++decision_hits;
    }
    GateEstimate out;
    out.gamma_gate = static_cast<double>(gamma_hits) / static_cast<double>(n_samples);
    out.decision_gate = static_cast<double>(decision_hits) / static_cast<double>(n_samples);
    return out;
}

McEstimate mc_elbo_estimate(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                            const ContinuationModel& cont, const ObjectiveSpec& spec,
                            std::int64_t n_samples, rng::Stream& stream) {
    if (n_samples < 1) throw std::invalid_argument("mc_elbo_estimate: n_samples must be >= 1");
    const Table alphas = alpha_table(mdp, cont);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        int s = stream.categorical(mdp.initial_dist);
        bool surv_alive = true;  // prod of C gates so far
        double value = 0.0;
        for (;;) {
            // Under AS nothing further accrues once the survival gate fails.
            if (spec.semantics != Semantics::VT && !surv_alive) break;

            const int a = policy.sample(s, stream);
            const bool decision_exists = spec.semantics == Semantics::VT || surv_alive;
            if (decision_exists && spec.semantics != Semantics::SurvOnly)
                value -= spec.kappa * (policy.log_prob(s, a) + spec.ell_c);

            const bool continue_gate = stream.bernoulli(alphas(s, a));
            surv_alive = surv_alive && continue_gate;
            if (surv_alive) value += mdp.reward(s, a);

            s = step(mdp, s, a, stream).next_state;
            if (stream.bernoulli(1.0 - mdp.gamma)) break;  // geometric horizon stop
        }
        sum += value;
        sum_sq += value * value;
    }
    const double n = static_cast<double>(n_samples);
    McEstimate out;
    out.mean = sum / n;
    const double variance = std::max(sum_sq / n - out.mean * out.mean, 0.0);
    out.std_error = std::sqrt(variance / n);
    return out;
}

}  // namespace sdh::oracle
