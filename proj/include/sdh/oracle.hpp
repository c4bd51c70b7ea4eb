#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sdh/mdp.hpp"
#include "sdh/policy.hpp"
#include "sdh/rng.hpp"

namespace sdh::oracle {

enum class Semantics { AS, VT, SurvOnly };

/// Settings for the exact objective recursions. The prior is uniform with
/// log pi0(a|s) = -ell_c everywhere; horizon and tail_tol control truncation.
struct ObjectiveSpec {
    Semantics semantics = Semantics::AS;
    double kappa = 0.0;
    double ell_c = 0.0;
    int horizon = 2000;
    double tail_tol = 1e-10;
};

struct SurvivalValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// All occupancy-recursion components in one pass: the survival return, the
/// survival-weighted and plain-discount information masses, the decision mass
/// Z(pi), and the survival-weighted entropy mass.
struct ObjectiveBreakdown {
    double j_surv = 0.0;
    double kl_mass_as = 0.0;   // E[sum_t w_t (log pi + ell_c)]
    double kl_mass_vt = 0.0;   // E[sum_t gamma^t (log pi + ell_c)]
    double z_mass = 0.0;       // E[sum_t w_t]
    double entropy_mass = 0.0; // E[sum_t w_t H(pi(.|s_t))]
    double tail_bound = 0.0;
};

ObjectiveBreakdown exact_breakdown(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                                   const ContinuationModel& cont, const ObjectiveSpec& spec);

SurvivalValue j_surv_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                           const ContinuationModel& cont, const ObjectiveSpec& spec);
double j_as_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
                  const ObjectiveSpec& spec);
double j_vt_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, const ContinuationModel& cont,
                  const ObjectiveSpec& spec);
double decision_mass_z(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                       const ContinuationModel& cont, const ObjectiveSpec& spec);

struct CounterexampleObjectives {
    double j_as = 0.0;
    double j_as_naive = 0.0;
};

/// Closed forms for the one-state continue/stop MDP under a normalized
/// uniform two-action prior:
///   J_AS(p)   = (p r + kappa h(p) - kappa log 2) / (1 - gamma p)
///   J_AS-N(p) = (p r + kappa h(p)) / (1 - gamma p)
CounterexampleObjectives counterexample_objectives(double p, double gamma, double kappa, double r);

/// Grid scan over cell midpoints (lowest-index tie-break) followed by
/// golden-section refinement; maximizer accurate to about 1e-4 with defaults.
double argmax_scan(const std::function<double(double)>& f, double lo, double hi, int grid_n = 512,
                   int refine_iters = 60);

enum class SurvivalMode { Exact, MonteCarlo };

/// S_H(lambda) = E[exp(-lambda C_H)] with C_H the cumulative cost over the
/// first H steps. Exact mode tracks the joint distribution of (state,
/// accumulated cost); if that support exceeds a size cap the call falls back
/// to Monte Carlo with a warning.
double survival_statistic(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double lambda, int horizon,
                          SurvivalMode mode, std::int64_t n_samples, rng::Stream& stream);

/// Exact P(C_H >= b) from the same accumulated-cost distribution.
double violation_probability_exact(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double threshold,
                                   int horizon);

double empirical_violation_frequency(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                                     double threshold, int horizon, std::int64_t n_samples,
                                     rng::Stream& stream);

struct ChanceCertificate {
    double lambda = 0.0;
    double threshold_b = 0.0;
    int horizon = 0;
    double s_h = 1.0;
    double bound = 0.0;
};

/// P(C_H >= b) <= (1 - S_H(lambda)) / (1 - exp(-lambda b)).
ChanceCertificate chance_bound(double s_h, double lambda, double b, int horizon);

struct GateEstimate {
    double gamma_gate = 0.0;    // E[Gamma_t]
    double decision_gate = 0.0; // E[A_t] for the chosen semantics
};

/// Samples the continuation gates C_k ~ Bernoulli(alpha_k) and horizon gates
/// D_k ~ Bernoulli(1 - gamma) explicitly along rollouts and averages the
/// indicator products at time t.
GateEstimate mc_gate_estimate(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                              const ContinuationModel& cont, int t, Semantics semantics,
                              std::int64_t n_samples, rng::Stream& stream);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Gate-explicit Monte Carlo estimate of the full objective (gated reward sum
/// minus kappa times the gated log-ratio sum), with a standard-error interval.
McEstimate mc_elbo_estimate(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                            const ContinuationModel& cont, const ObjectiveSpec& spec,
                            std::int64_t n_samples, rng::Stream& stream);

}  // namespace sdh::oracle
