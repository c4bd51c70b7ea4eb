#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdh/continuation.hpp"
#include "sdh/policy.hpp"
#include "sdh/rng.hpp"
#include "sdh/table.hpp"

namespace sdh {

/// Finite tabular MDP with nonnegative rewards, any number of nonnegative
/// cost channels, and terminal states that self-loop with zero reward and
/// zero cost (so infinite-horizon sums are well defined without special
/// casing). All invariants are checked by validate() at construction.
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // row-major [s][a][s']
    Table reward;                    // r[s][a] >= 0
    std::vector<Table> costs;        // c_i[s][a] >= 0, one table per channel
    std::vector<double> initial_dist;
    std::vector<std::uint8_t> terminal;
    double gamma = 0.9;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }

    int n_channels() const { return static_cast<int>(costs.size()); }

    std::vector<double> cost_vec(int s, int a) const {
        std::vector<double> out(costs.size());
        for (std::size_t i = 0; i < costs.size(); ++i) out[i] = costs[i](s, a);
        return out;
    }

    double cost_sum(int s, int a) const {
        double total = 0.0;
        for (const auto& channel : costs) total += channel(s, a);
        return total;
    }

    double max_reward() const;

    /// Throws std::invalid_argument if any structural invariant is violated.
    void validate() const;
};

struct StepOutcome {
    int next_state = 0;
    double reward = 0.0;
    std::vector<double> cost_vec;
    bool terminated = false;
    bool truncated = false;
};

struct TrajectoryStep {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    std::vector<double> cost_vec;
    double alpha = 1.0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    bool terminal = false;
    int length() const { return static_cast<int>(steps.size()); }
};

/// One environment transition. Usage errors (out-of-range indices) throw.
StepOutcome step(const FiniteMdp& mdp, int s, int a, rng::Stream& stream);

/// Roll out `policy` for at most max_steps, recording alpha per step through
/// the continuation model. Violations never reset the environment; the
/// rollout ends on a true terminal or at max_steps (truncation).
Trajectory sample_trajectory(const FiniteMdp& mdp, const SoftmaxPolicy& policy, int max_steps,
                             const ContinuationModel& cont, rng::Stream& stream);

/// One-state MDP with actions {continue, stop}: continuing pays `r` and keeps
/// the process alive, stopping pays nothing and emits a unit cost on the
/// single cost channel (pair with a HardIndicator continuation so that
/// alpha(continue) = 1 and alpha(stop) = 0).
FiniteMdp build_counterexample_mdp(double r, double gamma);

inline constexpr int kActionContinue = 0;
inline constexpr int kActionStop = 1;

/// Line MDP with actions {left, right}; the goal state n-1 is terminal and
/// pays goal_reward on arrival, hazard states emit hazard_cost on every
/// action taken there. An optional shelter_reward is paid for holding still
/// at state 0, which gives the constrained problem a genuine reward/cost
/// trade-off; the default of 0 keeps the chain equivalent to a 1 x n grid.
/// uniform_start spreads the initial distribution over non-terminal states.
FiniteMdp build_hazard_chain(int n, const std::vector<int>& hazard_states, double hazard_cost,
                             double shelter_reward = 0.0, double goal_reward = 1.0,
                             double gamma = 0.9, bool uniform_start = false);

inline constexpr int kActionLeft = 0;
inline constexpr int kActionRight = 1;

/// Gridworld with 4 move actions, step reward 0, terminal goal cell paying 1
/// on arrival, and hazard cells emitting cost 1.
FiniteMdp build_hazard_gridworld(int width, int height, std::pair<int, int> goal,
                                 const std::vector<std::pair<int, int>>& hazards,
                                 double gamma = 0.9);

/// Dense JSON document (states, actions, probability/reward/cost arrays).
std::string mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const std::string& text);

/// alpha(s, a) evaluated on every state-action pair's cost vector.
Table alpha_table(const FiniteMdp& mdp, const ContinuationModel& cont);

}  // namespace sdh
