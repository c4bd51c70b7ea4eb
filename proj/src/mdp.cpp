#include "sdh/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace sdh {

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace

double FiniteMdp::max_reward() const {
    double top = 0.0;
    for (double r : reward.data()) top = std::max(top, r);
    return top;
}

void FiniteMdp::validate() const {
    require(n_states >= 1 && n_actions >= 1, "mdp: needs at least one state and action");
    require(gamma > 0.0 && gamma < 1.0, "mdp: gamma must be in (0, 1)");
    require(static_cast<int>(transition.size()) == n_states * n_actions * n_states,
            "mdp: transition table has wrong size");
    require(reward.rows() == n_states && reward.cols() == n_actions, "mdp: reward table has wrong shape");
    require(static_cast<int>(initial_dist.size()) == n_states, "mdp: initial_dist has wrong size");
    require(static_cast<int>(terminal.size()) == n_states, "mdp: terminal flags have wrong size");

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double row_sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                const double prob = p(s, a, s2);
                require(prob >= 0.0, "mdp: negative transition probability");
                row_sum += prob;
            }
            require(std::abs(row_sum - 1.0) <= 1e-12, "mdp: transition row does not sum to 1");
            const double r = reward(s, a);
            require(std::isfinite(r) && r >= 0.0, "mdp: rewards must be finite and >= 0");
        }
    }
    for (const auto& channel : costs) {
        require(channel.rows() == n_states && channel.cols() == n_actions,
                "mdp: cost table has wrong shape");
        for (double c : channel.data()) require(std::isfinite(c) && c >= 0.0, "mdp: costs must be >= 0");
    }

    double init_sum = 0.0;
    for (double w : initial_dist) {
        require(w >= 0.0, "mdp: negative initial probability");
        init_sum += w;
    }
    require(std::abs(init_sum - 1.0) <= 1e-12, "mdp: initial_dist does not sum to 1");

    for (int s = 0; s < n_states; ++s) {
        if (!terminal[s]) continue;
        for (int a = 0; a < n_actions; ++a) {
            require(p(s, a, s) == 1.0, "mdp: terminal state must self-loop");
            require(reward(s, a) == 0.0, "mdp: terminal state must have zero reward");
            for (const auto& channel : costs)
                require(channel(s, a) == 0.0, "mdp: terminal state must have zero cost");
        }
    }
}

StepOutcome step(const FiniteMdp& mdp, int s, int a, rng::Stream& stream) {
    require(s >= 0 && s < mdp.n_states, "step: state out of range");
    require(a >= 0 && a < mdp.n_actions, "step: action out of range");
    StepOutcome out;
    out.reward = mdp.reward(s, a);
    out.cost_vec = mdp.cost_vec(s, a);

    const double u = stream.uniform();
    double acc = 0.0;
    int next = mdp.n_states - 1;
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        acc += mdp.p(s, a, s2);
        if (u < acc) {
            next = s2;
            break;
        }
    }
    out.next_state = next;
    out.terminated = mdp.terminal[next] != 0;
    return out;
}

Trajectory sample_trajectory(const FiniteMdp& mdp, const SoftmaxPolicy& policy, int max_steps,
                             const ContinuationModel& cont, rng::Stream& stream) {
    require(max_steps >= 1, "sample_trajectory: max_steps must be >= 1");
    Trajectory traj;
    traj.steps.reserve(max_steps);

    int s = stream.categorical(mdp.initial_dist);
    for (int t = 0; t < max_steps; ++t) {
        const int a = policy.sample(s, stream);
        StepOutcome outcome = step(mdp, s, a, stream);
        TrajectoryStep entry;
        entry.state = s;
        entry.action = a;
        entry.reward = outcome.reward;
        entry.alpha = cont.alpha(outcome.cost_vec);
        entry.cost_vec = std::move(outcome.cost_vec);
        traj.steps.push_back(std::move(entry));
        if (outcome.terminated) {
            traj.terminal = true;
            break;
        }
        s = outcome.next_state;
    }
    return traj;
}

FiniteMdp build_counterexample_mdp(double r, double gamma) {
    require(r > 0.0, "counterexample: r must be > 0");
    require(gamma > 0.0 && gamma < 1.0, "counterexample: gamma must be in (0, 1)");
    FiniteMdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.transition.assign(2, 1.0);  // both actions self-loop
    mdp.reward = Table(1, 2, 0.0);
    mdp.reward(0, kActionContinue) = r;
    Table cost(1, 2, 0.0);
    cost(0, kActionStop) = 1.0;
    mdp.costs = {cost};
    mdp.initial_dist = {1.0};
    mdp.terminal = {0};
    mdp.validate();
    return mdp;
}

FiniteMdp build_hazard_chain(int n, const std::vector<int>& hazard_states, double hazard_cost,
                             double shelter_reward, double goal_reward, double gamma,
                             bool uniform_start) {
    require(n >= 2, "hazard_chain: need at least 2 states");
    for (int h : hazard_states)
        require(h >= 0 && h < n, "hazard_chain: hazard state out of range");

    FiniteMdp mdp;
    mdp.n_states = n;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.transition.assign(static_cast<std::size_t>(n) * 2 * n, 0.0);
    mdp.reward = Table(n, 2, 0.0);
    Table cost(n, 2, 0.0);

    const int goal = n - 1;
    for (int s = 0; s < n; ++s) {
        if (s == goal) {
            mdp.p(s, kActionLeft, s) = 1.0;
            mdp.p(s, kActionRight, s) = 1.0;
            continue;
        }
        mdp.p(s, kActionLeft, std::max(s - 1, 0)) = 1.0;
        mdp.p(s, kActionRight, s + 1) = 1.0;
        if (s + 1 == goal) mdp.reward(s, kActionRight) = goal_reward;
        for (int h : hazard_states) {
            if (s == h) {
                cost(s, kActionLeft) = hazard_cost;
                cost(s, kActionRight) = hazard_cost;
            }
        }
    }
    mdp.reward(0, kActionLeft) = shelter_reward;

    mdp.costs = {cost};
    mdp.initial_dist.assign(n, 0.0);
    if (uniform_start) {
        const double w = 1.0 / (n - 1);
        for (int s = 0; s + 1 < n; ++s) mdp.initial_dist[s] = w;
        double total = 0.0;
        for (double v : mdp.initial_dist) total += v;
        mdp.initial_dist[0] += 1.0 - total;
    } else {
        mdp.initial_dist[0] = 1.0;
    }
    mdp.terminal.assign(n, 0);
    mdp.terminal[goal] = 1;
    mdp.validate();
    return mdp;
}

FiniteMdp build_hazard_gridworld(int width, int height, std::pair<int, int> goal,
                                 const std::vector<std::pair<int, int>>& hazards, double gamma) {
    require(width >= 1 && height >= 1, "gridworld: dimensions must be positive");
    require(width * height >= 2, "gridworld: need at least 2 cells");
    auto cell = [&](int x, int y) { return y * width + x; };
    require(goal.first >= 0 && goal.first < width && goal.second >= 0 && goal.second < height,
            "gridworld: goal out of range");
    for (const auto& hz : hazards)
        require(hz.first >= 0 && hz.first < width && hz.second >= 0 && hz.second < height,
                "gridworld: hazard out of range");

    const int n = width * height;
    const int goal_state = cell(goal.first, goal.second);

    FiniteMdp mdp;
    mdp.n_states = n;
    mdp.n_actions = 4;  // left, right, up, down
    mdp.gamma = gamma;
    mdp.transition.assign(static_cast<std::size_t>(n) * 4 * n, 0.0);
    mdp.reward = Table(n, 4, 0.0);
    Table cost(n, 4, 0.0);

    const int dx[4] = {-1, 1, 0, 0};
    const int dy[4] = {0, 0, -1, 1};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int s = cell(x, y);
            if (s == goal_state) {
                for (int a = 0; a < 4; ++a) mdp.p(s, a, s) = 1.0;
                continue;
            }
            for (int a = 0; a < 4; ++a) {
                const int nx = std::clamp(x + dx[a], 0, width - 1);
                const int ny = std::clamp(y + dy[a], 0, height - 1);
                const int s2 = cell(nx, ny);
                mdp.p(s, a, s2) = 1.0;
                if (s2 == goal_state) mdp.reward(s, a) = 1.0;
            }
            for (const auto& hz : hazards) {
                if (s == cell(hz.first, hz.second))
                    for (int a = 0; a < 4; ++a) cost(s, a) = 1.0;
            }
        }
    }

    mdp.costs = {cost};
    mdp.initial_dist.assign(n, 0.0);
    mdp.initial_dist[0] = 1.0;
    if (goal_state == 0) {
        // goal in the start corner: start from the opposite corner instead
        mdp.initial_dist[0] = 0.0;
        mdp.initial_dist[n - 1] = 1.0;
    }
    mdp.terminal.assign(n, 0);
    mdp.terminal[goal_state] = 1;
    mdp.validate();
    return mdp;
}

std::string mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json doc;
    doc["n_states"] = mdp.n_states;
    doc["n_actions"] = mdp.n_actions;
    doc["gamma"] = mdp.gamma;
    doc["transition"] = mdp.transition;
    doc["reward"] = mdp.reward.data();
    doc["costs"] = nlohmann::json::array();
    for (const auto& channel : mdp.costs) doc["costs"].push_back(channel.data());
    doc["initial_dist"] = mdp.initial_dist;
    doc["terminal"] = mdp.terminal;
    return doc.dump(2);
}

FiniteMdp mdp_from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    FiniteMdp mdp;
    mdp.n_states = doc.at("n_states").get<int>();
    mdp.n_actions = doc.at("n_actions").get<int>();
    mdp.gamma = doc.at("gamma").get<double>();
    mdp.transition = doc.at("transition").get<std::vector<double>>();
    mdp.reward = Table(mdp.n_states, mdp.n_actions);
    mdp.reward.data() = doc.at("reward").get<std::vector<double>>();
    for (const auto& channel : doc.at("costs")) {
        Table cost(mdp.n_states, mdp.n_actions);
        cost.data() = channel.get<std::vector<double>>();
        mdp.costs.push_back(std::move(cost));
    }
    mdp.initial_dist = doc.at("initial_dist").get<std::vector<double>>();
    mdp.terminal = doc.at("terminal").get<std::vector<std::uint8_t>>();
    mdp.validate();
    return mdp;
}

Table alpha_table(const FiniteMdp& mdp, const ContinuationModel& cont) {
    Table alphas(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) alphas(s, a) = cont.alpha(mdp.cost_vec(s, a));
    return alphas;
}

}  // namespace sdh
