#pragma once

#include <string>
#include <vector>

#include "sdh/mdp.hpp"
#include "sdh/policy.hpp"
#include "sdh/rng.hpp"

namespace sdh::verify {

struct Check {
    std::string name;
    bool passed = false;
    std::string details;
};

struct SuiteReport {
    std::string suite;
    bool passed = false;
    double seconds = 0.0;
    std::vector<Check> checks;
};

/// Property-suite names accepted by run_suite (plus "all").
std::vector<std::string> suite_names();

SuiteReport run_suite(const std::string& name);

/// Random small MDP without terminal states; rows normalized exactly.
FiniteMdp random_mdp(rng::Stream& stream, int min_states, int max_states, int min_actions,
                     int max_actions, double gamma_lo, double gamma_hi, double cost_scale = 1.0);

SoftmaxPolicy random_policy(rng::Stream& stream, int n_states, int n_actions, double logit_range);

}  // namespace sdh::verify
