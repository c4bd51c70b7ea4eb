#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdh/rng.hpp"
#include "sdh/table.hpp"

namespace sdh {

/// Tabular softmax policy over discrete actions; the logits are the parameters.
class SoftmaxPolicy {
  public:
    SoftmaxPolicy() = default;
    SoftmaxPolicy(int n_states, int n_actions) : logits_(n_states, n_actions, 0.0) {}
    explicit SoftmaxPolicy(Table logits) : logits_(std::move(logits)) {}

    static SoftmaxPolicy uniform(int n_states, int n_actions) {
        return SoftmaxPolicy(n_states, n_actions);
    }

    int n_states() const { return logits_.rows(); }
    int n_actions() const { return logits_.cols(); }

    Table& logits() { return logits_; }
    const Table& logits() const { return logits_; }

    std::vector<double> probs(int s) const {
        const int a_count = n_actions();
        std::vector<double> p(a_count);
        double max_logit = logits_(s, 0);
        for (int a = 1; a < a_count; ++a) max_logit = std::max(max_logit, logits_(s, a));
        double z = 0.0;
        for (int a = 0; a < a_count; ++a) {
            p[a] = std::exp(logits_(s, a) - max_logit);
            z += p[a];
        }
        for (int a = 0; a < a_count; ++a) p[a] /= z;
        return p;
    }

    std::vector<double> log_probs(int s) const {
        const int a_count = n_actions();
        std::vector<double> lp(a_count);
        double max_logit = logits_(s, 0);
        for (int a = 1; a < a_count; ++a) max_logit = std::max(max_logit, logits_(s, a));
        double z = 0.0;
        for (int a = 0; a < a_count; ++a) z += std::exp(logits_(s, a) - max_logit);
        const double log_z = std::log(z) + max_logit;
        for (int a = 0; a < a_count; ++a) lp[a] = logits_(s, a) - log_z;
        return lp;
    }

    double log_prob(int s, int a) const { return log_probs(s)[a]; }

    /// Shannon entropy of the action distribution at state s (0 log 0 := 0).
    double entropy(int s) const {
        const auto p = probs(s);
        const auto lp = log_probs(s);
        double h = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a)
            if (p[a] > 0.0) h -= p[a] * lp[a];
        return h;
    }

    double mean_entropy() const {
        double h = 0.0;
        for (int s = 0; s < n_states(); ++s) h += entropy(s);
        return h / n_states();
    }

    int sample(int s, rng::Stream& stream) const { return stream.categorical(probs(s)); }

    /// Set the action distribution at state s to the given probabilities
    /// (clamping logits so log-probabilities stay finite).
    void set_probs(int s, const std::vector<double>& p, double logit_clamp = 30.0) {
        if (static_cast<int>(p.size()) != n_actions())
            throw std::invalid_argument("set_probs: size mismatch");
        for (int a = 0; a < n_actions(); ++a) {
            const double logit = p[a] > 0.0 ? std::log(p[a]) : -logit_clamp;
            logits_(s, a) = std::clamp(logit, -logit_clamp, logit_clamp);
        }
    }

    void clamp_logits(double max_abs) {
        for (auto& value : logits_.data()) value = std::clamp(value, -max_abs, max_abs);
    }

  private:
    Table logits_;
};

}  // namespace sdh
