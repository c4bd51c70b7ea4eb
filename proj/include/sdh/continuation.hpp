#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdh {

/// -log(alpha); alpha == 0 is reported through the `infinite` flag instead of
/// erroring, since downstream products handle zero continuation cleanly.
struct HazardValue {
    double value = 0.0;
    bool infinite = false;
};

/// alpha_exp(c) = exp(-lambda * sum_i c_i); equals 1 for zero cost or lambda == 0.
double alpha_exponential(const std::vector<double>& cost_vec, double lambda);

/// alpha_cat(v) = 1 - p_max * clip(v / max(c_max, eps), 0, 1); lives in [1 - p_max, 1].
double alpha_cat(double violation, double p_max, double c_max, double eps);

/// Elementwise minimum over per-constraint continuation values.
double aggregate_min(const std::vector<double>& alphas);

/// Batch-maximum EMA of the violation scale:
///   c_max <- rho * c_max + (1 - rho) * max_{c in batch} [c - limit_b]_+
/// An empty batch leaves c_max unchanged (with a logged warning).
double ema_update(double c_max, const std::vector<double>& batch_costs, double limit_b, double rho);

/// Per-sample hinge form of the EMA, applying the recursion once per cost in order.
double ema_update_per_sample(double c_max, const std::vector<double>& batch_costs, double limit_b,
                             double rho);

HazardValue hazard(double alpha);

enum class ScheduleKind { Constant, Linear };
enum class ScheduleTarget { Lambda, PMax };

/// Piecewise-affine parameter schedule: start_value before start_step,
/// end_value after end_step, affine in between.
struct Schedule {
    ScheduleKind kind = ScheduleKind::Constant;
    ScheduleTarget target = ScheduleTarget::Lambda;
    double start_value = 0.0;
    double end_value = 0.0;
    std::int64_t start_step = 0;
    std::int64_t end_step = 0;
};

double schedule_value(const Schedule& schedule, std::int64_t t);

enum class ContinuationVariant { Exponential, CatNormalized, HardIndicator, Constant };

/// How multi-channel costs are combined into a single continuation value.
enum class ChannelAggregate { SumCosts, MinAlpha };

enum class EmaMode { BatchMax, PerSample };

/// Maps per-step cost signals to a continuation probability alpha(s, a) in [0, 1].
///
/// Exponential, HardIndicator and Constant are stateless; CatNormalized carries
/// the mutable EMA scale c_max (single writer: the training loop).
class ContinuationModel {
  public:
    static ContinuationModel exponential(double lambda,
                                         ChannelAggregate aggregate = ChannelAggregate::SumCosts);
    static ContinuationModel cat_normalized(double p_max, double c_max_init, double eps,
                                            double limit_b, double rho,
                                            EmaMode ema_mode = EmaMode::BatchMax,
                                            ChannelAggregate aggregate = ChannelAggregate::MinAlpha);
    static ContinuationModel hard_indicator();
    static ContinuationModel constant(double alpha);

    double alpha(const std::vector<double>& cost_vec) const;

    /// Feed a batch of (scalar) replay costs into the EMA scale. No-op for
    /// stateless variants.
    void update_scale(const std::vector<double>& batch_costs);

    ContinuationVariant variant() const { return variant_; }
    double lambda() const { return lambda_; }
    void set_lambda(double lambda);
    double p_max() const { return p_max_; }
    void set_p_max(double p_max);
    double c_max() const { return c_max_; }
    double eps() const { return eps_; }
    double limit_b() const { return limit_b_; }
    double rho() const { return rho_; }
    double constant_alpha() const { return constant_alpha_; }
    EmaMode ema_mode() const { return ema_mode_; }
    ChannelAggregate aggregate() const { return aggregate_; }

  private:
    ContinuationModel() = default;

    ContinuationVariant variant_ = ContinuationVariant::Constant;
    ChannelAggregate aggregate_ = ChannelAggregate::SumCosts;
    EmaMode ema_mode_ = EmaMode::BatchMax;
    double lambda_ = 0.0;
    double p_max_ = 1.0;
    double c_max_ = 1.0;
    double eps_ = 1e-3;
    double limit_b_ = 0.0;
    double rho_ = 0.9;
    double constant_alpha_ = 1.0;
};

}  // namespace sdh
