#include "sdh/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace sdh {

double alpha_exponential(const std::vector<double>& cost_vec, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("alpha_exponential: lambda must be >= 0");
    double total = 0.0;
    for (double c : cost_vec) {
        if (c < 0.0) throw std::invalid_argument("alpha_exponential: costs must be >= 0");
        total += c;
    }
    return std::exp(-lambda * total);
}

double alpha_cat(double violation, double p_max, double c_max, double eps) {
    if (p_max <= 0.0 || p_max > 1.0) throw std::invalid_argument("alpha_cat: p_max must be in (0, 1]");
    if (eps <= 0.0) throw std::invalid_argument("alpha_cat: eps must be > 0");
    const double v = std::max(violation, 0.0);
    const double scaled = std::clamp(v / std::max(c_max, eps), 0.0, 1.0);
    return 1.0 - p_max * scaled;
}

double aggregate_min(const std::vector<double>& alphas) {
    if (alphas.empty()) throw std::invalid_argument("aggregate_min: empty input");
    double lowest = alphas.front();
    for (double a : alphas) {
        if (a < 0.0 || a > 1.0) throw std::invalid_argument("aggregate_min: values must be in [0, 1]");
        lowest = std::min(lowest, a);
    }
    return lowest;
}

double ema_update(double c_max, const std::vector<double>& batch_costs, double limit_b, double rho) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("ema_update: rho must be in [0, 1]");
    if (batch_costs.empty()) {
        std::cerr << "[sdh] warning: ema_update called with empty batch; scale unchanged\n";
        return c_max;
    }
    double batch_max = 0.0;
    for (double c : batch_costs) batch_max = std::max(batch_max, c - limit_b);
    return std::max(rho * c_max + (1.0 - rho) * batch_max, 0.0);
}

double ema_update_per_sample(double c_max, const std::vector<double>& batch_costs, double limit_b,
                             double rho) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("ema_update: rho must be in [0, 1]");
    if (batch_costs.empty()) {
        std::cerr << "[sdh] warning: ema_update called with empty batch; scale unchanged\n";
        return c_max;
    }
    double scale = c_max;
    for (double c : batch_costs) scale = std::max(rho * scale + (1.0 - rho) * std::max(c - limit_b, 0.0), 0.0);
    return scale;
}

HazardValue hazard(double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("hazard: alpha must be in [0, 1]");
    if (alpha == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {-std::log(alpha), false};
}

double schedule_value(const Schedule& schedule, std::int64_t t) {
    if (t < 0) throw std::invalid_argument("schedule_value: t must be >= 0");
    if (schedule.kind == ScheduleKind::Constant) return schedule.start_value;
    if (t <= schedule.start_step) return schedule.start_value;
    if (t >= schedule.end_step) return schedule.end_value;
    const double frac = static_cast<double>(t - schedule.start_step) /
                        static_cast<double>(schedule.end_step - schedule.start_step);
    return schedule.start_value + frac * (schedule.end_value - schedule.start_value);
}

ContinuationModel ContinuationModel::exponential(double lambda, ChannelAggregate aggregate) {
    if (lambda < 0.0) throw std::invalid_argument("exponential continuation: lambda must be >= 0");
    ContinuationModel model;
    model.variant_ = ContinuationVariant::Exponential;
    model.lambda_ = lambda;
    model.aggregate_ = aggregate;
    return model;
}

ContinuationModel ContinuationModel::cat_normalized(double p_max, double c_max_init, double eps,
                                                    double limit_b, double rho, EmaMode ema_mode,
                                                    ChannelAggregate aggregate) {
    if (p_max <= 0.0 || p_max > 1.0)
        throw std::invalid_argument("cat continuation: p_max must be in (0, 1]");
    if (eps <= 0.0) throw std::invalid_argument("cat continuation: eps must be > 0");
    if (limit_b < 0.0) throw std::invalid_argument("cat continuation: limit_b must be >= 0");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("cat continuation: rho must be in [0, 1]");
    ContinuationModel model;
    model.variant_ = ContinuationVariant::CatNormalized;
    model.p_max_ = p_max;
    model.c_max_ = c_max_init;
    model.eps_ = eps;
    model.limit_b_ = limit_b;
    model.rho_ = rho;
    model.ema_mode_ = ema_mode;
    model.aggregate_ = aggregate;
    return model;
}

ContinuationModel ContinuationModel::hard_indicator() {
    ContinuationModel model;
    model.variant_ = ContinuationVariant::HardIndicator;
    return model;
}

ContinuationModel ContinuationModel::constant(double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("constant continuation: alpha must be in [0, 1]");
    ContinuationModel model;
    model.variant_ = ContinuationVariant::Constant;
    model.constant_alpha_ = alpha;
    return model;
}

double ContinuationModel::alpha(const std::vector<double>& cost_vec) const {
    switch (variant_) {
        case ContinuationVariant::Exponential: {
            if (aggregate_ == ChannelAggregate::SumCosts) return alpha_exponential(cost_vec, lambda_);
            std::vector<double> alphas;
            alphas.reserve(cost_vec.size());
            for (double c : cost_vec) alphas.push_back(alpha_exponential({c}, lambda_));
            return aggregate_min(alphas);
        }
        case ContinuationVariant::CatNormalized: {
            if (aggregate_ == ChannelAggregate::SumCosts) {
                double total = 0.0;
                for (double c : cost_vec) total += std::max(c - limit_b_, 0.0);
                return alpha_cat(total, p_max_, c_max_, eps_);
            }
            std::vector<double> alphas;
            alphas.reserve(cost_vec.size());
            for (double c : cost_vec)
                alphas.push_back(alpha_cat(std::max(c - limit_b_, 0.0), p_max_, c_max_, eps_));
            return aggregate_min(alphas);
        }
        case ContinuationVariant::HardIndicator: {
            for (double c : cost_vec)
                if (c > 0.0) return 0.0;
            return 1.0;
        }
        case ContinuationVariant::Constant:
            return constant_alpha_;
    }
    return 1.0;
}

void ContinuationModel::update_scale(const std::vector<double>& batch_costs) {
    if (variant_ != ContinuationVariant::CatNormalized) return;
    c_max_ = ema_mode_ == EmaMode::BatchMax
                 ? ema_update(c_max_, batch_costs, limit_b_, rho_)
                 : ema_update_per_sample(c_max_, batch_costs, limit_b_, rho_);
}

void ContinuationModel::set_lambda(double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("set_lambda: lambda must be >= 0");
    lambda_ = lambda;
}

void ContinuationModel::set_p_max(double p_max) {
    if (p_max <= 0.0 || p_max > 1.0) throw std::invalid_argument("set_p_max: p_max must be in (0, 1]");
    p_max_ = p_max;
}

}  // namespace sdh
