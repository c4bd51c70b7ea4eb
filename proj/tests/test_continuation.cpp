#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdh/continuation.hpp"
#include "sdh/rng.hpp"

using namespace sdh;

TEST_CASE("exponential continuation") {
    CHECK(alpha_exponential({0.0, 0.0}, 3.0) == 1.0);
    CHECK(alpha_exponential({0.5, 0.5}, 0.0) == 1.0);
    CHECK(alpha_exponential({0.6931}, 1.0) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK_THROWS_AS(alpha_exponential({-0.1}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(alpha_exponential({0.1}, -1.0), std::invalid_argument);
}

TEST_CASE("exponent additivity: alpha(c, l1 + l2) = alpha(c, l1) alpha(c, l2)") {
    rng::Stream stream(21);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> costs = {stream.uniform(), stream.uniform(), stream.uniform()};
        const double l1 = stream.uniform(0.0, 2.0);
        const double l2 = stream.uniform(0.0, 2.0);
        const double combined = alpha_exponential(costs, l1 + l2);
        const double split = alpha_exponential(costs, l1) * alpha_exponential(costs, l2);
        CHECK(combined == doctest::Approx(split).epsilon(1e-12));
    }
}

TEST_CASE("cat-normalized continuation") {
    CHECK(alpha_cat(0.0, 0.75, 2.0, 1e-3) == 1.0);
    CHECK(alpha_cat(4.0, 0.75, 2.0, 1e-3) == 0.25);
    CHECK(alpha_cat(1.0, 0.75, 2.0, 1e-3) == doctest::Approx(0.625));
    // always at least 1 - p_max
    rng::Stream stream(4);
    for (int i = 0; i < 200; ++i) {
        const double v = stream.uniform(0.0, 10.0);
        const double p_max = stream.uniform(0.1, 1.0);
        const double c_max = stream.uniform(0.0, 3.0);
        const double alpha = alpha_cat(v, p_max, c_max, 1e-3);
        CHECK(alpha >= 1.0 - p_max - 1e-15);
        CHECK(alpha <= 1.0);
    }
}

TEST_CASE("min aggregation") {
    CHECK(aggregate_min({1.0, 1.0, 1.0}) == 1.0);
    CHECK(aggregate_min({0.3}) == 0.3);
    CHECK(aggregate_min({0.9, 0.4, 0.7}) == 0.4);
    CHECK_THROWS_AS(aggregate_min({}), std::invalid_argument);
}

TEST_CASE("ema scale updates") {
    CHECK(ema_update(1.3, {5.0, 2.0}, 0.0, 1.0) == 1.3);
    CHECK(ema_update(1.0, {0.2, 0.1}, 0.5, 0.9) == doctest::Approx(0.9));
    CHECK(ema_update(1.0, {0.5, 3.0}, 0.0, 0.9) == doctest::Approx(1.2));
    // empty batch leaves the scale unchanged
    CHECK(ema_update(0.7, {}, 0.0, 0.9) == 0.7);
    // per-sample hinge variant applies the recursion element by element
    const double per_sample = ema_update_per_sample(1.0, {0.5, 3.0}, 0.0, 0.9);
    CHECK(per_sample == doctest::Approx(0.9 * (0.9 * 1.0 + 0.1 * 0.5) + 0.1 * 3.0));
}

TEST_CASE("hazard is the negative log of continuation") {
    CHECK(hazard(1.0).value == 0.0);
    CHECK_FALSE(hazard(1.0).infinite);
    CHECK(hazard(std::exp(-1.0)).value == doctest::Approx(1.0));
    CHECK(hazard(0.5).value == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(hazard(0.0).infinite);
    CHECK_THROWS_AS(hazard(1.5), std::invalid_argument);
}

TEST_CASE("hazard of the exponential model is lambda times the cost sum") {
    rng::Stream stream(17);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> costs = {stream.uniform(), stream.uniform()};
        const double lambda = stream.uniform(0.0, 3.0);
        const auto h = hazard(alpha_exponential(costs, lambda));
        CHECK(h.value == doctest::Approx(lambda * (costs[0] + costs[1])).epsilon(1e-12));
    }
}

TEST_CASE("linear schedule endpoints and midpoint") {
    Schedule schedule;
    schedule.kind = ScheduleKind::Linear;
    schedule.target = ScheduleTarget::Lambda;
    schedule.start_value = 0.0;
    schedule.end_value = 0.9;
    schedule.start_step = 50000;
    schedule.end_step = 500000;

    CHECK(schedule_value(schedule, 0) == 0.0);
    CHECK(schedule_value(schedule, 500000) == 0.9);
    CHECK(schedule_value(schedule, 800000) == 0.9);
    CHECK(schedule_value(schedule, 275000) == doctest::Approx(0.45));

    Schedule constant;
    constant.kind = ScheduleKind::Constant;
    constant.start_value = 0.3;
    CHECK(schedule_value(constant, 12345) == 0.3);
}

TEST_CASE("hard indicator is binary and 1 iff all channels are nonpositive") {
    const auto cont = ContinuationModel::hard_indicator();
    CHECK(cont.alpha({0.0, 0.0}) == 1.0);
    CHECK(cont.alpha({0.0, 0.1}) == 0.0);
    CHECK(cont.alpha({2.0}) == 0.0);
    CHECK(cont.alpha({}) == 1.0);
}

TEST_CASE("every model is nonincreasing in each cost coordinate") {
    rng::Stream stream(31);
    std::vector<ContinuationModel> models = {
        ContinuationModel::exponential(1.3),
        ContinuationModel::cat_normalized(0.8, 1.5, 1e-3, 0.2, 0.9),
        ContinuationModel::hard_indicator(),
        ContinuationModel::constant(0.6),
    };
    for (auto& model : models) {
        for (int i = 0; i < 300; ++i) {
            std::vector<double> costs = {stream.uniform(0.0, 2.0), stream.uniform(0.0, 2.0)};
            const double before = model.alpha(costs);
            const int coordinate = static_cast<int>(stream.uniform_int(costs.size()));
            costs[coordinate] += stream.uniform(0.0, 1.0);
            const double after = model.alpha(costs);
            CHECK(after <= before + 1e-15);
            CHECK(before >= 0.0);
            CHECK(before <= 1.0);
        }
    }
}

TEST_CASE("cat model scale update feeds back into alpha") {
    auto cont = ContinuationModel::cat_normalized(0.75, 1.0, 1e-3, 0.0, 0.5);
    const double before = cont.alpha({0.5});
    cont.update_scale({4.0});  // scale jumps to 0.5 * 1.0 + 0.5 * 4.0 = 2.5
    CHECK(cont.c_max() == doctest::Approx(2.5));
    const double after = cont.alpha({0.5});
    CHECK(after > before);  // larger scale means milder normalized violation
}
