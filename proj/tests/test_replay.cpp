#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sdh/replay.hpp"

using namespace sdh;
using namespace sdh::replay;

TEST_CASE("terminal mask") {
    CHECK(terminal_mask(true, false, 0.45) == 0.0);
    CHECK(terminal_mask(false, true, 0.45) == 0.45);
    CHECK(terminal_mask(false, false, 0.3) == 0.3);
    CHECK_THROWS_AS(terminal_mask(true, true, 0.45), std::invalid_argument);
}

TEST_CASE("compress_window hand examples") {
    SUBCASE("zero rewards leave only the bootstrap product") {
        std::vector<WindowStep> window(3);
        window[0] = {0, 0, 0.0, 0.0, 0.5, 1, 0.0};
        window[1] = {1, 0, 0.0, 0.0, 0.8, 2, 0.0};
        window[2] = {2, 0, 0.0, 0.0, 1.0, 3, 0.0};
        const auto rec = compress_window(window, 0.9, false);
        CHECK(rec.r_n == 0.0);
        CHECK(rec.u_boot == doctest::Approx(0.9 * 0.5 * 0.9 * 0.8 * 0.9 * 1.0));
        CHECK(rec.s_boot == 3);
    }
    SUBCASE("n = 1 collapses to alpha r and gamma alpha") {
        std::vector<WindowStep> window(1);
        window[0] = {4, 1, 2.0, 0.3, 0.5, 5, -0.7};
        const auto rec = compress_window(window, 0.9, false);
        CHECK(rec.r_n == doctest::Approx(1.0));
        CHECK(rec.u_boot == doctest::Approx(0.45));
        CHECK(rec.s == 4);
        CHECK(rec.a == 1);
        CHECK(rec.cost == 0.3);
        CHECK(rec.behavior_logp == -0.7);
    }
    SUBCASE("n = 2 hand expansion") {
        std::vector<WindowStep> window(2);
        window[0] = {0, 0, 1.0, 0.0, 0.5, 1, 0.0};
        window[1] = {1, 0, 2.0, 0.0, 1.0, 2, 0.0};
        const auto rec = compress_window(window, 0.9, false);
        CHECK(rec.r_n == doctest::Approx(1.4));
        CHECK(rec.u_boot == doctest::Approx(0.405));
    }
    SUBCASE("empty window is a usage error") {
        CHECK_THROWS_AS(compress_window({}, 0.9, false), std::invalid_argument);
    }
}

TEST_CASE("rolling window emits one record per step once full and flushes on episode end") {
    RollingWindow window(3, 0.9);
    std::vector<NStepRecord> emitted;

    auto push = [&](int t, bool terminal) {
        WindowStep entry{t, 0, 1.0, 0.0, 1.0, t + 1, 0.0};
        for (const auto& rec : window.push(entry, terminal)) emitted.push_back(rec);
    };

    push(0, false);
    push(1, false);
    CHECK(emitted.empty());
    push(2, false);
    CHECK(emitted.size() == 1);  // first full window
    CHECK(emitted[0].s == 0);
    CHECK_FALSE(emitted[0].done);
    push(3, false);
    CHECK(emitted.size() == 2);

    // terminal at t = 4: every remaining span ends at the terminal
    push(4, true);
    CHECK(emitted.size() == 5);
    for (std::size_t i = 2; i < emitted.size(); ++i) CHECK(emitted[i].done);
    CHECK(window.size() == 0);
    CHECK(emitted[2].s == 2);
    CHECK(emitted[3].s == 3);
    CHECK(emitted[4].s == 4);
    CHECK(emitted[4].u_boot == doctest::Approx(0.9));  // single-step span
}

TEST_CASE("buffer sampling is uniform, seeded, and errors when empty") {
    rng::Stream stream(404);
    TransitionBuffer buffer(8);
    CHECK_THROWS_AS(buffer.sample_minibatch(1, stream), std::invalid_argument);

    SUBCASE("capacity-1 buffer always returns its single record") {
        TransitionBuffer tiny(1);
        tiny.push({3, 1, 0.5, 0.0, 4, 0.9, false});
        for (int i = 0; i < 20; ++i) {
            const auto batch = tiny.sample_minibatch(2, stream);
            for (const auto& rec : batch) CHECK(rec.s == 3);
        }
    }
    SUBCASE("fixed seed gives identical batch sequences") {
        TransitionBuffer buf(16);
        for (int i = 0; i < 16; ++i) buf.push({i, 0, 0.0, 0.0, i, 0.9, false});
        rng::Stream a(9), b(9);
        for (int round = 0; round < 5; ++round) {
            const auto batch_a = buf.sample_minibatch(6, a);
            const auto batch_b = buf.sample_minibatch(6, b);
            for (std::size_t i = 0; i < batch_a.size(); ++i) CHECK(batch_a[i].s == batch_b[i].s);
        }
    }
    SUBCASE("index frequencies are uniform within one percent") {
        TransitionBuffer buf(10);
        for (int i = 0; i < 10; ++i) buf.push({i, 0, 0.0, 0.0, i, 0.9, false});
        std::vector<int> counts(10, 0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) ++counts[buf.sample_minibatch(1, stream)[0].s];
        for (int c : counts)
            CHECK(std::abs(c / static_cast<double>(draws) - 0.1) <= 0.01);
    }
}

TEST_CASE("fifo eviction overwrites the oldest record") {
    TransitionBuffer buffer(3);
    for (int i = 0; i < 5; ++i) buffer.push({i, 0, 0.0, 0.0, i, 0.9, false});
    CHECK(buffer.size() == 3);
    // records 0 and 1 evicted; 2, 3, 4 remain
    std::vector<int> seen;
    for (std::size_t i = 0; i < buffer.size(); ++i) seen.push_back(buffer.at(i).s);
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<int>{2, 3, 4});
}

TEST_CASE("buffer dump and restore round-trips") {
    const auto path = std::filesystem::temp_directory_path() / "sdh_buffer_test.json";
    {
        NStepBuffer buffer(4);
        buffer.push({0, 1, 1.4, 0.2, 5, 0.405, false, -0.69});
        buffer.push({1, 0, 0.7, 0.0, 6, 0.81, true, -0.11});
        buffer.dump(path.string());
    }
    auto restored = NStepBuffer::restore(path.string());
    CHECK(restored.size() == 2);
    CHECK(restored.at(0).r_n == 1.4);
    CHECK(restored.at(0).u_boot == 0.405);
    CHECK(restored.at(1).done);
    CHECK(restored.at(1).behavior_logp == -0.11);

    // restored buffers keep evicting in the same order
    restored.push({2, 0, 0.0, 0.0, 7, 0.9, false, 0.0});
    restored.push({3, 0, 0.0, 0.0, 8, 0.9, false, 0.0});
    restored.push({4, 0, 0.0, 0.0, 9, 0.9, false, 0.0});
    CHECK(restored.size() == 4);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(TransitionBuffer::restore(path.string()), std::runtime_error);
}
