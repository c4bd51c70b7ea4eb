#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdh/rng.hpp"

namespace sdh::replay {

/// Single-step record for the absorbing-state learner: (s, a, r~, c, s', gamma~, done).
struct TransitionRecord {
    int s = 0;
    int a = 0;
    double r_tilde = 0.0;
    double cost = 0.0;
    int s_next = 0;
    double gamma_tilde = 0.0;
    bool done = false;
};

/// Compressed survival-shaped TD(n) record: the precomputed n-step return
/// R_n, the bootstrap state, and the single bootstrap continuation factor
/// u_boot = prod_{j<n} gamma~_{t+j}.
struct NStepRecord {
    int s = 0;
    int a = 0;
    double r_n = 0.0;
    double cost = 0.0;
    int s_boot = 0;
    double u_boot = 1.0;
    bool done = false;
    double behavior_logp = 0.0;  // stored for diagnostics, unused by learning
};

/// One raw step held by the rolling window.
struct WindowStep {
    int s = 0;
    int a = 0;
    double reward = 0.0;
    double cost = 0.0;
    double alpha = 1.0;
    int s_next = 0;
    double behavior_logp = 0.0;
};

/// done -> bootstrap disabled (0); time-limit truncation still bootstraps.
double terminal_mask(bool done, bool truncated, double gamma_tilde);

/// R_n = sum_{k<n} (prod_{j<k} gamma alpha_{t+j}) alpha_{t+k} r_{t+k},
/// u_boot = prod_{j<n} gamma alpha_{t+j}; n is the window length.
NStepRecord compress_window(const std::vector<WindowStep>& window, double gamma, bool done);

/// Rolling window of the last n steps; emits one compressed record per step
/// once full and flushes shortened records (done = true) at episode end.
class RollingWindow {
  public:
    RollingWindow(int n, double gamma);

    /// Append a step; returns an emitted record when the window is full.
    /// `terminated` marks a true environment terminal at this step.
    std::vector<NStepRecord> push(const WindowStep& step, bool terminated);

    /// Flush remaining (shortened) records at an episode boundary.
    std::vector<NStepRecord> flush();

    int size() const { return static_cast<int>(window_.size()); }

  private:
    int n_ = 1;
    double gamma_ = 0.9;
    std::deque<WindowStep> window_;
};

/// FIFO ring buffer with uniform with-replacement sampling and JSON
/// dump/restore for reproducible resume.
template <typename Record>
class Buffer {
  public:
    explicit Buffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("buffer: capacity must be positive");
    }

    void push(const Record& record) {
        if (records_.size() < capacity_) {
            records_.push_back(record);
        } else {
            records_[write_pos_] = record;
        }
        write_pos_ = (write_pos_ + 1) % capacity_;
    }

    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Record& at(std::size_t i) const { return records_[i]; }

    std::vector<Record> sample_minibatch(std::size_t batch_size, rng::Stream& stream) const {
        if (records_.empty()) throw std::invalid_argument("buffer: cannot sample from empty buffer");
        std::vector<Record> batch;
        batch.reserve(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i)
            batch.push_back(records_[stream.uniform_int(records_.size())]);
        return batch;
    }

    void dump(const std::string& path) const;
    static Buffer restore(const std::string& path);

  private:
    std::size_t capacity_ = 0;
    std::size_t write_pos_ = 0;
    std::vector<Record> records_;
};

using TransitionBuffer = Buffer<TransitionRecord>;
using NStepBuffer = Buffer<NStepRecord>;

}  // namespace sdh::replay
