#include "sdh/replay.hpp"

#include <fstream>

#include "nlohmann/json.hpp"

namespace sdh::replay {

namespace {
constexpr int kBufferFormatVersion = 1;
}

double terminal_mask(bool done, bool truncated, double gamma_tilde) {
    if (done && truncated)
        throw std::invalid_argument("terminal_mask: done and truncated cannot both be set");
    return done ? 0.0 : gamma_tilde;
}

NStepRecord compress_window(const std::vector<WindowStep>& window, double gamma, bool done) {
    if (window.empty()) throw std::invalid_argument("compress_window: empty window");
    NStepRecord record;
    record.s = window.front().s;
    record.a = window.front().a;
    record.cost = window.front().cost;
    record.behavior_logp = window.front().behavior_logp;
    record.done = done;
    record.s_boot = window.back().s_next;

    double running = 1.0;  // prod_{j<k} gamma alpha_{t+j}
    double r_n = 0.0;
    for (const auto& entry : window) {
        r_n += running * (entry.alpha * entry.reward);
        running *= gamma * entry.alpha;
    }
    record.r_n = r_n;
    record.u_boot = running;
    return record;
}

RollingWindow::RollingWindow(int n, double gamma) : n_(n), gamma_(gamma) {
    if (n < 1) throw std::invalid_argument("rolling window: n must be >= 1");
}

std::vector<NStepRecord> RollingWindow::push(const WindowStep& step, bool terminated) {
    window_.push_back(step);
    std::vector<NStepRecord> out;
    if (terminated) {
        auto flushed = flush();
        out.insert(out.end(), flushed.begin(), flushed.end());
        return out;
    }
    if (static_cast<int>(window_.size()) == n_) {
        out.push_back(compress_window({window_.begin(), window_.end()}, gamma_, false));
        window_.pop_front();
    }
    return out;
}

std::vector<NStepRecord> RollingWindow::flush() {
    std::vector<NStepRecord> out;
    while (!window_.empty()) {
        out.push_back(compress_window({window_.begin(), window_.end()}, gamma_, true));
        window_.pop_front();
    }
    return out;
}

namespace {

nlohmann::json to_json(const TransitionRecord& r) {
    return {{"s", r.s},         {"a", r.a},
            {"r_tilde", r.r_tilde}, {"cost", r.cost},
            {"s_next", r.s_next},   {"gamma_tilde", r.gamma_tilde},
            {"done", r.done}};
}

TransitionRecord transition_from_json(const nlohmann::json& j) {
    TransitionRecord r;
    r.s = j.at("s").get<int>();
    r.a = j.at("a").get<int>();
    r.r_tilde = j.at("r_tilde").get<double>();
    r.cost = j.at("cost").get<double>();
    r.s_next = j.at("s_next").get<int>();
    r.gamma_tilde = j.at("gamma_tilde").get<double>();
    r.done = j.at("done").get<bool>();
    return r;
}

nlohmann::json to_json(const NStepRecord& r) {
    return {{"s", r.s},           {"a", r.a},     {"r_n", r.r_n},
            {"cost", r.cost},     {"s_boot", r.s_boot}, {"u_boot", r.u_boot},
            {"done", r.done},     {"behavior_logp", r.behavior_logp}};
}

NStepRecord nstep_from_json(const nlohmann::json& j) {
    NStepRecord r;
    r.s = j.at("s").get<int>();
    r.a = j.at("a").get<int>();
    r.r_n = j.at("r_n").get<double>();
    r.cost = j.at("cost").get<double>();
    r.s_boot = j.at("s_boot").get<int>();
    r.u_boot = j.at("u_boot").get<double>();
    r.done = j.at("done").get<bool>();
    r.behavior_logp = j.at("behavior_logp").get<double>();
    return r;
}

template <typename Record>
const char* record_kind();
template <>
const char* record_kind<TransitionRecord>() {
    return "transition";
}
template <>
const char* record_kind<NStepRecord>() {
    return "nstep";
}

template <typename Record>
Record record_from_json(const nlohmann::json& j);
template <>
TransitionRecord record_from_json<TransitionRecord>(const nlohmann::json& j) {
    return transition_from_json(j);
}
template <>
NStepRecord record_from_json<NStepRecord>(const nlohmann::json& j) {
    return nstep_from_json(j);
}

}  // namespace

template <typename Record>
void Buffer<Record>::dump(const std::string& path) const {
    nlohmann::json doc;
    doc["version"] = kBufferFormatVersion;
    doc["kind"] = record_kind<Record>();
    doc["capacity"] = capacity_;
    doc["write_pos"] = write_pos_;
    doc["records"] = nlohmann::json::array();
    for (const auto& record : records_) doc["records"].push_back(to_json(record));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("buffer dump: cannot open " + path);
    out << doc.dump();
}

template <typename Record>
Buffer<Record> Buffer<Record>::restore(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("buffer restore: cannot open " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.at("version").get<int>() != kBufferFormatVersion)
        throw std::runtime_error("buffer restore: unsupported format version");
    if (doc.at("kind").get<std::string>() != record_kind<Record>())
        throw std::runtime_error("buffer restore: record kind mismatch");
    Buffer<Record> buffer(doc.at("capacity").get<std::size_t>());
    for (const auto& item : doc.at("records")) buffer.push(record_from_json<Record>(item));
    buffer.write_pos_ = doc.at("write_pos").get<std::size_t>();
    return buffer;
}

template class Buffer<TransitionRecord>;
template class Buffer<NStepRecord>;

}  // namespace sdh::replay
