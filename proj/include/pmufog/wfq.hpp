#pragma once

// Self-clocked weighted fair queuing over three DiffServ classes.
//
// Each arriving packet gets a finish tag F = max(V, F_last[class]) + bits / weight[class],
// where V is the tag of the packet most recently taken into service. The head
// packet with the smallest tag is served next. Packets never reorder within a class.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>

#include "pmufog/errors.hpp"

namespace pmufog::wfq {

enum class TrafficClass : std::uint8_t { EF = 0, AF23 = 1, Background = 2 };

inline constexpr std::size_t kClassCount = 3;
inline constexpr std::uint8_t kDscpEF = 46;
inline constexpr std::uint8_t kDscpAF23 = 22;
inline constexpr std::uint8_t kDscpBackground = 0;

inline std::uint8_t dscp(TrafficClass c) {
    switch (c) {
        case TrafficClass::EF: return kDscpEF;
        case TrafficClass::AF23: return kDscpAF23;
        case TrafficClass::Background: return kDscpBackground;
    }
    return kDscpBackground;
}

inline TrafficClass class_of_dscp(std::uint8_t code) {
    if (code == kDscpEF) return TrafficClass::EF;
    if (code == kDscpAF23) return TrafficClass::AF23;
    return TrafficClass::Background;
}

inline std::string_view to_string(TrafficClass c) {
    switch (c) {
        case TrafficClass::EF: return "EF";
        case TrafficClass::AF23: return "AF23";
        case TrafficClass::Background: return "BG";
    }
    return "?";
}

struct WfqConfig {
    /// Indexed by TrafficClass.
    std::array<double, kClassCount> weights{4.0, 1.0, 1.0};
    std::array<std::size_t, kClassCount> buffer_bytes{65536, 65536, 65536};
};

inline void validate(const WfqConfig& c) {
    for (std::size_t i = 0; i < kClassCount; ++i) {
        if (!(c.weights[i] > 0)) throw ConfigError("wfq config: weight of class " + std::to_string(i) + " must be > 0");
        if (c.buffer_bytes[i] == 0) throw ConfigError("wfq config: buffer of class " + std::to_string(i) + " must be > 0");
    }
}

struct Entry {
    std::uint64_t id = 0;
    TrafficClass cls = TrafficClass::AF23;
    std::size_t bytes = 0;
    double tag = 0.0;
    std::uint64_t order = 0;
};

class WfqPort {
  public:
    explicit WfqPort(WfqConfig config = {}) : config_(config) { validate(config_); }

    /// Tail drop: returns false when the class buffer cannot hold the packet.
    bool enqueue(std::uint64_t id, TrafficClass cls, std::size_t bytes) {
        const auto c = static_cast<std::size_t>(cls);
        if (queued_bytes_[c] + bytes > config_.buffer_bytes[c]) return false;
        const double tag = std::max(virtual_time_, last_tag_[c]) + 8.0 * static_cast<double>(bytes) / config_.weights[c];
        last_tag_[c] = tag;
        queues_[c].push_back({id, cls, bytes, tag, next_order_++});
        queued_bytes_[c] += bytes;
        return true;
    }

    std::optional<Entry> dequeue() {
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < kClassCount; ++c) {
            if (queues_[c].empty()) continue;
            if (!best || queues_[c].front().tag < queues_[*best].front().tag) best = c;
        }
        if (!best) return std::nullopt;
        Entry e = queues_[*best].front();
        queues_[*best].pop_front();
        queued_bytes_[*best] -= e.bytes;
        virtual_time_ = e.tag;
        return e;
    }

    bool empty() const { return queues_[0].empty() && queues_[1].empty() && queues_[2].empty(); }
    std::size_t queued_bytes(TrafficClass c) const { return queued_bytes_[static_cast<std::size_t>(c)]; }
    std::size_t queued_packets(TrafficClass c) const { return queues_[static_cast<std::size_t>(c)].size(); }
    std::size_t queued_packets() const {
        std::size_t n = 0;
        for (const auto& q : queues_) n += q.size();
        return n;
    }
    double virtual_time() const { return virtual_time_; }
    const WfqConfig& config() const { return config_; }

  private:
    WfqConfig config_;
    std::array<std::deque<Entry>, kClassCount> queues_{};
    std::array<std::size_t, kClassCount> queued_bytes_{};
    std::array<double, kClassCount> last_tag_{};
    double virtual_time_ = 0.0;
    std::uint64_t next_order_ = 0;
};

}  // namespace pmufog::wfq
