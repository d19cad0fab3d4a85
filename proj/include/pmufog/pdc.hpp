#pragma once

// Timestamp alignment at the phasor data concentrator.
//
// For one timestamp with reference time r and WAN delays T_i = arrival_i - r:
//   T_theta = max_i T_i
//   wait_i  = T_theta - T_i          if T_theta < T_TO
//           = max(0, T_TO - T_i)     otherwise; a PMU with T_i > T_TO is missing
// The set is released at r + min(T_theta, T_TO).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmufog/errors.hpp"

namespace pmufog::pdc {

struct Arrival {
    std::size_t pmu = 0;
    std::int64_t timestamp = 0;
    double reference_s = 0.0;
    double arrival_s = 0.0;
};

struct AlignedSet {
    std::int64_t timestamp = 0;
    double reference_s = 0.0;
    double release_s = 0.0;
    /// Per PMU; empty when the measurement missed the release.
    std::vector<std::optional<double>> wait_s;
    std::size_t present = 0;
    bool timed_out = false;
};

/// Waits for one timestamp from per-PMU WAN delays (nullopt = never arrived).
/// Returns (release offset from reference, per-PMU waits).
inline std::pair<double, std::vector<std::optional<double>>> align_waits(
    double t_to, std::span<const std::optional<double>> t_wan) {
    double t_theta = 0.0;
    bool complete = true;
    for (const auto& t : t_wan) {
        if (t) {
            t_theta = std::max(t_theta, *t);
        } else {
            complete = false;
        }
    }
    if (!complete) t_theta = std::numeric_limits<double>::infinity();

    std::vector<std::optional<double>> waits(t_wan.size());
    if (t_theta < t_to) {
        for (std::size_t i = 0; i < t_wan.size(); ++i) waits[i] = t_theta - *t_wan[i];
        return {t_theta, waits};
    }
    for (std::size_t i = 0; i < t_wan.size(); ++i) {
        if (t_wan[i] && *t_wan[i] <= t_to) waits[i] = std::max(0.0, t_to - *t_wan[i]);
    }
    return {t_to, waits};
}

inline void validate_timeout(double t_to) {
    if (!(t_to >= 0.0)) throw ConfigError("pdc: timeout must be >= 0");
}

/// Offline alignment of a complete arrival list. Sets are returned in timestamp order.
inline std::vector<AlignedSet> pdc_align(double t_to, std::size_t n_pmus, std::span<const Arrival> arrivals) {
    validate_timeout(t_to);
    struct Slot {
        double reference = 0.0;
        std::vector<std::optional<double>> t_wan;
    };
    std::map<std::int64_t, Slot> slots;
    for (const Arrival& a : arrivals) {
        if (a.pmu >= n_pmus) throw ProtocolError("pdc: PMU index " + std::to_string(a.pmu) + " out of range");
        auto [it, inserted] = slots.try_emplace(a.timestamp);
        if (inserted) {
            it->second.reference = a.reference_s;
            it->second.t_wan.assign(n_pmus, std::nullopt);
        }
        auto& t = it->second.t_wan[a.pmu];
        if (t) {
            throw ProtocolError("pdc: duplicate arrival for PMU " + std::to_string(a.pmu) + " at timestamp " +
                                std::to_string(a.timestamp));
        }
        t = a.arrival_s - it->second.reference;
    }
    std::vector<AlignedSet> out;
    for (const auto& [ts, slot] : slots) {
        auto [offset, waits] = align_waits(t_to, slot.t_wan);
        AlignedSet s;
        s.timestamp = ts;
        s.reference_s = slot.reference;
        s.release_s = slot.reference + offset;
        s.present = static_cast<std::size_t>(std::count_if(waits.begin(), waits.end(), [](const auto& w) { return w.has_value(); }));
        s.timed_out = s.present < n_pmus || !(offset < t_to);
        s.wait_s = std::move(waits);
        out.push_back(std::move(s));
    }
    return out;
}

/// Event-driven aligner used inside the simulator. Each timestamp is released
/// exactly once: by the arrival that completes it, or by expire() at its deadline.
class PdcAligner {
  public:
    PdcAligner(double t_to, std::size_t n_pmus) : t_to_(t_to), n_pmus_(n_pmus) { validate_timeout(t_to); }

    struct Outcome {
        bool late = false;
        std::optional<AlignedSet> released;
    };

    Outcome arrive(const Arrival& a) {
        if (a.pmu >= n_pmus_) throw ProtocolError("pdc: PMU index " + std::to_string(a.pmu) + " out of range");
        if (!seen_.insert({a.timestamp, a.pmu}).second) {
            throw ProtocolError("pdc: duplicate arrival for PMU " + std::to_string(a.pmu) + " at timestamp " +
                                std::to_string(a.timestamp));
        }
        if (released_.count(a.timestamp) != 0 || a.arrival_s > deadline(a.reference_s)) return {true, std::nullopt};

        auto [it, inserted] = pending_.try_emplace(a.timestamp);
        if (inserted) {
            it->second.reference = a.reference_s;
            it->second.t_wan.assign(n_pmus_, std::nullopt);
            it->second.arrival.assign(n_pmus_, 0.0);
        }
        Pending& p = it->second;
        p.t_wan[a.pmu] = a.arrival_s - p.reference;
        p.arrival[a.pmu] = a.arrival_s;
        if (++p.count < n_pmus_) return {false, std::nullopt};
        return {false, release(a.timestamp, a.arrival_s)};
    }

    /// Releases the timestamp if it is still pending. Call at reference + T_TO.
    std::optional<AlignedSet> expire(std::int64_t timestamp, double reference_s) {
        if (released_.count(timestamp) != 0) return std::nullopt;
        if (pending_.find(timestamp) == pending_.end()) {
            Pending& p = pending_[timestamp];
            p.reference = reference_s;
            p.t_wan.assign(n_pmus_, std::nullopt);
            p.arrival.assign(n_pmus_, 0.0);
        }
        return release(timestamp, deadline(reference_s));
    }

    double deadline(double reference_s) const { return reference_s + t_to_; }
    double timeout() const { return t_to_; }
    std::size_t pending() const { return pending_.size(); }

  private:
    struct Pending {
        double reference = 0.0;
        std::vector<std::optional<double>> t_wan;
        std::vector<double> arrival;
        std::size_t count = 0;
    };

    AlignedSet release(std::int64_t timestamp, double now) {
        auto node = pending_.extract(timestamp);
        Pending& p = node.mapped();
        auto [offset, waits] = align_waits(t_to_, p.t_wan);
        AlignedSet s;
        s.timestamp = timestamp;
        s.reference_s = p.reference;
        s.release_s = now;
        s.timed_out = p.count < n_pmus_ || !(offset < t_to_);
        // Waits measured on the simulator clock so arrival + wait lands on the release instant.
        for (std::size_t i = 0; i < n_pmus_; ++i) {
            if (waits[i]) waits[i] = std::max(0.0, now - p.arrival[i]);
        }
        s.present = static_cast<std::size_t>(std::count_if(waits.begin(), waits.end(), [](const auto& w) { return w.has_value(); }));
        s.wait_s = std::move(waits);
        released_.insert(timestamp);
        return s;
    }

    double t_to_;
    std::size_t n_pmus_;
    std::map<std::int64_t, Pending> pending_;
    std::set<std::int64_t> released_;
    std::set<std::pair<std::int64_t, std::size_t>> seen_;
};

}  // namespace pmufog::pdc
