#pragma once

// Discrete-event simulation of a seven-PMU wide-area measurement network.
//
//   PMUi --lan_cc-- SRi --access WAN-- C1A/C2A --core--> CCR --lan_ss-- SW --lan_ss-- PDC
//                                                                      \--lan_ss-- WAMC
//
// Every directed link end is an output port with a WFQ scheduler. PMUs emit one
// 112-byte frame every 1/30 s; the fog detector at each substation decides the
// DSCP (EF while anomalous, AF23 otherwise). The PDC aligns frames by timestamp
// and forwards each released set to the WAMC server as one packet.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmufog/errors.hpp"
#include "pmufog/frame_codec.hpp"
#include "pmufog/knn.hpp"
#include "pmufog/pdc.hpp"
#include "pmufog/rng.hpp"
#include "pmufog/signalgen.hpp"
#include "pmufog/ssa.hpp"
#include "pmufog/wfq.hpp"

namespace pmufog::netsim {

enum class LinkKind { LanCC, Wan, LanSS };

inline std::string_view to_string(LinkKind k) {
    switch (k) {
        case LinkKind::LanCC: return "lan_cc";
        case LinkKind::Wan: return "wan";
        case LinkKind::LanSS: return "lan_ss";
    }
    return "?";
}

struct Link {
    std::size_t a = 0;
    std::size_t b = 0;
    double bandwidth_bps = 0.0;
    double length_km = 0.0;
    LinkKind kind = LinkKind::Wan;
};

struct Topology {
    std::vector<std::string> nodes;
    std::vector<Link> links;
    double velocity_km_s = 2.0e5;
    std::vector<std::size_t> pmus;
    std::size_t pdc = 0;
    std::size_t wamc = 0;
    std::size_t ccr = 0;

    std::size_t node(std::string_view name) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i] == name) return i;
        }
        throw ConfigError("topology: unknown node " + std::string(name));
    }
    std::size_t port_count() const { return 2 * links.size(); }
    /// Port 2*l sends a->b on link l, port 2*l+1 sends b->a.
    const Link& link_of(std::size_t port) const { return links[port / 2]; }
    std::size_t port_from(std::size_t port) const { return port % 2 == 0 ? link_of(port).a : link_of(port).b; }
    std::size_t port_to(std::size_t port) const { return port % 2 == 0 ? link_of(port).b : link_of(port).a; }
    double propagation_s(std::size_t port) const { return link_of(port).length_km / velocity_km_s; }
    double serialization_s(std::size_t port, std::size_t bytes) const {
        return 8.0 * static_cast<double>(bytes) / link_of(port).bandwidth_bps;
    }
};

/// Shortest path by length; ties prefer fewer hops, then lower node index.
inline std::vector<std::size_t> route(const Topology& topo, std::size_t from, std::size_t to) {
    const std::size_t n = topo.nodes.size();
    using Key = std::tuple<double, std::size_t, std::size_t>;  // (km, hops, node)
    std::vector<std::optional<Key>> best(n);
    std::vector<std::optional<std::size_t>> via(n);
    std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
    best[from] = Key{0.0, 0, from};
    open.push(*best[from]);
    while (!open.empty()) {
        const auto [km, hops, u] = open.top();
        open.pop();
        if (best[u] && Key{km, hops, u} > *best[u]) continue;
        for (std::size_t port = 0; port < topo.port_count(); ++port) {
            if (topo.port_from(port) != u) continue;
            const std::size_t v = topo.port_to(port);
            const Key cand{km + topo.link_of(port).length_km, hops + 1, v};
            if (!best[v] || std::tie(std::get<0>(cand), std::get<1>(cand)) <
                                std::tie(std::get<0>(*best[v]), std::get<1>(*best[v]))) {
                best[v] = cand;
                via[v] = port;
                open.push(cand);
            }
        }
    }
    if (!best[to]) throw ConfigError("topology: no path from " + topo.nodes[from] + " to " + topo.nodes[to]);
    std::vector<std::size_t> ports;
    for (std::size_t v = to; v != from; v = topo.port_from(*via[v])) ports.push_back(*via[v]);
    std::reverse(ports.begin(), ports.end());
    return ports;
}

inline void validate(const Topology& topo) {
    if (!(topo.velocity_km_s > 0)) throw ConfigError("topology: propagation velocity must be > 0");
    for (const Link& l : topo.links) {
        if (!(l.bandwidth_bps > 0)) {
            throw ConfigError("topology: link " + topo.nodes[l.a] + "-" + topo.nodes[l.b] + " bandwidth must be > 0");
        }
        if (!(l.length_km >= 0)) {
            throw ConfigError("topology: link " + topo.nodes[l.a] + "-" + topo.nodes[l.b] + " length must be >= 0");
        }
    }
    for (const std::size_t p : topo.pmus) route(topo, p, topo.pdc);
    route(topo, topo.pdc, topo.wamc);
}

struct TopologyOptions {
    /// Path length from each PMU's substation router to the control-center router.
    std::vector<double> distances_km{50, 80, 150, 220, 380, 600, 500};
    /// PMUs with index below this attach to core_1, the rest to core_2.
    std::size_t core1_pmus = 4;
    double c1a_c1b_km = 10, c1b_ccr_km = 20;
    double c2a_c2b_km = 30, c2b_ccr_km = 40;
    double c1a_c2a_km = 200, c1b_c2b_km = 150, c1a_c2b_km = 250, c1b_c2a_km = 250;
    double lan_km = 1.0;
    double lan_bps = 100e6;
    double wan_bps = 10e6;
    double velocity_km_s = 2.0e5;
};

inline Topology build_topology(const TopologyOptions& o) {
    if (o.distances_km.empty()) throw ConfigError("topology: at least one PMU is required");
    Topology t;
    t.velocity_km_s = o.velocity_km_s;
    auto add_node = [&](std::string name) {
        t.nodes.push_back(std::move(name));
        return t.nodes.size() - 1;
    };
    auto add_link = [&](std::size_t a, std::size_t b, double bps, double km, LinkKind kind) {
        t.links.push_back({a, b, bps, km, kind});
    };
    const std::size_t n = o.distances_km.size();
    std::vector<std::size_t> sr(n);
    for (std::size_t i = 0; i < n; ++i) t.pmus.push_back(add_node("PMU" + std::to_string(i + 1)));
    for (std::size_t i = 0; i < n; ++i) sr[i] = add_node("SR" + std::to_string(i + 1));
    const std::size_t c1a = add_node("C1A"), c1b = add_node("C1B"), c2a = add_node("C2A"), c2b = add_node("C2B");
    t.ccr = add_node("CCR");
    const std::size_t sw = add_node("SW");
    t.pdc = add_node("PDC");
    t.wamc = add_node("WAMC");

    for (std::size_t i = 0; i < n; ++i) add_link(t.pmus[i], sr[i], o.lan_bps, o.lan_km, LinkKind::LanCC);
    const double core1 = o.c1a_c1b_km + o.c1b_ccr_km;
    const double core2 = o.c2a_c2b_km + o.c2b_ccr_km;
    for (std::size_t i = 0; i < n; ++i) {
        const bool first = i < o.core1_pmus;
        const double access = o.distances_km[i] - (first ? core1 : core2);
        if (access < 0) {
            throw ConfigError("topology: distance of PMU" + std::to_string(i + 1) + " is shorter than its core leg");
        }
        add_link(sr[i], first ? c1a : c2a, o.wan_bps, access, LinkKind::Wan);
    }
    add_link(c1a, c1b, o.wan_bps, o.c1a_c1b_km, LinkKind::Wan);
    add_link(c1b, t.ccr, o.wan_bps, o.c1b_ccr_km, LinkKind::Wan);
    add_link(c2a, c2b, o.wan_bps, o.c2a_c2b_km, LinkKind::Wan);
    add_link(c2b, t.ccr, o.wan_bps, o.c2b_ccr_km, LinkKind::Wan);
    add_link(c1a, c2a, o.wan_bps, o.c1a_c2a_km, LinkKind::Wan);
    add_link(c1b, c2b, o.wan_bps, o.c1b_c2b_km, LinkKind::Wan);
    add_link(c1a, c2b, o.wan_bps, o.c1a_c2b_km, LinkKind::Wan);
    add_link(c1b, c2a, o.wan_bps, o.c1b_c2a_km, LinkKind::Wan);
    add_link(t.ccr, sw, o.lan_bps, o.lan_km, LinkKind::LanSS);
    add_link(sw, t.pdc, o.lan_bps, o.lan_km, LinkKind::LanSS);
    add_link(sw, t.wamc, o.lan_bps, o.lan_km, LinkKind::LanSS);
    validate(t);
    return t;
}

enum class DetectorKind { None, Oracle, Ssa, Knn };

inline std::string_view to_string(DetectorKind d) {
    switch (d) {
        case DetectorKind::None: return "none";
        case DetectorKind::Oracle: return "oracle";
        case DetectorKind::Ssa: return "ssa";
        case DetectorKind::Knn: return "knn";
    }
    return "?";
}

inline DetectorKind parse_detector(std::string_view s) {
    if (s == "none") return DetectorKind::None;
    if (s == "oracle") return DetectorKind::Oracle;
    if (s == "ssa") return DetectorKind::Ssa;
    if (s == "knn") return DetectorKind::Knn;
    throw ConfigError("unknown detector: " + std::string(s));
}

/// One disturbance seen by every PMU at the same instant.
struct GridEvent {
    signalgen::FaultType fault = signalgen::FaultType::LineToLine;
    double onset_s = 1.0;
    double duration_s = 0.1;
    double noise_level = 0.05;
    double severity_min = 0.9;
    double severity_max = 1.3;
    /// 0-based PMU indices that see the fault; empty means every PMU.
    std::vector<std::size_t> affected_pmus;
};

struct Scenario {
    int id = 1;
    double background_bps = 0.0;
    bool qos_enabled = false;
    DetectorKind detector = DetectorKind::Ssa;
    double duration_s = 10.0;
    std::uint64_t seed = 1;

    double frame_rate_hz = 30.0;
    std::size_t payload_bytes = codec::kFrameSize;
    /// Ethernet + IP + UDP framing added to every packet.
    std::size_t overhead_bytes = 54;
    std::size_t background_packet_bytes = 1500;
    wfq::WfqConfig wfq{};
    double t_to_s = 0.05;
    double pdc_processing_s = 0.0;
    double hold_s = 0.1;
    double drain_s = 1.0;
    GridEvent event{};
    std::uint32_t base_soc = 1'000'000'000;
};

inline void validate(const Scenario& s) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("scenario: ") + what);
    };
    require(s.id >= 1 && s.id <= 3, "id must be 1, 2 or 3");
    require(s.background_bps >= 0, "background_bps must be >= 0");
    require(std::isfinite(s.duration_s) && s.duration_s >= 0, "duration_s must be >= 0");
    require(s.frame_rate_hz > 0, "frame_rate_hz must be > 0");
    require(s.payload_bytes == codec::kFrameSize, "payload_bytes must be 112");
    require(s.background_packet_bytes > 0, "background_packet_bytes must be > 0");
    require(s.t_to_s >= 0, "t_to_s must be >= 0");
    require(s.pdc_processing_s >= 0, "pdc_processing_s must be >= 0");
    require(s.hold_s >= 0, "hold_s must be >= 0");
    require(s.drain_s >= 0, "drain_s must be >= 0");
    require(s.event.duration_s > 0, "event duration must be > 0");
    require(s.event.noise_level >= 0 && s.event.noise_level <= 1, "event noise must lie in [0, 1]");
    require(s.event.severity_min > 0 && s.event.severity_max >= s.event.severity_min,
            "event severity range must satisfy 0 < min <= max");
    wfq::validate(s.wfq);
}

struct Built {
    Topology topology;
    Scenario scenario;
};

/// Scenario 1: 10 Mbps WAN. Scenario 2: 100 Mbps WAN. Scenario 3: 100 Mbps WAN
/// with 45 Mbps of constant background traffic on every WAN port carrying PMU data.
inline Built build_scenario(int id, TopologyOptions overrides = {}) {
    Scenario s;
    s.id = id;
    switch (id) {
        case 1: overrides.wan_bps = 10e6; break;
        case 2: overrides.wan_bps = 100e6; break;
        case 3:
            overrides.wan_bps = 100e6;
            s.background_bps = 45e6;
            break;
        default: throw ConfigError("build_scenario: unknown scenario id " + std::to_string(id));
    }
    return {build_topology(overrides), s};
}

struct FlagInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

/// True when t falls in [start, end + hold] of some flagged interval.
inline bool is_marked(double t, std::span<const FlagInterval> flags, double hold_s) {
    constexpr double eps = 1e-9;
    for (const FlagInterval& f : flags) {
        if (t >= f.start_s - eps && t <= f.end_s + hold_s + eps) return true;
    }
    return false;
}

struct FogDetector {
    DetectorKind kind = DetectorKind::None;
    ssa::SsaConfig ssa{};
    std::optional<knn::KnnModel> knn;
};

/// Calibrates or trains the chosen detector on records drawn from the "detect" substream.
inline FogDetector prepare_detector(DetectorKind kind, double noise_level, std::uint64_t seed) {
    FogDetector d;
    d.kind = kind;
    if (kind == DetectorKind::Ssa) {
        std::vector<signalgen::WaveformRecord> normal;
        for (std::uint64_t i = 0; i < 5; ++i) {
            signalgen::SignalConfig cfg;
            cfg.noise_level = noise_level;
            cfg.rng_seed = derive_seed(seed, "detect", i);
            normal.push_back(signalgen::generate_record(cfg, signalgen::FaultType::None));
        }
        d.ssa.baseline_distance = ssa::calibrate_baseline(normal, d.ssa);
    } else if (kind == DetectorKind::Knn) {
        const auto training = signalgen::generate_dataset(5, noise_level, derive_seed(seed, "detect"));
        d.knn = knn::train(training, knn::KnnConfig{});
    }
    return d;
}

inline std::vector<FlagInterval> detect_intervals(const FogDetector& d, const signalgen::WaveformRecord& rec) {
    std::vector<FlagInterval> out;
    switch (d.kind) {
        case DetectorKind::None: break;
        case DetectorKind::Oracle:
            for (const auto& lab : rec.labels) out.push_back({lab.start_s, lab.end_s});
            break;
        case DetectorKind::Ssa: {
            const auto span = static_cast<std::size_t>(std::max(d.ssa.N, d.ssa.lookahead() + 1));
            if (rec.size() < span) break;
            for (const auto& p : ssa::detect(rec, d.ssa).points) {
                if (p.is_anomaly) out.push_back({p.time_s, p.time_s});
            }
            break;
        }
        case DetectorKind::Knn: {
            const std::size_t len = d.knn->config.window_len;
            for (const auto& [w, c] : knn::classify_record(*d.knn, rec)) {
                if (c.label == knn::Label::Fault) {
                    const double t = rec.timestamps[w.begin + len - 1];
                    out.push_back({t, t});
                }
            }
            break;
        }
    }
    return out;
}

/// Phasor of the last nominal cycle ending at sample `end` (inclusive), RMS-scaled.
inline std::complex<double> cycle_phasor(std::span<const double> v, std::size_t end, std::size_t samples_per_cycle) {
    std::complex<double> acc{0.0, 0.0};
    const std::size_t n = samples_per_cycle;
    for (std::size_t j = 0; j < n; ++j) {
        if (end + 1 < n - j) continue;
        const std::size_t idx = end + 1 - n + j;
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        acc += v[idx] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    return acc * (std::numbers::sqrt2 / static_cast<double>(n));
}

enum class PacketKind { Frame, Aggregate };

struct Hop {
    std::size_t port = 0;
    double enqueue_s = 0.0;
    double tx_start_s = 0.0;
    double tx_end_s = 0.0;
    double arrive_s = 0.0;
    /// Packets of any class already waiting (not in service) when this one was enqueued.
    std::size_t backlog = 0;
    bool dropped = false;
};

struct PacketRecord {
    std::uint64_t id = 0;
    PacketKind kind = PacketKind::Frame;
    /// PMU index for frames; -1 for PDC output.
    int pmu = -1;
    /// Frame sequence number (one per 1/30 s).
    std::int64_t timestamp = 0;
    std::uint8_t dscp = wfq::kDscpAF23;
    std::size_t bytes = 0;
    double created_s = 0.0;
    std::vector<Hop> hops;
    bool dropped = false;
    std::optional<double> delivered_s;

    // Frames only, filled in at the PDC.
    bool anomaly = false;
    bool late = false;
    std::optional<double> released_s;
    std::optional<std::uint64_t> forwarded_in;

    // PDC output only.
    std::vector<std::uint64_t> members;
};

struct Release {
    std::int64_t timestamp = 0;
    double reference_s = 0.0;
    double release_s = 0.0;
    std::size_t present = 0;
    bool timed_out = false;
    std::vector<std::optional<double>> wait_s;
};

struct Counters {
    std::size_t emitted = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    std::size_t in_flight = 0;
    std::size_t background_emitted = 0;
    std::size_t background_delivered = 0;
    std::size_t background_dropped = 0;
    std::size_t background_in_flight = 0;
};

struct RunResult {
    Topology topology;
    Scenario scenario;
    std::vector<PacketRecord> packets;
    std::vector<Release> releases;
    std::vector<std::vector<FlagInterval>> flags;  // per PMU
    std::size_t frames_per_pmu = 0;
    Counters counters;
};

namespace detail {

enum class EventType { Emit, TxDone, Arrive, Background, SendAggregate, Timeout };

struct Event {
    double time = 0.0;
    int rank = 0;  // timeouts run after every other event at the same instant
    std::uint64_t seq = 0;
    EventType type = EventType::Emit;
    std::uint64_t a = 0;
    bool operator>(const Event& o) const { return std::tie(time, rank, seq) > std::tie(o.time, o.rank, o.seq); }
};

inline constexpr std::uint64_t kBackgroundId = std::uint64_t{1} << 63;

class Simulator {
  public:
    Simulator(const Topology& topo, const Scenario& sc)
        : topo_(topo), sc_(sc), aligner_(sc.t_to_s, topo.pmus.size()) {
        validate(topo_);
        validate(sc_);
        for (const std::size_t i : sc_.event.affected_pmus) {
            if (i >= topo_.pmus.size()) throw ConfigError("scenario: affected PMU index " + std::to_string(i) + " out of range");
        }
        for (std::size_t p = 0; p < topo_.port_count(); ++p) ports_.emplace_back(sc_.wfq);
        busy_.assign(topo_.port_count(), std::nullopt);
        for (const std::size_t pmu : topo_.pmus) routes_.push_back(route(topo_, pmu, topo_.pdc));
        to_server_ = route(topo_, topo_.pdc, topo_.wamc);
    }

    RunResult run() {
        RunResult out;
        out.topology = topo_;
        out.scenario = sc_;
        prepare_waveforms();
        out.flags = flags_;
        frames_ = static_cast<std::size_t>(std::ceil(sc_.duration_s * sc_.frame_rate_hz - 1e-9));
        out.frames_per_pmu = frames_;
        if (frames_ > 0) push(0.0, EventType::Emit, 0);
        if (sc_.background_bps > 0 && sc_.duration_s > 0) start_background();

        const double end = sc_.duration_s + sc_.drain_s;
        while (!events_.empty() && events_.top().time <= end) {
            const Event e = events_.top();
            events_.pop();
            now_ = e.time;
            switch (e.type) {
                case EventType::Emit: emit(static_cast<std::int64_t>(e.a)); break;
                case EventType::TxDone: tx_done(e.a); break;
                case EventType::Arrive: arrive(e.a); break;
                case EventType::Background: background(e.a); break;
                case EventType::SendAggregate: enter(e.a, now_); break;
                case EventType::Timeout: timeout(static_cast<std::int64_t>(e.a)); break;
            }
        }
        for (const PacketRecord& p : packets_) {
            ++c_.emitted;
            if (p.dropped) {
                ++c_.dropped;
            } else if (p.delivered_s) {
                ++c_.delivered;
            }
        }
        c_.in_flight = c_.emitted - c_.delivered - c_.dropped;
        c_.background_in_flight = c_.background_emitted - c_.background_delivered - c_.background_dropped;
        out.counters = c_;
        out.packets = std::move(packets_);
        out.releases = std::move(releases_);
        return out;
    }

  private:
    void push(double t, EventType type, std::uint64_t a, int rank = 0) { events_.push({t, rank, seq_++, type, a}); }

    double frame_time(std::int64_t k) const { return static_cast<double>(k) / sc_.frame_rate_hz; }

    void prepare_waveforms() {
        const std::size_t n = topo_.pmus.size();
        flags_.assign(n, {});
        waveforms_.assign(n, {});
        if (sc_.duration_s <= 0) return;
        const double fs = 600.0;
        const auto samples = static_cast<std::size_t>(std::ceil(sc_.duration_s * fs)) + 1;
        signalgen::SignalConfig base;
        base.sample_rate_hz = fs;
        base.duration_s = static_cast<double>(samples) / fs;
        base.noise_level = sc_.event.noise_level;
        base.fault_onset_s = sc_.event.onset_s;
        base.fault_duration_s = sc_.event.duration_s;
        const bool fits = sc_.event.onset_s >= 0 && sc_.event.onset_s + sc_.event.duration_s < base.duration_s;
        const auto fault = fits ? sc_.event.fault : signalgen::FaultType::None;
        if (!fits) base.fault_onset_s = 0.0;

        const FogDetector det = prepare_detector(sc_.detector, sc_.event.noise_level, sc_.seed);
        Rng severity_rng(derive_seed(sc_.seed, "sim.severity"));
        std::uniform_real_distribution<double> severity(sc_.event.severity_min, sc_.event.severity_max);
        for (std::size_t i = 0; i < n; ++i) {
            signalgen::SignalConfig cfg = base;
            cfg.severity = severity(severity_rng);
            cfg.rng_seed = derive_seed(sc_.seed, "sim.waveform", i);
            const auto& hit = sc_.event.affected_pmus;
            const bool affected = hit.empty() || std::find(hit.begin(), hit.end(), i) != hit.end();
            waveforms_[i] = signalgen::generate_record(cfg, affected ? fault : signalgen::FaultType::None);
            flags_[i] = detect_intervals(det, waveforms_[i]);
        }
    }

    void start_background() {
        std::set<std::size_t> wan_ports;
        for (const auto& r : routes_) {
            for (const std::size_t p : r) {
                if (topo_.link_of(p).kind == LinkKind::Wan) wan_ports.insert(p);
            }
        }
        const double interval = 8.0 * static_cast<double>(sc_.background_packet_bytes) / sc_.background_bps;
        for (const std::size_t p : wan_ports) {
            Rng rng(derive_seed(sc_.seed, "sim.background", p));
            const double phase = std::uniform_real_distribution<double>(0.0, interval)(rng);
            bg_next_[p] = phase;
            if (phase < sc_.duration_s) push(phase, EventType::Background, p);
        }
        bg_interval_ = interval;
    }

    void emit(std::int64_t k) {
        const double t = frame_time(k);
        const double fs = 600.0;
        for (std::size_t i = 0; i < topo_.pmus.size(); ++i) {
            const bool flagged = is_marked(t, flags_[i], sc_.hold_s);
            codec::DataFrame f;
            f.id_code = static_cast<std::uint16_t>(i + 1);
            const double whole = std::floor(t);
            f.soc = sc_.base_soc + static_cast<std::uint32_t>(whole);
            f.fraction = static_cast<std::uint32_t>(std::min<long long>(999999, std::llround((t - whole) * 1e6)));
            f.set_anomaly(flagged);
            const auto& v = waveforms_[i].voltages;
            if (!v.empty()) {
                const auto end = std::min<std::size_t>(v.size() - 1, static_cast<std::size_t>(std::llround(t * fs)));
                const auto ph = cycle_phasor(v, end, static_cast<std::size_t>(fs / 60.0));
                f.phasors[0] = {static_cast<float>(ph.real()), static_cast<float>(ph.imag())};
            }

            PacketRecord p;
            p.id = packets_.size();
            p.kind = PacketKind::Frame;
            p.pmu = static_cast<int>(i);
            p.timestamp = k;
            p.anomaly = flagged;
            p.dscp = sc_.qos_enabled && flagged ? wfq::kDscpEF : wfq::kDscpAF23;
            p.bytes = sc_.payload_bytes + sc_.overhead_bytes;
            p.created_s = t;
            packets_.push_back(std::move(p));
            payloads_.emplace(packets_.back().id, codec::encode(f));
            enter(packets_.back().id, t);
        }
        push(t + sc_.t_to_s, EventType::Timeout, static_cast<std::uint64_t>(k), 1);
        if (static_cast<std::size_t>(k + 1) < frames_) push(frame_time(k + 1), EventType::Emit, static_cast<std::uint64_t>(k + 1));
    }

    const std::vector<std::size_t>& route_of(const PacketRecord& p) const {
        return p.kind == PacketKind::Frame ? routes_[static_cast<std::size_t>(p.pmu)] : to_server_;
    }

    /// Packet enters the port of its next hop at time t.
    void enter(std::uint64_t id, double t) {
        PacketRecord& p = packets_[id];
        const std::size_t port = route_of(p)[p.hops.size()];
        Hop h;
        h.port = port;
        h.enqueue_s = t;
        h.backlog = ports_[port].queued_packets();
        const bool ok = ports_[port].enqueue(id, wfq::class_of_dscp(p.dscp), p.bytes);
        if (!ok) {
            h.dropped = true;
            p.dropped = true;
        }
        p.hops.push_back(h);
        if (ok && !busy_[port]) start(port);
    }

    void start(std::size_t port) {
        const auto e = ports_[port].dequeue();
        if (!e) return;
        busy_[port] = *e;
        const double done = now_ + topo_.serialization_s(port, e->bytes);
        if (!(e->id & kBackgroundId)) {
            Hop& h = packets_[e->id].hops.back();
            h.tx_start_s = now_;
            h.tx_end_s = done;
        }
        push(done, EventType::TxDone, port);
    }

    void tx_done(std::size_t port) {
        const wfq::Entry e = *busy_[port];
        busy_[port].reset();
        if (e.id & kBackgroundId) {
            ++c_.background_delivered;
        } else {
            Hop& h = packets_[e.id].hops.back();
            h.arrive_s = h.tx_end_s + topo_.propagation_s(port);
            push(h.arrive_s, EventType::Arrive, e.id);
        }
        start(port);
    }

    void arrive(std::uint64_t id) {
        PacketRecord& p = packets_[id];
        if (p.hops.size() < route_of(p).size()) {
            enter(id, now_);
            return;
        }
        p.delivered_s = now_;
        if (p.kind == PacketKind::Frame) receive_frame(id);
    }

    void receive_frame(std::uint64_t id) {
        const auto node = payloads_.extract(id);
        const codec::DataFrame f = codec::decode(node.mapped());
        const double t = static_cast<double>(f.soc - sc_.base_soc) + static_cast<double>(f.fraction) * 1e-6;
        const std::int64_t k = std::llround(t * sc_.frame_rate_hz);
        const std::size_t pmu = static_cast<std::size_t>(f.id_code) - 1;
        const auto outcome = aligner_.arrive({pmu, k, frame_time(k), now_});
        frame_of_[{k, pmu}] = id;
        if (outcome.late) {
            PacketRecord& p = packets_[id];
            p.late = true;
            p.released_s = now_;
            forward({id}, now_, p.dscp);
        } else if (outcome.released) {
            on_release(*outcome.released);
        }
    }

    void timeout(std::int64_t k) {
        if (auto s = aligner_.expire(k, frame_time(k))) on_release(*s);
    }

    void on_release(const pdc::AlignedSet& s) {
        Release r{s.timestamp, s.reference_s, s.release_s, s.present, s.timed_out, s.wait_s};
        releases_.push_back(r);
        std::vector<std::uint64_t> members;
        std::uint8_t dscp = wfq::kDscpAF23;
        for (std::size_t i = 0; i < s.wait_s.size(); ++i) {
            if (!s.wait_s[i]) continue;
            const std::uint64_t id = frame_of_.at({s.timestamp, i});
            packets_[id].released_s = s.release_s;
            if (packets_[id].dscp == wfq::kDscpEF) dscp = wfq::kDscpEF;
            members.push_back(id);
        }
        if (!members.empty()) forward(members, s.release_s, dscp);
    }

    void forward(const std::vector<std::uint64_t>& members, double released, std::uint8_t dscp) {
        PacketRecord agg;
        agg.id = packets_.size();
        agg.kind = PacketKind::Aggregate;
        agg.timestamp = packets_[members.front()].timestamp;
        agg.dscp = dscp;
        agg.bytes = members.size() * sc_.payload_bytes + sc_.overhead_bytes;
        agg.created_s = released;
        agg.members = members;
        for (const auto m : members) packets_[m].forwarded_in = agg.id;
        packets_.push_back(std::move(agg));
        push(released + sc_.pdc_processing_s, EventType::SendAggregate, packets_.back().id);
    }

    void background(std::size_t port) {
        ++c_.background_emitted;
        const std::uint64_t id = kBackgroundId | c_.background_emitted;
        if (!ports_[port].enqueue(id, wfq::TrafficClass::Background, sc_.background_packet_bytes)) {
            ++c_.background_dropped;
        } else if (!busy_[port]) {
            start(port);
        }
        // Successive departures are computed from the phase to avoid drift from repeated addition.
        const double phase = bg_next_[port];
        const auto count = static_cast<double>(++bg_count_[port]);
        const double next = phase + count * bg_interval_;
        if (next < sc_.duration_s) push(next, EventType::Background, port);
    }

    const Topology& topo_;
    const Scenario& sc_;
    pdc::PdcAligner aligner_;
    std::vector<wfq::WfqPort> ports_;
    std::vector<std::optional<wfq::Entry>> busy_;
    std::vector<std::vector<std::size_t>> routes_;
    std::vector<std::size_t> to_server_;
    std::vector<signalgen::WaveformRecord> waveforms_;
    std::vector<std::vector<FlagInterval>> flags_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::size_t frames_ = 0;
    std::vector<PacketRecord> packets_;
    std::map<std::uint64_t, codec::FrameBytes> payloads_;
    std::map<std::pair<std::int64_t, std::size_t>, std::uint64_t> frame_of_;
    std::vector<Release> releases_;
    std::map<std::size_t, double> bg_next_;
    std::map<std::size_t, std::uint64_t> bg_count_;
    double bg_interval_ = 0.0;
    Counters c_;
};

}  // namespace detail

inline RunResult run(const Topology& topology, const Scenario& scenario) {
    detail::Simulator sim(topology, scenario);
    return sim.run();
}

inline std::string format_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", t);
    return buf;
}

/// One row per packet hop.
inline void write_event_log(std::ostream& os, const RunResult& r) {
    os << "packet_id,kind,pmu,timestamp,dscp,bytes,created_s,hop,from,to,enqueue_s,tx_start_s,tx_end_s,arrive_s,"
          "dropped\n";
    for (const PacketRecord& p : r.packets) {
        for (std::size_t h = 0; h < p.hops.size(); ++h) {
            const Hop& hop = p.hops[h];
            const bool sent = !hop.dropped && hop.tx_end_s > 0.0;
            const bool arrived = sent && (h + 1 < p.hops.size() || p.delivered_s);
            os << p.id << ',' << (p.kind == PacketKind::Frame ? "frame" : "pdc") << ',' << (p.pmu + 1) << ','
               << p.timestamp << ',' << static_cast<int>(p.dscp) << ',' << p.bytes << ',' << format_time(p.created_s)
               << ',' << h << ',' << r.topology.nodes[r.topology.port_from(hop.port)] << ','
               << r.topology.nodes[r.topology.port_to(hop.port)] << ',' << format_time(hop.enqueue_s) << ','
               << (sent ? format_time(hop.tx_start_s) : "") << ',' << (sent ? format_time(hop.tx_end_s) : "") << ','
               << (arrived ? format_time(hop.arrive_s) : "") << ',' << (hop.dropped ? 1 : 0) << '\n';
        }
    }
}

}  // namespace pmufog::netsim
