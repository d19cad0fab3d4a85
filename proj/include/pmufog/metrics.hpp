#pragma once

// Delay statistics, completeness curves and report files computed from simulator logs.
//
// ETE delay of a frame = time to reach the PDC + PDC processing + PDC-to-server
// transfer. The time a frame spends waiting for the rest of its timestamp set is
// reported separately as the alignment wait.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmufog/errors.hpp"
#include "pmufog/io.hpp"
#include "pmufog/netsim.hpp"
#include "pmufog/wfq.hpp"

namespace pmufog::metrics {

struct Decomposition {
    double lan_cc = 0.0;
    double wan = 0.0;
    double lan_ss_in = 0.0;
    double pdc_processing = 0.0;
    double lan_ss_out = 0.0;

    double total() const { return lan_cc + wan + lan_ss_in + pdc_processing + lan_ss_out; }
};

/// Per-frame delay components in seconds.
struct FrameDelay {
    std::size_t pmu = 0;
    std::int64_t timestamp = 0;
    double ete_s = 0.0;
    double alignment_wait_s = 0.0;
    Decomposition parts;
};

/// Frames that reached the server, in packet-id order.
inline std::vector<FrameDelay> frame_delays(const netsim::RunResult& r) {
    std::vector<FrameDelay> out;
    for (const auto& p : r.packets) {
        if (p.kind != netsim::PacketKind::Frame || !p.delivered_s || !p.forwarded_in) continue;
        const auto& agg = r.packets[*p.forwarded_in];
        if (!agg.delivered_s || agg.hops.empty()) continue;
        FrameDelay d;
        d.pmu = static_cast<std::size_t>(p.pmu);
        d.timestamp = p.timestamp;
        for (const auto& h : p.hops) {
            const double dt = h.arrive_s - h.enqueue_s;
            switch (r.topology.link_of(h.port).kind) {
                case netsim::LinkKind::LanCC: d.parts.lan_cc += dt; break;
                case netsim::LinkKind::Wan: d.parts.wan += dt; break;
                case netsim::LinkKind::LanSS: d.parts.lan_ss_in += dt; break;
            }
        }
        d.parts.pdc_processing = agg.hops.front().enqueue_s - agg.created_s;
        d.parts.lan_ss_out = *agg.delivered_s - agg.hops.front().enqueue_s;
        d.ete_s = (*p.delivered_s - p.created_s) + (*agg.delivered_s - agg.created_s);
        d.alignment_wait_s = p.released_s ? *p.released_s - *p.delivered_s : 0.0;
        out.push_back(d);
    }
    return out;
}

struct DelayStats {
    std::size_t pmu = 0;
    std::size_t samples = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p99_ms = 0.0;
    /// Mean of each component, ms.
    Decomposition mean_parts_ms;
    double mean_alignment_wait_ms = 0.0;
    bool qos = false;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Nearest-rank percentile.
inline double percentile(std::vector<double> v, double pct) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace detail

/// One entry per PMU. PMUs without delivered frames have samples == 0 and zero stats.
inline std::vector<DelayStats> ete_delay(const netsim::RunResult& r) {
    const auto frames = frame_delays(r);
    if (frames.empty()) throw DatasetError("ete_delay: log contains no delivered frames");
    const std::size_t n = r.topology.pmus.size();
    std::vector<std::vector<double>> ete(n);
    std::vector<DelayStats> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].pmu = i;
        out[i].qos = r.scenario.qos_enabled;
    }
    for (const FrameDelay& f : frames) {
        DelayStats& s = out[f.pmu];
        ++s.samples;
        ete[f.pmu].push_back(1e3 * f.ete_s);
        s.mean_ms += 1e3 * f.ete_s;
        s.mean_parts_ms.lan_cc += 1e3 * f.parts.lan_cc;
        s.mean_parts_ms.wan += 1e3 * f.parts.wan;
        s.mean_parts_ms.lan_ss_in += 1e3 * f.parts.lan_ss_in;
        s.mean_parts_ms.pdc_processing += 1e3 * f.parts.pdc_processing;
        s.mean_parts_ms.lan_ss_out += 1e3 * f.parts.lan_ss_out;
        s.mean_alignment_wait_ms += 1e3 * f.alignment_wait_s;
    }
    for (std::size_t i = 0; i < n; ++i) {
        DelayStats& s = out[i];
        if (s.samples == 0) continue;
        const double c = static_cast<double>(s.samples);
        s.mean_ms /= c;
        s.mean_parts_ms.lan_cc /= c;
        s.mean_parts_ms.wan /= c;
        s.mean_parts_ms.lan_ss_in /= c;
        s.mean_parts_ms.pdc_processing /= c;
        s.mean_parts_ms.lan_ss_out /= c;
        s.mean_alignment_wait_ms /= c;
        s.median_ms = detail::median(ete[i]);
        s.p99_ms = detail::percentile(ete[i], 99.0);
    }
    return out;
}

struct CompletenessPoint {
    double t_to_s = 0.0;
    double completeness = 0.0;
};

struct CompletenessCurve {
    bool qos = false;
    std::vector<CompletenessPoint> points;
};

/// Fraction of (timestamp, PMU) slots whose frame reached the PDC no later than
/// creation time + T_TO. Dropped and undelivered frames count as missing.
/// A run without emitted frames yields an empty curve.
inline CompletenessCurve completeness(const netsim::RunResult& r, std::span<const double> t_to_s) {
    CompletenessCurve c;
    c.qos = r.scenario.qos_enabled;
    const std::size_t slots = r.frames_per_pmu * r.topology.pmus.size();
    if (slots == 0) return c;
    std::vector<double> wan;
    for (const auto& p : r.packets) {
        if (p.kind == netsim::PacketKind::Frame && !p.dropped && p.delivered_s) wan.push_back(*p.delivered_s - p.created_s);
    }
    std::sort(wan.begin(), wan.end());
    for (const double t : t_to_s) {
        if (!(t >= 0)) throw ConfigError("completeness: timeouts must be >= 0");
        const auto present = static_cast<std::size_t>(std::upper_bound(wan.begin(), wan.end(), t) - wan.begin());
        c.points.push_back({t, static_cast<double>(present) / static_cast<double>(slots)});
    }
    return c;
}

/// Mean queueing delay (tx_start - enqueue) per port and class, over logged packets.
struct PortQueueing {
    std::size_t port = 0;
    /// Some packet found another one waiting ahead of it, so the scheduler had a choice to make.
    bool congested = false;
    std::map<wfq::TrafficClass, std::pair<double, std::size_t>> by_class;  // (sum_s, count)

    std::optional<double> mean(wfq::TrafficClass c) const {
        const auto it = by_class.find(c);
        if (it == by_class.end() || it->second.second == 0) return std::nullopt;
        return it->second.first / static_cast<double>(it->second.second);
    }
};

inline std::vector<PortQueueing> port_queueing(const netsim::RunResult& r) {
    std::map<std::size_t, PortQueueing> ports;
    for (const auto& p : r.packets) {
        for (const auto& h : p.hops) {
            if (h.dropped || h.tx_end_s <= 0.0) continue;
            auto& q = ports[h.port];
            q.port = h.port;
            q.congested = q.congested || h.backlog > 0;
            auto& [sum, count] = q.by_class[wfq::class_of_dscp(p.dscp)];
            sum += h.tx_start_s - h.enqueue_s;
            ++count;
        }
    }
    std::vector<PortQueueing> out;
    for (auto& [_, q] : ports) out.push_back(std::move(q));
    return out;
}

inline bool is_monotone(const CompletenessCurve& c) {
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        if (c.points[i].t_to_s >= c.points[i - 1].t_to_s && c.points[i].completeness < c.points[i - 1].completeness) {
            return false;
        }
    }
    return true;
}

/// Largest |per-packet decomposition error| over all delivered frames, seconds.
inline double decomposition_error(const netsim::RunResult& r) {
    double worst = 0.0;
    for (const FrameDelay& f : frame_delays(r)) worst = std::max(worst, std::abs(f.parts.total() - f.ete_s));
    for (const auto& p : r.packets) {
        if (!p.delivered_s) continue;
        double sum = 0.0;
        for (const auto& h : p.hops) {
            sum += (h.tx_start_s - h.enqueue_s) + (h.tx_end_s - h.tx_start_s) + (h.arrive_s - h.tx_end_s);
        }
        const double start = p.hops.empty() ? p.created_s : p.hops.front().enqueue_s;
        worst = std::max(worst, std::abs(sum - (*p.delivered_s - start)));
    }
    return worst;
}

/// Runs of one scenario; either side may be absent.
struct ScenarioRuns {
    int scenario_id = 1;
    std::optional<netsim::RunResult> without_qos;
    std::optional<netsim::RunResult> with_qos;
};

struct Property {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline std::vector<DelayStats> stats_or_empty(const netsim::RunResult& r) {
    try {
        return ete_delay(r);
    } catch (const DatasetError&) {
        return {};
    }
}

inline std::string tag(int id, std::string_view what) { return "scenario" + std::to_string(id) + "." + std::string(what); }

}  // namespace detail

inline std::vector<Property> evaluate_properties(std::span<const ScenarioRuns> runs, std::span<const double> t_to_s) {
    std::vector<Property> props;
    for (const ScenarioRuns& s : runs) {
        for (const auto* r : {&s.without_qos, &s.with_qos}) {
            if (!*r) continue;
            const auto& run = **r;
            const std::string side = run.scenario.qos_enabled ? "qos" : "no_qos";
            const auto& c = run.counters;
            props.push_back({detail::tag(s.scenario_id, side + ".conservation"),
                             c.emitted == c.delivered + c.dropped + c.in_flight,
                             std::to_string(c.emitted) + " emitted, " + std::to_string(c.delivered) + " delivered, " +
                                 std::to_string(c.dropped) + " dropped, " + std::to_string(c.in_flight) + " in flight"});
            const double err = decomposition_error(run);
            props.push_back({detail::tag(s.scenario_id, side + ".decomposition"), err <= 1e-12,
                             "max error " + io::fixed(err, 15) + " s"});
            props.push_back({detail::tag(s.scenario_id, side + ".completeness_monotone"),
                             is_monotone(completeness(run, t_to_s)), ""});
            if (run.scenario.qos_enabled) {
                bool ok = true;
                std::size_t congested = 0;
                for (const auto& q : port_queueing(run)) {
                    if (!q.congested) continue;
                    ++congested;
                    const auto ef = q.mean(wfq::TrafficClass::EF), af = q.mean(wfq::TrafficClass::AF23);
                    if (ef && af && *af > 0.0 && *ef > *af + 1e-12) ok = false;
                }
                props.push_back({detail::tag(s.scenario_id, "qos.ef_queueing_not_above_af23"), ok,
                                 std::to_string(congested) + " congested ports"});
            }
        }
        if (s.without_qos && s.with_qos) {
            const auto off = detail::stats_or_empty(*s.without_qos), on = detail::stats_or_empty(*s.with_qos);
            // The strict improvement claims are made for the 10 Mbps scenario only.
            const bool claim = s.scenario_id == 1;
            if (claim && !off.empty() && !on.empty()) {
                bool strict = true;
                std::string detail;
                for (std::size_t i = 0; i < off.size(); ++i) {
                    strict = strict && on[i].samples > 0 && on[i].mean_ms < off[i].mean_ms;
                    detail += "PMU" + std::to_string(i + 1) + " " + io::fixed(off[i].mean_ms, 6) + "->" +
                              io::fixed(on[i].mean_ms, 6) + "ms ";
                }
                props.push_back({detail::tag(s.scenario_id, "qos_mean_ete_strictly_lower"), strict, detail});
            }
            const auto c_off = completeness(*s.without_qos, t_to_s), c_on = completeness(*s.with_qos, t_to_s);
            bool ge = true, strict = false;
            for (std::size_t i = 0; i < std::min(c_off.points.size(), c_on.points.size()); ++i) {
                ge = ge && c_on.points[i].completeness >= c_off.points[i].completeness;
                strict = strict || c_on.points[i].completeness > c_off.points[i].completeness;
            }
            if (!c_off.points.empty()) {
                props.push_back({detail::tag(s.scenario_id, "qos_completeness_not_lower"), ge, ""});
                if (claim) {
                    props.push_back({detail::tag(s.scenario_id, "qos_completeness_strictly_higher_somewhere"), strict, ""});
                }
            }
        }
    }
    // Lower bandwidth must not be faster: compare scenario 1 against scenario 2 on matching qos settings.
    const ScenarioRuns* s1 = nullptr;
    const ScenarioRuns* s2 = nullptr;
    for (const auto& s : runs) {
        if (s.scenario_id == 1) s1 = &s;
        if (s.scenario_id == 2) s2 = &s;
    }
    if (s1 && s2) {
        auto compare = [&](const std::optional<netsim::RunResult>& a, const std::optional<netsim::RunResult>& b,
                           const std::string& side) {
            if (!a || !b) return;
            const auto sa = detail::stats_or_empty(*a), sb = detail::stats_or_empty(*b);
            if (sa.empty() || sb.empty()) return;
            bool ok = sa.size() == sb.size();
            for (std::size_t i = 0; ok && i < sa.size(); ++i) ok = sa[i].mean_ms > sb[i].mean_ms;
            props.push_back({"scenario1_slower_than_scenario2." + side, ok, ""});
        };
        compare(s1->without_qos, s2->without_qos, "no_qos");
        compare(s1->with_qos, s2->with_qos, "qos");
    }
    return props;
}

inline bool all_pass(std::span<const Property> props) {
    return std::all_of(props.begin(), props.end(), [](const Property& p) { return p.pass; });
}

inline std::string delay_table_csv(const ScenarioRuns& s) {
    std::string out = "pmu,no_qos_mean_ms,qos_mean_ms\n";
    const auto off = s.without_qos ? detail::stats_or_empty(*s.without_qos) : std::vector<DelayStats>{};
    const auto on = s.with_qos ? detail::stats_or_empty(*s.with_qos) : std::vector<DelayStats>{};
    const std::size_t n = std::max(off.size(), on.size());
    for (std::size_t i = 0; i < n; ++i) {
        out += "PMU" + std::to_string(i + 1) + ",";
        out += i < off.size() && off[i].samples > 0 ? io::fixed(off[i].mean_ms, 6) : "";
        out += ",";
        out += i < on.size() && on[i].samples > 0 ? io::fixed(on[i].mean_ms, 6) : "";
        out += "\n";
    }
    return out;
}

inline std::string delay_detail_csv(const ScenarioRuns& s) {
    std::string out =
        "pmu,qos,samples,mean_ms,median_ms,p99_ms,lan_cc_ms,wan_ms,lan_ss_in_ms,pdc_processing_ms,lan_ss_out_ms,"
        "alignment_wait_ms\n";
    for (const auto* r : {&s.without_qos, &s.with_qos}) {
        if (!*r) continue;
        for (const DelayStats& d : detail::stats_or_empty(**r)) {
            out += "PMU" + std::to_string(d.pmu + 1) + "," + (d.qos ? "on" : "off") + "," + std::to_string(d.samples);
            for (const double v : {d.mean_ms, d.median_ms, d.p99_ms, d.mean_parts_ms.lan_cc, d.mean_parts_ms.wan,
                                   d.mean_parts_ms.lan_ss_in, d.mean_parts_ms.pdc_processing,
                                   d.mean_parts_ms.lan_ss_out, d.mean_alignment_wait_ms}) {
                out += "," + io::fixed(v, 6);
            }
            out += "\n";
        }
    }
    return out;
}

inline std::string completeness_csv(const ScenarioRuns& s, std::span<const double> t_to_s) {
    std::string out = "t_to_ms,qos,completeness\n";
    for (const auto* r : {&s.without_qos, &s.with_qos}) {
        if (!*r) continue;
        const auto c = completeness(**r, t_to_s);
        for (const auto& p : c.points) {
            out += io::fixed(1e3 * p.t_to_s, 6) + "," + (c.qos ? "on" : "off") + "," + io::fixed(p.completeness, 9) + "\n";
        }
    }
    return out;
}

inline nlohmann::json summary_json(std::span<const ScenarioRuns> runs, std::span<const double> t_to_s) {
    const auto props = evaluate_properties(runs, t_to_s);
    nlohmann::json j;
    j["t_to_ms"] = nlohmann::json::array();
    for (const double t : t_to_s) j["t_to_ms"].push_back(1e3 * t);
    j["scenarios"] = nlohmann::json::array();
    for (const auto& s : runs) {
        nlohmann::json sj;
        sj["id"] = s.scenario_id;
        for (const auto* r : {&s.without_qos, &s.with_qos}) {
            if (!*r) continue;
            const auto& c = (*r)->counters;
            sj[(*r)->scenario.qos_enabled ? "qos" : "no_qos"] = {
                {"emitted", c.emitted},
                {"delivered", c.delivered},
                {"dropped", c.dropped},
                {"in_flight", c.in_flight},
                {"background_emitted", c.background_emitted},
                {"background_dropped", c.background_dropped},
            };
        }
        j["scenarios"].push_back(sj);
    }
    j["properties"] = nlohmann::json::array();
    for (const auto& p : props) j["properties"].push_back({{"name", p.name}, {"pass", p.pass}, {"detail", p.detail}});
    j["all_pass"] = all_pass(props);
    return j;
}

/// Writes delay_table_s<id>, delay_detail_s<id> and completeness_s<id> tables plus summary.json.
/// Returns the evaluated properties.
inline std::vector<Property> report(std::span<const ScenarioRuns> runs, std::span<const double> t_to_s,
                                    const std::filesystem::path& dir, io::Format format = io::Format::Csv) {
    for (const auto& s : runs) {
        const std::string id = std::to_string(s.scenario_id);
        io::write_table(dir, "delay_table_s" + id, delay_table_csv(s), format);
        io::write_table(dir, "delay_detail_s" + id, delay_detail_csv(s), format);
        io::write_table(dir, "completeness_s" + id, completeness_csv(s, t_to_s), format);
    }
    io::write_atomic(dir / "summary.json", summary_json(runs, t_to_s).dump(2) + "\n");
    return evaluate_properties(runs, t_to_s);
}

}  // namespace pmufog::metrics
