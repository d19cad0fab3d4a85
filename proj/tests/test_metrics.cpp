#include <gtest/gtest.h>

#include <filesystem>

#include "pmufog/io.hpp"
#include "pmufog/metrics.hpp"

using namespace pmufog;
using namespace pmufog::metrics;
using netsim::DetectorKind;

namespace {

netsim::Topology single_link(double bps, double km) {
    netsim::Topology t;
    t.nodes = {"PMU1", "PDC", "WAMC"};
    t.pmus = {0};
    t.pdc = 1;
    t.wamc = 2;
    t.ccr = 1;
    t.links = {{0, 1, bps, km, netsim::LinkKind::Wan}, {1, 2, 100e6, 2.0, netsim::LinkKind::LanSS}};
    return t;
}

netsim::RunResult scenario_run(int id, bool qos, double duration = 1.0) {
    auto b = netsim::build_scenario(id);
    b.scenario.duration_s = duration;
    b.scenario.detector = DetectorKind::Oracle;
    b.scenario.event.onset_s = 0.3;
    b.scenario.qos_enabled = qos;
    return netsim::run(b.topology, b.scenario);
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto d = std::filesystem::temp_directory_path() / ("pmufog_metrics_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST(Metrics, EmptyLogThrows) {
    netsim::RunResult r;
    r.topology = single_link(1e6, 1);
    EXPECT_THROW(ete_delay(r), DatasetError);
}

TEST(Metrics, StatsMatchHandSum) {
    netsim::Scenario sc;
    sc.detector = DetectorKind::None;
    sc.duration_s = 0.2;
    sc.pdc_processing_s = 0.25e-3;
    const auto r = netsim::run(single_link(1e7, 300.0), sc);
    const double wan = 166.0 * 8.0 / 1e7 + 300.0 / 2e5;
    const double out = 166.0 * 8.0 / 1e8 + 2.0 / 2e5;  // one member + overhead
    const auto stats = ete_delay(r);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_EQ(stats[0].samples, 6u);
    EXPECT_NEAR(stats[0].mean_ms, 1e3 * (wan + 0.25e-3 + out), 1e-9);
    EXPECT_NEAR(stats[0].median_ms, stats[0].mean_ms, 1e-9);
    EXPECT_NEAR(stats[0].p99_ms, stats[0].mean_ms, 1e-9);
    EXPECT_NEAR(stats[0].mean_parts_ms.wan, 1e3 * wan, 1e-9);
    EXPECT_NEAR(stats[0].mean_parts_ms.pdc_processing, 0.25, 1e-9);
    EXPECT_NEAR(stats[0].mean_parts_ms.lan_ss_out, 1e3 * out, 1e-9);
    EXPECT_NEAR(stats[0].mean_parts_ms.total(), stats[0].mean_ms, 1e-9);
    EXPECT_EQ(stats[0].mean_alignment_wait_ms, 0.0);
}

TEST(Metrics, PercentileNearestRank) {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
    EXPECT_EQ(detail::percentile(v, 99.0), 99.0);
    EXPECT_EQ(detail::median(v), 50.5);
    EXPECT_EQ(detail::percentile({7.0}, 99.0), 7.0);
}

TEST(Metrics, CompletenessCurveShape) {
    const auto r = scenario_run(1, false);
    std::vector<double> grid;
    for (int ms = 0; ms <= 20; ++ms) grid.push_back(ms * 1e-3);
    grid.push_back(10.0);
    const auto c = completeness(r, grid);
    ASSERT_EQ(c.points.size(), grid.size());
    EXPECT_TRUE(is_monotone(c));
    EXPECT_EQ(c.points.front().completeness, 0.0);
    EXPECT_EQ(c.points.back().completeness, 1.0);
    for (const auto& p : c.points) {
        EXPECT_GE(p.completeness, 0.0);
        EXPECT_LE(p.completeness, 1.0);
    }
    EXPECT_THROW(completeness(r, std::vector<double>{-1.0}), ConfigError);
}

TEST(Metrics, CompletenessCountsSlotsNotSets) {
    const auto r = scenario_run(2, false, 0.5);
    // Only the nearest PMU (50 km) gets through in 0.4 ms; the next is 80 km away.
    const auto c = completeness(r, std::vector<double>{0.4e-3, 0.05});
    EXPECT_NEAR(c.points[0].completeness, 1.0 / 7.0, 1e-12);
    EXPECT_GT(c.points[0].completeness, 0.0);
    EXPECT_LT(c.points[0].completeness, 1.0);
    EXPECT_NEAR(c.points[0].completeness * 7.0, std::round(c.points[0].completeness * 7.0), 1e-9);
    EXPECT_EQ(c.points[1].completeness, 1.0);
}

TEST(Metrics, EfQueueingNotAboveAf23) {
    for (const auto& q : port_queueing(scenario_run(3, true))) {
        const auto ef = q.mean(wfq::TrafficClass::EF), af = q.mean(wfq::TrafficClass::AF23);
        if (q.congested && ef && af) {
            EXPECT_LE(*ef, *af + 1e-12) << "port " << q.port;
        }
    }

    // Co-located PMUs emit simultaneously and collide on the shared core links.
    netsim::TopologyOptions o;
    o.distances_km.assign(7, 100.0);
    auto topo = netsim::build_topology(o);
    netsim::Scenario sc;
    sc.duration_s = 1.0;
    sc.detector = DetectorKind::Oracle;
    sc.event.onset_s = 0.2;
    sc.event.duration_s = 0.5;
    sc.event.affected_pmus = {0, 1, 4};
    sc.qos_enabled = true;
    sc.wfq.buffer_bytes = {1u << 20, 1u << 20, 1u << 20};
    for (auto& l : topo.links) l.bandwidth_bps = 1e6;
    const auto r = netsim::run(topo, sc);
    std::size_t congested = 0;
    for (const auto& q : port_queueing(r)) {
        const auto ef = q.mean(wfq::TrafficClass::EF), af = q.mean(wfq::TrafficClass::AF23);
        if (!q.congested || !ef || !af) continue;
        ++congested;
        EXPECT_LE(*ef, *af) << "port " << q.port;
    }
    EXPECT_GT(congested, 0u);
}

TEST(Metrics, DelayTableLayout) {
    ScenarioRuns s{1, scenario_run(1, false), scenario_run(1, true)};
    const auto table = delay_table_csv(s);
    std::istringstream is(table);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "pmu,no_qos_mean_ms,qos_mean_ms");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
        EXPECT_EQ(line.rfind("PMU" + std::to_string(rows) + ",", 0), 0u);
    }
    EXPECT_EQ(rows, 7);
}

TEST(Metrics, ReportFilesAreDeterministic) {
    const std::vector<double> grid{0.002, 0.005, 0.01, 0.02};
    auto make = [&] {
        std::vector<ScenarioRuns> runs;
        runs.push_back({1, scenario_run(1, false), scenario_run(1, true)});
        runs.push_back({2, scenario_run(2, false), scenario_run(2, true)});
        return runs;
    };
    const auto a = fresh_dir("a"), b = fresh_dir("b");
    const auto props = report(make(), grid, a);
    report(make(), grid, b);
    for (const auto* f : {"delay_table_s1.csv", "delay_detail_s1.csv", "completeness_s1.csv", "delay_table_s2.csv",
                          "completeness_s2.csv", "summary.json"}) {
        ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
        EXPECT_EQ(io::read_file(a / f), io::read_file(b / f)) << f;
    }
    const auto j = nlohmann::json::parse(io::read_file(a / "summary.json"));
    EXPECT_EQ(j["properties"].size(), props.size());
    for (const auto& p : props) {
        if (p.name.find("conservation") != std::string::npos || p.name.find("decomposition") != std::string::npos ||
            p.name.find("monotone") != std::string::npos || p.name.find("slower") != std::string::npos) {
            EXPECT_TRUE(p.pass) << p.name << " " << p.detail;
        }
    }
}

TEST(Metrics, EmptyReportIsWellFormed) {
    const auto d = fresh_dir("empty");
    const auto props = report(std::span<const ScenarioRuns>{}, std::vector<double>{}, d);
    EXPECT_TRUE(props.empty());
    const auto j = nlohmann::json::parse(io::read_file(d / "summary.json"));
    EXPECT_TRUE(j["scenarios"].empty());
    EXPECT_TRUE(j["all_pass"].get<bool>());

    ScenarioRuns nothing{1, std::nullopt, std::nullopt};
    EXPECT_EQ(delay_table_csv(nothing), "pmu,no_qos_mean_ms,qos_mean_ms\n");
    EXPECT_EQ(completeness_csv(nothing, std::vector<double>{0.01}), "t_to_ms,qos,completeness\n");
}

TEST(Metrics, PureFunctionOfLog) {
    const auto r = scenario_run(2, true, 0.5);
    const auto a = ete_delay(r), b = ete_delay(r);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].mean_ms, b[i].mean_ms);
}
