#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "pmufog/rng.hpp"
#include "pmufog/signalgen.hpp"

using namespace pmufog;
using namespace pmufog::signalgen;

namespace {

double pure(double t) { return std::sin(2.0 * std::numbers::pi * 60.0 * t); }

SignalConfig quiet() {
    SignalConfig c;
    c.noise_level = 0.0;
    c.rng_seed = 11;
    return c;
}

}  // namespace

TEST(SignalGen, NoiselessNormalIsUnitSinusoid) {
    const auto rec = generate_record(quiet(), FaultType::None);
    ASSERT_EQ(rec.size(), 1200u);
    EXPECT_TRUE(rec.labels.empty());
    for (std::size_t k = 0; k < rec.size(); ++k) {
        EXPECT_DOUBLE_EQ(rec.timestamps[k], static_cast<double>(k) / 600.0);
        EXPECT_NEAR(rec.voltages[k], pure(rec.timestamps[k]), 1e-12);
    }
}

TEST(SignalGen, TimestampsUniformAndIncreasing) {
    SignalConfig c;
    c.rng_seed = 3;
    const auto rec = generate_record(c, FaultType::LineToGround);
    for (std::size_t k = 1; k < rec.size(); ++k) {
        EXPECT_GT(rec.timestamps[k], rec.timestamps[k - 1]);
        EXPECT_NEAR(rec.timestamps[k] - rec.timestamps[k - 1], 1.0 / 600.0, 1e-12);
    }
}

TEST(SignalGen, LabelMatchesOnsetAndDuration) {
    SignalConfig c = quiet();
    c.fault_onset_s = 0.6;
    for (const FaultType f : kFaultTypes) {
        const auto rec = generate_record(c, f);
        ASSERT_EQ(rec.labels.size(), 1u);
        EXPECT_DOUBLE_EQ(rec.labels[0].start_s, 0.6);
        EXPECT_DOUBLE_EQ(rec.labels[0].end_s, 0.7);
        EXPECT_EQ(rec.labels[0].type, f);
        EXPECT_NE(rec.labels[0].type, FaultType::None);
        EXPECT_GE(rec.labels[0].start_s, 0.0);
        EXPECT_LE(rec.labels[0].end_s, c.duration_s);
    }
}

TEST(SignalGen, SagHoldsResidualAmplitude) {
    const std::pair<FaultType, double> cases[] = {{FaultType::LineToLine, 0.6},
                                                  {FaultType::LineToGround, 0.7},
                                                  {FaultType::LineToLineToGround, 0.5},
                                                  {FaultType::ThreePhase, 0.3}};
    for (const auto& [f, residual] : cases) {
        const auto rec = generate_record(quiet(), f);
        for (std::size_t k = 0; k < rec.size(); ++k) {
            const double t = rec.timestamps[k];
            if (k < 300) {
                EXPECT_NEAR(rec.voltages[k], pure(t), 1e-12);
            }
            if (k >= 300 && k < 360) {
                EXPECT_NEAR(rec.voltages[k], residual * pure(t), 1e-12);
            }
            if (k >= 370) {
                EXPECT_NEAR(rec.voltages[k], pure(t), 1e-12);
            }
        }
    }
}

TEST(SignalGen, SeverityScalesSagDepth) {
    SignalConfig c = quiet();
    c.severity = 1.5;
    const auto rec = generate_record(c, FaultType::LineToLine);
    // residual 0.6 at severity 1 -> 1 - 1.5 * 0.4 = 0.4
    EXPECT_NEAR(rec.voltages[305], 0.4 * pure(rec.timestamps[305]), 1e-12);
}

TEST(SignalGen, GeneratorTripSettlesNearStep) {
    const auto rec = generate_record(quiet(), FaultType::GeneratorTrip);
    // Envelope late in the record is 0.95 with a small decayed ring.
    double energy = 0.0;
    for (std::size_t k = 1100; k < 1200; ++k) energy += rec.voltages[k] * rec.voltages[k];
    EXPECT_NEAR(std::sqrt(2.0 * energy / 100.0), 0.95, 0.01);
    double pre = 0.0;
    for (std::size_t k = 0; k < 300; ++k) pre = std::max(pre, std::abs(rec.voltages[k] - pure(rec.timestamps[k])));
    EXPECT_LT(pre, 1e-12);
}

TEST(SignalGen, DeterministicForSeed) {
    SignalConfig c;
    c.rng_seed = 1234;
    const auto a = generate_record(c, FaultType::ThreePhase);
    const auto b = generate_record(c, FaultType::ThreePhase);
    EXPECT_EQ(a.voltages, b.voltages);
    c.rng_seed = 1235;
    const auto d = generate_record(c, FaultType::ThreePhase);
    EXPECT_NE(a.voltages, d.voltages);
}

TEST(SignalGen, PreFaultNoiseStatistics) {
    SignalConfig c;
    c.noise_level = 0.05;
    c.fault_onset_s = 0.5;
    c.rng_seed = 99;
    const auto rec = generate_record(c, FaultType::ThreePhase);
    const std::size_t n = 180;  // [0, 0.3)
    double mean_r = 0.0, mean_v = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mean_r += rec.voltages[k] - pure(rec.timestamps[k]);
        mean_v += rec.voltages[k];
    }
    mean_r /= n;
    mean_v /= n;
    double var_r = 0.0, var_v = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = rec.voltages[k] - pure(rec.timestamps[k]) - mean_r;
        var_r += r * r;
        var_v += (rec.voltages[k] - mean_v) * (rec.voltages[k] - mean_v);
    }
    const double sd_noise = std::sqrt(var_r / (n - 1));
    const double sd_total = std::sqrt(var_v / (n - 1));
    EXPECT_NEAR(sd_noise, 0.05, 0.006);
    // Unit sinusoid has RMS 1/sqrt(2); independent noise adds in quadrature.
    EXPECT_NEAR(sd_total, std::sqrt(0.5 + 0.05 * 0.05), 0.02);
}

TEST(SignalGen, PreFaultSegmentIndependentOfFaultType) {
    SignalConfig c;
    c.rng_seed = 5;
    c.fault_onset_s = 0.4;
    const auto base = generate_record(c, FaultType::None);
    for (const FaultType f : kFaultTypes) {
        const auto rec = generate_record(c, f);
        for (std::size_t k = 0; k < 240; ++k) EXPECT_EQ(rec.voltages[k], base.voltages[k]);
    }
}

TEST(SignalGen, ValidationNamesBound) {
    SignalConfig c;
    c.duration_s = 1.0 / 7.0;
    EXPECT_THROW(generate_record(c, FaultType::None), ConfigError);
    c = SignalConfig{};
    c.noise_level = 1.5;
    try {
        generate_record(c, FaultType::None);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("noise_level"), std::string::npos);
    }
    c = SignalConfig{};
    c.fault_onset_s = 1.95;
    try {
        generate_record(c, FaultType::LineToLine);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("fault_onset_s + fault_duration_s"), std::string::npos);
    }
    c = SignalConfig{};
    c.sample_rate_hz = 0;
    EXPECT_THROW(generate_record(c, FaultType::None), ConfigError);
}

TEST(SignalGen, DatasetCountsAndOrder) {
    const auto ds = generate_dataset(28, 0.05, 7);
    ASSERT_EQ(ds.size(), 168u);
    std::size_t faults = 0;
    for (const auto& r : ds) faults += r.fault != FaultType::None ? 1 : 0;
    EXPECT_EQ(faults, 140u);
    for (std::size_t t = 0; t < kFaultTypes.size(); ++t) {
        for (std::size_t r = 0; r < 28; ++r) EXPECT_EQ(ds[t * 28 + r].fault, kFaultTypes[t]);
    }
    const auto small = generate_dataset(1, 0.05, 7);
    ASSERT_EQ(small.size(), 6u);
    EXPECT_EQ(small.back().fault, FaultType::None);
    EXPECT_TRUE(small.back().labels.empty());
}

TEST(SignalGen, DatasetOnsetsCycleAndSeveritiesInRange) {
    const auto ds = generate_dataset(10, 0.03, 21);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_DOUBLE_EQ(ds[i].config.fault_onset_s, kOnsetGrid[(i % 10) % kOnsetGrid.size()]);
        if (ds[i].fault != FaultType::None) {
            EXPECT_GE(ds[i].config.severity, 0.9);
            EXPECT_LE(ds[i].config.severity, 1.3);
        }
        EXPECT_DOUBLE_EQ(ds[i].config.noise_level, 0.03);
    }
    std::set<double> severities;
    for (const auto& r : ds) severities.insert(r.config.severity);
    EXPECT_GT(severities.size(), 10u);
}

TEST(SignalGen, DatasetDeterministic) {
    const auto a = generate_dataset(3, 0.05, 42);
    const auto b = generate_dataset(3, 0.05, 42);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].voltages, b[i].voltages);
        ASSERT_EQ(a[i].labels.size(), b[i].labels.size());
        for (std::size_t j = 0; j < a[i].labels.size(); ++j) {
            EXPECT_EQ(a[i].labels[j].start_s, b[i].labels[j].start_s);
            EXPECT_EQ(a[i].labels[j].type, b[i].labels[j].type);
        }
    }
    EXPECT_THROW(generate_dataset(0, 0.05, 1), ConfigError);
}

TEST(SignalGen, DownsampleIdentityAndRate) {
    SignalConfig c;
    c.rng_seed = 8;
    const auto rec = generate_record(c, FaultType::LineToLine);
    const auto same = downsample(rec, 1);
    EXPECT_EQ(same.voltages, rec.voltages);
    EXPECT_EQ(same.timestamps, rec.timestamps);

    const auto d5 = downsample(rec, 5);
    EXPECT_DOUBLE_EQ(d5.sample_rate_hz(), 120.0);
    ASSERT_EQ(d5.size(), 240u);
    for (std::size_t i = 1; i < d5.size(); ++i) EXPECT_NEAR(d5.timestamps[i] - d5.timestamps[i - 1], 1.0 / 120.0, 1e-12);
    ASSERT_EQ(d5.labels.size(), 1u);
    EXPECT_EQ(d5.labels[0].start_s, rec.labels[0].start_s);
    EXPECT_THROW(downsample(rec, 0), ConfigError);
}

TEST(SignalGen, DownsampleIndexArithmetic) {
    WaveformRecord rec;
    rec.config.sample_rate_hz = 12.0;
    for (int i = 0; i < 12; ++i) {
        rec.timestamps.push_back(i / 12.0);
        rec.voltages.push_back(i);
    }
    const auto d = downsample(rec, 3);
    EXPECT_EQ(d.voltages, (std::vector<double>{0, 3, 6, 9}));
    const auto d5 = downsample(rec, 5);  // remainder dropped
    EXPECT_EQ(d5.voltages, (std::vector<double>{0, 5}));
}

TEST(SignalGen, DownsampleComposes) {
    SignalConfig c;
    c.rng_seed = 4;
    const auto rec = generate_record(c, FaultType::None);
    const auto ab = downsample(downsample(rec, 2), 3);
    const auto direct = downsample(rec, 6);
    EXPECT_EQ(ab.voltages, direct.voltages);
    EXPECT_DOUBLE_EQ(ab.sample_rate_hz(), direct.sample_rate_hz());
}

TEST(SignalGen, FaultNamesRoundTrip) {
    for (const FaultType f : kFaultTypes) EXPECT_EQ(parse_fault(to_string(f)), f);
    EXPECT_EQ(parse_fault("normal"), FaultType::None);
    EXPECT_THROW(parse_fault("bogus"), ConfigError);
}

TEST(Rng, SubstreamsAreDistinctAndStable) {
    EXPECT_EQ(derive_seed(1, "gen"), derive_seed(1, "gen"));
    EXPECT_NE(derive_seed(1, "gen"), derive_seed(1, "detect"));
    EXPECT_NE(derive_seed(1, "gen", 0), derive_seed(1, "gen", 1));
    EXPECT_NE(derive_seed(1, "gen"), derive_seed(2, "gen"));
}
