#pragma once

// Synthetic PMU voltage records with labeled fault intervals.
//
// Each record is a nominal 60 Hz sinusoid multiplied by a per-fault amplitude
// envelope (with an optional phase trajectory) plus white Gaussian ambient noise.
// Short-circuit faults (LL, LG, LLG, 3-phase) are voltage sags to a residual
// amplitude that recover linearly over one cycle after the fault clears. A
// generator trip is a sag with a phase jump followed by a lower post-event
// plateau carrying a damped amplitude/frequency ring.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pmufog/errors.hpp"
#include "pmufog/rng.hpp"

namespace pmufog::signalgen {

enum class FaultType { GeneratorTrip, LineToLine, LineToGround, LineToLineToGround, ThreePhase, None };

/// The five fault categories, in reporting order.
inline constexpr std::array<FaultType, 5> kFaultTypes = {FaultType::GeneratorTrip, FaultType::LineToLine,
                                                         FaultType::LineToGround, FaultType::LineToLineToGround,
                                                         FaultType::ThreePhase};

inline constexpr std::array<double, 5> kOnsetGrid = {0.3, 0.4, 0.5, 0.6, 0.7};

inline std::string_view to_string(FaultType f) {
    switch (f) {
        case FaultType::GeneratorTrip: return "GT";
        case FaultType::LineToLine: return "LL";
        case FaultType::LineToGround: return "LG";
        case FaultType::LineToLineToGround: return "LLG";
        case FaultType::ThreePhase: return "3P";
        case FaultType::None: return "None";
    }
    return "None";
}

inline FaultType parse_fault(std::string_view s) {
    if (s == "GT" || s == "GeneratorTrip") return FaultType::GeneratorTrip;
    if (s == "LL" || s == "LineToLine") return FaultType::LineToLine;
    if (s == "LG" || s == "LineToGround") return FaultType::LineToGround;
    if (s == "LLG" || s == "LineToLineToGround") return FaultType::LineToLineToGround;
    if (s == "3P" || s == "ThreePhase") return FaultType::ThreePhase;
    if (s == "None" || s == "none" || s == "normal") return FaultType::None;
    throw ConfigError("unknown fault type '" + std::string(s) + "'");
}

/// Envelope shape parameters. Residuals are per-unit amplitudes at severity 1.
struct FaultParams {
    double ll_residual = 0.6;
    double lg_residual = 0.7;
    double llg_residual = 0.5;
    double three_phase_residual = 0.3;
    double recovery_cycles = 1.0;

    double gt_dip_residual = 0.75;
    double gt_step = 0.95;
    double gt_ring_hz = 1.0;
    double gt_decay_s = 0.5;
    double gt_ring_amplitude = 0.03;
    double gt_freq_deviation_hz = 0.05;
    double gt_phase_jump_rad = 0.3;
};

struct SignalConfig {
    double sample_rate_hz = 600.0;
    double duration_s = 2.0;
    double fault_onset_s = 0.5;
    double fault_duration_s = 0.1;
    double noise_level = 0.05;
    double nominal_freq_hz = 60.0;
    double nominal_amplitude = 1.0;
    /// Scales the depth of the envelope; stands in for the electrical distance to the fault.
    double severity = 1.0;
    FaultParams fault_params{};
    std::uint64_t rng_seed = 0;
};

struct LabelInterval {
    double start_s = 0.0;
    double end_s = 0.0;
    FaultType type = FaultType::None;
};

struct WaveformRecord {
    std::vector<double> timestamps;
    std::vector<double> voltages;
    std::vector<LabelInterval> labels;
    SignalConfig config;
    FaultType fault = FaultType::None;

    std::size_t size() const { return voltages.size(); }
    double sample_rate_hz() const { return config.sample_rate_hz; }
};

/// Nearest sample index of time t at rate fs.
inline std::int64_t sample_index(double t, double fs) { return std::llround(t * fs); }

inline void validate(const SignalConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("signal config: ") + what);
    };
    require(std::isfinite(c.sample_rate_hz) && c.sample_rate_hz > 0, "sample_rate_hz must be > 0");
    require(std::isfinite(c.duration_s) && c.duration_s > 0, "duration_s must be > 0");
    const double n = c.sample_rate_hz * c.duration_s;
    require(std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, n),
            "sample_rate_hz * duration_s must be an integer sample count");
    require(c.noise_level >= 0 && c.noise_level <= 1, "noise_level must lie in [0, 1]");
    require(c.fault_onset_s >= 0, "fault_onset_s must be >= 0");
    require(c.fault_duration_s > 0, "fault_duration_s must be > 0");
    require(c.fault_onset_s + c.fault_duration_s < c.duration_s, "fault_onset_s + fault_duration_s must be < duration_s");
    require(c.nominal_freq_hz > 0, "nominal_freq_hz must be > 0");
    require(c.nominal_amplitude > 0, "nominal_amplitude must be > 0");
    require(c.severity > 0, "severity must be > 0");
    require(c.fault_params.recovery_cycles >= 0, "recovery_cycles must be >= 0");
    require(c.fault_params.gt_decay_s > 0, "gt_decay_s must be > 0");
}

namespace detail {

inline double sag_residual(FaultType f, const FaultParams& p) {
    switch (f) {
        case FaultType::LineToLine: return p.ll_residual;
        case FaultType::LineToGround: return p.lg_residual;
        case FaultType::LineToLineToGround: return p.llg_residual;
        case FaultType::ThreePhase: return p.three_phase_residual;
        default: return 1.0;
    }
}

inline double scaled(double residual, double severity) { return std::max(0.0, 1.0 - severity * (1.0 - residual)); }

}  // namespace detail

inline WaveformRecord generate_record(const SignalConfig& config, FaultType fault) {
    validate(config);
    const double fs = config.sample_rate_hz;
    const auto n = static_cast<std::size_t>(std::llround(fs * config.duration_s));
    const FaultParams& fp = config.fault_params;

    std::vector<double> amplitude(n, 1.0);
    std::vector<double> phase(n, 0.0);

    const auto i0 = static_cast<std::size_t>(sample_index(config.fault_onset_s, fs));
    const auto i1 =
        std::min(n, static_cast<std::size_t>(sample_index(config.fault_onset_s + config.fault_duration_s, fs)));
    const auto recovery =
        static_cast<std::size_t>(std::llround(fp.recovery_cycles * fs / config.nominal_freq_hz));

    if (fault != FaultType::None && fault != FaultType::GeneratorTrip) {
        const double sag = detail::scaled(detail::sag_residual(fault, fp), config.severity);
        for (std::size_t k = i0; k < i1; ++k) amplitude[k] = sag;
        for (std::size_t r = 0; r < recovery && i1 + r < n; ++r) {
            const double frac = static_cast<double>(r) / static_cast<double>(recovery);
            amplitude[i1 + r] = sag + (1.0 - sag) * frac;
        }
    } else if (fault == FaultType::GeneratorTrip) {
        const double dip = detail::scaled(fp.gt_dip_residual, config.severity);
        const double step = detail::scaled(fp.gt_step, config.severity);
        const double w_ring = 2.0 * std::numbers::pi * fp.gt_ring_hz;
        auto plateau = [&](double tau) {
            return step + fp.gt_ring_amplitude * std::exp(-tau / fp.gt_decay_s) * std::cos(w_ring * tau);
        };
        for (std::size_t k = i0; k < i1; ++k) amplitude[k] = dip;
        for (std::size_t k = i1; k < n; ++k) {
            const double post = plateau(static_cast<double>(k - i1) / fs);
            const std::size_t r = k - i1;
            if (r < recovery) {
                const double frac = static_cast<double>(r) / static_cast<double>(recovery);
                amplitude[k] = dip * (1.0 - frac) + post * frac;
            } else {
                amplitude[k] = post;
            }
        }
        // Phase jump at the trip plus the integral of the damped frequency swing.
        double accumulated = config.severity * fp.gt_phase_jump_rad;
        for (std::size_t k = i0; k < n; ++k) {
            const double tau = static_cast<double>(k - i0) / fs;
            phase[k] = accumulated;
            const double df = fp.gt_freq_deviation_hz * std::exp(-tau / fp.gt_decay_s) * std::sin(w_ring * tau);
            accumulated += 2.0 * std::numbers::pi * df / fs;
        }
    }

    WaveformRecord rec;
    rec.config = config;
    rec.fault = fault;
    rec.timestamps.resize(n);
    rec.voltages.resize(n);
    Rng rng(config.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double w0 = 2.0 * std::numbers::pi * config.nominal_freq_hz;
    const double sigma = config.noise_level * config.nominal_amplitude;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / fs;
        rec.timestamps[k] = t;
        double v = config.nominal_amplitude * amplitude[k] * std::sin(w0 * t + phase[k]);
        if (sigma > 0) v += sigma * gauss(rng);
        rec.voltages[k] = v;
    }
    if (fault != FaultType::None) {
        rec.labels.push_back({config.fault_onset_s, config.fault_onset_s + config.fault_duration_s, fault});
    }
    return rec;
}

struct DatasetOptions {
    SignalConfig base{};
    double severity_min = 0.9;
    double severity_max = 1.3;
};

/// n_per_fault records of each fault type (in kFaultTypes order) followed by
/// n_per_fault normal records. Onsets cycle through kOnsetGrid.
inline std::vector<WaveformRecord> generate_dataset(std::size_t n_per_fault, double noise_level, std::uint64_t seed,
                                                    const DatasetOptions& options = {}) {
    if (n_per_fault < 1) throw ConfigError("generate_dataset: n_per_fault must be >= 1");
    if (!(options.severity_min > 0) || options.severity_max < options.severity_min) {
        throw ConfigError("generate_dataset: severity range must satisfy 0 < min <= max");
    }
    Rng severity_rng(derive_seed(seed, "gen.severity"));
    std::uniform_real_distribution<double> severity(options.severity_min, options.severity_max);

    std::vector<WaveformRecord> out;
    out.reserve(n_per_fault * (kFaultTypes.size() + 1));
    std::uint64_t index = 0;
    auto make = [&](FaultType f, std::size_t r) {
        SignalConfig cfg = options.base;
        cfg.noise_level = noise_level;
        cfg.fault_onset_s = kOnsetGrid[r % kOnsetGrid.size()];
        cfg.severity = f == FaultType::None ? 1.0 : severity(severity_rng);
        cfg.rng_seed = derive_seed(seed, "gen.record", index++);
        out.push_back(generate_record(cfg, f));
    };
    for (const FaultType f : kFaultTypes) {
        for (std::size_t r = 0; r < n_per_fault; ++r) make(f, r);
    }
    for (std::size_t r = 0; r < n_per_fault; ++r) make(FaultType::None, r);
    return out;
}

/// Keeps every factor-th sample starting at index 0; trailing remainder is dropped.
inline WaveformRecord downsample(const WaveformRecord& record, std::size_t factor) {
    if (factor == 0) throw ConfigError("downsample: factor must be >= 1");
    WaveformRecord out;
    out.config = record.config;
    out.config.sample_rate_hz = record.config.sample_rate_hz / static_cast<double>(factor);
    out.fault = record.fault;
    out.labels = record.labels;
    const std::size_t kept = record.size() / factor;
    out.timestamps.reserve(kept);
    out.voltages.reserve(kept);
    for (std::size_t i = 0; i < kept; ++i) {
        out.timestamps.push_back(record.timestamps[i * factor]);
        out.voltages.push_back(record.voltages[i * factor]);
    }
    return out;
}

/// Half-open sample-index range [begin, end) of a label interval at the record's rate.
struct IndexInterval {
    std::int64_t begin = 0;
    std::int64_t end = 0;
};

inline IndexInterval to_indices(const LabelInterval& label, double fs) {
    return {sample_index(label.start_s, fs), sample_index(label.end_s, fs)};
}

}  // namespace pmufog::signalgen
