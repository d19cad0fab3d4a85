#pragma once

// Record-level detection scoring shared by the SSA and KNN detectors.
//
// A fault record is a true positive when at least one flagged decision lies
// inside its labeled interval. Any record (fault or normal) raises a false
// alarm when a flagged decision lies wholly outside the labeled interval
// widened by a guard band on each side. Rates count records, not windows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pmufog/errors.hpp"
#include "pmufog/knn.hpp"
#include "pmufog/signalgen.hpp"
#include "pmufog/ssa.hpp"

namespace pmufog::evaluation {

using signalgen::FaultType;

/// Half-open sample range [begin, end) that a detector flagged.
struct FlaggedRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;
};

struct RecordOutcome {
    FaultType fault = FaultType::None;
    bool detected = false;
    bool false_alarm = false;
};

inline RecordOutcome score_record(const signalgen::WaveformRecord& rec, std::span<const FlaggedRange> flagged,
                                  std::int64_t guard_samples) {
    RecordOutcome out;
    out.fault = rec.labels.empty() ? FaultType::None : rec.labels.front().type;
    const double fs = rec.sample_rate_hz();
    for (const FlaggedRange& f : flagged) {
        bool inside = false;
        bool outside = true;
        for (const auto& lab : rec.labels) {
            const auto iv = signalgen::to_indices(lab, fs);
            if (f.begin < iv.end && f.end > iv.begin) inside = true;
            if (f.end > iv.begin - guard_samples && f.begin < iv.end + guard_samples) outside = false;
        }
        out.detected = out.detected || inside;
        out.false_alarm = out.false_alarm || outside;
    }
    return out;
}

struct ClassRates {
    std::size_t records = 0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    /// Undefined for a class without fault records.
    std::optional<double> tpr;
    double fpr = 0.0;
};

struct Report {
    std::map<FaultType, ClassRates> per_class;
    /// All fault records pooled.
    ClassRates faults;
    /// Normal (unlabeled) records only.
    ClassRates normal;
};

inline void finalize(ClassRates& r, bool has_faults) {
    if (r.records == 0) return;
    const double n = static_cast<double>(r.records);
    if (has_faults) r.tpr = static_cast<double>(r.true_positives) / n;
    r.fpr = static_cast<double>(r.false_positives) / n;
}

inline Report summarize(std::span<const RecordOutcome> outcomes) {
    if (outcomes.empty()) throw DatasetError("evaluate: dataset is empty");
    Report rep;
    for (const RecordOutcome& o : outcomes) {
        auto add = [&](ClassRates& r) {
            ++r.records;
            r.true_positives += o.detected ? 1 : 0;
            r.false_positives += o.false_alarm ? 1 : 0;
        };
        add(rep.per_class[o.fault]);
        add(o.fault == FaultType::None ? rep.normal : rep.faults);
    }
    for (auto& [fault, rates] : rep.per_class) finalize(rates, fault != FaultType::None);
    finalize(rep.faults, true);
    finalize(rep.normal, false);
    return rep;
}

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Largest TPR - FPR; ties prefer lower FPR, then higher TPR.
inline RocPoint best_point(std::span<const RocPoint> curve) {
    if (curve.empty()) throw DatasetError("best_point: empty ROC curve");
    return *std::max_element(curve.begin(), curve.end(), [](const RocPoint& a, const RocPoint& b) {
        const double ja = a.tpr - a.fpr;
        const double jb = b.tpr - b.fpr;
        if (ja != jb) return ja < jb;
        if (a.fpr != b.fpr) return a.fpr > b.fpr;
        return a.tpr < b.tpr;
    });
}

/// n points log-spaced over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    if (n == 0) return out;
    if (n == 1) return {lo};
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::exp(a + (b - a) * static_cast<double>(i) / (n - 1.0)));
    return out;
}

}  // namespace pmufog::evaluation

namespace pmufog::ssa {

/// Guard band around a labeled interval: one full detection span.
inline std::int64_t guard_samples(const SsaConfig& cfg) { return cfg.lookahead() + 1; }

inline std::vector<evaluation::FlaggedRange> flagged_ranges(const DetectionSeries& s, double threshold_ratio) {
    std::vector<evaluation::FlaggedRange> out;
    for (const auto& p : s.points) {
        if (p.normalized > threshold_ratio) {
            const auto i = static_cast<std::int64_t>(p.time_index);
            out.push_back({i, i + 1});
        }
    }
    return out;
}

inline evaluation::Report evaluate(std::span<const signalgen::WaveformRecord> records, const SsaConfig& cfg) {
    std::vector<evaluation::RecordOutcome> outcomes;
    for (const auto& rec : records) {
        const DetectionSeries s = detect(rec, cfg);
        const auto flags = flagged_ranges(s, cfg.threshold_ratio);
        outcomes.push_back(evaluation::score_record(rec, flags, guard_samples(cfg)));
    }
    return evaluation::summarize(outcomes);
}

/// Pooled fault-record TPR/FPR for each threshold ratio.
inline std::vector<evaluation::RocPoint> roc(std::span<const signalgen::WaveformRecord> records, const SsaConfig& cfg,
                                             std::span<const double> thresholds) {
    std::vector<evaluation::RocPoint> curve;
    if (records.empty()) throw DatasetError("roc: dataset is empty");
    // Scores of the non-streaming policies do not depend on the threshold, so detect once.
    std::vector<DetectionSeries> cached;
    if (cfg.target_policy != TargetPolicy::Streaming) {
        for (const auto& rec : records) cached.push_back(detect(rec, cfg));
    }
    for (const double th : thresholds) {
        SsaConfig c = cfg;
        c.threshold_ratio = th;
        std::vector<evaluation::RecordOutcome> outcomes;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const DetectionSeries s = cached.empty() ? detect(records[i], c) : cached[i];
            const auto flags = flagged_ranges(s, th);
            outcomes.push_back(evaluation::score_record(records[i], flags, guard_samples(c)));
        }
        const auto rep = evaluation::summarize(outcomes);
        curve.push_back({th, rep.faults.tpr.value_or(0.0), rep.faults.fpr});
    }
    return curve;
}

}  // namespace pmufog::ssa

namespace pmufog::knn {

inline evaluation::Report evaluate(const KnnModel& model, std::span<const signalgen::WaveformRecord> records) {
    if (records.empty()) throw DatasetError("knn evaluate: dataset is empty");
    std::vector<evaluation::RecordOutcome> outcomes;
    const auto len = static_cast<std::int64_t>(model.config.window_len);
    for (const auto& rec : records) {
        std::vector<evaluation::FlaggedRange> flags;
        for (const auto& [w, c] : classify_record(model, rec)) {
            if (c.label == Label::Fault) {
                const auto b = static_cast<std::int64_t>(w.begin);
                flags.push_back({b, b + len});
            }
        }
        outcomes.push_back(evaluation::score_record(rec, flags, len));
    }
    return evaluation::summarize(outcomes);
}

}  // namespace pmufog::knn
