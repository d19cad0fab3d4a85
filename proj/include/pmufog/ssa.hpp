#pragma once

// Singular spectrum analysis change-point detection.
//
// A target window of N samples is embedded into an M x K Hankel trajectory
// matrix (K = N - M + 1) and decomposed; its first l left singular vectors span
// the "normal" signal subspace. A test matrix of q - p + 1 lagged vectors taken
// further along the series is scored by the summed squared distance of its
// columns from that subspace. A sudden rise of the score marks a change point.
//
// Sample indices in this header are 0-based. A window at offset n uses the
// target x[n .. n+N) and the test columns starting at x[n+p .. n+q]; the score
// is attributed to sample n + M + q, the first sample after the test span.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmufog/errors.hpp"
#include "pmufog/signalgen.hpp"

namespace pmufog::ssa {

enum class TargetPolicy {
    /// Target anchored at the start of the record (batch evaluation).
    FixedStart,
    /// Target moves with the test window at every offset.
    Sliding,
    /// Target follows the stream but only re-anchors once no anomaly has been
    /// flagged for a full target+test span, so it always describes a normal condition.
    Streaming,
};

struct SsaConfig {
    int N = 36;
    int M = 18;
    int p = 18;
    int q = 30;
    int l = 6;
    /// Anomaly when distance > threshold_ratio * baseline_distance.
    double threshold_ratio = 3.0;
    std::optional<double> baseline_distance;
    TargetPolicy target_policy = TargetPolicy::FixedStart;

    int K() const { return N - M + 1; }
    int test_columns() const { return q - p + 1; }
    /// Offset from the window start to the sample a score is attributed to.
    int lookahead() const { return M + q; }
};

inline void validate(const SsaConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("ssa config: ") + what);
    };
    require(c.l >= 1, "l must be >= 1");
    require(c.l < c.M, "l must be < M");
    require(c.M <= c.N, "M must be <= N");
    require(c.p >= 0, "p must be >= 0");
    require(c.p <= c.q, "p must be <= q");
    require(c.K() >= 1, "K = N - M + 1 must be >= 1");
    require(std::isfinite(c.threshold_ratio) && c.threshold_ratio >= 0, "threshold_ratio must be >= 0");
    if (c.baseline_distance) {
        require(std::isfinite(*c.baseline_distance) && *c.baseline_distance > 0, "baseline_distance must be > 0");
    }
}

struct TrajectoryMatrix {
    Eigen::MatrixXd values;
    bool hankel = true;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// Column j is the lag vector (x_j, ..., x_{j+M-1}).
inline TrajectoryMatrix embed(std::span<const double> series, int M) {
    if (M < 1) throw DimensionError("embed: window length M must be >= 1");
    const auto n = static_cast<Eigen::Index>(series.size());
    if (n < M) {
        throw DimensionError("embed: series of length " + std::to_string(n) + " is shorter than M = " +
                             std::to_string(M));
    }
    const Eigen::Index k = n - M + 1;
    TrajectoryMatrix X;
    X.values.resize(M, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < M; ++i) X.values(i, j) = series[static_cast<std::size_t>(i + j)];
    }
    return X;
}

struct EigenTriple {
    double sigma = 0.0;
    Eigen::VectorXd left;   // length M
    Eigen::VectorXd right;  // length K
};

using EigenTriples = std::vector<EigenTriple>;

/// Non-zero eigentriples in decreasing singular-value order. Singular values
/// below max(M, K) * eps * sigma_1 are treated as zero.
inline EigenTriples svd(const TrajectoryMatrix& X) {
    EigenTriples out;
    if (X.rows() == 0 || X.cols() == 0 || X.values.isZero(0.0)) return out;
    Eigen::JacobiSVD<Eigen::MatrixXd> dec(X.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = dec.singularValues();
    const double tol =
        static_cast<double>(std::max(X.rows(), X.cols())) * std::numeric_limits<double>::epsilon() * s(0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (!(s(i) > tol)) break;
        out.push_back({s(i), dec.matrixU().col(i), dec.matrixV().col(i)});
    }
    return out;
}

namespace detail {

// The three branches of diagonal averaging for an L x K matrix with L <= K,
// written with 1-based i as in the usual statement of the formula.
inline double leading_branch(const Eigen::MatrixXd& x, Eigen::Index i) {
    double s = 0.0;
    for (Eigen::Index j = 1; j <= i; ++j) s += x(j - 1, i - j);
    return s / static_cast<double>(i);
}

inline double middle_branch(const Eigen::MatrixXd& x, Eigen::Index i) {
    const Eigen::Index L = x.rows();
    double s = 0.0;
    for (Eigen::Index j = 1; j <= L; ++j) s += x(j - 1, i - j);
    return s / static_cast<double>(L);
}

inline double trailing_branch(const Eigen::MatrixXd& x, Eigen::Index i) {
    const Eigen::Index L = x.rows();
    const Eigen::Index K = x.cols();
    const Eigen::Index N = L + K - 1;
    double s = 0.0;
    for (Eigen::Index j = i - K + 1; j <= N - K + 1; ++j) s += x(j - 1, i - j);
    return s / static_cast<double>(N - i + 1);
}

}  // namespace detail

/// Hankelization: averages each anti-diagonal of X into one sample of a series
/// of length rows + cols - 1.
inline std::vector<double> diagonal_average(const Eigen::MatrixXd& X) {
    if (X.rows() == 0 || X.cols() == 0) return {};
    if (X.rows() > X.cols()) return diagonal_average(X.transpose());
    const Eigen::Index L = X.rows();
    const Eigen::Index K = X.cols();
    const Eigen::Index N = L + K - 1;
    std::vector<double> out(static_cast<std::size_t>(N));
    for (Eigen::Index i = 1; i <= N; ++i) {
        double v = 0.0;
        if (i < L) {
            v = detail::leading_branch(X, i);
        } else if (i <= K) {
            v = detail::middle_branch(X, i);
        } else {
            v = detail::trailing_branch(X, i);
        }
        out[static_cast<std::size_t>(i - 1)] = v;
    }
    return out;
}

/// Sum of the selected elementary matrices sigma_i U_i V_i^T (0-based indices).
inline Eigen::MatrixXd elementary_sum(const EigenTriples& triples, std::span<const std::size_t> indices) {
    if (triples.empty()) return {};
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(triples.front().left.size(), triples.front().right.size());
    for (const std::size_t i : indices) {
        if (i >= triples.size()) {
            throw DimensionError("reconstruct: eigentriple index " + std::to_string(i) + " out of range (d = " +
                                 std::to_string(triples.size()) + ")");
        }
        X.noalias() += triples[i].sigma * triples[i].left * triples[i].right.transpose();
    }
    return X;
}

/// Series of length N rebuilt from the eigentriples in `indices`.
inline std::vector<double> reconstruct(const EigenTriples& triples, std::span<const std::size_t> indices,
                                       std::size_t N) {
    if (indices.empty() || triples.empty()) return std::vector<double>(N, 0.0);
    const auto expected =
        static_cast<std::size_t>(triples.front().left.size() + triples.front().right.size() - 1);
    if (expected != N) {
        throw DimensionError("reconstruct: eigentriples describe a series of length " + std::to_string(expected) +
                             ", not " + std::to_string(N));
    }
    return diagonal_average(elementary_sum(triples, indices));
}

/// Convenience overload selecting the first `count` eigentriples.
inline std::vector<double> reconstruct_leading(const EigenTriples& triples, std::size_t count, std::size_t N) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min(count, triples.size()); ++i) idx.push_back(i);
    return reconstruct(triples, idx, N);
}

/// Left singular vectors (M x l', l' = min(l, rank)) of the target window starting at n.
inline Eigen::MatrixXd build_target(std::span<const double> series, std::size_t n, const SsaConfig& cfg) {
    validate(cfg);
    const auto need = n + static_cast<std::size_t>(cfg.N);
    if (series.size() < need) {
        throw WindowError("build_target: need " + std::to_string(need) + " samples, have " +
                          std::to_string(series.size()));
    }
    const EigenTriples triples = svd(embed(series.subspan(n, static_cast<std::size_t>(cfg.N)), cfg.M));
    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(cfg.l), triples.size());
    Eigen::MatrixXd U(cfg.M, static_cast<Eigen::Index>(keep));
    for (std::size_t i = 0; i < keep; ++i) U.col(static_cast<Eigen::Index>(i)) = triples[i].left;
    return U;
}

/// M x (q - p + 1) matrix of lag vectors starting at n+p, ..., n+q.
inline Eigen::MatrixXd build_test(std::span<const double> series, std::size_t n, const SsaConfig& cfg) {
    validate(cfg);
    const auto need = n + static_cast<std::size_t>(cfg.q + cfg.M);
    if (series.size() < need) {
        throw WindowError("build_test: need " + std::to_string(need) + " samples, have " +
                          std::to_string(series.size()));
    }
    Eigen::MatrixXd T(cfg.M, cfg.test_columns());
    for (int c = 0; c < cfg.test_columns(); ++c) {
        const std::size_t start = n + static_cast<std::size_t>(cfg.p + c);
        for (int r = 0; r < cfg.M; ++r) T(r, c) = series[start + static_cast<std::size_t>(r)];
    }
    return T;
}

/// Sum over test columns of x'x - x'UU'x.
inline double distance(const Eigen::MatrixXd& test, const Eigen::MatrixXd& U) {
    if (U.cols() > 0 && U.rows() != test.rows()) {
        throw DimensionError("distance: basis has " + std::to_string(U.rows()) + " rows, test matrix has " +
                             std::to_string(test.rows()));
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < test.cols(); ++c) {
        const auto x = test.col(c);
        const double energy = x.squaredNorm();
        const double captured = U.cols() > 0 ? (U.transpose() * x).squaredNorm() : 0.0;
        total += energy - captured;
    }
    return total;
}

struct DetectionPoint {
    std::size_t time_index = 0;
    double time_s = 0.0;
    double distance = 0.0;    // raw score
    double normalized = 0.0;  // distance / baseline
    bool is_anomaly = false;
};

struct DetectionSeries {
    std::vector<DetectionPoint> points;
    double baseline = 0.0;
    double threshold_ratio = 0.0;
    /// Wall-clock cost per window; not part of the deterministic output.
    double mean_window_seconds = 0.0;
};

/// Number of windows a record of `length` samples yields.
inline std::size_t window_count(std::size_t length, const SsaConfig& cfg) {
    const auto span = static_cast<std::size_t>(std::max(cfg.N, cfg.lookahead() + 1));
    return length < span ? 0 : length - span + 1;
}

namespace detail {

// Raw scores for every window. When `threshold` is set, the Streaming policy
// uses it to decide which windows are confirmed normal.
inline std::vector<double> raw_scores(std::span<const double> x, const SsaConfig& cfg,
                                      std::optional<double> threshold) {
    const std::size_t windows = window_count(x.size(), cfg);
    if (windows == 0) {
        throw WindowError("detect: record of " + std::to_string(x.size()) + " samples is shorter than the " +
                          std::to_string(std::max(cfg.N, cfg.lookahead() + 1)) + "-sample detection span");
    }
    std::vector<double> scores(windows);
    const auto holdoff = static_cast<std::ptrdiff_t>(cfg.N + cfg.lookahead());
    std::size_t anchor = 0;
    std::optional<std::size_t> cached_anchor;
    std::ptrdiff_t last_flag = -holdoff - 1;
    Eigen::MatrixXd U;
    for (std::size_t n = 0; n < windows; ++n) {
        const std::size_t target = cfg.target_policy == TargetPolicy::Sliding ? n : anchor;
        if (!cached_anchor || *cached_anchor != target) {
            U = build_target(x, target, cfg);
            cached_anchor = target;
        }
        const double d = distance(build_test(x, n, cfg), U);
        scores[n] = d;
        if (cfg.target_policy == TargetPolicy::Streaming) {
            const auto sn = static_cast<std::ptrdiff_t>(n);
            if (threshold && d > *threshold) last_flag = sn;
            if (sn - last_flag > holdoff) anchor = n;
        }
    }
    return scores;
}

}  // namespace detail

/// Mean raw distance over every window of every normal record.
inline double calibrate_baseline(std::span<const signalgen::WaveformRecord> normal, const SsaConfig& cfg) {
    validate(cfg);
    if (normal.empty()) throw DatasetError("calibrate_baseline: at least one normal record is required");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& rec : normal) {
        for (const double d : detail::raw_scores(rec.voltages, cfg, std::nullopt)) {
            sum += d;
            ++count;
        }
    }
    double mean = sum / static_cast<double>(count);
    if (mean < 1e-15) {
        std::clog << "warning: ssa baseline distance " << mean
                  << " is below 1e-15; the normal records are effectively noiseless\n";
    }
    return std::max(mean, 1e-300);
}

inline DetectionSeries detect(const signalgen::WaveformRecord& record, const SsaConfig& cfg) {
    validate(cfg);
    if (!cfg.baseline_distance) throw CalibrationError("detect: ssa baseline_distance is not calibrated");
    const double baseline = *cfg.baseline_distance;
    const double threshold = cfg.threshold_ratio * baseline;

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> scores = detail::raw_scores(record.voltages, cfg, threshold);
    const auto t1 = std::chrono::steady_clock::now();

    DetectionSeries out;
    out.baseline = baseline;
    out.threshold_ratio = cfg.threshold_ratio;
    out.points.reserve(scores.size());
    for (std::size_t n = 0; n < scores.size(); ++n) {
        DetectionPoint pt;
        pt.time_index = n + static_cast<std::size_t>(cfg.lookahead());
        pt.time_s = record.timestamps[pt.time_index];
        pt.distance = scores[n];
        pt.normalized = scores[n] / baseline;
        pt.is_anomaly = scores[n] > threshold;
        out.points.push_back(pt);
    }
    out.mean_window_seconds =
        std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(std::max<std::size_t>(1, scores.size()));
    return out;
}

}  // namespace pmufog::ssa
