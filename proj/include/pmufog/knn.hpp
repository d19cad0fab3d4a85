#pragma once

// Window features and k-nearest-neighbour classification of PMU voltage windows.
//
// Sixteen features are computed per window:
//   F1 harmonic mean        F2 sample standard deviation   F3 mean absolute deviation
//   F4 kurtosis             F5 log-energy entropy           F6 Shannon entropy
//   F7 Renyi entropy        F8 sqrt(mean |d|)               F9 peak
//   F10 peak-to-peak        F11 THD                         F12..F16 |D1|..|D5|
// Logs, reciprocals and fractional powers act on max(|d|, 1e-12) so every
// feature is finite for finite input. F8 is deliberately sqrt(mean|d|), not the
// conventional root-mean-square.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmufog/errors.hpp"
#include "pmufog/signalgen.hpp"

namespace pmufog::knn {

inline constexpr std::size_t kFeatureCount = 16;
inline constexpr double kLogFloor = 1e-12;

/// f[0] is F1, ..., f[15] is F16.
using FeatureVector = std::array<double, kFeatureCount>;

/// D_k = sum_{j=1..N} d_j exp(-i 2 pi k j / N), k = 0..N-1.
inline std::vector<std::complex<double>> dft(std::span<const double> window) {
    const std::size_t n = window.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 1; j <= n; ++j) {
            // Reduce k*j mod n first so the angle stays small and exact for integer multiples.
            const auto m = static_cast<double>((k * j) % n);
            const double angle = -2.0 * std::numbers::pi * m / static_cast<double>(n);
            acc += window[j - 1] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

inline FeatureVector extract_features(std::span<const double> d, double renyi_alpha = 0.4) {
    const std::size_t n = d.size();
    if (n < 2) throw DimensionError("extract_features: window length must be >= 2");
    const double N = static_cast<double>(n);
    FeatureVector f{};

    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / N;
    double inv_sum = 0.0, abs_dev = 0.0, m2 = 0.0, m4 = 0.0;
    double log_energy = 0.0, shannon = 0.0, renyi_sum = 0.0, abs_sum = 0.0;
    for (const double x : d) {
        const double a = std::max(std::abs(x), kLogFloor);
        const double a2 = a * a;
        const double dev = x - mean;
        inv_sum += 1.0 / a;
        abs_dev += std::abs(dev);
        m2 += dev * dev;
        m4 += dev * dev * dev * dev;
        log_energy += std::log(a2);
        shannon -= a2 * std::log(a2);
        renyi_sum += std::pow(a, renyi_alpha);
        abs_sum += std::abs(x);
    }
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());

    f[0] = N / inv_sum;
    f[1] = std::sqrt(m2 / (N - 1.0));
    f[2] = abs_dev / N;
    f[3] = m2 > 0.0 ? (m4 / N) / ((m2 / N) * (m2 / N)) : 0.0;
    f[4] = log_energy;
    f[5] = shannon;
    f[6] = std::log(renyi_sum) / (1.0 - renyi_alpha);
    f[7] = std::sqrt(abs_sum / N);
    f[8] = *hi;
    f[9] = *hi - *lo;

    // Spectrum is periodic in k, so D_N is the DC bin.
    const auto spectrum = dft(d);
    auto mag = [&](std::size_t k) { return std::abs(spectrum[k % n]); };
    double harmonic_energy = 0.0;
    for (std::size_t k = 2; k <= n; ++k) harmonic_energy += mag(k) * mag(k);
    f[10] = std::sqrt(harmonic_energy) / std::max(mag(1), kLogFloor);
    for (std::size_t h = 1; h <= 5; ++h) f[10 + h] = mag(h);
    return f;
}

enum class Label { Normal = 0, Fault = 1 };

inline std::string_view to_string(Label l) { return l == Label::Fault ? "fault" : "normal"; }

struct KnnConfig {
    int k = 5;
    std::size_t window_len = 10;
    /// 1-based feature indices.
    std::vector<int> selected_features{6, 8, 9, 10};
    bool standardize = true;
    double renyi_alpha = 0.4;
};

inline void validate(const KnnConfig& c) {
    if (c.k < 1 || c.k % 2 == 0) throw ConfigError("knn config: k must be odd and >= 1");
    if (c.window_len < 2) throw ConfigError("knn config: window_len must be >= 2");
    if (c.selected_features.empty()) throw ConfigError("knn config: selected_features must not be empty");
    for (const int i : c.selected_features) {
        if (i < 1 || i > static_cast<int>(kFeatureCount)) {
            throw ConfigError("knn config: feature index " + std::to_string(i) + " outside 1..16");
        }
    }
}

struct KnnModel {
    KnnConfig config;
    /// Standardized selected-feature vectors, one per training window.
    std::vector<std::vector<double>> points;
    std::vector<Label> labels;
    std::vector<double> mean;
    std::vector<double> scale;
};

/// A record split into non-overlapping windows of window_len samples.
struct Window {
    std::size_t begin = 0;  // first sample index
    Label truth = Label::Normal;
};

/// Window is labeled fault iff it overlaps any labeled interval.
inline std::vector<Window> segment(const signalgen::WaveformRecord& rec, std::size_t window_len) {
    std::vector<Window> out;
    const double fs = rec.sample_rate_hz();
    for (std::size_t b = 0; b + window_len <= rec.size(); b += window_len) {
        Window w{b, Label::Normal};
        const auto lo = static_cast<std::int64_t>(b);
        const auto hi = static_cast<std::int64_t>(b + window_len);
        for (const auto& lab : rec.labels) {
            const auto iv = signalgen::to_indices(lab, fs);
            if (lo < iv.end && hi > iv.begin) w.truth = Label::Fault;
        }
        out.push_back(w);
    }
    return out;
}

inline std::vector<double> select(const FeatureVector& f, const std::vector<int>& indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (const int i : indices) out.push_back(f[static_cast<std::size_t>(i - 1)]);
    return out;
}

inline KnnModel train(std::span<const signalgen::WaveformRecord> records, const KnnConfig& cfg) {
    validate(cfg);
    KnnModel model;
    model.config = cfg;
    for (const auto& rec : records) {
        for (const Window& w : segment(rec, cfg.window_len)) {
            const auto window = std::span<const double>(rec.voltages).subspan(w.begin, cfg.window_len);
            model.points.push_back(select(extract_features(window, cfg.renyi_alpha), cfg.selected_features));
            model.labels.push_back(w.truth);
        }
    }
    const auto faults = std::count(model.labels.begin(), model.labels.end(), Label::Fault);
    if (faults == 0 || faults == static_cast<std::ptrdiff_t>(model.labels.size())) {
        throw DatasetError("knn train: training windows must contain both normal and fault labels");
    }

    const std::size_t dim = cfg.selected_features.size();
    model.mean.assign(dim, 0.0);
    model.scale.assign(dim, 1.0);
    if (cfg.standardize) {
        const double count = static_cast<double>(model.points.size());
        for (const auto& p : model.points) {
            for (std::size_t i = 0; i < dim; ++i) model.mean[i] += p[i];
        }
        for (auto& m : model.mean) m /= count;
        std::vector<double> var(dim, 0.0);
        for (const auto& p : model.points) {
            for (std::size_t i = 0; i < dim; ++i) var[i] += (p[i] - model.mean[i]) * (p[i] - model.mean[i]);
        }
        for (std::size_t i = 0; i < dim; ++i) {
            const double sd = std::sqrt(var[i] / count);
            if (sd > 0.0 && std::isfinite(sd)) {
                model.scale[i] = sd;
            } else {
                std::clog << "warning: knn feature F" << cfg.selected_features[i]
                          << " has zero variance in the training set; using scale 1\n";
            }
        }
        for (auto& p : model.points) {
            for (std::size_t i = 0; i < dim; ++i) p[i] = (p[i] - model.mean[i]) / model.scale[i];
        }
    }
    return model;
}

struct Classification {
    Label label = Label::Normal;
    /// (majority votes - minority votes) / k
    double margin = 0.0;
};

/// Majority vote among the k nearest standardized training points; ties go to fault.
inline Classification classify_point(const KnnModel& model, std::span<const double> z) {
    const std::size_t total = model.points.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.config.k), total);
    std::vector<std::pair<double, std::size_t>> dist(total);
    for (std::size_t i = 0; i < total; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double diff = model.points[i][j] - z[j];
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t fault_votes = 0;
    for (std::size_t i = 0; i < k; ++i) fault_votes += model.labels[dist[i].second] == Label::Fault ? 1 : 0;
    const std::size_t normal_votes = k - fault_votes;
    Classification c;
    c.label = fault_votes >= normal_votes ? Label::Fault : Label::Normal;
    c.margin = static_cast<double>(std::max(fault_votes, normal_votes) - std::min(fault_votes, normal_votes)) /
               static_cast<double>(k);
    return c;
}

inline std::vector<double> standardize(const KnnModel& model, const FeatureVector& f) {
    std::vector<double> z = select(f, model.config.selected_features);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - model.mean[i]) / model.scale[i];
    return z;
}

inline Classification classify(const KnnModel& model, std::span<const double> window) {
    if (model.points.empty()) throw CalibrationError("knn classify: model is not trained");
    return classify_point(model, standardize(model, extract_features(window, model.config.renyi_alpha)));
}

/// Per-window decisions for a whole record.
inline std::vector<std::pair<Window, Classification>> classify_record(const KnnModel& model,
                                                                      const signalgen::WaveformRecord& rec) {
    std::vector<std::pair<Window, Classification>> out;
    for (const Window& w : segment(rec, model.config.window_len)) {
        const auto window = std::span<const double>(rec.voltages).subspan(w.begin, model.config.window_len);
        out.emplace_back(w, classify(model, window));
    }
    return out;
}

}  // namespace pmufog::knn
