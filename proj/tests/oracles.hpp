#pragma once

// Reference implementations written directly from the defining formulas.
// Slow and straightforward on purpose; the library code is checked against these.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Anti-diagonal means of an L x K matrix, by enumerating every (i, j) with i + j = s.
inline std::vector<double> hankelize(const Eigen::MatrixXd& X) {
    const auto L = X.rows(), K = X.cols();
    std::vector<double> out(static_cast<std::size_t>(L + K - 1), 0.0);
    for (Eigen::Index s = 0; s < L + K - 1; ++s) {
        long double sum = 0;
        int count = 0;
        for (Eigen::Index i = 0; i < L; ++i) {
            const Eigen::Index j = s - i;
            if (j < 0 || j >= K) continue;
            sum += X(i, j);
            ++count;
        }
        out[static_cast<std::size_t>(s)] = static_cast<double>(sum / count);
    }
    return out;
}

/// Sum over columns of |x - U U^T x|^2, with the projection formed explicitly.
inline double residual_distance(const Eigen::MatrixXd& test, const Eigen::MatrixXd& U) {
    long double total = 0;
    for (Eigen::Index c = 0; c < test.cols(); ++c) {
        std::vector<long double> proj(static_cast<std::size_t>(test.rows()), 0);
        for (Eigen::Index k = 0; k < U.cols(); ++k) {
            long double coef = 0;
            for (Eigen::Index r = 0; r < test.rows(); ++r) coef += static_cast<long double>(U(r, k)) * test(r, c);
            for (Eigen::Index r = 0; r < test.rows(); ++r) proj[static_cast<std::size_t>(r)] += coef * U(r, k);
        }
        for (Eigen::Index r = 0; r < test.rows(); ++r) {
            const long double e = test(r, c) - proj[static_cast<std::size_t>(r)];
            total += e * e;
        }
    }
    return static_cast<double>(total);
}

/// The sixteen window features, evaluated term by term in extended precision.
inline std::vector<double> features(const std::vector<double>& d, double alpha) {
    using ld = long double;
    const std::size_t n = d.size();
    const ld N = static_cast<ld>(n);
    auto a = [&](std::size_t j) { return std::max<ld>(std::fabs(static_cast<ld>(d[j])), 1e-12L); };

    ld mean = 0;
    for (const double x : d) mean += x;
    mean /= N;

    ld inv = 0, sd = 0, md = 0, m4 = 0, f5 = 0, f6 = 0, ren = 0, f8 = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const ld dev = d[j] - mean;
        inv += 1.0L / a(j);
        sd += dev * dev;
        md += std::fabs(dev);
        m4 += dev * dev * dev * dev;
        f5 += std::log(a(j) * a(j));
        f6 -= a(j) * a(j) * std::log(a(j) * a(j));
        ren += std::pow(a(j), static_cast<ld>(alpha));
        f8 += std::fabs(static_cast<ld>(d[j]));
    }
    std::vector<double> f(16);
    f[0] = static_cast<double>(N / inv);
    f[1] = static_cast<double>(std::sqrt(sd / (N - 1)));
    f[2] = static_cast<double>(md / N);
    f[3] = sd > 0 ? static_cast<double>((m4 / N) / ((sd / N) * (sd / N))) : 0.0;
    f[4] = static_cast<double>(f5);
    f[5] = static_cast<double>(f6);
    f[6] = static_cast<double>(std::log(ren) / (1 - static_cast<ld>(alpha)));
    f[7] = static_cast<double>(std::sqrt(f8 / N));
    f[8] = *std::max_element(d.begin(), d.end());
    f[9] = f[8] - *std::min_element(d.begin(), d.end());

    auto mag = [&](std::size_t k) {
        std::complex<ld> acc = 0;
        for (std::size_t j = 1; j <= n; ++j) {
            const ld angle = -2.0L * std::numbers::pi_v<ld> * static_cast<ld>(k) * static_cast<ld>(j) / N;
            acc += static_cast<ld>(d[j - 1]) * std::complex<ld>(std::cos(angle), std::sin(angle));
        }
        return std::abs(acc);
    };
    ld harm = 0;
    for (std::size_t k = 2; k <= n; ++k) harm += mag(k) * mag(k);
    f[10] = static_cast<double>(std::sqrt(harm) / std::max<ld>(mag(1), 1e-12L));
    for (std::size_t h = 1; h <= 5; ++h) f[10 + h] = static_cast<double>(mag(h));
    return f;
}

/// Sort every training point by distance, vote among the first k; ties favor fault.
/// Returns (is_fault, margin).
inline std::pair<bool, double> knn_vote(const std::vector<std::vector<double>>& points,
                                        const std::vector<bool>& is_fault, const std::vector<double>& query, int k) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < query.size(); ++j) s += (points[i][j] - query[j]) * (points[i][j] - query[j]);
        order.emplace_back(s, i);
    }
    std::sort(order.begin(), order.end());
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), points.size());
    int fault = 0;
    for (std::size_t i = 0; i < kk; ++i) fault += is_fault[order[i].second] ? 1 : 0;
    const int normal = static_cast<int>(kk) - fault;
    return {fault >= normal, static_cast<double>(std::abs(fault - normal)) / static_cast<double>(kk)};
}

/// Per-PMU PDC wait from WAN delays; nullopt marks a missing measurement.
inline std::vector<std::optional<double>> pdc_waits(const std::vector<double>& t_wan, double t_to) {
    const double theta = *std::max_element(t_wan.begin(), t_wan.end());
    std::vector<std::optional<double>> w(t_wan.size());
    for (std::size_t i = 0; i < t_wan.size(); ++i) {
        if (theta < t_to) {
            w[i] = theta - t_wan[i];
        } else if (t_wan[i] <= t_to) {
            w[i] = t_to - t_wan[i];
        }
    }
    return w;
}

}  // namespace oracle
