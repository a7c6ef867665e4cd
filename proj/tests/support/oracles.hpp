#pragma once

// Brute-force reference computations used only by tests. Nothing here calls into the
// library's numerical paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

/// Two-pass covariance by direct double loop over the definition (N-1 denominator).
inline Rows covariance(const Rows& x) {
    const std::size_t n = x.size(), d = x[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& r : x)
        for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
    for (auto& m : mean) m /= static_cast<double>(n);
    Rows cov(d, std::vector<double>(d, 0.0));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            double s = 0.0;
            for (const auto& r : x) s += (r[a] - mean[a]) * (r[b] - mean[b]);
            cov[a][b] = s / static_cast<double>(n - 1);
        }
    return cov;
}

/// Gauss-Jordan inversion with partial pivoting.
inline Rows inverse(Rows a) {
    const std::size_t n = a.size();
    Rows inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("singular");
        std::swap(a[pivot], a[col]);
        std::swap(inv[pivot], inv[col]);
        const double p = a[col][col];
        for (std::size_t k = 0; k < n; ++k) {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (std::size_t k = 0; k < n; ++k) {
                a[r][k] -= f * a[col][k];
                inv[r][k] -= f * inv[col][k];
            }
        }
    }
    return inv;
}

/// (x - mu)^T M (x - mu) by triple loop.
inline double quadratic_form(const std::vector<double>& x, const std::vector<double>& mu, const Rows& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) s += (x[i] - mu[i]) * m[i][j] * (x[j] - mu[j]);
    return s;
}

inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(idx);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - (idx - static_cast<double>(lo))) + v[lo + 1] * (idx - static_cast<double>(lo));
}

/// P(score_pos > score_neg) + 0.5 P(tie) by looping over every pair.
inline double pair_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// Exhaustive Youden sweep: every candidate threshold (-inf, midpoints of distinct sorted
/// scores, +inf) evaluated by recounting; ties resolved toward the smallest threshold.
struct YoudenResult {
    double threshold;
    double j;
};

inline YoudenResult youden_sweep(const std::vector<double>& scores, const std::vector<bool>& positive) {
    std::vector<double> distinct = scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        double mid = distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0;
        if (!(mid > distinct[i])) mid = distinct[i + 1];
        candidates.push_back(mid);
    }
    candidates.push_back(std::numeric_limits<double>::infinity());

    std::int64_t P = 0, N = 0;
    for (bool p : positive) (p ? P : N) += 1;
    YoudenResult best{0.0, -2.0};
    std::int64_t best_num = std::numeric_limits<std::int64_t>::min();
    for (double t : candidates) {
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (positive[i] ? tp : fp) += 1;
        const std::int64_t num = tp * N - fp * P; // J * P * N
        if (num > best_num) {
            best_num = num;
            best = {t, static_cast<double>(tp) / P - static_cast<double>(fp) / N};
        }
    }
    return best;
}

/// Random scores with deliberate ties (values drawn from a small grid part of the time).
inline std::vector<double> tied_scores(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grid(0, 9);
    std::vector<double> s(n);
    for (auto& v : s) v = u(rng) < 0.5 ? grid(rng) / 10.0 : u(rng);
    return s;
}

} // namespace oracle
