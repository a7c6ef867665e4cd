#pragma once

// Reference feature distribution of the base cohort and per-sample distances to it.

#include "driftgate/error.hpp"
#include "driftgate/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace driftgate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Per-sample feature vectors, one row per (id, fold) pair.
struct FeatureMatrix {
    std::vector<std::string> ids;
    Matrix data; // N x D
    std::optional<std::vector<int>> fold_tags;

    std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
    int fold_of(std::size_t row) const { return fold_tags ? (*fold_tags)[row] : 0; }

    /// Checks shape consistency, finiteness and (id, fold) uniqueness.
    void validate() const {
        if (ids.size() != rows())
            throw Error(ErrorCode::DimensionMismatch, "id count does not match row count");
        if (fold_tags && fold_tags->size() != rows())
            throw Error(ErrorCode::DimensionMismatch, "fold tag count does not match row count");
        if (rows() > 0 && dim() == 0)
            throw Error(ErrorCode::DimensionMismatch, "feature dimension must be at least 1");
        if (!data.allFinite())
            throw Error(ErrorCode::NonFiniteInput, "feature matrix contains NaN or Inf");
        std::set<std::pair<std::string, int>> seen;
        for (std::size_t i = 0; i < rows(); ++i) {
            if (!seen.emplace(ids[i], fold_of(i)).second)
                throw Error(ErrorCode::InvalidArgument,
                            "duplicate (id, fold) pair: " + ids[i] + ", " + std::to_string(fold_of(i)));
        }
    }
};

struct ReferenceStats {
    Vector mean;
    Matrix covariance;
    Matrix inv_covariance; // (covariance + epsilon * I)^-1
    double regularization_epsilon = 0.0;
    std::size_t sample_count = 0;

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

struct DistanceTriple {
    double euclidean = 0.0;
    double cosine = 0.0;
    double mahalanobis = 0.0;

    friend bool operator==(const DistanceTriple&, const DistanceTriple&) = default;
};

inline constexpr double kDefaultEpsilonScale = 1e-6;

/// Mean, N-1 sample covariance and the inverse of covariance + eps*I, where
/// eps = epsilon_scale * trace(covariance) / D.
inline ReferenceStats compute_reference_stats(const Matrix& data, double epsilon_scale = kDefaultEpsilonScale) {
    if (!(epsilon_scale >= 0.0) || !std::isfinite(epsilon_scale))
        throw Error(ErrorCode::InvalidArgument, "epsilon_scale must be finite and nonnegative");
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (n < 2) throw Error(ErrorCode::EmptyInput, "reference statistics need at least 2 rows");
    if (d < 1) throw Error(ErrorCode::DimensionMismatch, "feature dimension must be at least 1");
    if (!data.allFinite()) throw Error(ErrorCode::NonFiniteInput, "feature matrix contains NaN or Inf");

    ReferenceStats stats;
    stats.sample_count = static_cast<std::size_t>(n);
    stats.mean = data.colwise().mean().transpose();

    Matrix centered = data.rowwise() - stats.mean.transpose();
    Matrix cov = Matrix::Zero(d, d);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    stats.covariance = std::move(cov);

    stats.regularization_epsilon = epsilon_scale * stats.covariance.trace() / static_cast<double>(d);
    Matrix regularized = stats.covariance;
    regularized.diagonal().array() += stats.regularization_epsilon;

    Eigen::LLT<Matrix> llt(regularized);
    bool singular = llt.info() != Eigen::Success;
    if (!singular) {
        // Pivots that are tiny relative to the matrix or to the raw data magnitude mean the
        // factorization only succeeded on rounding noise.
        const Vector pivots = llt.matrixLLT().diagonal().array().square();
        const double max_diag = regularized.diagonal().maxCoeff();
        const double magnitude = data.array().square().colwise().mean().maxCoeff();
        const double min_pivot = pivots.minCoeff();
        singular = !(min_pivot > 1e-14 * max_diag) || !(min_pivot > 1e-24 * magnitude);
    }
    if (singular)
        throw Error(ErrorCode::SingularCovariance,
                    "covariance + eps*I is not positive definite (degenerate features?)");

    Matrix inv = llt.solve(Matrix::Identity(d, d));
    stats.inv_covariance = 0.5 * (inv + inv.transpose());
    return stats;
}

inline ReferenceStats compute_reference_stats(const FeatureMatrix& base, double epsilon_scale = kDefaultEpsilonScale) {
    base.validate();
    return compute_reference_stats(base.data, epsilon_scale);
}

inline DistanceTriple distance_triple(const Eigen::Ref<const Vector>& x, const ReferenceStats& stats) {
    if (static_cast<std::size_t>(x.size()) != stats.dim())
        throw Error(ErrorCode::DimensionMismatch, "query dimension does not match reference statistics");
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "query vector contains NaN or Inf");
    const double x_norm = x.norm();
    const double mean_norm = stats.mean.norm();
    if (x_norm == 0.0 || mean_norm == 0.0)
        throw Error(ErrorCode::ZeroVector, "cosine similarity undefined for a zero vector");

    const Vector diff = x - stats.mean;
    DistanceTriple t;
    t.euclidean = diff.norm();
    t.cosine = std::clamp(x.dot(stats.mean) / (x_norm * mean_norm), -1.0, 1.0);
    t.mahalanobis = std::sqrt(std::max(0.0, diff.dot(stats.inv_covariance * diff)));
    return t;
}

/// distance_triple for every row of `rows`. Rows are processed in blocks so the quadratic
/// form becomes a matrix product; blocks are spread across worker threads.
inline std::vector<DistanceTriple> distance_triples(const Matrix& rows, const ReferenceStats& stats) {
    if (static_cast<std::size_t>(rows.cols()) != stats.dim() && rows.rows() > 0)
        throw Error(ErrorCode::DimensionMismatch, "query dimension does not match reference statistics");
    if (!rows.allFinite()) throw Error(ErrorCode::NonFiniteInput, "query rows contain NaN or Inf");
    const double mean_norm = stats.mean.norm();
    if (rows.rows() > 0 && mean_norm == 0.0)
        throw Error(ErrorCode::ZeroVector, "cosine similarity undefined for a zero mean vector");

    std::vector<DistanceTriple> out(static_cast<std::size_t>(rows.rows()));
    // Block boundaries are fixed multiples of kBlock, so results do not depend on the thread count.
    constexpr std::size_t kBlock = 256;
    const std::size_t n = out.size();
    parallel_chunks((n + kBlock - 1) / kBlock, [&](std::size_t first_block, std::size_t last_block) {
        for (std::size_t blk = first_block; blk < last_block; ++blk) {
            const std::size_t b = blk * kBlock;
            const auto count = static_cast<Eigen::Index>(std::min(kBlock, n - b));
            const auto block = rows.middleRows(static_cast<Eigen::Index>(b), count);
            const Matrix diff = block.rowwise() - stats.mean.transpose();
            const Vector quad = (diff * stats.inv_covariance).cwiseProduct(diff).rowwise().sum();
            const Vector dots = block * stats.mean;
            for (Eigen::Index r = 0; r < count; ++r) {
                const double x_norm = block.row(r).norm();
                if (x_norm == 0.0)
                    throw Error(ErrorCode::ZeroVector, "cosine similarity undefined for a zero vector");
                DistanceTriple& t = out[b + static_cast<std::size_t>(r)];
                t.euclidean = diff.row(r).norm();
                t.cosine = std::clamp(dots(r) / (x_norm * mean_norm), -1.0, 1.0);
                t.mahalanobis = std::sqrt(std::max(0.0, quad(r)));
            }
        }
    }, 1);
    return out;
}

/// Linear-interpolation percentile at rank p/100 * (n-1) of the sorted values.
inline double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty list");
    if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "percentile input is not finite");
    std::sort(sorted.begin(), sorted.end());
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Stage-1 part of a gate set: the three feature thresholds and how they were obtained.
struct FeatureGates {
    double euclidean_threshold = 0.0;
    double cosine_threshold = 0.0;
    double mahalanobis_threshold = 0.0;
    double pct_euclidean = 80.0;
    double pct_cosine = 20.0;
    double pct_mahalanobis = 80.0;
    std::size_t cohort_size = 0;
};

inline FeatureGates calibrate_feature_gates(std::span<const DistanceTriple> base_triples, double pct_euclidean = 80.0,
                                            double pct_cosine = 20.0, double pct_mahalanobis = 80.0) {
    if (base_triples.empty()) throw Error(ErrorCode::EmptyInput, "no base distances to calibrate on");
    std::vector<double> euclid, cosine, mahal;
    euclid.reserve(base_triples.size());
    cosine.reserve(base_triples.size());
    mahal.reserve(base_triples.size());
    for (const auto& t : base_triples) {
        euclid.push_back(t.euclidean);
        cosine.push_back(t.cosine);
        mahal.push_back(t.mahalanobis);
    }
    FeatureGates g;
    g.euclidean_threshold = percentile(euclid, pct_euclidean);
    g.cosine_threshold = percentile(cosine, pct_cosine);
    g.mahalanobis_threshold = percentile(mahal, pct_mahalanobis);
    g.pct_euclidean = pct_euclidean;
    g.pct_cosine = pct_cosine;
    g.pct_mahalanobis = pct_mahalanobis;
    g.cohort_size = base_triples.size();
    return g;
}

/// Component-wise mean of per-fold triples.
inline DistanceTriple aggregate_over_folds(std::span<const DistanceTriple> per_fold) {
    if (per_fold.empty()) throw Error(ErrorCode::EmptyInput, "no per-fold distances to aggregate");
    // Sorting each component first makes the floating-point sum independent of input order.
    std::vector<double> e, c, m;
    for (const auto& t : per_fold) {
        e.push_back(t.euclidean);
        c.push_back(t.cosine);
        m.push_back(t.mahalanobis);
    }
    auto mean = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    return {mean(e), mean(c), mean(m)};
}

// ---------------------------------------------------------------------------
// Fold handling

enum class FoldAggregation { MeanOfDistances, MeanOfFeatures };

/// Reference statistics per fold checkpoint. Under MeanOfFeatures there is a single
/// entry (fold 0) built from per-id averaged features.
struct ReferenceModel {
    FoldAggregation aggregation = FoldAggregation::MeanOfDistances;
    std::map<int, ReferenceStats> folds;
};

/// Distances for each distinct id, in order of first appearance.
struct ImageDistances {
    std::vector<std::string> ids;
    std::vector<DistanceTriple> triples;
};

namespace detail {

inline std::vector<std::string> ids_in_order(const FeatureMatrix& m, std::unordered_map<std::string, std::size_t>& index) {
    std::vector<std::string> order;
    for (const auto& id : m.ids) {
        if (index.emplace(id, order.size()).second) order.push_back(id);
    }
    return order;
}

/// Per-id average of the rows belonging to that id (across folds).
inline FeatureMatrix average_features(const FeatureMatrix& m) {
    std::unordered_map<std::string, std::size_t> index;
    FeatureMatrix out;
    out.ids = ids_in_order(m, index);
    out.data = Matrix::Zero(static_cast<Eigen::Index>(out.ids.size()), m.data.cols());
    std::vector<double> counts(out.ids.size(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const std::size_t k = index.at(m.ids[i]);
        out.data.row(static_cast<Eigen::Index>(k)) += m.data.row(static_cast<Eigen::Index>(i));
        counts[k] += 1.0;
    }
    for (std::size_t k = 0; k < counts.size(); ++k) out.data.row(static_cast<Eigen::Index>(k)) /= counts[k];
    return out;
}

inline Matrix rows_of(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.data.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = m.data.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

} // namespace detail

inline ReferenceModel build_reference(const FeatureMatrix& base, double epsilon_scale = kDefaultEpsilonScale,
                                      FoldAggregation aggregation = FoldAggregation::MeanOfDistances) {
    base.validate();
    ReferenceModel model;
    model.aggregation = aggregation;
    if (aggregation == FoldAggregation::MeanOfFeatures) {
        model.folds.emplace(0, compute_reference_stats(detail::average_features(base).data, epsilon_scale));
        return model;
    }
    std::map<int, std::vector<std::size_t>> by_fold;
    for (std::size_t i = 0; i < base.rows(); ++i) by_fold[base.fold_of(i)].push_back(i);
    for (const auto& [fold, rows] : by_fold)
        model.folds.emplace(fold, compute_reference_stats(detail::rows_of(base, rows), epsilon_scale));
    return model;
}

/// Per-id distance triples: each row against its own fold's statistics, averaged over folds
/// (or, under MeanOfFeatures, per-id averaged features against the pooled statistics).
inline ImageDistances image_distances(const FeatureMatrix& samples, const ReferenceModel& model) {
    samples.validate();
    ImageDistances out;
    if (samples.rows() == 0) return out;
    if (model.folds.empty()) throw Error(ErrorCode::EmptyInput, "reference model has no folds");

    if (model.aggregation == FoldAggregation::MeanOfFeatures) {
        FeatureMatrix averaged = detail::average_features(samples);
        out.ids = std::move(averaged.ids);
        out.triples = distance_triples(averaged.data, model.folds.begin()->second);
        return out;
    }

    std::map<int, std::vector<std::size_t>> by_fold;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        const int fold = samples.fold_of(i);
        if (!model.folds.contains(fold))
            throw Error(ErrorCode::UnknownFold, "no reference statistics for fold " + std::to_string(fold));
        by_fold[fold].push_back(i);
    }
    std::vector<DistanceTriple> per_row(samples.rows());
    for (const auto& [fold, rows] : by_fold) {
        auto triples = distance_triples(detail::rows_of(samples, rows), model.folds.at(fold));
        for (std::size_t r = 0; r < rows.size(); ++r) per_row[rows[r]] = triples[r];
    }

    std::unordered_map<std::string, std::size_t> index;
    out.ids = detail::ids_in_order(samples, index);
    std::vector<std::vector<DistanceTriple>> grouped(out.ids.size());
    for (std::size_t i = 0; i < samples.rows(); ++i) grouped[index.at(samples.ids[i])].push_back(per_row[i]);
    out.triples.reserve(grouped.size());
    for (const auto& g : grouped) out.triples.push_back(aggregate_over_folds(g));
    return out;
}

} // namespace driftgate
