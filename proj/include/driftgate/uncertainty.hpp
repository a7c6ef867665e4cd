#pragma once

// Monte Carlo replicate aggregation, predictive entropy, and entropy-threshold calibration
// against misclassification on a labelled cohort.

#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftgate {

inline constexpr double kRowSumTolerance = 1e-6;

/// Checks every replicate row (entries in [0,1], sum within kRowSumTolerance of 1) and
/// renormalizes the accepted rows to sum exactly to 1 up to rounding.
inline Matrix normalized_replicates(Matrix replicates) {
    if (replicates.rows() < 1) throw Error(ErrorCode::EmptyInput, "no replicate rows");
    if (replicates.cols() < 2) throw Error(ErrorCode::InvalidProbabilityRow, "need at least 2 classes");
    for (Eigen::Index r = 0; r < replicates.rows(); ++r) {
        auto row = replicates.row(r);
        if (!row.allFinite() || (row.array() < 0.0).any() || (row.array() > 1.0).any())
            throw Error(ErrorCode::InvalidProbabilityRow,
                        "replicate " + std::to_string(r) + " has an entry outside [0, 1]");
        const double sum = row.sum();
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            throw Error(ErrorCode::InvalidProbabilityRow,
                        "replicate " + std::to_string(r) + " sums to " + std::to_string(sum));
        row /= sum;
    }
    return replicates;
}

/// Replicate probabilities per sample: R x C per id (R replicates, C classes).
struct McPredictionSet {
    std::vector<std::string> ids;
    std::vector<Matrix> replicates;
    std::vector<std::optional<int>> labels;

    std::size_t size() const { return ids.size(); }

    /// Validates shapes and normalizes every replicate matrix in place.
    void validate() {
        if (replicates.size() != ids.size() || labels.size() != ids.size())
            throw Error(ErrorCode::DimensionMismatch, "ids, replicates and labels differ in length");
        std::optional<Eigen::Index> classes;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            try {
                replicates[i] = normalized_replicates(std::move(replicates[i]));
            } catch (const Error& e) {
                throw Error(e.code(), "id " + ids[i] + ": " + e.what());
            }
            if (!classes) classes = replicates[i].cols();
            if (replicates[i].cols() != *classes)
                throw Error(ErrorCode::DimensionMismatch, "id " + ids[i] + " has a different class count");
            if (labels[i] && (*labels[i] < 0 || *labels[i] >= *classes))
                throw Error(ErrorCode::InvalidArgument, "id " + ids[i] + " has an out-of-range label");
        }
    }
};

struct UncertaintySummary {
    std::string id;
    Vector mean_probs;
    double entropy = 0.0;
    int predicted_class = 0;
};

namespace detail {

/// Order-independent sum: the terms are sorted before accumulation.
inline double sorted_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

} // namespace detail

/// Shannon entropy of a probability vector, with 0 ln 0 = 0. log_base e gives nats.
inline double entropy(const Eigen::Ref<const Vector>& probs, double log_base = std::numbers::e) {
    if (!(log_base > 0.0) || log_base == 1.0 || !std::isfinite(log_base))
        throw Error(ErrorCode::InvalidArgument, "entropy log base must be positive and not 1");
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(probs.size()));
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
        const double p = probs(c);
        if (p > 0.0) terms.push_back(-p * std::log(p));
    }
    const double nats = std::max(0.0, detail::sorted_sum(std::move(terms)));
    return log_base == std::numbers::e ? nats : nats / std::log(log_base);
}

/// Mean class probabilities over replicates, their entropy and the argmax class
/// (ties go to the lower class index).
inline UncertaintySummary summarize(const Matrix& replicates, double log_base = std::numbers::e) {
    const Matrix rows = normalized_replicates(replicates);
    const auto r = static_cast<double>(rows.rows());
    UncertaintySummary s;
    s.mean_probs.resize(rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        std::vector<double> column(rows.col(c).data(), rows.col(c).data() + rows.rows());
        s.mean_probs(c) = detail::sorted_sum(std::move(column)) / r;
    }
    s.mean_probs /= s.mean_probs.sum();
    s.entropy = entropy(s.mean_probs, log_base);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.mean_probs.size(); ++c)
        if (s.mean_probs(c) > s.mean_probs(best)) best = c;
    s.predicted_class = static_cast<int>(best);
    return s;
}

inline std::vector<UncertaintySummary> summarize_all(const McPredictionSet& set, double log_base = std::numbers::e) {
    std::vector<UncertaintySummary> out(set.size());
    parallel_chunks(out.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = summarize(set.replicates[i], log_base);
            out[i].id = set.ids[i];
        }
    }, 64);
    return out;
}

// ---------------------------------------------------------------------------
// ROC of a score against a binary "positive" flag.

/// One operating point: samples with score >= threshold are called positive.
struct RocPoint {
    double false_positive_rate = 0.0;
    double true_positive_rate = 0.0;
    double threshold = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
};

struct RocCurve {
    std::vector<RocPoint> points; // ascending threshold; first is (1,1), last is (0,0)
    double auc = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Threshold strictly between two adjacent distinct scores a < b.
inline double midpoint_threshold(double a, double b) {
    const double mid = a + (b - a) / 2.0;
    return mid > a ? mid : b;
}

/// Empirical ROC swept over -inf, the midpoints of sorted distinct scores, and +inf.
/// The AUC is the trapezoidal area, which equals the tie-adjusted Mann-Whitney statistic.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size())
        throw Error(ErrorCode::DimensionMismatch, "scores and flags differ in length");
    RocCurve curve;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw Error(ErrorCode::NonFiniteInput, "ROC score is not finite");
        positive[i] ? ++curve.positives : ++curve.negatives;
    }
    if (curve.positives == 0 || curve.negatives == 0)
        throw Error(ErrorCode::DegenerateLabels, "ROC needs at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk distinct scores from the highest down; after consuming a score group, everything
    // at or above it is called positive.
    const auto P = static_cast<double>(curve.positives);
    const auto N = static_cast<double>(curve.negatives);
    auto point = [&](std::size_t tp, std::size_t fp, double threshold) {
        return RocPoint{static_cast<double>(fp) / N, static_cast<double>(tp) / P, threshold, tp, fp};
    };
    std::vector<RocPoint> descending;
    descending.push_back(point(0, 0, std::numeric_limits<double>::infinity()));
    std::size_t tp = 0, fp = 0;
    std::size_t i = order.size();
    while (i > 0) {
        const double score = scores[order[i - 1]];
        while (i > 0 && scores[order[i - 1]] == score) {
            positive[order[i - 1]] ? ++tp : ++fp;
            --i;
        }
        const double threshold = i > 0 ? midpoint_threshold(scores[order[i - 1]], score)
                                        : -std::numeric_limits<double>::infinity();
        descending.push_back(point(tp, fp, threshold));
    }
    curve.points.assign(descending.rbegin(), descending.rend());

    double area = 0.0;
    for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
        const auto& a = curve.points[k];
        const auto& b = curve.points[k + 1];
        area += static_cast<double>(a.false_positives - b.false_positives) *
                static_cast<double>(a.true_positives + b.true_positives);
    }
    curve.auc = area / (2.0 * P * N);
    return curve;
}

/// ROC of entropy as a detector of misclassification (positive = predicted_class != label).
inline RocCurve misclassification_roc(std::span<const UncertaintySummary> summaries, std::span<const int> labels) {
    if (summaries.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "every summary needs a label");
    std::vector<double> scores;
    std::vector<bool> misclassified;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        scores.push_back(summaries[i].entropy);
        misclassified.push_back(summaries[i].predicted_class != labels[i]);
    }
    try {
        return roc_curve(scores, misclassified);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateLabels)
            throw Error(ErrorCode::DegenerateLabels, "predictions are all correct or all incorrect");
        throw;
    }
}

/// Youden statistic J = TPR - FPR of a point, as an exact integer numerator over P*N.
inline std::int64_t youden_numerator(const RocPoint& p, const RocCurve& curve) {
    return static_cast<std::int64_t>(p.true_positives) * static_cast<std::int64_t>(curve.negatives) -
           static_cast<std::int64_t>(p.false_positives) * static_cast<std::int64_t>(curve.positives);
}

/// Threshold maximizing Youden's J; among ties the smallest threshold. Can be -inf when
/// no threshold beats J = 0.
inline double youden_threshold(const RocCurve& curve) {
    if (curve.points.empty() || curve.positives == 0 || curve.negatives == 0)
        throw Error(ErrorCode::InvalidArgument, "ROC curve is empty or degenerate");
    const RocPoint* best = &curve.points.front();
    std::int64_t best_j = youden_numerator(*best, curve);
    // Points ascend by threshold, so the first maximum is the smallest threshold.
    for (const auto& p : curve.points) {
        const std::int64_t j = youden_numerator(p, curve);
        if (j > best_j) {
            best = &p;
            best_j = j;
        }
    }
    return best->threshold;
}

inline double youden_index(const RocCurve& curve, double threshold) {
    for (const auto& p : curve.points)
        if (p.threshold == threshold) return p.true_positive_rate - p.false_positive_rate;
    throw Error(ErrorCode::InvalidArgument, "threshold is not a point of the curve");
}

/// Result of calibrating the entropy gate on a labelled cohort.
struct EntropyCalibration {
    double threshold = 0.0; // usable gate value, never negative
    double youden_j = 0.0;
    double roc_auc = 0.0;
    std::size_t cohort_size = 0;
    std::size_t misclassified = 0;
};

inline EntropyCalibration calibrate_entropy_threshold(std::span<const UncertaintySummary> summaries,
                                                      std::span<const int> labels) {
    const RocCurve curve = misclassification_roc(summaries, labels);
    const double tau = youden_threshold(curve);
    EntropyCalibration cal;
    cal.youden_j = youden_index(curve, tau);
    // Entropy is nonnegative and the gate is strict, so a -inf optimum gates exactly like 0.
    cal.threshold = std::max(tau, 0.0);
    cal.roc_auc = curve.auc;
    cal.cohort_size = summaries.size();
    cal.misclassified = curve.positives;
    return cal;
}

} // namespace driftgate
