#pragma once

// Classifier metrics on a fixed labelled test cohort.

#include "driftgate/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace driftgate {

struct MetricBundle {
    double auc = 0.0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double entropy_threshold = 0.0;

    friend bool operator==(const MetricBundle&, const MetricBundle&) = default;

    void validate() const {
        auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
        if (!unit(auc) || !unit(accuracy) || !unit(sensitivity) || !unit(specificity))
            throw Error(ErrorCode::InvalidArgument, "auc/accuracy/sensitivity/specificity must lie in [0, 1]");
        if (!std::isfinite(entropy_threshold) || entropy_threshold < 0.0)
            throw Error(ErrorCode::InvalidArgument, "entropy_threshold must be finite and nonnegative");
    }
};

struct ConfusionCounts {
    std::size_t true_positives = 0;
    std::size_t true_negatives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

struct ConfusionMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    ConfusionCounts counts;
};

inline ConfusionMetrics confusion_metrics(std::span<const int> predicted, std::span<const int> labels, int positive_class) {
    if (predicted.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "predictions and labels differ in length");
    if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == positive_class;
        const bool called = predicted[i] == positive_class;
        if (actual && called) ++c.true_positives;
        else if (actual) ++c.false_negatives;
        else if (called) ++c.false_positives;
        else ++c.true_negatives;
    }
    const std::size_t pos = c.true_positives + c.false_negatives;
    const std::size_t neg = c.true_negatives + c.false_positives;
    if (pos == 0 || neg == 0)
        throw Error(ErrorCode::MissingClass, "labels must contain both the positive and a negative class");
    ConfusionMetrics m;
    m.counts = c;
    m.sensitivity = static_cast<double>(c.true_positives) / static_cast<double>(pos);
    m.specificity = static_cast<double>(c.true_negatives) / static_cast<double>(neg);
    m.accuracy = static_cast<double>(c.true_positives + c.true_negatives) / static_cast<double>(labels.size());
    return m;
}

/// Mann-Whitney AUC from midranks: P(score_pos > score_neg) + 0.5 P(tie).
inline double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive_class) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (double s : scores)
        if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteInput, "AUC score is not finite");
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Ranks doubled so that midranks of tie groups stay integral.
    double rank_sum_x2 = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank_x2 = static_cast<double>(i + 1 + j); // (i+1) + j = first + last rank
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == positive_class) {
                rank_sum_x2 += midrank_x2;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw Error(ErrorCode::DegenerateLabels, "AUC needs at least one positive and one negative label");
    const double p = static_cast<double>(positives);
    const double u = rank_sum_x2 / 2.0 - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(negatives));
}

} // namespace driftgate
