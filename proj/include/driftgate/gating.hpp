#pragma once

// Eligibility of candidate samples: feature gates and the entropy gate combined.

#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/uncertainty.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace driftgate {

struct GateProvenance {
    double pct_euclidean = 80.0;
    double pct_cosine = 20.0;
    double pct_mahalanobis = 80.0;
    std::size_t base_cohort_size = 0;
    std::optional<std::size_t> test_cohort_size;
    std::optional<std::size_t> test_misclassified;
    std::optional<double> roc_auc;
    std::optional<double> youden_j;
};

struct GateSet {
    double euclidean_threshold = 0.0;
    double cosine_threshold = 0.0;
    double mahalanobis_threshold = 0.0;
    std::optional<double> entropy_threshold; // absent until the test cohort is calibrated
    GateProvenance provenance;

    static GateSet from_feature_gates(const FeatureGates& g) {
        GateSet s;
        s.euclidean_threshold = g.euclidean_threshold;
        s.cosine_threshold = g.cosine_threshold;
        s.mahalanobis_threshold = g.mahalanobis_threshold;
        s.provenance.pct_euclidean = g.pct_euclidean;
        s.provenance.pct_cosine = g.pct_cosine;
        s.provenance.pct_mahalanobis = g.pct_mahalanobis;
        s.provenance.base_cohort_size = g.cohort_size;
        return s;
    }

    void apply(const EntropyCalibration& cal) {
        entropy_threshold = cal.threshold;
        provenance.test_cohort_size = cal.cohort_size;
        provenance.test_misclassified = cal.misclassified;
        provenance.roc_auc = cal.roc_auc;
        provenance.youden_j = cal.youden_j;
    }

    void validate() const {
        if (!std::isfinite(euclidean_threshold) || !std::isfinite(cosine_threshold) ||
            !std::isfinite(mahalanobis_threshold) || (entropy_threshold && !std::isfinite(*entropy_threshold)))
            throw Error(ErrorCode::NonFiniteInput, "gate thresholds must be finite");
    }
};

struct EligibilityReport {
    std::string id;
    DistanceTriple triple;
    double entropy = 0.0;
    bool pass_euclidean = false;
    bool pass_cosine = false;
    bool pass_mahalanobis = false;
    bool pass_entropy = false;
    bool eligible = false;
    std::optional<int> assigned_label; // predicted class, only for eligible candidates
};

/// Distances pass at or inside their gate; entropy must be strictly below its threshold.
inline EligibilityReport evaluate_candidate(const DistanceTriple& triple, const UncertaintySummary& summary,
                                            const GateSet& gates) {
    if (!gates.entropy_threshold)
        throw Error(ErrorCode::InvalidArgument, "gate set has no calibrated entropy threshold");
    EligibilityReport r;
    r.id = summary.id;
    r.triple = triple;
    r.entropy = summary.entropy;
    r.pass_euclidean = triple.euclidean <= gates.euclidean_threshold;
    r.pass_cosine = triple.cosine >= gates.cosine_threshold;
    r.pass_mahalanobis = triple.mahalanobis <= gates.mahalanobis_threshold;
    r.pass_entropy = summary.entropy < *gates.entropy_threshold;
    r.eligible = r.pass_euclidean && r.pass_cosine && r.pass_mahalanobis && r.pass_entropy;
    if (r.eligible) r.assigned_label = summary.predicted_class;
    return r;
}

inline std::vector<EligibilityReport>
batch_evaluate(std::span<const std::pair<DistanceTriple, UncertaintySummary>> candidates, const GateSet& gates) {
    std::vector<EligibilityReport> out;
    out.reserve(candidates.size());
    for (const auto& [triple, summary] : candidates) out.push_back(evaluate_candidate(triple, summary, gates));
    return out;
}

inline std::size_t eligible_count(std::span<const EligibilityReport> reports) {
    std::size_t n = 0;
    for (const auto& r : reports) n += r.eligible ? 1 : 0;
    return n;
}

} // namespace driftgate
