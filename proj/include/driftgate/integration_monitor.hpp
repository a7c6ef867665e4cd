#pragma once

// Accept/reject verdict for a model update, comparing retrained metrics with the baseline.

#include "driftgate/error.hpp"
#include "driftgate/perf_metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace driftgate {

inline constexpr double kDefaultTolerancePct = 5.0;

/// (x - y) / y * 100.
inline double percent_change(double x, double y) {
    if (y == 0.0) throw Error(ErrorCode::ZeroBaseline, "percent change against a zero baseline");
    return (x - y) / y * 100.0;
}

struct MetricChanges {
    double auc = 0.0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double entropy_threshold = 0.0;
};

enum class LimitKind { MaxDecrease, MaxIncrease };

struct CriterionResult {
    std::string criterion;
    double before = 0.0;
    double after = 0.0;
    double change_pct = 0.0;
    LimitKind limit = LimitKind::MaxDecrease;
    double limit_pct = 0.0;
    bool passed = true;
    std::string note;
};

struct IntegrationVerdict {
    std::string image_id;
    MetricBundle before;
    MetricBundle after;
    MetricChanges changes;
    bool accepted = true;
    std::vector<CriterionResult> reasons;
};

/// Performance metrics may drop by at most tolerance_pct; the entropy threshold may rise by
/// at most tolerance_pct. Changes exactly at the limit pass.
inline IntegrationVerdict render_verdict(const MetricBundle& before, const MetricBundle& after,
                                         double tolerance_pct = kDefaultTolerancePct, std::string image_id = {}) {
    if (!(tolerance_pct > 0.0) || !std::isfinite(tolerance_pct))
        throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    before.validate();
    after.validate();

    IntegrationVerdict v;
    v.image_id = std::move(image_id);
    v.before = before;
    v.after = after;

    auto performance = [&](const char* name, double b, double a, double& change) {
        change = percent_change(a, b);
        CriterionResult r{name, b, a, change, LimitKind::MaxDecrease, tolerance_pct, change >= -tolerance_pct, {}};
        if (!r.passed) r.note = "decreased by more than the tolerance";
        v.reasons.push_back(std::move(r));
    };
    performance("auc", before.auc, after.auc, v.changes.auc);
    performance("accuracy", before.accuracy, after.accuracy, v.changes.accuracy);
    performance("sensitivity", before.sensitivity, after.sensitivity, v.changes.sensitivity);
    performance("specificity", before.specificity, after.specificity, v.changes.specificity);

    v.changes.entropy_threshold = percent_change(after.entropy_threshold, before.entropy_threshold);
    CriterionResult ent{"entropy_threshold", before.entropy_threshold, after.entropy_threshold,
                        v.changes.entropy_threshold, LimitKind::MaxIncrease, tolerance_pct,
                        v.changes.entropy_threshold <= tolerance_pct, {}};
    if (!ent.passed) ent.note = "increased by more than the tolerance";
    else if (v.changes.entropy_threshold < -tolerance_pct) ent.note = "large decrease (allowed)";
    v.reasons.push_back(std::move(ent));

    for (const auto& r : v.reasons) v.accepted = v.accepted && r.passed;
    return v;
}

} // namespace driftgate
