#pragma once

#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/integration_monitor.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace driftgate {

/// Calibration and safeguard settings shared by every stage.
struct RunConfig {
    double pct_euclidean = 80.0;
    double pct_cosine = 20.0;
    double pct_mahalanobis = 80.0;
    double epsilon_scale = kDefaultEpsilonScale;
    double entropy_log_base = std::numbers::e;
    double safeguard_tolerance_pct = kDefaultTolerancePct;
    int positive_class = 1;
    FoldAggregation fold_aggregation = FoldAggregation::MeanOfDistances;

    void validate() const {
        auto pct = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 100.0; };
        if (!pct(pct_euclidean) || !pct(pct_cosine) || !pct(pct_mahalanobis))
            throw Error(ErrorCode::InvalidConfig, "percentiles must lie in [0, 100]");
        if (!std::isfinite(epsilon_scale) || epsilon_scale < 0.0)
            throw Error(ErrorCode::InvalidConfig, "epsilon_scale must be finite and nonnegative");
        if (!std::isfinite(entropy_log_base) || entropy_log_base <= 0.0 || entropy_log_base == 1.0)
            throw Error(ErrorCode::InvalidConfig, "entropy_log_base must be positive and not 1");
        if (!std::isfinite(safeguard_tolerance_pct) || safeguard_tolerance_pct <= 0.0)
            throw Error(ErrorCode::InvalidConfig, "safeguard_tolerance_pct must be positive");
        if (positive_class < 0) throw Error(ErrorCode::InvalidConfig, "positive_class must be a class index");
    }
};

inline std::string to_string(FoldAggregation a) {
    return a == FoldAggregation::MeanOfDistances ? "mean-of-distances" : "mean-of-features";
}

inline FoldAggregation fold_aggregation_from_string(const std::string& s) {
    if (s == "mean-of-distances") return FoldAggregation::MeanOfDistances;
    if (s == "mean-of-features") return FoldAggregation::MeanOfFeatures;
    throw Error(ErrorCode::InvalidConfig, "unknown fold_aggregation '" + s + "'");
}

} // namespace driftgate
