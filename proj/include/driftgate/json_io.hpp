#pragma once

// JSON artifacts: run config, gates file (reference statistics + thresholds), eligibility
// reports, metric bundles, verdicts, synthetic specs and loop reports.
// Every to_json has a matching from_json; objects with unexpected keys are rejected.

#include "driftgate/config.hpp"
#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/gating.hpp"
#include "driftgate/integration_monitor.hpp"
#include "driftgate/perf_metrics.hpp"
#include "driftgate/synthetic.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace driftgate {

using json = nlohmann::json;

inline constexpr const char* kGatesFormat = "driftgate.gates/1";

namespace jsonio {

inline void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, std::string(what) + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
T get(const json& j, const char* key, const char* what) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string(what) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string(what) + "." + key + ": " + e.what());
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out, const char* what) {
    if (j.contains(key)) out = get<T>(j, key, what);
}

template <typename T>
json optional_value(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key, const char* what) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<T>(j, key, what);
}

inline json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j, const char* what) {
    std::vector<double> raw;
    try {
        raw = j.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string(what) + ": " + e.what());
    }
    return Eigen::Map<Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const char* what) {
    if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], what);
        if (row.size() != cols) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " is ragged");
        m.row(r) = row.transpose();
    }
    return m;
}

} // namespace jsonio

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << j.dump(2) << '\n';
}

// --- RunConfig --------------------------------------------------------------

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"percentiles", {{"euclidean", c.pct_euclidean}, {"cosine", c.pct_cosine}, {"mahalanobis", c.pct_mahalanobis}}},
             {"epsilon_scale", c.epsilon_scale},
             {"entropy_log_base", c.entropy_log_base == std::numbers::e ? json("e") : json(c.entropy_log_base)},
             {"safeguard_tolerance_pct", c.safeguard_tolerance_pct},
             {"positive_class", c.positive_class},
             {"fold_aggregation", to_string(c.fold_aggregation)}};
}

inline void from_json(const json& j, RunConfig& c) {
    constexpr const char* what = "config";
    jsonio::require_keys(j, {"percentiles", "epsilon_scale", "entropy_log_base", "safeguard_tolerance_pct",
                             "positive_class", "fold_aggregation"}, what);
    c = RunConfig{};
    if (j.contains("percentiles")) {
        const json& p = j.at("percentiles");
        jsonio::require_keys(p, {"euclidean", "cosine", "mahalanobis"}, "config.percentiles");
        jsonio::get_if(p, "euclidean", c.pct_euclidean, "config.percentiles");
        jsonio::get_if(p, "cosine", c.pct_cosine, "config.percentiles");
        jsonio::get_if(p, "mahalanobis", c.pct_mahalanobis, "config.percentiles");
    }
    jsonio::get_if(j, "epsilon_scale", c.epsilon_scale, what);
    if (j.contains("entropy_log_base")) {
        const json& b = j.at("entropy_log_base");
        if (b.is_string()) {
            if (b.get<std::string>() != "e") throw Error(ErrorCode::InvalidConfig, "entropy_log_base must be \"e\" or a number");
            c.entropy_log_base = std::numbers::e;
        } else {
            c.entropy_log_base = jsonio::get<double>(j, "entropy_log_base", what);
        }
    }
    jsonio::get_if(j, "safeguard_tolerance_pct", c.safeguard_tolerance_pct, what);
    jsonio::get_if(j, "positive_class", c.positive_class, what);
    if (j.contains("fold_aggregation"))
        c.fold_aggregation = fold_aggregation_from_string(jsonio::get<std::string>(j, "fold_aggregation", what));
    c.validate();
}

inline RunConfig load_config(const std::string& path) {
    try {
        return read_json_file(path).get<RunConfig>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

// --- Reference statistics and gates -------------------------------------------

inline void to_json(json& j, const ReferenceStats& s) {
    j = json{{"mean", jsonio::vector_to_json(s.mean)},
             {"covariance", jsonio::matrix_to_json(s.covariance)},
             {"inv_covariance", jsonio::matrix_to_json(s.inv_covariance)},
             {"regularization_epsilon", s.regularization_epsilon},
             {"sample_count", s.sample_count}};
}

inline void from_json(const json& j, ReferenceStats& s) {
    constexpr const char* what = "reference stats";
    jsonio::require_keys(j, {"fold", "mean", "covariance", "inv_covariance", "regularization_epsilon", "sample_count"}, what);
    s.mean = jsonio::vector_from_json(j.at("mean"), "mean");
    s.covariance = jsonio::matrix_from_json(j.at("covariance"), "covariance");
    s.inv_covariance = jsonio::matrix_from_json(j.at("inv_covariance"), "inv_covariance");
    s.regularization_epsilon = jsonio::get<double>(j, "regularization_epsilon", what);
    s.sample_count = jsonio::get<std::size_t>(j, "sample_count", what);
    const auto d = s.mean.size();
    if (s.covariance.rows() != d || s.covariance.cols() != d || s.inv_covariance.rows() != d ||
        s.inv_covariance.cols() != d)
        throw Error(ErrorCode::DimensionMismatch, "reference stats matrices do not match the mean length");
}

inline void to_json(json& j, const ReferenceModel& m) {
    json folds = json::array();
    for (const auto& [fold, stats] : m.folds) {
        json f = stats;
        f["fold"] = fold;
        folds.push_back(std::move(f));
    }
    j = json{{"fold_aggregation", to_string(m.aggregation)}, {"folds", std::move(folds)}};
}

inline void from_json(const json& j, ReferenceModel& m) {
    jsonio::require_keys(j, {"fold_aggregation", "folds"}, "reference");
    m.aggregation = fold_aggregation_from_string(jsonio::get<std::string>(j, "fold_aggregation", "reference"));
    m.folds.clear();
    for (const auto& f : j.at("folds")) {
        const int fold = jsonio::get<int>(f, "fold", "reference fold");
        if (!m.folds.emplace(fold, f.get<ReferenceStats>()).second)
            throw Error(ErrorCode::ParseError, "duplicate reference fold " + std::to_string(fold));
    }
}

inline void to_json(json& j, const GateProvenance& p) {
    j = json{{"pct_euclidean", p.pct_euclidean},
             {"pct_cosine", p.pct_cosine},
             {"pct_mahalanobis", p.pct_mahalanobis},
             {"base_cohort_size", p.base_cohort_size},
             {"test_cohort_size", jsonio::optional_value(p.test_cohort_size)},
             {"test_misclassified", jsonio::optional_value(p.test_misclassified)},
             {"roc_auc", jsonio::optional_value(p.roc_auc)},
             {"youden_j", jsonio::optional_value(p.youden_j)}};
}

inline void from_json(const json& j, GateProvenance& p) {
    constexpr const char* what = "provenance";
    jsonio::require_keys(j, {"pct_euclidean", "pct_cosine", "pct_mahalanobis", "base_cohort_size", "test_cohort_size",
                             "test_misclassified", "roc_auc", "youden_j"}, what);
    p.pct_euclidean = jsonio::get<double>(j, "pct_euclidean", what);
    p.pct_cosine = jsonio::get<double>(j, "pct_cosine", what);
    p.pct_mahalanobis = jsonio::get<double>(j, "pct_mahalanobis", what);
    p.base_cohort_size = jsonio::get<std::size_t>(j, "base_cohort_size", what);
    p.test_cohort_size = jsonio::get_optional<std::size_t>(j, "test_cohort_size", what);
    p.test_misclassified = jsonio::get_optional<std::size_t>(j, "test_misclassified", what);
    p.roc_auc = jsonio::get_optional<double>(j, "roc_auc", what);
    p.youden_j = jsonio::get_optional<double>(j, "youden_j", what);
}

inline void to_json(json& j, const GateSet& g) {
    j = json{{"euclidean_threshold", g.euclidean_threshold},
             {"cosine_threshold", g.cosine_threshold},
             {"mahalanobis_threshold", g.mahalanobis_threshold},
             {"entropy_threshold", jsonio::optional_value(g.entropy_threshold)},
             {"provenance", g.provenance}};
}

inline void from_json(const json& j, GateSet& g) {
    constexpr const char* what = "gates";
    jsonio::require_keys(j, {"euclidean_threshold", "cosine_threshold", "mahalanobis_threshold", "entropy_threshold",
                             "provenance"}, what);
    g.euclidean_threshold = jsonio::get<double>(j, "euclidean_threshold", what);
    g.cosine_threshold = jsonio::get<double>(j, "cosine_threshold", what);
    g.mahalanobis_threshold = jsonio::get<double>(j, "mahalanobis_threshold", what);
    g.entropy_threshold = jsonio::get_optional<double>(j, "entropy_threshold", what);
    if (j.contains("provenance")) g.provenance = j.at("provenance").get<GateProvenance>();
    g.validate();
}

/// Contents of gates.json: the config used at baseline, the reference model, and the gates.
struct GatesFile {
    RunConfig config;
    ReferenceModel reference;
    GateSet gates;
};

inline void to_json(json& j, const GatesFile& f) {
    j = json{{"format", kGatesFormat}, {"config", f.config}, {"reference", f.reference}, {"gates", f.gates}};
}

inline void from_json(const json& j, GatesFile& f) {
    jsonio::require_keys(j, {"format", "config", "reference", "gates"}, "gates file");
    if (jsonio::get<std::string>(j, "format", "gates file") != kGatesFormat)
        throw Error(ErrorCode::ParseError, "gates file format is not " + std::string(kGatesFormat));
    f.config = j.at("config").get<RunConfig>();
    f.reference = j.at("reference").get<ReferenceModel>();
    f.gates = j.at("gates").get<GateSet>();
}

// --- Reports and verdicts -------------------------------------------------------

inline void to_json(json& j, const DistanceTriple& t) {
    j = json{{"euclidean", t.euclidean}, {"cosine", t.cosine}, {"mahalanobis", t.mahalanobis}};
}

inline void from_json(const json& j, DistanceTriple& t) {
    jsonio::require_keys(j, {"euclidean", "cosine", "mahalanobis"}, "distances");
    t.euclidean = jsonio::get<double>(j, "euclidean", "distances");
    t.cosine = jsonio::get<double>(j, "cosine", "distances");
    t.mahalanobis = jsonio::get<double>(j, "mahalanobis", "distances");
}

inline void to_json(json& j, const EligibilityReport& r) {
    j = json{{"id", r.id},
             {"distances", r.triple},
             {"entropy", r.entropy},
             {"pass_euclidean", r.pass_euclidean},
             {"pass_cosine", r.pass_cosine},
             {"pass_mahalanobis", r.pass_mahalanobis},
             {"pass_entropy", r.pass_entropy},
             {"eligible", r.eligible},
             {"assigned_label", jsonio::optional_value(r.assigned_label)}};
}

inline void from_json(const json& j, EligibilityReport& r) {
    constexpr const char* what = "eligibility report";
    jsonio::require_keys(j, {"id", "distances", "entropy", "pass_euclidean", "pass_cosine", "pass_mahalanobis",
                             "pass_entropy", "eligible", "assigned_label"}, what);
    r.id = jsonio::get<std::string>(j, "id", what);
    r.triple = j.at("distances").get<DistanceTriple>();
    r.entropy = jsonio::get<double>(j, "entropy", what);
    r.pass_euclidean = jsonio::get<bool>(j, "pass_euclidean", what);
    r.pass_cosine = jsonio::get<bool>(j, "pass_cosine", what);
    r.pass_mahalanobis = jsonio::get<bool>(j, "pass_mahalanobis", what);
    r.pass_entropy = jsonio::get<bool>(j, "pass_entropy", what);
    r.eligible = jsonio::get<bool>(j, "eligible", what);
    r.assigned_label = jsonio::get_optional<int>(j, "assigned_label", what);
}

inline void to_json(json& j, const MetricBundle& m) {
    j = json{{"auc", m.auc},
             {"accuracy", m.accuracy},
             {"sensitivity", m.sensitivity},
             {"specificity", m.specificity},
             {"entropy_threshold", m.entropy_threshold}};
}

inline void from_json(const json& j, MetricBundle& m) {
    constexpr const char* what = "metrics";
    jsonio::require_keys(j, {"auc", "accuracy", "sensitivity", "specificity", "entropy_threshold"}, what);
    m.auc = jsonio::get<double>(j, "auc", what);
    m.accuracy = jsonio::get<double>(j, "accuracy", what);
    m.sensitivity = jsonio::get<double>(j, "sensitivity", what);
    m.specificity = jsonio::get<double>(j, "specificity", what);
    m.entropy_threshold = jsonio::get<double>(j, "entropy_threshold", what);
    m.validate();
}

inline void to_json(json& j, const MetricChanges& c) {
    j = json{{"auc", c.auc},
             {"accuracy", c.accuracy},
             {"sensitivity", c.sensitivity},
             {"specificity", c.specificity},
             {"entropy_threshold", c.entropy_threshold}};
}

inline void from_json(const json& j, MetricChanges& c) {
    constexpr const char* what = "changes";
    jsonio::require_keys(j, {"auc", "accuracy", "sensitivity", "specificity", "entropy_threshold"}, what);
    c.auc = jsonio::get<double>(j, "auc", what);
    c.accuracy = jsonio::get<double>(j, "accuracy", what);
    c.sensitivity = jsonio::get<double>(j, "sensitivity", what);
    c.specificity = jsonio::get<double>(j, "specificity", what);
    c.entropy_threshold = jsonio::get<double>(j, "entropy_threshold", what);
}

inline void to_json(json& j, const CriterionResult& r) {
    j = json{{"criterion", r.criterion},
             {"before", r.before},
             {"after", r.after},
             {"change_pct", r.change_pct},
             {"limit", r.limit == LimitKind::MaxDecrease ? "max_decrease_pct" : "max_increase_pct"},
             {"limit_pct", r.limit_pct},
             {"passed", r.passed},
             {"note", r.note}};
}

inline void from_json(const json& j, CriterionResult& r) {
    constexpr const char* what = "reason";
    jsonio::require_keys(j, {"criterion", "before", "after", "change_pct", "limit", "limit_pct", "passed", "note"}, what);
    r.criterion = jsonio::get<std::string>(j, "criterion", what);
    r.before = jsonio::get<double>(j, "before", what);
    r.after = jsonio::get<double>(j, "after", what);
    r.change_pct = jsonio::get<double>(j, "change_pct", what);
    const auto limit = jsonio::get<std::string>(j, "limit", what);
    if (limit != "max_decrease_pct" && limit != "max_increase_pct")
        throw Error(ErrorCode::ParseError, "reason.limit must be max_decrease_pct or max_increase_pct");
    r.limit = limit == "max_decrease_pct" ? LimitKind::MaxDecrease : LimitKind::MaxIncrease;
    r.limit_pct = jsonio::get<double>(j, "limit_pct", what);
    r.passed = jsonio::get<bool>(j, "passed", what);
    r.note = jsonio::get<std::string>(j, "note", what);
}

inline void to_json(json& j, const IntegrationVerdict& v) {
    j = json{{"image_id", v.image_id}, {"before", v.before}, {"after", v.after},
             {"changes", v.changes},   {"accepted", v.accepted}, {"reasons", v.reasons}};
}

inline void from_json(const json& j, IntegrationVerdict& v) {
    constexpr const char* what = "verdict";
    jsonio::require_keys(j, {"image_id", "before", "after", "changes", "accepted", "reasons"}, what);
    v.image_id = jsonio::get<std::string>(j, "image_id", what);
    v.before = j.at("before").get<MetricBundle>();
    v.after = j.at("after").get<MetricBundle>();
    v.changes = j.at("changes").get<MetricChanges>();
    v.accepted = jsonio::get<bool>(j, "accepted", what);
    v.reasons = j.at("reasons").get<std::vector<CriterionResult>>();
}

// --- Synthetic ----------------------------------------------------------------

inline void to_json(json& j, const SyntheticSpec& s) {
    j = json{{"seed", s.seed},
             {"dim", s.dim},
             {"n_base", s.n_base},
             {"n_test", s.n_test},
             {"n_candidates", s.n_candidates},
             {"class_means", {s.class_mean_0, s.class_mean_1}},
             {"class_cov_scale", s.class_cov_scale},
             {"correlation", s.correlation},
             {"drift_offset", s.drift_offset},
             {"drift_fraction", s.drift_fraction},
             {"positive_fraction", s.positive_fraction},
             {"label_noise", s.label_noise},
             {"mc_replicates", s.mc_replicates},
             {"mc_noise_scale", s.mc_noise_scale}};
}

inline void from_json(const json& j, SyntheticSpec& s) {
    constexpr const char* what = "spec";
    jsonio::require_keys(j, {"seed", "dim", "n_base", "n_test", "n_candidates", "class_means", "class_cov_scale",
                             "correlation", "drift_offset", "drift_fraction", "positive_fraction", "label_noise",
                             "mc_replicates", "mc_noise_scale"}, what);
    s = SyntheticSpec{};
    jsonio::get_if(j, "seed", s.seed, what);
    jsonio::get_if(j, "dim", s.dim, what);
    jsonio::get_if(j, "n_base", s.n_base, what);
    jsonio::get_if(j, "n_test", s.n_test, what);
    jsonio::get_if(j, "n_candidates", s.n_candidates, what);
    if (j.contains("class_means")) {
        const auto means = jsonio::get<std::vector<std::vector<double>>>(j, "class_means", what);
        if (means.size() != 2) throw Error(ErrorCode::InvalidConfig, "class_means must hold two vectors");
        s.class_mean_0 = means[0];
        s.class_mean_1 = means[1];
    }
    jsonio::get_if(j, "class_cov_scale", s.class_cov_scale, what);
    jsonio::get_if(j, "correlation", s.correlation, what);
    jsonio::get_if(j, "drift_offset", s.drift_offset, what);
    jsonio::get_if(j, "drift_fraction", s.drift_fraction, what);
    jsonio::get_if(j, "positive_fraction", s.positive_fraction, what);
    jsonio::get_if(j, "label_noise", s.label_noise, what);
    jsonio::get_if(j, "mc_replicates", s.mc_replicates, what);
    jsonio::get_if(j, "mc_noise_scale", s.mc_noise_scale, what);
    s.validate();
}

inline void to_json(json& j, const MonitorReport& r) {
    json candidates = json::array();
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        json c = r.candidates[i];
        c["in_distribution"] = static_cast<bool>(r.candidate_in_distribution[i]);
        candidates.push_back(std::move(c));
    }
    std::size_t eligible = 0, accepted = 0;
    for (const auto& c : r.candidates) eligible += c.eligible ? 1 : 0;
    for (const auto& v : r.verdicts) accepted += v.accepted ? 1 : 0;
    j = json{{"gates", r.gates},
             {"baseline", r.baseline},
             {"candidates", std::move(candidates)},
             {"verdicts", r.verdicts},
             {"summary", {{"candidates", r.candidates.size()}, {"eligible", eligible}, {"accepted", accepted}}}};
}

inline void from_json(const json& j, MonitorReport& r) {
    constexpr const char* what = "report";
    jsonio::require_keys(j, {"gates", "baseline", "candidates", "verdicts", "summary"}, what);
    r.gates = j.at("gates").get<GateSet>();
    r.baseline = j.at("baseline").get<MetricBundle>();
    r.candidates.clear();
    r.candidate_in_distribution.clear();
    for (json c : j.at("candidates")) {
        r.candidate_in_distribution.push_back(jsonio::get<bool>(c, "in_distribution", "candidate"));
        c.erase("in_distribution");
        r.candidates.push_back(c.get<EligibilityReport>());
    }
    r.verdicts = j.at("verdicts").get<std::vector<IntegrationVerdict>>();
}

} // namespace driftgate
