#pragma once

// Synthetic cohorts and a closed-form toy learner that exercise the full monitoring loop
// without an external model.
//
// Random numbers: every cohort and every Monte Carlo replicate set draws from its own
// std::mt19937_64 stream, seeded with splitmix64(seed ^ (stream_tag * 0x9E3779B97F4A7C15 + index)).
// Uniforms take the top 53 bits of a draw; normals come from the Box-Muller transform
// (both outputs used, cosine first). Nothing depends on std::*_distribution, whose output
// is implementation-defined.

#include "driftgate/config.hpp"
#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/gating.hpp"
#include "driftgate/integration_monitor.hpp"
#include "driftgate/perf_metrics.hpp"
#include "driftgate/uncertainty.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace driftgate {

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum class StreamTag : std::uint64_t { Base = 1, Test = 2, Candidates = 3, TestMc = 4, CandidateMc = 5 };

inline std::uint64_t stream_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
    return splitmix64(seed ^ (static_cast<std::uint64_t>(tag) * 0x9E3779B97F4A7C15ULL + index));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (spare_) {
            const double z = *spare_;
            spare_.reset();
            return z;
        }
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        return r * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Cohort generation

struct SyntheticSpec {
    std::uint64_t seed = 20240917;
    std::size_t dim = 8;
    std::size_t n_base = 2000;
    std::size_t n_test = 1000;
    std::size_t n_candidates = 40;
    std::vector<double> class_mean_0; // empty = 2.55 on every coordinate
    std::vector<double> class_mean_1; // empty = 3.45 on every coordinate
    double class_cov_scale = 1.0;
    double correlation = 0.0;  // covariance(i, j) = scale * correlation^|i-j|
    std::vector<double> drift_offset; // empty = 5 sigma on every coordinate
    double drift_fraction = 0.5;
    double positive_fraction = 0.5;
    double label_noise = 0.0;
    std::size_t mc_replicates = 250;
    double mc_noise_scale = 0.5;

    Vector mean(int cls) const {
        const auto& given = cls == 0 ? class_mean_0 : class_mean_1;
        if (given.empty()) return Vector::Constant(static_cast<Eigen::Index>(dim), cls == 0 ? 2.55 : 3.45);
        return Eigen::Map<const Vector>(given.data(), static_cast<Eigen::Index>(given.size()));
    }

    Vector drift() const {
        if (drift_offset.empty())
            return Vector::Constant(static_cast<Eigen::Index>(dim), 5.0 * std::sqrt(class_cov_scale));
        return Eigen::Map<const Vector>(drift_offset.data(), static_cast<Eigen::Index>(drift_offset.size()));
    }

    Matrix covariance() const {
        const auto d = static_cast<Eigen::Index>(dim);
        Matrix cov(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                cov(i, j) = class_cov_scale * std::pow(correlation, static_cast<double>(std::abs(i - j)));
        return cov;
    }

    void validate() const {
        if (dim < 2) throw Error(ErrorCode::InvalidConfig, "dim must be at least 2");
        if (n_base < 2 || n_test < 1) throw Error(ErrorCode::InvalidConfig, "need n_base >= 2 and n_test >= 1");
        auto check_len = [&](const std::vector<double>& v, const char* name) {
            if (!v.empty() && v.size() != dim)
                throw Error(ErrorCode::InvalidConfig, std::string(name) + " must have length dim");
            for (double x : v)
                if (!std::isfinite(x)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be finite");
        };
        check_len(class_mean_0, "class_mean_0");
        check_len(class_mean_1, "class_mean_1");
        check_len(drift_offset, "drift_offset");
        if (!(class_cov_scale > 0.0) || !std::isfinite(class_cov_scale))
            throw Error(ErrorCode::InvalidConfig, "class_cov_scale must be positive");
        if (!(correlation > -1.0 && correlation < 1.0))
            throw Error(ErrorCode::InvalidConfig, "correlation must lie in (-1, 1)");
        if (!(drift_fraction >= 0.0 && drift_fraction <= 1.0))
            throw Error(ErrorCode::InvalidConfig, "drift_fraction must lie in [0, 1]");
        if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
            throw Error(ErrorCode::InvalidConfig, "positive_fraction must lie in (0, 1)");
        if (!(label_noise >= 0.0 && label_noise < 1.0))
            throw Error(ErrorCode::InvalidConfig, "label_noise must lie in [0, 1)");
        if (mc_replicates < 1) throw Error(ErrorCode::InvalidConfig, "mc_replicates must be at least 1");
        if (!(mc_noise_scale >= 0.0) || !std::isfinite(mc_noise_scale))
            throw Error(ErrorCode::InvalidConfig, "mc_noise_scale must be nonnegative");
    }
};

struct LabelledCohort {
    FeatureMatrix features;
    std::vector<int> labels;
    std::vector<bool> in_distribution; // false for drifted rows
};

struct SyntheticCohorts {
    LabelledCohort base;
    LabelledCohort test;
    LabelledCohort candidates;
};

namespace detail {

inline LabelledCohort draw_cohort(const SyntheticSpec& spec, StreamTag tag, std::size_t n, const std::string& prefix,
                                  double drift_fraction, const Matrix& chol) {
    Rng rng(stream_seed(spec.seed, tag));
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const Vector means[2] = {spec.mean(0), spec.mean(1)};
    const Vector offset = spec.drift();

    LabelledCohort c;
    c.features.data.resize(static_cast<Eigen::Index>(n), d);
    c.features.ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = rng.uniform() < spec.positive_fraction ? 1 : 0;
        Vector z(d);
        for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
        Vector x = means[cls] + chol * z;
        const bool flip = rng.uniform() < spec.label_noise;
        const bool drifted = rng.uniform() < drift_fraction;
        if (drifted) x += offset;
        c.features.data.row(static_cast<Eigen::Index>(i)) = x.transpose();
        c.features.ids.push_back(prefix + std::to_string(i));
        c.labels.push_back(flip ? 1 - cls : cls);
        c.in_distribution.push_back(!drifted);
    }
    return c;
}

} // namespace detail

/// Gaussian class-conditional cohorts; a drift_fraction share of candidates is shifted by
/// drift_offset. Fully determined by spec (including seed).
inline SyntheticCohorts generate(const SyntheticSpec& spec) {
    spec.validate();
    const Matrix chol = Eigen::LLT<Matrix>(spec.covariance()).matrixL();
    SyntheticCohorts out;
    out.base = detail::draw_cohort(spec, StreamTag::Base, spec.n_base, "b", 0.0, chol);
    out.test = detail::draw_cohort(spec, StreamTag::Test, spec.n_test, "t", 0.0, chol);
    out.candidates = detail::draw_cohort(spec, StreamTag::Candidates, spec.n_candidates, "c", spec.drift_fraction, chol);
    return out;
}

// ---------------------------------------------------------------------------
// Toy learner

/// Two-class Gaussian classifier with shared covariance (linear discriminant). Its
/// "retraining" is a refit of class means and pooled covariance.
struct ToyLearner {
    Vector mean_0;
    Vector mean_1;
    Matrix shared_inv_covariance;
    double prior_log_odds = 0.0; // ln(n1 / n0)

    /// Log-odds of class 1.
    double logit(const Eigen::Ref<const Vector>& x) const {
        const Vector w = shared_inv_covariance * (mean_1 - mean_0);
        return w.dot(x - 0.5 * (mean_0 + mean_1)) + prior_log_odds;
    }

    static ToyLearner fit(const Matrix& features, std::span<const int> labels,
                          double epsilon_scale = kDefaultEpsilonScale) {
        if (static_cast<std::size_t>(features.rows()) != labels.size())
            throw Error(ErrorCode::DimensionMismatch, "features and labels differ in length");
        const Eigen::Index d = features.cols();
        Vector sums[2] = {Vector::Zero(d), Vector::Zero(d)};
        double counts[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int c = labels[i];
            if (c != 0 && c != 1) throw Error(ErrorCode::InvalidArgument, "toy learner labels must be 0 or 1");
            sums[c] += features.row(static_cast<Eigen::Index>(i)).transpose();
            counts[c] += 1.0;
        }
        if (counts[0] < 1.0 || counts[1] < 1.0 || counts[0] + counts[1] < 3.0)
            throw Error(ErrorCode::MissingClass, "toy learner needs both classes and at least 3 samples");
        ToyLearner m;
        m.mean_0 = sums[0] / counts[0];
        m.mean_1 = sums[1] / counts[1];
        Matrix scatter = Matrix::Zero(d, d);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const Vector r = features.row(static_cast<Eigen::Index>(i)).transpose() - (labels[i] == 0 ? m.mean_0 : m.mean_1);
            scatter.noalias() += r * r.transpose();
        }
        Matrix cov = scatter / (counts[0] + counts[1] - 2.0);
        cov.diagonal().array() += epsilon_scale * cov.trace() / static_cast<double>(d);
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success)
            throw Error(ErrorCode::SingularCovariance, "toy learner pooled covariance is singular");
        m.shared_inv_covariance = llt.solve(Matrix::Identity(d, d));
        m.prior_log_odds = std::log(counts[1] / counts[0]);
        return m;
    }
};

inline double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// R replicate probability rows (p0, p1): the learner's logit plus N(0, noise_scale^2) jitter,
/// mapped through the logistic function.
inline Matrix toy_mc_predict(const ToyLearner& learner, const Eigen::Ref<const Vector>& x, std::size_t replicates,
                             double noise_scale, std::uint64_t seed) {
    if (replicates < 1) throw Error(ErrorCode::InvalidArgument, "need at least one replicate");
    const double base = learner.logit(x);
    Rng rng(seed);
    Matrix out(static_cast<Eigen::Index>(replicates), 2);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double p1 = logistic(base + noise_scale * rng.normal());
        out(r, 0) = 1.0 - p1;
        out(r, 1) = p1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end loop

struct MonitorReport {
    GateSet gates;
    MetricBundle baseline;
    std::vector<EligibilityReport> candidates;
    std::vector<bool> candidate_in_distribution;
    std::vector<IntegrationVerdict> verdicts;
};

namespace detail {

inline std::vector<UncertaintySummary> mc_summaries(const ToyLearner& learner, const LabelledCohort& cohort,
                                                    const SyntheticSpec& spec, StreamTag tag, double log_base) {
    const std::size_t n = cohort.features.rows();
    std::vector<UncertaintySummary> out(n);
    parallel_chunks(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Matrix reps = toy_mc_predict(learner, cohort.features.data.row(static_cast<Eigen::Index>(i)).transpose(),
                                               spec.mc_replicates, spec.mc_noise_scale, stream_seed(spec.seed, tag, i));
            out[i] = summarize(reps, log_base);
            out[i].id = cohort.features.ids[i];
        }
    }, 64);
    return out;
}

} // namespace detail

/// Replicate sets for a whole cohort in exportable form (labels attached).
inline McPredictionSet toy_mc_predictions(const ToyLearner& learner, const LabelledCohort& cohort,
                                          const SyntheticSpec& spec, StreamTag tag) {
    McPredictionSet set;
    for (std::size_t i = 0; i < cohort.features.rows(); ++i) {
        set.ids.push_back(cohort.features.ids[i]);
        set.replicates.push_back(toy_mc_predict(learner, cohort.features.data.row(static_cast<Eigen::Index>(i)).transpose(),
                                                spec.mc_replicates, spec.mc_noise_scale, stream_seed(spec.seed, tag, i)));
        set.labels.push_back(cohort.labels[i]);
    }
    return set;
}

namespace detail {

struct TestEvaluation {
    MetricBundle metrics;
    EntropyCalibration calibration;
};

inline TestEvaluation evaluate_on_test(const ToyLearner& learner, const LabelledCohort& test, const SyntheticSpec& spec,
                                       const RunConfig& config) {
    const auto summaries = mc_summaries(learner, test, spec, StreamTag::TestMc, config.entropy_log_base);
    std::vector<int> predicted;
    std::vector<double> scores;
    for (const auto& s : summaries) {
        predicted.push_back(s.predicted_class);
        scores.push_back(s.mean_probs(config.positive_class));
    }
    TestEvaluation ev;
    ev.calibration = calibrate_entropy_threshold(summaries, test.labels);
    const auto cm = confusion_metrics(predicted, test.labels, config.positive_class);
    ev.metrics.auc = binary_auc(scores, test.labels, config.positive_class);
    ev.metrics.accuracy = cm.accuracy;
    ev.metrics.sensitivity = cm.sensitivity;
    ev.metrics.specificity = cm.specificity;
    ev.metrics.entropy_threshold = ev.calibration.threshold;
    return ev;
}

} // namespace detail

/// Stage 1 on the base cohort, Stage 2 on test and candidates, Stage 3 by refitting the toy
/// learner with each eligible candidate (one at a time, with its predicted label) and
/// judging the refit on the unchanged test cohort.
inline MonitorReport run_monitor_loop(const SyntheticSpec& spec, const RunConfig& config) {
    spec.validate();
    config.validate();
    if (config.positive_class > 1) throw Error(ErrorCode::InvalidConfig, "synthetic cohorts have classes 0 and 1");
    const SyntheticCohorts cohorts = generate(spec);
    const ToyLearner learner = ToyLearner::fit(cohorts.base.features.data, cohorts.base.labels, config.epsilon_scale);

    MonitorReport report;
    const ReferenceModel reference = build_reference(cohorts.base.features, config.epsilon_scale, config.fold_aggregation);
    const ImageDistances base_distances = image_distances(cohorts.base.features, reference);
    report.gates = GateSet::from_feature_gates(calibrate_feature_gates(
        base_distances.triples, config.pct_euclidean, config.pct_cosine, config.pct_mahalanobis));

    const auto baseline = detail::evaluate_on_test(learner, cohorts.test, spec, config);
    report.gates.apply(baseline.calibration);
    report.baseline = baseline.metrics;

    if (spec.n_candidates == 0) return report;
    const ImageDistances cand_distances = image_distances(cohorts.candidates.features, reference);
    const auto cand_summaries =
        detail::mc_summaries(learner, cohorts.candidates, spec, StreamTag::CandidateMc, config.entropy_log_base);
    for (std::size_t i = 0; i < cand_summaries.size(); ++i) {
        report.candidates.push_back(evaluate_candidate(cand_distances.triples[i], cand_summaries[i], report.gates));
        report.candidate_in_distribution.push_back(cohorts.candidates.in_distribution[i]);
    }

    const Matrix& base_x = cohorts.base.features.data;
    for (std::size_t i = 0; i < report.candidates.size(); ++i) {
        const auto& cand = report.candidates[i];
        if (!cand.eligible) continue;
        Matrix augmented(base_x.rows() + 1, base_x.cols());
        augmented.topRows(base_x.rows()) = base_x;
        augmented.bottomRows(1) = cohorts.candidates.features.data.row(static_cast<Eigen::Index>(i));
        std::vector<int> labels = cohorts.base.labels;
        labels.push_back(*cand.assigned_label);
        const ToyLearner retrained = ToyLearner::fit(augmented, labels, config.epsilon_scale);
        const auto after = detail::evaluate_on_test(retrained, cohorts.test, spec, config);
        report.verdicts.push_back(render_verdict(report.baseline, after.metrics, config.safeguard_tolerance_pct, cand.id));
    }
    return report;
}

} // namespace driftgate
