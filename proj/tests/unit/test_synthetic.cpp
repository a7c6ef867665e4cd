#include "driftgate/csv_io.hpp"
#include "driftgate/json_io.hpp"
#include "driftgate/synthetic.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace driftgate;

namespace {

/// Independent learner update: running class means and pooled scatter updated one point at
/// a time, inverted by Gauss-Jordan.
struct IncrementalLearner {
    std::vector<double> mean[2];
    double count[2] = {0, 0};
    oracle::Rows scatter;
    std::size_t d;

    explicit IncrementalLearner(std::size_t dim) : scatter(dim, std::vector<double>(dim, 0.0)), d(dim) {
        mean[0].assign(dim, 0.0);
        mean[1].assign(dim, 0.0);
    }

    void add(const std::vector<double>& x, int c) {
        count[c] += 1.0;
        std::vector<double> delta(d);
        for (std::size_t k = 0; k < d; ++k) delta[k] = x[k] - mean[c][k];
        for (std::size_t k = 0; k < d; ++k) mean[c][k] += delta[k] / count[c];
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) scatter[a][b] += delta[a] * (x[b] - mean[c][b]);
    }

    double logit(const std::vector<double>& x, double epsilon_scale) const {
        oracle::Rows cov = scatter;
        double trace = 0.0;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) cov[a][b] /= (count[0] + count[1] - 2.0);
        for (std::size_t a = 0; a < d; ++a) trace += cov[a][a];
        for (std::size_t a = 0; a < d; ++a) cov[a][a] += epsilon_scale * trace / double(d);
        const auto inv = oracle::inverse(cov);
        double z = std::log(count[1] / count[0]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                z += (mean[1][a] - mean[0][a]) * inv[a][b] * (x[b] - 0.5 * (mean[0][b] + mean[1][b]));
        return z;
    }
};


std::vector<double> row_vec(const Matrix& m, Eigen::Index i) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) v[k] = m(i, k);
    return v;
}

} // namespace

TEST(Rng, SeededStreamsAreReproducible) {
    Rng a(stream_seed(5, StreamTag::Base)), b(stream_seed(5, StreamTag::Base)), c(stream_seed(5, StreamTag::Test));
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        (void)c;
    }
    EXPECT_NE(stream_seed(5, StreamTag::Base), stream_seed(5, StreamTag::Test));
    EXPECT_NE(stream_seed(5, StreamTag::TestMc, 0), stream_seed(5, StreamTag::TestMc, 1));
}

TEST(Generate, SameSeedIsByteIdentical) {
    SyntheticSpec spec;
    spec.n_base = 300;
    spec.n_test = 100;
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_EQ(format_features(a.base.features), format_features(b.base.features));
    EXPECT_EQ(format_features(a.test.features), format_features(b.test.features));
    EXPECT_EQ(format_features(a.candidates.features), format_features(b.candidates.features));
    EXPECT_EQ(a.base.labels, b.base.labels);
    spec.seed += 1;
    EXPECT_NE(format_features(generate(spec).base.features), format_features(a.base.features));
}

TEST(Generate, ZeroDriftCandidatesMatchBaseDistribution) {
    SyntheticSpec spec;
    spec.n_candidates = 1000;
    spec.drift_offset.assign(spec.dim, 0.0);
    spec.drift_fraction = 1.0;
    const auto c = generate(spec);
    const Vector base_mean = c.base.features.data.colwise().mean();
    const Vector cand_mean = c.candidates.features.data.colwise().mean();
    const Matrix centered = c.base.features.data.rowwise() - base_mean.transpose();
    for (Eigen::Index k = 0; k < base_mean.size(); ++k) {
        const double sigma = std::sqrt(centered.col(k).squaredNorm() / double(centered.rows() - 1));
        EXPECT_LT(std::abs(base_mean(k) - cand_mean(k)), 4.0 * sigma / std::sqrt(1000.0));
    }
}

TEST(Generate, WithinClassCovarianceMatchesSpec) {
    SyntheticSpec spec;
    spec.n_base = 2000;
    spec.dim = 8;
    spec.correlation = 0.3;
    spec.class_cov_scale = 1.7;
    const auto c = generate(spec);
    oracle::Rows cls[2];
    for (std::size_t i = 0; i < c.base.labels.size(); ++i)
        cls[c.base.labels[i]].push_back(row_vec(c.base.features.data, static_cast<Eigen::Index>(i)));
    const Matrix target = spec.covariance();
    double err = 0.0;
    for (int k = 0; k < 2; ++k) {
        const auto cov = oracle::covariance(cls[k]);
        double diff = 0.0;
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) diff += std::pow(cov[a][b] - target(a, b), 2);
        err = std::max(err, std::sqrt(diff) / target.norm());
    }
    EXPECT_LT(err, 0.10);
}

TEST(ToyMcPredict, ZeroNoiseRowsIdentical) {
    ToyLearner l;
    l.mean_0 = Vector::Constant(2, -1.0);
    l.mean_1 = Vector::Constant(2, 1.0);
    l.shared_inv_covariance = Matrix::Identity(2, 2);
    const Matrix reps = toy_mc_predict(l, Vector::Constant(2, 0.3), 20, 0.0, 9);
    for (Eigen::Index r = 1; r < 20; ++r) EXPECT_EQ(reps.row(r), reps.row(0));
    for (Eigen::Index r = 0; r < 20; ++r) EXPECT_NEAR(reps.row(r).sum(), 1.0, 1e-15);
}

TEST(ToyMcPredict, FarSideIsConfidentMidpointIsUncertain) {
    ToyLearner l;
    l.mean_0 = Vector::Constant(2, -1.0);
    l.mean_1 = Vector::Constant(2, 1.0);
    l.shared_inv_covariance = Matrix::Identity(2, 2);
    // logit at (-4,-4) is -16; logistic(-16 +- noise) keeps p0 above 0.99.
    const auto far = summarize(toy_mc_predict(l, Vector::Constant(2, -4.0), 250, 0.5, 1));
    EXPECT_GT(far.mean_probs(0), 0.99);
    EXPECT_LT(far.entropy, 0.06);
    const auto mid = summarize(toy_mc_predict(l, Vector::Zero(2), 250, 0.5, 2));
    EXPECT_NEAR(mid.mean_probs(0), 0.5, 0.03);
    EXPECT_NEAR(mid.entropy, std::numbers::ln2, 0.01);
}

TEST(ToyLearner, RefitAgreesWithIncrementalUpdate) {
    SyntheticSpec spec;
    spec.n_base = 400;
    spec.correlation = 0.2;
    const auto c = generate(spec);
    IncrementalLearner inc(spec.dim);
    for (std::size_t i = 0; i < c.base.labels.size(); ++i)
        inc.add(row_vec(c.base.features.data, static_cast<Eigen::Index>(i)), c.base.labels[i]);
    const auto x = row_vec(c.candidates.features.data, 0);
    inc.add(x, 1);

    Matrix augmented(c.base.features.data.rows() + 1, c.base.features.data.cols());
    augmented.topRows(c.base.features.data.rows()) = c.base.features.data;
    augmented.bottomRows(1) = c.candidates.features.data.row(0);
    auto labels = c.base.labels;
    labels.push_back(1);
    const auto refit = ToyLearner::fit(augmented, labels);
    for (Eigen::Index i = 0; i < 50; ++i) {
        const auto t = row_vec(c.test.features.data, i);
        EXPECT_NEAR(refit.logit(c.test.features.data.row(i).transpose()), inc.logit(t, kDefaultEpsilonScale), 1e-8);
    }
}

TEST(MonitorLoop, ZeroCandidates) {
    SyntheticSpec spec;
    spec.n_candidates = 0;
    const auto r = run_monitor_loop(spec, RunConfig{});
    EXPECT_TRUE(r.candidates.empty());
    EXPECT_TRUE(r.verdicts.empty());
    EXPECT_TRUE(r.gates.entropy_threshold.has_value());
}

TEST(MonitorLoop, DriftedCandidatesAreRejected) {
    std::size_t eligible = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_candidates = 200;
        spec.drift_fraction = 1.0;
        const auto r = run_monitor_loop(spec, RunConfig{});
        eligible += eligible_count(r.candidates);
        total += r.candidates.size();
    }
    EXPECT_LT(double(eligible) / double(total), 0.05);
}

TEST(MonitorLoop, InDistributionIntegrationsAreStable) {
    SyntheticSpec spec;
    spec.n_candidates = 30;
    spec.drift_fraction = 0.0;
    const auto r = run_monitor_loop(spec, RunConfig{});
    ASSERT_FALSE(r.verdicts.empty());
    for (const auto& v : r.verdicts) {
        EXPECT_TRUE(v.accepted) << v.image_id;
        EXPECT_LE(std::abs(v.changes.auc), 1.0);
        EXPECT_LE(std::abs(v.changes.accuracy), 1.0);
        EXPECT_LE(std::abs(v.changes.sensitivity), 1.0);
        EXPECT_LE(std::abs(v.changes.specificity), 1.0);
        // One added point moves class means by O(1/n_class); allow two test flips plus that.
        const double n_class = double(spec.n_base) / 2.0;
        EXPECT_LE(std::abs(v.after.accuracy - v.before.accuracy), 2.0 / double(spec.n_test) + 1.0 / n_class);
    }
}

TEST(MonitorLoop, DeterministicSerializedReport) {
    SyntheticSpec spec;
    spec.n_base = 500;
    spec.n_test = 300;
    const std::string a = json(run_monitor_loop(spec, RunConfig{})).dump();
    const std::string b = json(run_monitor_loop(spec, RunConfig{})).dump();
    EXPECT_EQ(a, b);
}

TEST(MonitorLoop, EntropyDetectsMisclassification) {
    for (std::uint64_t seed = 100; seed < 103; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_candidates = 0;
        const auto r = run_monitor_loop(spec, RunConfig{});
        EXPECT_GT(*r.gates.provenance.roc_auc, 0.8);
    }
}
