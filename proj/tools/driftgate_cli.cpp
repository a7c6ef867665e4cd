// driftgate command-line interface.
//
// Exit codes: 0 success (gate: at least one eligible; verdict: accepted), 1 computational
// failure (singular covariance, degenerate labels, zero baseline, ...), 2 usage or input
// errors, 3 gate found no eligible candidate, 4 verdict rejected.

#include "driftgate/driftgate.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace {

using namespace driftgate;

constexpr int kExitOk = 0;
constexpr int kExitComputation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNoneEligible = 3;
constexpr int kExitRejected = 4;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::SingularCovariance:
    case ErrorCode::DegenerateLabels:
    case ErrorCode::ZeroBaseline:
    case ErrorCode::ZeroVector:
    case ErrorCode::MissingClass:
    case ErrorCode::EmptyInput:
        return kExitComputation;
    default:
        return kExitUsage;
    }
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

std::optional<std::size_t> strict(std::size_t reps) { return reps > 0 ? std::optional<std::size_t>(reps) : std::nullopt; }

int cmd_baseline(const std::string& features_path, const std::string& config_path, const std::string& out) {
    GatesFile file;
    file.config = config_or_default(config_path);
    const FeatureMatrix base = load_features(features_path);
    file.reference = build_reference(base, file.config.epsilon_scale, file.config.fold_aggregation);
    const ImageDistances distances = image_distances(base, file.reference);
    file.gates = GateSet::from_feature_gates(calibrate_feature_gates(
        distances.triples, file.config.pct_euclidean, file.config.pct_cosine, file.config.pct_mahalanobis));
    write_json_file(out, file);
    std::printf("baseline: %zu images, %zu fold(s), D=%zu\n", distances.ids.size(), file.reference.folds.size(), base.dim());
    std::printf("  euclidean <= %.6g  cosine >= %.6g  mahalanobis <= %.6g\n", file.gates.euclidean_threshold,
                file.gates.cosine_threshold, file.gates.mahalanobis_threshold);
    return kExitOk;
}

int cmd_calibrate(const std::string& mc_path, const std::string& labels_path, const std::string& gates_path,
                  const std::string& out, std::size_t strict_reps) {
    GatesFile file = read_json_file(gates_path).get<GatesFile>();
    const McPredictionSet mc = load_mc_predictions(mc_path, strict(strict_reps));
    std::unordered_map<std::string, int> label_file;
    if (!labels_path.empty()) label_file = load_labels(labels_path);

    std::vector<int> labels;
    for (std::size_t i = 0; i < mc.size(); ++i) {
        if (!labels_path.empty()) {
            auto it = label_file.find(mc.ids[i]);
            if (it == label_file.end()) throw Error(ErrorCode::ParseError, "no label for id " + mc.ids[i]);
            labels.push_back(it->second);
        } else if (mc.labels[i]) {
            labels.push_back(*mc.labels[i]);
        } else {
            throw Error(ErrorCode::ParseError, "no label for id " + mc.ids[i] + " (pass --labels)");
        }
    }
    const auto summaries = summarize_all(mc, file.config.entropy_log_base);
    const EntropyCalibration cal = calibrate_entropy_threshold(summaries, labels);
    file.gates.apply(cal);
    write_json_file(out, file);
    std::printf("calibrate: %zu images, %zu misclassified\n", cal.cohort_size, cal.misclassified);
    std::printf("  misclassification ROC AUC = %.6f  Youden J = %.6f  entropy threshold = %.6g\n", cal.roc_auc,
                cal.youden_j, cal.threshold);
    return kExitOk;
}

int cmd_gate(const std::string& features_path, const std::string& mc_path, const std::string& gates_path,
             const std::string& out, std::size_t strict_reps) {
    const GatesFile file = read_json_file(gates_path).get<GatesFile>();
    if (!file.gates.entropy_threshold)
        throw Error(ErrorCode::InvalidArgument, gates_path + " has no entropy threshold (run calibrate first)");
    const FeatureMatrix candidates = load_features(features_path);
    const McPredictionSet mc = load_mc_predictions(mc_path, strict(strict_reps));

    const ImageDistances distances = image_distances(candidates, file.reference);
    const auto summaries = summarize_all(mc, file.config.entropy_log_base);
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < summaries.size(); ++i) by_id.emplace(summaries[i].id, i);
    const std::unordered_set<std::string> feature_ids(distances.ids.begin(), distances.ids.end());
    for (const auto& s : summaries)
        if (!feature_ids.contains(s.id))
            throw Error(ErrorCode::MissingPrediction, "predictions for id " + s.id + " have no features");

    std::vector<std::pair<DistanceTriple, UncertaintySummary>> pairs;
    for (std::size_t i = 0; i < distances.ids.size(); ++i) {
        auto it = by_id.find(distances.ids[i]);
        if (it == by_id.end()) throw Error(ErrorCode::MissingPrediction, "no predictions for id " + distances.ids[i]);
        pairs.emplace_back(distances.triples[i], summaries[it->second]);
    }
    const auto reports = batch_evaluate(pairs, file.gates);
    write_json_file(out, json(reports));
    const std::size_t eligible = eligible_count(reports);
    std::printf("gate: %zu candidate(s), %zu eligible\n", reports.size(), eligible);
    return eligible > 0 ? kExitOk : kExitNoneEligible;
}

int cmd_verdict(const std::string& before_path, const std::string& after_path, const std::string& config_path,
                const std::string& out, const std::string& image_id) {
    const RunConfig config = config_or_default(config_path);
    const auto before = read_json_file(before_path).get<MetricBundle>();
    const auto after = read_json_file(after_path).get<MetricBundle>();
    const IntegrationVerdict v = render_verdict(before, after, config.safeguard_tolerance_pct, image_id);
    write_json_file(out, v);
    std::printf("verdict: %s\n", v.accepted ? "accepted" : "rejected");
    for (const auto& r : v.reasons)
        std::printf("  %-18s %+8.3f%%  %s%s%s\n", r.criterion.c_str(), r.change_pct, r.passed ? "pass" : "FAIL",
                    r.note.empty() ? "" : "  ", r.note.c_str());
    return v.accepted ? kExitOk : kExitRejected;
}

int cmd_simulate(const std::string& spec_path, const std::string& config_path, const std::string& out) {
    const auto spec = read_json_file(spec_path).get<SyntheticSpec>();
    const RunConfig config = config_or_default(config_path);
    const MonitorReport report = run_monitor_loop(spec, config);
    write_json_file(out, report);
    std::size_t eligible = eligible_count(report.candidates), accepted = 0;
    for (const auto& v : report.verdicts) accepted += v.accepted ? 1 : 0;
    std::printf("simulate: %zu candidate(s), %zu eligible, %zu accepted\n", report.candidates.size(), eligible, accepted);
    std::printf("  misclassification ROC AUC = %.4f  entropy threshold = %.6g\n",
                report.gates.provenance.roc_auc.value_or(0.0), report.gates.entropy_threshold.value_or(0.0));
    return kExitOk;
}

int cmd_export(const std::string& spec_path, const std::string& dir) {
    const auto spec = read_json_file(spec_path).get<SyntheticSpec>();
    const SyntheticCohorts cohorts = generate(spec);
    const ToyLearner learner = ToyLearner::fit(cohorts.base.features.data, cohorts.base.labels);
    std::filesystem::create_directories(dir);
    const std::filesystem::path root(dir);
    save_features((root / "base.csv").string(), cohorts.base.features);
    save_features((root / "candidates.csv").string(), cohorts.candidates.features);
    save_mc_predictions((root / "test_mc.csv").string(), toy_mc_predictions(learner, cohorts.test, spec, StreamTag::TestMc));
    McPredictionSet cand_mc = toy_mc_predictions(learner, cohorts.candidates, spec, StreamTag::CandidateMc);
    for (auto& l : cand_mc.labels) l.reset();
    save_mc_predictions((root / "candidates_mc.csv").string(), cand_mc);
    std::string labels = "id,label\n";
    for (std::size_t i = 0; i < cohorts.test.labels.size(); ++i)
        labels += cohorts.test.features.ids[i] + "," + std::to_string(cohorts.test.labels[i]) + "\n";
    csv::write_file((root / "test_labels.csv").string(), labels);
    std::printf("export: wrote base.csv, test_mc.csv, test_labels.csv, candidates.csv, candidates_mc.csv to %s\n",
                dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftgate: drift gating and safeguarded model-update verdicts"};
    app.require_subcommand(1);

    std::string features, config, out, mc, labels, gates, before, after, image_id, spec, dir;
    std::size_t strict_reps = 0;

    auto* baseline = app.add_subcommand("baseline", "Reference statistics and feature gates from the base cohort");
    baseline->add_option("--features", features, "Base feature CSV (id[,fold],f0,...)")->required();
    baseline->add_option("--config", config, "RunConfig JSON");
    baseline->add_option("--out", out, "Output gates JSON")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Entropy threshold from labelled test-cohort predictions");
    calibrate->add_option("--mc", mc, "Test replicate CSV (id,rep,p0,p1[,label])")->required();
    calibrate->add_option("--labels", labels, "Test label CSV (id,label)");
    calibrate->add_option("--gates", gates, "Gates JSON from baseline")->required();
    calibrate->add_option("--out", out, "Output gates JSON")->required();
    calibrate->add_option("--strict-reps", strict_reps, "Require exactly N replicates per id");

    auto* gate = app.add_subcommand("gate", "Eligibility reports for candidate samples");
    gate->add_option("--features", features, "Candidate feature CSV")->required();
    gate->add_option("--mc", mc, "Candidate replicate CSV")->required();
    gate->add_option("--gates", gates, "Calibrated gates JSON")->required();
    gate->add_option("--out", out, "Output reports JSON")->required();
    gate->add_option("--strict-reps", strict_reps, "Require exactly N replicates per id");

    auto* verdict = app.add_subcommand("verdict", "Accept/reject a model update from before/after metrics");
    verdict->add_option("--before", before, "Baseline metrics JSON")->required();
    verdict->add_option("--after", after, "Retrained metrics JSON")->required();
    verdict->add_option("--config", config, "RunConfig JSON");
    verdict->add_option("--out", out, "Output verdict JSON")->required();
    verdict->add_option("--image-id", image_id, "Identifier of the integrated sample");

    auto* simulate = app.add_subcommand("simulate", "Synthetic end-to-end monitoring loop");
    simulate->add_option("--spec", spec, "Synthetic spec JSON")->required();
    simulate->add_option("--config", config, "RunConfig JSON");
    simulate->add_option("--out", out, "Output report JSON")->required();

    auto* export_cmd = app.add_subcommand("synth-export", "Write synthetic cohorts as CSV inputs for the other commands");
    export_cmd->add_option("--spec", spec, "Synthetic spec JSON")->required();
    export_cmd->add_option("--dir", dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*baseline) return cmd_baseline(features, config, out);
        if (*calibrate) return cmd_calibrate(mc, labels, gates, out, strict_reps);
        if (*gate) return cmd_gate(features, mc, gates, out, strict_reps);
        if (*verdict) return cmd_verdict(before, after, config, out, image_id);
        if (*simulate) return cmd_simulate(spec, config, out);
        if (*export_cmd) return cmd_export(spec, dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitComputation;
    }
    return kExitUsage;
}
