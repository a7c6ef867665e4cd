#include "driftgate/json_io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using driftgate::json;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("driftgate_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args, const std::string& env = "") const {
        const std::string cmd = env + " " + DRIFTGATE_CLI + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    fs::path dir_;
};

const std::string samples = DRIFTGATE_SAMPLES;

} // namespace

TEST_F(Cli, VerdictAcceptsTable2Image62) {
    EXPECT_EQ(run("verdict --before " + samples + "/table2/before_62.json --after " + samples +
                  "/table2/after_62.json --config " + samples + "/config.json --image-id 62 --out " + path("v.json")),
              0);
    const auto v = driftgate::read_json_file(path("v.json")).get<driftgate::IntegrationVerdict>();
    EXPECT_TRUE(v.accepted);
    EXPECT_EQ(v.image_id, "62");
    EXPECT_NEAR(v.changes.entropy_threshold, -3.94, 0.25);
}

TEST_F(Cli, VerdictRejectsDegradedSensitivity) {
    write("before.json", R"({"auc":0.9,"accuracy":0.9,"sensitivity":0.6,"specificity":0.95,"entropy_threshold":0.25})");
    write("after.json", R"({"auc":0.9,"accuracy":0.9,"sensitivity":0.5,"specificity":0.95,"entropy_threshold":0.25})");
    EXPECT_EQ(run("verdict --before " + path("before.json") + " --after " + path("after.json") + " --out " + path("v.json")), 4);
    EXPECT_FALSE(driftgate::read_json_file(path("v.json")).at("accepted").get<bool>());
}

TEST_F(Cli, UsageAndInputErrorsExitTwo) {
    EXPECT_EQ(run("verdict --before x.json"), 2);
    EXPECT_EQ(run("nonsense"), 2);
    write("cfg.json", R"({"tolerance":5})");
    write("m.json", R"({"auc":0.9,"accuracy":0.9,"sensitivity":0.6,"specificity":0.95,"entropy_threshold":0.25})");
    EXPECT_EQ(run("verdict --before " + path("m.json") + " --after " + path("m.json") + " --config " + path("cfg.json") +
                  " --out " + path("v.json")),
              2);
    write("bad.csv", "id,f0,f1\na,1,nan\nb,2,3\n");
    EXPECT_EQ(run("baseline --features " + path("bad.csv") + " --out " + path("g.json")), 2);
}

TEST_F(Cli, SingularBaseExitsOne) {
    write("flat.csv", "id,f0,f1\na,1,1\nb,1,1\nc,1,1\n");
    write("cfg.json", R"({"epsilon_scale":0})");
    EXPECT_EQ(run("baseline --features " + path("flat.csv") + " --config " + path("cfg.json") + " --out " + path("g.json")), 1);
}

TEST_F(Cli, FullPipelineOnExportedCohorts) {
    write("spec.json", R"({"seed":7,"n_base":600,"n_test":400,"n_candidates":12,"mc_replicates":50})");
    ASSERT_EQ(run("synth-export --spec " + path("spec.json") + " --dir " + path("data")), 0);
    ASSERT_EQ(run("baseline --features " + path("data/base.csv") + " --config " + samples + "/config.json --out " +
                  path("gates.json")),
              0);
    const json stage1 = driftgate::read_json_file(path("gates.json"));
    EXPECT_TRUE(stage1.at("gates").at("entropy_threshold").is_null());

    ASSERT_EQ(run("calibrate --mc " + path("data/test_mc.csv") + " --labels " + path("data/test_labels.csv") +
                  " --gates " + path("gates.json") + " --out " + path("gates.json") + " --strict-reps 50"),
              0);
    const json stage2 = driftgate::read_json_file(path("gates.json"));
    EXPECT_EQ(stage2.at("reference").dump(), stage1.at("reference").dump());
    EXPECT_EQ(stage2.at("config").dump(), stage1.at("config").dump());
    for (const char* key : {"euclidean_threshold", "cosine_threshold", "mahalanobis_threshold"})
        EXPECT_EQ(stage2.at("gates").at(key).get<double>(), stage1.at("gates").at(key).get<double>());
    EXPECT_TRUE(stage2.at("gates").at("entropy_threshold").is_number());
    EXPECT_GT(stage2.at("gates").at("provenance").at("roc_auc").get<double>(), 0.5);

    // Labels embedded in the MC file are used when --labels is absent.
    EXPECT_EQ(run("calibrate --mc " + path("data/test_mc.csv") + " --gates " + path("gates.json") + " --out " +
                  path("gates2.json")),
              0);
    EXPECT_EQ(slurp(path("gates2.json")), slurp(path("gates.json")));

    const int rc = run("gate --features " + path("data/candidates.csv") + " --mc " + path("data/candidates_mc.csv") +
                       " --gates " + path("gates.json") + " --out " + path("reports.json"));
    const json reports = driftgate::read_json_file(path("reports.json"));
    ASSERT_EQ(reports.size(), 12u);
    std::size_t eligible = 0;
    for (const auto& r : reports) eligible += r.at("eligible").get<bool>() ? 1 : 0;
    EXPECT_EQ(rc, eligible > 0 ? 0 : 3);

    EXPECT_EQ(run("calibrate --mc " + path("data/test_mc.csv") + " --gates " + path("gates.json") + " --out " +
                  path("g3.json") + " --strict-reps 250"),
              2);
}

TEST_F(Cli, GateWithEmptyCandidateFileExitsThree) {
    write("spec.json", R"({"seed":3,"n_base":300,"n_test":200,"n_candidates":1,"mc_replicates":20})");
    ASSERT_EQ(run("synth-export --spec " + path("spec.json") + " --dir " + path("data")), 0);
    ASSERT_EQ(run("baseline --features " + path("data/base.csv") + " --out " + path("gates.json")), 0);
    ASSERT_EQ(run("calibrate --mc " + path("data/test_mc.csv") + " --labels " + path("data/test_labels.csv") +
                  " --gates " + path("gates.json") + " --out " + path("gates.json")),
              0);
    write("empty.csv", "");
    write("empty_mc.csv", "");
    EXPECT_EQ(run("gate --features " + path("empty.csv") + " --mc " + path("empty_mc.csv") + " --gates " +
                  path("gates.json") + " --out " + path("reports.json")),
              3);
    EXPECT_EQ(driftgate::read_json_file(path("reports.json")), json::array());
}

TEST_F(Cli, BaselineIndependentOfThreadCount) {
    write("spec.json", R"({"seed":11,"n_base":1500,"n_test":10,"n_candidates":1,"dim":12})");
    ASSERT_EQ(run("synth-export --spec " + path("spec.json") + " --dir " + path("data")), 0);
    ASSERT_EQ(run("baseline --features " + path("data/base.csv") + " --out " + path("g1.json"), "DRIFTGATE_THREADS=1"), 0);
    ASSERT_EQ(run("baseline --features " + path("data/base.csv") + " --out " + path("g4.json"), "DRIFTGATE_THREADS=4"), 0);
    EXPECT_EQ(slurp(path("g1.json")), slurp(path("g4.json")));
}

TEST_F(Cli, SimulateIsDeterministic) {
    ASSERT_EQ(run("simulate --spec " + samples + "/simulate_spec.json --out " + path("a.json")), 0);
    ASSERT_EQ(run("simulate --spec " + samples + "/simulate_spec.json --config " + samples + "/config.json --out " +
                  path("b.json")),
              0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    const auto report = driftgate::read_json_file(path("a.json")).get<driftgate::MonitorReport>();
    EXPECT_EQ(json(report).dump(2) + "\n", slurp(path("a.json")));
}
