#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

const std::string kSmall =
    " --users 100 --items 80 --density 0.15 --steps 6 --r-range -0.1:0.1 -D 4 --epochs 15"
    " --lasso-lambda 0.01 --seed 7 --threads 1";

fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() / "tmf-cli-tests" / info->name();
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Exit status of `tmf <args>`, with stdout and stderr captured in `log`.
int tmf(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + TMF_CLI_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, RunWritesTheDocumentedLayout) {
  const auto dir = scratch();
  ASSERT_EQ(tmf("run" + kSmall + " --out " + (dir / "run").string(), dir / "log"), 0)
      << slurp(dir / "log");
  for (const char* file : {"manifest.json", "model/factors.json", "trajectories/trajectories.csv",
                           "transitions/models.json", "transitions/summary.json",
                           "report/predictions.csv", "report/report.json", "report/per_user.csv",
                           "report/curve.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / file)) << file;
  }
  EXPECT_NE(slurp(dir / "log").find("RMSE"), std::string::npos) << slurp(dir / "log");
}

TEST(Cli, StageChainMatchesEndToEndRun) {
  const auto dir = scratch();
  ASSERT_EQ(tmf("run" + kSmall + " --out " + (dir / "run").string(), dir / "log"), 0);
  const std::string out = " --out " + (dir / "stages").string();
  ASSERT_EQ(tmf("train" + kSmall + out, dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(tmf("track" + kSmall + out, dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(tmf("fit-dynamics" + kSmall + out, dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(tmf("predict" + kSmall + out, dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(tmf("evaluate" + kSmall + out, dir / "log"), 0) << slurp(dir / "log");
  for (const char* file : {"model/factors.json", "trajectories/trajectories.csv",
                           "transitions/models.json", "report/predictions.csv"}) {
    EXPECT_EQ(slurp(dir / "run" / file), slurp(dir / "stages" / file)) << file;
  }
  const auto run_report = slurp(dir / "run" / "report" / "report.json");
  EXPECT_EQ(slurp(dir / "stages" / "report" / "report.json"), run_report);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const auto dir = scratch();
  ASSERT_EQ(tmf("run" + kSmall + " --out " + (dir / "a").string(), dir / "log"), 0);
  ASSERT_EQ(tmf("run" + kSmall + " --out " + (dir / "b").string(), dir / "log"), 0);
  for (const char* file : {"report/report.json", "report/predictions.csv", "report/per_user.csv",
                           "report/curve.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(dir / "a" / file), slurp(dir / "b" / file)) << file;
  }
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto dir = scratch();
  std::ofstream(dir / "cfg.json") << R"({"mode": "synthetic",
    "synthetic": {"users": 100, "items": 80, "density": 0.15, "steps": 6, "r_range": [-0.1, 0.1],
                  "factors": 4},
    "mf": {"factors": 4, "epochs": 15}, "lasso": {"lambda": 0.01}, "seed": 99})";
  ASSERT_EQ(tmf("run --config " + (dir / "cfg.json").string() + " --seed 7 --out " +
                    (dir / "cfg").string(), dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(tmf("run" + kSmall + " --out " + (dir / "flags").string(), dir / "log"), 0);
  EXPECT_EQ(slurp(dir / "cfg" / "report" / "report.json"),
            slurp(dir / "flags" / "report" / "report.json"));

  // Generator and model disagree on D: the run completes without a curve.
  std::ofstream(dir / "mixed.json") << R"({"synthetic": {"users": 60, "items": 40, "density": 0.2,
    "steps": 5, "factors": 4}, "mf": {"factors": 3, "epochs": 5}})";
  ASSERT_EQ(tmf("run --config " + (dir / "mixed.json").string() + " --out " +
                    (dir / "mixed").string(), dir / "log"), 0) << slurp(dir / "log");
  EXPECT_FALSE(fs::exists(dir / "mixed" / "report" / "curve.csv"));
}

TEST(Cli, GeneratedLogsRunInRealMode) {
  const auto dir = scratch();
  ASSERT_EQ(tmf("generate" + kSmall + " --out " + (dir / "gen").string(), dir / "log"), 0);
  ASSERT_TRUE(fs::exists(dir / "gen" / "data" / "logs.csv"));
  ASSERT_TRUE(fs::exists(dir / "gen" / "data" / "truth_states.csv"));
  ASSERT_EQ(tmf("run --mode real --data " + (dir / "gen" / "data" / "logs.csv").string() +
                    " --slices 6 --window 1 --equal-duration -D 4 --epochs 15 --out " +
                    (dir / "real").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "real" / "report" / "report.json"));
  EXPECT_FALSE(fs::exists(dir / "real" / "report" / "curve.csv"));
}

TEST(Cli, SweepWritesTable) {
  const auto dir = scratch();
  ASSERT_EQ(tmf("sweep" + kSmall + " --param lasso_lambda --values \"0.01;1\" --out " +
                    (dir / "sweep").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  const auto table = slurp(dir / "sweep" / "sweep.csv");
  EXPECT_EQ(table.rfind("lasso_lambda,", 0), 0u);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_EQ(tmf("sweep" + kSmall + " --param lasso_lambda --values \"\" --out " +
                    (dir / "empty").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
}

TEST(Cli, OutputRootFromEnvironment) {
  const auto dir = scratch();
  ::setenv("TMF_OUTPUT_ROOT", (dir / "root").c_str(), 1);
  const int code = tmf("generate" + kSmall, dir / "log");
  ::unsetenv("TMF_OUTPUT_ROOT");
  ASSERT_EQ(code, 0) << slurp(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "root" / "data" / "logs.csv"));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch();
  EXPECT_EQ(tmf("run --mode real --data x.csv --slices 5 --window 5 --out " + (dir / "o").string(),
                dir / "log"),
            2);
  EXPECT_NE(slurp(dir / "log").find("config error"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "o" / "model"));
  EXPECT_EQ(tmf("run --mode synthetic --data x.csv --out " + (dir / "o").string(), dir / "log"), 2);
  EXPECT_EQ(tmf("sweep" + kSmall + " --param epochs --values 1 --out " + (dir / "o").string(),
                dir / "log"),
            2);
  EXPECT_EQ(tmf("run --mode real --data " + (dir / "missing.csv").string() + " --out " +
                    (dir / "o").string(),
                dir / "log"),
            1);
  EXPECT_NE(slurp(dir / "log").find("[corpus]"), std::string::npos) << slurp(dir / "log");
  EXPECT_NE(tmf("frobnicate", dir / "log"), 0);
}

}  // namespace
