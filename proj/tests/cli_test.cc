#include "pivot/cli.h"

#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "pivot/config.h"

namespace pivot {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("pivot_cli_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
    ::setenv("PIVOT_TOUCH_RUNS_DIR", root_.c_str(), 1);
  }
  void TearDown() override {
    ::unsetenv("PIVOT_TOUCH_RUNS_DIR");
    fs::remove_all(root_);
  }

  Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
  }

  // Run directories created so far, sorted.
  std::vector<fs::path> run_dirs() const {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root_))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
  }

  static fs::path dir_from(const std::string& out) {
    const std::smatch m = [&] {
      std::smatch mm;
      std::regex_search(out, mm, std::regex("run directory: (\\S+)"));
      return mm;
    }();
    return m.empty() ? fs::path() : fs::path(m[1].str());
  }

  fs::path root_;
};

// A tiny proprioceptive training setup that finishes in well under a second.
const std::vector<std::string> kTinyTrain = {
    "--obs",    "proprio", "--set", "task.horizon=10", "--set", "train.n_envs=2",
    "--set",    "train.n_steps=16", "--set", "train.minibatch=16", "--set", "train.epochs=2",
    "--set",    "train.eval_interval=32", "--set", "train.eval_episodes=2", "--steps", "64"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

TEST_F(CliTest, HelpMatchesGolden) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  const std::string golden = read_file(fs::path(PIVOT_SOURCE_DIR) / "tests/golden/help.txt");
  EXPECT_EQ(r.out, golden) << "regenerate with: pivot_touch --help > tests/golden/help.txt";
}

TEST_F(CliTest, HelpEnumeratesEveryFlag) {
  const std::string help = run({"--help"}).out;
  for (const char* flag : {"--config", "--set", "--allow-out-of-range", "--threads", "--obs", "--repr", "--aug",
                           "--seed", "--steps", "--resume", "--ckpt", "--policy", "--oracle-ckpt", "--episodes",
                           "--seeds", "--target", "--frames", "--channels", "--samples", "--aug-modes", "--shift",
                           "--out", "--title"}) {
    EXPECT_NE(help.find(flag), std::string::npos) << flag;
  }
  for (const char* cmd : {"train", "eval", "shift-eval", "gridsearch-phi", "render-demo", "gradcheck", "ablate",
                          "plot"}) {
    EXPECT_NE(help.find(cmd), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"train", "--bogus"}).code, 1);
  const Result key = run({"train", "--set", "repr.bogus=1"});
  EXPECT_EQ(key.code, 1);
  EXPECT_NE(key.err.find("unknown config key"), std::string::npos);
  const Result range = run({"render-demo", "--set", "task.table_height_cm=0,25"});
  EXPECT_EQ(range.code, 1);
  EXPECT_NE(range.err.find("--allow-out-of-range"), std::string::npos);
  EXPECT_EQ(run({"eval", "--obs", "oracle"}).code, 1);
  EXPECT_EQ(run({"eval", "--policy", "pca"}).code, 1);
  EXPECT_EQ(run({"gridsearch-phi", "--target", "nope"}).code, 1);
  EXPECT_EQ(run({"plot", "/nonexistent.csv"}).code, 1);
  EXPECT_TRUE(run_dirs().empty());
}

TEST_F(CliTest, AllowOutOfRangeProceeds) {
  const Result r =
      run({"render-demo", "--frames", "1", "--allow-out-of-range", "--set", "task.table_height_cm=0,25"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, GradcheckPasses) {
  const Result r = run({"gradcheck", "--samples", "2"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("conv1.w"), std::string::npos);
  EXPECT_NE(r.out.find("gradcheck passed"), std::string::npos);
}

TEST_F(CliTest, PlotWritesSvgIntoRunDirectory) {
  const fs::path csv = root_ / "m.csv";
  std::ofstream(csv) << "step,episodes,mean_reward,success_rate,mean_deviation,wall_seconds\n"
                        "10,1,1.0,0.0,1.0,0.000\n20,2,2.0,0.5,0.5,0.000\n";
  const Result r = run({"plot", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dirs = run_dirs();
  ASSERT_EQ(dirs.size(), 1u);
  const std::string svg = read_file(dirs[0] / "training_curves.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(r.out.find("2 points per series"), std::string::npos);
}

TEST_F(CliTest, TrainTwiceIsByteIdenticalAndNeverOverwrites) {
  const Result a = run(with({"train"}, kTinyTrain));
  const Result b = run(with({"train"}, kTinyTrain));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const fs::path da = dir_from(a.out), db = dir_from(b.out);
  ASSERT_FALSE(da.empty());
  EXPECT_NE(da, db);
  for (const char* f : {"metrics.csv", "final.ckpt", "best.ckpt", "config.ini"}) {
    ASSERT_TRUE(fs::exists(da / f)) << f;
    EXPECT_EQ(read_file(da / f), read_file(db / f)) << f;
  }
  // The directory name carries the config digest.
  const RunConfig cfg = parse_config(read_file(da / "config.ini"));
  EXPECT_NE(da.filename().string().find(cfg.digest_hex()), std::string::npos);

  const std::vector<std::string> eval_args = {"eval",    "--obs",        "proprio", "--set",  "task.horizon=10",
                                              "--ckpt",  (da / "best.ckpt").string(), "--episodes", "3",
                                              "--seeds", "0,1"};
  const Result e1 = run(eval_args);
  const Result e2 = run(eval_args);
  ASSERT_EQ(e1.code, 0) << e1.err;
  EXPECT_EQ(read_file(dir_from(e1.out) / "eval.csv"), read_file(dir_from(e2.out) / "eval.csv"));
}

TEST_F(CliTest, ThreadsDoNotChangeResults) {
  const Result a = run(with({"train", "--threads", "1"}, kTinyTrain));
  const Result b = run(with({"train", "--threads", "3"}, kTinyTrain));
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(read_file(dir_from(a.out) / "final.ckpt"), read_file(dir_from(b.out) / "final.ckpt"));
}

TEST_F(CliTest, ResumeContinuesAndMismatchedCheckpointFails) {
  auto short_run = kTinyTrain;
  short_run.back() = "32";
  const Result a = run(with({"train"}, short_run));
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path dir = dir_from(a.out);
  const Result r = run(with({"train", "--resume", dir.string()}, kTinyTrain));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read_file(dir / "metrics.csv").find("\n64,"), std::string::npos);

  // An oracle-mode evaluation cannot load a proprio checkpoint.
  const Result bad = run({"eval", "--obs", "oracle", "--ckpt", (dir / "final.ckpt").string(), "--episodes", "1"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("digest"), std::string::npos);
  EXPECT_EQ(run({"train", "--resume", root_.string()}).code, 1);
}

TEST_F(CliTest, RenderDemoWritesImagesAndCsv) {
  const Result r = run({"render-demo", "--frames", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path dir = dir_from(r.out);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir)) pngs += e.path().extension() == ".png" ? 1 : 0;
  EXPECT_EQ(pngs, 13);
  const std::string csv = read_file(dir / "render_demo.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(CliTest, GridsearchWritesCsv) {
  const Result r = run({"gridsearch-phi", "--set", "eval.phi_candidates=0.01,0.05", "--set", "eval.phi_frames=5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_file(dir_from(r.out) / "phi.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "phi,mean_iou");
  EXPECT_NE(r.out.find("best phi"), std::string::npos);
}

TEST_F(CliTest, ShiftEvalWritesDrops) {
  const Result t = run(with({"train"}, kTinyTrain));
  ASSERT_EQ(t.code, 0);
  const Result r = run({"shift-eval", "--obs", "proprio", "--set", "task.horizon=10", "--ckpt",
                        (dir_from(t.out) / "final.ckpt").string(), "--episodes", "1", "--seeds", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string drops = read_file(dir_from(r.out) / "shift_drops.csv");
  EXPECT_EQ(std::count(drops.begin(), drops.end(), '\n'), 13);
}

TEST_F(CliTest, AblateProducesOneRowPerRun) {
  const Result r = run({"ablate", "--seeds", "3", "--repr", "binary,rgb", "--set", "task.horizon=5", "--set",
                        "train.n_envs=1", "--set", "train.n_steps=8", "--set", "train.minibatch=8", "--set",
                        "train.epochs=1", "--set", "train.eval_interval=8", "--set", "train.eval_episodes=1",
                        "--steps", "8", "--episodes", "1", "--set", "eval.seeds=0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_file(dir_from(r.out) / "ablate.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "repr,aug,seed,success_mean,success_std,deviation_mean,deviation_std,mean_reward");
  EXPECT_NE(csv.find("\nbinary,0,2,"), std::string::npos);
  EXPECT_NE(csv.find("\nrgb,0,0,"), std::string::npos);
  EXPECT_EQ(run({"ablate", "--repr", "grey"}).code, 1);
}

}  // namespace
}  // namespace pivot
