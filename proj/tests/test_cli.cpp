#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cadex/commands.hpp"
#include "cadex/errors.hpp"
#include "support/scenes.hpp"

namespace cadex {
namespace {

using testing::TempDir;

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cadex_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string(CADEX_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const Outcome s = cadex_cli(*dir_, "synth --out " + (*dir_ / "data").string() + " --seed 2");
    ASSERT_EQ(s.code, 0) << s.err;
    const Outcome f = cadex_cli(*dir_, "fit --manifest " + (*dir_ / "data/manifest.json").string() + " --out " +
                                       (*dir_ / "run").string() + " --iterations 4");
    ASSERT_EQ(f.code, 0) << f.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string at(const std::string& rel) { return (*dir_ / rel).string(); }
  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

TEST_F(Cli, FitWritesRunDirectory) {
  for (const char* f : {"checkpoint.bin", "telemetry.csv", "config.json", "fit_summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(*dir_ / "run" / f)) << f;
  }
  EXPECT_EQ(RunConfig::load(at("run/config.json")).iterations, 4);
}

TEST_F(Cli, TrackEvalExport) {
  Outcome r = cadex_cli(*dir_, "track --checkpoint " + at("run/checkpoint.bin") + " --gt-queries " +
                               at("data/manifest.json") + " --out " + at("tracks.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tracked 512 queries over 24 frames"), std::string::npos);
  r = cadex_cli(*dir_, "eval --tracks " + at("tracks.txt") + " --manifest " + at("data/manifest.json") + " --out " +
                           at("report"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("delta_avg,"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(at("report.json")));
  EXPECT_TRUE(std::filesystem::exists(at("report.csv")));
  for (const char* what : {"depth", "field", "loss"}) {
    r = cadex_cli(*dir_, "export --checkpoint " + at("run/checkpoint.bin") + " --what " + what + " --out " +
                             at(std::string("export_") + what));
    EXPECT_EQ(r.code, 0) << what << ": " << r.err;
  }
  r = cadex_cli(*dir_, "track --checkpoint " + at("run/checkpoint.bin") + " --lattice 8 --binary --out " +
                           at("lattice.bin"));
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(cadex_cli(*dir_, "").code, cli::kUsageError);
  EXPECT_EQ(cadex_cli(*dir_, "frobnicate").code, cli::kUsageError);
  EXPECT_EQ(cadex_cli(*dir_, "fit --out x").code, cli::kUsageError);
  EXPECT_EQ(cadex_cli(*dir_, "--help").code, cli::kOk);
  EXPECT_EQ(cadex_cli(*dir_, "export --checkpoint " + at("run/checkpoint.bin") + " --what nothing --out " +
                                 at("x")).code,
            cli::kUsageError);
}

TEST_F(Cli, ConfigErrors) {
  testing::TempDir tmp("cfg");
  std::ofstream(tmp / "bad.json") << R"({"optimizer": {"lr_feild": 1e-3}})";
  const Outcome r = cadex_cli(*dir_, "fit --manifest " + at("data/manifest.json") + " --out " + (tmp / "run").string() +
                                     " --config " + (tmp / "bad.json").string());
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("lr_feild"), std::string::npos);
  EXPECT_EQ(cadex_cli(*dir_, "synth --out " + (tmp / "s").string() + " --preset moon").code, cli::kConfigError);
}

TEST_F(Cli, DataErrors) {
  testing::TempDir tmp("data");
  Outcome r = cadex_cli(*dir_, "fit --manifest " + (tmp / "none.json").string() + " --out " + (tmp / "run").string());
  EXPECT_EQ(r.code, cli::kDataError);
  std::ofstream(tmp / "junk.bin") << "not a checkpoint";
  r = cadex_cli(*dir_, "track --checkpoint " + (tmp / "junk.bin").string() + " --lattice 8 --out " +
                           (tmp / "t.txt").string());
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("junk.bin"), std::string::npos);
}

TEST_F(Cli, DumpDefaultsParses) {
  const Outcome r = cadex_cli(*dir_, "--dump-defaults");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(RunConfig::from_json(r.out).to_json(), RunConfig{}.to_json());
}

TEST(ExitCodes, MapErrorClasses) {
  EXPECT_EQ(cli::exit_code_for(ConfigError("x")), cli::kConfigError);
  EXPECT_EQ(cli::exit_code_for(DataError("x")), cli::kDataError);
  EXPECT_EQ(cli::exit_code_for(FormatError("x")), cli::kDataError);
  EXPECT_EQ(cli::exit_code_for(NumericalError("x")), cli::kNumericalError);
  EXPECT_EQ(cli::exit_code_for(std::logic_error("x")), cli::kInternalError);
}

}  // namespace
}  // namespace cadex
