#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(INLPROBE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("inlprobe_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ConstantsForLabSample) {
  const auto dir = scratch("constants");
  EXPECT_EQ(run_cli("constants " + std::string(INLPROBE_SAMPLES_DIR) + "/lab.conf", dir / "log"), 0);
  const auto out = slurp(dir / "log");
  EXPECT_NE(out.find("kappa0 = 0.4457870"), std::string::npos) << out;
  EXPECT_NE(out.find("t_sg_s = "), std::string::npos);
  EXPECT_NE(out.find("t_e = 628.31853071795"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("config_errors");
  EXPECT_EQ(run_cli("run " + (dir / "missing.conf").string(), dir / "log"), 2);
  const auto bad = write(dir, "bad.conf", "nu = fast\n");
  EXPECT_EQ(run_cli("run " + bad.string(), dir / "log"), 2);
  EXPECT_NE(slurp(dir / "log").find("nu"), std::string::npos);
  EXPECT_EQ(run_cli("figure --id 7", dir / "log"), 2);
  EXPECT_EQ(run_cli("", dir / "log"), 2);
}

TEST(Cli, NumericalFailureExitsThree) {
  const auto dir = scratch("numerical");
  const auto cfg = write(dir, "fail.conf",
                         "mode = inl\neta = 0.005\nt_end = 5\nsamples = 6\nmin_step = 1\nname = fail\noutput_dir = " +
                             dir.string() + "\n");
  EXPECT_EQ(run_cli("run " + cfg.string(), dir / "log"), 3);
  EXPECT_TRUE(fs::exists(dir / "fail_partial.csv"));
  EXPECT_NE(slurp(dir / "fail_manifest.txt").find("numerical-failure"), std::string::npos);
}

TEST(Cli, FigureWritesIntoOutDir) {
  const auto dir = scratch("figure");
  EXPECT_EQ(run_cli("figure --id 1 --out " + dir.string(), dir / "log"), 0);
  EXPECT_GT(fs::file_size(dir / "figure1.csv"), 0u);
  EXPECT_GT(fs::file_size(dir / "figure1_summary.txt"), 0u);
  EXPECT_GT(fs::file_size(dir / "figure1_manifest.txt"), 0u);
}

TEST(Cli, RunIsByteIdentical) {
  const auto dir = scratch("repeat");
  const auto a = write(dir, "a.conf", "mode = inl\neta = 0.005\nt_end = 40\nsamples = 100\nname = r\noutput_dir = " +
                                          (dir / "a").string() + "\n");
  const auto b = write(dir, "b.conf", "mode = inl\neta = 0.005\nt_end = 40\nsamples = 100\nname = r\noutput_dir = " +
                                          (dir / "b").string() + "\n");
  ASSERT_EQ(run_cli("run " + a.string(), dir / "log"), 0);
  ASSERT_EQ(run_cli("run " + b.string(), dir / "log"), 0);
  EXPECT_EQ(slurp(dir / "a" / "r.csv"), slurp(dir / "b" / "r.csv"));
}

TEST(Cli, SweepSubcommandForcesSweepMode) {
  const auto dir = scratch("sweep");
  const auto cfg = write(dir, "s.conf", "samples = 64\nsweep_nodes = 3\nsweep_nu_min = 2\nsweep_nu_max = 8\nname = s\n"
                                        "output_dir = " + dir.string() + "\n");
  EXPECT_EQ(run_cli("sweep " + cfg.string(), dir / "log"), 0);
  EXPECT_TRUE(fs::exists(dir / "s_average.csv"));
}
