#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(SGFBSDE_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST(Cli, HelpSucceeds) { EXPECT_EQ(run("--help").code, 0); }

TEST(Cli, MissingSubcommandIsInvalid) { EXPECT_EQ(run("").code, 2); }

TEST(Cli, BadArgumentsAreInvalid) {
  EXPECT_EQ(run("solve --problem example2:q=3 --k 9").code, 2);
  EXPECT_EQ(run("solve --problem nosuch --N 8").code, 2);
  EXPECT_EQ(run("solve --problem example2:q=3 --N 16,8").code, 2);
  EXPECT_EQ(run("solve --problem example2:q=3 --N 8 --norm point:abc").code, 2);
}

TEST(Cli, SolvePrintsCsv) {
  const auto r = run("solve --problem example2:q=2 --k 2 --N 8,16 --no-timing");
  ASSERT_EQ(r.code, 0);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "problem,k,p,pq,N,err_y,err_z,runtime_s,cr_y,cr_z");
  int rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(line.rfind("example2:q=2,2,3,3,", 0), 0u);
    EXPECT_NE(line.find("0.00000e+00"), std::string::npos);
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Cli, PointNormAndOutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "sgfbsde_cli_test.csv";
  const auto r = run("solve --problem example2:q=2 --N 8 --norm point:0.1,0.2 --out " + path.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "problem,k,p,pq,N,err_y,err_z,runtime_s,cr_y,cr_z");
  std::filesystem::remove(path);
}

TEST(Cli, DivergenceExitCode) {
  EXPECT_EQ(run("solve --problem example3:q=2 --N 8 --tol 1e-300").code, 3);
}

TEST(Cli, UnwritableOutput) {
  EXPECT_EQ(run("solve --problem example2:q=2 --N 8 --out /nonexistent-dir/x.csv").code, 5);
}

TEST(Cli, ValidateShippedProblems) {
  EXPECT_EQ(run("validate --problem example1").code, 0);
  EXPECT_EQ(run("validate --problem example2:q=3").code, 0);
  EXPECT_EQ(run("validate --problem example3:q=2").code, 0);
  EXPECT_EQ(run("validate --problem example9").code, 2);
}

TEST(Cli, ScalingReport) {
  const auto r = run("scaling --problem example2 --q 2,3 --N 8");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("problem,q,p,pq,N,", 0), 0u);
}
