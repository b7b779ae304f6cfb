#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "sharpbfgs/io.hpp"

using namespace sharpbfgs;

namespace {

const std::string kBinary = SHARPBFGS_CLI;
const fs::path kData = SHARPBFGS_TEST_DATA_DIR;

int cli(const std::string& args) {
  const std::string cmd = kBinary + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sharpbfgs_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, SelftestPasses) { EXPECT_EQ(cli("selftest"), 0); }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run --correction maybe"), 2);
  EXPECT_EQ(cli("run --method newton --out " + scratch("bad_method").string()), 2);
  EXPECT_EQ(cli("certify " + scratch("nothing_here").string()), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, RepeatedRunIsByteIdentical) {
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  const std::string args = "run --problem logistic --n 300 --d 10 --seed 3 --mu 1e-3 --method all --out ";
  ASSERT_EQ(cli(args + a.string()), 0);
  ASSERT_EQ(cli(args + b.string()), 0);
  for (const char* m : {"gd", "bfgs", "greedy", "sharpened", "sharpened-random"}) {
    const std::string ta = slurp(a / m / "trace.csv");
    ASSERT_FALSE(ta.empty()) << m;
    EXPECT_EQ(ta, slurp(b / m / "trace.csv")) << m;
    EXPECT_EQ(slurp(a / m / "summary.json"), slurp(b / m / "summary.json")) << m;
  }
}

TEST(Cli, CertifyDetectsTamperedTrace) {
  const fs::path out = scratch("tamper");
  ASSERT_EQ(cli("run --problem quadratic --d 20 --kappa 100 --method sharpened-quadratic --out " + out.string()), 0);
  const fs::path run_dir = out / "sharpened-quadratic";
  EXPECT_EQ(cli("certify " + out.string()), 0);
  EXPECT_EQ(cli("certify " + run_dir.string()), 0);

  std::ifstream in(run_dir / "trace.csv");
  RunResult r;
  r.records = read_trace_csv(in);
  in.close();
  ASSERT_GT(r.records.size(), 6u);
  *r.records[4].lambda *= 3.0;
  {
    std::ofstream csv(run_dir / "trace.csv");
    write_trace_csv(r, csv);
  }
  EXPECT_EQ(cli("certify " + run_dir.string()), 1);
  EXPECT_EQ(cli("certify --json " + out.string()), 1);
}

TEST(Cli, DatasetRunUsesTableSettings) {
  const fs::path out = scratch("svmguide3");
  ASSERT_EQ(cli("run --dataset svmguide3 --data-dir " + kData.string() + " --mu 0.01 --method sharpened --out " +
                out.string()),
            0);
  std::ifstream js(out / "sharpened" / "summary.json");
  const auto j = nlohmann::ordered_json::parse(js);
  EXPECT_EQ(j["problem"]["dim"].get<long>(), 21);
  EXPECT_DOUBLE_EQ(j["problem"]["mu"].get<double>(), 0.01);
  EXPECT_DOUBLE_EQ(j["problem"]["L"].get<double>(), 0.26);
  EXPECT_EQ(j["config"]["correction"].get<bool>(), false);
}

TEST(Cli, ConfigFileWithOverrides) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "exp.cfg");
    cfg << "# quadratic sweep point\nproblem = quadratic\nd = 12\nkappa = 40\nmethods = bfgs\nout = "
        << (dir / "ignored").string() << "\n";
  }
  ASSERT_EQ(cli("run " + (dir / "exp.cfg").string() + " --method greedy --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "greedy" / "trace.csv"));
  EXPECT_FALSE(fs::exists(dir / "out" / "bfgs"));
  EXPECT_FALSE(fs::exists(dir / "ignored"));
}

TEST(Cli, BenchPrintsGrid) {
  const fs::path out = scratch("bench");
  fs::create_directories(out);
  const std::string cmd =
      kBinary + " bench --d 5,8 --kappa 10 --method bfgs,sharpened-quadratic > " + (out / "b.csv").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  std::istringstream lines(slurp(out / "b.csv"));
  std::string line;
  int rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("d,kappa,seed,method", 0), 0u);
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
