#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "hsforest/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "hsforest_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string in_dir(const std::string& name) { return (work_dir() / name).string(); }

// Exit status of the CLI; stdout and stderr go to a log file in the work dir.
int run(const std::string& args) {
  const std::string cmd = std::string(HSFOREST_CLI_PATH) + " " + args + " > " + in_dir("last.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

const char* kFastChain = " --m-f 10 --m-tau 5 --propensity-trees 5 --propensity-iterations 20 --propensity-burnin 10";

}  // namespace

TEST_CASE("simulate writes deterministic data and truth") {
  const std::string a = in_dir("a.csv"), b = in_dir("b.csv");
  const std::string ta = in_dir("ta.csv"), tb = in_dir("tb.csv");
  const std::string args = "simulate --family linear --n 30 --p 6 --seed 4";
  REQUIRE(run(args + " --out-data " + a + " --out-truth " + ta) == 0);
  REQUIRE(run(args + " --out-data " + b + " --out-truth " + tb) == 0);
  CHECK(hsforest::read_text_file(a) == hsforest::read_text_file(b));
  CHECK(hsforest::read_text_file(ta) == hsforest::read_text_file(tb));
  CHECK(lines_of(hsforest::read_text_file(a)).size() == 31);

  REQUIRE(run("simulate --family null --n 20 --p 3 --seed 1 --out-data " + a + " --out-truth " + ta) == 0);
  double ate = 1.0;
  const auto cate = hsforest::read_truth_csv(ta, &ate);
  CHECK(ate == 0.0);
  CHECK(cate.isZero());
}

TEST_CASE("invalid scenarios and options exit with the input code") {
  const std::string out = " --out-data " + in_dir("x.csv") + " --out-truth " + in_dir("xt.csv");
  CHECK(run("simulate --family friedman --p 4" + out) == 2);
  CHECK(hsforest::read_text_file(in_dir("last.log")).find("friedman requires p >= 5") != std::string::npos);
  CHECK(run("simulate --family weibull" + out) == 2);
  CHECK(run("simulate --bogus-flag 1" + out) == 2);
  CHECK(run("") == 2);
}

TEST_CASE("fit writes one draw row per retained iteration") {
  const std::string data = in_dir("fit.csv");
  REQUIRE(run("simulate --family homogeneous --n 20 --p 3 --seed 2 --out-data " + data +
              " --out-truth " + in_dir("fit_truth.csv")) == 0);
  const std::string base = "fit --data " + data + " --iterations 10 --burnin 5 --seed 9" + kFastChain;
  REQUIRE(run(base + " --out-dir " + in_dir("fit1")) == 0);
  REQUIRE(run(base + " --out-dir " + in_dir("fit2")) == 0);
  const std::string d1 = hsforest::read_text_file(in_dir("fit1/draws.csv"));
  CHECK(lines_of(d1).size() == 6);
  CHECK(fields_of(lines_of(d1)[0]).size() == 22);
  CHECK(d1 == hsforest::read_text_file(in_dir("fit2/draws.csv")));

  const auto summary = nlohmann::json::parse(hsforest::read_text_file(in_dir("fit1/summary.json")));
  CHECK(summary["draws"].get<int>() == 5);
  CHECK(summary["cate"].size() == 20);
  CHECK(summary["ate"]["lower"].get<double>() <= summary["ate"]["upper"].get<double>());

  REQUIRE(run("fit --single --data " + data + " --iterations 10 --burnin 5 --m-f 5 --out-dir " + in_dir("fit3")) == 0);
  CHECK(lines_of(hsforest::read_text_file(in_dir("fit3/draws.csv")))[0] == "sigma2");
}

TEST_CASE("fit rejects malformed data and single-arm designs") {
  const std::string bad = in_dir("bad.csv");
  hsforest::write_text_file(bad, "time,status,treatment,x1\n1,1,0,0.5\n2,1,1,oops\n");
  CHECK(run("fit --data " + bad + " --iterations 4 --burnin 2 --out-dir " + in_dir("bad")) == 2);
  CHECK(hsforest::read_text_file(in_dir("last.log")).find("row 2") != std::string::npos);

  const std::string arm = in_dir("arm.csv");
  hsforest::write_text_file(arm, "time,status,treatment,x1\n1,1,1,0.1\n2,1,1,0.5\n3,0,1,0.9\n");
  CHECK(run("fit --data " + arm + " --iterations 4 --burnin 2 --out-dir " + in_dir("arm")) == 2);
  CHECK(run("fit --data " + in_dir("missing.csv") + " --out-dir " + in_dir("missing")) == 2);
}

TEST_CASE("replicate writes per-rep rows and a mean row") {
  const std::string out = in_dir("rep.csv");
  const std::string base = "replicate --family null --n 30 --p 3 --iterations 12 --burnin 6 --seed 5" +
                           std::string(kFastChain) + " --out " + out;
  REQUIRE(run(base + " --reps 1") == 0);
  auto lines = lines_of(hsforest::read_text_file(out));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "rep,rmse_cate,cover_cate,len_cate,rmse_ate,cover_ate,len_ate");
  const auto row = fields_of(lines[1]);
  const auto mean = fields_of(lines[2]);
  CHECK(row[0] == "1");
  CHECK(mean[0] == "mean");
  for (std::size_t c = 1; c < row.size(); ++c) CHECK(std::stod(row[c]) == std::stod(mean[c]));

  REQUIRE(run(base + " --reps 2 --threads 2") == 0);
  const std::string two = hsforest::read_text_file(out);
  REQUIRE(run(base + " --reps 2 --threads 1") == 0);
  CHECK(hsforest::read_text_file(out) == two);
  lines = lines_of(two);
  CHECK(lines.size() == 4);
  for (const auto& l : lines) CHECK(fields_of(l).size() == 7);
}

TEST_CASE("cv reports one row per k and separates monotone data") {
  // log time rises with x1 and censoring is absent, so any sensible ranking is near perfect
  std::string csv = "time,status,treatment,x1,x2\n";
  for (int i = 0; i < 60; ++i) {
    const double x = (i + 0.5) / 60.0;
    const double noise = 0.5 * static_cast<double>((i * 37) % 11) / 11.0 - 0.25;
    csv += hsforest::format_double(std::exp(4.0 * x + 0.1 * noise)) + ",1," + std::to_string(i % 2) + "," +
           hsforest::format_double(x) + "," + hsforest::format_double(static_cast<double>((i * 17) % 60) / 60.0) +
           "\n";
  }
  const std::string data = in_dir("cv.csv");
  hsforest::write_text_file(data, csv);
  const std::string out = in_dir("cv_out.csv");
  const std::string base = "cv --data " + data + " --folds 3 --iterations 1000 --burnin 500 --m-f 50 --seed 3 --out " + out;
  REQUIRE(run(base + " --k-grid 1") == 0);
  const std::string first = hsforest::read_text_file(out);
  const auto lines = lines_of(first);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "k,mean,sd,folds_used");
  CHECK(std::stod(fields_of(lines[1])[1]) > 0.95);
  CHECK(lines[2] == "# best_k=1");
  REQUIRE(run(base + " --k-grid 1") == 0);
  CHECK(hsforest::read_text_file(out) == first);
  REQUIRE(run(base + " --k-grid 0.1,1 --threads 2") == 0);
  CHECK(lines_of(hsforest::read_text_file(out)).size() == 4);
}

TEST_CASE("config files supply long options") {
  const std::string cfg = in_dir("sim.ini");
  hsforest::write_text_file(cfg, "family=null\nn=15\np=2\nseed=8\nout-data=" + in_dir("cfg.csv") +
                                     "\nout-truth=" + in_dir("cfg_truth.csv") + "\n");
  REQUIRE(run("simulate --config " + cfg) == 0);
  CHECK(lines_of(hsforest::read_text_file(in_dir("cfg.csv"))).size() == 16);
  CHECK(lines_of(hsforest::read_text_file(in_dir("cfg.csv")))[0] == "time,status,treatment,x1,x2");
  // explicit flags override the file
  REQUIRE(run("simulate --n 12 --config " + cfg) == 0);
  CHECK(lines_of(hsforest::read_text_file(in_dir("cfg.csv"))).size() == 13);
  hsforest::write_text_file(in_dir("bad.ini"), "family null\n");
  CHECK(run("simulate --config " + in_dir("bad.ini")) == 2);
  hsforest::write_text_file(in_dir("unknown.ini"), "colour=blue\n");
  CHECK(run("simulate --config " + in_dir("unknown.ini")) == 2);
}
