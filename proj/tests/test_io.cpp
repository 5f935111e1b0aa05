#include <filesystem>
#include <string>

#include "doctest.h"
#include "hsforest/errors.hpp"
#include "hsforest/io.hpp"
#include "hsforest/simgen.hpp"

using namespace hsforest;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hsforest_io_" + name)).string();
}

}  // namespace

TEST_CASE("dataset csv round trip is exact") {
  ScenarioSpec s;
  s.family = Family::Friedman;
  s.n = 40;
  s.p = 6;
  s.seed = 3;
  const auto g = generate(s);
  const std::string text = dataset_to_csv(g.data);
  CHECK(text.rfind("time,status,treatment,x1,x2,x3,x4,x5,x6\n", 0) == 0);
  const Dataset back = dataset_from_csv(text);
  CHECK(back.X == g.data.X);
  CHECK(back.time == g.data.time);
  CHECK(back.status == g.data.status);
  CHECK(back.treatment == g.data.treatment);
  CHECK(dataset_to_csv(back) == text);

  const std::string path = temp_path("roundtrip.csv");
  write_dataset_csv(path, g.data);
  CHECK(read_text_file(path) == text);
  CHECK(read_dataset_csv(path).X == g.data.X);
  std::filesystem::remove(path);
}

TEST_CASE("malformed rows name the data row") {
  const std::string head = "time,status,treatment,x1\n";
  CHECK_THROWS_WITH_AS(dataset_from_csv(head + "1,1,0,0.5\n2,1,1,abc\n"),
                       doctest::Contains("row 2"), InputError);
  CHECK_THROWS_WITH_AS(dataset_from_csv(head + "1,1,0,0.5\n2,1,1\n"), doctest::Contains("row 2"),
                       InputError);
  CHECK_THROWS_WITH_AS(dataset_from_csv(head + "1,2,0,0.5\n"), doctest::Contains("row 1"), InputError);
  CHECK_THROWS_WITH_AS(dataset_from_csv(head + "-1,1,0,0.5\n"), doctest::Contains("row 1"), InputError);
  CHECK_THROWS_AS(dataset_from_csv("a,b,c,d\n1,1,0,0.5\n"), InputError);
  CHECK_THROWS_AS(dataset_from_csv(head), InputError);
  CHECK_THROWS_AS(read_dataset_csv(temp_path("does_not_exist.csv")), InputError);
}

TEST_CASE("format_double keeps 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("truth sidecar round trip") {
  Eigen::VectorXd cate(3);
  cate << 1.5, -0.25, 1.0 / 7.0;
  const std::string path = temp_path("truth.csv");
  write_truth_csv(path, cate, 0.125);
  CHECK(read_text_file(path).rfind("# ate=0.125\ncate\n", 0) == 0);
  double ate = 0.0;
  CHECK(read_truth_csv(path, &ate) == cate);
  CHECK(ate == 0.125);
  std::filesystem::remove(path);
}

TEST_CASE("draws csv columns") {
  PosteriorDraws d;
  d.cate = Eigen::MatrixXd(2, 3);
  d.cate << 1, 2, 3, 4, 5, 6;
  d.ate = {2.5, 3.5, 4.5};
  d.sigma2 = {1.0, 1.1, 1.2};
  const std::string path = temp_path("draws.csv");
  write_draws_csv(path, d);
  const std::string text = read_text_file(path);
  CHECK(text.rfind("ate,sigma2,cate_1,cate_2\n2.5,1,1,4\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 4);

  PosteriorDraws single;
  single.sigma2 = {0.5, 0.75};
  write_draws_csv(path, single);
  CHECK(read_text_file(path) == "sigma2\n0.5\n0.75\n");
  std::filesystem::remove(path);
}
