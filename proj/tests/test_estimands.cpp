#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "hsforest/distributions.hpp"
#include "hsforest/errors.hpp"
#include "hsforest/estimands.hpp"

using namespace hsforest;

namespace {

// Exhaustive pair enumeration, kept apart from the library's loop.
double brute_c_index(const std::vector<double>& s, const std::vector<double>& y, const std::vector<int>& d) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i == j || d[i] != 1 || !(y[i] < y[j])) continue;
      den += 1.0;
      num += s[i] < s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / den;
}

PosteriorDraws draws_from(const Eigen::MatrixXd& cate) {
  PosteriorDraws d;
  d.cate = cate;
  for (Eigen::Index k = 0; k < cate.cols(); ++k) {
    d.ate.push_back(cate.col(k).mean());
    d.sigma2.push_back(1.0);
  }
  return d;
}

}  // namespace

TEST_CASE("quantile with linear interpolation") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(quantile(v, 0.05) == doctest::Approx(5.95));
  CHECK(quantile(v, 0.95) == doctest::Approx(95.05));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 100.0);
  std::reverse(v.begin(), v.end());
  CHECK(quantile(v, 0.5) == doctest::Approx(50.5));
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), InputError);
  CHECK_THROWS_AS(quantile(v, 1.5), InputError);
}

TEST_CASE("interval summaries") {
  const auto c = summarize_draws(std::vector<double>(10, 2.5));
  CHECK(c.mean == 2.5);
  CHECK(c.lower == 2.5);
  CHECK(c.upper == 2.5);
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const auto s = summarize_draws(v, 0.9);
  CHECK(s.lower == doctest::Approx(5.95));
  CHECK(s.upper == doctest::Approx(95.05));
  CHECK(s.mean == doctest::Approx(50.5));
  CHECK(s.covers(50.0));
  CHECK(!s.covers(99.0));
  CHECK_THROWS_AS(summarize_draws(std::vector<double>{1.0}), InputError);

  RngStream rng(1);
  std::vector<double> sym;
  for (int k = 0; k < 100000; ++k) {
    const double x = rng.normal();
    sym.push_back(x);
    sym.push_back(-x);
  }
  const auto z = summarize_draws(sym);
  CHECK(std::abs(z.mean) < 1e-12);
  CHECK(z.lower == doctest::Approx(-z.upper).epsilon(1e-12));
}

TEST_CASE("interval length grows with the level") {
  RngStream rng(2);
  std::vector<double> v(501);
  for (auto& x : v) x = rng.normal();
  double prev = 0.0;
  for (double level = 0.05; level < 1.0; level += 0.05) {
    const double len = summarize_draws(v, level).length();
    CHECK(len >= prev);
    prev = len;
  }
}

TEST_CASE("summarize and evaluate") {
  Eigen::MatrixXd cate(3, 4);
  cate << 1, 1, 1, 1,  //
      2, 2, 2, 2,      //
      0, 1, 0, 1;
  const auto draws = draws_from(cate);
  const auto s = summarize(draws);
  REQUIRE(s.cate.size() == 3);
  CHECK(s.cate[0].length() == 0.0);

  const std::vector<double> truth{1.0, 2.0, 0.5};
  const auto m = evaluate(s, truth, 4.0 / 3.0 + 0.5 / 3.0);
  CHECK(m.rmse_cate == doctest::Approx(0.0));
  CHECK(m.cover_cate == 1.0);
  CHECK(m.len_cate == doctest::Approx(s.cate[2].length() / 3.0));

  const std::vector<double> shifted{0.0, 1.0, -0.5};
  CHECK(evaluate(s, shifted, 0.0).rmse_cate == doctest::Approx(1.0));
  // only the third interval [0, 1] could cover, and -0.5 lies outside it
  CHECK(evaluate(s, shifted, 0.0).cover_cate == 0.0);
  CHECK_THROWS_AS(evaluate(s, std::vector<double>{1.0}, 0.0), InputError);
  CHECK_THROWS_AS(summarize(draws_from(cate.leftCols(1))), InputError);

  // ATE interval [0, 1] covers 0.5 with length 1
  DrawSummary one;
  one.ate = IntervalSummary{0.5, 0.0, 1.0, 0.95};
  one.cate = {IntervalSummary{0.5, 0.5, 0.5, 0.95}};
  const auto a = evaluate(one, std::vector<double>{0.5}, 0.5);
  CHECK(a.cover_ate == 1.0);
  CHECK(a.len_ate == 1.0);
  CHECK(a.rmse_ate == 0.0);
}

TEST_CASE("metrics are permutation equivariant") {
  RngStream rng(3);
  Eigen::MatrixXd cate(20, 50);
  for (Eigen::Index i = 0; i < cate.size(); ++i) cate.data()[i] = rng.normal();
  std::vector<double> truth(20);
  for (auto& t : truth) t = 0.3 * rng.normal();
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Eigen::MatrixXd pc(20, 50);
  std::vector<double> pt(20);
  for (int i = 0; i < 20; ++i) {
    pc.row(i) = cate.row(perm[i]);
    pt[i] = truth[perm[i]];
  }
  const auto a = evaluate(summarize(draws_from(cate)), truth, 0.1);
  const auto b = evaluate(summarize(draws_from(pc)), pt, 0.1);
  CHECK(a.rmse_cate == doctest::Approx(b.rmse_cate).epsilon(1e-14));
  CHECK(a.cover_cate == b.cover_cate);
  CHECK(a.len_cate == doctest::Approx(b.len_cate).epsilon(1e-14));
}

TEST_CASE("c-index examples") {
  CHECK(c_index(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}, std::vector<int>{1, 1, 1, 1}) == 1.0);
  CHECK(c_index(std::vector<double>{7, 7, 7}, std::vector<double>{1, 2, 3}, std::vector<int>{1, 1, 1}) == 0.5);
  CHECK(c_index(std::vector<double>{0.5, 1.5, 2.0}, std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 1}) == 1.0);
  CHECK(c_index(std::vector<double>{3, 2, 1}, std::vector<double>{1, 2, 3}, std::vector<int>{1, 1, 1}) == 0.0);
  CHECK_THROWS_AS(c_index(std::vector<double>{1, 2}, std::vector<double>{1, 2}, std::vector<int>{0, 0}), EstimationError);
  // tied times are not comparable
  CHECK_THROWS_AS(c_index(std::vector<double>{1, 2}, std::vector<double>{1, 1}, std::vector<int>{1, 1}), EstimationError);
}

TEST_CASE("c-index matches brute force and ignores monotone transforms") {
  RngStream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5 + static_cast<int>(rng.index(40));
    std::vector<double> s(n), y(n), t(n);
    std::vector<int> d(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::round(4.0 * rng.normal()) / 4.0;  // ties in scores
      y[i] = std::round(10.0 * rng.uniform()) + 1.0;  // ties in times
      d[i] = rng.uniform() < 0.7;
      t[i] = std::exp(3.0 * s[i]) + 1.0;
    }
    if (std::find(d.begin(), d.end(), 1) == d.end()) d[0] = 1;
    double oracle;
    try {
      oracle = brute_c_index(s, y, d);
    } catch (...) {
      continue;
    }
    if (!std::isfinite(oracle)) continue;
    CHECK(c_index(s, y, d) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(c_index(t, y, d) == doctest::Approx(oracle).epsilon(1e-14));
  }
}
