#include "hsforest/estimands.hpp"

#include <algorithm>
#include <cmath>

#include "hsforest/errors.hpp"

namespace hsforest {

double quantile(std::span<const double> values, double prob) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw InputError("quantile probability outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalSummary summarize_draws(std::span<const double> draws, double level) {
  if (draws.size() < 2) throw InputError("interval summary needs at least 2 draws");
  if (!(level > 0.0 && level < 1.0)) throw InputError("credible level must lie in (0, 1)");
  IntervalSummary s;
  s.level = level;
  double total = 0.0;
  for (double d : draws) total += d;
  s.mean = total / static_cast<double>(draws.size());
  s.lower = quantile(draws, 0.5 * (1.0 - level));
  s.upper = quantile(draws, 0.5 * (1.0 + level));
  return s;
}

DrawSummary summarize(const PosteriorDraws& draws, double level) {
  if (draws.ate.size() < 2) throw InputError("summarize needs at least 2 retained draws");
  DrawSummary out;
  out.level = level;
  out.ate = summarize_draws(draws.ate, level);
  const Eigen::Index n = draws.cate.rows();
  const auto d = static_cast<std::size_t>(draws.cate.cols());
  out.cate.reserve(static_cast<std::size_t>(n));
  std::vector<double> row(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) row[k] = draws.cate(i, static_cast<Eigen::Index>(k));
    out.cate.push_back(summarize_draws(row, level));
  }
  return out;
}

Metrics evaluate(const DrawSummary& summary, std::span<const double> truth_cate,
                 double truth_ate) {
  if (summary.cate.size() != truth_cate.size()) {
    throw InputError("evaluate: truth length does not match the summary");
  }
  if (truth_cate.empty()) throw InputError("evaluate: no observations");
  Metrics m;
  double se = 0.0;
  double covered = 0.0;
  double len = 0.0;
  for (std::size_t i = 0; i < truth_cate.size(); ++i) {
    const auto& s = summary.cate[i];
    se += (s.mean - truth_cate[i]) * (s.mean - truth_cate[i]);
    covered += s.covers(truth_cate[i]) ? 1.0 : 0.0;
    len += s.length();
  }
  const auto n = static_cast<double>(truth_cate.size());
  m.rmse_cate = std::sqrt(se / n);
  m.cover_cate = covered / n;
  m.len_cate = len / n;
  m.rmse_ate = std::abs(summary.ate.mean - truth_ate);
  m.cover_ate = summary.ate.covers(truth_ate) ? 1.0 : 0.0;
  m.len_ate = summary.ate.length();
  return m;
}

double c_index(std::span<const double> scores, std::span<const double> y,
               std::span<const int> delta) {
  if (scores.size() != y.size() || y.size() != delta.size()) {
    throw InputError("c_index: length mismatch");
  }
  if (y.size() < 2) throw InputError("c_index needs at least 2 observations");
  double concordant = 0.0;
  double comparable = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (delta[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (!(y[i] < y[j])) continue;
      comparable += 1.0;
      if (scores[i] < scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0.0) throw EstimationError("c_index: no comparable pairs");
  return concordant / comparable;
}

}  // namespace hsforest
