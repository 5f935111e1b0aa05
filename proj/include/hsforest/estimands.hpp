#pragma once

#include <span>
#include <vector>

#include "hsforest/sampler.hpp"

namespace hsforest {

// Empirical quantile with linear interpolation between order statistics:
// h = (D - 1) * prob, result x_(floor h) + (h - floor h) * (x_(floor h + 1) - x_(floor h)),
// with 0-based order statistics. Throws InputError on an empty input or prob outside [0, 1].
double quantile(std::span<const double> values, double prob);

struct IntervalSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  double length() const { return upper - lower; }
  bool covers(double value) const { return lower <= value && value <= upper; }
};

// Equal-tailed interval: quantiles (1 - level)/2 and (1 + level)/2. Needs >= 2 draws.
IntervalSummary summarize_draws(std::span<const double> draws, double level = 0.95);

struct DrawSummary {
  std::vector<IntervalSummary> cate;
  IntervalSummary ate;
  double level = 0.95;
};

// Throws InputError with fewer than 2 draws.
DrawSummary summarize(const PosteriorDraws& draws, double level = 0.95);

struct Metrics {
  double rmse_cate = 0.0;
  double cover_cate = 0.0;
  double len_cate = 0.0;
  double rmse_ate = 0.0;
  double cover_ate = 0.0;
  double len_ate = 0.0;
};

// Throws InputError when the truth is not aligned with the summary.
Metrics evaluate(const DrawSummary& summary, std::span<const double> truth_cate,
                 double truth_ate);

// Harrell's C. A pair (i, j) is comparable when delta_i = 1 and y_i < y_j; it is
// concordant when score_i < score_j and counts 1/2 on tied scores. Pairs with
// tied y are skipped. Throws EstimationError without comparable pairs.
double c_index(std::span<const double> scores, std::span<const double> y,
               std::span<const int> delta);

}  // namespace hsforest
