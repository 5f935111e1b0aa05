#pragma once

#include <cstdint>
#include <random>

namespace hsforest {

// Seedable random stream. Two streams built from the same (seed, stream_id)
// produce the same sequence; different stream ids give unrelated sequences.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Derive an independent child stream; deterministic in (seed, stream_id, child).
  RngStream split(std::uint64_t child) const;

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();  // rate 1
  double gamma(double shape);  // unit scale
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Standard normal density, distribution and quantile.
double normal_pdf(double z);
double normal_cdf(double z);
// log(1 - Phi(z)), accurate far into the upper tail.
double normal_log_sf(double z);
double normal_quantile(double p);
// phi(z) / (1 - Phi(z)).
double inverse_mills(double z);

// log densities used by the move ratios
double log_normal_pdf(double x, double mean, double variance);
// Inverse-gamma with density proportional to x^{-(shape+1)} exp(-scale/x).
double log_inverse_gamma_pdf(double x, double shape, double scale);

double sample_inverse_gamma(double shape, double scale, RngStream& rng);

// N(mean, sd^2) restricted to (lower, upper). Bounds may be +-infinity.
// Inverse-CDF sampling for mild truncation; exponential rejection when the
// interval starts more than 2 sd beyond the mean.
double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RngStream& rng);

// Standardized one-sided truncation beyond this many sd is rejected.
inline constexpr double kTruncationTailLimit = 38.0;

}  // namespace hsforest
