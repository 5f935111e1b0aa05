#include "hsforest/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hsforest/errors.hpp"

namespace hsforest {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(stream_id ^ 0x5851f42d4c957f2dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Robert (1995) exponential proposal for N(0,1) on [a, b), a > 0.
double tail_exponential(double a, double b, RngStream& rng) {
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / rate;
    if (z >= b) continue;
    const double d = z - rate;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

// Uniform proposal on a short interval [a, b) with a > 0.
double tail_uniform(double a, double b, RngStream& rng) {
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (std::log(rng.uniform()) <= 0.5 * (a * a - z * z)) return z;
  }
}

// Standard normal restricted to (a, b) with a >= 0 (upper half).
double upper_standard(double a, double b, RngStream& rng) {
  if (a > 2.0) {
    // exponential proposal wins unless the interval is short relative to 1/a
    if (b - a > 1.0 / a) return tail_exponential(a, b, rng);
    return tail_uniform(a, b, rng);
  }
  // inverse CDF on the survival scale keeps precision for a > 0
  const double qa = 0.5 * std::erfc(a * kInvSqrt2);
  const double qb = std::isinf(b) ? 0.0 : 0.5 * std::erfc(b * kInvSqrt2);
  const double q = qb + (qa - qb) * rng.uniform();
  return -normal_quantile(q);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(stream_id_)), child);
}

double RngStream::uniform() {
  // 53 random bits mapped to (0,1)
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::gamma(double shape) {
  if (shape == 1.0) return exponential();
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_log_sf(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z * kInvSqrt2));
  // asymptotic Mills ratio expansion
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - kLogSqrt2Pi - std::log(z) + std::log(series);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: probability outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double inverse_mills(double z) {
  if (z < 30.0) return normal_pdf(z) / (0.5 * std::erfc(z * kInvSqrt2));
  return std::exp(-0.5 * z * z - kLogSqrt2Pi - normal_log_sf(z));
}

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * d * d / variance - 0.5 * std::log(variance) - kLogSqrt2Pi;
}

double log_inverse_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    std::ostringstream msg;
    msg << "inverse gamma requires positive finite shape and scale (shape=" << shape
        << ", scale=" << scale << ")";
    throw DomainError(msg.str());
  }
  double x = scale / rng.gamma(shape);
  // gamma draws can underflow to zero for tiny shapes
  if (!(x < std::numeric_limits<double>::infinity())) x = std::numeric_limits<double>::max();
  return x;
}

double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RngStream& rng) {
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DomainError("truncated normal: sd must be positive");
  if (!(lower < upper)) throw DomainError("truncated normal: lower bound must be below upper");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  if (a > kTruncationTailLimit || b < -kTruncationTailLimit) {
    std::ostringstream msg;
    msg << "truncated normal: interval (" << a << ", " << b << ") sd lies beyond the "
        << kTruncationTailLimit << " sd tail limit";
    throw TailOverflowError(msg.str());
  }

  double z;
  if (a >= 0.0) {
    z = upper_standard(a, b, rng);
  } else if (b <= 0.0) {
    z = -upper_standard(-b, -a, rng);
  } else {
    // interval straddles the mode
    const double pa = normal_cdf(a);
    const double pb = normal_cdf(b);
    z = normal_quantile(pa + (pb - pa) * rng.uniform());
  }

  double x = mean + sd * z;
  if (!(x > lower)) x = std::nextafter(lower, upper);
  if (!(x < upper)) x = std::nextafter(upper, lower);
  return x;
}

}  // namespace hsforest
