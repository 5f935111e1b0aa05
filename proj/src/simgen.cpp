#include "hsforest/simgen.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "hsforest/errors.hpp"

namespace hsforest {
namespace {

constexpr int kCopulaBlock = 50;

// stream ids of the independent scenario components
constexpr std::uint64_t kStreamCoefficients = 1;
constexpr std::uint64_t kStreamCovariates = 2;
constexpr std::uint64_t kStreamTreatment = 3;
constexpr std::uint64_t kStreamErrors = 4;
constexpr std::uint64_t kStreamCensoring = 5;
constexpr std::uint64_t kStreamCalibration = 100;

bool is_dense(Family f) {
  return f == Family::DenseHomogeneous || f == Family::DenseHeterogeneous;
}

double col(const Eigen::Ref<const Eigen::RowVectorXd>& x, int j) {
  return j < x.size() ? x[j] : 0.0;
}

struct Rows {
  Eigen::MatrixXd X;
  Eigen::VectorXi A;
  Eigen::VectorXd logT;
  Eigen::VectorXd tau;
  Eigen::VectorXd e;
};

Rows draw_rows(const ScenarioSpec& spec, const ScenarioCoefficients& c, int n,
               std::uint64_t stream_offset) {
  const std::uint64_t seed = spec.seed;
  RngStream cov_rng(seed, kStreamCovariates + stream_offset);
  RngStream trt_rng(seed, kStreamTreatment + stream_offset);
  RngStream err_rng(seed, kStreamErrors + stream_offset);
  Rows r;
  if (spec.copula_rho) {
    r.X = copula_covariates(n, spec.p, *spec.copula_rho, cov_rng);
  } else {
    r.X.resize(n, spec.p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < spec.p; ++j) r.X(i, j) = cov_rng.uniform();
    }
  }
  r.A.resize(n);
  r.logT.resize(n);
  r.tau.resize(n);
  r.e.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto x = r.X.row(i);
    r.e[i] = propensity_score(spec, c, x);
    r.A[i] = trt_rng.uniform() < r.e[i] ? 1 : 0;
    r.tau[i] = treatment_effect(spec, c, x);
    r.logT[i] = prognostic_function(spec, c, x) + r.A[i] * r.tau[i] +
                sample_error(spec.error, spec.noise_var, err_rng);
  }
  return r;
}

// log E_i of unit-rate exponentials; censoring time C = E / eta.
Eigen::VectorXd log_exponentials(int n, RngStream& rng) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = std::log(rng.exponential());
  return out;
}

double rate_from(const Eigen::VectorXd& logT, const Eigen::VectorXd& logE, double eta) {
  const double le = std::log(eta);
  Eigen::Index censored = 0;
  for (Eigen::Index i = 0; i < logT.size(); ++i) {
    if (logE[i] - le < logT[i]) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(logT.size());
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::Friedman: return "friedman";
    case Family::Homogeneous: return "homogeneous";
    case Family::Null: return "null";
    case Family::DenseHomogeneous: return "dense-homogeneous";
    case Family::DenseHeterogeneous: return "dense-heterogeneous";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::Linear, Family::Friedman, Family::Homogeneous, Family::Null,
                   Family::DenseHomogeneous, Family::DenseHeterogeneous}) {
    if (name == family_name(f)) return f;
  }
  throw InputError("unknown scenario family '" + name + "'");
}

const char* error_name(ErrorKind e) {
  switch (e) {
    case ErrorKind::Normal: return "normal";
    case ErrorKind::Gumbel: return "gumbel";
    case ErrorKind::Logistic: return "logistic";
  }
  return "?";
}

ErrorKind parse_error(const std::string& name) {
  for (ErrorKind e : {ErrorKind::Normal, ErrorKind::Gumbel, ErrorKind::Logistic}) {
    if (name == error_name(e)) return e;
  }
  throw InputError("unknown error distribution '" + name + "'");
}

void ScenarioSpec::validate() const {
  if (n < 1) throw InputError("scenario: n must be at least 1");
  if (p < 1) throw InputError("scenario: p must be at least 1");
  const bool needs_five = family == Family::Linear || family == Family::Friedman ||
                          family == Family::DenseHeterogeneous;
  if (needs_five && p < 5) {
    throw InputError(std::string(family_name(family)) + " requires p >= 5");
  }
  if (!(noise_var > 0.0)) throw InputError("scenario: noise variance must be positive");
  if (!(censor_target >= 0.0 && censor_target <= 0.95)) {
    throw InputError("scenario: censoring target must lie in [0, 0.95]");
  }
  if (copula_rho && !(*copula_rho > 0.0 && *copula_rho < 1.0)) {
    throw InputError("scenario: copula rho must lie in (0, 1)");
  }
  if (!(sparsity_f >= 0.0 && sparsity_f <= 1.0 && sparsity_tau >= 0.0 && sparsity_tau <= 1.0)) {
    throw InputError("scenario: sparsity levels must lie in [0, 1]");
  }
}

ScenarioCoefficients draw_coefficients(const ScenarioSpec& spec) {
  ScenarioCoefficients c;
  c.beta_f = Eigen::VectorXd::Zero(spec.p);
  c.beta_tau = Eigen::VectorXd::Zero(spec.p);
  if (is_dense(spec.family)) {
    for (int j = 0; j < spec.p; ++j) c.beta_f[j] = 1.0 / ((j + 1.0) * (j + 1.0));
    return c;
  }
  RngStream rng(spec.seed, kStreamCoefficients);
  for (int j = 0; j < spec.p; ++j) {
    const bool slab = rng.uniform() < spec.sparsity_f;
    const double z = rng.normal();
    c.beta_f[j] = slab ? z : 0.0;
  }
  for (int j = 0; j < spec.p; ++j) {
    const bool slab = rng.uniform() < spec.sparsity_tau;
    const double z = rng.normal();
    c.beta_tau[j] = slab ? z : 0.0;
  }
  return c;
}

double propensity_score(const ScenarioSpec& spec, const ScenarioCoefficients& c,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (is_dense(spec.family)) return normal_cdf(x.dot(c.beta_f.transpose()));
  return normal_cdf(-0.5 + 0.4 * col(x, 0) - 0.1 * col(x, 2) + 0.3 * col(x, 4));
}

double prognostic_function(const ScenarioSpec&, const ScenarioCoefficients& c,
                           const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return x.dot(c.beta_f.transpose());
}

double treatment_effect(const ScenarioSpec& spec, const ScenarioCoefficients& c,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  switch (spec.family) {
    case Family::Linear:
      return 1.0 + x[0] - 2.0 * x[1] + 3.0 * x[2] - 4.0 * x[3] + 5.0 * x[4] +
             x.dot(c.beta_tau.transpose());
    case Family::Friedman:
      return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) +
             20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4];
    case Family::Homogeneous: return 5.0;
    case Family::Null: return 0.0;
    case Family::DenseHomogeneous: return 1.0;
    case Family::DenseHeterogeneous:
      return 1.0 + x[0] - x[1] / 2.0 + x[2] / 3.0 - x[3] / 4.0 + x[4] / 5.0;
  }
  return 0.0;
}

double sample_error(ErrorKind kind, double noise_var, RngStream& rng) {
  switch (kind) {
    case ErrorKind::Normal: return std::sqrt(noise_var) * rng.normal();
    case ErrorKind::Gumbel: {
      const double beta = std::sqrt(6.0 * noise_var) / std::numbers::pi;
      return -beta * std::numbers::egamma - beta * std::log(-std::log(rng.uniform()));
    }
    case ErrorKind::Logistic: {
      const double s = std::sqrt(3.0 * noise_var) / std::numbers::pi;
      const double u = rng.uniform();
      return s * std::log(u / (1.0 - u));
    }
  }
  return 0.0;
}

Eigen::MatrixXd copula_covariates(int n, int p, double rho, RngStream& rng) {
  if (!(rho > 0.0 && rho < 1.0)) throw InputError("copula rho must lie in (0, 1)");
  Eigen::MatrixXd X(n, p);
  for (int start = 0; start < p; start += kCopulaBlock) {
    const int size = std::min(kCopulaBlock, p - start);
    Eigen::MatrixXd sigma(size, size);
    for (int j = 0; j < size; ++j) {
      for (int k = 0; k < size; ++k) sigma(j, k) = std::pow(rho, std::abs(j - k) / 2.0);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("copula block is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd z(size);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < size; ++j) z[j] = rng.normal();
      const Eigen::VectorXd corr = L * z;
      for (int j = 0; j < size; ++j) X(i, start + j) = normal_cdf(corr[j]);
    }
  }
  return X;
}

double censoring_rate(const ScenarioSpec& spec, double eta, int mc, std::uint64_t stream) {
  spec.validate();
  if (eta <= 0.0) return 0.0;
  const auto c = draw_coefficients(spec);
  const Rows r = draw_rows(spec, c, mc, stream * 16);
  RngStream rng(spec.seed, stream * 16 + kStreamCensoring);
  return rate_from(r.logT, log_exponentials(mc, rng), eta);
}

double calibrate_censoring(const ScenarioSpec& spec, int mc, double tolerance) {
  spec.validate();
  if (spec.censor_target == 0.0) return 0.0;
  const auto c = draw_coefficients(spec);
  const Rows r = draw_rows(spec, c, mc, kStreamCalibration * 16);
  RngStream rng(spec.seed, kStreamCalibration * 16 + kStreamCensoring);
  const Eigen::VectorXd logE = log_exponentials(mc, rng);

  double lo = std::log(1e-6);
  double hi = std::log(1e6);
  const double target = spec.censor_target;
  if (rate_from(r.logT, logE, std::exp(lo)) > target + tolerance ||
      rate_from(r.logT, logE, std::exp(hi)) < target - tolerance) {
    throw CalibrationError("censoring target cannot be bracketed on [1e-6, 1e6]");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double rate = rate_from(r.logT, logE, std::exp(mid));
    if (std::abs(rate - target) <= tolerance) return std::exp(mid);
    if (rate < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw CalibrationError("censoring calibration did not reach the tolerance");
}

GeneratedData generate(const ScenarioSpec& spec) {
  spec.validate();
  GeneratedData g;
  g.coefficients = draw_coefficients(spec);
  const Rows r = draw_rows(spec, g.coefficients, spec.n, 0);
  g.eta = calibrate_censoring(spec);

  const int n = spec.n;
  g.data.X = r.X;
  g.data.treatment = r.A;
  g.data.time.resize(n);
  g.data.status.resize(n);
  g.data.outcome = OutcomeKind::Survival;
  RngStream cens(spec.seed, kStreamCensoring);
  int censored = 0;
  for (int i = 0; i < n; ++i) {
    const double t = std::exp(r.logT[i]);
    const double e = cens.exponential();
    const double c = g.eta > 0.0 ? e / g.eta : std::numeric_limits<double>::infinity();
    if (c < t) {
      g.data.time[i] = c;
      g.data.status[i] = 0;
      ++censored;
    } else {
      g.data.time[i] = t;
      g.data.status[i] = 1;
    }
  }
  g.truth_cate = r.tau;
  g.truth_ate = r.tau.mean();
  g.censoring_rate = static_cast<double>(censored) / n;
  g.propensity = r.e;
  g.log_time = r.logT;
  return g;
}

}  // namespace hsforest
