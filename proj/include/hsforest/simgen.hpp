#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>

#include "hsforest/distributions.hpp"
#include "hsforest/sampler.hpp"

namespace hsforest {

enum class Family { Linear, Friedman, Homogeneous, Null, DenseHomogeneous, DenseHeterogeneous };
enum class ErrorKind { Normal, Gumbel, Logistic };

const char* family_name(Family f);
Family parse_family(const std::string& name);
const char* error_name(ErrorKind e);
ErrorKind parse_error(const std::string& name);

struct ScenarioSpec {
  Family family = Family::Linear;
  int n = 200;
  int p = 100;
  double noise_var = 3.0;
  double censor_target = 0.35;  // 0: no censoring
  ErrorKind error = ErrorKind::Normal;
  std::optional<double> copula_rho;
  double sparsity_f = 0.1;
  double sparsity_tau = 0.05;
  std::uint64_t seed = 0;

  // Throws InputError for invalid sizes, rates or families needing p >= 5.
  void validate() const;
};

// Coefficient draws shared by every row of a scenario.
struct ScenarioCoefficients {
  Eigen::VectorXd beta_f;
  Eigen::VectorXd beta_tau;
};

struct GeneratedData {
  Dataset data;
  Eigen::VectorXd truth_cate;
  double truth_ate = 0.0;
  double censoring_rate = 0.0;
  double eta = 0.0;
  Eigen::VectorXd propensity;
  Eigen::VectorXd log_time;  // uncensored log T
  ScenarioCoefficients coefficients;
};

ScenarioCoefficients draw_coefficients(const ScenarioSpec& spec);

double propensity_score(const ScenarioSpec& spec, const ScenarioCoefficients& c,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x);
double prognostic_function(const ScenarioSpec& spec, const ScenarioCoefficients& c,
                           const Eigen::Ref<const Eigen::RowVectorXd>& x);
double treatment_effect(const ScenarioSpec& spec, const ScenarioCoefficients& c,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Outcome error with variance noise_var: normal, Gumbel with location -beta*gamma and
// scale sqrt(6 noise_var)/pi, or logistic with scale sqrt(3 noise_var)/pi.
double sample_error(ErrorKind kind, double noise_var, RngStream& rng);

// Block Gaussian copula: blocks of 50 columns with correlation rho^{|j-k|/2}, mapped to [0,1].
Eigen::MatrixXd copula_covariates(int n, int p, double rho, RngStream& rng);

// Fraction censored under C ~ Exp(eta), from `mc` fresh draws of the scenario.
double censoring_rate(const ScenarioSpec& spec, double eta, int mc = 100000,
                      std::uint64_t stream = 101);

// Censoring rate eta hitting spec.censor_target within `tolerance` by bisection on
// log eta over [1e-6, 1e6]. Returns 0 for a zero target. Throws CalibrationError.
double calibrate_censoring(const ScenarioSpec& spec, int mc = 100000, double tolerance = 0.005);

GeneratedData generate(const ScenarioSpec& spec);

}  // namespace hsforest
