#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsforest/distributions.hpp"
#include "hsforest/horseshoe.hpp"
#include "hsforest/rj_moves.hpp"
#include "hsforest/tree.hpp"

namespace hsforest {

enum class OutcomeKind { Survival, Continuous, Binary };

const char* outcome_name(OutcomeKind kind);
OutcomeKind parse_outcome(const std::string& name);

// For survival outcomes `time` holds follow-up times on the original scale and
// `status` the event indicators. Continuous outcomes use `time` as the response
// (any sign) and ignore `status`; binary outcomes use `status` as the label.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXi treatment;
  Eigen::VectorXd time;
  Eigen::VectorXi status;
  OutcomeKind outcome = OutcomeKind::Survival;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  // Throws InputError on shape mismatch or out-of-range values.
  void validate(bool need_treatment) const;
};

// Covariates and treatment of rows to predict; treatment may be empty for single-forest fits.
struct PredictionSet {
  Eigen::MatrixXd X;
  Eigen::VectorXi treatment;
};

// Affine map between log-time units and the sampler's standardized units.
struct Standardizer {
  double center = 0.0;
  double scale = 1.0;

  double standardize(double log_value) const { return (log_value - center) / scale; }
  double destandardize(double z) const { return center + scale * z; }
};

// Censored-normal maximum likelihood fit of log(y) with no covariates.
// Throws EstimationError without events or when Newton fails to converge in 100 steps.
Standardizer standardize_outcome(std::span<const double> y, std::span<const int> delta);

// Sum-of-trees with cached per-row leaf ids and fit.
struct ForestState {
  ShrinkageConfig cfg;
  std::vector<Tree> trees;
  std::vector<GlobalShrinkage> globals;
  std::vector<std::vector<NodeId>> leaf_of;
  Eigen::VectorXd fit;
  MoveCounters counters;

  ForestState() = default;
  ForestState(const ShrinkageConfig& cfg, Eigen::Index n);

  std::size_t size() const { return trees.size(); }
  double tree_value(std::size_t j, Eigen::Index i) const {
    return trees[j].leaf(leaf_of[j][static_cast<std::size_t>(i)]).h;
  }
  void recompute_fit();
  // Largest |fit - sum of routed predictions| over rows of X.
  double fit_error(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  double mean_leaves() const;
};

// Inputs of one backfitting sweep for y = offset + w * F(x) + e. `target` is y - offset.
struct SweepInputs {
  const SplitSampler* splits = nullptr;
  std::span<const double> target;
  std::span<const double> weights;
  std::span<const std::uint8_t> active;
  double sigma2 = 1.0;
  TreePrior prior;
  MoveConfig moves;
};

// Residual that tree j is updated against: target - w * (fit - g_j).
void tree_residuals(const ForestState& forest, std::size_t j, const SweepInputs& in,
                    std::vector<double>& out);
// Updates every tree in turn; the fit cache is exact afterwards.
void sweep_forest(ForestState& forest, const SweepInputs& in, RngStream& rng);

enum class ForestRole { Prognostic, Treatment };

// Full chain state of the causal model, in standardized units.
struct CausalState {
  ForestState prognostic;
  ForestState treatment;
  double sigma2 = 1.0;
  Eigen::VectorXd logT;
  bool invariant_codes = false;
  double b0 = -0.5;
  double b1 = 0.5;

  // Multiplier of the treatment forest for each row: A_i, or b_{A_i} with invariant codes.
  Eigen::VectorXd treatment_weights(const Eigen::VectorXi& A) const;
};

// logT - (fit_f - g_j) - w * fit_tau for the prognostic forest,
// logT - fit_f - w * (fit_tau - g_j) for the treatment forest.
Eigen::VectorXd compute_residuals(const CausalState& state, const Eigen::VectorXi& A,
                                  ForestRole role, std::size_t j);

// Redraws censored entries of logT above their standardized censoring time.
// TailOverflowError carries the offending row.
void augment_censored(Eigen::VectorXd& logT, const Eigen::VectorXd& mean, double sigma2,
                      const Eigen::VectorXd& lower, const Eigen::VectorXi& status,
                      RngStream& rng);

InverseGammaParams sigma2_conditional(std::span<const double> residuals, double nu_prior,
                                      double psi_prior);
double update_sigma2(std::span<const double> residuals, double nu_prior, double psi_prior,
                     RngStream& rng);

// Latent z ~ N(fit, 1) truncated to z > 0 for label 1 and z < 0 for label 0.
void probit_augment(Eigen::VectorXd& latent, const Eigen::VectorXi& labels,
                    const Eigen::VectorXd& fit, RngStream& rng);

// Conjugate update of (b0, b1) with independent N(0, 1/2) priors from the regression of
// `response` on (1 - A) * fit_tau and A * fit_tau.
std::pair<double, double> update_treatment_codes(const Eigen::VectorXd& response,
                                                 const Eigen::VectorXd& fit_tau,
                                                 const Eigen::VectorXi& A, double sigma2,
                                                 RngStream& rng);

struct ChainConfig {
  int m_f = 200;
  int m_tau = 200;
  double k = 0.1;
  double a = 0.95;
  double b = 2.0;
  int max_depth = -1;  // negative: unbounded
  MoveConfig moves;
  double omega_f = 0.5;
  double omega_tau = 0.5;
  double omega_single = 1.0;
  int iterations = 7500;  // total, burn-in included
  int burnin = 2500;
  int thin = 1;
  double nu_prior = 3.0;
  double psi_prior = 1.0;
  std::uint64_t seed = 0;
  bool invariant_codes = false;
  bool propensity = true;
  int propensity_trees = 200;
  int propensity_iterations = 1500;
  int propensity_burnin = 500;
  int progress_every = 0;  // 0: silent

  // Throws InputError on inconsistent settings.
  void validate() const;
  TreePrior tree_prior() const;
};

struct Progress {
  int iteration = 0;
  double sigma2 = 0.0;
  MoveCounters prognostic;
  MoveCounters treatment;
};

using ProgressCallback = std::function<void(const Progress&)>;

// Retained draws. `cate` is n x D in log-time units; `ate[d]` is the column mean.
// `fit_mean`/`fit_sd` summarize the predicted log time (probability for binary
// outcomes) of each training row under its observed treatment.
struct PosteriorDraws {
  Eigen::MatrixXd cate;
  std::vector<double> ate;
  std::vector<double> sigma2;
  std::vector<double> mean_leaves_f;
  std::vector<double> mean_leaves_tau;
  Eigen::VectorXd fit_mean;
  Eigen::VectorXd fit_sd;
  Eigen::VectorXd test_fit_mean;
  Eigen::VectorXd test_cate_mean;
  Eigen::VectorXd propensity;
  MoveCounters prognostic_moves;
  MoveCounters treatment_moves;
  Standardizer standardizer;

  std::size_t draws() const { return ate.empty() ? sigma2.size() : ate.size(); }
};

struct PropensityFit {
  Eigen::VectorXd train;
  Eigen::VectorXd test;
};

// Probit horseshoe forest for P(A = 1 | x); posterior mean clipped to [0.01, 0.99].
// Throws EstimationError when only one arm is present.
PropensityFit fit_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const ChainConfig& cfg, RngStream& rng,
                             const Eigen::MatrixXd* X_test = nullptr);

PosteriorDraws run_causal_chain(const Dataset& data, const ChainConfig& cfg,
                                const PredictionSet* test = nullptr,
                                const ProgressCallback& progress = {});

// One forest on the outcome alone (omega_single, m_f trees).
PosteriorDraws run_horseshoe_forest(const Dataset& data, const ChainConfig& cfg,
                                    const PredictionSet* test = nullptr,
                                    const ProgressCallback& progress = {});

}  // namespace hsforest
