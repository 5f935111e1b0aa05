#include "hsforest/sampler.hpp"

#include <algorithm>
#include <climits>
#include <limits>
#include <tuple>
#include <cmath>
#include <sstream>

#include "hsforest/errors.hpp"

namespace hsforest {

const char* outcome_name(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Survival: return "survival";
    case OutcomeKind::Continuous: return "continuous";
    case OutcomeKind::Binary: return "binary";
  }
  return "?";
}

OutcomeKind parse_outcome(const std::string& name) {
  if (name == "survival") return OutcomeKind::Survival;
  if (name == "continuous") return OutcomeKind::Continuous;
  if (name == "binary") return OutcomeKind::Binary;
  throw InputError("unknown outcome kind '" + name + "'");
}

void Dataset::validate(bool need_treatment) const {
  const Eigen::Index rows = X.rows();
  if (rows < 1) throw InputError("dataset has no rows");
  if (X.cols() < 1) throw InputError("dataset has no covariates");
  if (!X.allFinite()) throw InputError("covariates contain non-finite values");
  if (need_treatment || treatment.size() != 0) {
    if (treatment.size() != rows) throw InputError("treatment length does not match X");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (treatment[i] != 0 && treatment[i] != 1) {
        throw InputError("treatment must be 0 or 1 (row " + std::to_string(i + 1) + ")");
      }
    }
  }
  if (outcome != OutcomeKind::Binary) {
    if (time.size() != rows) throw InputError("outcome length does not match X");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::isfinite(time[i])) throw InputError("non-finite outcome (row " + std::to_string(i + 1) + ")");
      if (outcome == OutcomeKind::Survival && !(time[i] > 0.0)) {
        throw InputError("survival times must be positive (row " + std::to_string(i + 1) + ")");
      }
    }
  }
  if (outcome != OutcomeKind::Continuous) {
    if (status.size() != rows) throw InputError("status length does not match X");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (status[i] != 0 && status[i] != 1) {
        throw InputError("status must be 0 or 1 (row " + std::to_string(i + 1) + ")");
      }
    }
  }
}

namespace {

struct CensoredLoglik {
  double value = 0.0;
  double g_mu = 0.0;
  double g_eta = 0.0;
  double h_mumu = 0.0;
  double h_mueta = 0.0;
  double h_etaeta = 0.0;
};

// Intercept-only censored normal log likelihood in (mu, eta = log s).
CensoredLoglik censored_loglik(std::span<const double> logy, std::span<const int> delta,
                               double mu, double eta, bool derivatives) {
  CensoredLoglik out;
  const double s = std::exp(eta);
  for (std::size_t i = 0; i < logy.size(); ++i) {
    const double z = (logy[i] - mu) / s;
    if (delta[i] == 1) {
      out.value += -eta - 0.5 * z * z;
      if (derivatives) {
        out.g_mu += z / s;
        out.g_eta += z * z - 1.0;
        out.h_mumu += -1.0 / (s * s);
        out.h_mueta += -2.0 * z / s;
        out.h_etaeta += -2.0 * z * z;
      }
    } else {
      out.value += normal_log_sf(z);
      if (derivatives) {
        const double m = inverse_mills(z);
        const double dm = m * (m - z);
        out.g_mu += m / s;
        out.g_eta += m * z;
        out.h_mumu += -dm / (s * s);
        out.h_mueta += -(dm * z + m) / s;
        out.h_etaeta += -z * (dm * z + m);
      }
    }
  }
  return out;
}

}  // namespace

Standardizer standardize_outcome(std::span<const double> y, std::span<const int> delta) {
  if (y.size() != delta.size()) throw InputError("standardize_outcome: length mismatch");
  if (y.empty()) throw InputError("standardize_outcome: no observations");
  std::vector<double> logy(y.size());
  std::size_t events = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw InputError("standardize_outcome: times must be positive");
    logy[i] = std::log(y[i]);
    if (delta[i] == 1) ++events;
  }
  if (events == 0) throw EstimationError("standardize_outcome: no events");

  double mu = 0.0;
  for (double v : logy) mu += v;
  mu /= static_cast<double>(logy.size());
  double var = 0.0;
  for (double v : logy) var += (v - mu) * (v - mu);
  var /= static_cast<double>(logy.size());
  double eta = var > 1e-12 ? 0.5 * std::log(var) : 0.0;

  const double gtol = 1e-9 * static_cast<double>(logy.size());
  for (int iter = 0; iter < 100; ++iter) {
    const auto c = censored_loglik(logy, delta, mu, eta, true);
    if (std::abs(c.g_mu) < gtol && std::abs(c.g_eta) < gtol) return Standardizer{mu, std::exp(eta)};

    double d_mu = c.g_mu;
    double d_eta = c.g_eta;
    const double det = c.h_mumu * c.h_etaeta - c.h_mueta * c.h_mueta;
    if (c.h_mumu < 0.0 && det > 0.0) {
      // Newton direction -H^{-1} g
      d_mu = -(c.h_etaeta * c.g_mu - c.h_mueta * c.g_eta) / det;
      d_eta = -(-c.h_mueta * c.g_mu + c.h_mumu * c.g_eta) / det;
    }
    double t = 1.0;
    bool moved = false;
    while (t > 1e-14) {
      const double cand = censored_loglik(logy, delta, mu + t * d_mu, eta + t * d_eta, false).value;
      if (std::isfinite(cand) && cand >= c.value) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    const double next_mu = mu + t * d_mu;
    const double next_eta = eta + t * d_eta;
    // stationary in double precision: the gradient is at its rounding floor
    const bool stalled = std::abs(next_mu - mu) <= 1e-13 * (1.0 + std::abs(mu)) &&
                         std::abs(next_eta - eta) <= 1e-13 * (1.0 + std::abs(eta));
    if (stalled && std::abs(c.g_mu) < 1e3 * gtol && std::abs(c.g_eta) < 1e3 * gtol) {
      return Standardizer{mu, std::exp(eta)};
    }
    mu = next_mu;
    eta = next_eta;
    if (!std::isfinite(mu) || !std::isfinite(eta) || eta > 700.0) break;
  }
  throw EstimationError("standardize_outcome: Newton iterations did not converge");
}

ForestState::ForestState(const ShrinkageConfig& c, Eigen::Index n) : cfg(c) {
  LeafParams init;
  init.h = 0.0;
  init.lambda2 = 1.0;
  init.nu = 1.0;
  trees.assign(static_cast<std::size_t>(cfg.m), Tree(init));
  globals.assign(static_cast<std::size_t>(cfg.m), initial_global(cfg));
  leaf_of.assign(static_cast<std::size_t>(cfg.m),
                 std::vector<NodeId>(static_cast<std::size_t>(n), Tree::root()));
  fit = Eigen::VectorXd::Zero(n);
}

void ForestState::recompute_fit() {
  fit.setZero();
  for (std::size_t j = 0; j < trees.size(); ++j) {
    for (Eigen::Index i = 0; i < fit.size(); ++i) fit[i] += tree_value(j, i);
  }
}

double ForestState::fit_error(const Eigen::MatrixXd& X) const {
  const Eigen::VectorXd direct = predict(X);
  return (direct - fit).cwiseAbs().maxCoeff();
}

Eigen::VectorXd ForestState::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const Tree& t : trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] += t.leaf(t.route(X, i)).h;
  }
  return out;
}

double ForestState::mean_leaves() const {
  if (trees.empty()) return 0.0;
  double total = 0.0;
  for (const Tree& t : trees) total += static_cast<double>(t.n_leaves());
  return total / static_cast<double>(trees.size());
}

void tree_residuals(const ForestState& forest, std::size_t j, const SweepInputs& in,
                    std::vector<double>& out) {
  const std::size_t n = in.target.size();
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = in.weights.empty() ? 1.0 : in.weights[i];
    out[i] = in.target[i] - w * (forest.fit[ii] - forest.tree_value(j, ii));
  }
}

void sweep_forest(ForestState& forest, const SweepInputs& in, RngStream& rng) {
  const std::size_t n = in.target.size();
  if (static_cast<Eigen::Index>(n) != forest.fit.size()) {
    throw InputError("sweep_forest: target length does not match the forest");
  }
  std::vector<double> residuals(n);
  std::vector<double> before(n);
  MoveContext ctx;
  ctx.splits = in.splits;
  ctx.residuals = residuals;
  ctx.weights = in.weights;
  ctx.active = in.active;
  ctx.sigma2 = in.sigma2;
  ctx.shrinkage = forest.cfg;
  ctx.prior = in.prior;
  ctx.moves = in.moves;
  for (std::size_t j = 0; j < forest.trees.size(); ++j) {
    tree_residuals(forest, j, in, residuals);
    for (std::size_t i = 0; i < n; ++i) before[i] = forest.tree_value(j, static_cast<Eigen::Index>(i));
    rj_update_tree(forest.trees[j], forest.globals[j], forest.leaf_of[j], ctx, rng,
                   &forest.counters);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      forest.fit[ii] += forest.tree_value(j, ii) - before[i];
    }
  }
  forest.recompute_fit();
}

Eigen::VectorXd CausalState::treatment_weights(const Eigen::VectorXi& A) const {
  Eigen::VectorXd w(A.size());
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    w[i] = invariant_codes ? (A[i] == 1 ? b1 : b0) : static_cast<double>(A[i]);
  }
  return w;
}

Eigen::VectorXd compute_residuals(const CausalState& state, const Eigen::VectorXi& A,
                                  ForestRole role, std::size_t j) {
  const Eigen::VectorXd w = state.treatment_weights(A);
  Eigen::VectorXd r(state.logT.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (role == ForestRole::Prognostic) {
      r[i] = state.logT[i] - (state.prognostic.fit[i] - state.prognostic.tree_value(j, i)) -
             w[i] * state.treatment.fit[i];
    } else {
      r[i] = state.logT[i] - state.prognostic.fit[i] -
             w[i] * (state.treatment.fit[i] - state.treatment.tree_value(j, i));
    }
  }
  return r;
}

void augment_censored(Eigen::VectorXd& logT, const Eigen::VectorXd& mean, double sigma2,
                      const Eigen::VectorXd& lower, const Eigen::VectorXi& status,
                      RngStream& rng) {
  const double sd = std::sqrt(sigma2);
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logT.size(); ++i) {
    if (status[i] == 1) continue;
    try {
      logT[i] = sample_truncated_normal(mean[i], sd, lower[i], inf, rng);
    } catch (const TailOverflowError& e) {
      throw TailOverflowError(std::string(e.what()) + " (row " + std::to_string(i + 1) + ")", i);
    }
  }
}

InverseGammaParams sigma2_conditional(std::span<const double> residuals, double nu_prior,
                                      double psi_prior) {
  double ss = 0.0;
  for (double r : residuals) ss += r * r;
  return {0.5 * (nu_prior + static_cast<double>(residuals.size())),
          0.5 * (nu_prior * psi_prior + ss)};
}

double update_sigma2(std::span<const double> residuals, double nu_prior, double psi_prior,
                     RngStream& rng) {
  const auto p = sigma2_conditional(residuals, nu_prior, psi_prior);
  return sample_inverse_gamma(p.shape, p.scale, rng);
}

void probit_augment(Eigen::VectorXd& latent, const Eigen::VectorXi& labels,
                    const Eigen::VectorXd& fit, RngStream& rng) {
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < latent.size(); ++i) {
    latent[i] = labels[i] == 1 ? sample_truncated_normal(fit[i], 1.0, 0.0, inf, rng)
                               : sample_truncated_normal(fit[i], 1.0, -inf, 0.0, rng);
  }
}

std::pair<double, double> update_treatment_codes(const Eigen::VectorXd& response,
                                                 const Eigen::VectorXd& fit_tau,
                                                 const Eigen::VectorXi& A, double sigma2,
                                                 RngStream& rng) {
  constexpr double kPriorPrecision = 2.0;
  double xx[2] = {0.0, 0.0};
  double xy[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    const int g = A[i] == 1 ? 1 : 0;
    xx[g] += fit_tau[i] * fit_tau[i];
    xy[g] += fit_tau[i] * response[i];
  }
  double out[2];
  for (int g = 0; g < 2; ++g) {
    const double precision = xx[g] / sigma2 + kPriorPrecision;
    out[g] = (xy[g] / sigma2) / precision + rng.normal() / std::sqrt(precision);
  }
  return {out[0], out[1]};
}

void ChainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("chain config: " + msg); };
  if (m_f < 1 || m_tau < 1) fail("tree counts must be at least 1");
  if (!(k > 0.0)) fail("k must be positive");
  if (!(a > 0.0 && a < 1.0)) fail("a must lie in (0, 1)");
  if (!(b >= 0.0)) fail("b must be non-negative");
  if (!(omega_f > 0.0 && omega_tau > 0.0 && omega_single > 0.0)) fail("omega must be positive");
  if (burnin < 0 || iterations < burnin) fail("need iterations >= burnin >= 0");
  if (thin < 1) fail("thin must be at least 1");
  if (!(nu_prior > 0.0 && psi_prior > 0.0)) fail("sigma^2 prior parameters must be positive");
  if (propensity && (propensity_trees < 1 || propensity_burnin < 0 ||
                     propensity_iterations <= propensity_burnin)) {
    fail("propensity chain needs trees >= 1 and iterations > burnin >= 0");
  }
  if (progress_every < 0) fail("progress_every must be non-negative");
  moves.validate();
}

TreePrior ChainConfig::tree_prior() const {
  return TreePrior{a, b, max_depth < 0 ? INT_MAX : max_depth};
}

namespace {

std::size_t retained_count(int iterations, int burnin, int thin) {
  if (iterations <= burnin) return 0;
  return static_cast<std::size_t>((iterations - burnin + thin - 1) / thin);
}

bool is_retained(int it, int burnin, int thin) {
  return it >= burnin && (it - burnin) % thin == 0;
}

void check_finite(const Eigen::VectorXd& v, double sigma2, int iteration) {
  if (!std::isfinite(sigma2) || !v.allFinite()) {
    throw NumericalError("non-finite chain state at iteration " + std::to_string(iteration + 1));
  }
}

// Running per-row mean and standard deviation.
struct RowMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  std::size_t count = 0;

  explicit RowMoments(Eigen::Index n) : mean(Eigen::VectorXd::Zero(n)), m2(Eigen::VectorXd::Zero(n)) {}
  void add(const Eigen::VectorXd& x) {
    ++count;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
  }
  Eigen::VectorXd sd() const {
    if (count < 2) return Eigen::VectorXd::Zero(mean.size());
    return (m2 / static_cast<double>(count - 1)).cwiseSqrt();
  }
};

Standardizer continuous_standardizer(const Eigen::VectorXd& y) {
  const double mu = y.mean();
  double sd = 1.0;
  if (y.size() > 1) {
    const double v = (y.array() - mu).square().sum() / static_cast<double>(y.size() - 1);
    if (v > 0.0) sd = std::sqrt(v);
  }
  return Standardizer{mu, sd};
}

struct SingleSpec {
  OutcomeKind kind = OutcomeKind::Continuous;
  int m = 200;
  double omega = 1.0;
  int iterations = 0;
  int burnin = 0;
  int thin = 1;
};

PosteriorDraws single_chain(const Eigen::MatrixXd& X, const Eigen::VectorXd& time,
                            const Eigen::VectorXi& status, const SingleSpec& spec,
                            const ChainConfig& cfg, RngStream& rng, const Eigen::MatrixXd* X_test,
                            const ProgressCallback& progress) {
  const Eigen::Index n = X.rows();
  PosteriorDraws out;
  double offset = 0.0;
  Eigen::VectorXd y(n);
  Eigen::VectorXd lower;

  switch (spec.kind) {
    case OutcomeKind::Survival: {
      std::vector<double> t(time.data(), time.data() + n);
      std::vector<int> d(status.data(), status.data() + n);
      out.standardizer = standardize_outcome(t, d);
      lower.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) lower[i] = out.standardizer.standardize(std::log(time[i]));
      y = lower;
      break;
    }
    case OutcomeKind::Continuous: {
      out.standardizer = continuous_standardizer(time);
      for (Eigen::Index i = 0; i < n; ++i) y[i] = out.standardizer.standardize(time[i]);
      break;
    }
    case OutcomeKind::Binary: {
      const double rate = status.cast<double>().mean();
      if (rate <= 0.0 || rate >= 1.0) throw EstimationError("binary outcome has a single class");
      offset = normal_quantile(rate);
      y.setZero();
      break;
    }
  }

  const ShrinkageConfig shrink = ShrinkageConfig::make(cfg.k, spec.m, spec.omega);
  ForestState forest(shrink, n);
  const SplitSampler splits(X);
  double sigma2 = 1.0;
  const std::size_t draws = retained_count(spec.iterations, spec.burnin, spec.thin);
  out.sigma2.reserve(draws);
  out.mean_leaves_f.reserve(draws);

  RowMoments train(n);
  RowMoments test(X_test != nullptr ? X_test->rows() : 0);
  Eigen::VectorXd target(n);
  Eigen::VectorXd scratch(n);

  for (int it = 0; it < spec.iterations; ++it) {
    if (spec.kind == OutcomeKind::Survival) {
      augment_censored(y, forest.fit, sigma2, lower, status, rng);
    } else if (spec.kind == OutcomeKind::Binary) {
      scratch = forest.fit.array() + offset;
      probit_augment(y, status, scratch, rng);
    }
    target = y.array() - offset;

    SweepInputs in;
    in.splits = &splits;
    in.target = std::span<const double>(target.data(), static_cast<std::size_t>(n));
    in.sigma2 = sigma2;
    in.prior = cfg.tree_prior();
    in.moves = cfg.moves;
    sweep_forest(forest, in, rng);

    if (spec.kind != OutcomeKind::Binary) {
      scratch = target - forest.fit;
      sigma2 = update_sigma2(std::span<const double>(scratch.data(), static_cast<std::size_t>(n)),
                             cfg.nu_prior, cfg.psi_prior, rng);
    }
    check_finite(forest.fit, sigma2, it);

    if (is_retained(it, spec.burnin, spec.thin)) {
      const double s = out.standardizer.scale;
      out.sigma2.push_back(spec.kind == OutcomeKind::Binary ? 1.0 : sigma2 * s * s);
      out.mean_leaves_f.push_back(forest.mean_leaves());
      if (spec.kind == OutcomeKind::Binary) {
        for (Eigen::Index i = 0; i < n; ++i) scratch[i] = normal_cdf(offset + forest.fit[i]);
      } else {
        for (Eigen::Index i = 0; i < n; ++i) scratch[i] = out.standardizer.destandardize(forest.fit[i]);
      }
      train.add(scratch);
      if (X_test != nullptr) {
        Eigen::VectorXd f = forest.predict(*X_test);
        for (Eigen::Index i = 0; i < f.size(); ++i) {
          f[i] = spec.kind == OutcomeKind::Binary ? normal_cdf(offset + f[i])
                                                  : out.standardizer.destandardize(f[i]);
        }
        test.add(f);
      }
    }
    if (progress && cfg.progress_every > 0 && (it + 1) % cfg.progress_every == 0) {
      Progress p;
      p.iteration = it + 1;
      p.sigma2 = sigma2 * out.standardizer.scale * out.standardizer.scale;
      p.prognostic = forest.counters;
      progress(p);
    }
  }
  out.fit_mean = train.mean;
  out.fit_sd = train.sd();
  if (X_test != nullptr) out.test_fit_mean = test.mean;
  out.prognostic_moves = forest.counters;
  return out;
}

Eigen::MatrixXd append_column(const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  out.col(X.cols()) = v;
  return out;
}

void require_both_arms(const Eigen::VectorXi& A) {
  const auto treated = A.sum();
  if (treated == 0 || treated == A.size()) {
    throw EstimationError("treatment has a single arm; both arms are required");
  }
}

}  // namespace

PropensityFit fit_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const ChainConfig& cfg, RngStream& rng,
                             const Eigen::MatrixXd* X_test) {
  if (A.size() != X.rows()) throw InputError("fit_propensity: length mismatch");
  require_both_arms(A);
  SingleSpec spec;
  spec.kind = OutcomeKind::Binary;
  spec.m = cfg.propensity_trees;
  spec.omega = 1.0;
  spec.iterations = cfg.propensity_iterations;
  spec.burnin = cfg.propensity_burnin;
  spec.thin = 1;
  const PosteriorDraws d = single_chain(X, Eigen::VectorXd(), A, spec, cfg, rng, X_test, {});
  PropensityFit out;
  out.train = d.fit_mean.cwiseMax(0.01).cwiseMin(0.99);
  if (X_test != nullptr) out.test = d.test_fit_mean.cwiseMax(0.01).cwiseMin(0.99);
  return out;
}

PosteriorDraws run_horseshoe_forest(const Dataset& data, const ChainConfig& cfg,
                                    const PredictionSet* test, const ProgressCallback& progress) {
  data.validate(false);
  cfg.validate();
  if (test != nullptr && test->X.cols() != data.X.cols()) {
    throw InputError("prediction rows have a different number of covariates");
  }
  RngStream rng = RngStream(cfg.seed, 0).split(2);
  SingleSpec spec;
  spec.kind = data.outcome;
  spec.m = cfg.m_f;
  spec.omega = cfg.omega_single;
  spec.iterations = cfg.iterations;
  spec.burnin = cfg.burnin;
  spec.thin = cfg.thin;
  return single_chain(data.X, data.time, data.status, spec, cfg, rng,
                      test != nullptr ? &test->X : nullptr, progress);
}

PosteriorDraws run_causal_chain(const Dataset& data, const ChainConfig& cfg,
                                const PredictionSet* test, const ProgressCallback& progress) {
  data.validate(true);
  cfg.validate();
  if (data.outcome == OutcomeKind::Binary) {
    throw InputError("the causal model supports survival and continuous outcomes");
  }
  const auto treated = data.treatment.sum();
  if (treated == 0 || treated == data.n()) {
    throw InputError("treatment has a single arm; both arms are required");
  }
  if (test != nullptr) {
    if (test->X.cols() != data.X.cols()) {
      throw InputError("prediction rows have a different number of covariates");
    }
    if (test->treatment.size() != test->X.rows()) {
      throw InputError("prediction rows need a treatment indicator");
    }
  }

  const Eigen::Index n = data.n();
  const Eigen::VectorXi& A = data.treatment;
  RngStream root(cfg.seed, 0);
  RngStream prop_rng = root.split(1);
  RngStream rng = root.split(2);

  PosteriorDraws out;
  Eigen::VectorXd lower;
  Eigen::VectorXd logT(n);
  if (data.outcome == OutcomeKind::Survival) {
    std::vector<double> t(data.time.data(), data.time.data() + n);
    std::vector<int> d(data.status.data(), data.status.data() + n);
    out.standardizer = standardize_outcome(t, d);
    lower.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      lower[i] = out.standardizer.standardize(std::log(data.time[i]));
    }
    logT = lower;
  } else {
    out.standardizer = continuous_standardizer(data.time);
    for (Eigen::Index i = 0; i < n; ++i) logT[i] = out.standardizer.standardize(data.time[i]);
  }
  const double scale = out.standardizer.scale;

  Eigen::MatrixXd Xf = data.X;
  Eigen::MatrixXd Xf_test;
  if (test != nullptr) Xf_test = test->X;
  if (cfg.propensity) {
    const PropensityFit e =
        fit_propensity(data.X, A, cfg, prop_rng, test != nullptr ? &test->X : nullptr);
    out.propensity = e.train;
    Xf = append_column(data.X, e.train);
    if (test != nullptr) Xf_test = append_column(test->X, e.test);
  }

  CausalState state;
  state.prognostic = ForestState(ShrinkageConfig::make(cfg.k, cfg.m_f, cfg.omega_f), n);
  state.treatment = ForestState(ShrinkageConfig::make(cfg.k, cfg.m_tau, cfg.omega_tau), n);
  state.logT = logT;
  state.invariant_codes = cfg.invariant_codes;
  if (!cfg.invariant_codes) {
    state.b0 = 0.0;
    state.b1 = 1.0;
  }
  const SplitSampler splits_f(Xf);
  const SplitSampler splits_tau(data.X);

  // binary coding: only treated rows inform the treatment forest
  std::vector<std::uint8_t> active;
  if (!cfg.invariant_codes) {
    active.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = A[i] == 1 ? 1 : 0;
  }

  const std::size_t draws = retained_count(cfg.iterations, cfg.burnin, cfg.thin);
  out.cate.resize(n, static_cast<Eigen::Index>(draws));
  out.ate.reserve(draws);
  out.sigma2.reserve(draws);
  out.mean_leaves_f.reserve(draws);
  out.mean_leaves_tau.reserve(draws);
  RowMoments train(n);
  const Eigen::Index n_test = test != nullptr ? test->X.rows() : 0;
  RowMoments test_fit(n_test);
  RowMoments test_cate(n_test);

  Eigen::VectorXd w = state.treatment_weights(A);
  Eigen::VectorXd target(n);
  Eigen::VectorXd scratch(n);
  const auto as_span = [n](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(n));
  };
  std::size_t col = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    if (data.outcome == OutcomeKind::Survival) {
      scratch = state.prognostic.fit + w.cwiseProduct(state.treatment.fit);
      augment_censored(state.logT, scratch, state.sigma2, lower, data.status, rng);
    }

    SweepInputs in;
    in.sigma2 = state.sigma2;
    in.prior = cfg.tree_prior();
    in.moves = cfg.moves;

    target = state.logT - w.cwiseProduct(state.treatment.fit);
    in.splits = &splits_f;
    in.target = as_span(target);
    sweep_forest(state.prognostic, in, rng);

    target = state.logT - state.prognostic.fit;
    in.splits = &splits_tau;
    in.target = as_span(target);
    in.weights = as_span(w);
    in.active = active;
    sweep_forest(state.treatment, in, rng);

    if (cfg.invariant_codes) {
      std::tie(state.b0, state.b1) =
          update_treatment_codes(target, state.treatment.fit, A, state.sigma2, rng);
      w = state.treatment_weights(A);
    }

    scratch = state.logT - state.prognostic.fit - w.cwiseProduct(state.treatment.fit);
    state.sigma2 = update_sigma2(as_span(scratch), cfg.nu_prior, cfg.psi_prior, rng);
    check_finite(state.prognostic.fit + state.treatment.fit, state.sigma2, it);

    if (is_retained(it, cfg.burnin, cfg.thin)) {
      const double mult = state.b1 - state.b0;
      const auto c = static_cast<Eigen::Index>(col++);
      out.cate.col(c) = scale * mult * state.treatment.fit;
      out.ate.push_back(out.cate.col(c).mean());
      out.sigma2.push_back(state.sigma2 * scale * scale);
      out.mean_leaves_f.push_back(state.prognostic.mean_leaves());
      out.mean_leaves_tau.push_back(state.treatment.mean_leaves());
      for (Eigen::Index i = 0; i < n; ++i) {
        scratch[i] = out.standardizer.destandardize(state.prognostic.fit[i] +
                                                    w[i] * state.treatment.fit[i]);
      }
      train.add(scratch);
      if (test != nullptr) {
        const Eigen::VectorXd f = state.prognostic.predict(Xf_test);
        const Eigen::VectorXd t = state.treatment.predict(test->X);
        Eigen::VectorXd pred(n_test);
        for (Eigen::Index i = 0; i < n_test; ++i) {
          const double wi = cfg.invariant_codes ? (test->treatment[i] == 1 ? state.b1 : state.b0)
                                                : static_cast<double>(test->treatment[i]);
          pred[i] = out.standardizer.destandardize(f[i] + wi * t[i]);
        }
        test_fit.add(pred);
        test_cate.add(scale * mult * t);
      }
    }
    if (progress && cfg.progress_every > 0 && (it + 1) % cfg.progress_every == 0) {
      Progress p;
      p.iteration = it + 1;
      p.sigma2 = state.sigma2 * scale * scale;
      p.prognostic = state.prognostic.counters;
      p.treatment = state.treatment.counters;
      progress(p);
    }
  }

  out.fit_mean = train.mean;
  out.fit_sd = train.sd();
  if (test != nullptr) {
    out.test_fit_mean = test_fit.mean;
    out.test_cate_mean = test_cate.mean;
  }
  out.prognostic_moves = state.prognostic.counters;
  out.treatment_moves = state.treatment.counters;
  return out;
}

}  // namespace hsforest
