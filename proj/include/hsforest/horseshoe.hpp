#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "hsforest/tree.hpp"

namespace hsforest {

class RngStream;

// Leaf prior h ~ N(0, omega * lambda^2 * tau^2), with half-Cauchy(0, alpha) scales.
struct ShrinkageConfig {
  double omega = 1.0;
  double k = 0.1;
  int m = 200;
  double alpha = 0.1 / std::sqrt(200.0);

  static ShrinkageConfig make(double k, int m, double omega);
};

// Per-tree global scale tau^2 and its auxiliary xi.
struct GlobalShrinkage {
  double tau2 = 1.0;
  double xi = 1.0;
};

// Initial state: tau^2 = alpha^2 (half-Cauchy median), xi = 1.
GlobalShrinkage initial_global(const ShrinkageConfig& cfg);

// Sufficient statistics of one leaf for a weighted response y = base + w * g(x) + e:
// n = sum of w^2 and sum = sum of w * residual. With unit weights these are
// the row count and the residual sum.
struct LeafStats {
  double n = 0.0;
  double sum = 0.0;
};

struct NormalParams {
  double mean = 0.0;
  double variance = 1.0;
};

struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

// Conditional of h given residual stats. The prior variance omega*lambda^2*tau^2 is
// not scaled by sigma^2, so the prior precision enters as sigma^2 / (omega*lambda^2*tau^2).
// Throws PreconditionError when n <= 0.
NormalParams leaf_height_conditional(double n, double sum, double sigma2, double tau2,
                                     double lambda2, double omega);

InverseGammaParams local_scale_conditional(double h, double tau2, double omega, double nu);
InverseGammaParams local_aux_conditional(double lambda2, double alpha);
// Throws InputError when the lists differ in length or are empty.
InverseGammaParams global_scale_conditional(std::span<const double> heights,
                                            std::span<const double> lambda2s, double xi,
                                            double omega);
InverseGammaParams global_aux_conditional(double tau2, double alpha);

// Draws lambda^2 then nu. Returns (lambda2, nu).
std::pair<double, double> update_local_shrinkage(double h, double tau2, double omega, double nu,
                                                 double alpha, RngStream& rng);
// Draws tau^2 then xi.
GlobalShrinkage update_global_shrinkage(std::span<const double> heights,
                                        std::span<const double> lambda2s, double xi,
                                        double omega, double alpha, RngStream& rng);

// Gibbs scan of one tree: all heights, then every (lambda^2, nu), then (tau^2, xi).
// `stats[l]` belongs to tree.leaves()[l].
void refresh_leaf_block(Tree& tree, std::span<const LeafStats> stats, GlobalShrinkage& shrink,
                        const ShrinkageConfig& cfg, double sigma2, RngStream& rng);

// log p(h | lambda^2, tau^2) + log p(lambda^2 | nu) + log p(nu).
double log_leaf_prior(const LeafParams& leaf, double tau2, const ShrinkageConfig& cfg);

}  // namespace hsforest
