#include "hsforest/horseshoe.hpp"

#include <tuple>

#include "hsforest/distributions.hpp"
#include "hsforest/errors.hpp"

namespace hsforest {

ShrinkageConfig ShrinkageConfig::make(double k, int m, double omega) {
  if (!(k > 0.0) || m < 1 || !(omega > 0.0)) {
    throw InputError("shrinkage config requires k > 0, m >= 1 and omega > 0");
  }
  ShrinkageConfig c;
  c.k = k;
  c.m = m;
  c.omega = omega;
  c.alpha = k / std::sqrt(static_cast<double>(m));
  return c;
}

GlobalShrinkage initial_global(const ShrinkageConfig& cfg) {
  return GlobalShrinkage{cfg.alpha * cfg.alpha, 1.0};
}

NormalParams leaf_height_conditional(double n, double sum, double sigma2, double tau2,
                                     double lambda2, double omega) {
  if (!(n > 0.0)) throw PreconditionError("leaf_height_conditional: empty leaf");
  const double precision = n + sigma2 / (tau2 * lambda2 * omega);
  return NormalParams{sum / precision, sigma2 / precision};
}

InverseGammaParams local_scale_conditional(double h, double tau2, double omega, double nu) {
  return {1.0, 1.0 / nu + h * h / (2.0 * tau2 * omega)};
}

InverseGammaParams local_aux_conditional(double lambda2, double alpha) {
  return {1.0, 1.0 / (alpha * alpha) + 1.0 / lambda2};
}

InverseGammaParams global_scale_conditional(std::span<const double> heights,
                                            std::span<const double> lambda2s, double xi,
                                            double omega) {
  if (heights.size() != lambda2s.size() || heights.empty()) {
    throw InputError("global shrinkage update: heights and lambda lists must match and be non-empty");
  }
  double ss = 0.0;
  for (std::size_t l = 0; l < heights.size(); ++l) ss += heights[l] * heights[l] / lambda2s[l];
  return {0.5 * (static_cast<double>(heights.size()) + 1.0), 1.0 / xi + ss / (2.0 * omega)};
}

InverseGammaParams global_aux_conditional(double tau2, double alpha) {
  return {1.0, 1.0 / (alpha * alpha) + 1.0 / tau2};
}

std::pair<double, double> update_local_shrinkage(double h, double tau2, double omega, double nu,
                                                 double alpha, RngStream& rng) {
  const auto lp = local_scale_conditional(h, tau2, omega, nu);
  const double lambda2 = sample_inverse_gamma(lp.shape, lp.scale, rng);
  const auto np = local_aux_conditional(lambda2, alpha);
  return {lambda2, sample_inverse_gamma(np.shape, np.scale, rng)};
}

GlobalShrinkage update_global_shrinkage(std::span<const double> heights,
                                        std::span<const double> lambda2s, double xi,
                                        double omega, double alpha, RngStream& rng) {
  const auto tp = global_scale_conditional(heights, lambda2s, xi, omega);
  GlobalShrinkage g;
  g.tau2 = sample_inverse_gamma(tp.shape, tp.scale, rng);
  const auto xp = global_aux_conditional(g.tau2, alpha);
  g.xi = sample_inverse_gamma(xp.shape, xp.scale, rng);
  return g;
}

void refresh_leaf_block(Tree& tree, std::span<const LeafStats> stats, GlobalShrinkage& shrink,
                        const ShrinkageConfig& cfg, double sigma2, RngStream& rng) {
  const auto leaves = tree.leaves();
  if (stats.size() != leaves.size()) {
    throw InputError("refresh_leaf_block: stats are not aligned with the tree's leaves");
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    LeafParams& p = tree.leaf(leaves[l]);
    const auto c = leaf_height_conditional(stats[l].n, stats[l].sum, sigma2, shrink.tau2,
                                           p.lambda2, cfg.omega);
    p.h = c.mean + std::sqrt(c.variance) * rng.normal();
  }
  std::vector<double> heights(leaves.size());
  std::vector<double> lambda2s(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    LeafParams& p = tree.leaf(leaves[l]);
    std::tie(p.lambda2, p.nu) =
        update_local_shrinkage(p.h, shrink.tau2, cfg.omega, p.nu, cfg.alpha, rng);
    heights[l] = p.h;
    lambda2s[l] = p.lambda2;
  }
  shrink = update_global_shrinkage(heights, lambda2s, shrink.xi, cfg.omega, cfg.alpha, rng);
}

double log_leaf_prior(const LeafParams& leaf, double tau2, const ShrinkageConfig& cfg) {
  return log_normal_pdf(leaf.h, 0.0, cfg.omega * leaf.lambda2 * tau2) +
         log_inverse_gamma_pdf(leaf.lambda2, 0.5, 1.0 / leaf.nu) +
         log_inverse_gamma_pdf(leaf.nu, 0.5, 1.0 / (cfg.alpha * cfg.alpha));
}

}  // namespace hsforest
