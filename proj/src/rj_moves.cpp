#include "hsforest/rj_moves.hpp"

#include <cmath>
#include <limits>

#include "hsforest/distributions.hpp"
#include "hsforest/errors.hpp"

namespace hsforest {
namespace {

struct RegionStats {
  LeafStats parent;
  LeafStats left;
  LeafStats right;
};

bool in_region(const Tree& tree, NodeId node, NodeId row_leaf) {
  if (tree.is_leaf(node)) return row_leaf == node;
  const Node& n = tree.node(node);
  return row_leaf == n.left || row_leaf == n.right;
}

// Stats of the region under `node` partitioned by `rule`.
RegionStats split_stats(const Tree& tree, NodeId node, const SplitRule& rule,
                        std::span<const NodeId> leaf_of, const MoveContext& ctx) {
  RegionStats s;
  const Eigen::MatrixXd& X = ctx.splits->matrix();
  const auto col = static_cast<Eigen::Index>(rule.var);
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (!ctx.is_active(i) || !in_region(tree, node, leaf_of[i])) continue;
    const double w = ctx.weight(i);
    const double wn = w * w;
    const double ws = w * ctx.residuals[i];
    s.parent.n += wn;
    s.parent.sum += ws;
    LeafStats& child = rule.goes_left(X(static_cast<Eigen::Index>(i), col)) ? s.left : s.right;
    child.n += wn;
    child.sum += ws;
  }
  return s;
}

// Stats of a nog's children as currently tracked.
RegionStats child_stats(const Tree& tree, NodeId nog, std::span<const NodeId> leaf_of,
                        const MoveContext& ctx) {
  RegionStats s;
  const Node& n = tree.node(nog);
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (!ctx.is_active(i)) continue;
    LeafStats* child = nullptr;
    if (leaf_of[i] == n.left) {
      child = &s.left;
    } else if (leaf_of[i] == n.right) {
      child = &s.right;
    } else {
      continue;
    }
    const double w = ctx.weight(i);
    child->n += w * w;
    child->sum += w * ctx.residuals[i];
    s.parent.n += w * w;
    s.parent.sum += w * ctx.residuals[i];
  }
  return s;
}

std::vector<std::size_t> active_rows(const Tree& tree, NodeId node,
                                     std::span<const NodeId> leaf_of, const MoveContext& ctx) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (ctx.is_active(i) && in_region(tree, node, leaf_of[i])) rows.push_back(i);
  }
  return rows;
}

void require_nonempty(const RegionStats& s, const char* what) {
  if (!(s.left.n > 0.0) || !(s.right.n > 0.0)) {
    throw PreconditionError(std::string(what) + ": rule leaves a child without active rows");
  }
}

double leaf_loglik(const LeafParams& p, const LeafStats& s, double sigma2) {
  return (p.h * s.sum - 0.5 * p.h * p.h * s.n) / sigma2;
}

double log_split(const TreePrior& prior, int depth) {
  return std::log(prior.split_probability(depth));
}

double log_stop(const TreePrior& prior, int depth) {
  return std::log1p(-prior.split_probability(depth));
}

}  // namespace

const char* move_name(MoveKind kind) {
  switch (kind) {
    case MoveKind::Grow: return "grow";
    case MoveKind::Prune: return "prune";
    case MoveKind::Change: return "change";
  }
  return "?";
}

void MoveConfig::validate() const {
  const bool nonneg = p_grow >= 0.0 && p_prune >= 0.0 && p_change >= 0.0;
  if (!nonneg || std::abs(p_grow + p_prune + p_change - 1.0) > 1e-12) {
    throw InputError("move probabilities must be non-negative and sum to 1");
  }
  if (p_grow > 0.0 && !(p_prune > 0.0)) {
    throw InputError("move probabilities: PRUNE must be possible whenever GROW is");
  }
}

double MoveConfig::probability(MoveKind kind) const {
  switch (kind) {
    case MoveKind::Grow: return p_grow;
    case MoveKind::Prune: return p_prune;
    case MoveKind::Change: return p_change;
  }
  return 0.0;
}

double log_kernel_density(const LeafParams& proposed, const LeafParams& seed,
                          const LeafStats& target, double tau2, double sigma2,
                          const ShrinkageConfig& cfg) {
  const auto np = local_aux_conditional(seed.lambda2, cfg.alpha);
  const auto lp = local_scale_conditional(seed.h, tau2, cfg.omega, proposed.nu);
  const auto hp =
      leaf_height_conditional(target.n, target.sum, sigma2, tau2, proposed.lambda2, cfg.omega);
  return log_inverse_gamma_pdf(proposed.nu, np.shape, np.scale) +
         log_inverse_gamma_pdf(proposed.lambda2, lp.shape, lp.scale) +
         log_normal_pdf(proposed.h, hp.mean, hp.variance);
}

LeafParams sample_kernel(const LeafParams& seed, const LeafStats& target, double tau2,
                         double sigma2, const ShrinkageConfig& cfg, RngStream& rng) {
  LeafParams out;
  const auto np = local_aux_conditional(seed.lambda2, cfg.alpha);
  out.nu = sample_inverse_gamma(np.shape, np.scale, rng);
  const auto lp = local_scale_conditional(seed.h, tau2, cfg.omega, out.nu);
  out.lambda2 = sample_inverse_gamma(lp.shape, lp.scale, rng);
  const auto hp =
      leaf_height_conditional(target.n, target.sum, sigma2, tau2, out.lambda2, cfg.omega);
  out.h = hp.mean + std::sqrt(hp.variance) * rng.normal();
  return out;
}

LeafStats leaf_stats(const Tree& tree, NodeId node, std::span<const NodeId> leaf_of,
                     const MoveContext& ctx) {
  LeafStats s;
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (!ctx.is_active(i) || !in_region(tree, node, leaf_of[i])) continue;
    const double w = ctx.weight(i);
    s.n += w * w;
    s.sum += w * ctx.residuals[i];
  }
  return s;
}

std::vector<LeafStats> all_leaf_stats(const Tree& tree, std::span<const NodeId> leaf_of,
                                      const MoveContext& ctx) {
  const auto leaves = tree.leaves();
  std::vector<std::size_t> position(tree.capacity(), 0);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    position[static_cast<std::size_t>(leaves[l])] = l;
  }
  std::vector<LeafStats> stats(leaves.size());
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (!ctx.is_active(i)) continue;
    const double w = ctx.weight(i);
    LeafStats& s = stats[position[static_cast<std::size_t>(leaf_of[i])]];
    s.n += w * w;
    s.sum += w * ctx.residuals[i];
  }
  return stats;
}

Proposal build_grow(const Tree& tree, NodeId leaf, const SplitRule& rule, const LeafParams& left,
                    const LeafParams& right, std::span<const NodeId> leaf_of, double tau2,
                    const MoveContext& ctx) {
  if (!tree.is_leaf(leaf)) throw PreconditionError("build_grow: node is not a leaf");
  const RegionStats s = split_stats(tree, leaf, rule, leaf_of, ctx);
  require_nonempty(s, "build_grow");

  Proposal p;
  p.kind = MoveKind::Grow;
  p.node = leaf;
  p.depth = tree.depth(leaf);
  p.rule = rule;
  p.parent = tree.leaf(leaf);
  p.left = left;
  p.right = right;
  p.parent_stats = s.parent;
  p.left_stats = s.left;
  p.right_stats = s.right;
  p.tau2 = tau2;
  p.n_leaves = tree.n_leaves();
  // the split leaf becomes a nog; its parent stops being one if the sibling was a leaf
  const NodeId up = tree.node(leaf).parent;
  p.n_nogs = tree.n_nogs() + 1 - ((up != kNoNode && tree.is_nog(up)) ? 1 : 0);

  const double s2 = ctx.sigma2;
  p.log_forward = log_kernel_density(left, p.parent, s.left, tau2, s2, ctx.shrinkage) +
                  log_kernel_density(right, p.parent, s.right, tau2, s2, ctx.shrinkage);
  p.log_reverse = log_kernel_density(p.parent, left, s.parent, tau2, s2, ctx.shrinkage);
  return p;
}

Proposal build_prune(const Tree& tree, NodeId nog, const LeafParams& parent,
                     std::span<const NodeId> leaf_of, double tau2, const MoveContext& ctx) {
  if (!tree.is_nog(nog)) throw PreconditionError("build_prune: node is not a nog");
  const RegionStats s = child_stats(tree, nog, leaf_of, ctx);
  require_nonempty(s, "build_prune");
  const Node& n = tree.node(nog);

  Proposal p;
  p.kind = MoveKind::Prune;
  p.node = nog;
  p.depth = n.depth;
  p.rule = n.rule;
  p.parent = parent;
  p.left = tree.leaf(n.left);
  p.right = tree.leaf(n.right);
  p.parent_stats = s.parent;
  p.left_stats = s.left;
  p.right_stats = s.right;
  p.tau2 = tau2;
  p.n_nogs = tree.n_nogs();
  p.n_leaves = tree.n_leaves() - 1;

  const double s2 = ctx.sigma2;
  p.log_forward = log_kernel_density(parent, p.left, s.parent, tau2, s2, ctx.shrinkage);
  p.log_reverse = log_kernel_density(p.left, parent, s.left, tau2, s2, ctx.shrinkage) +
                  log_kernel_density(p.right, parent, s.right, tau2, s2, ctx.shrinkage);
  return p;
}

Proposal build_change(const Tree& tree, NodeId nog, const SplitRule& rule, const LeafParams& left,
                      const LeafParams& right, std::span<const NodeId> leaf_of, double tau2,
                      const MoveContext& ctx) {
  if (!tree.is_nog(nog)) throw PreconditionError("build_change: node is not a nog");
  const RegionStats old_s = child_stats(tree, nog, leaf_of, ctx);
  const RegionStats new_s = split_stats(tree, nog, rule, leaf_of, ctx);
  require_nonempty(new_s, "build_change");
  const Node& n = tree.node(nog);

  Proposal p;
  p.kind = MoveKind::Change;
  p.node = nog;
  p.depth = n.depth;
  p.rule = rule;
  p.old_rule = n.rule;
  p.left = left;
  p.right = right;
  p.old_left = tree.leaf(n.left);
  p.old_right = tree.leaf(n.right);
  p.parent_stats = new_s.parent;
  p.left_stats = new_s.left;
  p.right_stats = new_s.right;
  p.old_left_stats = old_s.left;
  p.old_right_stats = old_s.right;
  p.tau2 = tau2;
  p.n_leaves = tree.n_leaves();
  p.n_nogs = tree.n_nogs();

  const double s2 = ctx.sigma2;
  const auto& c = ctx.shrinkage;
  p.log_forward = log_kernel_density(left, p.old_left, new_s.left, tau2, s2, c) +
                  log_kernel_density(right, p.old_right, new_s.right, tau2, s2, c);
  p.log_reverse = log_kernel_density(p.old_left, left, old_s.left, tau2, s2, c) +
                  log_kernel_density(p.old_right, right, old_s.right, tau2, s2, c);
  return p;
}

std::optional<Proposal> propose_grow(const Tree& tree, std::span<const NodeId> leaf_of,
                                     const GlobalShrinkage& shrink, const MoveContext& ctx,
                                     RngStream& rng) {
  const auto leaves = tree.leaves();
  const NodeId leaf = leaves[rng.index(leaves.size())];
  if (ctx.prior.split_probability(tree.depth(leaf)) <= 0.0) return std::nullopt;
  const auto rows = active_rows(tree, leaf, leaf_of, ctx);
  const auto rule = ctx.splits->sample(rows, rng);
  if (!rule) return std::nullopt;
  const RegionStats s = split_stats(tree, leaf, *rule, leaf_of, ctx);
  const LeafParams& parent = tree.leaf(leaf);
  const LeafParams left =
      sample_kernel(parent, s.left, shrink.tau2, ctx.sigma2, ctx.shrinkage, rng);
  const LeafParams right =
      sample_kernel(parent, s.right, shrink.tau2, ctx.sigma2, ctx.shrinkage, rng);
  return build_grow(tree, leaf, *rule, left, right, leaf_of, shrink.tau2, ctx);
}

std::optional<Proposal> propose_prune(const Tree& tree, std::span<const NodeId> leaf_of,
                                      const GlobalShrinkage& shrink, const MoveContext& ctx,
                                      RngStream& rng) {
  const auto nogs = tree.nogs();
  if (nogs.empty()) return std::nullopt;
  const NodeId nog = nogs[rng.index(nogs.size())];
  const LeafStats merged = leaf_stats(tree, nog, leaf_of, ctx);
  const LeafParams& seed = tree.leaf(tree.node(nog).left);
  const LeafParams parent =
      sample_kernel(seed, merged, shrink.tau2, ctx.sigma2, ctx.shrinkage, rng);
  return build_prune(tree, nog, parent, leaf_of, shrink.tau2, ctx);
}

std::optional<Proposal> propose_change(const Tree& tree, std::span<const NodeId> leaf_of,
                                       const GlobalShrinkage& shrink, const MoveContext& ctx,
                                       RngStream& rng) {
  const auto nogs = tree.nogs();
  if (nogs.empty()) return std::nullopt;
  const NodeId nog = nogs[rng.index(nogs.size())];
  const auto rows = active_rows(tree, nog, leaf_of, ctx);
  if (count_valid_splits(rows, ctx.splits->matrix(), 2) < 2) return std::nullopt;
  const auto rule = ctx.splits->sample(rows, rng);
  if (!rule) return std::nullopt;
  const RegionStats s = split_stats(tree, nog, *rule, leaf_of, ctx);
  const Node& n = tree.node(nog);
  const LeafParams left =
      sample_kernel(tree.leaf(n.left), s.left, shrink.tau2, ctx.sigma2, ctx.shrinkage, rng);
  const LeafParams right =
      sample_kernel(tree.leaf(n.right), s.right, shrink.tau2, ctx.sigma2, ctx.shrinkage, rng);
  return build_change(tree, nog, *rule, left, right, leaf_of, shrink.tau2, ctx);
}

AcceptRatio log_accept_ratio(const Proposal& p, const MoveContext& ctx) {
  AcceptRatio r;
  const double s2 = ctx.sigma2;
  const auto& c = ctx.shrinkage;
  const auto& prior = ctx.prior;
  const int d = p.depth;
  switch (p.kind) {
    case MoveKind::Grow: {
      r.log_likelihood = leaf_loglik(p.left, p.left_stats, s2) +
                         leaf_loglik(p.right, p.right_stats, s2) -
                         leaf_loglik(p.parent, p.parent_stats, s2);
      r.log_prior = log_split(prior, d) + 2.0 * log_stop(prior, d + 1) - log_stop(prior, d) +
                    log_leaf_prior(p.left, p.tau2, c) + log_leaf_prior(p.right, p.tau2, c) -
                    log_leaf_prior(p.parent, p.tau2, c);
      r.log_transition = std::log(ctx.moves.p_prune / ctx.moves.p_grow) +
                         std::log(static_cast<double>(p.n_leaves)) -
                         std::log(static_cast<double>(p.n_nogs)) + p.log_reverse - p.log_forward;
      break;
    }
    case MoveKind::Prune: {
      r.log_likelihood = leaf_loglik(p.parent, p.parent_stats, s2) -
                         leaf_loglik(p.left, p.left_stats, s2) -
                         leaf_loglik(p.right, p.right_stats, s2);
      r.log_prior = log_stop(prior, d) - log_split(prior, d) - 2.0 * log_stop(prior, d + 1) +
                    log_leaf_prior(p.parent, p.tau2, c) - log_leaf_prior(p.left, p.tau2, c) -
                    log_leaf_prior(p.right, p.tau2, c);
      r.log_transition = std::log(ctx.moves.p_grow / ctx.moves.p_prune) +
                         std::log(static_cast<double>(p.n_nogs)) -
                         std::log(static_cast<double>(p.n_leaves)) + p.log_reverse - p.log_forward;
      break;
    }
    case MoveKind::Change: {
      r.log_likelihood = leaf_loglik(p.left, p.left_stats, s2) +
                         leaf_loglik(p.right, p.right_stats, s2) -
                         leaf_loglik(p.old_left, p.old_left_stats, s2) -
                         leaf_loglik(p.old_right, p.old_right_stats, s2);
      r.log_prior = log_leaf_prior(p.left, p.tau2, c) + log_leaf_prior(p.right, p.tau2, c) -
                    log_leaf_prior(p.old_left, p.tau2, c) - log_leaf_prior(p.old_right, p.tau2, c);
      r.log_transition = p.log_reverse - p.log_forward;
      break;
    }
  }
  return r;
}

void apply(const Proposal& p, Tree& tree, std::vector<NodeId>& leaf_of, const MoveContext& ctx) {
  const Eigen::MatrixXd& X = ctx.splits->matrix();
  switch (p.kind) {
    case MoveKind::Grow: {
      const auto [l, r] = tree.grow(p.node, p.rule, p.left, p.right);
      const auto col = static_cast<Eigen::Index>(p.rule.var);
      for (std::size_t i = 0; i < leaf_of.size(); ++i) {
        if (leaf_of[i] != p.node) continue;
        leaf_of[i] = p.rule.goes_left(X(static_cast<Eigen::Index>(i), col)) ? l : r;
      }
      break;
    }
    case MoveKind::Prune: {
      const Node& n = tree.node(p.node);
      const NodeId l = n.left;
      const NodeId r = n.right;
      tree.prune(p.node, p.parent);
      for (auto& id : leaf_of) {
        if (id == l || id == r) id = p.node;
      }
      break;
    }
    case MoveKind::Change: {
      tree.change(p.node, p.rule, p.left, p.right);
      const Node& n = tree.node(p.node);
      const auto col = static_cast<Eigen::Index>(p.rule.var);
      for (std::size_t i = 0; i < leaf_of.size(); ++i) {
        if (leaf_of[i] != n.left && leaf_of[i] != n.right) continue;
        leaf_of[i] = p.rule.goes_left(X(static_cast<Eigen::Index>(i), col)) ? n.left : n.right;
      }
      break;
    }
  }
}

double MoveCounters::rate(MoveKind kind) const {
  const auto k = static_cast<std::size_t>(kind);
  return proposed[k] == 0 ? 0.0
                          : static_cast<double>(accepted[k]) / static_cast<double>(proposed[k]);
}

MoveCounters& MoveCounters::operator+=(const MoveCounters& other) {
  for (std::size_t k = 0; k < 3; ++k) {
    proposed[k] += other.proposed[k];
    accepted[k] += other.accepted[k];
  }
  return *this;
}

MoveOutcome rj_update_tree(Tree& tree, GlobalShrinkage& shrink, std::vector<NodeId>& leaf_of,
                           const MoveContext& ctx, RngStream& rng, MoveCounters* counters) {
  MoveOutcome out;
  const double u = rng.uniform();
  if (u < ctx.moves.p_grow) {
    out.kind = MoveKind::Grow;
  } else if (u < ctx.moves.p_grow + ctx.moves.p_prune) {
    out.kind = MoveKind::Prune;
  } else {
    out.kind = MoveKind::Change;
  }

  std::optional<Proposal> proposal;
  switch (out.kind) {
    case MoveKind::Grow: proposal = propose_grow(tree, leaf_of, shrink, ctx, rng); break;
    case MoveKind::Prune: proposal = propose_prune(tree, leaf_of, shrink, ctx, rng); break;
    case MoveKind::Change: proposal = propose_change(tree, leaf_of, shrink, ctx, rng); break;
  }
  out.auto_rejected = !proposal.has_value();
  if (proposal) {
    const double log_r = log_accept_ratio(*proposal, ctx).total();
    if (std::log(rng.uniform()) < log_r) {
      apply(*proposal, tree, leaf_of, ctx);
      out.accepted = true;
    }
  }
  if (counters != nullptr) {
    const auto k = static_cast<std::size_t>(out.kind);
    ++counters->proposed[k];
    if (out.accepted) ++counters->accepted[k];
  }

  const auto stats = all_leaf_stats(tree, leaf_of, ctx);
  refresh_leaf_block(tree, stats, shrink, ctx.shrinkage, ctx.sigma2, rng);
  return out;
}

}  // namespace hsforest
