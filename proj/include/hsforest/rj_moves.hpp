#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hsforest/horseshoe.hpp"
#include "hsforest/tree.hpp"

namespace hsforest {

class RngStream;

enum class MoveKind : int { Grow = 0, Prune = 1, Change = 2 };

const char* move_name(MoveKind kind);

struct MoveConfig {
  double p_grow = 0.4;
  double p_prune = 0.4;
  double p_change = 0.2;

  // Throws InputError unless all are >= 0, they sum to 1 and p_prune > 0 when p_grow > 0.
  void validate() const;
  double probability(MoveKind kind) const;
};

// Everything a move needs besides the tree itself. Rows with active[i] == 0 are
// routed (their leaf ids are tracked) but contribute nothing to leaf statistics,
// valid splits or the non-empty-leaf rule. Empty `weights` / `active` mean all ones.
struct MoveContext {
  const SplitSampler* splits = nullptr;
  std::span<const double> residuals;
  std::span<const double> weights;
  std::span<const std::uint8_t> active;
  double sigma2 = 1.0;
  ShrinkageConfig shrinkage;
  TreePrior prior;
  MoveConfig moves;

  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  bool is_active(std::size_t i) const { return active.empty() || active[i] != 0; }
  std::size_t n() const { return residuals.size(); }
};

// A fully specified move from the current tree. For GROW `node` is the split leaf,
// `parent` its current params and `left`/`right` the proposed children. For PRUNE
// `node` is the nog, `parent` the proposed merged leaf and `left`/`right` the
// current children. For CHANGE `left`/`right` are proposed, `old_left`/`old_right`
// current, and `old_rule` the current rule.
struct Proposal {
  MoveKind kind = MoveKind::Grow;
  NodeId node = kNoNode;
  int depth = 0;
  SplitRule rule;
  SplitRule old_rule;
  LeafParams parent;
  LeafParams left;
  LeafParams right;
  LeafParams old_left;
  LeafParams old_right;
  LeafStats parent_stats;
  LeafStats left_stats;
  LeafStats right_stats;
  LeafStats old_left_stats;
  LeafStats old_right_stats;
  double tau2 = 1.0;
  // GROW: leaves in the current tree and nogs in the grown tree.
  // PRUNE: nogs in the current tree and leaves in the pruned tree.
  std::size_t n_leaves = 0;
  std::size_t n_nogs = 0;
  double log_forward = 0.0;
  double log_reverse = 0.0;
};

struct AcceptRatio {
  double log_likelihood = 0.0;
  double log_prior = 0.0;
  double log_transition = 0.0;
  double total() const { return log_likelihood + log_prior + log_transition; }
};

// Log density of the pseudo-Gibbs kernel that proposes (nu', lambda'^2, h') for a leaf
// with stats `target` from the seed params: nu' ~ IG(1, 1/alpha^2 + 1/lambda_s^2),
// lambda'^2 ~ IG(1, 1/nu' + h_s^2/(2 tau^2 omega)), h' from its full conditional.
double log_kernel_density(const LeafParams& proposed, const LeafParams& seed,
                          const LeafStats& target, double tau2, double sigma2,
                          const ShrinkageConfig& cfg);
LeafParams sample_kernel(const LeafParams& seed, const LeafStats& target, double tau2,
                         double sigma2, const ShrinkageConfig& cfg, RngStream& rng);

// Stats of the active rows whose tracked leaf is `node` (leaf) or one of its
// children (nog), optionally partitioned by `rule`.
LeafStats leaf_stats(const Tree& tree, NodeId leaf, std::span<const NodeId> leaf_of,
                     const MoveContext& ctx);
std::vector<LeafStats> all_leaf_stats(const Tree& tree, std::span<const NodeId> leaf_of,
                                      const MoveContext& ctx);

// Deterministic builders: compute stats, counts and kernel densities for fixed values.
Proposal build_grow(const Tree& tree, NodeId leaf, const SplitRule& rule, const LeafParams& left,
                    const LeafParams& right, std::span<const NodeId> leaf_of, double tau2,
                    const MoveContext& ctx);
Proposal build_prune(const Tree& tree, NodeId nog, const LeafParams& parent,
                     std::span<const NodeId> leaf_of, double tau2, const MoveContext& ctx);
Proposal build_change(const Tree& tree, NodeId nog, const SplitRule& rule, const LeafParams& left,
                      const LeafParams& right, std::span<const NodeId> leaf_of, double tau2,
                      const MoveContext& ctx);

// Random proposals; nullopt is an automatic rejection.
std::optional<Proposal> propose_grow(const Tree& tree, std::span<const NodeId> leaf_of,
                                     const GlobalShrinkage& shrink, const MoveContext& ctx,
                                     RngStream& rng);
std::optional<Proposal> propose_prune(const Tree& tree, std::span<const NodeId> leaf_of,
                                      const GlobalShrinkage& shrink, const MoveContext& ctx,
                                      RngStream& rng);
std::optional<Proposal> propose_change(const Tree& tree, std::span<const NodeId> leaf_of,
                                       const GlobalShrinkage& shrink, const MoveContext& ctx,
                                       RngStream& rng);

AcceptRatio log_accept_ratio(const Proposal& proposal, const MoveContext& ctx);

// Applies an accepted proposal to the tree and to the per-row leaf ids (all rows).
void apply(const Proposal& proposal, Tree& tree, std::vector<NodeId>& leaf_of,
           const MoveContext& ctx);

struct MoveCounters {
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};

  double rate(MoveKind kind) const;
  MoveCounters& operator+=(const MoveCounters& other);
};

struct MoveOutcome {
  MoveKind kind = MoveKind::Grow;
  bool auto_rejected = false;
  bool accepted = false;
};

// One structural MH step followed by a Gibbs refresh of every leaf block.
MoveOutcome rj_update_tree(Tree& tree, GlobalShrinkage& shrink, std::vector<NodeId>& leaf_of,
                           const MoveContext& ctx, RngStream& rng,
                           MoveCounters* counters = nullptr);

}  // namespace hsforest
