#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hsforest {

class RngStream;

// Routing convention: an observation goes left iff x[var] < cut.
struct SplitRule {
  std::size_t var = 0;
  double cut = 0.0;

  bool goes_left(double value) const noexcept { return value < cut; }
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

// Step height with its local horseshoe scale lambda^2 and auxiliary nu.
struct LeafParams {
  double h = 0.0;
  double lambda2 = 1.0;
  double nu = 1.0;
};

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct Node {
  NodeId parent = kNoNode;
  NodeId left = kNoNode;
  NodeId right = kNoNode;
  int depth = 0;
  SplitRule rule;
  LeafParams leaf;
  bool alive = true;

  bool is_leaf() const noexcept { return left == kNoNode; }
};

// Binary decision tree with stable node ids. Removed nodes go on a free list
// so that ids held by callers (e.g. per-observation leaf assignments) stay valid
// across grow/prune/change.
class Tree {
 public:
  Tree() : Tree(LeafParams{}) {}
  explicit Tree(const LeafParams& root);

  static constexpr NodeId root() noexcept { return 0; }

  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t capacity() const noexcept { return nodes_.size(); }

  bool is_leaf(NodeId id) const { return node(id).is_leaf(); }
  bool is_nog(NodeId id) const;
  int depth(NodeId id) const { return node(id).depth; }

  // Leaves and nog nodes in depth-first (left before right) order.
  std::vector<NodeId> leaves() const;
  std::vector<NodeId> nogs() const;
  std::vector<NodeId> internal_nodes() const;
  std::size_t n_leaves() const;
  std::size_t n_nogs() const;
  int max_depth() const;

  LeafParams& leaf(NodeId id) { return nodes_[static_cast<std::size_t>(id)].leaf; }
  const LeafParams& leaf(NodeId id) const { return node(id).leaf; }

  // Split `leaf_id`; returns the (left, right) child ids.
  std::pair<NodeId, NodeId> grow(NodeId leaf_id, const SplitRule& rule, const LeafParams& left,
                                 const LeafParams& right);
  // Collapse a nog node into a leaf carrying `params`.
  void prune(NodeId nog, const LeafParams& params);
  // Replace the rule of a nog node and its children's parameters.
  void change(NodeId nog, const SplitRule& rule, const LeafParams& left,
              const LeafParams& right);

  // Leaf reached by covariate vector x.
  NodeId route(std::span<const double> x) const;
  NodeId route(const Eigen::MatrixXd& X, Eigen::Index row) const;

  // Largest covariate index used by a split rule, if any.
  std::optional<std::size_t> max_var() const;

  // Indented plain-text dump: "x<var> < <cut>" lines for internal nodes, "h=<value>" for leaves.
  std::string to_string() const;

 private:
  NodeId allocate();
  void release(NodeId id);
  Node& mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  std::vector<NodeId> free_;
};

// h of the leaf reached by x; throws InputError when x is too short.
double predict(const Tree& tree, std::span<const double> x);
double predict(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row);

// Row-to-leaf assignment of a data matrix. `leaf_index[i]` is the position of the
// row's leaf in `tree.leaves()`, `counts[l]` the number of rows in leaf l.
struct LeafAssignment {
  std::vector<NodeId> leaf_nodes;
  std::vector<std::size_t> leaf_index;
  std::vector<std::size_t> counts;
};

LeafAssignment assign_leaves(const Tree& tree, const Eigen::MatrixXd& X);

// Per-row leaf node ids (not positions); the form the sampler caches.
std::vector<NodeId> leaf_of_rows(const Tree& tree, const Eigen::MatrixXd& X);

// Branching process prior: a node at depth d splits with probability
// a / (1 + d)^b. Nodes at or beyond max_depth never split.
struct TreePrior {
  double a = 0.95;
  double b = 2.0;
  int max_depth = std::numeric_limits<int>::max();

  double split_probability(int depth) const;
};

// log of prod_internal rho_d * prod_leaves (1 - rho_d). Split-rule selection
// probabilities are not included.
double tree_log_prior(const Tree& tree, const TreePrior& prior);
double tree_log_prior(const Tree& tree, double a, double b);

// All rules that separate `rows` into two non-empty groups: cuts are the observed
// values of each covariate except the smallest. Ordered by (var, cut).
std::vector<SplitRule> valid_splits(std::span<const std::size_t> rows, const Eigen::MatrixXd& X);

// Number of valid rules, stopping early once `cap` is reached.
std::size_t count_valid_splits(std::span<const std::size_t> rows, const Eigen::MatrixXd& X,
                               std::size_t cap = std::numeric_limits<std::size_t>::max());

// Draws rules uniformly from valid_splits(rows, X) without enumerating the set:
// a covariate is picked uniformly and accepted with probability proportional to
// its number of valid cuts. The per-column distinct counts of the full matrix
// bound that number, which keeps acceptance high for discrete covariates.
class SplitSampler {
 public:
  explicit SplitSampler(const Eigen::MatrixXd& X);

  const Eigen::MatrixXd& matrix() const noexcept { return *X_; }

  // True when at least one valid rule exists for `rows`.
  bool has_split(std::span<const std::size_t> rows) const;
  // nullopt when no valid rule exists.
  std::optional<SplitRule> sample(std::span<const std::size_t> rows, RngStream& rng) const;

 private:
  const Eigen::MatrixXd* X_;
  std::size_t max_distinct_ = 0;
};

}  // namespace hsforest
