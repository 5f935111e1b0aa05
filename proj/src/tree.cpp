#include "hsforest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "hsforest/distributions.hpp"
#include "hsforest/errors.hpp"

namespace hsforest {

Tree::Tree(const LeafParams& root) {
  Node n;
  n.leaf = root;
  nodes_.push_back(n);
}

bool Tree::is_nog(NodeId id) const {
  const Node& n = node(id);
  return !n.is_leaf() && is_leaf(n.left) && is_leaf(n.right);
}

std::vector<NodeId> Tree::leaves() const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::vector<NodeId> Tree::internal_nodes() const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (!n.is_leaf()) {
      out.push_back(id);
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::vector<NodeId> Tree::nogs() const {
  std::vector<NodeId> out;
  for (NodeId id : internal_nodes()) {
    if (is_nog(id)) out.push_back(id);
  }
  return out;
}

std::size_t Tree::n_leaves() const { return internal_nodes().size() + 1; }

std::size_t Tree::n_nogs() const { return nogs().size(); }

int Tree::max_depth() const {
  int d = 0;
  for (NodeId id : leaves()) d = std::max(d, depth(id));
  return d;
}

NodeId Tree::allocate() {
  if (!free_.empty()) {
    const NodeId id = free_.back();
    free_.pop_back();
    mut(id) = Node{};
    return id;
  }
  nodes_.emplace_back();
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tree::release(NodeId id) {
  mut(id).alive = false;
  free_.push_back(id);
}

std::pair<NodeId, NodeId> Tree::grow(NodeId leaf_id, const SplitRule& rule,
                                     const LeafParams& left, const LeafParams& right) {
  if (!is_leaf(leaf_id)) throw PreconditionError("Tree::grow: node is not a leaf");
  const NodeId l = allocate();
  const NodeId r = allocate();
  const int d = depth(leaf_id) + 1;
  Node& ln = mut(l);
  ln.parent = leaf_id;
  ln.depth = d;
  ln.leaf = left;
  Node& rn = mut(r);
  rn.parent = leaf_id;
  rn.depth = d;
  rn.leaf = right;
  Node& p = mut(leaf_id);
  p.left = l;
  p.right = r;
  p.rule = rule;
  return {l, r};
}

void Tree::prune(NodeId nog, const LeafParams& params) {
  if (!is_nog(nog)) throw PreconditionError("Tree::prune: node is not a nog");
  Node& p = mut(nog);
  release(p.left);
  release(p.right);
  p.left = kNoNode;
  p.right = kNoNode;
  p.rule = SplitRule{};
  p.leaf = params;
}

void Tree::change(NodeId nog, const SplitRule& rule, const LeafParams& left,
                  const LeafParams& right) {
  if (!is_nog(nog)) throw PreconditionError("Tree::change: node is not a nog");
  Node& p = mut(nog);
  p.rule = rule;
  mut(p.left).leaf = left;
  mut(p.right).leaf = right;
}

NodeId Tree::route(std::span<const double> x) const {
  NodeId id = root();
  while (!is_leaf(id)) {
    const Node& n = node(id);
    if (n.rule.var >= x.size()) throw InputError("predict: covariate vector too short for tree");
    id = n.rule.goes_left(x[n.rule.var]) ? n.left : n.right;
  }
  return id;
}

NodeId Tree::route(const Eigen::MatrixXd& X, Eigen::Index row) const {
  NodeId id = root();
  while (!is_leaf(id)) {
    const Node& n = node(id);
    id = n.rule.goes_left(X(row, static_cast<Eigen::Index>(n.rule.var))) ? n.left : n.right;
  }
  return id;
}

std::optional<std::size_t> Tree::max_var() const {
  std::optional<std::size_t> v;
  for (NodeId id : internal_nodes()) {
    const std::size_t var = node(id).rule.var;
    if (!v || var > *v) v = var;
  }
  return v;
}

std::string Tree::to_string() const {
  std::ostringstream out;
  out.precision(17);
  std::function<void(NodeId, int)> emit = [&](NodeId id, int indent) {
    const Node& n = node(id);
    out << std::string(static_cast<std::size_t>(2 * indent), ' ');
    if (n.is_leaf()) {
      out << "h=" << n.leaf.h << '\n';
      return;
    }
    out << 'x' << (n.rule.var + 1) << " < " << n.rule.cut << '\n';
    emit(n.left, indent + 1);
    emit(n.right, indent + 1);
  };
  emit(root(), 0);
  return out.str();
}

double predict(const Tree& tree, std::span<const double> x) {
  if (auto v = tree.max_var(); v && *v >= x.size()) {
    throw InputError("predict: covariate vector is shorter than the tree uses");
  }
  return tree.leaf(tree.route(x)).h;
}

double predict(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row) {
  if (auto v = tree.max_var(); v && static_cast<Eigen::Index>(*v) >= X.cols()) {
    throw InputError("predict: matrix has fewer columns than the tree uses");
  }
  return tree.leaf(tree.route(X, row)).h;
}

std::vector<NodeId> leaf_of_rows(const Tree& tree, const Eigen::MatrixXd& X) {
  if (auto v = tree.max_var(); v && static_cast<Eigen::Index>(*v) >= X.cols()) {
    throw InputError("assign_leaves: matrix has fewer columns than the tree uses");
  }
  std::vector<NodeId> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = tree.route(X, i);
  return out;
}

LeafAssignment assign_leaves(const Tree& tree, const Eigen::MatrixXd& X) {
  LeafAssignment a;
  a.leaf_nodes = tree.leaves();
  std::vector<std::size_t> position(tree.capacity(), 0);
  for (std::size_t l = 0; l < a.leaf_nodes.size(); ++l) {
    position[static_cast<std::size_t>(a.leaf_nodes[l])] = l;
  }
  a.counts.assign(a.leaf_nodes.size(), 0);
  const auto nodes = leaf_of_rows(tree, X);
  a.leaf_index.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t l = position[static_cast<std::size_t>(nodes[i])];
    a.leaf_index[i] = l;
    ++a.counts[l];
  }
  return a;
}

double TreePrior::split_probability(int depth) const {
  if (depth >= max_depth) return 0.0;
  return a / std::pow(1.0 + depth, b);
}

double tree_log_prior(const Tree& tree, const TreePrior& prior) {
  double lp = 0.0;
  for (NodeId id : tree.internal_nodes()) lp += std::log(prior.split_probability(tree.depth(id)));
  for (NodeId id : tree.leaves()) lp += std::log1p(-prior.split_probability(tree.depth(id)));
  return lp;
}

double tree_log_prior(const Tree& tree, double a, double b) {
  return tree_log_prior(tree, TreePrior{a, b});
}

namespace {

std::vector<double> sorted_distinct(std::span<const std::size_t> rows, const Eigen::MatrixXd& X,
                                    std::size_t var) {
  std::vector<double> v;
  v.reserve(rows.size());
  const auto col = static_cast<Eigen::Index>(var);
  for (std::size_t r : rows) v.push_back(X(static_cast<Eigen::Index>(r), col));
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool column_varies(std::span<const std::size_t> rows, const Eigen::MatrixXd& X, std::size_t var) {
  if (rows.size() < 2) return false;
  const auto col = static_cast<Eigen::Index>(var);
  const double first = X(static_cast<Eigen::Index>(rows[0]), col);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (X(static_cast<Eigen::Index>(rows[k]), col) != first) return true;
  }
  return false;
}

}  // namespace

std::vector<SplitRule> valid_splits(std::span<const std::size_t> rows, const Eigen::MatrixXd& X) {
  std::vector<SplitRule> out;
  if (rows.size() < 2) return out;
  for (std::size_t var = 0; var < static_cast<std::size_t>(X.cols()); ++var) {
    const auto values = sorted_distinct(rows, X, var);
    for (std::size_t k = 1; k < values.size(); ++k) out.push_back({var, values[k]});
  }
  return out;
}

std::size_t count_valid_splits(std::span<const std::size_t> rows, const Eigen::MatrixXd& X,
                               std::size_t cap) {
  std::size_t total = 0;
  if (rows.size() < 2) return 0;
  for (std::size_t var = 0; var < static_cast<std::size_t>(X.cols()) && total < cap; ++var) {
    if (!column_varies(rows, X, var)) continue;
    total += sorted_distinct(rows, X, var).size() - 1;
  }
  return std::min(total, cap);
}

SplitSampler::SplitSampler(const Eigen::MatrixXd& X) : X_(&X) {
  std::vector<std::size_t> all(static_cast<std::size_t>(X.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t var = 0; var < static_cast<std::size_t>(X.cols()); ++var) {
    max_distinct_ = std::max(max_distinct_, sorted_distinct(all, X, var).size());
  }
}

bool SplitSampler::has_split(std::span<const std::size_t> rows) const {
  for (std::size_t var = 0; var < static_cast<std::size_t>(X_->cols()); ++var) {
    if (column_varies(rows, *X_, var)) return true;
  }
  return false;
}

std::optional<SplitRule> SplitSampler::sample(std::span<const std::size_t> rows,
                                              RngStream& rng) const {
  if (!has_split(rows)) return std::nullopt;
  const std::size_t bound = std::min(rows.size(), max_distinct_) - 1;
  const auto p = static_cast<std::size_t>(X_->cols());
  for (;;) {
    const std::size_t var = rng.index(p);
    const auto values = sorted_distinct(rows, *X_, var);
    const std::size_t cuts = values.size() - 1;
    if (cuts == 0) continue;
    if (cuts < bound && rng.uniform() * static_cast<double>(bound) >= static_cast<double>(cuts)) {
      continue;
    }
    return SplitRule{var, values[1 + rng.index(cuts)]};
  }
}

}  // namespace hsforest
