#include <Eigen/Core>

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "hsforest/distributions.hpp"
#include "hsforest/errors.hpp"
#include "hsforest/tree.hpp"

using namespace hsforest;

namespace {

LeafParams h_of(double h) { return LeafParams{h, 1.0, 1.0}; }

// Root splits x1 < 0.7; its left child splits x2 < 0.6. Leaves carry h=2 (yes/yes),
// h=3 (yes/no) and h=1 (no).
Tree figure_tree() {
  Tree t(h_of(0.0));
  const auto [l, r] = t.grow(Tree::root(), {0, 0.7}, h_of(0.0), h_of(1.0));
  (void)r;
  t.grow(l, {1, 0.6}, h_of(2.0), h_of(3.0));
  return t;
}

// Same tree grown right-first, with a detour through prune so ids come from the free list.
Tree figure_tree_shuffled() {
  Tree t(h_of(0.0));
  auto [a, b] = t.grow(Tree::root(), {1, 0.1}, h_of(9.0), h_of(9.0));
  t.grow(b, {0, 0.2}, h_of(9.0), h_of(9.0));
  t.prune(b, h_of(9.0));
  t.prune(Tree::root(), h_of(0.0));
  (void)a;
  const auto [l, r] = t.grow(Tree::root(), {0, 0.7}, h_of(0.0), h_of(1.0));
  (void)r;
  t.grow(l, {1, 0.6}, h_of(2.0), h_of(3.0));
  return t;
}

// Random tree with up to `splits` splits at uniform cuts on [0,1]^p.
Tree random_tree(int splits, std::size_t p, RngStream& rng) {
  Tree t(h_of(rng.normal()));
  for (int s = 0; s < splits; ++s) {
    const auto leaves = t.leaves();
    const NodeId leaf = leaves[rng.index(leaves.size())];
    t.grow(leaf, {rng.index(p), rng.uniform()}, h_of(rng.normal()), h_of(rng.normal()));
  }
  return t;
}

// Whether x satisfies every rule on the path from the root to `leaf`.
bool path_holds(const Tree& t, NodeId leaf, const std::vector<double>& x) {
  NodeId child = leaf;
  NodeId up = t.node(child).parent;
  while (up != kNoNode) {
    const Node& n = t.node(up);
    const bool left = x[n.rule.var] < n.rule.cut;
    if (left != (n.left == child)) return false;
    child = up;
    up = n.parent;
  }
  return true;
}

}  // namespace

TEST_CASE("figure tree routes the three example points") {
  const Tree t = figure_tree();
  CHECK(predict(t, std::vector<double>{0.8, 0.5}) == 1.0);
  CHECK(predict(t, std::vector<double>{0.3, 0.3}) == 2.0);
  CHECK(predict(t, std::vector<double>{0.3, 0.9}) == 3.0);
  // strict-less routing at the cut itself
  CHECK(predict(t, std::vector<double>{0.7, 0.0}) == 1.0);
  CHECK(predict(t, std::vector<double>{0.2, 0.6}) == 3.0);
}

TEST_CASE("predict rejects short covariate vectors") {
  const Tree t = figure_tree();
  CHECK_THROWS_AS(predict(t, std::vector<double>{0.3}), InputError);
  // a point that goes right never inspects x2 but is still too short
  CHECK_THROWS_AS(predict(t, std::vector<double>{0.9}), InputError);
  CHECK(predict(Tree(h_of(4.0)), std::vector<double>{}) == 4.0);
  Eigen::MatrixXd X(1, 1);
  X << 0.3;
  CHECK_THROWS_AS(predict(t, X, 0), InputError);
}

TEST_CASE("assign_leaves on a root-only tree") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(7, 3);
  const auto a = assign_leaves(Tree(), X);
  REQUIRE(a.leaf_nodes.size() == 1);
  CHECK(a.counts == std::vector<std::size_t>{7});
  for (auto i : a.leaf_index) CHECK(i == 0);
}

TEST_CASE("assign_leaves on the figure tree and the design matrix identity") {
  const Tree t = figure_tree();
  Eigen::MatrixXd X(2, 2);
  X << 0.8, 0.5, 0.3, 0.3;
  const auto a = assign_leaves(t, X);
  REQUIRE(a.leaf_nodes.size() == 3);
  CHECK(t.leaf(a.leaf_nodes[a.leaf_index[0]]).h == 1.0);
  CHECK(t.leaf(a.leaf_nodes[a.leaf_index[1]]).h == 2.0);
  CHECK(a.leaf_index[0] != a.leaf_index[1]);
  CHECK(a.counts[a.leaf_index[0]] == 1);
  CHECK(a.counts[a.leaf_index[1]] == 1);

  RngStream rng(3);
  Eigen::MatrixXd Z(50, 2);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) Z.row(i) << rng.uniform(), rng.uniform();
  const auto b = assign_leaves(t, Z);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(Z.rows(), static_cast<Eigen::Index>(b.leaf_nodes.size()));
  for (std::size_t i = 0; i < b.leaf_index.size(); ++i) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b.leaf_index[i])) = 1.0;
  Eigen::VectorXd h(static_cast<Eigen::Index>(b.leaf_nodes.size()));
  for (std::size_t l = 0; l < b.leaf_nodes.size(); ++l) h[static_cast<Eigen::Index>(l)] = t.leaf(b.leaf_nodes[l]).h;
  const Eigen::VectorXd Dh = D * h;
  const Eigen::MatrixXd DtD = D.transpose() * D;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) CHECK(Dh[i] == predict(t, Z, i));
  for (std::size_t l = 0; l < b.counts.size(); ++l) {
    const auto ll = static_cast<Eigen::Index>(l);
    CHECK(DtD(ll, ll) == static_cast<double>(b.counts[l]));
  }
  const auto ids = leaf_of_rows(t, Z);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == b.leaf_nodes[b.leaf_index[i]]);
}

TEST_CASE("tree prior values") {
  const TreePrior prior{0.95, 2.0};
  CHECK(tree_log_prior(Tree(), prior) == doctest::Approx(std::log(0.05)).epsilon(1e-14));
  Tree t;
  t.grow(Tree::root(), {0, 0.5}, {}, {});
  CHECK(tree_log_prior(t, 0.95, 2.0) == doctest::Approx(std::log(0.95 * 0.7625 * 0.7625)).epsilon(1e-14));
  CHECK(std::exp(tree_log_prior(t, prior)) == doctest::Approx(0.552336).epsilon(1e-6));

  // growing a depth-d leaf multiplies the prior by rho_d (1 - rho_{d+1})^2 / (1 - rho_d)
  RngStream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    Tree r = random_tree(static_cast<int>(rng.index(6)), 3, rng);
    const auto leaves = r.leaves();
    const NodeId leaf = leaves[rng.index(leaves.size())];
    const int d = r.depth(leaf);
    const double rho = [&](int k) { return 0.95 / std::pow(1.0 + k, 2.0); }(d);
    const double rho1 = 0.95 / std::pow(2.0 + d, 2.0);
    const double before = tree_log_prior(r, prior);
    r.grow(leaf, {0, 0.5}, {}, {});
    CHECK(tree_log_prior(r, prior) - before ==
          doctest::Approx(std::log(rho * (1 - rho1) * (1 - rho1) / (1 - rho))).epsilon(1e-12));
  }
}

TEST_CASE("tree prior is finite and negative; max depth forbids deeper splits") {
  RngStream rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const Tree t = random_tree(1 + static_cast<int>(rng.index(8)), 2, rng);
    const double lp = tree_log_prior(t, 0.5 + 0.49 * rng.uniform(), 3.0 * rng.uniform());
    CHECK(std::isfinite(lp));
    CHECK(lp < 0.0);
  }
  const TreePrior capped{0.95, 2.0, 1};
  CHECK(capped.split_probability(0) == 0.95);
  CHECK(capped.split_probability(1) == 0.0);
  Tree t;
  t.grow(Tree::root(), {0, 0.5}, {}, {});
  CHECK(tree_log_prior(t, capped) == doctest::Approx(std::log(0.95)));
}

TEST_CASE("valid splits examples") {
  Eigen::MatrixXd X(3, 1);
  X << 0.1, 0.5, 0.9;
  const std::vector<std::size_t> all{0, 1, 2};
  const auto s = valid_splits(all, X);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == SplitRule{0, 0.5});
  CHECK(s[1] == SplitRule{0, 0.9});
  CHECK(count_valid_splits(all, X) == 2);
  CHECK(count_valid_splits(all, X, 1) == 1);

  Eigen::MatrixXd T(2, 1);
  T << 0.2, 0.2;
  const std::vector<std::size_t> two{0, 1};
  CHECK(valid_splits(two, T).empty());
  CHECK(valid_splits(std::vector<std::size_t>{1}, X).empty());
  CHECK(!SplitSampler(T).has_split(two));
  RngStream rng(1);
  CHECK(!SplitSampler(T).sample(two, rng).has_value());
}

TEST_CASE("valid splits separate every node into two non-empty children") {
  RngStream rng(6);
  Eigen::MatrixXd X(12, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    // one discrete column to exercise ties
    X.row(i) << rng.uniform(), static_cast<double>(rng.index(3)), rng.uniform();
  }
  std::vector<std::size_t> rows{0, 2, 3, 5, 8, 9, 11};
  const auto s = valid_splits(rows, X);
  std::size_t expected = 0;
  for (Eigen::Index v = 0; v < X.cols(); ++v) {
    std::set<double> distinct;
    for (auto r : rows) distinct.insert(X(static_cast<Eigen::Index>(r), v));
    expected += distinct.size() - 1;
  }
  CHECK(s.size() == expected);
  CHECK(count_valid_splits(rows, X) == expected);
  for (const auto& rule : s) {
    std::size_t left = 0;
    for (auto r : rows) left += rule.goes_left(X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(rule.var))) ? 1 : 0;
    CHECK(left > 0);
    CHECK(left < rows.size());
  }
}

TEST_CASE("split sampler is uniform over valid rules") {
  RngStream rng(7);
  Eigen::MatrixXd X(10, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X.row(i) << rng.uniform(), static_cast<double>(rng.index(2)), static_cast<double>(rng.index(4));
  }
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7};
  const auto rules = valid_splits(rows, X);
  std::map<std::pair<std::size_t, double>, int> counts;
  for (const auto& r : rules) counts[{r.var, r.cut}] = 0;
  const SplitSampler sampler(X);
  const int draws = 200000;
  for (int d = 0; d < draws; ++d) {
    const auto r = sampler.sample(rows, rng);
    REQUIRE(r.has_value());
    auto it = counts.find({r->var, r->cut});
    REQUIRE(it != counts.end());
    ++it->second;
  }
  // chi-square against uniform; 0.999 quantile for up to 12 dof is below 33
  const double e = static_cast<double>(draws) / static_cast<double>(rules.size());
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - e) * (c - e) / e;
  CHECK(rules.size() <= 13);
  CHECK(chi2 < 33.0);
}

TEST_CASE("partition property on random trees") {
  RngStream rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const Tree t = random_tree(static_cast<int>(rng.index(12)), 3, rng);
    const auto leaves = t.leaves();
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
      int satisfied = 0;
      NodeId hit = kNoNode;
      for (NodeId l : leaves) {
        if (path_holds(t, l, x)) {
          ++satisfied;
          hit = l;
        }
      }
      CHECK(satisfied == 1);
      CHECK(t.route(x) == hit);
    }
  }
}

TEST_CASE("prediction does not depend on node storage order") {
  const Tree a = figure_tree();
  const Tree b = figure_tree_shuffled();
  CHECK(a.to_string() == b.to_string());
  RngStream rng(9);
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> x{rng.uniform(), rng.uniform()};
    CHECK(predict(a, x) == predict(b, x));
  }
}

TEST_CASE("leaf and nog counts on random trees") {
  RngStream rng(10);
  for (int rep = 0; rep < 300; ++rep) {
    const Tree t = random_tree(static_cast<int>(rng.index(20)), 4, rng);
    CHECK(t.n_leaves() == t.internal_nodes().size() + 1);
    CHECK(t.leaves().size() == t.n_leaves());
    CHECK(2 * t.n_nogs() <= t.n_leaves());
    CHECK(t.nogs().size() == t.n_nogs());
    for (NodeId id : t.internal_nodes()) {
      const Node& n = t.node(id);
      CHECK(n.left != kNoNode);
      CHECK(n.right != kNoNode);
      CHECK(t.depth(n.left) == t.depth(id) + 1);
    }
    if (t.n_leaves() > 1) CHECK(t.n_nogs() >= 1);
  }
}

TEST_CASE("grow, prune and change keep ids and parameters") {
  Tree t(h_of(5.0));
  const auto [l, r] = t.grow(Tree::root(), {0, 0.5}, h_of(1.0), h_of(2.0));
  CHECK(t.is_nog(Tree::root()));
  CHECK(t.max_var() == std::optional<std::size_t>{0});
  t.change(Tree::root(), {2, 0.25}, h_of(3.0), h_of(4.0));
  CHECK(t.node(Tree::root()).rule == SplitRule{2, 0.25});
  CHECK(t.leaf(l).h == 3.0);
  CHECK(t.leaf(r).h == 4.0);
  CHECK(t.max_var() == std::optional<std::size_t>{2});
  t.prune(Tree::root(), h_of(6.0));
  CHECK(t.n_leaves() == 1);
  CHECK(t.leaf(Tree::root()).h == 6.0);
  CHECK(!t.max_var().has_value());
  CHECK(t.max_depth() == 0);
}

TEST_CASE("debug dump") {
  const Tree t = figure_tree();
  CHECK(t.to_string() == "x1 < 0.69999999999999996\n  x2 < 0.59999999999999998\n    h=2\n    h=3\n  h=1\n");
}
