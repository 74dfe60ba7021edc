#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mhl/num.hpp"

namespace mhl {

// Nested mass description; the exchange format for tree construction.
// Masses are strings ("0.25", "1/3") so the exact mode never sees a lossy
// double and serializers can emit the source text verbatim.
struct TreeSpecNode {
  std::string mass;
  std::vector<TreeSpecNode> children;
};

template <class T>
struct TreeNode {
  int level = 0;
  int parent = -1;
  T mass{};
  std::string mass_text;
  std::vector<int> children;
};

// A finite filtration presented as a rooted tree: level n holds the atoms of
// the n-th algebra, children partition their parent's mass, every leaf sits
// at the deepest level. Node ids follow depth-first preorder with children
// in spec order; this ordering is the canonical one used by all serializers
// and by stopping-time indices. Immutable once built.
template <class T>
class FiltrationTree {
 public:
  // mass_tol: relative tolerance for the child-sum checks (0 = exact).
  static FiltrationTree build(const TreeSpecNode& root_spec, int levels,
                              double mass_tol = NumTraits<T>::default_tol()) {
    if (levels < 0) fail("LevelOutOfRange", "levels must be >= 0");
    FiltrationTree t;
    t.depth_ = levels;
    t.levels_.resize(levels + 1);
    t.add_node(root_spec, 0, -1, mass_tol);
    t.finish(mass_tol);
    return t;
  }

  int depth() const { return depth_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const TreeNode<T>& node(int id) const { return nodes_[id]; }

  const std::vector<int>& level(int n) const {
    if (n < 0 || n > depth_)
      fail("LevelOutOfRange",
           "level " + std::to_string(n) + " outside 0.." + std::to_string(depth_));
    return levels_[n];
  }

  const std::vector<int>& leaves() const { return levels_[depth_]; }
  int leaf_count() const { return static_cast<int>(leaves().size()); }

  // Position of a leaf node in canonical leaf order.
  int leaf_pos(int id) const {
    check_id(id);
    int p = leaf_pos_[id];
    if (p < 0) fail("InvalidIndex", "node " + std::to_string(id) + " is not a leaf");
    return p;
  }

  // Leaves under a node, as a [begin, end) range of canonical leaf positions.
  // Contiguous because ids are assigned in preorder.
  std::pair<int, int> leaf_range(int id) const {
    check_id(id);
    return leaf_range_[id];
  }

  // Preorder successor that skips the subtree under id (node_count() when
  // none). Lets enumeration walk antichains without ancestor checks.
  int next_skip(int id) const {
    check_id(id);
    return next_skip_[id];
  }

  bool is_ancestor_or_self(int anc, int id) const {
    check_id(anc);
    check_id(id);
    while (id != -1 && id >= anc) {
      if (id == anc) return true;
      id = nodes_[id].parent;
    }
    return false;
  }

  void check_id(int id) const {
    if (id < 0 || id >= node_count())
      fail("InvalidIndex", "node index " + std::to_string(id) + " out of range");
  }

  // Largest parent/child mass ratio; the tree is R-regular for this R.
  // Depth-0 trees have no such pair; return 1.
  T regularity_constant() const {
    T r(1);
    for (int id = 1; id < node_count(); ++id) {
      T ratio = T(nodes_[nodes_[id].parent].mass / nodes_[id].mass);
      if (ratio > r) r = ratio;
    }
    return r;
  }

  std::vector<T> leaf_masses() const {
    std::vector<T> m;
    m.reserve(leaves().size());
    for (int id : leaves()) m.push_back(nodes_[id].mass);
    return m;
  }

 private:
  int add_node(const TreeSpecNode& spec, int level, int parent, double mass_tol) {
    if (level > depth_)
      fail("EmptyLevel", "node below level " + std::to_string(depth_) +
                             "; tree is deeper than the declared level count");
    int id = node_count();
    TreeNode<T> n;
    n.level = level;
    n.parent = parent;
    n.mass_text = spec.mass;
    n.mass = parse_scalar<T>(spec.mass);
    if (!(n.mass > 0)) fail("NonPositiveMass", "node " + std::to_string(id) + " has mass " + spec.mass);
    nodes_.push_back(std::move(n));
    levels_[level].push_back(id);
    if (spec.children.empty()) {
      if (level != depth_)
        fail("EmptyLevel", "leaf at level " + std::to_string(level) +
                               " but the tree declares " + std::to_string(depth_) +
                               " levels; every path must reach the last level");
    } else {
      T sum(0);
      for (const TreeSpecNode& c : spec.children) {
        int cid = add_node(c, level + 1, id, mass_tol);
        nodes_[id].children.push_back(cid);
        sum += nodes_[cid].mass;
      }
      if (!approx_eq(sum, nodes_[id].mass, mass_tol))
        fail("MassMismatch", "children of node " + std::to_string(id) + " sum to " +
                                 scalar_to_string(sum) + ", expected " + nodes_[id].mass_text);
    }
    return id;
  }

  void finish(double mass_tol) {
    if (!approx_eq(nodes_[0].mass, T(1), mass_tol))
      fail("MassMismatch", "root mass must be 1, got " + nodes_[0].mass_text);
    int n = node_count();
    next_skip_.assign(n, n);
    leaf_pos_.assign(n, -1);
    leaf_range_.assign(n, {0, 0});
    for (int i = 0; i < static_cast<int>(leaves().size()); ++i) leaf_pos_[leaves()[i]] = i;
    // next_skip: walk children in reverse so each node knows where its
    // subtree ends.
    compute_skips(0, n);
    for (int id = n - 1; id >= 0; --id) {
      if (nodes_[id].children.empty()) {
        leaf_range_[id] = {leaf_pos_[id], leaf_pos_[id] + 1};
      } else {
        leaf_range_[id] = {leaf_range_[nodes_[id].children.front()].first,
                           leaf_range_[nodes_[id].children.back()].second};
      }
    }
  }

  void compute_skips(int id, int skip) {
    next_skip_[id] = skip;
    const auto& ch = nodes_[id].children;
    for (size_t i = 0; i < ch.size(); ++i)
      compute_skips(ch[i], i + 1 < ch.size() ? ch[i + 1] : skip);
  }

  int depth_ = 0;
  std::vector<TreeNode<T>> nodes_;
  std::vector<std::vector<int>> levels_;
  std::vector<int> next_skip_;
  std::vector<int> leaf_pos_;
  std::vector<std::pair<int, int>> leaf_range_;
};

template <class T>
using TreePtr = std::shared_ptr<const FiltrationTree<T>>;

template <class T>
TreePtr<T> build_tree(const TreeSpecNode& root, int levels,
                      double mass_tol = NumTraits<T>::default_tol()) {
  return std::make_shared<const FiltrationTree<T>>(
      FiltrationTree<T>::build(root, levels, mass_tol));
}

}  // namespace mhl
