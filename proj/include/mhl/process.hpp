#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mhl/tree.hpp"

namespace mhl {

// One value per node: x_n as a function, restricted to the atoms of level n.
template <class T>
struct AdaptedSequence {
  TreePtr<T> tree;
  std::vector<T> v;  // by node id

  const T& at(int id) const { return v[id]; }
};

// A martingale is determined by its terminal values; v[id] = E_n(f) on the
// atom id at level n. The start value is pinned to 0.
template <class T>
struct Martingale {
  TreePtr<T> tree;
  std::vector<T> v;

  const T& at(int id) const { return v[id]; }
};

// E_n(x) for every node at once: mass-weighted averages, bottom-up.
template <class T>
std::vector<T> node_averages(const FiltrationTree<T>& t, const std::vector<T>& leaf_values) {
  if (static_cast<int>(leaf_values.size()) != t.leaf_count())
    fail("MissingLeafValue", "expected " + std::to_string(t.leaf_count()) +
                                 " leaf values, got " + std::to_string(leaf_values.size()));
  std::vector<T> avg(t.node_count(), T(0));
  for (int i = 0; i < t.leaf_count(); ++i) avg[t.leaves()[i]] = leaf_values[i];
  for (int id = t.node_count() - 1; id >= 0; --id) {
    const auto& n = t.node(id);
    if (n.children.empty()) continue;
    T acc(0);
    for (int c : n.children) acc += T(t.node(c).mass * avg[c]);
    avg[id] = T(acc / n.mass);
  }
  return avg;
}

template <class T>
std::vector<T> conditional_expectation(const FiltrationTree<T>& t,
                                       const std::vector<T>& leaf_values, int n) {
  std::vector<T> avg = node_averages(t, leaf_values);
  std::vector<T> out;
  for (int id : t.level(n)) out.push_back(avg[id]);
  return out;
}

// Extend a level-n function (one value per level-n atom) to the leaves.
template <class T>
std::vector<T> lift_to_leaves(const FiltrationTree<T>& t, const std::vector<T>& values, int n) {
  const auto& lvl = t.level(n);
  if (values.size() != lvl.size())
    fail("MissingLeafValue", "expected " + std::to_string(lvl.size()) + " values at level " +
                                 std::to_string(n) + ", got " + std::to_string(values.size()));
  std::vector<T> out(t.leaf_count(), T(0));
  for (size_t i = 0; i < lvl.size(); ++i) {
    auto [b, e] = t.leaf_range(lvl[i]);
    for (int p = b; p < e; ++p) out[p] = values[i];
  }
  return out;
}

template <class T>
T weighted_mean(const FiltrationTree<T>& t, const std::vector<T>& leaf_values) {
  if (static_cast<int>(leaf_values.size()) != t.leaf_count())
    fail("MissingLeafValue", "expected " + std::to_string(t.leaf_count()) +
                                 " leaf values, got " + std::to_string(leaf_values.size()));
  T acc(0);
  for (int i = 0; i < t.leaf_count(); ++i)
    acc += T(t.node(t.leaves()[i]).mass * leaf_values[i]);
  return acc;
}

template <class T>
void center_terminal(const FiltrationTree<T>& t, std::vector<T>& leaf_values) {
  T m = weighted_mean(t, leaf_values);
  for (T& v : leaf_values) v -= m;
}

template <class T>
Martingale<T> martingale_from_terminal(TreePtr<T> tree, const std::vector<T>& terminal,
                                       double tol = NumTraits<T>::default_tol()) {
  T mean = weighted_mean(*tree, terminal);
  if (!approx_eq(mean, T(0), tol))
    fail("NonCenteredTerminal", "terminal values have mean " + scalar_to_string(mean) +
                                    "; center them first (martingales start at 0)");
  Martingale<T> f;
  f.tree = std::move(tree);
  f.v = node_averages(*f.tree, terminal);
  return f;
}

template <class T>
std::vector<T> terminal_slice(const Martingale<T>& f) {
  std::vector<T> out;
  out.reserve(f.tree->leaf_count());
  for (int id : f.tree->leaves()) out.push_back(f.v[id]);
  return out;
}

template <class T>
std::vector<T> leaf_slice(const AdaptedSequence<T>& x) {
  std::vector<T> out;
  out.reserve(x.tree->leaf_count());
  for (int id : x.tree->leaves()) out.push_back(x.v[id]);
  return out;
}

template <class T>
bool is_martingale(const FiltrationTree<T>& t, const std::vector<T>& values, double tol) {
  if (static_cast<int>(values.size()) != t.node_count()) return false;
  if (!approx_eq(values[0], T(0), tol)) return false;
  for (int id = 0; id < t.node_count(); ++id) {
    const auto& n = t.node(id);
    if (n.children.empty()) continue;
    T acc(0);
    for (int c : n.children) acc += T(t.node(c).mass * values[c]);
    if (!approx_eq(acc, T(n.mass * values[id]), tol)) return false;
  }
  return true;
}

// Difference sequence: d_n f = f_n - f_{n-1}; the root entry is 0.
template <class T>
AdaptedSequence<T> differences(const Martingale<T>& f) {
  AdaptedSequence<T> d{f.tree, std::vector<T>(f.tree->node_count(), T(0))};
  for (int id = 1; id < f.tree->node_count(); ++id)
    d.v[id] = T(f.v[id] - f.v[f.tree->node(id).parent]);
  return d;
}

// Running maximum of |f_m|, m <= n. Terminal slice is the maximal function.
template <class T>
AdaptedSequence<T> maximal_process(const Martingale<T>& f) {
  AdaptedSequence<T> m{f.tree, std::vector<T>(f.tree->node_count(), T(0))};
  m.v[0] = abs_val(f.v[0]);
  for (int id = 1; id < f.tree->node_count(); ++id)
    m.v[id] = std::max(m.v[f.tree->node(id).parent], abs_val(f.v[id]));
  return m;
}

// Quadratic variation, stored squared so the rational mode stays exact:
// S_n(f)^2 = sum_{m<=n} |d_m f|^2.
template <class T>
AdaptedSequence<T> quad_variation_sq(const Martingale<T>& f) {
  AdaptedSequence<T> s{f.tree, std::vector<T>(f.tree->node_count(), T(0))};
  for (int id = 1; id < f.tree->node_count(); ++id) {
    int p = f.tree->node(id).parent;
    T d = T(f.v[id] - f.v[p]);
    s.v[id] = T(s.v[p] + d * d);
  }
  return s;
}

namespace detail {

// E_{n}(|d_{n+1} f|^2) evaluated at a level-n node (0 for leaves).
template <class T>
T cond_sq_increment(const Martingale<T>& f, int id) {
  const auto& n = f.tree->node(id);
  T acc(0);
  for (int c : n.children) {
    T d = T(f.v[c] - f.v[id]);
    acc += T(f.tree->node(c).mass * d * d);
  }
  return T(acc / n.mass);
}

}  // namespace detail

// Conditional quadratic variation, squared: s_n(f)^2 = sum_{m<=n}
// E_{m-1}|d_m f|^2. Measurable one level up, so siblings share a value.
template <class T>
AdaptedSequence<T> cond_quad_variation_sq(const Martingale<T>& f) {
  AdaptedSequence<T> s{f.tree, std::vector<T>(f.tree->node_count(), T(0))};
  std::vector<T> inc(f.tree->node_count(), T(0));
  for (int id = 0; id < f.tree->node_count(); ++id)
    inc[id] = detail::cond_sq_increment(f, id);
  for (int id = 1; id < f.tree->node_count(); ++id) {
    int p = f.tree->node(id).parent;
    s.v[id] = T(s.v[p] + inc[p]);
  }
  return s;
}

// One-step-ahead statistic s_{n+1}(f)^2 read at level n (with s_{N+1} := s_N
// past the horizon). This is the predictable threshold statistic used by the
// s-based stopping construction.
template <class T>
AdaptedSequence<T> predictable_cond_variation_sq(const Martingale<T>& f) {
  AdaptedSequence<T> s = cond_quad_variation_sq(f);
  AdaptedSequence<T> out{f.tree, std::vector<T>(f.tree->node_count(), T(0))};
  for (int id = 0; id < f.tree->node_count(); ++id)
    out.v[id] = T(s.v[id] + detail::cond_sq_increment(f, id));
  return out;
}

inline std::vector<double> sqrt_values(const std::vector<double>& sq) {
  std::vector<double> out(sq.size());
  for (size_t i = 0; i < sq.size(); ++i) out[i] = std::sqrt(sq[i]);
  return out;
}

inline std::vector<double> sqrt_values(const std::vector<Rat>& sq) {
  std::vector<double> out(sq.size());
  for (size_t i = 0; i < sq.size(); ++i) out[i] = std::sqrt(sq[i].get_d());
  return out;
}

// A stopping time on the tree: the antichain of nodes where it stops.
// nu(path) = level of the stop node on the path, or infinity if the path
// meets none. The empty set is the everywhere-infinite stopping time.
struct StoppingTime {
  std::vector<int> nodes;  // sorted ascending (= preorder)

  bool never_stops() const { return nodes.empty(); }
};

template <class T>
StoppingTime make_stopping_time(const FiltrationTree<T>& t, std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  for (size_t i = 0; i < nodes.size(); ++i) {
    t.check_id(nodes[i]);
    if (i > 0 && nodes[i] == nodes[i - 1])
      fail("InvalidIndex", "duplicate node " + std::to_string(nodes[i]) + " in stopping time");
  }
  // preorder sorted: any ancestor precedes its descendants, and a descendant
  // of nodes[i] would appear before next_skip(nodes[i]).
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    if (nodes[i + 1] < t.next_skip(nodes[i]))
      fail("InvalidIndex", "nodes " + std::to_string(nodes[i]) + " and " +
                               std::to_string(nodes[i + 1]) +
                               " are nested; stop nodes must form an antichain");
  }
  return StoppingTime{std::move(nodes)};
}

template <class T>
T prob_finite(const FiltrationTree<T>& t, const StoppingTime& nu) {
  T acc(0);
  for (int id : nu.nodes) acc += t.node(id).mass;
  return acc;
}

// Stop node per canonical leaf position (-1 where nu is infinite).
template <class T>
std::vector<int> stop_node_by_leaf(const FiltrationTree<T>& t, const StoppingTime& nu) {
  std::vector<int> stop(t.leaf_count(), -1);
  for (int id : nu.nodes) {
    auto [b, e] = t.leaf_range(id);
    for (int p = b; p < e; ++p) stop[p] = id;
  }
  return stop;
}

// f^nu: frozen at the stop node along each path.
template <class T>
Martingale<T> stopped(const Martingale<T>& f, const StoppingTime& nu) {
  Martingale<T> g{f.tree, f.v};
  for (int id : nu.nodes) {
    if (id >= f.tree->node_count()) fail("TreeMismatch", "stopping time from another tree");
    // freeze everything strictly below id
    int end = f.tree->next_skip(id);
    for (int d = id + 1; d < end; ++d) g.v[d] = f.v[id];
  }
  return g;
}

template <class T>
std::vector<T> stopped_terminal(const Martingale<T>& f, const StoppingTime& nu) {
  std::vector<T> out = terminal_slice(f);
  for (int id : nu.nodes) {
    auto [b, e] = f.tree->leaf_range(id);
    for (int p = b; p < e; ++p) out[p] = f.v[id];
  }
  return out;
}

// First level where lambda_n > threshold (strict), as a minimal antichain.
// Callers comparing squared statistics pass squared thresholds; strictness
// survives the squaring since both sides are nonnegative.
template <class T>
StoppingTime level_crossing_time(const AdaptedSequence<T>& lambda, const T& threshold) {
  StoppingTime nu;
  const FiltrationTree<T>& t = *lambda.tree;
  int id = 0;
  while (id < t.node_count()) {
    if (lambda.v[id] > threshold) {
      nu.nodes.push_back(id);
      id = t.next_skip(id);
    } else {
      ++id;
    }
  }
  return nu;
}

// Same, from per-level leaf maps; checks that each level's map is constant
// on that level's atoms.
template <class T>
AdaptedSequence<T> adapted_from_leaf_maps(TreePtr<T> tree,
                                          const std::vector<std::vector<T>>& per_level) {
  const FiltrationTree<T>& t = *tree;
  if (static_cast<int>(per_level.size()) != t.depth() + 1)
    fail("LevelOutOfRange", "expected " + std::to_string(t.depth() + 1) + " levels, got " +
                                std::to_string(per_level.size()));
  AdaptedSequence<T> x{tree, std::vector<T>(t.node_count(), T(0))};
  for (int n = 0; n <= t.depth(); ++n) {
    const auto& leafmap = per_level[n];
    if (static_cast<int>(leafmap.size()) != t.leaf_count())
      fail("MissingLeafValue", "level " + std::to_string(n) + " map has " +
                                   std::to_string(leafmap.size()) + " entries, expected " +
                                   std::to_string(t.leaf_count()));
    for (int id : t.level(n)) {
      auto [b, e] = t.leaf_range(id);
      for (int p = b + 1; p < e; ++p)
        if (!(leafmap[p] == leafmap[b]))
          fail("NotMeasurable", "level-" + std::to_string(n) +
                                    " values differ inside atom " + std::to_string(id));
      x.v[id] = leafmap[b];
    }
  }
  return x;
}

template <class T>
StoppingTime level_crossing_time(TreePtr<T> tree, const std::vector<std::vector<T>>& per_level,
                                 const T& threshold) {
  return level_crossing_time(adapted_from_leaf_maps(tree, per_level), threshold);
}

}  // namespace mhl
