#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mhl/num.hpp"
#include "mhl/process.hpp"
#include "mhl/rng.hpp"
#include "mhl/tree.hpp"

namespace mhl {

enum class TreeShape { Dyadic, Ternary, Chain, Random };
enum class ValueLaw { Uniform, Bell, SparseSign };

inline const char* to_string(TreeShape s) {
  switch (s) {
    case TreeShape::Dyadic: return "dyadic";
    case TreeShape::Ternary: return "ternary";
    case TreeShape::Chain: return "chain";
    case TreeShape::Random: return "random";
  }
  return "?";
}

inline const char* to_string(ValueLaw l) {
  switch (l) {
    case ValueLaw::Uniform: return "uniform";
    case ValueLaw::Bell: return "bell";
    case ValueLaw::SparseSign: return "sparse";
  }
  return "?";
}

inline TreeShape tree_shape_from_string(const std::string& s) {
  if (s == "dyadic") return TreeShape::Dyadic;
  if (s == "ternary") return TreeShape::Ternary;
  if (s == "chain") return TreeShape::Chain;
  if (s == "random") return TreeShape::Random;
  fail("InvalidSpec", "unknown tree shape '" + s + "'");
}

inline ValueLaw value_law_from_string(const std::string& s) {
  if (s == "uniform") return ValueLaw::Uniform;
  if (s == "bell") return ValueLaw::Bell;
  if (s == "sparse") return ValueLaw::SparseSign;
  fail("InvalidSpec", "unknown value law '" + s + "'");
}

// Recipe for one random instance. Everything the generator does is a pure
// function of these fields, so a stored spec reproduces its instance
// byte for byte.
struct InstanceSpec {
  TreeShape kind = TreeShape::Dyadic;
  int depth = 1;
  int branch_lo = 1, branch_hi = 3;  // random kind only
  std::string ratio = "1/8";         // min child/parent mass fraction; bounds R by 1/ratio
  ValueLaw law = ValueLaw::Uniform;
  std::uint64_t seed = 0;
};

// A resolved instance: exact rational masses and terminal values as strings.
// Both scalar modes instantiate from this, so they see the same object.
struct InstanceDoc {
  TreeSpecNode root;
  int levels = 0;
  std::vector<std::string> terminal;  // leaf order, centered exactly
};

namespace detail {

inline Rat rat_frac(long num, long den) {
  Rat r(num, den);
  r.canonicalize();
  return r;
}

inline TreeSpecNode uniform_split(const Rat& mass, int fanout, int depth_left) {
  TreeSpecNode node;
  node.mass = mass.get_str();
  if (depth_left == 0) return node;
  Rat child = Rat(mass / fanout);
  for (int i = 0; i < fanout; ++i)
    node.children.push_back(uniform_split(child, fanout, depth_left - 1));
  return node;
}

// Split mass among m children with every fraction at least `floor_rat`:
// w_i = floor + (1 - m*floor) * v_i / sum(v), integer v_i > 0. Normalized
// positive vector plus a floor; keeps child/parent >= floor exactly, hence
// the tree's regularity constant at most 1/floor.
inline std::vector<Rat> ratio_floor_split(SplitMix& rng, const Rat& mass, int m,
                                          const Rat& floor_rat) {
  std::vector<long> v(m);
  long total = 0;
  for (int i = 0; i < m; ++i) {
    v[i] = 1 + rng.below(16);
    total += v[i];
  }
  Rat slack = Rat(1 - m * floor_rat);
  std::vector<Rat> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    Rat frac = Rat(floor_rat + Rat(slack * v[i]) / total);
    out.push_back(Rat(mass * frac));
  }
  return out;
}

inline TreeSpecNode random_subtree(SplitMix& rng, const Rat& mass, int depth_left, int lo, int hi,
                                   const Rat& floor_rat) {
  TreeSpecNode node;
  node.mass = mass.get_str();
  if (depth_left == 0) return node;
  int m = lo + rng.below(hi - lo + 1);
  std::vector<Rat> parts = ratio_floor_split(rng, mass, m, floor_rat);
  for (const Rat& p : parts)
    node.children.push_back(random_subtree(rng, p, depth_left - 1, lo, hi, floor_rat));
  return node;
}

// dyadic rational in [-1, 1] with denominator 2^12
inline Rat dyadic_draw(SplitMix& rng) {
  long k = rng.below(2 * 4096 + 1) - 4096;
  return rat_frac(k, 4096);
}

// Irwin-Hall bell: mean of four uniform draws, recentered; still dyadic.
inline Rat bell_draw(SplitMix& rng) {
  Rat acc(0);
  for (int i = 0; i < 4; ++i) acc += rat_frac(rng.below(4097), 4096);
  return Rat(acc / 2 - 1);
}

inline void collect_leaf_masses(const TreeSpecNode& n, std::vector<Rat>& out) {
  if (n.children.empty()) {
    out.push_back(rat_from_string(n.mass));
    return;
  }
  for (const auto& ch : n.children) collect_leaf_masses(ch, out);
}

}  // namespace detail

inline TreeSpecNode make_tree_spec(const InstanceSpec& spec) {
  switch (spec.kind) {
    case TreeShape::Dyadic: return detail::uniform_split(Rat(1), 2, spec.depth);
    case TreeShape::Ternary: return detail::uniform_split(Rat(1), 3, spec.depth);
    case TreeShape::Chain: return detail::uniform_split(Rat(1), 1, spec.depth);
    case TreeShape::Random: {
      Rat ratio = rat_from_string(spec.ratio);
      if (!(ratio > 0) || ratio > 1) fail("InvalidSpec", "ratio must lie in (0, 1]");
      if (spec.branch_lo < 1 || spec.branch_hi < spec.branch_lo)
        fail("InvalidSpec", "need 1 <= branch_lo <= branch_hi");
      // m * ratio must stay below 1 or the floor eats the whole mass
      int hi = spec.branch_hi;
      while (hi > spec.branch_lo && Rat(hi * ratio) >= 1) --hi;
      if (Rat(hi * ratio) > 1)
        fail("InvalidSpec", "branching " + std::to_string(hi) + " incompatible with ratio " +
                                spec.ratio);
      detail::SplitMix rng(spec.seed * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull);
      return detail::random_subtree(rng, Rat(1), spec.depth, spec.branch_lo, hi, ratio);
    }
  }
  fail("InvalidSpec", "unhandled tree shape");
}

// Terminal values for the given leaf masses: exact rationals, exactly
// centered. Sparse-sign places one magnitude c on a few leaves, pairing
// equal-mass leaves with opposite signs when possible (centered by
// construction); otherwise it recenters, which keeps values in {-c, 0, +c}
// only up to the subtracted mean, so pairing is strongly preferred and the
// uniform-mass trees the experiments use always pair.
inline std::vector<Rat> make_terminal_values(const std::vector<Rat>& leaf_masses, ValueLaw law,
                                             std::uint64_t seed) {
  detail::SplitMix rng(seed ^ 0x6a09e667f3bcc909ull);
  const int n = static_cast<int>(leaf_masses.size());
  std::vector<Rat> vals(n, Rat(0));
  if (n == 0) return vals;
  if (law == ValueLaw::SparseSign) {
    Rat c = detail::rat_frac(1 + rng.below(4), 2);  // in {1/2, 1, 3/2, 2}
    std::map<Rat, std::vector<int>> by_mass;
    for (int i = 0; i < n; ++i) by_mass[leaf_masses[i]].push_back(i);
    int want_pairs = std::max(1, n / 4);
    int made = 0;
    for (auto& [mass, idx] : by_mass) {
      while (idx.size() >= 2 && made < want_pairs) {
        int a = idx.back();
        idx.pop_back();
        int b = idx.back();
        idx.pop_back();
        vals[a] = c;
        vals[b] = Rat(-c);
        ++made;
      }
    }
    if (made > 0) return vals;
    for (int i = 0; i < std::min(n, 3); ++i) vals[rng.below(n)] = rng.next() & 1 ? c : Rat(-c);
  } else {
    for (int i = 0; i < n; ++i)
      vals[i] = law == ValueLaw::Uniform ? detail::dyadic_draw(rng) : detail::bell_draw(rng);
  }
  Rat total(0), mean(0);
  for (int i = 0; i < n; ++i) {
    total += leaf_masses[i];
    mean += Rat(leaf_masses[i] * vals[i]);
  }
  mean = Rat(mean / total);
  for (Rat& v : vals) v = Rat(v - mean);
  return vals;
}

inline InstanceDoc resolve(const InstanceSpec& spec) {
  if (spec.depth < 1) fail("InvalidSpec", "depth must be at least 1");
  InstanceDoc doc;
  doc.root = make_tree_spec(spec);
  doc.levels = spec.depth;
  std::vector<Rat> masses;
  detail::collect_leaf_masses(doc.root, masses);
  std::vector<Rat> vals = make_terminal_values(masses, spec.law, spec.seed);
  doc.terminal.reserve(vals.size());
  for (const Rat& v : vals) doc.terminal.push_back(v.get_str());
  return doc;
}

template <class T>
Martingale<T> instantiate(const InstanceDoc& doc) {
  TreePtr<T> tree = build_tree<T>(doc.root, doc.levels);
  if (static_cast<int>(doc.terminal.size()) != tree->leaf_count())
    fail("MissingLeafValue", "instance lists " + std::to_string(doc.terminal.size()) +
                                 " terminal values for " + std::to_string(tree->leaf_count()) +
                                 " leaves");
  std::vector<T> term;
  term.reserve(doc.terminal.size());
  for (const std::string& s : doc.terminal) term.push_back(parse_scalar<T>(s));
  // generated exactly centered; float parse may leave dust at 1e-16 scale
  if (!NumTraits<T>::exact) center_terminal(*tree, term);
  return martingale_from_terminal(tree, term, NumTraits<T>::exact ? 0.0 : 1e-9);
}

template <class T>
std::pair<TreePtr<T>, Martingale<T>> generate(const InstanceSpec& spec) {
  Martingale<T> f = instantiate<T>(resolve(spec));
  return {f.tree, f};
}

}  // namespace mhl
