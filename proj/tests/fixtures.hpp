#pragma once

// Small hand-built trees and martingales shared across the test files.

#include <string>
#include <utility>
#include <vector>

#include "mhl/process.hpp"
#include "mhl/tree.hpp"

namespace fix {

inline mhl::TreeSpecNode leaf(std::string mass) { return {std::move(mass), {}}; }

inline mhl::TreeSpecNode node(std::string mass, std::vector<mhl::TreeSpecNode> kids) {
  return {std::move(mass), std::move(kids)};
}

// Balanced tree with the given fanout and uniform masses 1/fanout^level.
inline mhl::TreeSpecNode uniform_spec(int fanout, int depth, long long den = 1) {
  mhl::TreeSpecNode n;
  n.mass = den == 1 ? "1" : "1/" + std::to_string(den);
  if (depth == 0) return n;
  for (int i = 0; i < fanout; ++i) n.children.push_back(uniform_spec(fanout, depth - 1, den * fanout));
  return n;
}

template <class T>
mhl::TreePtr<T> uniform_tree(int fanout, int depth) {
  return mhl::build_tree<T>(uniform_spec(fanout, depth), depth);
}

template <class T>
mhl::TreePtr<T> two_leaf(const std::string& m1 = "1/2", const std::string& m2 = "1/2") {
  return mhl::build_tree<T>(node("1", {leaf(m1), leaf(m2)}), 1);
}

// Chain: one atom per level (the sigma-algebras never refine).
template <class T>
mhl::TreePtr<T> chain_tree(int depth) {
  mhl::TreeSpecNode n = leaf("1");
  for (int i = 0; i < depth; ++i) n = node("1", {n});
  return mhl::build_tree<T>(n, depth);
}

template <class T>
mhl::Martingale<T> mart(mhl::TreePtr<T> tree, std::vector<T> terminal) {
  return mhl::martingale_from_terminal<T>(std::move(tree), std::move(terminal));
}

// One-step +1/-1 on a fresh two-leaf uniform tree.
template <class T>
mhl::Martingale<T> sign_martingale() {
  auto t = two_leaf<T>();
  return mart<T>(t, {T(1), T(-1)});
}

}  // namespace fix
