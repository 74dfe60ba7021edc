#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mhl/process.hpp"

namespace mhl {

namespace detail {

inline unsigned long long sat_mul(unsigned long long a, unsigned long long b) {
  if (a == 0 || b == 0) return 0;
  if (a > std::numeric_limits<unsigned long long>::max() / b)
    return std::numeric_limits<unsigned long long>::max();
  return a * b;
}

inline unsigned long long sat_add(unsigned long long a, unsigned long long b) {
  unsigned long long s = a + b;
  return s < a ? std::numeric_limits<unsigned long long>::max() : s;
}

}  // namespace detail

// Number of stopping times = number of antichains, counting the empty one
// (never stops). Per subtree: stop here, or combine the children freely.
// Saturates instead of overflowing; callers only compare against caps.
template <class T>
unsigned long long stopping_time_count(const FiltrationTree<T>& t) {
  std::vector<unsigned long long> cnt(t.node_count(), 1);
  for (int id = t.node_count() - 1; id >= 0; --id) {
    unsigned long long prod = 1;
    for (int c : t.node(id).children) prod = detail::sat_mul(prod, cnt[c]);
    cnt[id] = detail::sat_add(1, prod);
  }
  return cnt[0];
}

// Flat storage for an enumerated family of stopping times.
struct StoppingTimeSet {
  std::vector<int32_t> flat;
  std::vector<int64_t> offsets;  // size() + 1 entries

  int64_t size() const { return static_cast<int64_t>(offsets.size()) - 1; }
  std::span<const int32_t> get(int64_t i) const {
    return {flat.data() + offsets[i], flat.data() + offsets[i + 1]};
  }
  StoppingTime stopping_time(int64_t i) const {
    auto s = get(i);
    return StoppingTime{std::vector<int>(s.begin(), s.end())};
  }
};

// Visit every antichain once, in a fixed order: at each node, first the
// branch that includes it (skipping its subtree), then the one that leaves
// it out. Node sets arrive sorted in preorder. The empty antichain is last.
template <class T, class Fn>
void for_each_stopping_time(const FiltrationTree<T>& t, Fn&& fn) {
  std::vector<int32_t> cur;
  walk_antichains(t, 0, cur, fn);
}

template <class T, class Fn>
void walk_antichains(const FiltrationTree<T>& t, int id, std::vector<int32_t>& cur, Fn&& fn) {
  if (id >= t.node_count()) {
    fn(static_cast<const std::vector<int32_t>&>(cur));
    return;
  }
  cur.push_back(id);
  walk_antichains(t, t.next_skip(id), cur, fn);
  cur.pop_back();
  walk_antichains(t, id + 1, cur, fn);
}

template <class T>
StoppingTimeSet enumerate_stopping_times(const FiltrationTree<T>& t,
                                         unsigned long long cap = 1'000'000) {
  unsigned long long n = stopping_time_count(t);
  if (n > cap)
    fail("EnumerationCapExceeded", "tree has " + std::to_string(n) +
                                       " stopping times, cap is " + std::to_string(cap));
  StoppingTimeSet set;
  set.offsets.reserve(n + 1);
  set.offsets.push_back(0);
  for_each_stopping_time(t, [&](const std::vector<int32_t>& nodes) {
    set.flat.insert(set.flat.end(), nodes.begin(), nodes.end());
    set.offsets.push_back(static_cast<int64_t>(set.flat.size()));
  });
  return set;
}

}  // namespace mhl
