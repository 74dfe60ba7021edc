#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mhl/enumerate.hpp"
#include "mhl/process.hpp"
#include "mhl/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mhl {

namespace detail {

// Everything a BMO scan needs per node: P(A) and the r-th oscillation
// integral_A |g_N - g(A)|^r. With these, a stopping time's contribution is a
// plain sum over its stop nodes: ||g - g^nu||_r^r = sum osc, P(nu<inf) =
// sum P.
template <class T>
struct BmoTable {
  std::vector<double> osc;     // by node id
  std::vector<double> prob;    // by node id
  std::vector<T> prob_exact;   // by node id
};

template <class T>
BmoTable<T> bmo_table(const Martingale<T>& g, double r) {
  const FiltrationTree<T>& t = *g.tree;
  BmoTable<T> tab;
  tab.osc.assign(t.node_count(), 0.0);
  tab.prob.assign(t.node_count(), 0.0);
  tab.prob_exact.assign(t.node_count(), T(0));
  std::vector<double> term(t.leaf_count()), mass(t.leaf_count());
  for (int i = 0; i < t.leaf_count(); ++i) {
    term[i] = to_double(g.v[t.leaves()[i]]);
    mass[i] = to_double(t.node(t.leaves()[i]).mass);
  }
  for (int id = 0; id < t.node_count(); ++id) {
    tab.prob_exact[id] = t.node(id).mass;
    tab.prob[id] = to_double(t.node(id).mass);
    double center = to_double(g.v[id]);
    auto [b, e] = t.leaf_range(id);
    double acc = 0;
    for (int p = b; p < e; ++p) acc += mass[p] * std::pow(std::fabs(term[p] - center), r);
    tab.osc[id] = acc;
  }
  return tab;
}

inline double bmo_value(double osc_sum, double p_sum, double r, double alpha) {
  if (!(p_sum > 0)) return 0;
  return std::pow(osc_sum, 1.0 / r) * std::pow(p_sum, -(1.0 / r + alpha));
}

}  // namespace detail

inline void check_bmo_params(double r, double alpha) {
  if (!(r >= 1) || !std::isfinite(r))
    fail("InvalidExponent", "r must lie in [1, inf), got " + std::to_string(r));
  if (!(alpha >= 0) || !std::isfinite(alpha))
    fail("InvalidExponent", "alpha must lie in [0, inf), got " + std::to_string(alpha));
}

// Atom form: max over nodes A of P(A)^{-1/r-alpha} (integral_A |g - g_n|^r)^{1/r}.
// Unions of atoms never beat their best atom (t -> t^{1+r alpha} is
// superadditive for nonnegative exponents), so scanning single atoms is the
// whole supremum.
template <class T>
double bmo_atom_norm(const Martingale<T>& g, double r, double alpha) {
  check_bmo_params(r, alpha);
  detail::BmoTable<T> tab = detail::bmo_table(g, r);
  double best = 0;
  for (size_t id = 0; id < tab.osc.size(); ++id)
    best = std::max(best, detail::bmo_value(tab.osc[id], tab.prob[id], r, alpha));
  return best;
}

// Stopping-time form: sup over all stopping times of
// P(nu<inf)^{-1/r-alpha} ||g - g^nu||_r, by full enumeration under the cap.
// Mathematically equal to the atom form; kept as an independent scan.
// The witness is the earliest antichain in enumeration order attaining the
// sup, in both the serial and the parallel path.
template <class T>
double bmo_stopping_norm(const Martingale<T>& g, double r, double alpha,
                         unsigned long long cap = 1'000'000, bool parallel = true,
                         StoppingTime* witness = nullptr) {
  check_bmo_params(r, alpha);
  detail::BmoTable<T> tab = detail::bmo_table(g, r);
  StoppingTimeSet set = enumerate_stopping_times(*g.tree, cap);
  const int64_t n = set.size();
  double best = 0;
  int64_t best_idx = -1;

#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel
    {
      double loc_best = 0;
      int64_t loc_idx = -1;
#pragma omp for nowait schedule(static)
      for (int64_t i = 0; i < n; ++i) {
        double oscs = 0, ps = 0;
        for (int32_t id : set.get(i)) {
          oscs += tab.osc[id];
          ps += tab.prob[id];
        }
        double v = detail::bmo_value(oscs, ps, r, alpha);
        if (v > loc_best || loc_idx == -1) {
          loc_best = v;
          loc_idx = i;
        }
      }
#pragma omp critical
      {
        if (loc_best > best || (loc_best == best && loc_idx != -1 &&
                                (best_idx == -1 || loc_idx < best_idx))) {
          best = loc_best;
          best_idx = loc_idx;
        }
      }
    }
  } else
#endif
  {
    (void)parallel;
    for (int64_t i = 0; i < n; ++i) {
      double oscs = 0, ps = 0;
      for (int32_t id : set.get(i)) {
        oscs += tab.osc[id];
        ps += tab.prob[id];
      }
      double v = detail::bmo_value(oscs, ps, r, alpha);
      if (v > best || best_idx == -1) {
        best = v;
        best_idx = i;
      }
    }
  }
  if (witness && best_idx >= 0) *witness = set.stopping_time(best_idx);
  return best;
}

// A window of stopping times nu_k, k = k_min .. k_min + size - 1; an empty
// node list means that slot never stops (and contributes nothing).
struct StoppingSequence {
  int k_min = 0;
  std::vector<StoppingTime> nus;

  int k_max() const { return k_min + static_cast<int>(nus.size()) - 1; }
};

namespace detail {

template <class T>
double sequence_ratio_tab(const BmoTable<T>& tab, const StoppingSequence& seq, double r,
                          double q, double alpha) {
  double num = 0, den_acc = 0;
  bool den_max = std::isinf(q);
  for (size_t i = 0; i < seq.nus.size(); ++i) {
    double oscs = 0, ps = 0;
    for (int id : seq.nus[i].nodes) {
      oscs += tab.osc[id];
      ps += tab.prob[id];
    }
    if (!(ps > 0)) continue;
    double w = pow2<double>(seq.k_min + static_cast<int>(i));
    num += w * std::pow(ps, 1.0 - 1.0 / r) * std::pow(oscs, 1.0 / r);
    double dterm = w * std::pow(ps, 1.0 + alpha);
    den_acc = den_max ? std::max(den_acc, dterm) : den_acc + std::pow(dterm, q);
  }
  if (!(den_acc > 0))
    fail("DegenerateSequence", "every slot of the sequence has P(nu < inf) = 0");
  double den = den_max ? den_acc : std::pow(den_acc, 1.0 / q);
  return num / den;
}

}  // namespace detail

// The sequence ratio behind the generalized norm:
//   num = sum_k 2^k P(nu_k<inf)^{1-1/r} ||g - g^{nu_k}||_r
//   den = ( sum_k (2^k P(nu_k<inf)^{1+alpha})^q )^{1/q}   (max_k for q = inf)
// Slots with P = 0 contribute to neither side.
template <class T>
double sequence_ratio(const Martingale<T>& g, const StoppingSequence& seq, double r, double q,
                      double alpha) {
  check_bmo_params(r, alpha);
  if (!(q > 0)) fail("InvalidExponent", "q must lie in (0, inf], got " + std::to_string(q));
  detail::BmoTable<T> tab = detail::bmo_table(g, r);
  return detail::sequence_ratio_tab(tab, seq, r, q, alpha);
}

// ---- sequence search ----------------------------------------------------
//
// For a fixed slot k the contribution of a candidate nu is determined by
// (P, osc) alone:
//   numerator term   2^k P^{1-1/r} osc^{1/r}   (maximize)
//   denominator term 2^k P^{1+alpha}           (minimize)
// Both 2^k factors are slot-independent weights, so one reduced menu serves
// every slot. The reduction is lossless:
//  * among candidates with equal P, only the largest osc can appear in a
//    maximizer (same denominator, larger numerator);
//  * a candidate is dropped when one with smaller-or-equal P has
//    greater-or-equal score m = P^{1-1/r} osc^{1/r} (its numerator term is
//    no worse, its denominator term no larger).
// What survives is, per distinct P, the best oscillation, Pareto-filtered.

struct SeqMenuItem {
  double prob = 0;
  double osc = 0;
  double m = 0;  // P^{1-1/r} osc^{1/r}
  double d = 0;  // P^{1+alpha}
  std::vector<int> nodes;
};

struct SeqMenu {
  std::vector<SeqMenuItem> items;  // sorted by prob ascending
  bool complete = false;           // false when built from sampled antichains
};

namespace detail {

template <class T>
void menu_from_buckets(SeqMenu& menu, std::map<T, std::pair<double, std::vector<int>>>& best,
                       double r, double alpha) {
  double best_m = -1;
  for (auto& [p_exact, entry] : best) {
    SeqMenuItem item;
    item.prob = to_double(p_exact);
    item.osc = entry.first;
    item.m = std::pow(item.prob, 1.0 - 1.0 / r) * std::pow(item.osc, 1.0 / r);
    item.d = std::pow(item.prob, 1.0 + alpha);
    item.nodes = std::move(entry.second);
    if (menu.items.empty() || item.m > best_m) {
      best_m = item.m;
      menu.items.push_back(std::move(item));
    }
  }
}

template <class T>
SeqMenu build_seq_menu(const Martingale<T>& g, const BmoTable<T>& tab, double r, double alpha,
                       unsigned long long cap) {
  SeqMenu menu;
  std::map<T, std::pair<double, std::vector<int>>> best;  // exact P -> (osc, witness)
  if (stopping_time_count(*g.tree) <= cap) {
    std::vector<int> nodes;
    for_each_stopping_time(*g.tree, [&](const std::vector<int32_t>& ids) {
      if (ids.empty()) return;
      T p(0);
      double oscs = 0;
      for (int32_t id : ids) {
        p += tab.prob_exact[id];
        oscs += tab.osc[id];
      }
      auto it = best.find(p);
      if (it == best.end())
        best.emplace(p, std::make_pair(oscs, std::vector<int>(ids.begin(), ids.end())));
      else if (oscs > it->second.first)
        it->second = {oscs, std::vector<int>(ids.begin(), ids.end())};
    });
    menu.complete = true;
  }
  menu_from_buckets(menu, best, r, alpha);
  return menu;
}

}  // namespace detail

// Exact supremum of the sequence ratio over a finite window: every slot
// independently picks a stopping time (or skips), so the search space is the
// product of the reduced menus. cap bounds that product, after reduction.
template <class T>
double bmo_sequence_exhaustive(const Martingale<T>& g, double r, double q, double alpha,
                               int k_min, int k_max, unsigned long long cap = 10'000'000,
                               unsigned long long enum_cap = 1'000'000) {
  check_bmo_params(r, alpha);
  if (!(q > 0)) fail("InvalidExponent", "q must lie in (0, inf], got " + std::to_string(q));
  if (k_max < k_min) fail("ParameterOutOfRange", "empty window");
  detail::BmoTable<T> tab = detail::bmo_table(g, r);
  SeqMenu menu = detail::build_seq_menu(g, tab, r, alpha, enum_cap);
  if (!menu.complete)
    fail("EnumerationCapExceeded",
         "stopping-time enumeration exceeds the cap; the exact search needs the full menu");
  const int window = k_max - k_min + 1;
  unsigned long long space = 1;
  for (int i = 0; i < window; ++i)
    space = detail::sat_mul(space, static_cast<unsigned long long>(menu.items.size()) + 1);
  if (space > cap)
    fail("EnumerationCapExceeded", "search space " + std::to_string(space) +
                                       " assignments exceeds the cap " + std::to_string(cap));
  const bool den_max = std::isinf(q);
  double best = 0;
  // DFS over slots; each slot adds one menu item or skips.
  std::vector<double> w(window);
  for (int i = 0; i < window; ++i) w[i] = pow2<double>(k_min + i);
  auto rec = [&](auto&& self, int slot, double num, double den_acc) -> void {
    if (slot == window) {
      if (den_acc > 0) {
        double den = den_max ? den_acc : std::pow(den_acc, 1.0 / q);
        best = std::max(best, num / den);
      }
      return;
    }
    self(self, slot + 1, num, den_acc);  // skip
    for (const SeqMenuItem& it : menu.items) {
      double dterm = w[slot] * it.d;
      double nd = den_max ? std::max(den_acc, dterm) : den_acc + std::pow(dterm, q);
      self(self, slot + 1, num + w[slot] * it.m, nd);
    }
  };
  rec(rec, 0, 0.0, 0.0);
  return best;
}

struct BmoSeqConfig {
  int k_min = 0;
  int k_max = -1;  // k_max < k_min: derive the window from the statistics
  int hill_iters = 200;
  int random_sequences = 64;
  int restarts = 8;
  std::uint64_t seed = 1;
  unsigned long long enum_cap = 1'000'000;
  int sampled_antichains = 256;               // menu fallback above the cap
  unsigned long long exhaustive_cap = 200'000;  // below this, scan instead of search
};

struct BmoEstimate {
  double value = 0;
  std::string method = "singleton";
  StoppingSequence witness;
};

namespace detail {

// Random antichain: walk from the root, stop at each node with probability
// theta, otherwise descend. May come out empty.
template <class T>
std::vector<int> random_antichain(const FiltrationTree<T>& t, SplitMix& rng, double theta) {
  std::vector<int> nodes;
  int id = 0;
  while (id < t.node_count()) {
    bool leaf = t.node(id).children.empty();
    if (rng.unit() < theta || (leaf && rng.unit() < 0.5)) {
      nodes.push_back(id);
      id = t.next_skip(id);
    } else {
      ++id;
    }
  }
  return nodes;
}

// Assignment-based evaluation over a menu: a[i] in {-1 (skip), item index}.
struct MenuEval {
  const SeqMenu* menu;
  double q;
  std::vector<double> w;  // 2^k per slot

  double ratio(const std::vector<int>& a) const {
    bool den_max = std::isinf(q);
    double num = 0, den_acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i] < 0) continue;
      const SeqMenuItem& it = menu->items[a[i]];
      num += w[i] * it.m;
      double dterm = w[i] * it.d;
      den_acc = den_max ? std::max(den_acc, dterm) : den_acc + std::pow(dterm, q);
    }
    if (!(den_acc > 0)) return -1;  // degenerate
    return num / (den_max ? den_acc : std::pow(den_acc, 1.0 / q));
  }
};

}  // namespace detail

// Lower bound for the sequence supremum, from four families of candidates:
// (a) single stopping times (recovers the plain stopping-time norm),
// (b) level-crossing sequences driven by s(g), S(g), g*,
// (c) seeded random antichain sequences,
// (d) local search: coordinate ascent over the reduced menu plus random
//     single-node toggles, from the best starts found by (a)-(c).
template <class T>
BmoEstimate bmo_sequence_estimate(const Martingale<T>& g, double r, double q, double alpha,
                                  const BmoSeqConfig& cfg = {}) {
  check_bmo_params(r, alpha);
  if (!(q > 0)) fail("InvalidExponent", "q must lie in (0, inf], got " + std::to_string(q));
  const FiltrationTree<T>& t = *g.tree;
  detail::BmoTable<T> tab = detail::bmo_table(g, r);
  detail::SplitMix rng(cfg.seed);

  // crossing statistics, unsquared, as adapted sequences
  AdaptedSequence<T> pred = predictable_cond_variation_sq(g);
  AdaptedSequence<T> quad = quad_variation_sq(g);
  AdaptedSequence<T> maxi = maximal_process(g);

  int k_lo = cfg.k_min, k_hi = cfg.k_max;
  if (k_hi < k_lo) {
    // default window from the positive range of the crossing statistics
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    auto scan = [&](const std::vector<T>& sq, bool squared) {
      for (const T& v : sq) {
        double d = to_double(v);
        if (squared) d = std::sqrt(d);
        if (d > 0) {
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
      }
    };
    scan(pred.v, true);
    scan(quad.v, true);
    scan(maxi.v, false);
    if (!(hi > 0)) {
      k_lo = 0;
      k_hi = 0;
    } else {
      k_lo = static_cast<int>(std::floor(std::log2(lo))) - 2;
      k_hi = static_cast<int>(std::ceil(std::log2(hi))) + 1;
    }
  }
  const int window = k_hi - k_lo + 1;

  SeqMenu menu = detail::build_seq_menu(g, tab, r, alpha, cfg.enum_cap);
  if (!menu.complete) {
    // sampled fallback: bucket random antichains instead of all of them
    std::map<T, std::pair<double, std::vector<int>>> best;
    for (int i = 0; i < cfg.sampled_antichains; ++i) {
      std::vector<int> nodes = detail::random_antichain(t, rng, 0.15 + 0.7 * rng.unit());
      if (nodes.empty()) continue;
      T p(0);
      double oscs = 0;
      for (int id : nodes) {
        p += tab.prob_exact[id];
        oscs += tab.osc[id];
      }
      auto it = best.find(p);
      if (it == best.end())
        best.emplace(p, std::make_pair(oscs, nodes));
      else if (oscs > it->second.first)
        it->second = {oscs, nodes};
    }
    detail::menu_from_buckets(menu, best, r, alpha);
  }

  detail::MenuEval eval{&menu, q, {}};
  eval.w.resize(window);
  for (int i = 0; i < window; ++i) eval.w[i] = pow2<double>(k_lo + i);

  double best_val = 0;
  std::vector<int> best_a(window, -1);
  std::string best_method = "singleton";

  // when the assignment space is small and the menu is complete, the
  // search degenerates to an exact scan
  if (menu.complete) {
    unsigned long long space = 1;
    for (int i = 0; i < window; ++i)
      space = detail::sat_mul(space, static_cast<unsigned long long>(menu.items.size()) + 1);
    if (space <= cfg.exhaustive_cap) {
      std::vector<int> a(window, -1);
      auto rec = [&](auto&& self, int slot) -> void {
        if (slot == window) {
          double v = eval.ratio(a);
          if (v > best_val) {
            best_val = v;
            best_a = a;
          }
          return;
        }
        for (int c = -1; c < static_cast<int>(menu.items.size()); ++c) {
          a[slot] = c;
          self(self, slot + 1);
        }
        a[slot] = -1;
      };
      rec(rec, 0);
      BmoEstimate est;
      est.value = best_val;
      est.method = "exhaustive";
      est.witness.k_min = k_lo;
      est.witness.nus.resize(window);
      for (int i = 0; i < window; ++i)
        if (best_a[i] >= 0) est.witness.nus[i] = StoppingTime{menu.items[best_a[i]].nodes};
      return est;
    }
  }
  auto consider = [&](const std::vector<int>& a, const char* method) {
    double v = eval.ratio(a);
    if (v > best_val) {
      best_val = v;
      best_a = a;
      best_method = method;
    }
  };

  // (a) singletons: the slot does not matter (the 2^k cancels), scan items
  for (int c = 0; c < static_cast<int>(menu.items.size()); ++c) {
    std::vector<int> a(window, -1);
    a[0] = c;
    consider(a, "singleton");
  }

  // (b) level-crossing sequences; thresholds squared to match the stored
  // statistics where needed
  {
    auto crossing_assignment = [&](const AdaptedSequence<T>& stat, bool squared) {
      std::vector<int> a(window, -1);
      for (int i = 0; i < window; ++i) {
        int k = k_lo + i;
        T thr = squared ? pow2<T>(2 * k) : pow2<T>(k);
        StoppingTime nu = level_crossing_time(stat, thr);
        if (nu.nodes.empty()) continue;
        // match the antichain to a menu item: same exact P, else best effort
        T p(0);
        double oscs = 0;
        for (int id : nu.nodes) {
          p += tab.prob_exact[id];
          oscs += tab.osc[id];
        }
        double pd = to_double(p);
        int pick = -1;
        for (int c = 0; c < static_cast<int>(menu.items.size()); ++c) {
          if (menu.items[c].prob == pd && menu.items[c].osc >= oscs) pick = c;
        }
        if (pick < 0) {
          // no menu twin (sampled menus); fall back to the nearest by prob
          double bestd = std::numeric_limits<double>::infinity();
          for (int c = 0; c < static_cast<int>(menu.items.size()); ++c) {
            double d = std::fabs(menu.items[c].prob - pd);
            if (d < bestd) {
              bestd = d;
              pick = c;
            }
          }
        }
        a[i] = pick;
      }
      return a;
    };
    consider(crossing_assignment(pred, true), "level-crossing");
    consider(crossing_assignment(quad, true), "level-crossing");
    consider(crossing_assignment(maxi, false), "level-crossing");
  }

  // (c) random sequences
  for (int s = 0; s < cfg.random_sequences; ++s) {
    std::vector<int> a(window, -1);
    for (int i = 0; i < window; ++i)
      if (rng.unit() < 0.5 && !menu.items.empty()) a[i] = rng.below(static_cast<int>(menu.items.size()));
    consider(a, "random");
  }

  // (d) local search: coordinate ascent (single slots, then slot pairs) from
  // the best assignment and from random restarts
  auto ascend = [&](std::vector<int> a) {
    double cur = eval.ratio(a);
    const int items = static_cast<int>(menu.items.size());
    bool improved = true;
    int guard = 0;
    while (improved && guard++ < cfg.hill_iters) {
      improved = false;
      for (int i = 0; i < window; ++i) {
        int orig = a[i];
        int pick = orig;
        for (int c = -1; c < items; ++c) {
          if (c == orig) continue;
          a[i] = c;
          double v = eval.ratio(a);
          if (v > cur) {
            cur = v;
            pick = c;
          }
        }
        a[i] = pick;
        if (pick != orig) improved = true;
      }
      if (improved) continue;
      // pairwise pass, only worth it on small menus
      if (static_cast<unsigned long long>(window) * window * (items + 1) * (items + 1) <=
          4'000'000ull) {
        for (int i = 0; i < window && !improved; ++i)
          for (int j = i + 1; j < window && !improved; ++j) {
            int oi = a[i], oj = a[j];
            for (int ci = -1; ci < items && !improved; ++ci)
              for (int cj = -1; cj < items && !improved; ++cj) {
                a[i] = ci;
                a[j] = cj;
                double v = eval.ratio(a);
                if (v > cur) {
                  cur = v;
                  improved = true;
                } else {
                  a[i] = oi;
                  a[j] = oj;
                }
              }
          }
      }
    }
    if (cur > best_val) {
      best_val = cur;
      best_a = a;
      best_method = "local-search";
    }
  };
  ascend(best_a);
  for (int s = 0; s < cfg.restarts; ++s) {
    std::vector<int> a(window, -1);
    for (int i = 0; i < window; ++i)
      if (rng.unit() < 0.5 && !menu.items.empty()) a[i] = rng.below(static_cast<int>(menu.items.size()));
    ascend(a);
  }

  BmoEstimate est;
  est.value = best_val;
  est.method = best_method;
  est.witness.k_min = k_lo;
  est.witness.nus.resize(window);
  for (int i = 0; i < window; ++i)
    if (best_a[i] >= 0) est.witness.nus[i] = StoppingTime{menu.items[best_a[i]].nodes};

  // toggle polish on the materialized witness: random single-node flips,
  // keeping each slot an antichain
  if (cfg.hill_iters > 0 && best_val > 0) {
    StoppingSequence seq = est.witness;
    double cur = best_val;
    for (int it = 0; it < cfg.hill_iters; ++it) {
      int slot = rng.below(window);
      int node = rng.below(t.node_count());
      StoppingSequence cand = seq;
      auto& nodes = cand.nus[slot].nodes;
      auto pos = std::find(nodes.begin(), nodes.end(), node);
      if (pos != nodes.end()) {
        nodes.erase(pos);
      } else {
        std::vector<int> kept;
        for (int id : nodes)
          if (!t.is_ancestor_or_self(id, node) && !t.is_ancestor_or_self(node, id))
            kept.push_back(id);
        kept.push_back(node);
        std::sort(kept.begin(), kept.end());
        nodes = kept;
      }
      bool any = false;
      for (const StoppingTime& nu : cand.nus)
        if (!nu.nodes.empty()) any = true;
      if (!any) continue;
      double v = detail::sequence_ratio_tab(tab, cand, r, q, alpha);
      if (v > cur) {
        cur = v;
        seq = cand;
      }
    }
    if (cur > best_val) {
      best_val = cur;
      est.value = cur;
      est.witness = seq;
      est.method = "local-search";
    }
  }
  return est;
}

}  // namespace mhl
