#pragma once

#include <string>
#include <vector>

#include "mhl/lorentz.hpp"
#include "mhl/process.hpp"

namespace mhl {

// The three pathwise functionals a martingale norm can be built on.
enum class HardyKind { Maximal, QuadVariation, CondQuadVariation };

inline const char* to_string(HardyKind k) {
  switch (k) {
    case HardyKind::Maximal: return "star";
    case HardyKind::QuadVariation: return "S";
    case HardyKind::CondQuadVariation: return "s";
  }
  return "?";
}

template <class T>
WeightedValues<T> weighted_leaf_values(const FiltrationTree<T>& t, std::vector<T> values) {
  return WeightedValues<T>{std::move(values), t.leaf_masses()};
}

// ||f||_{H_{p,q}} for the chosen functional. The variation statistics are
// carried squared until the norm boundary.
template <class T>
double h_norm(const Martingale<T>& f, HardyKind kind, const LorentzIndex& idx) {
  const FiltrationTree<T>& t = *f.tree;
  switch (kind) {
    case HardyKind::Maximal: {
      AdaptedSequence<T> m = maximal_process(f);
      return lorentz_norm(weighted_leaf_values(t, leaf_slice(m)), idx);
    }
    case HardyKind::QuadVariation: {
      AdaptedSequence<T> s = quad_variation_sq(f);
      return lorentz_norm(weighted_leaf_values(t, leaf_slice(s)), idx, /*squared=*/true);
    }
    case HardyKind::CondQuadVariation: {
      AdaptedSequence<T> s = cond_quad_variation_sq(f);
      return lorentz_norm(weighted_leaf_values(t, leaf_slice(s)), idx, /*squared=*/true);
    }
  }
  fail("InvalidSpec", "unknown Hardy kind");
}

// Predictable envelope targets: dominate the quadratic variation (Q) or the
// martingale itself (D).
enum class EnvelopeTarget { Q, D };

inline const char* to_string(EnvelopeTarget t) { return t == EnvelopeTarget::Q ? "Q" : "D"; }

// A nondecreasing adapted sequence lambda with lambda_{n-1} dominating the
// target's level-n statistic. Q-envelopes are stored squared (exact), D
// envelopes plain.
template <class T>
struct Envelope {
  AdaptedSequence<T> values;
  bool squared = false;
  EnvelopeTarget target = EnvelopeTarget::Q;
};

namespace detail {

// target statistic read one level ahead at each node, with the last level
// extended by itself: Q -> S_{n+1}^2, D -> |f_{n+1}|.
template <class T>
std::vector<T> envelope_demand(const Martingale<T>& f, EnvelopeTarget target) {
  const FiltrationTree<T>& t = *f.tree;
  std::vector<T> stat(t.node_count(), T(0));
  if (target == EnvelopeTarget::Q) {
    AdaptedSequence<T> S = quad_variation_sq(f);
    stat = S.v;
  } else {
    for (int id = 0; id < t.node_count(); ++id) stat[id] = abs_val(f.v[id]);
  }
  std::vector<T> demand(t.node_count(), T(0));
  for (int id = 0; id < t.node_count(); ++id) {
    const auto& n = t.node(id);
    if (n.children.empty()) {
      demand[id] = stat[id];
    } else {
      T m = stat[n.children[0]];
      for (size_t i = 1; i < n.children.size(); ++i) m = std::max(m, stat[n.children[i]]);
      demand[id] = m;
    }
  }
  return demand;
}

}  // namespace detail

// Pointwise-least admissible envelope: lambda_n = max(lambda_{n-1},
// one-step-ahead demand). Greedy from the root; minimality follows by
// induction on levels.
template <class T>
Envelope<T> minimal_envelope(const Martingale<T>& f, EnvelopeTarget target) {
  const FiltrationTree<T>& t = *f.tree;
  std::vector<T> demand = detail::envelope_demand(f, target);
  Envelope<T> env;
  env.squared = target == EnvelopeTarget::Q;
  env.target = target;
  env.values.tree = f.tree;
  env.values.v.assign(t.node_count(), T(0));
  env.values.v[0] = demand[0];
  for (int id = 1; id < t.node_count(); ++id)
    env.values.v[id] = std::max(env.values.v[t.node(id).parent], demand[id]);
  return env;
}

// Validity of a candidate envelope for f: adapted (given per node),
// nondecreasing along paths, and dominating the target one step ahead.
// Exact in rational mode, tolerance-relative in float mode.
template <class T>
bool envelope_is_valid(const Martingale<T>& f, EnvelopeTarget target,
                       const AdaptedSequence<T>& lambda, bool lambda_squared,
                       double tol = NumTraits<T>::default_tol()) {
  const FiltrationTree<T>& t = *f.tree;
  std::vector<T> demand = detail::envelope_demand(f, target);
  bool demand_squared = target == EnvelopeTarget::Q;
  auto dominates = [&](const T& lam, const T& dem) {
    // compare lam >= dem, honoring the squared representations
    if (lambda_squared == demand_squared) return !(lam < T(dem * (1 - tol)));
    double l = to_double(lam), d = to_double(dem);
    if (lambda_squared) l = std::sqrt(l);
    if (demand_squared) d = std::sqrt(d);
    return l >= d * (1 - tol);
  };
  for (int id = 0; id < t.node_count(); ++id) {
    if (lambda.v[id] < 0) return false;
    if (id > 0 && lambda.v[id] < lambda.v[t.node(id).parent]) return false;
    if (!dominates(lambda.v[id], demand[id])) return false;
  }
  return true;
}

// ||lambda_N||_{p,q} of the minimal envelope: the Q- or D-functional.
template <class T>
double qd_norm(const Martingale<T>& f, EnvelopeTarget target, const LorentzIndex& idx) {
  Envelope<T> env = minimal_envelope(f, target);
  return lorentz_norm(weighted_leaf_values(*f.tree, leaf_slice(env.values)), idx, env.squared);
}

// All five functionals at one index; the building block of the norm
// comparison tables.
struct NormSnapshot {
  double star = 0, quad = 0, cond = 0, env_q = 0, env_d = 0;
};

template <class T>
NormSnapshot norm_snapshot(const Martingale<T>& f, const LorentzIndex& idx) {
  NormSnapshot s;
  s.star = h_norm(f, HardyKind::Maximal, idx);
  s.quad = h_norm(f, HardyKind::QuadVariation, idx);
  s.cond = h_norm(f, HardyKind::CondQuadVariation, idx);
  s.env_q = qd_norm(f, EnvelopeTarget::Q, idx);
  s.env_d = qd_norm(f, EnvelopeTarget::D, idx);
  return s;
}

}  // namespace mhl
