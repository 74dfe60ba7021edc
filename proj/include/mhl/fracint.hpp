#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mhl/hardy.hpp"
#include "mhl/lorentz.hpp"
#include "mhl/process.hpp"

namespace mhl {

// b_n = mass of the atom at level n (as an adapted sequence): for a node at
// level n the measure of the atom containing it. The weights in the
// fractional integral are b_{n-1}^alpha, the parent atom's mass.
template <class T>
AdaptedSequence<T> atom_mass_process(TreePtr<T> tree) {
  AdaptedSequence<T> out{tree, {}};
  out.v.reserve(tree->node_count());
  for (int id = 0; id < tree->node_count(); ++id) out.v.push_back(tree->node(id).mass);
  return out;
}

namespace detail {

template <class T>
T mass_pow_alpha(const T& mass, double alpha) {
  if (alpha == 0) return T(1);
  return real_pow_checked<T>(mass, alpha, "fractional weight b^alpha");
}

}  // namespace detail

// (I_alpha f)_n = sum_{k<=n} b_{k-1}^alpha d_k f, with b_{-1} = 1 (the root
// difference is zero anyway since f_0 = 0). alpha = 0 reproduces f exactly.
// In rational mode alpha must make b^alpha rational: integers always work,
// as do dyadic trees with alpha a multiple of 1 (general rational alpha is
// rejected by real_pow_checked with a pointer at float mode).
template <class T>
Martingale<T> fractional_integral(const Martingale<T>& f, double alpha) {
  if (!(alpha >= 0) || !std::isfinite(alpha))
    fail("NegativeAlpha", "alpha must lie in [0, inf)");
  const FiltrationTree<T>& t = *f.tree;
  std::vector<T> d = differences(f).v;
  Martingale<T> out{f.tree, std::vector<T>(t.node_count(), T(0))};
  for (int id = 0; id < t.node_count(); ++id) {
    const TreeNode<T>& nd = t.node(id);
    if (nd.parent < 0) {
      out.v[id] = T(0);  // f_0 = 0 and d_0 = 0
      continue;
    }
    T w = detail::mass_pow_alpha(t.node(nd.parent).mass, alpha);
    out.v[id] = T(out.v[nd.parent] + T(w * d[id]));
  }
  return out;
}

// I_alpha commutes with stopping: (I_alpha f)^nu = I_alpha(f^nu). Both sides
// are computed independently; exact in rational mode.
template <class T>
bool commutes_with_stopping(const Martingale<T>& f, const StoppingTime& nu, double alpha,
                            double tol = NumTraits<T>::default_tol()) {
  Martingale<T> lhs = stopped(fractional_integral(f, alpha), nu);
  Martingale<T> rhs = fractional_integral(stopped(f, nu), alpha);
  for (int id = 0; id < f.tree->node_count(); ++id)
    if (!approx_eq(lhs.v[id], rhs.v[id], tol)) return false;
  return true;
}

struct LocalizationReport {
  bool support_ok = true;  // (I_alpha f)* = 0 off B, exactly
  double ratio = 0;        // ||(I_alpha f)*||_inf / P(B)^alpha
};

// Localization of I_alpha: if f* <= chi_B pointwise then I_alpha f lives on B
// and ||(I_alpha f)*||_inf is controlled by P(B)^alpha. The ratio is one
// empirical sample of the constant in that control. Off B every difference of
// f vanishes identically, so the support assertion is exact in both modes.
template <class T>
LocalizationReport lemma62_check(const Martingale<T>& f, int node_b, double alpha,
                                 double tol = NumTraits<T>::default_tol()) {
  const FiltrationTree<T>& t = *f.tree;
  if (node_b < 0 || node_b >= t.node_count())
    fail("PreconditionFailed", "node id " + std::to_string(node_b) + " out of range");
  int end_b = t.next_skip(node_b);
  AdaptedSequence<T> star = maximal_process(f);
  for (int id : t.leaves()) {
    bool inside = id >= node_b && id < end_b;
    T cap = inside ? T(1) : T(0);
    if (star.v[id] > cap && !approx_eq(star.v[id], cap, tol))
      fail("PreconditionFailed",
           "f* exceeds the indicator of the base atom at leaf " + std::to_string(id));
  }
  Martingale<T> ia = fractional_integral(f, alpha);
  AdaptedSequence<T> ia_star = maximal_process(ia);
  LocalizationReport rep;
  double sup = 0;
  for (int id : t.leaves()) {
    bool inside = id >= node_b && id < end_b;
    if (!inside && !(ia_star.v[id] == T(0))) rep.support_ok = false;
    sup = std::max(sup, to_double(ia_star.v[id]));
  }
  rep.ratio = sup / std::pow(to_double(t.node(node_b).mass), alpha);
  return rep;
}

struct SupportRow {
  int k = 0;
  bool zero_before_stop = true;  // I_alpha(a) vanishes where nu >= n
  double sup_before = 0;         // max |I_alpha(a)_n| over {nu >= n} (0 when ok)
};

// Support transfer: an atom a with stopping time nu keeps its support under
// I_alpha, i.e. (I_alpha a)_n = 0 on {nu >= n}. Follows from d_k a = 0 there;
// checked node by node.
template <class T>
SupportRow support_containment(TreePtr<T> tree, const StoppingTime& nu,
                               const std::vector<T>& atom_terminal, double alpha,
                               double tol = NumTraits<T>::default_tol()) {
  const FiltrationTree<T>& t = *tree;
  Martingale<T> a{tree, node_averages(t, atom_terminal)};
  Martingale<T> ia = fractional_integral(a, alpha);
  std::vector<char> below(t.node_count(), 0);
  for (int id : nu.nodes) {
    int end = t.next_skip(id);
    for (int d = id + 1; d < end; ++d) below[d] = 1;
  }
  SupportRow row;
  for (int id = 0; id < t.node_count(); ++id) {
    if (below[id]) continue;
    double v = std::fabs(to_double(ia.v[id]));
    if (!approx_eq(ia.v[id], T(0), tol)) {
      row.zero_before_stop = false;
      row.sup_before = std::max(row.sup_before, v);
    }
  }
  return row;
}

struct AtomBoundednessRow {
  double p1 = 0, p2 = 0, alpha = 0;
  double atom_norm = 0;   // ||s(I_alpha a)||_{p2} (or the category's functional)
  double bound = 0;       // P(nu<inf)^{1/p2 - 1/p1} * P^{1/p1} scaling, see below
  double ratio = 0;       // atom_norm / bound  (<= 1 + tol expected)
  bool ok = true;
};

// The single-atom estimate behind boundedness of I_alpha from H^s_{p1} to
// H^s_{p2} with 1/p2 = 1/p1 - alpha: for a (p1, s)-atom a,
//   ||s(I_alpha a)||_inf <= b^alpha ||s(a)||_inf on the support, which
// integrates to ||s(I_alpha a)||_{p2} <= P(nu<inf)^{1/p2}. The exponent
// relation is enforced up to 1e-12; p1 = p2 forces alpha = 0.
template <class T>
AtomBoundednessRow atom_boundedness(TreePtr<T> tree, const StoppingTime& nu,
                                    const std::vector<T>& atom_terminal, double p1, double p2,
                                    double alpha, double tol = 1e-9) {
  if (!(p1 > 0) || !(p2 > 0) || p1 > p2)
    fail("InvalidExponent", "need 0 < p1 <= p2");
  if (std::fabs(1.0 / p2 - (1.0 / p1 - alpha)) > 1e-12)
    fail("ExponentMismatch", "1/p2 must equal 1/p1 - alpha");
  const FiltrationTree<T>& t = *tree;
  AtomBoundednessRow row;
  row.p1 = p1;
  row.p2 = p2;
  row.alpha = alpha;
  T pk = prob_finite(t, nu);
  if (pk == 0) {
    row.bound = 0;
    return row;  // zero atom, nothing to measure
  }
  Martingale<T> a{tree, node_averages(t, atom_terminal)};
  Martingale<T> ia = fractional_integral(a, alpha);
  // ||s(I_alpha a)||_{p2} as a plain L_{p2} norm of the leaf-level values
  AdaptedSequence<T> s2 = cond_quad_variation_sq(ia);
  WeightedValues<T> wv;
  const std::vector<int>& lv = t.leaves();
  wv.value.reserve(lv.size());
  wv.mass.reserve(lv.size());
  for (int id : lv) {
    wv.value.push_back(s2.v[id]);
    wv.mass.push_back(t.node(id).mass);
  }
  row.atom_norm = lorentz_norm(rearrangement(wv), LorentzIndex{p2, p2}, true);
  row.bound = std::pow(to_double(pk), 1.0 / p2);
  row.ratio = row.bound > 0 ? row.atom_norm / row.bound : 0;
  row.ok = row.ratio <= 1 + tol;
  return row;
}

struct FracNormRow {
  double alpha = 0;
  double p1 = 0, q1 = 0;
  double p2 = 0, q2 = 0;
  double norm_src = 0;   // ||f||_{H^s_{p1,q1}}
  double norm_dst = 0;   // ||I_alpha f||_{H^s_{p2,q2}}
  double ratio = 0;      // norm_dst / norm_src (0 when src vanishes)
};

// One row of the boundedness experiment: measures ||I_alpha f|| against
// ||f|| at the conjugate pair 1/p2 = 1/p1 - alpha. The hypotheses q1 <= 1,
// q1 <= q2 and q1 <= p2 are enforced; q2 defaults to q1.
template <class T>
FracNormRow fractional_norm_row(const Martingale<T>& f, double alpha, double p1, double q1,
                                double q2 = 0) {
  if (q2 == 0) q2 = q1;
  if (!(p1 > 0) || !(alpha >= 0))
    fail("ParameterOutOfRange", "need p1 > 0 and alpha >= 0");
  if (!(q1 > 0) || q1 > 1 || q2 < q1)
    fail("ParameterOutOfRange", "need 0 < q1 <= 1 and q1 <= q2");
  double inv2 = 1.0 / p1 - alpha;
  if (!(inv2 > 0))
    fail("ParameterOutOfRange", "1/p1 - alpha must stay positive; shrink alpha or p1");
  if (q1 > 1.0 / inv2 + 1e-12)
    fail("ParameterOutOfRange", "need q1 <= p2");
  FracNormRow row;
  row.alpha = alpha;
  row.p1 = p1;
  row.q1 = q1;
  row.p2 = 1.0 / inv2;
  row.q2 = q2;
  Martingale<T> g = fractional_integral(f, alpha);
  row.norm_src = h_norm(f, HardyKind::CondQuadVariation, LorentzIndex{p1, q1});
  row.norm_dst = h_norm(g, HardyKind::CondQuadVariation, LorentzIndex{row.p2, row.q2});
  row.ratio = row.norm_src > 0 ? row.norm_dst / row.norm_src : 0;
  return row;
}

}  // namespace mhl
