#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mhl/bmo.hpp"
#include "mhl/hardy.hpp"
#include "mhl/lorentz.hpp"
#include "mhl/process.hpp"

namespace mhl {

// Categories of simple atoms: which pathwise functional the normalization
// bound P(nu<inf)^{-1/p} applies to.
//   1: conditional quadratic variation s(a)
//   2: quadratic variation S(a)
//   3: maximal function a*
enum class AtomCategory { CondQuad = 1, Quad = 2, Maximal = 3 };

inline const char* to_string(AtomCategory c) {
  switch (c) {
    case AtomCategory::CondQuad: return "s";
    case AtomCategory::Quad: return "Q";
    case AtomCategory::Maximal: return "D";
  }
  return "?";
}

template <class T>
struct DecompositionTerm {
  int k = 0;
  T mu{};                   // A 2^k P(nu_k<inf)^{1/p}
  StoppingTime nu;          // where the k-th truncation stops
  std::vector<T> terminal;  // atom as a martingale terminal, leaf order
};

template <class T>
struct AtomicDecomposition {
  AtomCategory category = AtomCategory::CondQuad;
  double p = 1;
  T A{};  // scale constant in mu_k; 3 by construction
  int k_min = 0, k_max = -1;  // empty window allowed (zero martingale)
  std::vector<DecompositionTerm<T>> terms;
};

namespace detail {

// Window [k_lo, k_hi-1] such that the threshold 2^{k_lo} sits strictly below
// every positive statistic value (the k_lo-truncation vanishes) and 2^{k_hi}
// at or above the maximum (the k_hi-truncation is f itself). Statistics
// arrive squared or plain; thresholds are compared exactly.
template <class T>
std::pair<int, int> threshold_window(const std::vector<T>& stat, bool squared) {
  bool has = false;
  T lo(0), hi(0);
  for (const T& v : stat) {
    if (v > 0) {
      if (!has) {
        lo = v;
        hi = v;
        has = true;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!has) return {0, -1};
  int mul = squared ? 2 : 1;
  // largest k_lo with 2^{k_lo} strictly below every positive value
  int k_lo = 0;
  while (pow2<T>(mul * k_lo) >= lo) --k_lo;
  while (pow2<T>(mul * (k_lo + 1)) < lo) ++k_lo;
  // smallest k_hi with 2^{k_hi} at or above the maximum
  int k_hi = 0;
  while (pow2<T>(mul * k_hi) < hi) ++k_hi;
  while (k_hi > k_lo + 1 && pow2<T>(mul * (k_hi - 1)) >= hi) --k_hi;
  return {k_lo, k_hi - 1};
}

}  // namespace detail

// Decomposition driven by a predictable crossing statistic (squared or
// plain): nu_k = first level where stat_{n+1} > 2^k, a^k the normalized
// difference of consecutive truncations.
template <class T>
AtomicDecomposition<T> decompose_with_statistic(const Martingale<T>& f,
                                                const AdaptedSequence<T>& stat, bool squared,
                                                AtomCategory category, double p, const T& A) {
  if (!(p > 0) || !std::isfinite(p)) fail("InvalidExponent", "p must lie in (0, inf)");
  AtomicDecomposition<T> dec;
  dec.category = category;
  dec.p = p;
  dec.A = A;
  auto [k_lo, k_hi] = detail::threshold_window(stat.v, squared);
  dec.k_min = k_lo;
  dec.k_max = k_hi;
  if (k_hi < k_lo) return dec;  // zero martingale: empty decomposition

  const FiltrationTree<T>& t = *f.tree;
  const int mul = squared ? 2 : 1;
  std::vector<T> prev = std::vector<T>(t.leaf_count(), T(0));  // (f^{nu_{k_lo}})_N = 0
  StoppingTime prev_nu = level_crossing_time(stat, pow2<T>(mul * k_lo));
  for (int k = k_lo; k <= k_hi; ++k) {
    StoppingTime next_nu =
        k == k_hi ? StoppingTime{} : level_crossing_time(stat, pow2<T>(mul * (k + 1)));
    std::vector<T> next =
        k == k_hi ? terminal_slice(f) : stopped_terminal(f, next_nu);
    DecompositionTerm<T> term;
    term.k = k;
    term.nu = prev_nu;
    T pk = prob_finite(t, prev_nu);
    term.mu = T(A * pow2<T>(k) * real_pow_checked<T>(pk, 1.0 / p, "decomposition coefficient"));
    term.terminal.assign(t.leaf_count(), T(0));
    if (term.mu != 0) {
      for (int i = 0; i < t.leaf_count(); ++i)
        term.terminal[i] = T(T(next[i] - prev[i]) / term.mu);
    }
    dec.terms.push_back(std::move(term));
    prev = std::move(next);
    prev_nu = std::move(next_nu);
  }
  return dec;
}

// Atoms normalized through the conditional quadratic variation: nu_k = first
// n with s_{n+1}(f) > 2^k (squared comparison, exact in rational mode).
template <class T>
AtomicDecomposition<T> decompose_cond_quad(const Martingale<T>& f, double p, const T& A = T(3)) {
  AdaptedSequence<T> stat = predictable_cond_variation_sq(f);
  return decompose_with_statistic(f, stat, /*squared=*/true, AtomCategory::CondQuad, p, A);
}

// Envelope-driven decompositions: nu_k = first n with lambda_n > 2^k for the
// minimal envelope of the target. Q gives quadratic-variation atoms,
// D maximal-function atoms.
template <class T>
AtomicDecomposition<T> decompose_envelope(const Martingale<T>& f, EnvelopeTarget target, double p,
                                          const T& A = T(3)) {
  Envelope<T> env = minimal_envelope(f, target);
  AtomCategory cat = target == EnvelopeTarget::Q ? AtomCategory::Quad : AtomCategory::Maximal;
  return decompose_with_statistic(f, env.values, env.squared, cat, p, A);
}

template <class T>
std::vector<T> reconstruct_terminal(const AtomicDecomposition<T>& dec, int leaf_count) {
  std::vector<T> acc(leaf_count, T(0));
  for (const auto& term : dec.terms)
    for (int i = 0; i < leaf_count; ++i) acc[i] += T(term.mu * term.terminal[i]);
  return acc;
}

struct AtomReport {
  bool ok = true;
  std::string which;
  std::string detail;
};

// Checks the two defining properties of an atom of the given category:
// vanishing before its stopping time (E_n a = 0 where nu >= n) and the
// normalization bound on the category's functional. Exact in rational mode
// when 1/p and 2/p are integers; float mode uses the tolerance.
//
// support_scale widens the float vanishing check when the atom was carved out
// of larger data: conditional means of a = g / mu can only cancel down to the
// rounding floor of g, so the caller passes max|g| / mu as the reference.
template <class T>
AtomReport validate_atom(TreePtr<T> tree, const StoppingTime& nu, const std::vector<T>& terminal,
                         AtomCategory category, double p,
                         double tol = NumTraits<T>::default_tol(), double support_scale = 0) {
  AtomReport rep;
  const FiltrationTree<T>& t = *tree;
  auto bad = [&](const std::string& which, const std::string& detail) {
    rep.ok = false;
    rep.which = which;
    rep.detail = detail;
    return rep;
  };
  std::vector<T> values = node_averages(t, terminal);
  // nodes with no stop node strictly above them lie inside {nu >= level}
  std::vector<char> below(t.node_count(), 0);
  for (int id : nu.nodes) {
    int end = t.next_skip(id);
    for (int d = id + 1; d < end; ++d) below[d] = 1;
  }
  // the cancellation in E_n(a) is relative to the atom's own magnitude, so
  // the float comparison is scaled by the largest terminal value
  double scale = 0;
  for (const T& v : terminal) scale = std::max(scale, std::fabs(to_double(v)));
  scale = std::max({1.0, scale, support_scale});
  for (int id = 0; id < t.node_count(); ++id) {
    if (below[id]) continue;
    bool zero = tol <= 0 ? values[id] == T(0)
                         : std::fabs(to_double(values[id])) <= tol * scale;
    if (!zero)
      return bad("support", "E_n(a) != 0 at node " + std::to_string(id) +
                                " although nu >= " + std::to_string(t.node(id).level));
  }

  T pk = prob_finite(t, nu);
  if (pk == 0) return rep;  // empty stopping time forces a = 0, checked above

  Martingale<T> a{tree, values};
  if (NumTraits<T>::exact) {
    // squared comparison: stat^2 * P^{2/p} <= 1
    T bound = real_pow_checked<T>(pk, 2.0 / p, "atom bound");
    T worst(0);
    if (category == AtomCategory::Maximal) {
      AdaptedSequence<T> m = maximal_process(a);
      for (const T& v : m.v) worst = std::max(worst, T(v * v));
    } else {
      AdaptedSequence<T> s = category == AtomCategory::Quad ? quad_variation_sq(a)
                                                            : cond_quad_variation_sq(a);
      for (const T& v : s.v) worst = std::max(worst, v);
    }
    if (T(worst * bound) > 1)
      return bad("normalization", std::string("||") +
                                      (category == AtomCategory::Maximal ? "a*" :
                                       category == AtomCategory::Quad ? "S(a)" : "s(a)") +
                                      "||_inf exceeds P^{-1/p}");
  } else {
    double bound = std::pow(to_double(pk), -1.0 / p);
    double worst = 0;
    if (category == AtomCategory::Maximal) {
      AdaptedSequence<T> m = maximal_process(a);
      for (const T& v : m.v) worst = std::max(worst, to_double(v));
    } else {
      AdaptedSequence<T> s = category == AtomCategory::Quad ? quad_variation_sq(a)
                                                            : cond_quad_variation_sq(a);
      for (const T& v : s.v) worst = std::max(worst, std::sqrt(to_double(v)));
    }
    if (worst > bound * (1 + tol) + tol)
      return bad("normalization", "functional sup " + std::to_string(worst) +
                                      " exceeds P^{-1/p} = " + std::to_string(bound));
  }
  return rep;
}

template <class T>
AtomReport validate_decomposition(TreePtr<T> tree, const AtomicDecomposition<T>& dec,
                                  const Martingale<T>& f,
                                  double tol = NumTraits<T>::default_tol()) {
  AtomReport rep;
  const FiltrationTree<T>& t = *tree;
  std::vector<T> target = terminal_slice(f);
  double fscale = 0;
  for (const T& v : target) fscale = std::max(fscale, std::fabs(to_double(v)));
  // mu_k pinned to its closed form
  for (const auto& term : dec.terms) {
    T expect = T(dec.A * pow2<T>(term.k) *
                 real_pow_checked<T>(prob_finite(t, term.nu), 1.0 / dec.p, "coefficient"));
    if (!approx_eq(term.mu, expect, tol)) {
      rep.ok = false;
      rep.which = "coefficient";
      rep.detail = "mu_" + std::to_string(term.k) + " != A 2^k P^{1/p}";
      return rep;
    }
    // each atom is a slice of f divided by mu_k, so its conditional means
    // cancel only down to f's rounding floor at that magnification
    double md = std::fabs(to_double(term.mu));
    AtomReport ar = validate_atom(tree, term.nu, term.terminal, dec.category, dec.p, tol,
                                  md > 0 ? fscale / md : 0);
    if (!ar.ok) {
      ar.detail = "term k=" + std::to_string(term.k) + ": " + ar.detail;
      return ar;
    }
  }
  std::vector<T> sum = reconstruct_terminal(dec, t.leaf_count());
  for (int i = 0; i < t.leaf_count(); ++i) {
    if (!approx_eq(sum[i], target[i], tol)) {
      rep.ok = false;
      rep.which = "reconstruction";
      rep.detail = "leaf " + std::to_string(i) + " differs";
      return rep;
    }
  }
  return rep;
}

// l_q norm of the coefficient sequence.
template <class T>
double coefficient_norm(const AtomicDecomposition<T>& dec, double q) {
  if (!(q > 0)) fail("InvalidExponent", "q must lie in (0, inf]");
  if (std::isinf(q)) {
    double best = 0;
    for (const auto& term : dec.terms) best = std::max(best, std::fabs(to_double(term.mu)));
    return best;
  }
  double acc = 0;
  for (const auto& term : dec.terms) acc += std::pow(std::fabs(to_double(term.mu)), q);
  return std::pow(acc, 1.0 / q);
}

// ||(mu_k)||_{l_q} / (norm of f matching the decomposition's category).
template <class T>
double coefficient_ratio(const AtomicDecomposition<T>& dec, const Martingale<T>& f, double q) {
  LorentzIndex idx{dec.p, q};
  double denom = 0;
  switch (dec.category) {
    case AtomCategory::CondQuad: denom = h_norm(f, HardyKind::CondQuadVariation, idx); break;
    case AtomCategory::Quad: denom = qd_norm(f, EnvelopeTarget::Q, idx); break;
    case AtomCategory::Maximal: denom = qd_norm(f, EnvelopeTarget::D, idx); break;
  }
  double num = coefficient_norm(dec, q);
  if (denom == 0) {
    if (num == 0) return 0;
    fail("DivisionByZero", "coefficients present but the source norm vanishes");
  }
  return num / denom;
}

// A valid decomposition of c*f obtained by scaling coefficients (and A) in
// place; the atoms and stopping times are untouched, so the coefficient
// ratio is exactly invariant under this scaling.
template <class T>
AtomicDecomposition<T> scale_decomposition(const AtomicDecomposition<T>& dec, const T& c) {
  if (c == 0) fail("ParameterOutOfRange", "scale must be nonzero");
  AtomicDecomposition<T> out = dec;
  T mag = abs_val(c);
  int s = sgn(c);
  out.A = T(dec.A * mag);
  for (auto& term : out.terms) {
    term.mu = T(term.mu * mag);
    if (s < 0)
      for (T& v : term.terminal) v = T(-v);
  }
  return out;
}

// ||f - partial sum||_{H^s_{p,q}} over a nested family of windows expanding
// from the top threshold down: index j keeps terms k > k_max - j. Front
// entry is the empty window (= ||f||), last the full one (= 0).
template <class T>
std::vector<double> partial_sum_tail_norms(const AtomicDecomposition<T>& dec,
                                           const Martingale<T>& f, double q) {
  const FiltrationTree<T>& t = *f.tree;
  LorentzIndex idx{dec.p, q};
  std::vector<double> out;
  std::vector<T> partial(t.leaf_count(), T(0));
  std::vector<T> target = terminal_slice(f);
  // j = 0: nothing included
  for (int j = 0; j <= static_cast<int>(dec.terms.size()); ++j) {
    std::vector<T> residual(t.leaf_count());
    for (int i = 0; i < t.leaf_count(); ++i) residual[i] = T(target[i] - partial[i]);
    Martingale<T> rem = martingale_from_terminal(f.tree, residual, 1e-9);
    out.push_back(h_norm(rem, HardyKind::CondQuadVariation, idx));
    if (j < static_cast<int>(dec.terms.size())) {
      const auto& term = dec.terms[dec.terms.size() - 1 - j];
      for (int i = 0; i < t.leaf_count(); ++i) partial[i] += T(term.mu * term.terminal[i]);
    }
  }
  return out;
}

struct OrthogonalityRow {
  int k = 0;
  double pairing = 0;        // E(a^k g)
  double pairing_stopped = 0;  // E(a^k (g - g^{nu_k})), equal by optional stopping
  double cs_bound = 0;       // ||a^k||_2 ||g - g^{nu_k}||_2
  double norm_bound = 0;     // P^{1/2 - 1/p} ||g - g^{nu_k}||_2
  bool identity_ok = true;
};

// The pairing identity E(a^k g) = E(a^k (g - g^{nu_k})) (a^k vanishes where
// g^{nu_k} still moves) plus the two bounding links used by the duality
// argument: |E(a^k (g - g^{nu_k}))| <= ||a^k||_2 ||g - g^{nu_k}||_2
// <= P^{1/2-1/p} ||g - g^{nu_k}||_2. The identity is exact in rational mode;
// a broken link raises ChainViolated.
template <class T>
std::vector<OrthogonalityRow> orthogonality_check(const AtomicDecomposition<T>& dec,
                                                  const Martingale<T>& g,
                                                  double tol = NumTraits<T>::default_tol()) {
  const FiltrationTree<T>& t = *g.tree;
  std::vector<T> masses = t.leaf_masses();
  std::vector<T> gterm = terminal_slice(g);
  std::vector<OrthogonalityRow> rows;
  for (const auto& term : dec.terms) {
    OrthogonalityRow row;
    row.k = term.k;
    std::vector<T> gstop = stopped_terminal(g, term.nu);
    T pair(0), pair_stopped(0), a2(0), d2(0);
    for (int i = 0; i < t.leaf_count(); ++i) {
      T diff = T(gterm[i] - gstop[i]);
      pair += T(masses[i] * term.terminal[i] * gterm[i]);
      pair_stopped += T(masses[i] * term.terminal[i] * diff);
      a2 += T(masses[i] * term.terminal[i] * term.terminal[i]);
      d2 += T(masses[i] * diff * diff);
    }
    row.pairing = to_double(pair);
    row.pairing_stopped = to_double(pair_stopped);
    row.identity_ok = approx_eq(pair, pair_stopped, tol);
    double na = std::sqrt(to_double(a2));
    double nd = std::sqrt(to_double(d2));
    row.cs_bound = na * nd;
    T pk = prob_finite(t, term.nu);
    row.norm_bound = pk == 0 ? 0 : std::pow(to_double(pk), 0.5 - 1.0 / dec.p) * nd;
    double slack = 1e-12 * std::max(1.0, std::max(row.cs_bound, row.norm_bound));
    if (!row.identity_ok)
      fail("ChainViolated",
           "k=" + std::to_string(term.k) + " link=identity: E(a g) != E(a (g - g^nu))");
    if (std::fabs(row.pairing_stopped) > row.cs_bound + slack)
      fail("ChainViolated", "k=" + std::to_string(term.k) +
                                " link=cauchy-schwarz: |pairing| exceeds ||a||_2 ||g - g^nu||_2");
    if (row.cs_bound > row.norm_bound + slack)
      fail("ChainViolated", "k=" + std::to_string(term.k) +
                                " link=normalization: ||a||_2 exceeds P^{1/2-1/p}");
    rows.push_back(row);
  }
  return rows;
}

// Extremal-function construction for the duality lower bound. For each slot
// with P(nu_k < inf) > 0 and g != g^{nu_k}:
//   h_k = |g - g^{nu_k}|^{r-1} sign(g - g^{nu_k}) / ||g - g^{nu_k}||_r^{r-1}
//   f   = sum_k 2^k P(nu_k<inf)^{1/r'} (h_k - h_k^{nu_k}),  1/r' = 1 - 1/r.
// r = 1 degenerates to the sign function (0^0 = 1 here).
template <class T>
struct DualWitness {
  Martingale<T> f;
  double ratio = 0;  // ||f||_{H^s_{p,q}} / (sum_k (2^k P^{1/p})^q)^{1/q}
};

template <class T>
DualWitness<T> dual_witness(const Martingale<T>& g, const StoppingSequence& seq, double p,
                            double q, double r) {
  if (!(r >= 1)) fail("ParameterOutOfRange", "r must lie in [1, inf)");
  if (!(p > 0) || !(q > 0)) fail("InvalidExponent", "p and q must be positive");
  const FiltrationTree<T>& t = *g.tree;
  std::vector<T> masses = t.leaf_masses();
  std::vector<T> gterm = terminal_slice(g);
  double gscale = 0;
  for (int j = 0; j < t.leaf_count(); ++j)
    gscale = std::max(gscale, std::fabs(to_double(gterm[j])));
  std::vector<double> acc(t.leaf_count(), 0.0);
  double den_acc = 0;
  bool any = false;
  for (size_t i = 0; i < seq.nus.size(); ++i) {
    const StoppingTime& nu = seq.nus[i];
    double pk = to_double(prob_finite(t, nu));
    if (!(pk > 0)) continue;
    std::vector<T> gstop = stopped_terminal(g, nu);
    double nr = 0;  // ||g - g^nu||_r^r
    double dmax = 0;
    std::vector<double> diff(t.leaf_count());
    for (int j = 0; j < t.leaf_count(); ++j) {
      diff[j] = to_double(T(gterm[j] - gstop[j]));
      dmax = std::max(dmax, std::fabs(diff[j]));
      nr += to_double(masses[j]) * std::pow(std::fabs(diff[j]), r);
    }
    // a slot where g - g^nu is rounding dust rather than oscillation would
    // normalize noise into an O(1) block; treat it as vanishing
    if (!(nr > 0) || !(dmax > 1e-12 * gscale)) continue;
    any = true;
    double norm_r = std::pow(nr, 1.0 / r);
    int k = seq.k_min + static_cast<int>(i);
    double w = pow2<double>(k) * std::pow(pk, 1.0 - 1.0 / r);
    // h_k as a terminal leaf map, then h_k - h_k^{nu}; leaves at the slot's
    // own noise floor count as zero so the sign is stable
    std::vector<double> h(t.leaf_count());
    for (int j = 0; j < t.leaf_count(); ++j) {
      double m = std::fabs(diff[j]);
      double s = m <= 1e-12 * dmax ? 0 : (diff[j] > 0 ? 1 : -1);
      h[j] = r == 1 ? s : s * std::pow(m, r - 1) / std::pow(norm_r, r - 1);
    }
    // conditional expectations of h at the stop nodes
    std::vector<T> hT(t.leaf_count());
    for (int j = 0; j < t.leaf_count(); ++j) hT[j] = T(h[j]);
    std::vector<T> havg = node_averages(t, hT);
    std::vector<double> hstop(h);
    for (int id : nu.nodes) {
      auto [b, e] = t.leaf_range(id);
      for (int pos = b; pos < e; ++pos) hstop[pos] = to_double(havg[id]);
    }
    for (int j = 0; j < t.leaf_count(); ++j) acc[j] += w * (h[j] - hstop[j]);
    den_acc += std::pow(pow2<double>(k) * std::pow(pk, 1.0 / p), q);
  }
  if (!any) fail("DegenerateSequence", "no slot contributes: every g - g^{nu_k} vanishes");
  std::vector<T> terminal(t.leaf_count());
  for (int j = 0; j < t.leaf_count(); ++j) terminal[j] = T(acc[j]);
  DualWitness<T> out;
  // built from h - h^nu pieces, each mean zero; centering only sheds float dust
  center_terminal(t, terminal);
  out.f = martingale_from_terminal(g.tree, terminal, 1e-9);
  double den = std::pow(den_acc, 1.0 / q);
  double num = h_norm(out.f, HardyKind::CondQuadVariation, LorentzIndex{p, q});
  out.ratio = den > 0 ? num / den : 0;
  return out;
}

}  // namespace mhl
