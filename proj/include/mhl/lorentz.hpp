#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mhl/num.hpp"

namespace mhl {

// Lorentz index pair. q may be infinity.
struct LorentzIndex {
  double p = 1;
  double q = 1;

  bool q_inf() const { return std::isinf(q); }
};

inline void check_lorentz_index(const LorentzIndex& idx) {
  if (!(idx.p > 0) || !std::isfinite(idx.p))
    fail("InvalidIndex", "p must lie in (0, inf), got " + std::to_string(idx.p));
  if (!(idx.q > 0))
    fail("InvalidIndex", "q must lie in (0, inf], got " + std::to_string(idx.q));
}

// A simple function on a probability space: values with masses.
template <class T>
struct WeightedValues {
  std::vector<T> value;
  std::vector<T> mass;
};

// lambda_s = P(|x| > s), strict inequality.
template <class T>
T distribution_function(const WeightedValues<T>& x, const T& s) {
  if (s < 0) fail("NegativeThreshold", "distribution function takes thresholds s >= 0");
  T acc(0);
  for (size_t i = 0; i < x.value.size(); ++i)
    if (abs_val(x.value[i]) > s) acc += x.mass[i];
  return acc;
}

// Step form of the decreasing rearrangement: strictly decreasing positive
// values v[0] > v[1] > ... with cumulative masses Tcum[i] = P(|x| >= v[i]).
// Zero values are dropped (they never contribute to a norm). Ties merge
// exactly: equal inputs compare equal in either mode.
template <class T>
struct StepRearrangement {
  std::vector<T> v;
  std::vector<T> Tcum;

  bool empty() const { return v.empty(); }
  // mu_t = inf{ s : lambda_s <= t }
  T rearrangement_at(const T& t) const {
    for (size_t i = 0; i < v.size(); ++i)
      if (t < Tcum[i]) return v[i];
    return T(0);
  }
};

template <class T>
StepRearrangement<T> rearrangement(const WeightedValues<T>& x) {
  std::vector<std::pair<T, T>> items;  // (|value|, mass)
  items.reserve(x.value.size());
  for (size_t i = 0; i < x.value.size(); ++i) {
    T a = abs_val(x.value[i]);
    if (a > 0) items.emplace_back(std::move(a), x.mass[i]);
  }
  std::sort(items.begin(), items.end(),
            [](const auto& l, const auto& r) { return l.first > r.first; });
  StepRearrangement<T> out;
  T cum(0);
  for (auto& [val, mass] : items) {
    cum += mass;
    if (!out.v.empty() && out.v.back() == val)
      out.Tcum.back() = cum;
    else {
      out.v.push_back(val);
      out.Tcum.push_back(cum);
    }
  }
  return out;
}

// Lorentz quasi-norm of a step rearrangement.
//   q < inf : ( sum_i v_i^q (T_i^{q/p} - T_{i-1}^{q/p}) )^{1/q}
//   q = inf : max_i T_i^{1/p} v_i
// q == p skips the powers of T entirely, so ||x||_{p,p} and the plain L_p
// norm are the same arithmetic, not merely equal in the limit.
// values_are_squared: inputs hold squares (exact variation statistics); the
// square root is taken here, at the numeric boundary.
template <class T>
double lorentz_norm(const StepRearrangement<T>& r, const LorentzIndex& idx,
                    bool values_are_squared = false) {
  check_lorentz_index(idx);
  if (r.empty()) return 0;
  auto val = [&](size_t i) {
    double v = to_double(r.v[i]);
    return values_are_squared ? std::sqrt(v) : v;
  };
  if (idx.q_inf()) {
    double best = 0;
    for (size_t i = 0; i < r.v.size(); ++i)
      best = std::max(best, std::pow(to_double(r.Tcum[i]), 1.0 / idx.p) * val(i));
    return best;
  }
  double acc = 0;
  if (idx.q == idx.p) {
    double prev = 0;
    for (size_t i = 0; i < r.v.size(); ++i) {
      double cur = to_double(r.Tcum[i]);
      acc += std::pow(val(i), idx.q) * (cur - prev);
      prev = cur;
    }
  } else {
    double e = idx.q / idx.p;
    double prev = 0;
    for (size_t i = 0; i < r.v.size(); ++i) {
      double cur = std::pow(to_double(r.Tcum[i]), e);
      acc += std::pow(val(i), idx.q) * (cur - prev);
      prev = cur;
    }
  }
  return std::pow(acc, 1.0 / idx.q);
}

template <class T>
double lorentz_norm(const WeightedValues<T>& x, const LorentzIndex& idx,
                    bool values_are_squared = false) {
  return lorentz_norm(rearrangement(x), idx, values_are_squared);
}

// Equivalent form driven by the distribution function,
//   q < inf : ( sum_i T_i^{q/p} (v_i^q - v_{i+1}^q) )^{1/q},
// equal to lorentz_norm by summation by parts; kept as an independent
// arithmetic path for cross-checking.
template <class T>
double lorentz_norm_distribution_form(const StepRearrangement<T>& r, const LorentzIndex& idx,
                                      bool values_are_squared = false) {
  check_lorentz_index(idx);
  if (r.empty()) return 0;
  auto val = [&](size_t i) {
    double v = to_double(r.v[i]);
    return values_are_squared ? std::sqrt(v) : v;
  };
  if (idx.q_inf()) {
    double best = 0;
    for (size_t i = 0; i < r.v.size(); ++i)
      best = std::max(best, std::pow(to_double(r.Tcum[i]), 1.0 / idx.p) * val(i));
    return best;
  }
  double acc = 0;
  for (size_t i = 0; i < r.v.size(); ++i) {
    double next = i + 1 < r.v.size() ? std::pow(val(i + 1), idx.q) : 0.0;
    acc += std::pow(to_double(r.Tcum[i]), idx.q / idx.p) * (std::pow(val(i), idx.q) - next);
  }
  return std::pow(acc, 1.0 / idx.q);
}

// Plain L_p norm, routed through the same step accumulation as || ||_{p,p}.
template <class T>
double lp_norm(const WeightedValues<T>& x, double p) {
  return lorentz_norm(rearrangement(x), LorentzIndex{p, p});
}

// ||xy||_{p,q} / (||x||_{p1,q1} ||y||_{p2,q2}) with 1/p = 1/p1 + 1/p2 and
// 1/q = 1/q1 + 1/q2. Both factor norms vanishing forces the product norm to
// vanish; the ratio is 0 by convention then. A zero factor with a nonzero
// product cannot happen for simple functions.
template <class T>
double holder_ratio(const WeightedValues<T>& x, const WeightedValues<T>& y, double p1, double q1,
                    double p2, double q2) {
  LorentzIndex i1{p1, q1}, i2{p2, q2};
  check_lorentz_index(i1);
  check_lorentz_index(i2);
  if (x.value.size() != y.value.size())
    fail("MissingLeafValue", "holder_ratio needs x and y on the same space");
  double p = 1.0 / (1.0 / p1 + 1.0 / p2);
  double iq = (std::isinf(q1) ? 0.0 : 1.0 / q1) + (std::isinf(q2) ? 0.0 : 1.0 / q2);
  double q = iq == 0 ? std::numeric_limits<double>::infinity() : 1.0 / iq;
  WeightedValues<T> xy;
  xy.mass = x.mass;
  xy.value.reserve(x.value.size());
  for (size_t i = 0; i < x.value.size(); ++i) xy.value.push_back(T(x.value[i] * y.value[i]));
  double nx = lorentz_norm(x, i1);
  double ny = lorentz_norm(y, i2);
  double nxy = lorentz_norm(xy, LorentzIndex{p, q});
  if (nx == 0 || ny == 0) return 0;
  return nxy / (nx * ny);
}

// Spot checks of the rearrangement calculus on concrete data. Throws
// PropertyViolated naming the failed property and a witness point; returns a
// count of checks performed otherwise. Monotone-domination (3) is only
// exercised when |x| <= |y| actually holds pointwise.
struct RearrangementReport {
  bool ok = true;
  int checks = 0;
};

template <class T>
RearrangementReport check_rearrangement_properties(const WeightedValues<T>& x,
                                                   const WeightedValues<T>& y) {
  RearrangementReport rep;
  auto bad = [&](const std::string& which, const std::string& wit) -> RearrangementReport {
    fail("PropertyViolated", which + ": " + wit);
  };
  // The inequality checks compare independently accumulated sums, so the
  // float mode gets a hair of slack; the rational mode stays exact.
  auto leq = [](const T& a, const T& b) {
    if (NumTraits<T>::exact) return !(a > b);
    double ad = to_double(a), bd = to_double(b);
    return ad <= bd + 1e-9 * std::max({1.0, std::fabs(ad), std::fabs(bd)});
  };
  StepRearrangement<T> rx = rearrangement(x), ry = rearrangement(y);

  // probe grid: step corners and midpoints
  std::vector<T> grid;
  grid.push_back(T(0));
  for (size_t i = 0; i < rx.Tcum.size(); ++i) {
    grid.push_back(rx.Tcum[i]);
    if (i + 1 < rx.Tcum.size()) grid.push_back(T((rx.Tcum[i] + rx.Tcum[i + 1]) / 2));
  }

  // (1) nonincreasing, right-continuous: on a step function right-continuity
  // means mu at T_i already equals the next value.
  for (size_t i = 0; i + 1 < grid.size(); ++i)
    for (size_t j = i + 1; j < grid.size(); ++j)
      if (grid[i] <= grid[j] && rx.rearrangement_at(grid[i]) < rx.rearrangement_at(grid[j]))
        return bad("monotone", "t1=" + scalar_to_string(grid[i]) + " t2=" + scalar_to_string(grid[j]));
  for (size_t i = 0; i < rx.Tcum.size(); ++i) {
    T expect = i + 1 < rx.v.size() ? rx.v[i + 1] : T(0);
    if (!(rx.rearrangement_at(rx.Tcum[i]) == expect))
      return bad("right-continuity", "t=" + scalar_to_string(rx.Tcum[i]));
  }

  ++rep.checks;

  // (2) lambda_{mu_t}(x) <= t
  for (const T& t : grid) {
    T mu = rx.rearrangement_at(t);
    if (!leq(distribution_function(x, mu), t)) return bad("distribution-bound", "t=" + scalar_to_string(t));
  }
  ++rep.checks;

  // threshold grid for the distribution-function checks
  std::vector<T> sgrid;
  sgrid.push_back(T(0));
  for (const auto& r : {rx, ry})
    for (const T& v : r.v) {
      sgrid.push_back(v);
      sgrid.push_back(T(v / 2));
    }

  // (3) |x| <= |y| pointwise implies lambda_s(x) <= lambda_s(y) and
  //     mu_t(x) <= mu_t(y)
  if (x.value.size() == y.value.size()) {
    bool dominated = true;
    for (size_t i = 0; i < x.value.size(); ++i)
      if (abs_val(x.value[i]) > abs_val(y.value[i])) {
        dominated = false;
        break;
      }
    if (dominated) {
      for (const T& s : sgrid)
        if (!leq(distribution_function(x, s), distribution_function(y, s)))
          return bad("distribution-domination", "s=" + scalar_to_string(s));
      for (const T& t : grid)
        if (!leq(rx.rearrangement_at(t), ry.rearrangement_at(t)))
          return bad("domination", "t=" + scalar_to_string(t));
      ++rep.checks;
    }
  }

  // (3') lambda_{s1+s2}(x+y) <= lambda_{s1}(x) + lambda_{s2}(y)
  if (x.value.size() == y.value.size()) {
    WeightedValues<T> sum;
    sum.mass = x.mass;
    for (size_t i = 0; i < x.value.size(); ++i) sum.value.push_back(T(x.value[i] + y.value[i]));
    for (const T& s1 : sgrid)
      for (const T& s2 : sgrid) {
        T lhs = distribution_function(sum, T(s1 + s2));
        T rhs = T(distribution_function(x, s1) + distribution_function(y, s2));
        if (!leq(lhs, rhs))
          return bad("distribution-subadditivity",
                     "s1=" + scalar_to_string(s1) + " s2=" + scalar_to_string(s2));
      }
    ++rep.checks;
  }

  // (4) mu_t(cx) = |c| mu_t(x)
  for (int c : {-2, 3}) {
    WeightedValues<T> cx;
    cx.mass = x.mass;
    for (const T& v : x.value) cx.value.push_back(T(v * c));
    StepRearrangement<T> rc = rearrangement(cx);
    for (const T& t : grid) {
      T lhs = rc.rearrangement_at(t);
      T rhs = T(rx.rearrangement_at(t) * abs_val(T(c)));
      if (!(lhs == rhs))
        return bad("scaling", "c=" + std::to_string(c) + " t=" + scalar_to_string(t));
    }
  }
  ++rep.checks;

  // (5) mu_{t1+t2}(x+y) <= mu_{t1}(x) + mu_{t2}(y)
  if (x.value.size() == y.value.size()) {
    WeightedValues<T> sum;
    sum.mass = x.mass;
    for (size_t i = 0; i < x.value.size(); ++i) sum.value.push_back(T(x.value[i] + y.value[i]));
    StepRearrangement<T> rs = rearrangement(sum);
    for (const T& t1 : grid)
      for (const T& t2 : grid) {
        T lhs = rs.rearrangement_at(T(t1 + t2));
        T rhs = T(rx.rearrangement_at(t1) + ry.rearrangement_at(t2));
        if (!leq(lhs, rhs))
          return bad("subadditivity",
                     "t1=" + scalar_to_string(t1) + " t2=" + scalar_to_string(t2));
      }
    ++rep.checks;
  }
  return rep;
}

}  // namespace mhl
