#pragma once

#include <gmpxx.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace mhl {

// Exact scalar for the rational mode. Kept canonical at all times; every
// helper that builds one from raw parts canonicalizes before returning.
using Rat = mpq_class;

// All numeric failures carry a short stable code (what went wrong) plus a
// human message. The CLI prints code and message verbatim.
class Error : public std::runtime_error {
 public:
  Error(const char* code, const std::string& msg)
      : std::runtime_error(std::string(code) + ": " + msg), code_(code) {}
  const char* code() const noexcept { return code_; }

 private:
  const char* code_;
};

[[noreturn]] inline void fail(const char* code, const std::string& msg) {
  throw Error(code, msg);
}

inline double to_double(double x) { return x; }
inline double to_double(const Rat& x) { return x.get_d(); }

template <class T>
struct NumTraits;

template <>
struct NumTraits<double> {
  static constexpr bool exact = false;
  static constexpr const char* mode_name = "float";
  static double default_tol() { return 1e-12; }
};

template <>
struct NumTraits<Rat> {
  static constexpr bool exact = true;
  static constexpr const char* mode_name = "rational";
  static double default_tol() { return 0.0; }
};

template <class T>
T abs_val(const T& x) {
  using std::abs;
  return T(abs(x));
}

template <class T>
int sgn(const T& x) {
  if (x > 0) return 1;
  if (x < 0) return -1;
  return 0;
}

// 2^k. Exact in both modes: IEEE doubles represent powers of two directly.
template <class T>
T pow2(int k);

template <>
inline double pow2<double>(int k) {
  return std::ldexp(1.0, k);
}

template <>
inline Rat pow2<Rat>(int k) {
  mpz_class num = 1, den = 1;
  if (k >= 0)
    num <<= k;
  else
    den <<= -k;
  Rat r(num, den);
  r.canonicalize();
  return r;
}

template <class T>
T int_pow(const T& base, long e) {
  if (e < 0) {
    if (base == 0) fail("DivisionByZero", "0 raised to a negative power");
    return T(T(1) / int_pow<T>(base, -e));
  }
  T acc(1);
  T b = base;
  for (long n = e; n > 0; n >>= 1) {
    if (n & 1) acc *= b;
    b *= b;
  }
  return acc;
}

// Exponents like 1/p arrive as doubles; recognize the ones that are exactly
// integers so rational mode can keep powers exact.
inline std::optional<long> as_integer(double x) {
  if (!std::isfinite(x)) return std::nullopt;
  double r = std::nearbyint(x);
  if (r != x || std::fabs(r) > 1e15) return std::nullopt;
  return static_cast<long>(r);
}

// base^e with the mode's exactness contract: float mode uses pow, rational
// mode requires an integer exponent and raises InvalidExponent otherwise.
template <class T>
T real_pow_checked(const T& base, double e, const char* what);

template <>
inline double real_pow_checked<double>(const double& base, double e, const char*) {
  return std::pow(base, e);
}

template <>
inline Rat real_pow_checked<Rat>(const Rat& base, double e, const char* what) {
  auto n = as_integer(e);
  if (!n)
    fail("InvalidExponent",
         std::string(what) + ": exponent " + std::to_string(e) +
             " is not an integer; rational mode keeps powers exact and only "
             "supports integer exponents here (use float mode instead)");
  return int_pow(base, *n);
}

namespace detail {

inline bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

// Decimal literal (optional sign, optional fraction, optional exponent) to an
// exact rational.
inline Rat rat_from_decimal(const std::string& in) {
  std::string s = in;
  long shift = 0;
  auto epos = s.find_first_of("eE");
  if (epos != std::string::npos) {
    std::string expo = s.substr(epos + 1);
    s = s.substr(0, epos);
    try {
      shift = std::stol(expo);
    } catch (const std::exception&) {
      fail("InvalidSpec", "bad exponent in numeric literal: " + in);
    }
  }
  bool neg = false;
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
    neg = s[0] == '-';
    s = s.substr(1);
  }
  std::string digits = s;
  long frac = 0;
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    digits = s.substr(0, dot) + s.substr(dot + 1);
    frac = static_cast<long>(s.size() - dot - 1);
  }
  if (!all_digits(digits)) fail("InvalidSpec", "bad numeric literal: " + in);
  mpz_class num(digits, 10);
  if (neg) num = -num;
  long net = frac - shift;
  mpz_class den = 1;
  if (net > 0)
    mpz_ui_pow_ui(den.get_mpz_t(), 10, static_cast<unsigned long>(net));
  else if (net < 0) {
    mpz_class f;
    mpz_ui_pow_ui(f.get_mpz_t(), 10, static_cast<unsigned long>(-net));
    num *= f;
  }
  Rat r(num, den);
  r.canonicalize();
  return r;
}

}  // namespace detail

// Accepts "p/q", integers, and decimal literals (with exponent).
inline Rat rat_from_string(const std::string& s) {
  if (s.find('/') != std::string::npos) {
    try {
      Rat r(s);
      if (r.get_den() == 0) fail("InvalidSpec", "zero denominator: " + s);
      r.canonicalize();
      return r;
    } catch (const std::invalid_argument&) {
      fail("InvalidSpec", "bad rational literal: " + s);
    }
  }
  return detail::rat_from_decimal(s);
}

template <class T>
T parse_scalar(const std::string& s);

template <>
inline Rat parse_scalar<Rat>(const std::string& s) {
  return rat_from_string(s);
}

template <>
inline double parse_scalar<double>(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash != std::string::npos) {
      double num = std::stod(s.substr(0, slash));
      double den = std::stod(s.substr(slash + 1));
      if (den == 0) fail("InvalidSpec", "zero denominator: " + s);
      return num / den;
    }
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) fail("InvalidSpec", "trailing junk in numeric literal: " + s);
    return v;
  } catch (const std::invalid_argument&) {
    fail("InvalidSpec", "bad numeric literal: " + s);
  } catch (const std::out_of_range&) {
    fail("InvalidSpec", "numeric literal out of range: " + s);
  }
}

// Shortest round-trip form; reparsing yields the identical double.
inline std::string scalar_to_string(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Copy first: values built with an explicit numerator/denominator pair may
// not be in lowest terms yet, and the wire format is always canonical.
inline std::string scalar_to_string(const Rat& x) {
  Rat c(x);
  c.canonicalize();
  return c.get_str();
}

// Relative comparison; tol == 0 means exact equality (the rational mode
// default).
inline bool approx_eq(double a, double b, double tol) {
  if (tol <= 0) return a == b;
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

inline bool approx_eq(const Rat& a, const Rat& b, double tol) {
  if (tol <= 0) return a == b;
  Rat t(tol);
  Rat sa = abs_val(a), sb = abs_val(b);
  Rat scale = std::max(Rat(1), std::max(sa, sb));
  return abs_val(Rat(a - b)) <= t * scale;
}

}  // namespace mhl
