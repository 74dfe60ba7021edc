#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mhl/atomic.hpp"
#include "mhl/generate.hpp"

using namespace mhl;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

template <class T>
Martingale<T> random_inst(std::uint64_t seed, int depth = 3) {
  InstanceSpec spec;
  spec.kind = TreeShape::Random;
  spec.depth = depth;
  spec.branch_hi = 2;
  spec.ratio = "1/4";
  spec.seed = seed;
  return generate<T>(spec).second;
}

}  // namespace

TEST_CASE_TEMPLATE("one step, conditional-variation atoms", T, double, Rat) {
  Martingale<T> f = fix::sign_martingale<T>();
  AtomicDecomposition<T> dec = decompose_cond_quad(f, 1.0);
  CHECK(dec.category == AtomCategory::CondQuad);
  CHECK(dec.k_min == -1);
  CHECK(dec.k_max == -1);
  REQUIRE(dec.terms.size() == 1);
  const auto& term = dec.terms[0];
  CHECK(term.k == -1);
  CHECK(term.nu.nodes == std::vector<int>{0});
  CHECK(term.mu == T(3) / T(2));
  REQUIRE(term.terminal.size() == 2);
  CHECK(term.terminal[0] == T(2) / T(3));
  CHECK(term.terminal[1] == T(-2) / T(3));

  CHECK(validate_atom(f.tree, term.nu, term.terminal, dec.category, dec.p).ok);
  CHECK(validate_decomposition(f.tree, dec, f).ok);

  std::vector<T> sum = reconstruct_terminal(dec, 2);
  CHECK(sum[0] == T(1));
  CHECK(sum[1] == T(-1));

  CHECK(coefficient_norm(dec, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(coefficient_norm(dec, kInf) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(coefficient_ratio(dec, f, 1.0) == doctest::Approx(1.5).epsilon(1e-13));

  std::vector<double> tails = partial_sum_tail_norms(dec, f, 1.0);
  REQUIRE(tails.size() == 2);
  CHECK(tails[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(tails[1] == doctest::Approx(0.0));
}

TEST_CASE_TEMPLATE("one step, envelope atoms", T, double, Rat) {
  Martingale<T> f = fix::sign_martingale<T>();
  for (EnvelopeTarget target : {EnvelopeTarget::Q, EnvelopeTarget::D}) {
    AtomicDecomposition<T> dec = decompose_envelope(f, target, 1.0);
    CHECK(dec.category ==
          (target == EnvelopeTarget::Q ? AtomCategory::Quad : AtomCategory::Maximal));
    REQUIRE(dec.terms.size() == 1);
    CHECK(dec.terms[0].k == -1);
    CHECK(dec.terms[0].nu.nodes == std::vector<int>{0});
    CHECK(dec.terms[0].mu == T(3) / T(2));
    CHECK(dec.terms[0].terminal[0] == T(2) / T(3));
    CHECK(validate_decomposition(f.tree, dec, f).ok);
  }
}

TEST_CASE_TEMPLATE("zero martingale decomposes to nothing", T, double, Rat) {
  auto t = fix::uniform_tree<T>(2, 2);
  auto f = fix::mart<T>(t, std::vector<T>(4, T(0)));
  AtomicDecomposition<T> dec = decompose_cond_quad(f, 0.5);
  CHECK(dec.terms.empty());
  CHECK(dec.k_max < dec.k_min);
  CHECK(validate_decomposition(t, dec, f).ok);
  CHECK(coefficient_ratio(dec, f, 2.0) == 0);
  for (const T& v : reconstruct_terminal(dec, 4)) CHECK(v == T(0));
}

TEST_CASE_TEMPLATE("random instances decompose validly", T, double, Rat) {
  double tol = NumTraits<T>::exact ? 0.0 : 1e-10;
  for (std::uint64_t seed : {50, 51, 52, 53, 54, 55}) {
    Martingale<T> f = random_inst<T>(seed);
    const FiltrationTree<T>& t = *f.tree;
    for (double p : {1.0, 0.5}) {
      std::vector<AtomicDecomposition<T>> decs;
      decs.push_back(decompose_cond_quad(f, p));
      decs.push_back(decompose_envelope(f, EnvelopeTarget::Q, p));
      decs.push_back(decompose_envelope(f, EnvelopeTarget::D, p));
      for (const auto& dec : decs) {
        AtomReport rep = validate_decomposition(f.tree, dec, f, tol);
        INFO(rep.which << " " << rep.detail);
        CHECK(rep.ok);

        // terms carry consecutive k and nested stopping times
        std::vector<T> target = terminal_slice(f);
        std::vector<T> sum = reconstruct_terminal(dec, t.leaf_count());
        for (int i = 0; i < t.leaf_count(); ++i) CHECK(approx_eq(sum[i], target[i], tol));
        for (size_t i = 0; i < dec.terms.size(); ++i)
          CHECK(dec.terms[i].k == dec.k_min + static_cast<int>(i));
        for (size_t i = 0; i + 1 < dec.terms.size(); ++i) {
          std::vector<int> cur = stop_node_by_leaf(t, dec.terms[i].nu);
          std::vector<int> nxt = stop_node_by_leaf(t, dec.terms[i + 1].nu);
          for (int pos = 0; pos < t.leaf_count(); ++pos) {
            if (nxt[pos] != -1) {
              REQUIRE(cur[pos] != -1);
              CHECK(t.is_ancestor_or_self(cur[pos], nxt[pos]));
            }
          }
        }

        // the bottom truncation vanishes: the window loses nothing below
        if (!dec.terms.empty())
          for (const T& v : stopped_terminal(f, dec.terms.front().nu))
            CHECK(std::fabs(to_double(v)) <= 1e-9);

        // residual norms shrink from ||f|| to 0 as terms enter, top first
        std::vector<double> tails = partial_sum_tail_norms(dec, f, 1.0);
        REQUIRE(tails.size() == dec.terms.size() + 1);
        CHECK(tails.front() ==
              doctest::Approx(h_norm(f, HardyKind::CondQuadVariation, LorentzIndex{dec.p, 1})));
        CHECK(tails.back() <= 1e-9);
        for (size_t j = 0; j + 1 < tails.size(); ++j)
          CHECK(tails[j + 1] <= tails[j] * (1 + 1e-10) + 1e-12);
      }
    }
  }
}

TEST_CASE_TEMPLATE("coefficient ratio is invariant under scaling", T, double, Rat) {
  for (std::uint64_t seed : {60, 61, 62}) {
    Martingale<T> f = random_inst<T>(seed, 2);
    AtomicDecomposition<T> dec = decompose_cond_quad(f, 1.0);
    if (dec.terms.empty()) continue;
    double base = coefficient_ratio(dec, f, 2.0);
    CHECK(base > 0);

    AtomicDecomposition<T> scaled = scale_decomposition(dec, T(-2));
    Martingale<T> f2 = f;
    for (T& v : f2.v) v = T(v * T(-2));
    CHECK(validate_decomposition(f.tree, scaled, f2,
                                 NumTraits<T>::exact ? 0.0 : 1e-10)
              .ok);
    CHECK(coefficient_ratio(scaled, f2, 2.0) == doctest::Approx(base).epsilon(1e-12));
  }
  CHECK(code_of([] {
          auto f = fix::sign_martingale<double>();
          scale_decomposition(decompose_cond_quad(f, 1.0), 0.0);
        }) == "ParameterOutOfRange");
}

TEST_CASE_TEMPLATE("atom validation rejects ill-formed atoms", T, double, Rat) {
  auto t = fix::two_leaf<T>();
  // nonzero mean where nu has not stopped
  AtomReport r1 = validate_atom(t, StoppingTime{{1, 2}}, {T(1), T(1)}, AtomCategory::CondQuad, 1.0);
  CHECK(!r1.ok);
  CHECK(r1.which == "support");

  // correct support, broken normalization: s(a) = 2 > P^{-1} = 1
  AtomReport r2 = validate_atom(t, StoppingTime{{0}}, {T(2), T(-2)}, AtomCategory::CondQuad, 1.0);
  CHECK(!r2.ok);
  CHECK(r2.which == "normalization");

  // the zero atom passes with any stopping time, including never
  CHECK(validate_atom(t, StoppingTime{}, {T(0), T(0)}, AtomCategory::Maximal, 1.0).ok);
  CHECK(validate_atom(t, StoppingTime{{0}}, {T(0), T(0)}, AtomCategory::Quad, 0.5).ok);
}

TEST_CASE_TEMPLATE("orthogonality chain", T, double, Rat) {
  Martingale<T> f = fix::sign_martingale<T>();
  AtomicDecomposition<T> dec = decompose_cond_quad(f, 1.0);

  // g = f: the pairing is E(a f) = 2/3, and Cauchy-Schwarz is tight
  std::vector<OrthogonalityRow> rows = orthogonality_check(dec, f);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].k == -1);
  CHECK(rows[0].pairing == doctest::Approx(2.0 / 3).epsilon(1e-13));
  CHECK(rows[0].pairing_stopped == doctest::Approx(2.0 / 3).epsilon(1e-13));
  CHECK(rows[0].identity_ok);
  CHECK(rows[0].cs_bound == doctest::Approx(2.0 / 3).epsilon(1e-13));
  CHECK(rows[0].norm_bound == doctest::Approx(1.0).epsilon(1e-13));

  // g = 0: every row degenerates to zeros, nothing throws
  auto z = fix::mart<T>(fix::two_leaf<T>(), {T(0), T(0)});
  rows = orthogonality_check(dec, z);
  CHECK(rows[0].pairing == 0);
  CHECK(rows[0].cs_bound == 0);

  // random pairs stay inside the chain
  double tol = NumTraits<T>::exact ? 0.0 : 1e-10;
  for (std::uint64_t seed : {70, 71, 72}) {
    Martingale<T> h = random_inst<T>(seed, 2);
    AtomicDecomposition<T> hd = decompose_cond_quad(h, 1.0);
    std::vector<T> gt = terminal_slice(h);
    std::reverse(gt.begin(), gt.end());
    center_terminal(*h.tree, gt);  // reversal shifts the mean off zero
    Martingale<T> g = fix::mart<T>(h.tree, gt);
    for (const auto& row : orthogonality_check(hd, g, tol)) {
      CHECK(row.identity_ok);
      CHECK(std::fabs(row.pairing_stopped) <= row.cs_bound * (1 + 1e-10) + 1e-12);
      CHECK(row.cs_bound <= row.norm_bound * (1 + 1e-10) + 1e-12);
    }
  }

  // an atom scaled past its normalization breaks the last link
  AtomicDecomposition<T> bad = dec;
  for (T& v : bad.terms[0].terminal) v = T(v * T(10));
  CHECK(code_of([&] { orthogonality_check(bad, f); }) == "ChainViolated");
  CHECK(message_of([&] { orthogonality_check(bad, f); }).find("normalization") !=
        std::string::npos);

  // a term that fails to vanish before its stopping time breaks the identity
  auto t2 = fix::uniform_tree<T>(2, 2);
  auto g2 = fix::mart<T>(t2, {T(2), T(0), T(0), T(-2)});
  AtomicDecomposition<T> manual;
  manual.category = AtomCategory::CondQuad;
  manual.p = 1;
  manual.A = T(3);
  manual.k_min = 0;
  manual.k_max = 0;
  DecompositionTerm<T> term;
  term.k = 0;
  term.mu = T(1);
  term.nu = StoppingTime{{1}};
  term.terminal = {T(1), T(0), T(0), T(-1)};
  manual.terms.push_back(term);
  CHECK(code_of([&] { orthogonality_check(manual, g2); }) == "ChainViolated");
  CHECK(message_of([&] { orthogonality_check(manual, g2); }).find("identity") !=
        std::string::npos);
}

TEST_CASE("dual witness") {
  auto g = fix::sign_martingale<double>();
  StoppingSequence seq{0, {StoppingTime{{0}}}};

  for (double r : {2.0, 1.0}) {
    DualWitness<double> w = dual_witness(g, seq, 2.0, 2.0, r);
    // h = g for the sign martingale, so the witness is g itself
    CHECK(w.f.v[0] == doctest::Approx(0.0));
    CHECK(w.f.v[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.f.v[2] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(w.ratio == doctest::Approx(1.0).epsilon(1e-12));
  }

  // scale invariance in g: the witness only sees directions
  auto t = fix::uniform_tree<double>(2, 2);
  auto g2 = fix::mart<double>(t, {2, 0, 0, -2});
  StoppingSequence seq2{0, {StoppingTime{{0}}, StoppingTime{{1, 4}}}};
  DualWitness<double> w1 = dual_witness(g2, seq2, 2.0, 2.0, 2.0);
  auto g3 = g2;
  for (double& v : g3.v) v *= 5;
  DualWitness<double> w5 = dual_witness(g3, seq2, 2.0, 2.0, 2.0);
  for (size_t i = 0; i < w1.f.v.size(); ++i)
    CHECK(w1.f.v[i] == doctest::Approx(w5.f.v[i]).epsilon(1e-12));
  CHECK(w1.ratio == doctest::Approx(w5.ratio).epsilon(1e-12));
  CHECK(w1.ratio > 0);

  auto z = fix::mart<double>(fix::two_leaf<double>(), {0, 0});
  CHECK(code_of([&] { dual_witness(z, seq, 2.0, 2.0, 2.0); }) == "DegenerateSequence");
  StoppingSequence never{0, {StoppingTime{}, StoppingTime{}}};
  CHECK(code_of([&] { dual_witness(g, never, 2.0, 2.0, 2.0); }) == "DegenerateSequence");
  CHECK(code_of([&] { dual_witness(g, seq, 2.0, 2.0, 0.5); }) == "ParameterOutOfRange");
  CHECK(code_of([&] { dual_witness(g, seq, 0.0, 2.0, 2.0); }) == "InvalidExponent");
  CHECK(code_of([&] { dual_witness(g, seq, 2.0, 0.0, 2.0); }) == "InvalidExponent");
}

TEST_CASE("coefficient norm guards") {
  auto f = fix::sign_martingale<double>();
  AtomicDecomposition<double> dec = decompose_cond_quad(f, 1.0);
  CHECK(code_of([&] { coefficient_norm(dec, 0.0); }) == "InvalidExponent");
  CHECK(code_of([&] { decompose_cond_quad(f, 0.0); }) == "InvalidExponent");
  CHECK(code_of([&] { decompose_envelope(f, EnvelopeTarget::Q, -1.0); }) == "InvalidExponent");

  // coefficients without a source norm
  auto z = fix::mart<double>(fix::two_leaf<double>(), {0, 0});
  AtomicDecomposition<double> fake;
  fake.p = 1;
  DecompositionTerm<double> term;
  term.mu = 1;
  term.terminal = {0, 0};
  fake.terms.push_back(term);
  CHECK(code_of([&] { coefficient_ratio(fake, z, 1.0); }) == "DivisionByZero");
}
