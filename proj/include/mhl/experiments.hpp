#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mhl/atomic.hpp"
#include "mhl/bmo.hpp"
#include "mhl/fracint.hpp"
#include "mhl/generate.hpp"
#include "mhl/hardy.hpp"
#include "mhl/io.hpp"
#include "mhl/version.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mhl {

// Shared knobs for the batch drivers. Each instance i uses seed base+i, so
// any row is reproducible in isolation from the summary's parameters.
struct ExperimentConfig {
  std::string name;
  int instances = 0;
  std::uint64_t seed = 1;
  TreeShape shape = TreeShape::Random;
  ValueLaw law = ValueLaw::Uniform;
  int depth = 3;
  int branch_lo = 1, branch_hi = 3;
  std::string ratio = "1/4";
  double p = 1, q = 1;
  double r = 2, alpha = 0;
  std::vector<double> r_list = {1, 1.5, 3, 4};
  std::string target = "all";  // atomic-validate: s | Q | D | all
  BmoSeqConfig search;         // jn driver
};

struct ExperimentReport {
  std::string name;
  Json config;  // full provenance: parameters, seed set, version
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool hard_ok = true;
  std::string failure;  // first hard-invariant failure
  double ratio_min = 0, ratio_median = 0, ratio_max = 0;
};

namespace detail {

inline std::string fmt(double v) { return scalar_to_string(v); }

inline InstanceSpec instance_spec(const ExperimentConfig& cfg, int i) {
  InstanceSpec spec;
  spec.kind = cfg.shape;
  spec.depth = cfg.depth;
  spec.branch_lo = cfg.branch_lo;
  spec.branch_hi = cfg.branch_hi;
  spec.ratio = cfg.ratio;
  spec.law = cfg.law;
  spec.seed = cfg.seed + static_cast<std::uint64_t>(i);
  return spec;
}

template <class T>
Martingale<T> scale_by(const Martingale<T>& f, const T& c) {
  std::vector<T> term = terminal_slice(f);
  for (T& v : term) v = T(v * c);
  return martingale_from_terminal(f.tree, term, NumTraits<T>::exact ? 0.0 : 1e-9);
}

template <class T>
bool is_zero(const Martingale<T>& f) {
  for (const T& v : f.v)
    if (!(v == 0)) return false;
  return true;
}

inline void finish_ratio_summary(ExperimentReport& rep) {
  auto it = std::find(rep.header.begin(), rep.header.end(), "ratio");
  if (it == rep.header.end()) return;
  size_t col = static_cast<size_t>(it - rep.header.begin());
  std::vector<double> vals;
  for (const auto& row : rep.rows)
    if (col < row.size()) vals.push_back(std::stod(row[col]));
  if (vals.empty()) return;
  std::sort(vals.begin(), vals.end());
  rep.ratio_min = vals.front();
  rep.ratio_max = vals.back();
  rep.ratio_median = vals[vals.size() / 2];
}

inline void hard_fail(ExperimentReport& rep, const std::string& why) {
  if (rep.hard_ok) {
    rep.hard_ok = false;
    rep.failure = why;
  }
}

// run body(i, rows_i) for each instance; rows come back in instance order no
// matter how the loop is scheduled
template <class Body>
void per_instance(int n, ExperimentReport& rep, Body&& body) {
  std::vector<std::vector<std::vector<std::string>>> buckets(n);
  std::vector<std::string> errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      body(i, buckets[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) hard_fail(rep, "instance " + std::to_string(i) + ": " + errors[i]);
    for (auto& row : buckets[i]) rep.rows.push_back(std::move(row));
  }
}

}  // namespace detail

inline Json experiment_config_json(const ExperimentConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["instances"] = cfg.instances;
  j["seed"] = cfg.seed;
  j["shape"] = to_string(cfg.shape);
  j["law"] = to_string(cfg.law);
  j["depth"] = cfg.depth;
  j["branch_lo"] = cfg.branch_lo;
  j["branch_hi"] = cfg.branch_hi;
  j["ratio"] = cfg.ratio;
  j["p"] = cfg.p;
  j["q"] = cfg.q;
  j["r"] = cfg.r;
  j["alpha"] = cfg.alpha;
  Json rl = Json::array();
  for (double r : cfg.r_list) rl.push_back(r);
  j["r_list"] = std::move(rl);
  j["target"] = cfg.target;
  j["search_seed"] = cfg.search.seed;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig cfg;
  if (auto it = j.find("name"); it != j.end()) cfg.name = it->get<std::string>();
  if (auto it = j.find("instances"); it != j.end()) cfg.instances = it->get<int>();
  if (auto it = j.find("seed"); it != j.end()) cfg.seed = it->get<std::uint64_t>();
  if (auto it = j.find("shape"); it != j.end())
    cfg.shape = tree_shape_from_string(it->get<std::string>());
  if (auto it = j.find("law"); it != j.end()) cfg.law = value_law_from_string(it->get<std::string>());
  if (auto it = j.find("depth"); it != j.end()) cfg.depth = it->get<int>();
  if (auto it = j.find("branch_lo"); it != j.end()) cfg.branch_lo = it->get<int>();
  if (auto it = j.find("branch_hi"); it != j.end()) cfg.branch_hi = it->get<int>();
  if (auto it = j.find("ratio"); it != j.end()) cfg.ratio = detail::scalar_text(*it, "ratio");
  if (auto it = j.find("p"); it != j.end()) cfg.p = it->get<double>();
  if (auto it = j.find("q"); it != j.end()) cfg.q = it->get<double>();
  if (auto it = j.find("r"); it != j.end()) cfg.r = it->get<double>();
  if (auto it = j.find("alpha"); it != j.end()) cfg.alpha = it->get<double>();
  if (auto it = j.find("r_list"); it != j.end()) {
    cfg.r_list.clear();
    for (const auto& v : *it) cfg.r_list.push_back(v.get<double>());
  }
  if (auto it = j.find("target"); it != j.end()) cfg.target = it->get<std::string>();
  if (auto it = j.find("search_seed"); it != j.end()) cfg.search.seed = it->get<std::uint64_t>();
  return cfg;
}

// Pairwise ratios among the five norms (f*, S, s, Q, D) at fixed (p, q),
// with a scale-invariance hard check: multiplying f by 7 moves every norm by
// exactly the same factor, so each ratio must return unchanged.
template <class T>
ExperimentReport run_equivalence(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.name = "equivalence";
  rep.header = {"instance_id", "R", "p", "q", "norm_kind_a", "norm_kind_b", "ratio"};
  static const char* kinds[5] = {"star", "S", "s", "Q", "D"};
  LorentzIndex idx{cfg.p, cfg.q};
  detail::per_instance(cfg.instances, rep, [&](int i, std::vector<std::vector<std::string>>& rows) {
    Martingale<T> f = instantiate<T>(resolve(detail::instance_spec(cfg, i)));
    if (detail::is_zero(f)) return;
    double R = to_double(f.tree->regularity_constant());
    auto five = [&](const Martingale<T>& g) {
      NormSnapshot ns = norm_snapshot(g, idx);
      return std::array<double, 5>{ns.star, ns.quad, ns.cond, ns.env_q, ns.env_d};
    };
    std::array<double, 5> n1 = five(f);
    std::array<double, 5> n7 = five(detail::scale_by(f, T(7)));
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) {
        if (a == b) continue;
        if (!(n1[b] > 0)) fail("DegenerateSequence", "vanishing norm on a nonzero martingale");
        double ratio = n1[a] / n1[b];
        double ratio7 = n7[a] / n7[b];
        if (!std::isfinite(ratio)) fail("InvariantViolated", "non-finite norm ratio");
        if (std::fabs(ratio7 - ratio) > 1e-10 * std::max(1.0, std::fabs(ratio)))
          fail("InvariantViolated", "norm ratio moved under scaling by 7");
        if (a < b)
          rows.push_back({std::to_string(i), detail::fmt(R), detail::fmt(cfg.p),
                          detail::fmt(cfg.q), kinds[a], kinds[b], detail::fmt(ratio)});
      }
  });
  detail::finish_ratio_summary(rep);
  return rep;
}

// Sequence-norm estimates across the oscillation exponent r, against r = 2.
template <class T>
ExperimentReport run_jn(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.name = "jn";
  rep.header = {"instance_id", "R", "r", "estimate_r", "estimate_2", "ratio"};
  detail::per_instance(cfg.instances, rep, [&](int i, std::vector<std::vector<std::string>>& rows) {
    Martingale<T> g = instantiate<T>(resolve(detail::instance_spec(cfg, i)));
    if (detail::is_zero(g)) return;
    double R = to_double(g.tree->regularity_constant());
    BmoSeqConfig search = cfg.search;
    search.seed = cfg.search.seed + static_cast<std::uint64_t>(i);
    double e2 = bmo_sequence_estimate(g, 2.0, cfg.q, cfg.alpha, search).value;
    for (double r : cfg.r_list) {
      double er = r == 2.0 ? e2 : bmo_sequence_estimate(g, r, cfg.q, cfg.alpha, search).value;
      if (!(er > 0) || !(e2 > 0) || !std::isfinite(er / e2))
        fail("DegenerateSequence", "sequence estimate not strictly positive and finite");
      rows.push_back({std::to_string(i), detail::fmt(R), detail::fmt(r), detail::fmt(er),
                      detail::fmt(e2), detail::fmt(er / e2)});
    }
  });
  // grouped by R: stable sort keeps instance order inside each group
  std::stable_sort(rep.rows.begin(), rep.rows.end(),
                   [](const auto& a, const auto& b) { return std::stod(a[1]) < std::stod(b[1]); });
  detail::finish_ratio_summary(rep);
  return rep;
}

// Orthogonality chain rows for the pairing of an atomic decomposition of f
// against an independent g on the same tree, plus the extremal-function
// ratio for the decomposition's stopping sequence.
template <class T>
ExperimentReport run_duality(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.name = "duality";
  rep.header = {"instance_id", "R",         "k",          "pairing",      "pairing_stopped",
                "cs_bound",    "norm_bound", "witness_ratio"};
  detail::per_instance(cfg.instances, rep, [&](int i, std::vector<std::vector<std::string>>& rows) {
    InstanceSpec spec = detail::instance_spec(cfg, i);
    InstanceDoc doc = resolve(spec);
    Martingale<T> f = instantiate<T>(doc);
    if (detail::is_zero(f)) return;
    // independent terminal values for g on the same tree
    std::vector<Rat> masses;
    detail::collect_leaf_masses(doc.root, masses);
    std::vector<Rat> gv = make_terminal_values(masses, cfg.law, spec.seed ^ 0x517cc1b727220a95ull);
    InstanceDoc gdoc = doc;
    gdoc.terminal.clear();
    for (const Rat& v : gv) gdoc.terminal.push_back(v.get_str());
    Martingale<T> g = instantiate<T>(gdoc);
    double R = to_double(f.tree->regularity_constant());
    AtomicDecomposition<T> dec = decompose_cond_quad(f, cfg.p);
    std::vector<OrthogonalityRow> och = orthogonality_check(dec, g);
    StoppingSequence seq;
    seq.k_min = dec.k_min;
    for (const auto& term : dec.terms) seq.nus.push_back(term.nu);
    double wr = 0;
    if (!detail::is_zero(g) && !seq.nus.empty()) {
      try {
        DualWitness<T> dw = dual_witness(g, seq, cfg.p, cfg.q, cfg.r);
        wr = dw.ratio;
        if (!std::isfinite(wr)) fail("InvariantViolated", "non-finite dual-witness ratio");
        // h_k is scale-invariant in g, so the ratio must not move
        DualWitness<T> dw3 = dual_witness(detail::scale_by(g, T(3)), seq, cfg.p, cfg.q, cfg.r);
        if (std::fabs(dw3.ratio - wr) > 1e-10 * std::max(1.0, wr))
          fail("InvariantViolated", "dual-witness ratio moved under scaling of g");
      } catch (const Error& e) {
        if (std::string(e.code()) != "DegenerateSequence") throw;
      }
    }
    for (const OrthogonalityRow& row : och)
      rows.push_back({std::to_string(i), detail::fmt(R), std::to_string(row.k),
                      detail::fmt(row.pairing), detail::fmt(row.pairing_stopped),
                      detail::fmt(row.cs_bound), detail::fmt(row.norm_bound), detail::fmt(wr)});
  });
  detail::finish_ratio_summary(rep);
  return rep;
}

// Norm ratios across the fractional integral at the conjugate exponent pair.
template <class T>
ExperimentReport run_fractional(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.name = "fractional";
  rep.header = {"instance_id", "R", "alpha", "p1", "q1", "p2", "q2", "ratio"};
  detail::per_instance(cfg.instances, rep, [&](int i, std::vector<std::vector<std::string>>& rows) {
    Martingale<T> f = instantiate<T>(resolve(detail::instance_spec(cfg, i)));
    if (detail::is_zero(f)) return;
    double R = to_double(f.tree->regularity_constant());
    FracNormRow row = fractional_norm_row(f, cfg.alpha, cfg.p, cfg.q);
    if (!std::isfinite(row.ratio)) fail("InvariantViolated", "non-finite fractional ratio");
    FracNormRow row7 = fractional_norm_row(detail::scale_by(f, T(7)), cfg.alpha, cfg.p, cfg.q);
    if (std::fabs(row7.ratio - row.ratio) > 1e-10 * std::max(1.0, row.ratio))
      fail("InvariantViolated", "fractional ratio moved under scaling by 7");
    rows.push_back({std::to_string(i), detail::fmt(R), detail::fmt(row.alpha),
                    detail::fmt(row.p1), detail::fmt(row.q1), detail::fmt(row.p2),
                    detail::fmt(row.q2), detail::fmt(row.ratio)});
  });
  detail::finish_ratio_summary(rep);
  return rep;
}

// Decompose / validate / reconstruct across the three atom categories.
template <class T>
ExperimentReport run_atomic_validate(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.name = "atomic-validate";
  rep.header = {"instance_id", "R", "target", "p", "terms", "valid", "max_rel_err"};
  std::vector<std::string> targets;
  if (cfg.target == "all")
    targets = {"s", "Q", "D"};
  else
    targets = {cfg.target};
  detail::per_instance(cfg.instances, rep, [&](int i, std::vector<std::vector<std::string>>& rows) {
    Martingale<T> f = instantiate<T>(resolve(detail::instance_spec(cfg, i)));
    double R = to_double(f.tree->regularity_constant());
    for (const std::string& target : targets) {
      AtomicDecomposition<T> dec;
      if (target == "s")
        dec = decompose_cond_quad(f, cfg.p);
      else if (target == "Q")
        dec = decompose_envelope(f, EnvelopeTarget::Q, cfg.p);
      else if (target == "D")
        dec = decompose_envelope(f, EnvelopeTarget::D, cfg.p);
      else
        fail("ConfigError", "unknown target '" + target + "'");
      AtomReport ar = validate_decomposition(f.tree, dec, f);
      std::vector<T> sum = reconstruct_terminal(dec, f.tree->leaf_count());
      std::vector<T> want = terminal_slice(f);
      double err = 0, scale = 0;
      for (int j = 0; j < f.tree->leaf_count(); ++j) {
        err = std::max(err, std::fabs(to_double(T(sum[j] - want[j]))));
        scale = std::max(scale, std::fabs(to_double(want[j])));
      }
      double rel = scale > 0 ? err / scale : err;
      if (!ar.ok) fail("InvariantViolated", "validation failed: " + ar.which + " " + ar.detail);
      if (rel > 1e-10) fail("InvariantViolated", "reconstruction error above 1e-10");
      rows.push_back({std::to_string(i), detail::fmt(R), target, detail::fmt(cfg.p),
                      std::to_string(dec.terms.size()), ar.ok ? "1" : "0", detail::fmt(rel)});
    }
  });
  detail::finish_ratio_summary(rep);
  return rep;
}

template <class T>
ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.instances <= 0) fail("ConfigError", "instances must be positive");
  ExperimentReport rep;
  if (cfg.name == "equivalence")
    rep = run_equivalence<T>(cfg);
  else if (cfg.name == "jn")
    rep = run_jn<T>(cfg);
  else if (cfg.name == "duality")
    rep = run_duality<T>(cfg);
  else if (cfg.name == "fractional")
    rep = run_fractional<T>(cfg);
  else if (cfg.name == "atomic-validate")
    rep = run_atomic_validate<T>(cfg);
  else
    fail("ConfigError", "unknown experiment '" + cfg.name + "'");
  rep.config = experiment_config_json(cfg);
  rep.config["version"] = kVersion;
  rep.config["mode"] = NumTraits<T>::mode_name;
  return rep;
}

inline std::string to_csv(const ExperimentReport& rep) {
  std::ostringstream out;
  for (size_t i = 0; i < rep.header.size(); ++i) out << (i ? "," : "") << rep.header[i];
  out << "\n";
  for (const auto& row : rep.rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

inline Json summary_json(const ExperimentReport& rep) {
  Json j;
  j["schema"] = "mhl.experiment.v1";
  j["name"] = rep.name;
  j["config"] = rep.config;
  j["rows"] = rep.rows.size();
  Json rs;
  rs["min"] = rep.ratio_min;
  rs["median"] = rep.ratio_median;
  rs["max"] = rep.ratio_max;
  j["ratio_summary"] = std::move(rs);
  j["hard_ok"] = rep.hard_ok;
  if (!rep.hard_ok) j["failure"] = rep.failure;
  return j;
}

}  // namespace mhl
