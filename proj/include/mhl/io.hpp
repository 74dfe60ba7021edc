#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhl/atomic.hpp"
#include "mhl/bmo.hpp"
#include "mhl/generate.hpp"
#include "mhl/process.hpp"
#include "mhl/tree.hpp"

namespace mhl {

// ordered_json keeps keys in insertion order, which makes serialize->parse
// round-trips byte-stable.
using Json = nlohmann::ordered_json;

inline Json read_json_text(const std::string& text, const std::string& what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("InvalidSpec", what + ": not valid JSON");
  return j;
}

inline Json read_json_stream(std::istream& in, const std::string& what) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_json_text(ss.str(), what);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("ConfigError", "cannot open '" + path + "'");
  return read_json_stream(in, path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail("ConfigError", "cannot write '" + path + "'");
  out << text;
  if (!out) fail("ConfigError", "short write to '" + path + "'");
}

namespace detail {

// masses/values arrive as strings (kept verbatim) or as JSON numbers
inline std::string scalar_text(const Json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return scalar_to_string(v.get<double>());
  fail("InvalidSpec", what + ": expected a number or a numeric string");
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) fail("InvalidSpec", what + ": missing field '" + key + "'");
  return *it;
}

}  // namespace detail

inline Json tree_node_json(const TreeSpecNode& n) {
  Json j;
  j["mass"] = n.mass;
  if (!n.children.empty()) {
    Json arr = Json::array();
    for (const auto& c : n.children) arr.push_back(tree_node_json(c));
    j["children"] = std::move(arr);
  }
  return j;
}

inline TreeSpecNode tree_node_from_json(const Json& j) {
  if (!j.is_object()) fail("InvalidSpec", "tree node: expected an object");
  TreeSpecNode n;
  n.mass = detail::scalar_text(detail::field(j, "mass", "tree node"), "mass");
  if (auto it = j.find("children"); it != j.end()) {
    if (!it->is_array()) fail("InvalidSpec", "tree node: children must be an array");
    for (const auto& c : *it) n.children.push_back(tree_node_from_json(c));
  }
  return n;
}

inline Json tree_doc(const TreeSpecNode& root, int levels) {
  Json j;
  j["schema"] = "mhl.tree.v1";
  j["levels"] = levels;
  j["root"] = tree_node_json(root);
  return j;
}

template <class T>
TreeSpecNode tree_spec_of(const FiltrationTree<T>& t, int id = 0) {
  const TreeNode<T>& nd = t.node(id);
  TreeSpecNode out;
  out.mass = nd.mass_text;
  for (int c : nd.children) out.children.push_back(tree_spec_of(t, c));
  return out;
}

template <class T>
Json tree_doc(const FiltrationTree<T>& t) {
  return tree_doc(tree_spec_of(t), t.depth());
}

struct ParsedTreeDoc {
  TreeSpecNode root;
  int levels = 0;
};

inline ParsedTreeDoc parse_tree_doc(const Json& j) {
  if (!j.is_object()) fail("InvalidSpec", "tree document: expected an object");
  ParsedTreeDoc out;
  const Json& lv = detail::field(j, "levels", "tree document");
  if (!lv.is_number_integer()) fail("InvalidSpec", "tree document: levels must be an integer");
  out.levels = lv.get<int>();
  out.root = tree_node_from_json(detail::field(j, "root", "tree document"));
  return out;
}

template <class T>
TreePtr<T> tree_from_json(const Json& j) {
  ParsedTreeDoc doc = parse_tree_doc(j);
  return build_tree<T>(doc.root, doc.levels);
}

template <class T>
Json martingale_doc(const Martingale<T>& f) {
  Json j;
  j["schema"] = "mhl.martingale.v1";
  j["tree"] = tree_doc(*f.tree);
  Json arr = Json::array();
  for (const T& v : terminal_slice(f)) arr.push_back(scalar_to_string(v));
  j["terminal"] = std::move(arr);
  return j;
}

// "tree" is either an inline tree document or a string naming a file that
// holds one.
template <class T>
Martingale<T> martingale_from_json(const Json& j, double tol = NumTraits<T>::default_tol()) {
  if (!j.is_object()) fail("InvalidSpec", "martingale document: expected an object");
  const Json& tj = detail::field(j, "tree", "martingale document");
  TreePtr<T> tree = tree_from_json<T>(tj.is_string() ? read_json_file(tj.get<std::string>()) : tj);
  const Json& tv = detail::field(j, "terminal", "martingale document");
  if (!tv.is_array()) fail("InvalidSpec", "martingale document: terminal must be an array");
  std::vector<T> term;
  term.reserve(tv.size());
  for (const auto& v : tv) term.push_back(parse_scalar<T>(detail::scalar_text(v, "terminal")));
  return martingale_from_terminal(tree, term, tol);
}

inline Json stopping_time_json(const StoppingTime& nu) {
  Json arr = Json::array();
  for (int id : nu.nodes) arr.push_back(id);
  return arr;
}

template <class T>
StoppingTime stopping_time_from_json(const FiltrationTree<T>& t, const Json& j) {
  if (!j.is_array()) fail("InvalidSpec", "stopping time: expected an array of node indices");
  std::vector<int> nodes;
  for (const auto& v : j) {
    if (!v.is_number_integer()) fail("InvalidSpec", "stopping time: indices must be integers");
    nodes.push_back(v.get<int>());
  }
  return make_stopping_time(t, nodes);
}

template <class T>
Json decomposition_doc(const AtomicDecomposition<T>& dec) {
  Json j;
  j["schema"] = "mhl.decomposition.v1";
  j["category"] = to_string(dec.category);
  j["p"] = dec.p;
  j["A"] = scalar_to_string(dec.A);
  j["k_min"] = dec.k_min;
  j["k_max"] = dec.k_max;
  Json terms = Json::array();
  for (const auto& term : dec.terms) {
    Json tj;
    tj["k"] = term.k;
    tj["mu"] = scalar_to_string(term.mu);
    tj["nu"] = stopping_time_json(term.nu);
    Json vals = Json::array();
    for (const T& v : term.terminal) vals.push_back(scalar_to_string(v));
    tj["terminal"] = std::move(vals);
    terms.push_back(std::move(tj));
  }
  j["terms"] = std::move(terms);
  return j;
}

inline AtomCategory atom_category_from_string(const std::string& s) {
  if (s == "s") return AtomCategory::CondQuad;
  if (s == "Q") return AtomCategory::Quad;
  if (s == "D") return AtomCategory::Maximal;
  fail("InvalidSpec", "unknown atom category '" + s + "'");
}

template <class T>
AtomicDecomposition<T> decomposition_from_json(TreePtr<T> tree, const Json& j) {
  if (!j.is_object()) fail("InvalidSpec", "decomposition document: expected an object");
  AtomicDecomposition<T> dec;
  dec.category =
      atom_category_from_string(detail::field(j, "category", "decomposition").get<std::string>());
  dec.p = detail::field(j, "p", "decomposition").get<double>();
  dec.A = parse_scalar<T>(detail::scalar_text(detail::field(j, "A", "decomposition"), "A"));
  dec.k_min = detail::field(j, "k_min", "decomposition").get<int>();
  dec.k_max = detail::field(j, "k_max", "decomposition").get<int>();
  for (const auto& tj : detail::field(j, "terms", "decomposition")) {
    DecompositionTerm<T> term;
    term.k = detail::field(tj, "k", "term").get<int>();
    term.mu = parse_scalar<T>(detail::scalar_text(detail::field(tj, "mu", "term"), "mu"));
    term.nu = stopping_time_from_json(*tree, detail::field(tj, "nu", "term"));
    for (const auto& v : detail::field(tj, "terminal", "term"))
      term.terminal.push_back(parse_scalar<T>(detail::scalar_text(v, "terminal")));
    if (static_cast<int>(term.terminal.size()) != tree->leaf_count())
      fail("InvalidSpec", "decomposition term: wrong terminal length");
    dec.terms.push_back(std::move(term));
  }
  return dec;
}

inline Json stopping_sequence_json(const StoppingSequence& seq) {
  Json j;
  j["k_min"] = seq.k_min;
  Json arr = Json::array();
  for (const StoppingTime& nu : seq.nus) arr.push_back(stopping_time_json(nu));
  j["nus"] = std::move(arr);
  return j;
}

template <class T>
StoppingSequence stopping_sequence_from_json(const FiltrationTree<T>& t, const Json& j) {
  StoppingSequence seq;
  seq.k_min = detail::field(j, "k_min", "stopping sequence").get<int>();
  for (const auto& nj : detail::field(j, "nus", "stopping sequence"))
    seq.nus.push_back(stopping_time_from_json(t, nj));
  return seq;
}

inline Json estimate_doc(const BmoEstimate& est) {
  Json j;
  j["schema"] = "mhl.bmo-estimate.v1";
  j["value"] = est.value;
  j["method"] = est.method;
  j["witness"] = stopping_sequence_json(est.witness);
  return j;
}

inline Json instance_spec_json(const InstanceSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["depth"] = spec.depth;
  j["branch_lo"] = spec.branch_lo;
  j["branch_hi"] = spec.branch_hi;
  j["ratio"] = spec.ratio;
  j["law"] = to_string(spec.law);
  j["seed"] = spec.seed;
  return j;
}

inline InstanceSpec instance_spec_from_json(const Json& j) {
  InstanceSpec spec;
  spec.kind = tree_shape_from_string(detail::field(j, "kind", "instance spec").get<std::string>());
  spec.depth = detail::field(j, "depth", "instance spec").get<int>();
  if (auto it = j.find("branch_lo"); it != j.end()) spec.branch_lo = it->get<int>();
  if (auto it = j.find("branch_hi"); it != j.end()) spec.branch_hi = it->get<int>();
  if (auto it = j.find("ratio"); it != j.end())
    spec.ratio = detail::scalar_text(*it, "ratio");
  spec.law = value_law_from_string(detail::field(j, "law", "instance spec").get<std::string>());
  if (auto it = j.find("seed"); it != j.end()) spec.seed = it->get<std::uint64_t>();
  return spec;
}

inline Json instance_doc_json(const InstanceDoc& doc) {
  Json j;
  j["schema"] = "mhl.instance.v1";
  j["tree"] = tree_doc(doc.root, doc.levels);
  Json arr = Json::array();
  for (const std::string& s : doc.terminal) arr.push_back(s);
  j["terminal"] = std::move(arr);
  return j;
}

inline InstanceDoc instance_doc_from_json(const Json& j) {
  InstanceDoc doc;
  ParsedTreeDoc td = parse_tree_doc(detail::field(j, "tree", "instance"));
  doc.root = std::move(td.root);
  doc.levels = td.levels;
  for (const auto& v : detail::field(j, "terminal", "instance"))
    doc.terminal.push_back(detail::scalar_text(v, "terminal"));
  return doc;
}

}  // namespace mhl
