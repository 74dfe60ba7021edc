#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mhl/experiments.hpp"
#include "mhl/io.hpp"
#include "mhl/version.hpp"

namespace {

struct Options {
  std::string mode = "float";
  std::uint64_t seed = 1;
  double tolerance = -1;  // <0: mode default
  std::string input = "-";
  std::string out;

  std::string kind = "s";
  double p = 1, q = 1, r = 2, alpha = 0;
  unsigned long long cap = 1'000'000;

  std::string target = "s";
  std::string a_scale = "3";

  std::string exp_name;
  std::string exp_config;
  int instances = -1;
};

mhl::Json read_input(const Options& opt) {
  if (opt.input == "-") return mhl::read_json_stream(std::cin, "stdin");
  return mhl::read_json_file(opt.input);
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty())
    std::cout << text;
  else
    mhl::write_text_file(opt.out, text);
}

template <class T>
double tol_of(const Options& opt) {
  if (opt.tolerance >= 0) return opt.tolerance;
  return mhl::NumTraits<T>::exact ? 0.0 : 1e-9;
}

template <class T>
int cmd_norm(const Options& opt) {
  mhl::Martingale<T> f = mhl::martingale_from_json<T>(read_input(opt), tol_of<T>(opt));
  mhl::LorentzIndex idx{opt.p, opt.q};
  double value = 0;
  if (opt.kind == "star")
    value = mhl::h_norm(f, mhl::HardyKind::Maximal, idx);
  else if (opt.kind == "S")
    value = mhl::h_norm(f, mhl::HardyKind::QuadVariation, idx);
  else if (opt.kind == "s")
    value = mhl::h_norm(f, mhl::HardyKind::CondQuadVariation, idx);
  else if (opt.kind == "Q")
    value = mhl::qd_norm(f, mhl::EnvelopeTarget::Q, idx);
  else if (opt.kind == "D")
    value = mhl::qd_norm(f, mhl::EnvelopeTarget::D, idx);
  else if (opt.kind == "Lpq")
    value = mhl::lorentz_norm(mhl::weighted_leaf_values(*f.tree, mhl::terminal_slice(f)), idx);
  else if (opt.kind == "bmo")
    value = mhl::bmo_stopping_norm(f, opt.r, opt.alpha, opt.cap);
  else if (opt.kind == "bmo-seq") {
    mhl::BmoSeqConfig cfg;
    cfg.seed = opt.seed;
    cfg.enum_cap = opt.cap;
    value = mhl::bmo_sequence_estimate(f, opt.r, opt.q, opt.alpha, cfg).value;
  } else {
    mhl::fail("ConfigError", "unknown norm kind '" + opt.kind + "'");
  }
  emit(opt, mhl::scalar_to_string(value) + "\n");
  return 0;
}

template <class T>
int cmd_decompose(const Options& opt) {
  mhl::Martingale<T> f = mhl::martingale_from_json<T>(read_input(opt), tol_of<T>(opt));
  T A = mhl::parse_scalar<T>(opt.a_scale);
  mhl::AtomicDecomposition<T> dec;
  if (opt.target == "s")
    dec = mhl::decompose_cond_quad(f, opt.p, A);
  else if (opt.target == "Q")
    dec = mhl::decompose_envelope(f, mhl::EnvelopeTarget::Q, opt.p, A);
  else if (opt.target == "D")
    dec = mhl::decompose_envelope(f, mhl::EnvelopeTarget::D, opt.p, A);
  else
    mhl::fail("ConfigError", "unknown decomposition target '" + opt.target + "'");
  emit(opt, mhl::decomposition_doc(dec).dump(2) + "\n");
  return 0;
}

template <class T>
int cmd_fracint(const Options& opt) {
  mhl::Martingale<T> f = mhl::martingale_from_json<T>(read_input(opt), tol_of<T>(opt));
  mhl::Martingale<T> g = mhl::fractional_integral(f, opt.alpha);
  emit(opt, mhl::martingale_doc(g).dump(2) + "\n");
  return 0;
}

template <class T>
int cmd_enumerate(const Options& opt) {
  mhl::Json j = read_input(opt);
  mhl::TreePtr<T> tree;
  if (j.contains("root"))
    tree = mhl::tree_from_json<T>(j);
  else if (j.contains("tree"))
    tree = mhl::martingale_from_json<T>(j, tol_of<T>(opt)).tree;
  else
    mhl::fail("InvalidSpec", "input is neither a tree nor a martingale document");
  unsigned long long n = mhl::stopping_time_count(*tree);
  if (n > opt.cap)
    mhl::fail("EnumerationCapExceeded",
              std::to_string(n) + " stopping times exceed the cap " + std::to_string(opt.cap));
  emit(opt, std::to_string(n) + "\n");
  return 0;
}

template <class T>
int cmd_experiment(const Options& opt) {
  mhl::ExperimentConfig cfg;
  if (!opt.exp_config.empty())
    cfg = mhl::experiment_config_from_json(mhl::read_json_file(opt.exp_config));
  if (!opt.exp_name.empty()) cfg.name = opt.exp_name;
  if (cfg.name.empty()) mhl::fail("ConfigError", "experiment name missing (--name or config)");
  if (opt.instances >= 0) cfg.instances = opt.instances;
  if (cfg.search.seed == 1) cfg.search.seed = opt.seed;
  mhl::ExperimentReport rep = mhl::run_experiment<T>(cfg);
  std::string prefix = opt.out.empty() ? cfg.name : opt.out;
  mhl::write_text_file(prefix + ".csv", mhl::to_csv(rep));
  mhl::write_text_file(prefix + ".json", mhl::summary_json(rep).dump(2) + "\n");
  std::cout << mhl::summary_json(rep).dump(2) << "\n";
  return rep.hard_ok ? 0 : 3;
}

template <class T>
int dispatch(const Options& opt, const std::string& sub) {
  if (sub == "norm") return cmd_norm<T>(opt);
  if (sub == "decompose") return cmd_decompose<T>(opt);
  if (sub == "fracint") return cmd_fracint<T>(opt);
  if (sub == "enumerate-stopping-times") return cmd_enumerate<T>(opt);
  if (sub == "experiment") return cmd_experiment<T>(opt);
  mhl::fail("ConfigError", "unknown subcommand '" + sub + "'");
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"martingale Hardy-Lorentz toolkit"};
  app.set_version_flag("--version", mhl::kVersion);
  app.require_subcommand(1);
  app.add_option("--mode", opt.mode, "scalar mode")
      ->check(CLI::IsMember({"rational", "float"}))
      ->capture_default_str();
  app.add_option("--seed", opt.seed, "seed for randomized search")->capture_default_str();
  app.add_option("--tolerance", opt.tolerance, "martingale-property tolerance (default per mode)");

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("input", opt.input, "input document path, or - for stdin");
    sub->add_option("--out", opt.out, "output path (default: stdout)");
  };

  CLI::App* norm = app.add_subcommand("norm", "compute a norm of a martingale");
  add_input(norm);
  norm->add_option("--kind", opt.kind, "star|S|s|Q|D|Lpq|bmo|bmo-seq")
      ->check(CLI::IsMember({"star", "S", "s", "Q", "D", "Lpq", "bmo", "bmo-seq"}))
      ->capture_default_str();
  norm->add_option("--p", opt.p)->capture_default_str();
  norm->add_option("--q", opt.q, "second index; inf allowed")->capture_default_str();
  norm->add_option("--r", opt.r, "oscillation exponent (bmo kinds)")->capture_default_str();
  norm->add_option("--alpha", opt.alpha, "bmo weight exponent")->capture_default_str();
  norm->add_option("--cap", opt.cap, "stopping-time enumeration cap")->capture_default_str();

  CLI::App* dec = app.add_subcommand("decompose", "atomic decomposition of a martingale");
  add_input(dec);
  dec->add_option("--target", opt.target, "s|Q|D")
      ->check(CLI::IsMember({"s", "Q", "D"}))
      ->capture_default_str();
  dec->add_option("--p", opt.p)->capture_default_str();
  dec->add_option("--A", opt.a_scale, "coefficient scale")->capture_default_str();

  CLI::App* fr = app.add_subcommand("fracint", "apply the fractional integral");
  add_input(fr);
  fr->add_option("--alpha", opt.alpha)->capture_default_str();

  CLI::App* en = app.add_subcommand("enumerate-stopping-times", "count stopping times of a tree");
  add_input(en);
  en->add_option("--cap", opt.cap)->capture_default_str();

  CLI::App* ex = app.add_subcommand("experiment", "run a batch experiment");
  ex->add_option("--name", opt.exp_name, "equivalence|jn|duality|fractional|atomic-validate");
  ex->add_option("--config", opt.exp_config, "config JSON path");
  ex->add_option("--out", opt.out, "output prefix (writes .csv and .json)");
  ex->add_option("--instances", opt.instances, "override instance count");

  CLI11_PARSE(app, argc, argv);
  std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (opt.mode == "rational") return dispatch<mhl::Rat>(opt, sub);
    return dispatch<double>(opt, sub);
  } catch (const mhl::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
