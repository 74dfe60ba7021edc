#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mhl/experiments.hpp"

using namespace mhl;

namespace {

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

ExperimentConfig small_config(const std::string& name, int instances, int depth = 2) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.instances = instances;
  cfg.depth = depth;
  cfg.seed = 1000;
  return cfg;
}

}  // namespace

TEST_CASE("config guards") {
  ExperimentConfig cfg = small_config("equivalence", 0);
  CHECK(code_of([&] { run_experiment<double>(cfg); }) == "ConfigError");
  cfg.instances = 1;
  cfg.name = "zeta";
  CHECK(code_of([&] { run_experiment<double>(cfg); }) == "ConfigError");
}

TEST_CASE("config documents round-trip") {
  ExperimentConfig cfg = small_config("jn", 3);
  cfg.r_list = {1, 3};
  cfg.target = "Q";
  cfg.search.seed = 99;
  Json j = experiment_config_json(cfg);
  ExperimentConfig back = experiment_config_from_json(j);
  CHECK(experiment_config_json(back).dump() == j.dump());
}

TEST_CASE("equivalence rows are deterministic and scale-checked") {
  ExperimentConfig cfg = small_config("equivalence", 4);
  ExperimentReport a = run_experiment<double>(cfg);
  ExperimentReport b = run_experiment<double>(cfg);
  CHECK(a.hard_ok);
  CHECK(to_csv(a) == to_csv(b));
  CHECK(summary_json(a).dump() == summary_json(b).dump());

  CHECK(a.header ==
        std::vector<std::string>{"instance_id", "R", "p", "q", "norm_kind_a", "norm_kind_b",
                                 "ratio"});
  // ten unordered pairs of five norms per nonzero instance
  CHECK(a.rows.size() % 10 == 0);
  CHECK(a.rows.size() > 0);
  CHECK(a.ratio_min <= a.ratio_median);
  CHECK(a.ratio_median <= a.ratio_max);
  CHECK(a.ratio_min > 0);

  Json s = summary_json(a);
  CHECK(s["schema"] == "mhl.experiment.v1");
  CHECK(s["name"] == "equivalence");
  CHECK(s["hard_ok"] == true);
  CHECK(s["config"]["seed"] == 1000);
  CHECK(s["config"].contains("version"));
  CHECK(s["config"].contains("mode"));
}

TEST_CASE("both scalar modes agree on the experiment shape") {
  ExperimentConfig cfg = small_config("equivalence", 3);
  ExperimentReport fd = run_experiment<double>(cfg);
  ExperimentReport fr = run_experiment<Rat>(cfg);
  CHECK(fd.hard_ok);
  CHECK(fr.hard_ok);
  CHECK(fd.rows.size() == fr.rows.size());
}

TEST_CASE("atomic validation emits one clean row per target") {
  ExperimentConfig cfg = small_config("atomic-validate", 4);
  cfg.p = 1;
  ExperimentReport rep = run_experiment<double>(cfg);
  CHECK(rep.hard_ok);
  CHECK(rep.failure.empty());
  CHECK(rep.rows.size() == 12);  // 4 instances x {s, Q, D}
  size_t valid_col = 5, err_col = 6;
  for (const auto& row : rep.rows) {
    CHECK(row[valid_col] == "1");
    CHECK(std::stod(row[err_col]) <= 1e-10);
  }

  cfg.target = "Q";
  ExperimentReport only_q = run_experiment<double>(cfg);
  CHECK(only_q.rows.size() == 4);
  for (const auto& row : only_q.rows) CHECK(row[2] == "Q");
}

TEST_CASE("duality rows keep the chain ordered") {
  ExperimentConfig cfg = small_config("duality", 3);
  cfg.p = 1;
  cfg.q = 2;
  cfg.r = 2;
  ExperimentReport rep = run_experiment<double>(cfg);
  CHECK(rep.hard_ok);
  CHECK(rep.rows.size() > 0);
  // pairing <= cs_bound <= norm_bound row by row
  for (const auto& row : rep.rows) {
    double pairing = std::fabs(std::stod(row[3]));
    double cs = std::stod(row[5]);
    double nb = std::stod(row[6]);
    CHECK(pairing <= cs * (1 + 1e-10) + 1e-12);
    CHECK(cs <= nb * (1 + 1e-10) + 1e-12);
  }
  ExperimentReport again = run_experiment<double>(cfg);
  CHECK(to_csv(rep) == to_csv(again));
}

TEST_CASE("jn rows compare oscillation exponents against r = 2") {
  ExperimentConfig cfg = small_config("jn", 2);
  cfg.shape = TreeShape::Dyadic;  // random shapes can degenerate to a chain, dropping rows
  cfg.q = 2;
  cfg.r_list = {1, 3};
  ExperimentReport rep = run_experiment<double>(cfg);
  CHECK(rep.hard_ok);
  CHECK(rep.header[2] == "r");
  CHECK(rep.rows.size() == 4);  // 2 instances x 2 exponents
  for (const auto& row : rep.rows) {
    CHECK(std::stod(row[3]) > 0);  // estimate_r
    CHECK(std::stod(row[4]) > 0);  // estimate_2
    CHECK(std::stod(row[5]) > 0);  // ratio
  }
  // grouped by regularity constant
  for (size_t i = 1; i < rep.rows.size(); ++i)
    CHECK(std::stod(rep.rows[i - 1][1]) <= std::stod(rep.rows[i][1]));
  ExperimentReport again = run_experiment<double>(cfg);
  CHECK(to_csv(rep) == to_csv(again));
}

TEST_CASE("fractional rows stay at the conjugate pair") {
  ExperimentConfig cfg = small_config("fractional", 3);
  cfg.alpha = 1;
  cfg.p = 0.5;
  cfg.q = 1;
  ExperimentReport rep = run_experiment<double>(cfg);
  CHECK(rep.hard_ok);
  for (const auto& row : rep.rows) {
    CHECK(std::stod(row[2]) == 1.0);             // alpha echoed
    CHECK(std::stod(row[5]) == doctest::Approx(1.0));  // p2 = 1/(1/p1 - alpha)
    CHECK(std::stod(row[7]) >= 0);
  }
}

TEST_CASE("csv starts with the header line") {
  ExperimentConfig cfg = small_config("equivalence", 1);
  ExperimentReport rep = run_experiment<double>(cfg);
  std::string csv = to_csv(rep);
  CHECK(csv.rfind("instance_id,R,p,q,norm_kind_a,norm_kind_b,ratio\n", 0) == 0);
}
