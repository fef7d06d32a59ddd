#pragma once

// Run configuration shared by the command-line subcommands. Every field but
// case_path has a default; to_json/from_json round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opp/dse.hpp"
#include "opp/gramian.hpp"
#include "opp/placement.hpp"

namespace opp {

struct SchemeConfig {
  /// "identity" (T = I), "plus_minus" (T = I and -I), or "explicit".
  std::string directions = "identity";
  std::vector<Eigen::MatrixXd> explicit_directions;
  std::vector<double> magnitudes = {1e-3};
  double t_f = 5.0;
  double dt = 1.0 / 60.0;
  bool scale_omega = false;

  PerturbationScheme build(Index n) const;
};

struct SolverConfig {
  std::string name = "auto";
  std::uint64_t exhaustive_cap = 2'000'000;
  int max_swap_rounds = 1000;
  int random_restarts = 0;

  SearchOptions options() const { return {exhaustive_cap, max_swap_rounds, random_restarts}; }
};

struct StudyConfig {
  /// Entries: "adaptive", "optimal:<measure>", "random:<count>", "z:<bits>".
  std::vector<std::string> placements = {"adaptive", "random:5"};
  int gbar = 2;
  std::uint64_t placement_seed = 1;
  std::vector<Scenario> scenarios = {Scenario{}};
  int repeats = 20;
  double t_f = 5.0;
  double dt = 1.0 / 60.0;
  NoiseModel noise;
  FilterSettings filter;
  ConvergenceCriterion criterion;
  double init_delta_rel_error = 0.1;
};

struct RunConfig {
  std::string case_path;
  SchemeConfig scheme;
  SolverConfig solver;
  /// Budgets evaluated by `place`; empty means 1..g.
  std::vector<int> gbar;
  double epsilon = 1.0;
  /// A measure name or "adaptive".
  std::string measure = "adaptive";
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out = "out";
  /// When set, per-generator gramians are read from W_gen_<i>.csv files in
  /// this directory instead of being simulated.
  std::string gramian_dir;
  StudyConfig study;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing fields take defaults; case_path is required. Throws InvalidConfig.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config_file(const std::filesystem::path& path);

}  // namespace opp
