#pragma once

// Dynamic state estimation used to validate placements: disturbance
// scenarios, synthetic PMU data, SRUKF tracking and the rotor-angle metrics.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opp/model.hpp"
#include "opp/srukf.hpp"

namespace opp {

/// Disturbance on the coupling between machines `from` and `to` (0-based).
/// While active, Y(from,to) and Y(to,from) are scaled by `severity` and the
/// removed part is moved onto the diagonals so row sums are unchanged.
struct Scenario {
  Index from = 0;
  Index to = 1;
  double fault_start = 0.1;
  double fault_clear = 0.2;
  double severity = 0.0;
  std::string description;

  void validate(const SystemCase& sc, double t_f) const;
};

SystemCase faulted_case(const SystemCase& sc, const Scenario& scenario);

/// Network active at each sample. Sample j (and the step leaving it) uses the
/// faulted network when round(start/dt) <= j < round(clear/dt).
struct NetworkSchedule {
  SystemCase normal;
  SystemCase faulted;
  long fault_first = 0;
  long fault_end = 0;

  const SystemCase& at(long sample) const {
    return (sample >= fault_first && sample < fault_end) ? faulted : normal;
  }
};

struct NoiseModel {
  // process noise std per step, used by the filter's Q
  double process_std_delta = 1e-5;   // rad
  double process_std_omega = 1e-4;   // rad/s
  double process_std_eprime = 1e-5;  // pu
  // std of the gaussian noise added to every PMU channel
  double measurement_std = 0.0;
  std::uint64_t seed = 1;
};

struct FilterSettings {
  UnscentedParams unscented;
  double init_std_delta = 0.1;
  double init_std_omega = 1e-2;
  double init_std_eprime = 1e-2;
  /// Lower bound on the measurement std the filter assumes, so that noise-free
  /// data still yields a well-posed innovation covariance.
  double min_measurement_std = 1e-3;
};

struct ScenarioData {
  NetworkSchedule schedule;
  InputVector u;
  double dt = 0.0;
  Trajectory truth;             // clean states and outputs, all machines
  Eigen::MatrixXd measurements;  // noisy outputs, machine-major, 4g x (K+1)

  /// Measurements of the PMU-equipped machines in output_map order, p x (K+1).
  Eigen::MatrixXd measurements_for(const PlacementMask& placement) const;
};

ScenarioData generate_scenario(const SystemCase& sc, const Equilibrium& eq, const Scenario& scenario,
                               double t_f, double dt, const NoiseModel& noise);

struct EstimationResult {
  Eigen::MatrixXd estimated;  // 4g x T_s
  Eigen::MatrixXd truth;      // 4g x T_s
  PlacementMask placement;
  std::vector<bool> converged;
  double e_delta = 0.0;
  Index n_convergent = 0;
  std::vector<double> covariance_condition;  // per step, from the factor diagonal
  std::vector<double> innovation_norm;       // per step; 0 when nothing is measured
};

struct ConvergenceCriterion {
  double window = 1.0;      // seconds at the end of the run
  double threshold = 0.02;  // relative to |delta_true|
  /// Used instead of the relative test when |delta_true| < 1e-9.
  double absolute_fallback = 1e-3;
};

/// Filters the scenario's measurements at the given placement starting from
/// x_init_guess. Classical-machine e' entries are taken from the guess and
/// held fixed; the filter state is the perturbable coordinates.
EstimationResult srukf_run(const ScenarioData& data, const PlacementMask& placement,
                           const StateVector& x_init_guess, const NoiseModel& noise,
                           const FilterSettings& settings = {}, const ConvergenceCriterion& criterion = {});

/// sqrt(sum_i sum_t (est - true)^2 / (g T_s)) over g x T_s angle matrices.
double avg_rotor_angle_error(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta);

std::vector<bool> convergent_angles(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta,
                                    double dt, const ConvergenceCriterion& criterion = {});

Index convergent_angle_count(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta, double dt,
                             const ConvergenceCriterion& criterion = {});

/// Rows of delta from a 4g x T state matrix.
Eigen::MatrixXd rotor_angles(const Eigen::MatrixXd& states, Index g);

// ---------------------------------------------------------------------------

struct StudyPlacement {
  std::string id;
  std::string measure_used;  // e.g. "adaptive", "logdet", "random", "explicit"
  PlacementMask z;
};

struct StudySettings {
  double t_f = 5.0;
  double dt = 1.0 / 60.0;
  int repeats = 20;
  std::uint64_t seed = 1;
  NoiseModel noise;
  FilterSettings filter;
  ConvergenceCriterion criterion;
  /// Initial guess: delta_i * (1 +/- this), sign drawn per machine and run.
  double init_delta_rel_error = 0.1;
  int jobs = 1;
};

struct RunRecord {
  std::string placement_id;
  std::string z;
  std::string measure_used;
  Index scenario_id = 0;
  int repeat = 0;
  double e_delta = 0.0;  // NaN when diverged
  Index n_convergent = 0;
  bool diverged = false;
};

struct AggregateRecord {
  std::string placement_id;
  std::string z;
  std::string measure_used;
  Index runs = 0;
  Index diverged = 0;
  double mean_e_delta = 0.0;  // over non-diverged runs
  double mean_n_convergent = 0.0;  // over all runs, diverged counting 0
};

struct StudyReport {
  std::vector<RunRecord> runs;
  std::vector<AggregateRecord> aggregate;

  bool any_diverged() const;
  std::string runs_csv() const;
  std::string aggregate_csv() const;
};

/// Seed of the random stream for one (scenario, repeat) pair. The same stream
/// is shared by every placement so that placements see identical noise.
std::uint64_t run_seed(std::uint64_t master, Index scenario, int repeat);

StudyReport run_validation_study(const SystemCase& sc, const Equilibrium& eq,
                                 std::span<const StudyPlacement> placements,
                                 std::span<const Scenario> scenarios, const StudySettings& settings);

}  // namespace opp
