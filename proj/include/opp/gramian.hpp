#pragma once

// Discrete empirical observability gramian.
//
// For each direction matrix T_l and size c_m, every perturbable coordinate i
// is kicked to x0 + c_m T_l e_i and simulated over [0, t_f]; output
// deviations from the unperturbed run are accumulated as
//
//   W = sum_l sum_m 1/(r s c_m^2) sum_{k=0}^{K} T_l Psi_k^{lm} T_l^T dt,
//   Psi_k^{lm}(i, j) = (y_k^{ilm} - y_k^0)^T (y_k^{jlm} - y_k^0).
//
// Outputs are grouped by sensor (one PMU per generator). Because Psi is a
// sum over output rows, the gramian for a set of sensors is the sum of the
// single-sensor gramians.

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opp/model.hpp"

namespace opp {

/// A discrete-time system whose outputs are grouped by sensor.
class ObservedSystem {
 public:
  virtual ~ObservedSystem() = default;

  virtual Index state_dim() const = 0;
  /// Storage indices of the coordinates that are perturbed; their count is n.
  virtual const std::vector<Index>& perturbable() const = 0;
  virtual Index sensor_count() const = 0;
  virtual Index outputs_per_sensor() const = 0;
  /// Per-perturbable-coordinate unit used when a scheme asks for scaled
  /// perturbations (omega in rad/s for power systems); ones otherwise.
  virtual Eigen::VectorXd natural_scale() const;

  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, double dt) const = 0;
  /// Sensor-major outputs: sensor s owns entries [s*q, (s+1)*q).
  virtual Eigen::VectorXd outputs(const Eigen::VectorXd& x) const = 0;
};

/// Power system with constant inputs, one four-output PMU slot per machine.
class PowerSystemModel final : public ObservedSystem {
 public:
  PowerSystemModel(SystemCase sc, InputVector u);

  Index state_dim() const override { return 4 * sc_.machine_count(); }
  const std::vector<Index>& perturbable() const override { return dynamic_; }
  Index sensor_count() const override { return sc_.machine_count(); }
  Index outputs_per_sensor() const override { return 4; }
  Eigen::VectorXd natural_scale() const override;
  Eigen::VectorXd step(const Eigen::VectorXd& x, double dt) const override;
  Eigen::VectorXd outputs(const Eigen::VectorXd& x) const override;

  const SystemCase& system_case() const { return sc_; }

 private:
  SystemCase sc_;
  InputVector u_;
  std::vector<Index> dynamic_;
};

/// x' = A x, y = C x, advanced with the same modified-Euler scheme as the
/// power system. Each row of C is its own sensor unless grouped otherwise.
class LinearSystem final : public ObservedSystem {
 public:
  LinearSystem(Eigen::MatrixXd A, Eigen::MatrixXd C, Index outputs_per_sensor = 1);

  Index state_dim() const override { return A_.rows(); }
  const std::vector<Index>& perturbable() const override { return all_; }
  Index sensor_count() const override { return C_.rows() / q_; }
  Index outputs_per_sensor() const override { return q_; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, double dt) const override;
  Eigen::VectorXd outputs(const Eigen::VectorXd& x) const override { return C_ * x; }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& C() const { return C_; }

 private:
  Eigen::MatrixXd A_, C_;
  Index q_;
  std::vector<Index> all_;
};

/// The bundled two-state Hurwitz test system: eigenvalues -1 and -2, two
/// scalar sensors.
LinearSystem bundled_linear_system();

struct PerturbationScheme {
  std::vector<Eigen::MatrixXd> directions;  // T_l, each n x n orthogonal
  std::vector<double> magnitudes;           // c_m > 0
  double t_f = 5.0;
  double dt = 1.0 / 60.0;
  bool scale_omega = false;

  /// r = 1 with T = I, s = 1 with c = 1e-3.
  static PerturbationScheme standard(Index n, double t_f = 5.0, double dt = 1.0 / 60.0);

  void validate(Index n) const;
  /// Short provenance tag derived from every field.
  std::string id() const;
};

struct Gramian {
  Eigen::MatrixXd matrix;
  PlacementMask pmu_set;
  std::string scheme_id;

  Index dim() const { return matrix.rows(); }
};

/// Output deviations of every perturbed run, kept so that gramians for any
/// sensor subset can be formed without re-simulating.
class PerturbationResponses {
 public:
  Index n() const { return n_; }
  Index sensors() const { return sensors_; }
  Index samples() const { return samples_; }
  Index simulations() const { return simulations_; }
  const PerturbationScheme& scheme() const { return scheme_; }

  /// Gramian restricted to the sensors selected by z.
  Gramian gramian(const PlacementMask& z) const;

 private:
  friend PerturbationResponses simulate_responses(const ObservedSystem&, const PerturbationScheme&,
                                                  const Eigen::VectorXd&, int);

  Index n_ = 0, sensors_ = 0, q_ = 0, samples_ = 0, simulations_ = 0;
  PerturbationScheme scheme_;
  // One block per (l, m): rows ordered (k, sensor, output), columns = i.
  std::vector<Eigen::MatrixXd> deviations_;
};

/// Runs the r*s*n perturbed simulations plus the shared nominal run.
/// jobs > 1 spreads simulations across threads; results do not depend on it.
PerturbationResponses simulate_responses(const ObservedSystem& sys, const PerturbationScheme& scheme,
                                         const Eigen::VectorXd& x0, int jobs = 1);

Gramian empirical_gramian(const ObservedSystem& sys, const PlacementMask& placement,
                          const PerturbationScheme& scheme, const Eigen::VectorXd& x0, int jobs = 1);

std::vector<Gramian> per_generator_gramians(const PerturbationResponses& responses);
std::vector<Gramian> per_generator_gramians(const ObservedSystem& sys, const PerturbationScheme& scheme,
                                            const Eigen::VectorXd& x0, int jobs = 1);

/// sum_i z_i W_i, accumulated in index order.
Gramian assemble_gramian(const PlacementMask& z, std::span<const Gramian> parts);

/// Symmetric within 1e-10 relative and min eigenvalue >= -1e-10 max(1, lambda_max).
bool is_symmetric_psd(const Eigen::MatrixXd& W);

/// Rows of 17 significant digits, comma separated.
std::string matrix_to_csv(const Eigen::MatrixXd& M);

}  // namespace opp
