#pragma once

// Multi-machine power system dynamics: fourth-order transient and classical
// generator models coupled through a reduced admittance network, PMU output
// map, equilibrium initialization and modified-Euler stepping.

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace opp {

using Index = Eigen::Index;
using Complex = std::complex<double>;

enum class ModelOrder { Transient4, Classical2 };

struct MachineParams {
  int index = 0;
  ModelOrder model_order = ModelOrder::Transient4;
  double H = 0.0;      // inertia constant (s)
  double K_D = 0.0;    // damping factor
  double T_d0p = 0.0;  // d-axis open-circuit time constant (s)
  double T_q0p = 0.0;  // q-axis open-circuit time constant (s)
  double x_d = 0.0;
  double x_q = 0.0;
  double x_dp = 0.0;
  double x_qp = 0.0;
  double S_N = 0.0;  // machine base MVA

  bool is_classical() const { return model_order == ModelOrder::Classical2; }
};

/// Mechanical torque and field voltage per machine, held constant.
struct InputVector {
  Eigen::VectorXd T_m;
  Eigen::VectorXd E_fd;
};

/// Measured terminal quantities in the network frame, system base.
struct TerminalPhasor {
  Complex voltage;
  Complex current;
};

struct SystemCase {
  std::string name;
  std::vector<MachineParams> machines;
  Eigen::MatrixXcd y_reduced;
  double s_b = 100.0;
  double omega_0 = 0.0;
  std::optional<InputVector> inputs;
  std::vector<TerminalPhasor> terminal;  // empty when the document gives inputs only

  Index machine_count() const { return static_cast<Index>(machines.size()); }

  /// Storage indices of the perturbable coordinates: every delta and omega,
  /// plus e'_q and e'_d of transient-model machines, in storage order.
  std::vector<Index> dynamic_indices() const;
  Index dynamic_dim() const;

  void validate() const;
};

/// Index arithmetic over the storage layout x = [delta; omega; e'_q; e'_d].
struct StateLayout {
  Index g;

  Index size() const { return 4 * g; }
  Index delta(Index i) const { return i; }
  Index omega(Index i) const { return g + i; }
  Index e_qp(Index i) const { return 2 * g + i; }
  Index e_dp(Index i) const { return 3 * g + i; }
};

using StateVector = Eigen::VectorXd;

/// y = [e_R; e_I; i_R; i_I] over the PMU-equipped machines.
using OutputVector = Eigen::VectorXd;

class PlacementMask {
 public:
  PlacementMask() = default;
  explicit PlacementMask(std::vector<std::uint8_t> bits);

  static PlacementMask none(Index g);
  static PlacementMask all(Index g);
  static PlacementMask unit(Index g, Index i);
  static PlacementMask from_indices(Index g, std::span<const Index> indices);

  Index size() const { return static_cast<Index>(bits_.size()); }
  Index count() const;
  bool operator[](Index i) const { return bits_[static_cast<std::size_t>(i)] != 0; }
  void set(Index i, bool on);
  std::vector<Index> indices() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// "0110..." form.
  std::string to_string() const;

  friend bool operator==(const PlacementMask&, const PlacementMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Machine-frame algebraic quantities evaluated at one state.
struct MachineAlgebra {
  Eigen::VectorXcd psi;      // internal source phasors
  Eigen::VectorXcd current;  // terminal current I_t, system base
  Eigen::VectorXd i_q, i_d;  // machine base
  Eigen::VectorXd e_q, e_d;
  Eigen::VectorXd T_e;
};

MachineAlgebra machine_algebra(const SystemCase& sc, const StateVector& x);

struct Equilibrium {
  StateVector x;
  InputVector u;
};

inline constexpr double kEquilibriumTol = 1e-8;

Equilibrium initialize_equilibrium(const SystemCase& sc,
                                   std::span<const TerminalPhasor> terminal);
/// Uses the terminal phasors carried by the case.
Equilibrium initialize_equilibrium(const SystemCase& sc);

Eigen::VectorXd dynamics_rhs(const SystemCase& sc, const StateVector& x, const InputVector& u);

OutputVector output_map(const SystemCase& sc, const StateVector& x, const PlacementMask& placement);

/// Outputs of every machine, machine-major: entries [4i, 4i+4) hold
/// (e_R, e_I, i_R, i_I) of machine i.
Eigen::VectorXd machine_outputs(const SystemCase& sc, const StateVector& x);

/// Reorders machine-major outputs into the block order used by output_map.
OutputVector select_outputs(std::span<const double> machine_major, const PlacementMask& placement);

/// Two-stage modified Euler (Heun) step of a generic right-hand side.
template <class RhsPrev, class RhsNext>
Eigen::VectorXd heun_step(const RhsPrev& rhs_prev, const RhsNext& rhs_next, const Eigen::VectorXd& x,
                          double dt) {
  const Eigen::VectorXd f0 = rhs_prev(x);
  const Eigen::VectorXd predictor = x + f0 * dt;
  const Eigen::VectorXd f1 = rhs_next(predictor);
  const Eigen::VectorXd averaged = (f1 + f0) / 2.0;
  return x + averaged * dt;
}

StateVector euler_step(const SystemCase& sc, const StateVector& x_prev, const InputVector& u_prev,
                       const InputVector& u_k, double dt);

struct Trajectory {
  double dt = 0.0;
  Eigen::MatrixXd states;   // 4g x (K+1)
  Eigen::MatrixXd outputs;  // 4g x (K+1), machine-major as machine_outputs

  Index samples() const { return states.cols(); }
};

long step_count(double t_f, double dt);

Trajectory simulate(const SystemCase& sc, const StateVector& x0, const InputVector& u, double t_f,
                    double dt);

}  // namespace opp
