#include "opp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opp/error.hpp"

namespace opp {

std::vector<Index> SystemCase::dynamic_indices() const {
  const StateLayout layout{machine_count()};
  std::vector<Index> idx;
  for (Index i = 0; i < layout.g; ++i) idx.push_back(layout.delta(i));
  for (Index i = 0; i < layout.g; ++i) idx.push_back(layout.omega(i));
  for (Index i = 0; i < layout.g; ++i)
    if (!machines[i].is_classical()) idx.push_back(layout.e_qp(i));
  for (Index i = 0; i < layout.g; ++i)
    if (!machines[i].is_classical()) idx.push_back(layout.e_dp(i));
  return idx;
}

Index SystemCase::dynamic_dim() const {
  Index n = 0;
  for (const auto& m : machines) n += m.is_classical() ? 2 : 4;
  return n;
}

namespace {

void require_positive(double v, const char* what, int machine) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << what << " must be positive (machine " << machine << ", got " << v << ")";
    throw Error(ErrorKind::NonPositiveConstant, os.str());
  }
}

}  // namespace

void SystemCase::validate() const {
  const Index g = machine_count();
  if (g < 1) throw Error(ErrorKind::MissingField, "case has no machines");
  if (y_reduced.rows() != g || y_reduced.cols() != g) {
    std::ostringstream os;
    os << "y_reduced is " << y_reduced.rows() << "x" << y_reduced.cols() << " but case has " << g
       << " machines";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  require_positive(omega_0, "omega_0", 0);
  require_positive(s_b, "s_b", 0);
  for (const auto& m : machines) {
    require_positive(m.H, "H", m.index);
    require_positive(m.S_N, "S_N", m.index);
    require_positive(m.x_dp, "x_dp", m.index);
    require_positive(m.x_qp, "x_qp", m.index);
    if (!m.is_classical()) {
      require_positive(m.T_d0p, "T_d0p", m.index);
      require_positive(m.T_q0p, "T_q0p", m.index);
      if (m.x_d < m.x_dp) throw Error(ErrorKind::NonPositiveConstant, "x_d < x_dp");
      if (m.x_q < m.x_qp) throw Error(ErrorKind::NonPositiveConstant, "x_q < x_qp");
    }
  }
  if (inputs) {
    if (inputs->T_m.size() != g || inputs->E_fd.size() != g)
      throw Error(ErrorKind::DimensionMismatch, "inputs must have one entry per machine");
  }
  if (!terminal.empty() && static_cast<Index>(terminal.size()) != g)
    throw Error(ErrorKind::DimensionMismatch, "terminal must have one entry per machine");
}

// ---------------------------------------------------------------------------

PlacementMask::PlacementMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_)
    if (b > 1) throw Error(ErrorKind::InvalidArgument, "placement entries must be 0 or 1");
}

PlacementMask PlacementMask::none(Index g) {
  return PlacementMask(std::vector<std::uint8_t>(static_cast<std::size_t>(g), 0));
}

PlacementMask PlacementMask::all(Index g) {
  return PlacementMask(std::vector<std::uint8_t>(static_cast<std::size_t>(g), 1));
}

PlacementMask PlacementMask::unit(Index g, Index i) {
  auto z = none(g);
  z.set(i, true);
  return z;
}

PlacementMask PlacementMask::from_indices(Index g, std::span<const Index> indices) {
  auto z = none(g);
  for (Index i : indices) z.set(i, true);
  return z;
}

Index PlacementMask::count() const {
  return static_cast<Index>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void PlacementMask::set(Index i, bool on) {
  if (i < 0 || i >= size()) throw Error(ErrorKind::InvalidArgument, "placement index out of range");
  bits_[static_cast<std::size_t>(i)] = on ? 1 : 0;
}

std::vector<Index> PlacementMask::indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if ((*this)[i]) out.push_back(i);
  return out;
}

std::string PlacementMask::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

// ---------------------------------------------------------------------------

MachineAlgebra machine_algebra(const SystemCase& sc, const StateVector& x) {
  const StateLayout L{sc.machine_count()};
  const Index g = L.g;
  MachineAlgebra a;
  a.psi.resize(g);
  for (Index i = 0; i < g; ++i) {
    const double d = x[L.delta(i)];
    const double s = std::sin(d), c = std::cos(d);
    const double eq = x[L.e_qp(i)], ed = x[L.e_dp(i)];
    a.psi[i] = Complex(ed * s + eq * c, eq * s - ed * c);
  }
  a.current = sc.y_reduced * a.psi;
  a.i_q.resize(g);
  a.i_d.resize(g);
  a.e_q.resize(g);
  a.e_d.resize(g);
  a.T_e.resize(g);
  for (Index i = 0; i < g; ++i) {
    const auto& m = sc.machines[i];
    const double scale = sc.s_b / m.S_N;
    const double d = x[L.delta(i)];
    const double s = std::sin(d), c = std::cos(d);
    const double i_r = a.current[i].real(), i_i = a.current[i].imag();
    a.i_q[i] = scale * (i_i * s + i_r * c);
    a.i_d[i] = scale * (i_r * s - i_i * c);
    a.e_q[i] = x[L.e_qp(i)] - m.x_dp * a.i_d[i];
    a.e_d[i] = x[L.e_dp(i)] + m.x_qp * a.i_q[i];
    const double p_e = a.e_q[i] * a.i_q[i] + a.e_d[i] * a.i_d[i];
    a.T_e[i] = scale * p_e;
  }
  return a;
}

Eigen::VectorXd dynamics_rhs(const SystemCase& sc, const StateVector& x, const InputVector& u) {
  const StateLayout L{sc.machine_count()};
  if (x.size() != L.size() || u.T_m.size() != L.g || u.E_fd.size() != L.g)
    throw Error(ErrorKind::DimensionMismatch, "state or input not dimensioned for case");
  const MachineAlgebra a = machine_algebra(sc, x);
  const double w0 = sc.omega_0;
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(L.size());
  for (Index i = 0; i < L.g; ++i) {
    const auto& m = sc.machines[i];
    const double dw = x[L.omega(i)] - w0;
    dx[L.delta(i)] = dw;
    dx[L.omega(i)] = w0 / (2.0 * m.H) * (u.T_m[i] - a.T_e[i] - m.K_D / w0 * dw);
    if (m.is_classical()) continue;
    dx[L.e_qp(i)] = (u.E_fd[i] - x[L.e_qp(i)] - (m.x_d - m.x_dp) * a.i_d[i]) / m.T_d0p;
    dx[L.e_dp(i)] = (-x[L.e_dp(i)] + (m.x_q - m.x_qp) * a.i_q[i]) / m.T_q0p;
  }
  return dx;
}

Eigen::VectorXd machine_outputs(const SystemCase& sc, const StateVector& x) {
  const StateLayout L{sc.machine_count()};
  const MachineAlgebra a = machine_algebra(sc, x);
  Eigen::VectorXd y(4 * L.g);
  for (Index i = 0; i < L.g; ++i) {
    const double d = x[L.delta(i)];
    const double s = std::sin(d), c = std::cos(d);
    y[4 * i + 0] = a.e_d[i] * s + a.e_q[i] * c;
    y[4 * i + 1] = a.e_q[i] * s - a.e_d[i] * c;
    y[4 * i + 2] = a.current[i].real();
    y[4 * i + 3] = a.current[i].imag();
  }
  return y;
}

OutputVector select_outputs(std::span<const double> machine_major, const PlacementMask& placement) {
  const auto idx = placement.indices();
  const Index p = static_cast<Index>(idx.size());
  OutputVector y(4 * p);
  for (Index block = 0; block < 4; ++block)
    for (Index k = 0; k < p; ++k)
      y[block * p + k] = machine_major[static_cast<std::size_t>(4 * idx[k] + block)];
  return y;
}

OutputVector output_map(const SystemCase& sc, const StateVector& x, const PlacementMask& placement) {
  if (placement.size() != sc.machine_count())
    throw Error(ErrorKind::DimensionMismatch, "placement length differs from machine count");
  if (placement.count() == 0) return OutputVector(0);
  const Eigen::VectorXd all = machine_outputs(sc, x);
  return select_outputs({all.data(), static_cast<std::size_t>(all.size())}, placement);
}

// ---------------------------------------------------------------------------

Equilibrium initialize_equilibrium(const SystemCase& sc, std::span<const TerminalPhasor> terminal) {
  const StateLayout L{sc.machine_count()};
  if (static_cast<Index>(terminal.size()) != L.g)
    throw Error(ErrorKind::DimensionMismatch, "need one terminal phasor pair per machine");

  Equilibrium eq;
  eq.x = StateVector::Zero(L.size());
  eq.u.T_m.resize(L.g);
  eq.u.E_fd.resize(L.g);

  for (Index i = 0; i < L.g; ++i) {
    const auto& m = sc.machines[i];
    const double scale = sc.s_b / m.S_N;
    const Complex e_t = terminal[i].voltage;
    const Complex i_m = scale * terminal[i].current;
    // The q-axis lines up with E_t + j x_q I for the transient model (e'_d
    // settles at (x_q - x'_q) i_q), and with E_t + j x'_q I when e'_d = 0.
    const double x_align = m.is_classical() ? m.x_qp : m.x_q;
    const Complex q_axis = e_t + Complex(0.0, x_align) * i_m;
    if (std::abs(q_axis) < 1e-12)
      throw Error(ErrorKind::SingularInitialization,
                  "cannot determine rotor angle of machine " + std::to_string(m.index));
    const double delta = std::arg(q_axis);
    const Complex rot = std::polar(1.0, -delta);
    const Complex vdq = e_t * rot;  // e_q - j e_d
    const Complex idq = i_m * rot;  // i_q - j i_d
    const double e_q = vdq.real(), e_d = -vdq.imag();
    const double i_q = idq.real(), i_d = -idq.imag();
    const double e_qp = e_q + m.x_dp * i_d;
    const double e_dp = m.is_classical() ? 0.0 : e_d - m.x_qp * i_q;

    eq.x[L.delta(i)] = delta;
    eq.x[L.omega(i)] = sc.omega_0;
    eq.x[L.e_qp(i)] = e_qp;
    eq.x[L.e_dp(i)] = e_dp;
    eq.u.T_m[i] = scale * (e_q * i_q + e_d * i_d);
    eq.u.E_fd[i] = m.is_classical() ? e_qp : e_qp + (m.x_d - m.x_dp) * i_d;
  }

  const MachineAlgebra a = machine_algebra(sc, eq.x);
  double network_residual = 0.0;
  for (Index i = 0; i < L.g; ++i)
    network_residual = std::max(network_residual, std::abs(a.current[i] - terminal[i].current));
  const Eigen::VectorXd f = dynamics_rhs(sc, eq.x, eq.u);
  const double rhs_residual = f.lpNorm<Eigen::Infinity>();
  if (!(network_residual <= kEquilibriumTol) || !(rhs_residual <= kEquilibriumTol)) {
    std::ostringstream os;
    os << "terminal phasors are not an equilibrium of the reduced network (network residual "
       << network_residual << ", derivative residual " << rhs_residual << ")";
    throw Error(ErrorKind::NotAnEquilibrium, os.str());
  }
  return eq;
}

Equilibrium initialize_equilibrium(const SystemCase& sc) {
  if (sc.terminal.empty())
    throw Error(ErrorKind::MissingField, "case carries no terminal phasors");
  return initialize_equilibrium(sc, sc.terminal);
}

// ---------------------------------------------------------------------------

StateVector euler_step(const SystemCase& sc, const StateVector& x_prev, const InputVector& u_prev,
                       const InputVector& u_k, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  StateVector next = heun_step([&](const Eigen::VectorXd& x) { return dynamics_rhs(sc, x, u_prev); },
                               [&](const Eigen::VectorXd& x) { return dynamics_rhs(sc, x, u_k); },
                               x_prev, dt);
  if (!next.allFinite()) throw NonFiniteStateError(-1, "state became non-finite");
  return next;
}

long step_count(double t_f, double dt) {
  if (!(t_f > 0.0) || !(dt > 0.0))
    throw Error(ErrorKind::InvalidArgument, "horizon and step must be positive");
  return std::lround(t_f / dt);
}

Trajectory simulate(const SystemCase& sc, const StateVector& x0, const InputVector& u, double t_f,
                    double dt) {
  const long K = step_count(t_f, dt);
  Trajectory tr;
  tr.dt = dt;
  tr.states.resize(x0.size(), K + 1);
  tr.outputs.resize(4 * sc.machine_count(), K + 1);
  StateVector x = x0;
  tr.states.col(0) = x;
  tr.outputs.col(0) = machine_outputs(sc, x);
  for (long k = 1; k <= K; ++k) {
    try {
      x = euler_step(sc, x, u, u, dt);
    } catch (const NonFiniteStateError&) {
      throw NonFiniteStateError(k, "state became non-finite at step " + std::to_string(k));
    }
    tr.states.col(k) = x;
    tr.outputs.col(k) = machine_outputs(sc, x);
  }
  return tr;
}

}  // namespace opp
