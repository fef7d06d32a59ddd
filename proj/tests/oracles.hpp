#pragma once

// Reference computations used as test oracles. They are written directly
// from the model equations with std::complex arithmetic and plain loops and
// share no code with the library beyond its data structures.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opp/model.hpp"

namespace oracle {

using cd = std::complex<double>;

inline std::string case_path(const std::string& name) { return std::string(OPP_CASES_DIR) + "/" + name + ".json"; }

struct Algebra {
  std::vector<double> iq, id, eq, ed, te;
  std::vector<cd> cur;
};

inline Algebra algebra(const opp::SystemCase& sc, const Eigen::VectorXd& x) {
  const int g = static_cast<int>(sc.machines.size());
  std::vector<cd> psi(g);
  for (int i = 0; i < g; ++i) {
    const double d = x[i], eqp = x[2 * g + i], edp = x[3 * g + i];
    // internal source in the network frame: (e'_d + j e'_q) rotated by delta - pi/2
    psi[i] = cd(edp, eqp) * std::polar(1.0, d) * cd(0, -1);
  }
  Algebra a;
  a.cur.assign(g, 0.0);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) a.cur[i] += sc.y_reduced(i, j) * psi[j];
  for (int i = 0; i < g; ++i) {
    const auto& m = sc.machines[i];
    const double r = sc.s_b / m.S_N;
    // machine frame current: i_d + j i_q = I * exp(-j(delta - pi/2)) on machine base
    const cd dq = r * a.cur[i] * std::polar(1.0, -x[i]) * cd(0, 1);
    const double id = dq.real(), iq = dq.imag();
    const double eq = x[2 * g + i] - m.x_dp * id;
    const double ed = x[3 * g + i] + m.x_qp * iq;
    a.id.push_back(id);
    a.iq.push_back(iq);
    a.eq.push_back(eq);
    a.ed.push_back(ed);
    a.te.push_back(r * (eq * iq + ed * id));
  }
  return a;
}

inline Eigen::VectorXd rhs(const opp::SystemCase& sc, const Eigen::VectorXd& x, const opp::InputVector& u) {
  const int g = static_cast<int>(sc.machines.size());
  const Algebra a = algebra(sc, x);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(4 * g);
  for (int i = 0; i < g; ++i) {
    const auto& m = sc.machines[i];
    const double w = x[g + i], w0 = sc.omega_0;
    f[i] = w - w0;
    f[g + i] = (u.T_m[i] - a.te[i] - m.K_D * (w - w0) / w0) * w0 / (2 * m.H);
    if (m.model_order == opp::ModelOrder::Classical2) continue;
    f[2 * g + i] = (u.E_fd[i] - x[2 * g + i] - (m.x_d - m.x_dp) * a.id[i]) / m.T_d0p;
    f[3 * g + i] = ((m.x_q - m.x_qp) * a.iq[i] - x[3 * g + i]) / m.T_q0p;
  }
  return f;
}

/// Terminal voltage and current phasors of machine i.
inline std::pair<cd, cd> terminal(const opp::SystemCase& sc, const Eigen::VectorXd& x, int i) {
  const Algebra a = algebra(sc, x);
  const cd e = cd(a.ed[i], a.eq[i]) * std::polar(1.0, x[i]) * cd(0, -1);
  return {e, a.cur[i]};
}

/// Classical RK4, used only as an independent high-accuracy reference.
template <class F>
Eigen::VectorXd rk4(const F& f, Eigen::VectorXd x, double t_f, int steps) {
  const double h = t_f / steps;
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

/// Two-stage modified Euler written out longhand.
template <class F>
Eigen::VectorXd heun(const F& f, Eigen::VectorXd x, double dt, long steps) {
  for (long k = 0; k < steps; ++k) {
    Eigen::VectorXd slope0 = f(x);
    Eigen::VectorXd guess = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) guess[i] += dt * slope0[i];
    Eigen::VectorXd slope1 = f(guess);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.5 * dt * (slope0[i] + slope1[i]);
  }
  return x;
}

/// exp(A t) for a diagonalizable real matrix with real spectrum.
inline Eigen::MatrixXd expm_real_diag(const Eigen::MatrixXd& A, double t) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::MatrixXd V = es.eigenvectors().real();
  const Eigen::VectorXd lam = es.eigenvalues().real();
  Eigen::VectorXd e(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) e[i] = std::exp(lam[i] * t);
  return V * e.asDiagonal() * V.inverse();
}

/// sum_{k=0}^{K} (C e^{A t_k})^T (C e^{A t_k}) dt
inline Eigen::MatrixXd discrete_gramian(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C, double t_f, double dt) {
  const long K = std::lround(t_f / dt);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(A.rows(), A.cols());
  for (long k = 0; k <= K; ++k) {
    const Eigen::MatrixXd O = C * expm_real_diag(A, k * dt);
    W += O.transpose() * O * dt;
  }
  return W;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace oracle
