#include "opp/gramian.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "opp/case_io.hpp"
#include "opp/error.hpp"

namespace opp {

Eigen::VectorXd ObservedSystem::natural_scale() const {
  return Eigen::VectorXd::Ones(static_cast<Index>(perturbable().size()));
}

PowerSystemModel::PowerSystemModel(SystemCase sc, InputVector u)
    : sc_(std::move(sc)), u_(std::move(u)), dynamic_(sc_.dynamic_indices()) {}

Eigen::VectorXd PowerSystemModel::natural_scale() const {
  const StateLayout L{sc_.machine_count()};
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Index>(dynamic_.size()));
  for (std::size_t j = 0; j < dynamic_.size(); ++j)
    if (dynamic_[j] >= L.omega(0) && dynamic_[j] < L.e_qp(0)) scale[static_cast<Index>(j)] = sc_.omega_0;
  return scale;
}

Eigen::VectorXd PowerSystemModel::step(const Eigen::VectorXd& x, double dt) const {
  return euler_step(sc_, x, u_, u_, dt);
}

Eigen::VectorXd PowerSystemModel::outputs(const Eigen::VectorXd& x) const {
  return machine_outputs(sc_, x);
}

LinearSystem::LinearSystem(Eigen::MatrixXd A, Eigen::MatrixXd C, Index outputs_per_sensor)
    : A_(std::move(A)), C_(std::move(C)), q_(outputs_per_sensor) {
  if (A_.rows() != A_.cols() || C_.cols() != A_.rows())
    throw Error(ErrorKind::DimensionMismatch, "linear system matrices do not conform");
  if (q_ < 1 || C_.rows() % q_ != 0)
    throw Error(ErrorKind::DimensionMismatch, "output rows must split evenly into sensors");
  for (Index i = 0; i < A_.rows(); ++i) all_.push_back(i);
}

Eigen::VectorXd LinearSystem::step(const Eigen::VectorXd& x, double dt) const {
  auto f = [this](const Eigen::VectorXd& v) -> Eigen::VectorXd { return A_ * v; };
  return heun_step(f, f, x, dt);
}

LinearSystem bundled_linear_system() {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, 0.5,
        0.0, -2.0;
  Eigen::MatrixXd C(2, 2);
  C << 1.0, 0.0,
       1.0, 1.0;
  return LinearSystem(A, C, 1);
}

// ---------------------------------------------------------------------------

PerturbationScheme PerturbationScheme::standard(Index n, double t_f, double dt) {
  PerturbationScheme s;
  s.directions = {Eigen::MatrixXd::Identity(n, n)};
  s.magnitudes = {1e-3};
  s.t_f = t_f;
  s.dt = dt;
  return s;
}

void PerturbationScheme::validate(Index n) const {
  if (directions.empty() || magnitudes.empty())
    throw Error(ErrorKind::SchemeDimensionMismatch, "scheme needs at least one direction and one size");
  for (const auto& T : directions) {
    if (T.rows() != n || T.cols() != n)
      throw Error(ErrorKind::SchemeDimensionMismatch,
                  "direction matrix is " + std::to_string(T.rows()) + "x" + std::to_string(T.cols()) +
                      ", system has n = " + std::to_string(n));
    const double dev = (T.transpose() * T - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (dev > 1e-10) throw Error(ErrorKind::InvalidArgument, "direction matrix is not orthogonal");
  }
  for (double c : magnitudes)
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "perturbation sizes must be positive");
  step_count(t_f, dt);
}

std::string PerturbationScheme::id() const {
  std::ostringstream os;
  os.precision(17);
  os << "r=" << directions.size() << ";s=" << magnitudes.size() << ";c=";
  for (double c : magnitudes) os << c << ',';
  os << ";t_f=" << t_f << ";dt=" << dt << ";scale_omega=" << scale_omega << ";T=";
  for (const auto& T : directions)
    for (Index i = 0; i < T.size(); ++i) os << T.data()[i] << ',';
  return hex64(fnv1a64(os.str()));
}

// ---------------------------------------------------------------------------

namespace {

class DivergedRun : public std::exception {};

/// Output time series, sample-major: column k holds the outputs at step k.
Eigen::MatrixXd run_outputs(const ObservedSystem& sys, Eigen::VectorXd x, double dt, long K) {
  const Eigen::VectorXd y0 = sys.outputs(x);
  Eigen::MatrixXd ys(y0.size(), K + 1);
  ys.col(0) = y0;
  for (long k = 1; k <= K; ++k) {
    try {
      x = sys.step(x, dt);
    } catch (const NonFiniteStateError&) {
      throw DivergedRun();
    }
    ys.col(k) = sys.outputs(x);
    if (!ys.col(k).allFinite()) throw DivergedRun();
  }
  return ys;
}

template <class Fn>
void parallel_for(Index count, int jobs, Fn&& fn) {
  const Index workers = std::max<Index>(1, std::min<Index>(jobs, count));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (Index i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

PerturbationResponses simulate_responses(const ObservedSystem& sys, const PerturbationScheme& scheme,
                                         const Eigen::VectorXd& x0, int jobs) {
  const auto& pert = sys.perturbable();
  const Index n = static_cast<Index>(pert.size());
  scheme.validate(n);
  if (x0.size() != sys.state_dim())
    throw Error(ErrorKind::DimensionMismatch, "initial state not dimensioned for system");

  const long K = step_count(scheme.t_f, scheme.dt);
  const Index r = static_cast<Index>(scheme.directions.size());
  const Index s = static_cast<Index>(scheme.magnitudes.size());
  const Eigen::VectorXd unit = scheme.scale_omega ? sys.natural_scale() : Eigen::VectorXd::Ones(n);

  PerturbationResponses out;
  out.n_ = n;
  out.sensors_ = sys.sensor_count();
  out.q_ = sys.outputs_per_sensor();
  out.samples_ = K + 1;
  out.simulations_ = r * s * n + 1;
  out.scheme_ = scheme;

  Eigen::MatrixXd nominal;
  try {
    nominal = run_outputs(sys, x0, scheme.dt, K);
  } catch (const DivergedRun&) {
    throw Error(ErrorKind::SimulationDiverged, "unperturbed simulation diverged");
  }
  const Index rows = nominal.size();

  out.deviations_.assign(static_cast<std::size_t>(r * s), Eigen::MatrixXd(rows, n));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(r * s * n));

  parallel_for(r * s * n, jobs, [&](Index job) {
    const Index lm = job / n, i = job % n;
    const Index l = lm / s, m = lm % s;
    try {
      const Eigen::VectorXd dir = scheme.directions[l].col(i).cwiseProduct(unit) * scheme.magnitudes[m];
      Eigen::VectorXd x = x0;
      for (Index j = 0; j < n; ++j) x[pert[j]] += dir[j];
      const Eigen::MatrixXd ys = run_outputs(sys, x, scheme.dt, K);
      // column-major storage of ys already orders rows as (k, sensor, output)
      out.deviations_[lm].col(i) = (ys - nominal).reshaped();
    } catch (const DivergedRun&) {
      std::ostringstream os;
      os << "perturbed simulation diverged (i=" << i << ", l=" << l << ", m=" << m << ")";
      failures[job] = std::make_exception_ptr(Error(ErrorKind::SimulationDiverged, os.str()));
    } catch (...) {
      failures[job] = std::current_exception();
    }
  });
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

Gramian PerturbationResponses::gramian(const PlacementMask& z) const {
  if (z.size() != sensors_)
    throw Error(ErrorKind::LengthMismatch, "placement length differs from sensor count");
  const auto sel = z.indices();
  const Index chosen = static_cast<Index>(sel.size());
  const Index r = static_cast<Index>(scheme_.directions.size());
  const Index s = static_cast<Index>(scheme_.magnitudes.size());

  Gramian W{Eigen::MatrixXd::Zero(n_, n_), z, scheme_.id()};
  if (chosen == 0) return W;

  Eigen::MatrixXd picked(samples_ * chosen * q_, n_);
  Eigen::MatrixXd cross(n_, n_);
  for (Index l = 0; l < r; ++l) {
    const auto& T = scheme_.directions[l];
    for (Index m = 0; m < s; ++m) {
      const auto& D = deviations_[l * s + m];
      Index row = 0;
      for (Index k = 0; k < samples_; ++k)
        for (Index sensor : sel) {
          picked.middleRows(row, q_) = D.middleRows((k * sensors_ + sensor) * q_, q_);
          row += q_;
        }
      cross.setZero();
      cross.selfadjointView<Eigen::Lower>().rankUpdate(picked.transpose());
      cross.triangularView<Eigen::StrictlyUpper>() = cross.transpose();
      const double c = scheme_.magnitudes[m];
      const double weight = scheme_.dt / (static_cast<double>(r * s) * c * c);
      W.matrix.noalias() += weight * (T * cross * T.transpose());
    }
  }
  W.matrix = 0.5 * (W.matrix + W.matrix.transpose()).eval();
  return W;
}

Gramian empirical_gramian(const ObservedSystem& sys, const PlacementMask& placement,
                          const PerturbationScheme& scheme, const Eigen::VectorXd& x0, int jobs) {
  return simulate_responses(sys, scheme, x0, jobs).gramian(placement);
}

std::vector<Gramian> per_generator_gramians(const PerturbationResponses& responses) {
  std::vector<Gramian> parts;
  parts.reserve(static_cast<std::size_t>(responses.sensors()));
  for (Index i = 0; i < responses.sensors(); ++i)
    parts.push_back(responses.gramian(PlacementMask::unit(responses.sensors(), i)));
  return parts;
}

std::vector<Gramian> per_generator_gramians(const ObservedSystem& sys, const PerturbationScheme& scheme,
                                            const Eigen::VectorXd& x0, int jobs) {
  return per_generator_gramians(simulate_responses(sys, scheme, x0, jobs));
}

Gramian assemble_gramian(const PlacementMask& z, std::span<const Gramian> parts) {
  if (static_cast<Index>(parts.size()) != z.size() || parts.empty())
    throw Error(ErrorKind::LengthMismatch, "need one per-generator gramian per placement entry");
  const Index n = parts.front().dim();
  Gramian W{Eigen::MatrixXd::Zero(n, n), z, parts.front().scheme_id};
  for (Index i = 0; i < z.size(); ++i) {
    if (parts[static_cast<std::size_t>(i)].dim() != n)
      throw Error(ErrorKind::LengthMismatch, "per-generator gramians differ in dimension");
    if (z[i]) W.matrix += parts[static_cast<std::size_t>(i)].matrix;
  }
  return W;
}

bool is_symmetric_psd(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) return false;
  if (W.size() == 0) return true;
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, lmax);
}

std::string matrix_to_csv(const Eigen::MatrixXd& M) {
  std::string out;
  char buf[40];
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", M(r, c));
      if (c) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace opp
