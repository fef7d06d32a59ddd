#include "opp/dse.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "opp/error.hpp"

namespace opp {

void Scenario::validate(const SystemCase& sc, double t_f) const {
  const Index g = sc.machine_count();
  if (from < 0 || from >= g || to < 0 || to >= g || from == to)
    throw Error(ErrorKind::InvalidArgument, "scenario must name two distinct machines of the case");
  if (!(fault_start >= 0.0) || !(fault_start <= fault_clear) || !(fault_clear <= t_f))
    throw Error(ErrorKind::InvalidArgument, "scenario needs 0 <= fault_start <= fault_clear <= t_f");
  if (!(severity >= 0.0)) throw Error(ErrorKind::InvalidArgument, "severity must be non-negative");
}

SystemCase faulted_case(const SystemCase& sc, const Scenario& s) {
  SystemCase out = sc;
  auto& Y = out.y_reduced;
  const Complex y_ft = Y(s.from, s.to), y_tf = Y(s.to, s.from);
  Y(s.from, s.to) = s.severity * y_ft;
  Y(s.to, s.from) = s.severity * y_tf;
  Y(s.from, s.from) += (1.0 - s.severity) * y_ft;
  Y(s.to, s.to) += (1.0 - s.severity) * y_tf;
  return out;
}

Eigen::MatrixXd ScenarioData::measurements_for(const PlacementMask& placement) const {
  const Index T = measurements.cols();
  Eigen::MatrixXd y(4 * placement.count(), T);
  for (Index k = 0; k < T; ++k) {
    const auto col = measurements.col(k);
    y.col(k) = select_outputs({col.data(), static_cast<std::size_t>(col.size())}, placement);
  }
  return y;
}

ScenarioData generate_scenario(const SystemCase& sc, const Equilibrium& eq, const Scenario& scenario,
                               double t_f, double dt, const NoiseModel& noise) {
  scenario.validate(sc, t_f);
  const long K = step_count(t_f, dt);
  ScenarioData data;
  data.schedule.normal = sc;
  data.schedule.faulted = faulted_case(sc, scenario);
  data.schedule.fault_first = std::lround(scenario.fault_start / dt);
  data.schedule.fault_end = std::lround(scenario.fault_clear / dt);
  data.u = eq.u;
  data.dt = dt;

  const Index g = sc.machine_count();
  data.truth.dt = dt;
  data.truth.states.resize(4 * g, K + 1);
  data.truth.outputs.resize(4 * g, K + 1);
  StateVector x = eq.x;
  for (long k = 0; k <= K; ++k) {
    if (k > 0) {
      try {
        x = euler_step(data.schedule.at(k - 1), x, eq.u, eq.u, dt);
      } catch (const NonFiniteStateError&) {
        throw NonFiniteStateError(k, "scenario simulation became non-finite at step " + std::to_string(k));
      }
    }
    data.truth.states.col(k) = x;
    data.truth.outputs.col(k) = machine_outputs(data.schedule.at(k), x);
  }

  data.measurements = data.truth.outputs;
  if (noise.measurement_std > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, noise.measurement_std);
    for (Index k = 0; k < data.measurements.cols(); ++k)
      for (Index r = 0; r < data.measurements.rows(); ++r) data.measurements(r, k) += gauss(rng);
  }
  return data;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd rotor_angles(const Eigen::MatrixXd& states, Index g) { return states.topRows(g); }

double avg_rotor_angle_error(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta) {
  if (est_delta.rows() != true_delta.rows() || est_delta.cols() != true_delta.cols())
    throw Error(ErrorKind::LengthMismatch, "estimated and true angle series differ in shape");
  if (est_delta.size() == 0) return 0.0;
  const double sq = (est_delta - true_delta).squaredNorm();
  return std::sqrt(sq / static_cast<double>(est_delta.rows() * est_delta.cols()));
}

std::vector<bool> convergent_angles(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta,
                                    double dt, const ConvergenceCriterion& c) {
  if (est_delta.rows() != true_delta.rows() || est_delta.cols() != true_delta.cols())
    throw Error(ErrorKind::LengthMismatch, "estimated and true angle series differ in shape");
  const Index T = true_delta.cols();
  const double span = static_cast<double>(T - 1) * dt;
  if (T == 0 || c.window > span + 1e-9 * dt)
    throw Error(ErrorKind::InvalidArgument, "convergence window exceeds the trajectory span");
  // first sample with t_k >= t_end - window
  const Index first = std::max<Index>(0, (T - 1) - static_cast<Index>(std::llround(c.window / dt)));
  std::vector<bool> ok(static_cast<std::size_t>(true_delta.rows()), true);
  for (Index i = 0; i < true_delta.rows(); ++i)
    for (Index k = first; k < T; ++k) {
      const double truth = true_delta(i, k);
      const double err = std::abs(est_delta(i, k) - truth);
      const bool pass = std::abs(truth) < 1e-9 ? err < c.absolute_fallback : err < c.threshold * std::abs(truth);
      if (!pass) {
        ok[static_cast<std::size_t>(i)] = false;
        break;
      }
    }
  return ok;
}

Index convergent_angle_count(const Eigen::MatrixXd& est_delta, const Eigen::MatrixXd& true_delta, double dt,
                             const ConvergenceCriterion& criterion) {
  const auto ok = convergent_angles(est_delta, true_delta, dt, criterion);
  return static_cast<Index>(std::count(ok.begin(), ok.end(), true));
}

// ---------------------------------------------------------------------------

EstimationResult srukf_run(const ScenarioData& data, const PlacementMask& placement,
                           const StateVector& x_init_guess, const NoiseModel& noise,
                           const FilterSettings& settings, const ConvergenceCriterion& criterion) {
  const SystemCase& sc = data.schedule.normal;
  const Index g = sc.machine_count();
  const StateLayout L{g};
  if (x_init_guess.size() != L.size())
    throw Error(ErrorKind::DimensionMismatch, "initial guess not dimensioned for case");
  if (placement.size() != g) throw Error(ErrorKind::DimensionMismatch, "placement length differs from g");

  const std::vector<Index> dyn = sc.dynamic_indices();
  const Index n = static_cast<Index>(dyn.size());
  const Index T = data.measurements.cols();
  const Eigen::MatrixXd y_all = data.measurements_for(placement);
  const Index p = y_all.rows();

  Eigen::VectorXd init_std(n), proc_std(n);
  for (Index j = 0; j < n; ++j) {
    const Index s = dyn[j];
    if (s < L.omega(0)) {
      init_std[j] = settings.init_std_delta;
      proc_std[j] = noise.process_std_delta;
    } else if (s < L.e_qp(0)) {
      init_std[j] = settings.init_std_omega;
      proc_std[j] = noise.process_std_omega;
    } else {
      init_std[j] = settings.init_std_eprime;
      proc_std[j] = noise.process_std_eprime;
    }
  }
  const Eigen::MatrixXd sqrt_q = proc_std.asDiagonal();
  const double r_std = std::max(noise.measurement_std, settings.min_measurement_std);
  const Eigen::MatrixXd sqrt_r = Eigen::MatrixXd::Identity(p, p) * r_std;

  // The filter works with speed deviations omega - omega_0. With the small
  // default alpha the sigma-point weights are of order 1/alpha^2, and rounding
  // at the scale of omega_0 would otherwise leak into the estimate.
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  for (Index j = 0; j < n; ++j)
    if (dyn[j] >= L.omega(0) && dyn[j] < L.e_qp(0)) offset[j] = sc.omega_0;

  const StateVector full = x_init_guess;
  auto expand = [&](const Eigen::VectorXd& z) {
    StateVector x = full;
    for (Index j = 0; j < n; ++j) x[dyn[j]] = z[j] + offset[j];
    return x;
  };
  auto reduce = [&](const StateVector& x) {
    Eigen::VectorXd z(n);
    for (Index j = 0; j < n; ++j) z[j] = x[dyn[j]] - offset[j];
    return z;
  };
  std::vector<Index> omega_pos(static_cast<std::size_t>(g));
  for (Index j = 0; j < n; ++j)
    if (offset[j] != 0.0) omega_pos[static_cast<std::size_t>(dyn[j] - L.omega(0))] = j;
  auto rates = [&](const SystemCase& net, const Eigen::VectorXd& z) {
    const Eigen::VectorXd f = dynamics_rhs(net, expand(z), data.u);
    Eigen::VectorXd dz(n);
    for (Index j = 0; j < n; ++j) dz[j] = f[dyn[j]];
    // angle rates straight from the deviations, free of the omega_0 round trip
    for (Index i = 0; i < g; ++i) dz[i] = z[omega_pos[static_cast<std::size_t>(i)]];
    return dz;
  };

  SquareRootUkf filter(reduce(x_init_guess), Eigen::MatrixXd(init_std.asDiagonal()), settings.unscented);

  EstimationResult res;
  res.placement = placement;
  res.estimated.resize(L.size(), T);
  res.covariance_condition.reserve(static_cast<std::size_t>(T));
  res.innovation_norm.reserve(static_cast<std::size_t>(T));

  for (Index k = 0; k < T; ++k) {
    double innov = 0.0;
    try {
      if (k > 0) {
        const SystemCase& net = data.schedule.at(k - 1);
        filter.predict(
            [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
              const auto f = [&](const Eigen::VectorXd& v) { return rates(net, v); };
              return heun_step(f, f, z, data.dt);
            },
            sqrt_q);
      }
      if (p > 0) {
        const SystemCase& net = data.schedule.at(k);
        const auto h = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
          return output_map(net, expand(z), placement);
        };
        innov = filter.update(h, y_all.col(k), sqrt_r).norm();
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::FilterDiverged) throw;
      throw Error(ErrorKind::FilterDiverged, std::string(e.what()) + " at step " + std::to_string(k));
    }
    res.innovation_norm.push_back(innov);
    const Eigen::VectorXd d = filter.sqrt_cov().diagonal().cwiseAbs();
    const double lo = d.minCoeff(), hi = d.maxCoeff();
    res.covariance_condition.push_back(lo > 0.0 ? (hi / lo) * (hi / lo)
                                                : std::numeric_limits<double>::infinity());
    res.estimated.col(k) = expand(filter.mean());
  }

  res.truth = data.truth.states;
  if (res.truth.cols() == T) {
    const Eigen::MatrixXd est_d = rotor_angles(res.estimated, g);
    const Eigen::MatrixXd true_d = rotor_angles(res.truth, g);
    res.e_delta = avg_rotor_angle_error(est_d, true_d);
    res.converged = convergent_angles(est_d, true_d, data.dt, criterion);
    res.n_convergent = static_cast<Index>(std::count(res.converged.begin(), res.converged.end(), true));
  }
  return res;
}

// ---------------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t master, Index scenario, int repeat) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(repeat)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool StudyReport::any_diverged() const {
  for (const auto& r : runs)
    if (r.diverged) return true;
  return false;
}

std::string StudyReport::runs_csv() const {
  std::string out = "placement_id,z,measure_used,scenario_id,repeat,e_delta,n_convergent,diverged_flag\n";
  for (const auto& r : runs) {
    out += r.placement_id + ',' + r.z + ',' + r.measure_used + ',' + std::to_string(r.scenario_id) + ',' +
           std::to_string(r.repeat) + ',' + fmt_double(r.e_delta) + ',' + std::to_string(r.n_convergent) + ',' +
           (r.diverged ? "1" : "0") + '\n';
  }
  return out;
}

std::string StudyReport::aggregate_csv() const {
  std::string out = "placement_id,z,measure_used,runs,diverged,mean_e_delta,mean_n_convergent\n";
  for (const auto& a : aggregate) {
    out += a.placement_id + ',' + a.z + ',' + a.measure_used + ',' + std::to_string(a.runs) + ',' +
           std::to_string(a.diverged) + ',' + fmt_double(a.mean_e_delta) + ',' +
           fmt_double(a.mean_n_convergent) + '\n';
  }
  return out;
}

StudyReport run_validation_study(const SystemCase& sc, const Equilibrium& eq,
                                 std::span<const StudyPlacement> placements,
                                 std::span<const Scenario> scenarios, const StudySettings& settings) {
  StudyReport report;
  const Index P = static_cast<Index>(placements.size());
  const Index S = static_cast<Index>(scenarios.size());
  const Index R = settings.repeats;
  for (const auto& s : scenarios) s.validate(sc, settings.t_f);
  for (const auto& pl : placements)
    if (pl.z.size() != sc.machine_count())
      throw Error(ErrorKind::DimensionMismatch, "placement '" + pl.id + "' has the wrong length");

  const Index g = sc.machine_count();
  const StateLayout L{g};
  const Index pairs = S * R;
  if (pairs == 0) return report;
  std::vector<RunRecord> runs(static_cast<std::size_t>(pairs * P));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(pairs));

  auto work = [&](Index pair) {
    const Index s = pair / R;
    const int rep = static_cast<int>(pair % R);
    try {
      std::mt19937_64 rng(run_seed(settings.seed, s, rep));
      StateVector guess = eq.x;
      std::bernoulli_distribution coin(0.5);
      for (Index i = 0; i < g; ++i)
        guess[L.delta(i)] *= 1.0 + (coin(rng) ? 1.0 : -1.0) * settings.init_delta_rel_error;
      NoiseModel noise = settings.noise;
      noise.seed = rng();
      const ScenarioData data = generate_scenario(sc, eq, scenarios[s], settings.t_f, settings.dt, noise);
      for (Index p = 0; p < P; ++p) {
        RunRecord rec;
        rec.placement_id = placements[p].id;
        rec.z = placements[p].z.to_string();
        rec.measure_used = placements[p].measure_used;
        rec.scenario_id = s;
        rec.repeat = rep;
        try {
          const EstimationResult est =
              srukf_run(data, placements[p].z, guess, noise, settings.filter, settings.criterion);
          rec.e_delta = est.e_delta;
          rec.n_convergent = est.n_convergent;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::FilterDiverged && e.kind() != ErrorKind::NonFiniteState) throw;
          rec.diverged = true;
          rec.e_delta = std::numeric_limits<double>::quiet_NaN();
          rec.n_convergent = 0;
        }
        runs[static_cast<std::size_t>(p * pairs + pair)] = std::move(rec);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(pair)] = std::current_exception();
    }
  };

  const Index workers = std::max<Index>(1, std::min<Index>(settings.jobs, pairs));
  if (workers == 1) {
    for (Index i = 0; i < pairs; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (Index i = w; i < pairs; i += workers) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  report.runs = std::move(runs);
  for (Index p = 0; p < P; ++p) {
    AggregateRecord a;
    a.placement_id = placements[p].id;
    a.z = placements[p].z.to_string();
    a.measure_used = placements[p].measure_used;
    double sum_e = 0.0, sum_n = 0.0;
    Index ok = 0;
    for (Index i = 0; i < pairs; ++i) {
      const auto& r = report.runs[static_cast<std::size_t>(p * pairs + i)];
      ++a.runs;
      sum_n += static_cast<double>(r.n_convergent);
      if (r.diverged) {
        ++a.diverged;
      } else {
        sum_e += r.e_delta;
        ++ok;
      }
    }
    a.mean_e_delta = ok ? sum_e / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
    a.mean_n_convergent = a.runs ? sum_n / static_cast<double>(a.runs) : 0.0;
    report.aggregate.push_back(std::move(a));
  }
  return report;
}

}  // namespace opp
