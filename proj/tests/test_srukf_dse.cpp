#include <doctest.h>

#include <cmath>
#include <random>

#include "opp/case_io.hpp"
#include "opp/dse.hpp"
#include "opp/error.hpp"
#include "opp/srukf.hpp"
#include "oracles.hpp"

using namespace opp;

namespace {

Eigen::MatrixXd random_matrix(Index r, Index c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd M(r, c);
  for (Index i = 0; i < M.size(); ++i) M.data()[i] = gauss(rng);
  return M;
}

struct Loaded {
  SystemCase sc;
  Equilibrium eq;
};

Loaded load(const std::string& name) {
  SystemCase sc = load_case_file(oracle::case_path(name));
  Equilibrium eq = initialize_equilibrium(sc);
  return {std::move(sc), std::move(eq)};
}

NoiseModel silent() {
  NoiseModel n;
  n.process_std_delta = n.process_std_omega = n.process_std_eprime = 0.0;
  n.measurement_std = 0.0;
  return n;
}

}  // namespace

TEST_CASE("rank-one Cholesky update and downdate") {
  const Eigen::MatrixXd B = random_matrix(5, 5, 1);
  const Eigen::MatrixXd P = B * B.transpose() + Eigen::MatrixXd::Identity(5, 5);
  const Eigen::VectorXd v = 0.3 * random_matrix(5, 1, 2);
  Eigen::MatrixXd L = P.llt().matrixL();
  REQUIRE(cholesky_update(L, v, 2.0));
  CHECK(oracle::rel_diff(L * L.transpose(), P + 2.0 * v * v.transpose()) <= 1e-13);
  CHECK(L.isLowerTriangular());
  REQUIRE(cholesky_update(L, v, -2.0));
  CHECK(oracle::rel_diff(L * L.transpose(), P) <= 1e-12);
  // a downdate that would leave an indefinite matrix is refused
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  CHECK_FALSE(cholesky_update(I, Eigen::Vector2d(2.0, 0.0), -1.0));
}

TEST_CASE("QR factor reproduces the Gram matrix") {
  const Eigen::MatrixXd A = random_matrix(9, 4, 3);
  const Eigen::MatrixXd S = qr_factor(A);
  CHECK(S.isLowerTriangular());
  for (Index i = 0; i < 4; ++i) CHECK(S(i, i) >= 0.0);
  CHECK(oracle::rel_diff(S * S.transpose(), A.transpose() * A) <= 1e-13);
}

TEST_CASE("on a linear model the square-root UKF equals the Kalman filter") {
  Eigen::Matrix3d F;
  F << 0.9, 0.1, 0.0, -0.2, 0.95, 0.05, 0.0, 0.1, 0.8;
  Eigen::MatrixXd H(2, 3);
  H << 1, 0, 0, 0, 1, 1;
  const Eigen::Matrix3d Q = Eigen::Vector3d(0.01, 0.02, 0.005).asDiagonal();
  const Eigen::Matrix2d R = Eigen::Vector2d(0.1, 0.2).asDiagonal();
  Eigen::Vector3d m(1.0, -0.5, 0.2);
  Eigen::Matrix3d P = Eigen::Vector3d(1.0, 0.5, 0.25).asDiagonal();

  SquareRootUkf ukf(m, P.llt().matrixL());
  const Eigen::MatrixXd sqQ = Q.llt().matrixL(), sqR = R.llt().matrixL();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 25; ++k) {
    ukf.predict([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return F * x; }, sqQ);
    m = F * m;
    P = F * P * F.transpose() + Q;
    const Eigen::Vector2d y(gauss(rng), gauss(rng));
    ukf.update([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return H * x; }, y, sqR);
    const Eigen::Matrix2d Syy = H * P * H.transpose() + R;
    const Eigen::MatrixXd K = P * H.transpose() * Syy.inverse();
    m += K * (y - H * m);
    P = P - K * Syy * K.transpose();
    CHECK((ukf.mean() - m).norm() <= 1e-6 * std::max(1.0, m.norm()));
    CHECK(oracle::rel_diff(ukf.covariance(), P) <= 1e-6);
  }
}

TEST_CASE("rotor-angle error") {
  Eigen::MatrixXd t(1, 2), e(1, 2);
  t << 1.0, 2.0;
  e << 1.3, 2.4;
  CHECK(avg_rotor_angle_error(e, t) == doctest::Approx(std::sqrt(0.25 / 2)).epsilon(1e-14));
  CHECK(avg_rotor_angle_error(t, t) == 0.0);
  const Eigen::MatrixXd T = random_matrix(3, 7, 9);
  CHECK(avg_rotor_angle_error(T.array() + 0.125, T) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK_THROWS_AS(avg_rotor_angle_error(T, t), Error);
}

TEST_CASE("convergent angle count") {
  const double dt = 0.1;
  Eigen::MatrixXd t(3, 21);
  for (Index k = 0; k < 21; ++k) t.col(k) << 1.0 + 0.01 * k, -0.5, 0.0;
  CHECK(convergent_angle_count(t, t, dt) == 3);
  Eigen::MatrixXd e = t;
  e.row(0) *= 1.1;
  CHECK(convergent_angle_count(e, t, dt) == 2);
  // a zero true angle falls back to the absolute tolerance
  e = t;
  e(2, 20) = 5e-4;
  CHECK(convergent_angle_count(e, t, dt) == 3);
  e(2, 20) = 2e-3;
  CHECK(convergent_angle_count(e, t, dt) == 2);
  // errors outside the final second do not count
  e = t;
  e(1, 5) = 0.0;
  CHECK(convergent_angle_count(e, t, dt) == 3);
  e(1, 10) = 0.0;  // t = 1.0 = t_end - window, inside
  CHECK(convergent_angle_count(e, t, dt) == 2);
  ConvergenceCriterion too_long;
  too_long.window = 3.0;
  CHECK_THROWS_AS(convergent_angle_count(t, t, dt, too_long), Error);
}

TEST_CASE("zero-length fault leaves the system at rest") {
  const Loaded d = load("demo2");
  Scenario s;
  s.fault_start = s.fault_clear = 0.5;
  const ScenarioData data = generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent());
  for (Index k = 0; k < data.truth.samples(); ++k)
    CHECK((data.truth.states.col(k) - d.eq.x).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("noise-free measurements are the outputs of the true states") {
  const Loaded d = load("demo10");
  Scenario s;
  s.from = 2;
  s.to = 5;
  const ScenarioData data = generate_scenario(d.sc, d.eq, s, 2.0, 1.0 / 60, silent());
  const PlacementMask z = PlacementMask::all(10);
  const Eigen::MatrixXd y = data.measurements_for(z);
  for (Index k = 0; k < y.cols(); ++k)
    CHECK(y.col(k) == output_map(data.schedule.at(k), data.truth.states.col(k), z));
}

TEST_CASE("fault response matches an independent simulation") {
  const Loaded d = load("demo2");
  Scenario s;  // machines 0-1, 0.1 s to 0.2 s, full short of the coupling
  const ScenarioData data = generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent());

  SystemCase faulted = d.sc;
  const Complex y01 = d.sc.y_reduced(0, 1), y10 = d.sc.y_reduced(1, 0);
  faulted.y_reduced(0, 1) = 0.0;
  faulted.y_reduced(1, 0) = 0.0;
  faulted.y_reduced(0, 0) += y01;
  faulted.y_reduced(1, 1) += y10;
  const auto f_normal = [&](const Eigen::VectorXd& x) { return oracle::rhs(d.sc, x, d.eq.u); };
  const auto f_fault = [&](const Eigen::VectorXd& x) { return oracle::rhs(faulted, x, d.eq.u); };
  const double dt = 1.0 / 60;
  Eigen::VectorXd x = oracle::heun(f_normal, d.eq.x, dt, 6);  // samples 0..5 pre-fault
  x = oracle::heun(f_fault, x, dt, 6);                        // samples 6..11 faulted
  x = oracle::heun(f_normal, x, dt, 300 - 12);
  CHECK((data.truth.states.col(300) - x).lpNorm<Eigen::Infinity>() <= 1e-6);

  // the rotors swing and stay bounded
  const Eigen::VectorXd rel_angle = data.truth.states.row(0) - data.truth.states.row(1);
  const double swing = rel_angle.maxCoeff() - rel_angle.minCoeff();
  CHECK(swing > 1e-3);
  CHECK(swing < 1.0);
}

TEST_CASE("invalid scenarios are rejected") {
  const Loaded d = load("demo2");
  Scenario s;
  s.to = 0;
  CHECK_THROWS_AS(generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent()), Error);
  s = Scenario{};
  s.fault_clear = 6.0;
  CHECK_THROWS_AS(generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent()), Error);
}

TEST_CASE("exact initialization without noise tracks the truth") {
  for (const char* name : {"demo2", "demo10"}) {
    CAPTURE(name);
    const Loaded d = load(name);
    Scenario s;
    const ScenarioData data = generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent());
    FilterSettings fs;
    fs.init_std_delta = fs.init_std_omega = fs.init_std_eprime = 1e-6;
    const EstimationResult r =
        srukf_run(data, PlacementMask::all(d.sc.machine_count()), d.eq.x, silent(), fs);
    for (Index k = 0; k < r.estimated.cols(); ++k)
      CHECK((r.estimated.col(k) - r.truth.col(k)).lpNorm<Eigen::Infinity>() <= 1e-6);

    // a filter told its start is exact has nothing to correct
    fs.init_std_delta = fs.init_std_omega = fs.init_std_eprime = 0.0;
    const EstimationResult exact =
        srukf_run(data, PlacementMask::all(d.sc.machine_count()), d.eq.x, silent(), fs);
    double worst = 0.0;
    for (double v : exact.innovation_norm) worst = std::max(worst, v);
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("perturbed initial angles converge on demo2") {
  const Loaded d = load("demo2");
  const ScenarioData data = generate_scenario(d.sc, d.eq, Scenario{}, 5.0, 1.0 / 60, silent());
  StateVector guess = d.eq.x;
  guess[0] *= 1.1;
  guess[1] *= 0.9;
  const EstimationResult r = srukf_run(data, PlacementMask::all(2), guess, silent());
  for (Index i = 0; i < 2; ++i) {
    const Index last = r.estimated.cols() - 1;
    CHECK(std::abs(r.estimated(i, last) - r.truth(i, last)) < 0.01 * std::abs(r.truth(i, last)));
  }
  CHECK(r.n_convergent == 2);
  // stored metrics recompute exactly from the stored trajectories
  const Eigen::MatrixXd est = rotor_angles(r.estimated, 2), tru = rotor_angles(r.truth, 2);
  CHECK(r.e_delta == avg_rotor_angle_error(est, tru));
  CHECK(r.n_convergent == convergent_angle_count(est, tru, data.dt));
  CHECK(r.covariance_condition.size() == static_cast<std::size_t>(r.estimated.cols()));
}

TEST_CASE("without PMUs the filter is an open-loop simulation") {
  const Loaded d = load("demo10");
  Scenario s;
  s.from = 0;
  s.to = 3;
  const ScenarioData data = generate_scenario(d.sc, d.eq, s, 5.0, 1.0 / 60, silent());
  StateVector guess = d.eq.x;
  guess.head(10) *= 1.05;
  FilterSettings fs;
  fs.init_std_delta = fs.init_std_omega = fs.init_std_eprime = 0.0;
  const EstimationResult r = srukf_run(data, PlacementMask::none(10), guess, silent(), fs);

  StateVector x = guess;
  for (Index k = 0; k < r.estimated.cols(); ++k) {
    if (k > 0) x = euler_step(data.schedule.at(k - 1), x, d.eq.u, d.eq.u, data.dt);
    CHECK((r.estimated.col(k) - x).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("corrupt data is reported as filter divergence with its step") {
  const Loaded d = load("demo2");
  ScenarioData data = generate_scenario(d.sc, d.eq, Scenario{}, 1.0, 1.0 / 60, silent());
  data.measurements(0, 7) = std::numeric_limits<double>::quiet_NaN();
  try {
    srukf_run(data, PlacementMask::all(2), d.eq.x, silent());
    FAIL("expected FilterDiverged");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FilterDiverged);
    CHECK(std::string(e.what()).find("step 7") != std::string::npos);
  }
  CHECK_THROWS_AS(srukf_run(data, PlacementMask::all(3), d.eq.x, silent()), Error);
}

TEST_CASE("validation studies are deterministic") {
  const Loaded d = load("demo2");
  StudySettings st;
  st.repeats = 2;
  st.t_f = 2.0;
  st.noise.measurement_std = 0.01;
  const std::vector<StudyPlacement> pl = {{"a", "explicit", PlacementMask::unit(2, 0)},
                                          {"b", "explicit", PlacementMask::unit(2, 0)},
                                          {"c", "explicit", PlacementMask::all(2)}};
  const std::vector<Scenario> sc = {Scenario{}};
  const StudyReport r1 = run_validation_study(d.sc, d.eq, pl, sc, st);
  REQUIRE(r1.aggregate.size() == 3);
  CHECK(r1.runs.size() == 6);
  CHECK(r1.aggregate[0].mean_e_delta == r1.aggregate[1].mean_e_delta);
  CHECK(r1.aggregate[0].mean_n_convergent == r1.aggregate[1].mean_n_convergent);
  st.jobs = 3;
  const StudyReport r2 = run_validation_study(d.sc, d.eq, pl, sc, st);
  CHECK(r1.runs_csv() == r2.runs_csv());
  CHECK(r1.aggregate_csv() == r2.aggregate_csv());
  st.seed = 2;
  CHECK(run_validation_study(d.sc, d.eq, pl, sc, st).runs_csv() != r1.runs_csv());

  const StudyReport empty = run_validation_study(d.sc, d.eq, pl, {}, st);
  CHECK(empty.runs.empty());
  CHECK(empty.aggregate.empty());
}

TEST_CASE("run seeds differ across scenarios and repeats") {
  CHECK(run_seed(1, 0, 0) != run_seed(1, 0, 1));
  CHECK(run_seed(1, 0, 1) != run_seed(1, 1, 0));
  CHECK(run_seed(1, 2, 3) == run_seed(1, 2, 3));
  CHECK(run_seed(2, 0, 0) != run_seed(1, 0, 0));
}
