#include <doctest.h>

#include "opp/config.hpp"
#include "opp/error.hpp"

using namespace opp;
using nlohmann::json;

TEST_CASE("defaults survive a round trip") {
  RunConfig c;
  c.case_path = "cases/demo2.json";
  const json j = to_json(c);
  CHECK(to_json(config_from_json(j)) == j);
  CHECK(config_from_json(j).scheme.dt == 1.0 / 60.0);
  // through text as well
  CHECK(to_json(config_from_json(json::parse(j.dump()))) == j);
}

TEST_CASE("a fully specified config round trips") {
  RunConfig c;
  c.case_path = "x.json";
  c.scheme.directions = "explicit";
  Eigen::MatrixXd T(2, 2);
  T << 0.6, -0.8, 0.8, 0.6;
  c.scheme.explicit_directions = {T};
  c.scheme.magnitudes = {1e-3, 0.1 + 0.2};
  c.scheme.scale_omega = true;
  c.solver.name = "local_swap";
  c.solver.random_restarts = 4;
  c.gbar = {2, 3, 4};
  c.epsilon = 0.3;
  c.measure = "mineig";
  c.seed = 18446744073709551557ull;
  c.jobs = 3;
  c.gramian_dir = "g";
  c.study.placements = {"z:0101", "optimal:trace"};
  c.study.scenarios = {Scenario{1, 3, 0.5, 0.6, 0.25, "weak tie"}};
  c.study.noise.measurement_std = 0.01;
  c.study.filter.unscented.alpha = 0.5;
  c.study.criterion.window = 0.5;
  const RunConfig back = config_from_json(json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.seed == c.seed);
  CHECK(back.scheme.magnitudes[1] == 0.1 + 0.2);
  CHECK(back.scheme.explicit_directions[0] == T);
  CHECK(back.study.scenarios[0].description == "weak tie");
}

TEST_CASE("config errors") {
  const auto kind = [](const json& j) {
    try {
      config_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind(json::object()) == ErrorKind::MissingField);
  CHECK(kind({{"case_path", "a"}, {"sede", 3}}) == ErrorKind::InvalidConfig);
  CHECK(kind({{"case_path", "a"}, {"study", {{"noise", {{"measurement_std", -1.0}}}}}}) == ErrorKind::InvalidConfig);
  CHECK(kind({{"case_path", "a"}, {"jobs", 0}}) == ErrorKind::InvalidConfig);
  CHECK(kind({{"case_path", "a"}, {"epsilon", "big"}}) == ErrorKind::InvalidConfig);
}

TEST_CASE("scheme construction") {
  SchemeConfig s;
  CHECK(s.build(4).directions.size() == 1);
  s.directions = "plus_minus";
  const PerturbationScheme pm = s.build(4);
  REQUIRE(pm.directions.size() == 2);
  CHECK(pm.directions[1] == -Eigen::MatrixXd::Identity(4, 4));
  s.directions = "explicit";
  CHECK_THROWS_AS(s.build(4), Error);
  s.directions = "spiral";
  CHECK_THROWS_AS(s.build(4), Error);
}
