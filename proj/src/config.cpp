#include "opp/config.hpp"

#include <fstream>
#include <initializer_list>

#include "opp/error.hpp"

namespace opp {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

// Typos in a config silently falling back to defaults would make studies
// unrepeatable, so unknown keys are rejected.
void only_keys(const json& obj, const char* where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(std::string(where) + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) bad("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("field '") + key + "': " + e.what());
  }
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& rows) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) bad("direction matrix must be a list of rows");
  Eigen::MatrixXd M(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != rows[0].size()) bad("direction matrix rows differ in length");
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j].get<double>();
  }
  return M;
}

json scenario_json(const Scenario& s) {
  return {{"from", s.from},
          {"to", s.to},
          {"fault_start", s.fault_start},
          {"fault_clear", s.fault_clear},
          {"severity", s.severity},
          {"description", s.description}};
}

Scenario scenario_from(const json& j) {
  only_keys(j, "scenario", {"from", "to", "fault_start", "fault_clear", "severity", "description"});
  Scenario s;
  read(j, "from", s.from);
  read(j, "to", s.to);
  read(j, "fault_start", s.fault_start);
  read(j, "fault_clear", s.fault_clear);
  read(j, "severity", s.severity);
  read(j, "description", s.description);
  return s;
}

}  // namespace

PerturbationScheme SchemeConfig::build(Index n) const {
  PerturbationScheme s;
  if (directions == "identity") {
    s.directions = {Eigen::MatrixXd::Identity(n, n)};
  } else if (directions == "plus_minus") {
    s.directions = {Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n)};
  } else if (directions == "explicit") {
    s.directions = explicit_directions;
  } else {
    bad("scheme.directions must be identity, plus_minus or explicit");
  }
  s.magnitudes = magnitudes;
  s.t_f = t_f;
  s.dt = dt;
  s.scale_omega = scale_omega;
  s.validate(n);
  return s;
}

json to_json(const RunConfig& c) {
  json dirs = json::array();
  for (const auto& T : c.scheme.explicit_directions) dirs.push_back(matrix_json(T));
  json scenarios = json::array();
  for (const auto& s : c.study.scenarios) scenarios.push_back(scenario_json(s));
  const auto& st = c.study;
  return {
      {"case_path", c.case_path},
      {"scheme",
       {{"directions", c.scheme.directions},
        {"explicit_directions", dirs},
        {"magnitudes", c.scheme.magnitudes},
        {"t_f", c.scheme.t_f},
        {"dt", c.scheme.dt},
        {"scale_omega", c.scheme.scale_omega}}},
      {"solver",
       {{"name", c.solver.name},
        {"exhaustive_cap", c.solver.exhaustive_cap},
        {"max_swap_rounds", c.solver.max_swap_rounds},
        {"random_restarts", c.solver.random_restarts}}},
      {"gbar", c.gbar},
      {"epsilon", c.epsilon},
      {"measure", c.measure},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"out", c.out},
      {"gramian_dir", c.gramian_dir},
      {"study",
       {{"placements", st.placements},
        {"gbar", st.gbar},
        {"placement_seed", st.placement_seed},
        {"scenarios", scenarios},
        {"repeats", st.repeats},
        {"t_f", st.t_f},
        {"dt", st.dt},
        {"noise",
         {{"process_std_delta", st.noise.process_std_delta},
          {"process_std_omega", st.noise.process_std_omega},
          {"process_std_eprime", st.noise.process_std_eprime},
          {"measurement_std", st.noise.measurement_std}}},
        {"filter",
         {{"alpha", st.filter.unscented.alpha},
          {"beta", st.filter.unscented.beta},
          {"kappa", st.filter.unscented.kappa},
          {"init_std_delta", st.filter.init_std_delta},
          {"init_std_omega", st.filter.init_std_omega},
          {"init_std_eprime", st.filter.init_std_eprime},
          {"min_measurement_std", st.filter.min_measurement_std}}},
        {"criterion",
         {{"window", st.criterion.window},
          {"threshold", st.criterion.threshold},
          {"absolute_fallback", st.criterion.absolute_fallback}}},
        {"init_delta_rel_error", st.init_delta_rel_error}}},
  };
}

RunConfig config_from_json(const json& doc) {
  only_keys(doc, "config",
            {"case_path", "scheme", "solver", "gbar", "epsilon", "measure", "seed", "jobs", "out", "gramian_dir", "study"});
  RunConfig c;
  if (!doc.contains("case_path") || !doc["case_path"].is_string())
    throw Error(ErrorKind::MissingField, "config needs a case_path string");
  read(doc, "case_path", c.case_path);
  read(doc, "gbar", c.gbar);
  read(doc, "epsilon", c.epsilon);
  read(doc, "measure", c.measure);
  read(doc, "seed", c.seed);
  read(doc, "jobs", c.jobs);
  read(doc, "out", c.out);
  read(doc, "gramian_dir", c.gramian_dir);

  if (doc.contains("scheme")) {
    const json& s = doc["scheme"];
    only_keys(s, "scheme", {"directions", "explicit_directions", "magnitudes", "t_f", "dt", "scale_omega"});
    read(s, "directions", c.scheme.directions);
    if (s.contains("explicit_directions")) {
      if (!s["explicit_directions"].is_array()) bad("scheme.explicit_directions must be a list");
      for (const auto& T : s["explicit_directions"]) c.scheme.explicit_directions.push_back(matrix_from(T));
    }
    read(s, "magnitudes", c.scheme.magnitudes);
    read(s, "t_f", c.scheme.t_f);
    read(s, "dt", c.scheme.dt);
    read(s, "scale_omega", c.scheme.scale_omega);
  }
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    only_keys(s, "solver", {"name", "exhaustive_cap", "max_swap_rounds", "random_restarts"});
    read(s, "name", c.solver.name);
    read(s, "exhaustive_cap", c.solver.exhaustive_cap);
    read(s, "max_swap_rounds", c.solver.max_swap_rounds);
    read(s, "random_restarts", c.solver.random_restarts);
  }
  if (doc.contains("study")) {
    const json& s = doc["study"];
    only_keys(s, "study",
              {"placements", "gbar", "placement_seed", "scenarios", "repeats", "t_f", "dt", "noise", "filter",
               "criterion", "init_delta_rel_error"});
    StudyConfig& st = c.study;
    read(s, "placements", st.placements);
    read(s, "gbar", st.gbar);
    read(s, "placement_seed", st.placement_seed);
    if (s.contains("scenarios")) {
      if (!s["scenarios"].is_array()) bad("study.scenarios must be a list");
      st.scenarios.clear();
      for (const auto& j : s["scenarios"]) st.scenarios.push_back(scenario_from(j));
    }
    read(s, "repeats", st.repeats);
    read(s, "t_f", st.t_f);
    read(s, "dt", st.dt);
    read(s, "init_delta_rel_error", st.init_delta_rel_error);
    if (s.contains("noise")) {
      const json& n = s["noise"];
      only_keys(n, "study.noise", {"process_std_delta", "process_std_omega", "process_std_eprime", "measurement_std"});
      read(n, "process_std_delta", st.noise.process_std_delta);
      read(n, "process_std_omega", st.noise.process_std_omega);
      read(n, "process_std_eprime", st.noise.process_std_eprime);
      read(n, "measurement_std", st.noise.measurement_std);
    }
    if (s.contains("filter")) {
      const json& f = s["filter"];
      only_keys(f, "study.filter",
                {"alpha", "beta", "kappa", "init_std_delta", "init_std_omega", "init_std_eprime",
                 "min_measurement_std"});
      read(f, "alpha", st.filter.unscented.alpha);
      read(f, "beta", st.filter.unscented.beta);
      read(f, "kappa", st.filter.unscented.kappa);
      read(f, "init_std_delta", st.filter.init_std_delta);
      read(f, "init_std_omega", st.filter.init_std_omega);
      read(f, "init_std_eprime", st.filter.init_std_eprime);
      read(f, "min_measurement_std", st.filter.min_measurement_std);
    }
    if (s.contains("criterion")) {
      const json& k = s["criterion"];
      only_keys(k, "study.criterion", {"window", "threshold", "absolute_fallback"});
      read(k, "window", st.criterion.window);
      read(k, "threshold", st.criterion.threshold);
      read(k, "absolute_fallback", st.criterion.absolute_fallback);
    }
  }

  if (c.jobs < 1) bad("jobs must be at least 1");
  if (!(c.epsilon > 0.0)) bad("epsilon must be positive");
  if (c.study.repeats < 0) bad("study.repeats must be non-negative");
  const auto& n = c.study.noise;
  if (n.process_std_delta < 0 || n.process_std_omega < 0 || n.process_std_eprime < 0 || n.measurement_std < 0)
    bad("noise standard deviations must be non-negative");
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    bad("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(doc);
}

}  // namespace opp
