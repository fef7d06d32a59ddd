#include "opp/case_io.hpp"

#include <cstdio>
#include <fstream>

#include "opp/error.hpp"

namespace opp {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(ErrorKind::MissingField, where + ": missing field '" + key + "'");
  return obj.at(key);
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number())
    throw Error(ErrorKind::MissingField, where + ": field '" + key + "' is not a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback) {
  if (obj.contains(key) && obj.at(key).is_number()) return obj.at(key).get<double>();
  return fallback;
}

ModelOrder parse_order(const std::string& s) {
  if (s == "Transient4" || s == "transient4") return ModelOrder::Transient4;
  if (s == "Classical2" || s == "classical2") return ModelOrder::Classical2;
  throw Error(ErrorKind::InvalidArgument, "unknown model_order '" + s + "'");
}

MachineParams parse_machine(const json& m, std::size_t pos) {
  const std::string where = "machines[" + std::to_string(pos) + "]";
  MachineParams p;
  p.index = m.contains("index") ? m.at("index").get<int>() : static_cast<int>(pos + 1);
  p.model_order = parse_order(field(m, "model_order", where).get<std::string>());
  p.H = number(m, "H", where);
  p.K_D = number(m, "K_D", where);
  p.S_N = number(m, "S_N", where);
  p.x_dp = number(m, "x_dp", where);
  p.x_qp = number_or(m, "x_qp", p.x_dp);
  if (p.is_classical()) {
    p.T_d0p = number_or(m, "T_d0p", 0.0);
    p.T_q0p = number_or(m, "T_q0p", 0.0);
    p.x_d = number_or(m, "x_d", p.x_dp);
    p.x_q = number_or(m, "x_q", p.x_qp);
  } else {
    p.T_d0p = number(m, "T_d0p", where);
    p.T_q0p = number(m, "T_q0p", where);
    p.x_d = number(m, "x_d", where);
    p.x_q = number(m, "x_q", where);
  }
  return p;
}

Eigen::VectorXd vector_of(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(ErrorKind::MissingField, where + " must be an array");
  Eigen::VectorXd v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

SystemCase load_case(const json& doc) {
  SystemCase sc;
  const std::string where = "case";
  if (doc.contains("name")) sc.name = doc.at("name").get<std::string>();
  sc.s_b = number(doc, "s_b", where);
  sc.omega_0 = number(doc, "omega_0_rad_s", where);

  const json& machines = field(doc, "machines", where);
  if (!machines.is_array() || machines.empty())
    throw Error(ErrorKind::MissingField, "case: 'machines' must be a non-empty array");
  for (std::size_t i = 0; i < machines.size(); ++i) sc.machines.push_back(parse_machine(machines[i], i));
  const Index g = sc.machine_count();

  const json& y = field(doc, "y_reduced", where);
  if (!y.is_array()) throw Error(ErrorKind::MissingField, "case: 'y_reduced' must be an array");
  if (static_cast<Index>(y.size()) != g * g)
    throw Error(ErrorKind::DimensionMismatch, "case: y_reduced has " + std::to_string(y.size()) +
                                                  " entries, expected " + std::to_string(g * g));
  sc.y_reduced.resize(g, g);
  for (Index r = 0; r < g; ++r)
    for (Index c = 0; c < g; ++c) {
      const json& e = y[static_cast<std::size_t>(r * g + c)];
      if (!e.is_array() || e.size() != 2)
        throw Error(ErrorKind::DimensionMismatch, "case: y_reduced entries must be [re, im] pairs");
      sc.y_reduced(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }

  if (doc.contains("terminal")) {
    const json& t = doc.at("terminal");
    if (!t.is_array() || static_cast<Index>(t.size()) != g)
      throw Error(ErrorKind::DimensionMismatch, "case: terminal must list one entry per machine");
    for (const auto& e : t) {
      if (!e.is_array() || e.size() != 4)
        throw Error(ErrorKind::DimensionMismatch, "case: terminal entries are [e_re, e_im, i_re, i_im]");
      sc.terminal.push_back({Complex(e[0].get<double>(), e[1].get<double>()),
                             Complex(e[2].get<double>(), e[3].get<double>())});
    }
  }
  if (doc.contains("inputs")) {
    const json& in = doc.at("inputs");
    InputVector u;
    u.T_m = vector_of(field(in, "T_m", "inputs"), "inputs.T_m");
    u.E_fd = vector_of(field(in, "E_fd", "inputs"), "inputs.E_fd");
    sc.inputs = std::move(u);
  }
  if (sc.terminal.empty() && !sc.inputs)
    throw Error(ErrorKind::MissingField, "case: needs 'terminal' or 'inputs'");

  sc.validate();
  return sc;
}

SystemCase load_case_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open case file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MissingField, "case file " + path.string() + " is not valid JSON: " + e.what());
  }
  return load_case(doc);
}

json case_to_json(const SystemCase& sc) {
  json doc;
  doc["name"] = sc.name;
  doc["s_b"] = sc.s_b;
  doc["omega_0_rad_s"] = sc.omega_0;
  json machines = json::array();
  for (const auto& m : sc.machines) {
    json j;
    j["index"] = m.index;
    j["model_order"] = m.is_classical() ? "Classical2" : "Transient4";
    j["H"] = m.H;
    j["K_D"] = m.K_D;
    j["S_N"] = m.S_N;
    j["x_dp"] = m.x_dp;
    j["x_qp"] = m.x_qp;
    j["x_d"] = m.x_d;
    j["x_q"] = m.x_q;
    j["T_d0p"] = m.T_d0p;
    j["T_q0p"] = m.T_q0p;
    machines.push_back(j);
  }
  doc["machines"] = machines;
  json y = json::array();
  for (Index r = 0; r < sc.y_reduced.rows(); ++r)
    for (Index c = 0; c < sc.y_reduced.cols(); ++c)
      y.push_back({sc.y_reduced(r, c).real(), sc.y_reduced(r, c).imag()});
  doc["y_reduced"] = y;
  if (!sc.terminal.empty()) {
    json t = json::array();
    for (const auto& p : sc.terminal)
      t.push_back({p.voltage.real(), p.voltage.imag(), p.current.real(), p.current.imag()});
    doc["terminal"] = t;
  }
  if (sc.inputs) {
    doc["inputs"]["T_m"] = std::vector<double>(sc.inputs->T_m.begin(), sc.inputs->T_m.end());
    doc["inputs"]["E_fd"] = std::vector<double>(sc.inputs->E_fd.begin(), sc.inputs->E_fd.end());
  }
  return doc;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string case_hash(const SystemCase& sc) { return hex64(fnv1a64(case_to_json(sc).dump())); }

}  // namespace opp
