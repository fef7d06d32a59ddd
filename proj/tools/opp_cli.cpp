// opp: gramian computation, PMU placement and SRUKF validation studies.
//
//   opp gramian  --config run.json [--out DIR] [--jobs N]
//   opp place    --config run.json [--gbar 3 | --gbar 1-10] [--measure logdet|...|adaptive] [--epsilon E]
//   opp validate --config run.json [--gbar 3] [--measure ...]
//
// Exit status: 0 success, 1 study finished with diverged runs, 2 invalid input or failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "opp/case_io.hpp"
#include "opp/config.hpp"
#include "opp/dse.hpp"
#include "opp/error.hpp"
#include "opp/gramian.hpp"
#include "opp/measures.hpp"
#include "opp/placement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opp;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> gbar;
  std::optional<std::string> measure;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
};

std::vector<int> parse_gbar(const std::string& text) {
  std::vector<int> out;
  try {
    const auto dash = text.find('-');
    if (dash == std::string::npos) {
      out.push_back(std::stoi(text));
    } else {
      const int lo = std::stoi(text.substr(0, dash)), hi = std::stoi(text.substr(dash + 1));
      for (int k = lo; k <= hi; ++k) out.push_back(k);
    }
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "--gbar expects N or A-B, got '" + text + "'");
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "--gbar range is empty");
  return out;
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = load_config_file(o.config_path);
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.out = *o.out;
  if (o.gbar) {
    c.gbar = parse_gbar(*o.gbar);
    c.study.gbar = c.gbar.front();
  }
  if (o.measure) c.measure = *o.measure;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.seed) c.seed = *o.seed;
  if (c.jobs < 1) throw Error(ErrorKind::InvalidArgument, "--jobs must be at least 1");
  if (!(c.epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "--epsilon must be positive");
  if (c.measure != "adaptive") parse_measure(c.measure);
  return config_from_json(to_json(c));  // re-validate after overrides
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir = c.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "resolved_config.json", to_json(c).dump(2) + "\n");
  return dir;
}

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json measures_json(const std::array<MeasureValue, 4>& all) {
  json j = json::object();
  for (const auto& m : all) {
    json e = {{"value", number(m.value)}};
    if (m.kind == MeasureKind::LogDet) {
      e["singular"] = m.singular;
      if (m.raw_det) e["det"] = number(*m.raw_det);
    }
    if (m.kind == MeasureKind::NegCond) e["kappa"] = number(condition_number(m));
    j[std::string(to_string(m.kind))] = e;
  }
  return j;
}

json result_json(const PlacementResult& r) {
  return {{"z", r.z.to_string()},
          {"indices", r.z.indices()},
          {"measure_used", std::string(to_string(r.measure_used))},
          {"objective", number(r.objective.value)},
          {"all_measures", measures_json(r.all_measures)},
          {"solver", std::string(to_string(r.solver))},
          {"evaluations", r.evaluations}};
}

struct Prepared {
  SystemCase sc;
  Equilibrium eq;
  PerturbationScheme scheme;
};

Prepared prepare(const RunConfig& c) {
  Prepared p{load_case_file(c.case_path), {}, {}};
  p.eq = initialize_equilibrium(p.sc);
  p.scheme = c.scheme.build(p.sc.dynamic_dim());
  return p;
}

Eigen::MatrixXd read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "non-numeric entry in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::DimensionMismatch, "ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.size() != rows.front().size())
    throw Error(ErrorKind::DimensionMismatch, path.string() + " is not a square matrix");
  Eigen::MatrixXd M(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) M(i, j) = rows[i][j];
  return M;
}

std::vector<Gramian> generator_gramians(const RunConfig& c, const Prepared& p) {
  const Index g = p.sc.machine_count();
  if (c.gramian_dir.empty()) {
    const PowerSystemModel model(p.sc, p.eq.u);
    return per_generator_gramians(model, p.scheme, p.eq.x, c.jobs);
  }
  std::vector<Gramian> parts;
  for (Index i = 0; i < g; ++i) {
    Gramian W{read_csv_matrix(fs::path(c.gramian_dir) / ("W_gen_" + std::to_string(i + 1) + ".csv")),
              PlacementMask::unit(g, i), "file"};
    if (!parts.empty() && W.dim() != parts.front().dim())
      throw Error(ErrorKind::DimensionMismatch, "stored gramians differ in size");
    parts.push_back(std::move(W));
  }
  return parts;
}

json placement_document(const RunConfig& c, const Prepared& p, std::span<const Gramian> parts, int gbar) {
  const Solver solver = parse_solver(c.solver.name);
  json doc = {{"case", p.sc.name},
              {"case_hash", case_hash(p.sc)},
              {"scheme_id", c.gramian_dir.empty() ? p.scheme.id() : std::string("file")},
              {"gbar", gbar},
              {"mode", c.measure}};
  if (c.measure == "adaptive") {
    const AdaptiveResult a = adaptive_placement(parts, gbar, c.epsilon, solver, c.seed, c.solver.options());
    doc["result"] = result_json(a.chosen);
    doc["decision"] = {{"branch", std::string(to_string(a.decision.branch))},
                       {"epsilon", a.decision.epsilon},
                       {"log_det_at_det_opt", number(a.decision.log_det_at_det_opt)},
                       {"R_neg_kappa", number(a.decision.R_neg_kappa)},
                       {"R_sigma_min", number(a.decision.R_sigma_min)}};
    doc["candidates"] = {{"det", result_json(a.det_opt)},
                         {"cond", result_json(a.cond_opt)},
                         {"mineig", result_json(a.min_eig_opt)}};
  } else {
    doc["result"] = result_json(optimize(parts, parse_measure(c.measure), gbar, solver, c.seed, c.solver.options()));
  }
  return doc;
}

int cmd_gramian(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  const Prepared p = prepare(c);
  const std::vector<Gramian> parts = generator_gramians(c, p);
  const Index g = p.sc.machine_count();
  const Gramian full = assemble_gramian(PlacementMask::all(g), parts);
  for (Index i = 0; i < g; ++i)
    write_file(dir / ("W_gen_" + std::to_string(i + 1) + ".csv"), matrix_to_csv(parts[i].matrix));
  write_file(dir / "W_full.csv", matrix_to_csv(full.matrix));
  const auto all = evaluate_all(full.matrix);
  const json meta = {{"case", p.sc.name},
                     {"case_hash", case_hash(p.sc)},
                     {"scheme_id", p.scheme.id()},
                     {"machines", g},
                     {"dimension", full.dim()},
                     {"measures", measures_json(all)}};
  write_file(dir / "gramian.json", meta.dump(2) + "\n");
  std::cout << measures_json(all).dump(2) << "\n";
  return 0;
}

int cmd_place(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  const Prepared p = prepare(c);
  const std::vector<Gramian> parts = generator_gramians(c, p);
  std::vector<int> budgets = c.gbar;
  if (budgets.empty())
    for (int k = 1; k <= p.sc.machine_count(); ++k) budgets.push_back(k);
  for (int k : budgets) {
    const json doc = placement_document(c, p, parts, k);
    write_file(dir / ("place_gbar_" + std::to_string(k) + ".json"), doc.dump(2) + "\n");
    std::cout << "gbar=" << k << " z=" << doc["result"]["z"].get<std::string>();
    if (doc.contains("decision")) std::cout << " branch=" << doc["decision"]["branch"].get<std::string>();
    std::cout << "\n";
  }
  return 0;
}

std::vector<StudyPlacement> study_placements(const RunConfig& c, const Prepared& p) {
  const Index g = p.sc.machine_count();
  const StudyConfig& st = c.study;
  std::vector<StudyPlacement> out;
  std::optional<std::vector<Gramian>> parts;
  auto gramians = [&]() -> const std::vector<Gramian>& {
    if (!parts) parts = generator_gramians(c, p);
    return *parts;
  };
  const Solver solver = parse_solver(c.solver.name);
  for (const std::string& entry : st.placements) {
    const auto colon = entry.find(':');
    const std::string head = entry.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : entry.substr(colon + 1);
    if (entry == "adaptive") {
      const AdaptiveResult a = adaptive_placement(gramians(), st.gbar, c.epsilon, solver, c.seed, c.solver.options());
      out.push_back({"adaptive", "adaptive:" + std::string(to_string(a.decision.branch)), a.chosen.z});
    } else if (head == "optimal") {
      const MeasureKind kind = parse_measure(arg);
      const PlacementResult r = optimize(gramians(), kind, st.gbar, solver, c.seed, c.solver.options());
      out.push_back({entry, std::string(to_string(kind)), r.z});
    } else if (head == "random") {
      int count = 0;
      try {
        count = std::stoi(arg);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "bad placement entry '" + entry + "'");
      }
      for (int j = 0; j < count; ++j) {
        std::seed_seq seq{static_cast<std::uint32_t>(st.placement_seed), static_cast<std::uint32_t>(j)};
        std::uint32_t word;
        seq.generate(&word, &word + 1);
        out.push_back({"random_" + std::to_string(j), "random", random_placement(g, st.gbar, word)});
      }
    } else if (head == "z") {
      if (static_cast<Index>(arg.size()) != g || arg.find_first_not_of("01") != std::string::npos)
        throw Error(ErrorKind::InvalidConfig, "placement '" + entry + "' must be " + std::to_string(g) + " bits");
      std::vector<std::uint8_t> bits;
      for (char ch : arg) bits.push_back(ch == '1');
      out.push_back({entry, "explicit", PlacementMask(bits)});
    } else {
      throw Error(ErrorKind::InvalidConfig, "bad placement entry '" + entry + "'");
    }
  }
  return out;
}

int cmd_validate(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  const Prepared p = prepare(c);
  if (c.study.gbar < 0 || c.study.gbar > p.sc.machine_count())
    throw Error(ErrorKind::InvalidArgument, "study.gbar outside [0, g]");
  const std::vector<StudyPlacement> placements = study_placements(c, p);

  StudySettings s;
  s.t_f = c.study.t_f;
  s.dt = c.study.dt;
  s.repeats = c.study.repeats;
  s.seed = c.seed;
  s.noise = c.study.noise;
  s.filter = c.study.filter;
  s.criterion = c.study.criterion;
  s.init_delta_rel_error = c.study.init_delta_rel_error;
  s.jobs = c.jobs;
  const StudyReport report = run_validation_study(p.sc, p.eq, placements, c.study.scenarios, s);
  write_file(dir / "study_runs.csv", report.runs_csv());
  write_file(dir / "study_aggregate.csv", report.aggregate_csv());
  std::cout << report.aggregate_csv();
  return report.any_diverged() ? 1 : 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observability-based PMU placement and state-estimation studies"};
  app.require_subcommand(1);
  Overrides o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "run configuration (JSON)")->required();
    sub->add_option("--jobs", o.jobs, "concurrent simulations");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "master seed");
  };
  CLI::App* gram = app.add_subcommand("gramian", "per-generator and full empirical gramians");
  CLI::App* place = app.add_subcommand("place", "optimal PMU placement");
  CLI::App* validate = app.add_subcommand("validate", "SRUKF validation study");
  for (CLI::App* sub : {gram, place, validate}) common(sub);
  for (CLI::App* sub : {place, validate}) {
    sub->add_option("--gbar", o.gbar, "PMU budget N or range A-B");
    sub->add_option("--measure", o.measure, "logdet, trace, mineig, negcond or adaptive");
    sub->add_option("--epsilon", o.epsilon, "determinant threshold of the adaptive rule");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("InvalidArgument", e.what());
    return 2;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (gram->parsed()) return cmd_gramian(cfg);
    if (place->parsed()) return cmd_place(cfg);
    return cmd_validate(cfg);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
  }
  return 2;
}
