#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "opp/case_io.hpp"
#include "opp/gramian.hpp"
#include "opp/placement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = OPP_WORK_DIR;

struct Run {
  int status;
  std::string err;
};

Run opp_run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string(OPP_BINARY) + " " + args + " > " + (kWork / "stdout.txt").string() + " 2> " +
                          err.string();
  const int raw = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(raw), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const json& j) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string case_file(const char* name) { return std::string(OPP_CASES_DIR) + "/" + name + ".json"; }

}  // namespace

TEST_CASE("gramian writes one matrix per generator plus the full one, reproducibly") {
  const fs::path cfg = write_config("g2.json", {{"case_path", case_file("demo2")}});
  const fs::path out1 = kWork / "g2_a", out2 = kWork / "g2_b";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(opp_run("gramian --config " + cfg.string() + " --out " + out1.string()).status == 0);
  REQUIRE(opp_run("gramian --config " + cfg.string() + " --out " + out2.string() + " --jobs 2").status == 0);
  int csv = 0;
  for (const auto& e : fs::directory_iterator(out1)) csv += e.path().extension() == ".csv";
  CHECK(csv == 3);
  for (const char* f : {"W_full.csv", "W_gen_1.csv", "W_gen_2.csv", "gramian.json"})
    CHECK(slurp(out1 / f) == slurp(out2 / f));
  const json echoed = json::parse(slurp(out1 / "resolved_config.json"));
  CHECK(echoed["case_path"] == case_file("demo2"));
  CHECK(echoed["scheme"]["t_f"] == 5.0);
}

TEST_CASE("a corrupted case exits with status 2 and a MissingField document") {
  std::ifstream in(case_file("demo2"));
  json doc = json::parse(in);
  doc.erase("machines");
  const fs::path bad = kWork / "broken_case.json";
  fs::create_directories(kWork);
  std::ofstream(bad) << doc.dump();
  const fs::path cfg = write_config("broken.json", {{"case_path", bad.string()}});
  const Run r = opp_run("gramian --config " + cfg.string() + " --out " + (kWork / "broken_out").string());
  CHECK(r.status == 2);
  const json err = json::parse(r.err);
  CHECK(err["error"]["kind"] == "MissingField");
}

TEST_CASE("bad flags and configs exit with status 2") {
  CHECK(opp_run("gramian").status == 2);
  CHECK(opp_run("place --config /nonexistent.json").status == 2);
  const fs::path cfg = write_config("typo.json", {{"case_path", case_file("demo2")}, {"sead", 1}});
  const Run r = opp_run("place --config " + cfg.string());
  CHECK(r.status == 2);
  CHECK(json::parse(r.err)["error"]["kind"] == "InvalidConfig");
}

TEST_CASE("place over a budget range writes one document per budget") {
  const fs::path cfg = write_config("p10.json", {{"case_path", case_file("demo10")}});
  const fs::path out = kWork / "p10";
  fs::remove_all(out);
  REQUIRE(opp_run("place --config " + cfg.string() + " --out " + out.string() + " --gbar 1-10").status == 0);
  for (int k = 1; k <= 10; ++k) {
    const json d = json::parse(slurp(out / ("place_gbar_" + std::to_string(k) + ".json")));
    CHECK(d["gbar"] == k);
    CHECK(d["result"]["indices"].size() == static_cast<std::size_t>(k));
    CHECK(d.contains("decision"));
  }
}

TEST_CASE("place with the trace measure matches the library") {
  const fs::path cfg = write_config("p10t.json", {{"case_path", case_file("demo10")}, {"measure", "trace"}});
  const fs::path out = kWork / "p10t";
  REQUIRE(opp_run("place --config " + cfg.string() + " --out " + out.string() + " --gbar 3").status == 0);
  const json d = json::parse(slurp(out / "place_gbar_3.json"));

  const opp::SystemCase sc = opp::load_case_file(case_file("demo10"));
  const opp::Equilibrium eq = opp::initialize_equilibrium(sc);
  const auto parts = opp::per_generator_gramians(opp::PowerSystemModel(sc, eq.u),
                                                 opp::PerturbationScheme::standard(sc.dynamic_dim()), eq.x);
  const auto r = opp::optimize(parts, opp::MeasureKind::Trace, 3);
  CHECK(d["result"]["z"] == r.z.to_string());
  CHECK(d["result"]["measure_used"] == "trace");
}

TEST_CASE("adaptive placement on stored weak-observability gramians takes the condition branch") {
  const fs::path dir = kWork / "weak_gramians";
  fs::create_directories(dir);
  // det optimum has kappa 100; the other machine has kappa 10 and no better sigma_min
  std::ofstream(dir / "W_gen_1.csv") << "0.5,0\n0,0.005\n";
  std::ofstream(dir / "W_gen_2.csv") << "0.01,0\n0,0.001\n";
  const fs::path cfg = write_config("weak.json", {{"case_path", case_file("demo2")}, {"gramian_dir", dir.string()}});
  const fs::path out = kWork / "weak_out";
  REQUIRE(opp_run("place --config " + cfg.string() + " --out " + out.string() + " --gbar 1").status == 0);
  const json d = json::parse(slurp(out / "place_gbar_1.json"));
  CHECK(d["decision"]["branch"] == "cond");
  CHECK(d["result"]["z"] == "01");
}

TEST_CASE("validate smoke run is reproducible and keeps placements fixed across seeds") {
  const json base = {{"case_path", case_file("demo2")},
                     {"study", {{"repeats", 2}, {"gbar", 1}, {"placements", {"adaptive", "random:3", "z:11"}},
                                {"noise", {{"measurement_std", 0.01}}}}}};
  const fs::path cfg = write_config("v2.json", base);
  const fs::path a = kWork / "v2_a", b = kWork / "v2_b", c = kWork / "v2_c";
  for (const auto& p : {a, b, c}) fs::remove_all(p);
  REQUIRE(opp_run("validate --config " + cfg.string() + " --out " + a.string()).status == 0);
  REQUIRE(opp_run("validate --config " + cfg.string() + " --out " + b.string() + " --jobs 2").status == 0);
  CHECK(slurp(a / "study_runs.csv") == slurp(b / "study_runs.csv"));
  CHECK(slurp(a / "study_aggregate.csv") == slurp(b / "study_aggregate.csv"));

  std::istringstream agg(slurp(a / "study_aggregate.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(agg, line)) ++rows;
  CHECK(rows == 5);

  REQUIRE(opp_run("validate --config " + cfg.string() + " --out " + c.string() + " --seed 9").status == 0);
  CHECK(slurp(c / "study_runs.csv") != slurp(a / "study_runs.csv"));
  const auto placements = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string l, out;
    while (std::getline(in, l)) out += l.substr(0, l.find(',', l.find(',') + 1)) + "\n";
    return out;
  };
  CHECK(placements(slurp(c / "study_aggregate.csv")) == placements(slurp(a / "study_aggregate.csv")));
}
