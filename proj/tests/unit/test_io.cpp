#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lgv/error.hpp"
#include "lgv/experiment.hpp"
#include "lgv/report.hpp"
#include "lgv/rng.hpp"

using namespace lgv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lgvlab_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
    return e.what();
  }
  return "";
}

const char* kGle = R"({"experiment": "gle_compare", "seed": 5,
  "model": {"dynamics": "gle_augmented", "potential": {"kind": "quadratic", "dim": 1, "k": 1.0}},
  "numerics": {"dt": 0.01, "horizon": 1.0, "n_paths": 8}})";

}  // namespace

TEST_CASE("CSV round trip is exact for arbitrary doubles") {
  RandomStream rs(99, 0, Stream::auxiliary);
  const fs::path dir = scratch("csv");
  for (int trial = 0; trial < 20; ++trial) {
    Table t{"t", {"a", "b", "c"}, {}};
    for (int r = 0; r < 50; ++r) {
      std::vector<double> row;
      for (int c = 0; c < 3; ++c) row.push_back(rs.normal() * std::exp(40.0 * rs.normal()));
      t.add_row(row);
    }
    t.add_row({0.0, -0.0, 5e-324});
    const std::string path = (dir / "t.csv").string();
    write_csv(t, path);
    CHECK(read_csv(path) == t);
  }
}

TEST_CASE("read_csv rejects malformed cells") {
  const fs::path p = scratch("bad") / "bad.csv";
  std::ofstream(p) << "a,b\n1,x\n";
  CHECK_THROWS_AS(read_csv(p.string()), Error);
}

TEST_CASE("sanitize keeps file-name safe characters") { CHECK(sanitize("mean q^2/eps=0.1") == "mean_q_2_eps=0.1"); }

TEST_CASE("config validation names the offending key") {
  CHECK(config_error(R"({"experiment": "simulate"})") == "seed: required");
  CHECK(config_error(R"({"experiment": "simulate", "seed": 1, "model": {"potential": {"kind": "quadratic", "dim": 1, "k": 1}, "sigmaa": 1}})") ==
        "model.sigmaa: unknown key");
  CHECK(config_error(R"({"experiment": "simulate", "seed": 1, "model": {"potential": {"kind": "quadratic", "dim": 1, "k": 1}, "beta": "hot"}})") ==
        "model.beta: expected number");
  CHECK(config_error(R"({"experiment": "teleport", "seed": 1})").rfind("experiment:", 0) == 0);
  CHECK(config_error("{not json").size() > 0);
}

TEST_CASE("seed override and report emission") {
  ExperimentConfig cfg = parse_config_text(kGle);
  cfg.override_seed(8);
  CHECK(cfg.sim.seed == 8);
  const ExperimentResult r = run_experiment(cfg);
  CHECK(r.seed == 8);
  CHECK(r.verdicts.size() == 1);
  OutputSpec out;
  out.directory = scratch("emit").string();
  const auto files = emit_report(r, out);
  CHECK(fs::exists(fs::path(out.directory) / "report.json"));
  for (const auto& f : files) CHECK(fs::exists(f));
  std::ifstream in(fs::path(out.directory) / "report.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto doc = nlohmann::json::parse(ss.str());
  CHECK(doc.at("seed") == 8);
  CHECK(doc.at("verdicts").size() == 1);
}
