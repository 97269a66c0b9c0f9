#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lgv/greenkubo.hpp"
#include "lgv/model.hpp"
#include "lgv/report.hpp"
#include "lgv/revcheck.hpp"
#include "lgv/sde.hpp"
#include "lgv/verdict.hpp"

namespace lgv {

enum class ExperimentKind { simulate, response, greenkubo, fpsolve, revcheck, double_limit, gle_compare };
const char* experiment_tag(ExperimentKind k);

struct SimulateParams {
  std::vector<std::string> observables;  // default: every q coordinate
};

struct ResponseParams {
  std::string observable;
  std::vector<double> epsilons;  // default: the model's ε
  bool predictor = true;
  bool paired = true;
  double abs_floor = 0.02;
  long predictor_paths = 0;  // 0: numerics.n_paths
  double predictor_dt = 0.0;  // 0: numerics.dt; must divide the record spacing
};

struct GreenKuboParams {
  enum class Mode { correlation, gk_check, diffusion, onsager } mode = Mode::gk_check;
  std::string a, b;  // correlation
  std::string g;     // gk_check, onsager; W is the model's perturbation
  double max_lag = 0.0;
  Truncation truncation;
  double abs_floor = 0.02;
  std::vector<double> epsilons;  // onsager, decreasing
};

struct FpParams {
  enum class Mode { stationary, decay, kinetic_decay } mode = Mode::stationary;
  std::vector<double> epsilons;  // decay: default the model's ε
  double dt = 0.0;               // kinetic_decay: 0 picks the transport stability bound
  double t_end = 0.0;
  int sample_every = 1;
  double min_r2 = 0.99;
  double max_rate_spread = 0.25;  // decay: (max − min)/min over ε
  double transient_fraction = 0.1;
};

struct RevcheckParams {
  bool battery = false;
  std::optional<bool> expect_reversible;  // absent: every check must pass
  std::vector<std::pair<std::string, std::string>> pairs;  // empty: default pairs
  RevcheckOptions options;
};

struct DoubleLimitParams {
  std::string observable;
  std::vector<double> epsilons;
  std::vector<double> times;
  double plateau_start = -1.0;
  double abs_floor = 0.02;
  long predictor_paths = 0;
  double predictor_dt = 0.0;
  std::optional<Grid1D> gateaux_grid;
};

struct GleCompareParams {
  double ratio_lo = 1.6, ratio_hi = 2.4;
};

using AnalysisParams = std::variant<SimulateParams, ResponseParams, GreenKuboParams, FpParams, RevcheckParams,
                                    DoubleLimitParams, GleCompareParams>;

struct OutputSpec {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool plot = true;
};

// Validated experiment description. Keys: experiment, seed, model, numerics, analysis, output.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  std::uint64_t seed = 0;
  Model model;
  SimConfig sim;  // sim.seed mirrors seed
  InitSpec init;
  std::optional<Grid1D> grid, p_grid;
  AnalysisParams analysis;
  OutputSpec output;

  void override_seed(std::uint64_t s);
};

// Throws ConfigInvalid naming the offending key ("model.beta: expected number", "seed: required").
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::simulate;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<Verdict> verdicts;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();

  bool pass() const;
  nlohmann::json report() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// CSV per table, report.json, and "x y [yerr]" .dat files for plottable tables, all under
// the output directory. Returns the written paths.
std::vector<std::string> emit_report(const ExperimentResult& r, const OutputSpec& out);

}  // namespace lgv
