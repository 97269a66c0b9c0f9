// lgvlab run <config.json> [--out DIR] [--seed N] [--threads N]
// Exit codes: 0 all verdicts pass, 2 some verdict fails, 1 error.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lgvlab.h"

namespace {

int report_error(int status) {
  std::fprintf(stderr, "error: %s (%s)\n", lgv_last_error(), lgv_status_name(status));
  return 1;
}

int run(const std::string& config, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
        int threads) {
  if (int s = lgv_set_threads(threads); s != LGV_OK) return report_error(s);
  lgv_config* cfg = nullptr;
  if (int s = lgv_config_load(config.c_str(), &cfg); s != LGV_OK) return report_error(s);
  int status = LGV_OK;
  if (seed) status = lgv_config_set_seed(cfg, *seed);
  if (status == LGV_OK && out) status = lgv_config_set_output_dir(cfg, out->c_str());
  lgv_result* res = nullptr;
  if (status == LGV_OK) status = lgv_run(cfg, &res);
  size_t n_files = 0;
  if (status == LGV_OK) status = lgv_result_emit(res, &n_files);
  if (status != LGV_OK) {
    lgv_result_free(res);
    lgv_config_free(cfg);
    return report_error(status);
  }
  size_t n = 0;
  lgv_result_verdict_count(res, &n);
  for (size_t i = 0; i < n; ++i) {
    const char* name = nullptr;
    double lhs = 0, rhs = 0, tol = 0;
    int pass = 0;
    lgv_result_verdict(res, i, &name, &lhs, &rhs, &tol, &pass);
    std::printf("%s  %s  lhs=%.6g rhs=%.6g tol=%.3g\n", pass ? "PASS" : "FAIL", name, lhs, rhs, tol);
  }
  int passed = 0;
  lgv_result_passed(res, &passed);
  const char* dir = nullptr;
  lgv_config_output_dir(cfg, &dir);
  std::printf("%zu verdict(s), %s; %zu file(s) written to %s\n", n, passed ? "all pass" : "FAILURES", n_files, dir);
  lgv_result_free(res);
  lgv_config_free(cfg);
  return passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Langevin dynamics laboratory: simulation, Fokker-Planck, response and reversibility checks"};
  app.require_subcommand(1);
  auto* cmd = app.add_subcommand("run", "Run one experiment config");
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  cmd->add_option("config", config, "Experiment config (JSON)")->required();
  cmd->add_option("--out", out, "Output directory (overrides output.directory)");
  cmd->add_option("--seed", seed, "Seed override");
  cmd->add_option("--threads", threads, "Worker threads (default: LGVLAB_THREADS or hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return run(config, out, seed, threads);
}
