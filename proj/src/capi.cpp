#include "lgvlab.h"

#include <exception>
#include <new>
#include <string>

#include "lgv/error.hpp"
#include "lgv/experiment.hpp"
#include "lgv/parallel.hpp"

struct lgv_config {
  lgv::ExperimentConfig cfg;
};

struct lgv_result {
  lgv::ExperimentResult result;
  lgv::OutputSpec output;
  std::string report;
};

struct lgv_ensemble {
  lgv::Ensemble ens;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& what) {
  g_last_error = what;
  return code;
}

// Every entry point funnels through here so no exception crosses the C boundary.
template <class F>
int guarded(F&& f) {
  try {
    f();
    return LGV_OK;
  } catch (const lgv::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LGV_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LGV_INTERNAL, e.what());
  }
}

int null_arg(const char* name) { return set_error(LGV_INVALID_ARGUMENT, std::string(name) + " is null"); }

}  // namespace

extern "C" {

const char* lgv_version(void) { return "0.1.0"; }

const char* lgv_last_error(void) { return g_last_error.c_str(); }

const char* lgv_status_name(int status) {
  return status == LGV_OK ? "Ok" : lgv::error_name(static_cast<lgv::ErrorCode>(status));
}

int lgv_set_threads(int n) {
  if (n < 0) return set_error(LGV_INVALID_ARGUMENT, "thread count must be >= 0");
  lgv::set_thread_count(n);
  return LGV_OK;
}

int lgv_config_load(const char* path, lgv_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new lgv_config{lgv::load_config(path)}; });
}

int lgv_config_parse(const char* json_text, lgv_config** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new lgv_config{lgv::parse_config_text(json_text)}; });
}

int lgv_config_set_seed(lgv_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("cfg");
  cfg->cfg.override_seed(seed);
  return LGV_OK;
}

int lgv_config_set_output_dir(lgv_config* cfg, const char* dir) {
  if (!cfg) return null_arg("cfg");
  if (!dir || !*dir) return set_error(LGV_INVALID_ARGUMENT, "output directory is empty");
  cfg->cfg.output.directory = dir;
  return LGV_OK;
}

int lgv_config_output_dir(const lgv_config* cfg, const char** dir) {
  if (!cfg) return null_arg("cfg");
  if (!dir) return null_arg("dir");
  *dir = cfg->cfg.output.directory.c_str();
  return LGV_OK;
}

void lgv_config_free(lgv_config* cfg) { delete cfg; }

int lgv_run(const lgv_config* cfg, lgv_result** out) {
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* r = new lgv_result{lgv::run_experiment(cfg->cfg), cfg->cfg.output, {}};
    r->report = r->result.report().dump(2);
    *out = r;
  });
}

int lgv_result_passed(const lgv_result* r, int* passed) {
  if (!r) return null_arg("r");
  if (!passed) return null_arg("passed");
  *passed = r->result.pass() ? 1 : 0;
  return LGV_OK;
}

int lgv_result_verdict_count(const lgv_result* r, size_t* n) {
  if (!r) return null_arg("r");
  if (!n) return null_arg("n");
  *n = r->result.verdicts.size();
  return LGV_OK;
}

int lgv_result_verdict(const lgv_result* r, size_t i, const char** name, double* lhs, double* rhs, double* tolerance,
                       int* pass) {
  if (!r) return null_arg("r");
  if (i >= r->result.verdicts.size()) return set_error(LGV_INVALID_ARGUMENT, "verdict index out of range");
  const auto& v = r->result.verdicts[i];
  if (name) *name = v.name.c_str();
  if (lhs) *lhs = v.lhs;
  if (rhs) *rhs = v.rhs;
  if (tolerance) *tolerance = v.tolerance;
  if (pass) *pass = v.pass ? 1 : 0;
  return LGV_OK;
}

int lgv_result_report_json(const lgv_result* r, const char** json) {
  if (!r) return null_arg("r");
  if (!json) return null_arg("json");
  *json = r->report.c_str();
  return LGV_OK;
}

int lgv_result_emit(const lgv_result* r, size_t* n_files) {
  if (!r) return null_arg("r");
  return guarded([&] {
    const auto files = lgv::emit_report(r->result, r->output);
    if (n_files) *n_files = files.size();
  });
}

void lgv_result_free(lgv_result* r) { delete r; }

int lgv_simulate(const lgv_config* cfg, lgv_ensemble** out) {
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new lgv_ensemble{lgv::simulate(cfg->cfg.model, cfg->cfg.sim, cfg->cfg.init)}; });
}

int lgv_ensemble_shape(const lgv_ensemble* e, int64_t* n_paths, int64_t* n_records, int* state_dim) {
  if (!e) return null_arg("e");
  if (n_paths) *n_paths = e->ens.n_paths;
  if (n_records) *n_records = e->ens.n_records;
  if (state_dim) *state_dim = e->ens.state_dim;
  return LGV_OK;
}

int lgv_ensemble_times(const lgv_ensemble* e, const double** times) {
  if (!e) return null_arg("e");
  if (!times) return null_arg("times");
  *times = e->ens.times.data();
  return LGV_OK;
}

int lgv_ensemble_states(const lgv_ensemble* e, const double** states) {
  if (!e) return null_arg("e");
  if (!states) return null_arg("states");
  *states = e->ens.states.data();
  return LGV_OK;
}

void lgv_ensemble_free(lgv_ensemble* e) { delete e; }

}  // extern "C"
