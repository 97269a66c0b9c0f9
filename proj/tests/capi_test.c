/* Exercises the C API from C: parse, run, inspect, and the error path. */
#include <stdio.h>
#include <string.h>

#include "lgvlab.h"

static int failures = 0;

#define EXPECT(cond)                                             \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                \
    }                                                            \
  } while (0)

static const char* kConfig =
    "{\"experiment\": \"gle_compare\", \"seed\": 5,"
    " \"model\": {\"dynamics\": \"gle_augmented\", \"potential\": {\"kind\": \"quadratic\", \"dim\": 1, \"k\": 1.0}},"
    " \"numerics\": {\"dt\": 0.01, \"horizon\": 1.0, \"n_paths\": 8}}";

int main(void) {
  lgv_config* cfg = NULL;
  lgv_result* res = NULL;
  lgv_ensemble* ens = NULL;
  size_t n = 0;
  int passed = -1;
  const char* name = NULL;
  const char* json = NULL;
  int64_t paths = 0, records = 0;
  int dim = 0;
  const double* times = NULL;

  EXPECT(strlen(lgv_version()) > 0);
  EXPECT(lgv_config_parse(kConfig, &cfg) == LGV_OK);
  EXPECT(lgv_config_set_seed(cfg, 9) == LGV_OK);
  EXPECT(lgv_run(cfg, &res) == LGV_OK);
  EXPECT(lgv_result_verdict_count(res, &n) == LGV_OK && n == 1);
  EXPECT(lgv_result_verdict(res, 0, &name, NULL, NULL, NULL, &passed) == LGV_OK);
  EXPECT(name && strstr(name, "gap_ratio") != NULL);
  EXPECT(lgv_result_report_json(res, &json) == LGV_OK && strstr(json, "\"seed\": 9") != NULL);
  EXPECT(lgv_result_verdict(res, 5, &name, NULL, NULL, NULL, NULL) == LGV_INVALID_ARGUMENT);

  EXPECT(lgv_simulate(cfg, &ens) == LGV_OK);
  EXPECT(lgv_ensemble_shape(ens, &paths, &records, &dim) == LGV_OK);
  EXPECT(paths == 8 && records == 101 && dim == 3);
  EXPECT(lgv_ensemble_times(ens, &times) == LGV_OK && times[100] > 0.99);

  lgv_ensemble_free(ens);
  lgv_result_free(res);
  lgv_config_free(cfg);

  cfg = NULL;
  EXPECT(lgv_config_parse("{\"experiment\": \"simulate\"}", &cfg) == LGV_CONFIG_INVALID);
  EXPECT(cfg == NULL);
  EXPECT(strcmp(lgv_last_error(), "seed: required") == 0);
  EXPECT(strcmp(lgv_status_name(LGV_CONFIG_INVALID), "ConfigInvalid") == 0);
  EXPECT(lgv_run(NULL, &res) == LGV_INVALID_ARGUMENT);
  EXPECT(lgv_config_load("/nonexistent/config.json", &cfg) != LGV_OK);
  EXPECT(lgv_set_threads(-1) == LGV_INVALID_ARGUMENT);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
