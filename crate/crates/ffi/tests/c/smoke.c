#include <math.h>
#include <stdio.h>
#include "riesz_rpo.h"

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      const char *m = rr_last_error_message();                   \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,     \
              m ? m : "no message");                             \
      return 1;                                                  \
    }                                                            \
  } while (0)

int main(void) {
  double v = 0.0;
  CHECK(rr_ht_representer_value(0.5, 1, &v) == RR_STATUS_OK && v == 2.0);
  CHECK(rr_expected_inverse_neighbourhood(2, 0.5, &v) == RR_STATUS_OK &&
        fabs(v - 0.75) < 1e-15);
  CHECK(rr_ht_representer_value(1.5, 1, &v) == RR_STATUS_INVALID_ARGUMENT);
  CHECK(rr_last_error_message() != NULL);

  RrSimConfig *cfg = NULL;
  CHECK(rr_sim_config_new(&cfg) == RR_STATUS_OK);
  CHECK(rr_sim_config_set_dgp(cfg, RR_DGP_NETWORK) == RR_STATUS_OK);
  CHECK(rr_sim_config_set_size(cfg, 60, 0.2, 50) == RR_STATUS_OK);
  CHECK(rr_sim_config_set_seed(cfg, 7) == RR_STATUS_OK);

  RrSimReport *report = NULL;
  CHECK(rr_run_simulation(cfg, 1, &report) == RR_STATUS_OK);
  RrReportSummary s;
  CHECK(rr_sim_report_summary(report, &s) == RR_STATUS_OK && s.reps == 50);
  CHECK(s.coverage >= 0.0 && s.coverage <= 1.0);
  CHECK(rr_sim_report_rejection(report, 0.05, &v) == RR_STATUS_OK);
  rr_sim_report_free(report);
  rr_sim_config_free(cfg);
  printf("ok %s\n", rr_version());
  return 0;
}
