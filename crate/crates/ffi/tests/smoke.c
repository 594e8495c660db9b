/* End-to-end exercise of the C ABI: derive, solve, evaluate, error paths.
 * Compiled and run by the c_link integration test. Prints one line per
 * check; exits nonzero on the first failure. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "heunruin.h"

static int fail(const char *what) {
  const char *msg = hr_last_error_message();
  fprintf(stderr, "smoke: %s (%s)\n", what, msg ? msg : "no message");
  return 1;
}

int main(void) {
  printf("version %s\n", hr_version());

  struct HrModelParams p = {1.0, 1.0, 0.5, 0.05, 0.15, 0.4, 0.4};
  struct HrDerivedParams d;
  if (hr_derive(&p, &d) != HrStatus_Ok) return fail("derive");
  printf("gamma %.10f\n", d.gamma);
  if (fabs(d.gamma - 7.03125) > 1e-9) return fail("gamma value");

  struct HrSolution *sol = NULL;
  if (hr_solve(&p, NULL, &sol) != HrStatus_Ok) return fail("solve");

  double phi0, phi, psi;
  if (hr_phi0(sol, &phi0) != HrStatus_Ok) return fail("phi0");
  printf("phi0 %.10f\n", phi0);
  if (hr_phi(sol, 10.0, &phi) != HrStatus_Ok) return fail("phi(10)");
  if (hr_psi(sol, 10.0, &psi) != HrStatus_Ok) return fail("psi(10)");
  printf("phi(10)+psi(10) %.15f\n", phi + psi);
  if (fabs(phi + psi - 1.0) > 1e-12) return fail("phi + psi = 1");

  double resid;
  if (hr_ide_residual(sol, 5.0, 1e-8, &resid) != HrStatus_Ok) return fail("residual");
  printf("ide residual %.3e\n", resid);

  struct HrTailInfo tail;
  if (hr_tail_info(sol, &tail) != HrStatus_Ok) return fail("tail info");
  if (!(tail.k_ruin > 0.0)) return fail("k_ruin positive");

  /* Small-budget MC against the solved curve: loose 5-sigma agreement. */
  struct HrMcConfig mc;
  if (hr_mc_config_default(&mc) != HrStatus_Ok) return fail("mc defaults");
  mc.n_paths = 4000;
  mc.dt = 0.02;
  mc.horizon = 60.0;
  struct HrMcResult est;
  if (hr_estimate_psi(&p, 1.0, &mc, &est) != HrStatus_Ok) return fail("estimate");
  double exact;
  if (hr_psi(sol, 1.0, &exact) != HrStatus_Ok) return fail("psi(1)");
  double allowance = 5.0 * est.std_err + (double)est.survived_censored / (double)est.n_paths;
  printf("mc diff %.4f allowance %.4f\n", fabs(est.psi_hat - exact), allowance);
  if (fabs(est.psi_hat - exact) > allowance) return fail("mc agreement");

  hr_solution_free(sol);
  hr_solution_free(NULL); /* no-op by contract */

  /* Error paths: a degenerate strategy (gamma <= 1) still derives fine but
   * must be rejected at solve time with a readable message. */
  struct HrModelParams deg = {1.0, 1.0, 0.5, 0.05, 0.15, 10.0, 1.0};
  struct HrDerivedParams dd;
  if (hr_derive(&deg, &dd) != HrStatus_Ok) return fail("degenerate derive");
  if (fabs(dd.gamma - 0.003) > 1e-15) return fail("degenerate gamma");
  struct HrSolution *dsol = NULL;
  if (hr_solve(&deg, NULL, &dsol) != HrStatus_DegenerateModel) return fail("degenerate status");
  if (dsol != NULL) return fail("degenerate handle not null");
  const char *msg = hr_last_error_message();
  if (!msg || strlen(msg) == 0) return fail("degenerate message");
  printf("degenerate message ok\n");

  if (hr_phi(NULL, 1.0, &phi) != HrStatus_InvalidArgument) return fail("null handle status");

  printf("smoke ok\n");
  return 0;
}
