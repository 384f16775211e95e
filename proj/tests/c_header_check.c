/* Compiled as C99: the public header must not need a C++ compiler. */
#include <stdio.h>

#include "bayeslista/bayeslista.h"

int main(void) {
  double omega = 0.0, mean = 0.0, var = 0.0;
  bl_status s = bl_soft_threshold_gauss(0.3, 1.0, 0.1, &omega, &mean, &var);
  if (s != BL_OK || !(omega > 0.0 && omega < 1.0) || !(var > 0.0)) {
    fprintf(stderr, "unexpected result: %s\n", bl_last_error());
    return 1;
  }
  printf("bayeslista %s\n", bl_version());
  return 0;
}
