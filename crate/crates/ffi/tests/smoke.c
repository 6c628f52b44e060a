#include <math.h>
#include <stdio.h>
#include "fracevo.h"

int main(void) {
    double lambda = 1.0, u0 = 1.0;
    FracevoOperator *op = NULL;
    FracevoProblem *p = NULL;
    FracevoTrajectory *u = NULL;
    if (fracevo_operator_diagonal(&lambda, 1, &op) != FRACEVO_STATUS_OK) return 1;
    if (fracevo_problem_new(op, 0.5, &u0, 1, NULL, FRACEVO_NONLINEARITY_ZERO, 0.0, 0.0, &p) != FRACEVO_STATUS_OK) return 2;
    if (fracevo_solve(p, 1.0, 256, 0.0, &u) != FRACEVO_STATUS_OK) return 3;
    size_t n = fracevo_trajectory_len(u);
    double values[257];
    if (n != 257 || fracevo_trajectory_values(u, values, n) != FRACEVO_STATUS_OK) return 4;
    /* E_{1/2}(-1) = e erfc(1) */
    if (fabs(values[n - 1] - 0.42758357615580705) > 1e-6) return 5;
    if (fracevo_solve(NULL, 1.0, 8, 0.0, &u) != FRACEVO_STATUS_NULL_POINTER) return 6;
    if (fracevo_last_error_message() == NULL) return 7;
    fracevo_trajectory_free(u);
    fracevo_problem_free(p);
    fracevo_operator_free(op);
    printf("ok %s\n", fracevo_version());
    return 0;
}
