/* Observation sums for the products x_j * x_k over a strip of partners k.
 *
 * Xc is the row-major n x p design.  For every k in [k0, k1):
 *   az[k]  = sum_i z_ik,  azz[k] = sum_i z_ik^2,  azy[k] = sum_i z_ik y_i
 * with z_ik = Xc[i, j] * Xc[i, k].  Each sum is accumulated in observation
 * order; only the k loop is vectorized, so results are bitwise reproducible
 * regardless of tiling or unrolling.
 */
#ifndef ACORSIS_ROWSUMS_H
#define ACORSIS_ROWSUMS_H

#include <stddef.h>

#define ACORSIS_K_TILE 256

static inline void acorsis_row_sums(const double *restrict Xc, ptrdiff_t n, ptrdiff_t p,
                                    const double *restrict y, ptrdiff_t j,
                                    ptrdiff_t k0, ptrdiff_t k1,
                                    double *restrict az, double *restrict azz,
                                    double *restrict azy)
{
    for (ptrdiff_t k = k0; k < k1; ++k) {
        az[k] = 0.0;
        azz[k] = 0.0;
        azy[k] = 0.0;
    }
    for (ptrdiff_t kb = k0; kb < k1; kb += ACORSIS_K_TILE) {
        ptrdiff_t ke = kb + ACORSIS_K_TILE < k1 ? kb + ACORSIS_K_TILE : k1;
        ptrdiff_t i = 0;
        for (; i + 4 <= n; i += 4) {
            const double *restrict r0 = Xc + i * p;
            const double *restrict r1 = r0 + p;
            const double *restrict r2 = r1 + p;
            const double *restrict r3 = r2 + p;
            const double w0 = r0[j], w1 = r1[j], w2 = r2[j], w3 = r3[j];
            const double y0 = y[i], y1 = y[i + 1], y2 = y[i + 2], y3 = y[i + 3];
            for (ptrdiff_t k = kb; k < ke; ++k) {
                double z0 = w0 * r0[k], z1 = w1 * r1[k], z2 = w2 * r2[k], z3 = w3 * r3[k];
                az[k] = (((az[k] + z0) + z1) + z2) + z3;
                azz[k] = (((azz[k] + z0 * z0) + z1 * z1) + z2 * z2) + z3 * z3;
                azy[k] = (((azy[k] + z0 * y0) + z1 * y1) + z2 * y2) + z3 * y3;
            }
        }
        for (; i < n; ++i) {
            const double *restrict r0 = Xc + i * p;
            const double w0 = r0[j], y0 = y[i];
            for (ptrdiff_t k = kb; k < ke; ++k) {
                double z0 = w0 * r0[k];
                az[k] += z0;
                azz[k] += z0 * z0;
                azy[k] += z0 * y0;
            }
        }
    }
}

#endif
