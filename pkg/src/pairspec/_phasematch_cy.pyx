# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled phase-matching reduction.

Same contract and numerics as the numpy fallback (see _phasematch_py):
per frequency point, sum sinc(x) e^{ix} over the whitened tensor-product
quadrature nodes, using the phasor factorization
sinc(x) e^{ix} = (e^{2ix} - 1)/(2ix) with e^{2ix} = e^{2i bx_i} e^{2i by_j},
which keeps transcendentals out of the K^2 inner loop. The loop releases the
GIL so callers can spread row chunks over threads.
"""
from libc.math cimport cos, sin
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double _SMALL = 1e-3


def phase_matched_sum(
    double[::1] dk0,
    double[::1] cp,
    double[::1] cA,
    double[::1] cB,
    double[::1] v0a,
    double[::1] v0b,
    double[::1] pa,
    double[::1] pb,
    double[::1] w,
    double half_length,
):
    cdef Py_ssize_t m_total = dk0.shape[0]
    cdef Py_ssize_t k = pa.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(m_total, dtype=np.complex128)
    cdef double complex[::1] out_v = out
    cdef Py_ssize_t m, i, j
    cdef double fa, fb, cpm, cam, cbm, x, x2, re, im, wi, wij
    cdef double er, ei, pr, pi_, qr, qi
    cdef double *bx
    cdef double *by
    cdef double *pxr
    cdef double *pxi
    cdef double *pyr
    cdef double *pyi

    with nogil:
        bx = <double *> malloc(k * sizeof(double))
        by = <double *> malloc(k * sizeof(double))
        pxr = <double *> malloc(k * sizeof(double))
        pxi = <double *> malloc(k * sizeof(double))
        pyr = <double *> malloc(k * sizeof(double))
        pyi = <double *> malloc(k * sizeof(double))
        if bx == NULL or by == NULL or pxr == NULL or pxi == NULL or pyr == NULL or pyi == NULL:
            with gil:
                free(bx); free(by); free(pxr); free(pxi); free(pyr); free(pyi)
                raise MemoryError()
        for m in range(m_total):
            cpm = cp[m]
            cam = cA[m]
            cbm = cB[m]
            for i in range(k):
                fa = v0a[m] + pa[i]
                fb = v0b[m] + pb[i]
                x = (dk0[m] - cpm * (fa + fb) * (fa + fb) + cam * fa * fa + cbm * fb * fb) * half_length
                bx[i] = x
                pxr[i] = cos(2.0 * x)
                pxi[i] = sin(2.0 * x)
                x = (-cpm * (pa[i] + pb[i]) * (pa[i] + pb[i]) + cam * pa[i] * pa[i] + cbm * pb[i] * pb[i]) * half_length
                by[i] = x
                pyr[i] = cos(2.0 * x)
                pyi[i] = sin(2.0 * x)
            re = 0.0
            im = 0.0
            for i in range(k):
                wi = w[i]
                pr = pxr[i]
                pi_ = pxi[i]
                for j in range(k):
                    wij = wi * w[j]
                    x = bx[i] + by[j]
                    if -_SMALL < x < _SMALL:
                        x2 = x * x
                        re += wij * (1.0 - (2.0 / 3.0) * x2 + (2.0 / 15.0) * x2 * x2)
                        im += wij * (x - x2 * x / 3.0)
                    else:
                        qr = pyr[j]
                        qi = pyi[j]
                        er = pr * qr - pi_ * qi
                        ei = pr * qi + pi_ * qr
                        re += wij * ei / (2.0 * x)
                        im += wij * (1.0 - er) / (2.0 * x)
            out_v[m] = re + 1j * im
        free(bx); free(by); free(pxr); free(pxi); free(pyr); free(pyi)
    return out
