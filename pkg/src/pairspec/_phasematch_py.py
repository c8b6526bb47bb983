"""Pure-numpy phase-matching reduction (fallback for the compiled kernel).

Contract shared with the compiled implementation: for each frequency point m
sum the complex sinc phase factor over the whitened tensor-product quadrature
nodes,

    out[m] = sum_ij w[i] w[j] sinc(x_ij) exp(i x_ij),
    x_ij   = (dk0[m] + Fx[m,i] + Fy[m,j]) * half_length,
    Fx[m,i] = -cp[m] (fa+fb)^2 + cA[m] fa^2 + cB[m] fb^2,   fa = v0a[m]+pa[i],
                                                            fb = v0b[m]+pb[i],
    Fy[m,j] = same form at the uncentred node pair (pa[j], pb[j]).

`pa, pb` are the 2D whitened node offsets (length K = order^2) and `w` the
matching tensor weights; the x and y transverse blocks share them.

Implementation note (mirrored by the compiled kernel): with
sinc(x) e^{ix} = (e^{2ix} - 1)/(2ix) and x_ij = bx_i + by_j, the phasor
e^{2ix} factorizes into e^{2i bx_i} e^{2i by_j}, so the K^2 inner reduction
needs no transcendentals. Near x = 0 a Taylor series avoids the cancellation
in (e^{2ix} - 1).
"""
from __future__ import annotations

import numpy as np

# cap on the size of the (chunk, K, K) temporaries, in elements
_CHUNK_ELEMENTS = 4_000_000

_SMALL = 1e-3


def phase_matched_sum(dk0, cp, cA, cB, v0a, v0b, pa, pb, w, half_length):
    dk0 = np.ascontiguousarray(dk0, dtype=np.float64)
    m_total = dk0.shape[0]
    k = pa.shape[0]
    out = np.empty(m_total, dtype=np.complex128)
    chunk = max(1, _CHUNK_ELEMENTS // (k * k))
    pa2 = pa**2
    pb2 = pb**2
    pab2 = (pa + pb) ** 2
    for start in range(0, m_total, chunk):
        sl = slice(start, min(start + chunk, m_total))
        cp_c, ca_c, cb_c = cp[sl, None], cA[sl, None], cB[sl, None]
        fa = v0a[sl, None] + pa[None, :]
        fb = v0b[sl, None] + pb[None, :]
        fx = -cp_c * (fa + fb) ** 2 + ca_c * fa**2 + cb_c * fb**2
        fy = -cp_c * pab2[None, :] + ca_c * pa2[None, :] + cb_c * pb2[None, :]

        bx = (dk0[sl, None] + fx) * half_length  # (B, K)
        by = fy * half_length  # (B, K)
        px = np.exp(2j * bx)
        py = np.exp(2j * by)

        x = bx[:, :, None] + by[:, None, :]
        e = px[:, :, None] * py[:, None, :]
        small = np.abs(x) < _SMALL
        xs = np.where(small, 1.0, x)
        phi = np.empty_like(e)
        phi.real = np.where(small, 1.0 - (2.0 / 3.0) * x**2 + (2.0 / 15.0) * x**4,
                            e.imag / (2.0 * xs))
        phi.imag = np.where(small, x - x**3 / 3.0, (1.0 - e.real) / (2.0 * xs))
        out[sl] = np.einsum("i,j,mij->m", w, w, phi, optimize=True)
    return out
