"""Slow scalar reference implementations used as test oracles."""

import math

import numpy as np


def _cell(coords, q):
    """Lattice indices (k1, k2) of the cell used for query ``q`` and the clamped coefficient."""
    m = len(coords)
    if m == 1:
        return 0, 0, 0.0
    k1 = 0
    for k in range(m):
        if coords[k] <= q:
            k1 = k
    if k1 == m - 1:
        k1 = m - 2
    k2 = k1 + 1
    coef = (q - coords[k1]) / (coords[k2] - coords[k1])
    return k1, k2, min(max(coef, 0.0), 1.0)


def _nearest(coords, c):
    best = 0
    for k in range(len(coords)):
        if abs(coords[k] - c) <= abs(coords[best] - c):
            best = k
    return best


def loop_interpolate(pilots, pattern, dims, mode):
    """Point-by-point evaluation of the two-corner linear and three-term second-order rules."""
    fc = list(range(pattern.freq_offset, dims[0], pattern.freq_stride))
    tc = list(range(pattern.time_offset, dims[1], pattern.time_stride))
    p = np.asarray(pilots).astype(np.complex128)
    n_r, n_t = p.shape[2], p.shape[3]
    out = np.zeros((dims[0], dims[1], n_r, n_t), dtype=np.complex128)
    for i in range(dims[0]):
        fi1, fi2, a = _cell(fc, i)
        for t in range(dims[1]):
            ti1, ti2, b = _cell(tc, t)
            for r in range(n_r):
                for s in range(n_t):
                    if mode == "paper_linear":
                        out[i, t, r, s] = (1 - a) * (1 - b) * p[fi1, ti1, r, s] + a * b * p[fi2, ti2, r, s]
                    else:
                        near = p[_nearest(fc, 2 * fc[fi1] - fc[fi2]), _nearest(tc, 2 * tc[ti1] - tc[ti2]), r, s]
                        far = p[_nearest(fc, 2 * fc[fi1] + fc[fi2]), _nearest(tc, 2 * tc[ti1] + tc[ti2]), r, s]
                        out[i, t, r, s] = (0.25 * (a * a - a) * (b * b - b) * near
                                           + (1 - a * a) * (1 - b * b) * p[fi1, ti1, r, s]
                                           + 0.25 * (a * a + a) * (b * b + b) * far)
    out = out.astype(np.asarray(pilots).dtype)
    for u, i in enumerate(fc):
        for v, t in enumerate(tc):
            out[i, t] = pilots[u, v]
    return out


def loop_psnr(estimate, truth, peak):
    e = np.asarray(estimate).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    total = 0.0
    for k in range(e.size):
        dr = float(e[k].real) - float(t[k].real)
        di = float(e[k].imag) - float(t[k].imag)
        total += dr * dr + di * di
    mse = total / (2 * e.size) if np.iscomplexobj(e) else total / e.size
    return 10 * math.log10(peak * peak / mse)


def loop_nmse_db(estimates, truths):
    ratios = []
    for e, t in zip(estimates, truths):
        err = power = 0.0
        for ev, tv in zip(np.asarray(e).reshape(-1), np.asarray(t).reshape(-1)):
            err += abs(complex(ev) - complex(tv)) ** 2
            power += abs(complex(tv)) ** 2
        ratios.append(err / power)
    return 10 * math.log10(sum(ratios) / len(ratios))
