"""Compiled inner loop of the doubled-leg shooting integration.

Same algorithm as the generic integrator in odeint.py (explicit 8(5,3)
pair, group-relative error scale over the leg components, absolute floor
on the quadrature channels), specialized to the 11-row doubled-leg state
and compiled with numba.  The shooting module falls back to the generic
path when numba is unavailable.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_TOO_MANY_STEPS = 2


@njit(cache=True)
def _rhs(Y, out, k2r, k2i, g, mirror):
    B = Y.shape[1]
    for b in range(B):
        Lr = Y[0, b]; Li = Y[1, b]; dLr = Y[2, b]; dLi = Y[3, b]
        Rr = Y[4, b]; Ri = Y[5, b]; dRr = Y[6, b]; dRi = Y[7, b]
        if mirror:
            nr = Lr * Rr - Li * Ri
            ni = Lr * Ri + Li * Rr
            cr = k2r[b] - g * nr
            ci = k2i[b] - g * ni
            d2Lr = cr * Lr - ci * Li
            d2Li = cr * Li + ci * Lr
            d2Rr = cr * Rr - ci * Ri
            d2Ri = cr * Ri + ci * Rr
        else:
            cLr = k2r[b] - g * (Lr * Lr + Li * Li)
            cRr = k2r[b] - g * (Rr * Rr + Ri * Ri)
            ki2 = k2i[b]
            d2Lr = cLr * Lr - ki2 * Li
            d2Li = cLr * Li + ki2 * Lr
            d2Rr = cRr * Rr - ki2 * Ri
            d2Ri = cRr * Ri + ki2 * Rr
        out[0, b] = dLr; out[1, b] = dLi; out[2, b] = d2Lr; out[3, b] = d2Li
        out[4, b] = -dRr; out[5, b] = -dRi; out[6, b] = -d2Rr; out[7, b] = -d2Ri
        out[8, b] = Lr * Lr + Li * Li + Rr * Rr + Ri * Ri
        out[9, b] = 2.0 * (Lr * Rr - Li * Ri)
        out[10, b] = 2.0 * (Lr * Ri + Li * Rr)


@njit(cache=True)
def _record(ts, ys, d2s, count, t, Y, K0):
    ts[count] = t
    for r in range(8):
        ys[count, r] = Y[r, 0]
    d2s[count, 0] = K0[2, 0]
    d2s[count, 1] = K0[3, 0]
    d2s[count, 2] = -K0[6, 0]
    d2s[count, 3] = -K0[7, 0]
    return count + 1


@njit(cache=True)
def integrate_span(t0, t1, Y, k2r, k2i, g, mirror, rtol, hmax,
                   A8, B8, C8, E5, E3,
                   collect, ts, ys, d2s, count):
    """Advance the doubled-leg state from t0 to t1 (forward only).

    Returns (status, n_samples).  When ``collect`` the initial point and
    every accepted step of batch column 0 are appended to the sample
    arrays starting at index ``count``.
    """
    n, B = Y.shape
    K = np.empty((12, n, B), dtype=np.complex128)
    ytmp = np.empty((n, B), dtype=np.complex128)
    _rhs(Y, K[0], k2r, k2i, g, mirror)
    if collect:
        count = _record(ts, ys, d2s, count, t0, Y, K[0])
    t = t0
    h = min(0.05, hmax, t1 - t0)
    nacc = 0
    while t < t1:
        if t + h > t1:
            h = t1 - t
        if h < 3.6e-15 * max(abs(t), 1.0):
            return STATUS_UNDERFLOW, count
        for i in range(1, 12):
            for r in range(n):
                for b in range(B):
                    acc = 0.0 + 0.0j
                    for j in range(i):
                        a = A8[i, j]
                        if a != 0.0:
                            acc += a * K[j, r, b]
                    ytmp[r, b] = Y[r, b] + h * acc
            _rhs(ytmp, K[i], k2r, k2i, g, mirror)
        for r in range(n):
            for b in range(B):
                acc = 0.0 + 0.0j
                for j in range(12):
                    if B8[j] != 0.0:
                        acc += B8[j] * K[j, r, b]
                ytmp[r, b] = Y[r, b] + h * acc
        # error norms: RMS over rows with the group scale, max over columns
        e5n = 0.0
        e3n = 0.0
        for b in range(B):
            m = 1e-300
            for r in range(8):
                v = abs(Y[r, b])
                if v > m:
                    m = v
                v = abs(ytmp[r, b])
                if v > m:
                    m = v
            sc_leg = rtol * m
            s5 = 0.0
            s3 = 0.0
            for r in range(n):
                if r < 8:
                    sc = sc_leg
                else:
                    q = max(abs(Y[r, b]), abs(ytmp[r, b]))
                    sc = rtol * (1.0 if q < 1.0 else q)
                e5c = 0.0 + 0.0j
                e3c = 0.0 + 0.0j
                for j in range(12):
                    kk = K[j, r, b]
                    if E5[j] != 0.0:
                        e5c += E5[j] * kk
                    if E3[j] != 0.0:
                        e3c += E3[j] * kk
                s5 += (abs(e5c) / sc) ** 2
                s3 += (abs(e3c) / sc) ** 2
            s5 = np.sqrt(s5 / n)
            s3 = np.sqrt(s3 / n)
            if s5 > e5n:
                e5n = s5
            if s3 > e3n:
                e3n = s3
        den = e5n * e5n + 0.01 * e3n * e3n
        err = h * e5n * e5n / np.sqrt(den) if den > 0.0 else 0.0
        if err <= 1.0:
            t += h
            for r in range(n):
                for b in range(B):
                    Y[r, b] = ytmp[r, b]
            _rhs(Y, K[0], k2r, k2i, g, mirror)
            nacc += 1
            if nacc + count >= ts.shape[0] - 1 and collect:
                return STATUS_TOO_MANY_STEPS, count
            if nacc > 2000000:
                return STATUS_TOO_MANY_STEPS, count
            if collect:
                count = _record(ts, ys, d2s, count, t, Y, K[0])
            fac = 6.0 if err == 0.0 else min(6.0, 0.9 * err ** -0.125)
            h = min(h * fac, hmax)
        else:
            h = h * max(0.2, 0.9 * err ** -0.125)
    return STATUS_OK, count
