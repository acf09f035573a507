"""Adaptive embedded Runge-Kutta integration on complex state arrays.

The stepper is the classic 12-stage explicit 8(5,3) pair (dop853 tableau)
operating on an arbitrary complex ndarray state, so a whole batch of
trajectories (e.g. a base trajectory plus all finite-difference
perturbations of a shooting solve) advances through one shared sequence of
accepted steps.  Error control is elementwise over the full array with
scale atol + rtol * |y|; ``atol`` may be an array, letting exponentially
growing components run under pure relative control while integral channels
keep an absolute floor.
"""

from __future__ import annotations

import numpy as np

from . import _rk853 as rk
from .errors import StepUnderflow

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 6.0
_ORDER_EXP = -1.0 / 8.0
_TINY = 1e-290


def _scaled_norm(v, scale):
    """RMS over the state dimension, max over batch columns."""
    r = np.abs(v) / scale
    if r.ndim <= 1:
        return float(np.sqrt(np.mean(r * r)))
    return float(np.max(np.sqrt(np.mean(r * r, axis=0))))


def _initial_step(f, t0, y0, k1, direction, span, scale):
    d0 = np.sqrt(np.mean((np.abs(y0) / scale) ** 2))
    d1 = np.sqrt(np.mean((np.abs(k1) / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * span)
    y1 = y0 + direction * h0 * k1
    k2 = f(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean((np.abs(k2 - k1) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1, span)


def integrate_adaptive(
    f,
    t0: float,
    t1: float,
    y0: np.ndarray,
    rtol: float,
    atol,
    max_step: float = np.inf,
    on_step=None,
    scale_fn=None,
):
    """Advance y' = f(t, y) from t0 to t1 with local error <= tolerance.

    ``on_step(t, y, dydt)`` is invoked at the initial point and at every
    accepted step.  ``scale_fn(y_old, y_new) -> array`` overrides the
    default error scale atol + rtol*max(|y_old|, |y_new|); callers use it
    to apply one shared relative scale to groups of coupled components
    (individual components may pass through zero without stalling the
    step size).  Returns (y_end, n_accepted_steps).  Raises StepUnderflow
    when the step size collapses below the resolution of the independent
    variable.
    """
    atol = np.asarray(atol, dtype=float)
    if scale_fn is None:
        def scale_fn(ya, yb):
            return atol + rtol * np.maximum(np.abs(ya), np.abs(yb))
    if t1 == t0:
        if on_step is not None:
            on_step(t0, y0.copy(), f(t0, y0))
        return y0.copy(), 0

    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    t = t0
    y = np.array(y0, dtype=complex, copy=True)
    k1 = f(t, y)
    if on_step is not None:
        on_step(t, y.copy(), k1)

    scale0 = np.maximum(scale_fn(y, y), _TINY)
    h = min(_initial_step(f, t0, y, k1, direction, span, scale0), max_step)
    n_accepted = 0
    n_stages = rk.N_STAGES
    K = [None] * n_stages
    K[0] = k1
    A, B, C, E5, E3 = rk.A, rk.B, rk.C, rk.E5, rk.E3

    while (t1 - t) * direction > 0:
        h = min(h, abs(t1 - t), max_step)
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepUnderflow(
                f"step size {h:.3e} underflow at t = {t:.6g} "
                f"(tolerance rtol={rtol:.1e} unreachable)"
            )
        hd = direction * h
        for i in range(1, n_stages):
            row = A[i]
            acc = row[0] * K[0]
            for j in range(1, i):
                aij = row[j]
                if aij != 0.0:
                    acc = acc + aij * K[j]
            K[i] = f(t + C[i] * hd, y + hd * acc)
        acc = B[0] * K[0]
        for j in range(1, n_stages):
            if B[j] != 0.0:
                acc = acc + B[j] * K[j]
        y_new = y + hd * acc

        err5 = E5[0] * K[0]
        err3 = E3[0] * K[0]
        for j in range(1, n_stages):
            if E5[j] != 0.0:
                err5 = err5 + E5[j] * K[j]
            if E3[j] != 0.0:
                err3 = err3 + E3[j] * K[j]
        scale = np.maximum(scale_fn(y, y_new), _TINY)
        e5 = _scaled_norm(err5, scale)
        e3 = _scaled_norm(err3, scale)
        denom = e5 * e5 + 0.01 * e3 * e3
        err = h * e5 * e5 / np.sqrt(denom) if denom > 0 else 0.0

        if err <= 1.0:
            t = t + hd
            y = y_new
            K[0] = f(t, y)      # first stage of the next step
            n_accepted += 1
            if on_step is not None:
                on_step(t, y.copy(), K[0])
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err ** _ORDER_EXP
            )
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** _ORDER_EXP)
    return y, n_accepted
