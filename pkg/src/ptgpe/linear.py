"""Closed-form treatment of the linear (g = 0) double-delta trap.

With vanishing nonlinearity the wave function is a piecewise combination of
exp(+-kappa*x), so matching through both wells reduces to one analytic
condition on kappa,

    (2k - cL)(2k - cR) = cL * cR * exp(-2*k*a),

where cL = 1 + i*gamma + A and cR = 1 - i*gamma - A are the full well
coefficients.  Roots with Re k > 0 are the bound states.  These closed
forms seed the nonlinear solver and serve as its independent cross-check.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .shooting import GpeConfig, pack_unknowns


def well_coefficients(gamma, asym=0j):
    """Full complex delta coefficients (left, right)."""
    gamma = complex(gamma)
    asym = complex(asym)
    return 1.0 + 1j * gamma + asym, 1.0 - 1j * gamma - asym


def determinant(kappa, a, gamma, asym=0j):
    """Bound-state condition; zero exactly at linear eigenvalues."""
    c_l, c_r = well_coefficients(gamma, asym)
    k = complex(kappa)
    return (2 * k - c_l) * (2 * k - c_r) - c_l * c_r * cmath.exp(-2 * k * a)


def determinant_dk(kappa, a, gamma, asym=0j):
    c_l, c_r = well_coefficients(gamma, asym)
    k = complex(kappa)
    return (
        2 * (2 * k - c_r)
        + 2 * (2 * k - c_l)
        + 2 * a * c_l * c_r * cmath.exp(-2 * k * a)
    )


def linear_spectrum_oracle(a: float, gamma: float, asym=0j):
    """All bound-state kappa with Re kappa > 0, sorted by Re kappa descending.

    Roots of the matching determinant are located by complex Newton
    iteration started from a grid covering the physically possible strip.
    """
    if a <= 0:
        raise ValueError("well separation a must be positive")
    scale = 1.0 + abs(complex(gamma)) + abs(complex(asym))
    roots = []
    re_starts = np.linspace(0.02, 1.2 * scale, 16)
    im_starts = np.linspace(-1.0 * scale, 1.0 * scale, 11)
    for re0 in re_starts:
        for im0 in im_starts:
            k = complex(re0, im0)
            ok = False
            for _ in range(60):
                f = determinant(k, a, gamma, asym)
                df = determinant_dk(k, a, gamma, asym)
                if df == 0:
                    break
                step = f / df
                k -= step
                if abs(step) < 1e-14 * max(1.0, abs(k)):
                    ok = True
                    break
            if not ok or k.real <= 1e-9:
                continue
            if abs(determinant(k, a, gamma, asym)) > 1e-10:
                continue
            if not any(abs(k - r) < 1e-8 for r in roots):
                roots.append(k)
    roots.sort(key=lambda z: -z.real)
    return roots


def linear_branch_point(a: float):
    """(gamma_bp, kappa_bp) where the two real linear levels merge.

    Solves D = 0 together with dD/dkappa = 0 on the real axis by a damped
    2x2 Newton iteration started from a coarse scan of the fold.
    """
    def d_val(k, g):
        return (2 * k - 1) ** 2 + g * g - (1 + g * g) * math.exp(-2 * k * a)

    def d_k(k, g):
        return 4 * (2 * k - 1) + 2 * a * (1 + g * g) * math.exp(-2 * k * a)

    def d_g(k, g):
        return 2 * g * (1 - math.exp(-2 * k * a))

    def d_kk(k, g):
        return 8 - 4 * a * a * (1 + g * g) * math.exp(-2 * k * a)

    def d_kg(k, g):
        return 4 * a * g * math.exp(-2 * k * a)

    # coarse scan: last gamma with two real roots
    def n_real_roots(g):
        ks = np.linspace(1e-4, 1.5, 800)
        vals = (2 * ks - 1) ** 2 + g * g - (1 + g * g) * np.exp(-2 * ks * a)
        return int(np.sum(np.diff(np.sign(vals)) != 0))

    lo, hi = 0.0, 2.0
    if n_real_roots(hi) != 0 or n_real_roots(lo) < 2:
        raise ValueError("no fold bracket found; unexpected geometry")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if n_real_roots(mid) >= 2:
            lo = mid
        else:
            hi = mid
    g = 0.5 * (lo + hi)
    ks = np.linspace(1e-4, 1.5, 4001)
    vals = (2 * ks - 1) ** 2 + g * g - (1 + g * g) * np.exp(-2 * ks * a)
    k = float(ks[np.argmin(np.abs(vals))])
    for _ in range(80):
        f1, f2 = d_val(k, g), d_k(k, g)
        j11, j12 = d_k(k, g), d_g(k, g)
        j21, j22 = d_kk(k, g), d_kg(k, g)
        det = j11 * j22 - j12 * j21
        if det == 0:
            break
        dk = (f1 * j22 - f2 * j12) / det
        dg = (j11 * f2 - j21 * f1) / det
        k, g = k - dk, g - dg
        if abs(dk) + abs(dg) < 1e-14:
            break
    return float(g), float(k)


def linear_state_unknowns(a, gamma, kappa, x_max, asym=0j):
    """Packed shooting unknowns of an exact linear bound state.

    Builds the piecewise-exponential eigenfunction for the given root,
    normalizes its modulus-square integral to one, rotates the global phase
    so the right boundary amplitude is real, and returns the 5-component
    unknown vector used by the shooting solver.
    """
    k = complex(kappa)
    u = a / 2.0
    c_l, _ = well_coefficients(gamma, asym)
    alpha = 1.0 + 0j                       # left outer amplitude of exp(+kx)
    p = alpha * (1.0 - c_l / (2.0 * k))
    q = alpha * cmath.exp(-2.0 * k * u) * c_l / (2.0 * k)
    delta = (p * cmath.exp(k * u) + q * cmath.exp(-k * u)) * cmath.exp(k * u)

    re_k, im_k = k.real, k.imag
    grow = (cmath.exp(2 * re_k * u) - cmath.exp(-2 * re_k * u)).real / (2 * re_k)
    if abs(im_k) > 1e-14:
        cross_len = cmath.sin(2 * im_k * u).real / im_k
    else:
        cross_len = 2 * u
    total = (
        (abs(alpha) ** 2 + abs(delta) ** 2)
        * cmath.exp(-2 * re_k * u).real / (2 * re_k)
        + (abs(p) ** 2 + abs(q) ** 2) * grow
        + 2 * (p * np.conj(q)).real * cross_len
    )
    s = 1.0 / np.sqrt(total)
    eta_l = s * alpha * cmath.exp(-k * x_max)
    eta_r = s * delta * cmath.exp(-k * x_max)
    phase = cmath.exp(-1j * cmath.phase(eta_r))
    eta_l *= phase
    eta_r *= phase
    return pack_unknowns(k.real, k.imag, eta_l.real, eta_l.imag,
                         eta_r.real, complexified=False)


def linear_bound_state_config(a, gamma, kappa, **tols) -> GpeConfig:
    """Convenience config for polishing a linear seed at g = 0."""
    x_max = a / 2 + 12.0 / complex(kappa).real
    return GpeConfig(g=0.0, gamma=complex(gamma), a=a, x_max=x_max, **tols)
