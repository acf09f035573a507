"""Parameter continuation of bound-state branches.

Natural-parameter continuation: the converged unknown vector at one sweep
value seeds the Newton solve at the next, with automatic step halving on
failure.  On top of that sit the branch-discovery pipelines: the ground and
excited states grown from the exactly solvable g = 0 trap, the PT-broken
pair grown from the linear complex pair, detection of the bifurcation value
gamma_cr where the broken pair terminates on the ground branch, and the
square-root reflection through that fold which seeds the two
analytically-continued real branches below it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchLost, NoConvergence, NonDecaying, SingularJacobian
from .linear import (
    linear_branch_point,
    linear_spectrum_oracle,
    linear_state_unknowns,
)
from .shooting import (
    BoundState,
    GpeConfig,
    SolveMode,
    demote_unknowns,
    promote_unknowns,
    solve_bound_state,
)

_SOLVER_ERRORS = (NoConvergence, SingularJacobian, NonDecaying)


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter family of configurations."""

    base: GpeConfig
    parameter: str                 # "gamma" | "asym" | "g"
    values: tuple

    def __post_init__(self):
        if self.parameter not in ("gamma", "asym", "g"):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))


def config_at(base: GpeConfig, parameter: str, value) -> GpeConfig:
    value = complex(value)
    if parameter == "gamma":
        return base.with_params(gamma=value)
    if parameter == "asym":
        return base.with_params(asym=value)
    if parameter == "g":
        if abs(value.imag) > 0:
            raise ValueError("nonlinearity strength sweep must stay real")
        return base.with_params(g=value.real)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def adapt_unknowns(u, cfg: GpeConfig, demote_tol: float = 1e-4):
    """Re-pack an unknown vector for the target mode (5 <-> 10)."""
    u = np.asarray(u, dtype=float)
    if len(u) == cfg.n_unknowns:
        return u.copy()
    if cfg.n_unknowns == 10:
        return promote_unknowns(u)
    return demote_unknowns(u, tol=demote_tol)


def solve_from(cfg: GpeConfig, seed_unknowns) -> BoundState:
    return solve_bound_state(cfg, adapt_unknowns(seed_unknowns, cfg))


def continue_branch(sweep: SweepSpec, seed: BoundState,
                    continuity_tol: float = 0.25,
                    max_halvings: int = 14) -> list[BoundState]:
    """One converged state per sweep value, continuously connected.

    The previous solution seeds each Newton solve; a failed solve (or a
    jump of the recombined kappa beyond ``continuity_tol``) bisects the
    parameter step until it succeeds or the halving budget is exhausted,
    which raises BranchLost carrying the last good parameter value.
    """
    values = sweep.values
    if len(values) == 0:
        return [seed]

    state = solve_from(config_at(sweep.base, sweep.parameter, values[0]),
                       seed.unknowns)
    out = [state]
    for target in values[1:]:
        state = _advance(sweep, state, complex(target),
                         continuity_tol, max_halvings)
        out.append(state)
    return out


def _param_value(sweep: SweepSpec, state: BoundState) -> complex:
    cfg = state.config
    return complex(getattr(cfg, sweep.parameter if sweep.parameter != "g" else "g"))


def _advance(sweep, state, target, continuity_tol, depth):
    cfg = config_at(sweep.base, sweep.parameter, target)
    try:
        new = solve_from(cfg, state.unknowns)
        if abs(new.kappa - state.kappa) <= continuity_tol:
            return new
    except _SOLVER_ERRORS:
        pass
    if depth <= 0:
        raise BranchLost(_param_value(sweep, state))
    here = _param_value(sweep, state)
    mid = 0.5 * (here + target)
    if abs(mid - here) < 1e-13 * max(1.0, abs(here)):
        raise BranchLost(here)
    half = _advance(sweep, state, mid, continuity_tol, depth - 1)
    return _advance(sweep, half, target, continuity_tol, depth - 1)


# ---------------------------------------------------------------------------
# branch discovery
# ---------------------------------------------------------------------------


def _gamma_steps(start, stop, step=0.025):
    n = max(2, int(abs(stop - start) / step) + 2)
    return np.linspace(start, stop, n)


def linear_seed_state(a, gamma, kappa, **tols) -> BoundState:
    """Polished shooting state for one exact linear (g = 0) root."""
    x_max = a / 2 + 12.0 / complex(kappa).real
    cfg = GpeConfig(g=0.0, gamma=complex(gamma), a=a, x_max=None, **tols)
    u = linear_state_unknowns(a, complex(gamma).real, kappa, x_max)
    return solve_bound_state(cfg, u)


def ground_and_excited(g, a, gamma=0.0, **tols):
    """The two PT-symmetric branches at (g, gamma), grown from g = 0."""
    roots = linear_spectrum_oracle(a, 0.0)
    if len(roots) < 2:
        raise ValueError(f"trap with a={a} does not bind two linear states")
    states = []
    for kappa in roots[:2]:
        st = linear_seed_state(a, 0.0, kappa, **tols)
        if g > 0:
            sweep = SweepSpec(st.config, "g", np.linspace(0.0, g, max(2, int(g / 0.125) + 2)))
            st = continue_branch(sweep, st)[-1]
        if abs(complex(gamma)) > 0:
            sweep = SweepSpec(st.config, "gamma", _gamma_steps(0.0, complex(gamma).real))
            st = continue_branch(sweep, st)[-1]
        states.append(st)
    return states[0], states[1]


def pt_partner_state(state: BoundState) -> BoundState:
    """The complex-conjugate partner psi*(-x) of a state at real parameters."""
    u = state.unknowns
    if len(u) != 5:
        raise ValueError("PT partner construction expects a real-mode state")
    kr, ki, el_r, el_i, er_r = u
    eta_l = complex(er_r, 0.0)                 # conj of the right amplitude
    eta_r = complex(el_r, -el_i)               # conj of the left amplitude
    phase = cmath.exp(-1j * cmath.phase(eta_r)) if eta_r != 0 else 1.0
    eta_l *= phase
    eta_r *= phase
    u_new = np.array([kr, -ki, eta_l.real, eta_l.imag, eta_r.real])
    return solve_bound_state(state.config, u_new)


def broken_pair(g, a, gamma_target, **tols):
    """The PT-broken pair at (g, gamma_target), grown from the linear pair.

    The linear trap has an exactly known complex-conjugate pair above its
    branch point; continuation in g and then in gamma transports it to the
    requested parameters.  Requires gamma_target above the bifurcation
    value of the broken branch.
    """
    gbp0, _ = linear_branch_point(a)
    gamma_path = gbp0 + 0.06
    roots = linear_spectrum_oracle(a, gamma_path)
    plus_root = next(r for r in roots if r.imag > 1e-10)
    st = linear_seed_state(a, gamma_path, plus_root, **tols)
    if g > 0:
        sweep = SweepSpec(st.config, "g", np.linspace(0.0, g, max(2, int(g / 0.1) + 2)))
        st = continue_branch(sweep, st)[-1]
    sweep = SweepSpec(st.config, "gamma", _gamma_steps(gamma_path, gamma_target, 0.02))
    st = continue_branch(sweep, st)[-1]
    return st, pt_partner_state(st)


@dataclass
class GammaCrDetection:
    """Result of locating the triple point on the broken branch."""

    gamma_cr: float
    bracket: tuple
    pair_plus: BoundState          # broken branch just above gamma_cr
    walk: list = field(default_factory=list)   # (gamma, Im kappa) records


def detect_gamma_cr(g, a, im_floor=1e-8, refine_width=1e-6, **tols) -> GammaCrDetection:
    """Bifurcation value where the PT-broken pair meets the ground branch.

    Walks the Im kappa of the broken branch toward its zero crossing with
    fold-aware step control, then refines by bisection on branch
    solvability down to ``refine_width``.
    """
    gbp0, _ = linear_branch_point(a)
    gamma_hi = gbp0 + 0.06
    state, _ = broken_pair(g, a, gamma_hi, **tols)
    gamma = gamma_hi
    walk = [(gamma, state.kappa.imag)]
    step = 0.02
    slope = None
    best = state
    while True:
        im2 = state.kappa.imag ** 2
        if slope is not None and slope > 0:
            # Im k^2 is locally linear in gamma; stay clear of the fold
            step = min(step, max(0.45 * im2 / slope, 2e-6))
        target = gamma - step
        try:
            nxt = solve_from(config_at(state.config, "gamma", target), state.unknowns)
        except _SOLVER_ERRORS:
            step *= 0.5
            if step < 5e-7:
                break
            continue
        if nxt.kappa.imag <= im_floor:
            step *= 0.5
            if step < 5e-7:
                break
            continue
        prev_im2, prev_gamma = state.kappa.imag ** 2, gamma
        state, gamma = nxt, target
        best = state
        walk.append((gamma, state.kappa.imag))
        im2 = state.kappa.imag ** 2
        if prev_gamma != gamma:
            slope = (prev_im2 - im2) / (prev_gamma - gamma)
        if state.kappa.imag < 2e-4:
            break

    # bisection on solvability of the broken branch
    hi = gamma                         # solvable
    anchor = best

    def solvable(gam):
        try:
            st = solve_from(config_at(anchor.config, "gamma", gam), anchor.unknowns)
        except _SOLVER_ERRORS:
            return False, None
        return st.kappa.imag > im_floor, st

    if slope and slope > 0:
        width = max(4.0 * walk[-1][1] ** 2 / slope, 1e-4)
    else:
        width = 1e-3
    lo = hi - width
    for _ in range(30):
        ok, st = solvable(lo)
        if not ok:
            break
        hi, anchor = lo, st
        width *= 2.0
        lo = hi - width
    else:
        raise BranchLost(hi, "could not bracket the broken-branch endpoint")
    while hi - lo > refine_width:
        mid = 0.5 * (hi + lo)
        ok, st = solvable(mid)
        if ok:
            hi = mid
            anchor = st
        else:
            lo = mid
    gamma_cr = 0.5 * (hi + lo)
    return GammaCrDetection(gamma_cr=gamma_cr, bracket=(lo, hi),
                            pair_plus=anchor, walk=walk)


def detect_gamma_bp(g, a, gamma_from, step=0.005, **tols):
    """Fold value where the two real PT-symmetric levels merge.

    Continues the ground and excited branches upward in gamma until the
    branch is lost, then extrapolates the square of the level gap to zero.
    """
    ground, excited = ground_and_excited(g, a, gamma_from, **tols)
    records = []
    gamma = gamma_from
    st_g, st_e = ground, excited
    cur_step = step
    while cur_step > 1e-6:
        target = gamma + cur_step
        try:
            n_g = solve_from(config_at(st_g.config, "gamma", target), st_g.unknowns)
            n_e = solve_from(config_at(st_e.config, "gamma", target), st_e.unknowns)
        except _SOLVER_ERRORS:
            cur_step *= 0.5
            continue
        gap = abs(n_g.kappa - n_e.kappa)
        if gap < 1e-6 or abs(n_g.kappa.imag) > 1e-6:
            cur_step *= 0.5
            continue
        st_g, st_e, gamma = n_g, n_e, target
        records.append((gamma, gap))
        if gap < 5e-3:
            break
    if len(records) < 3:
        raise BranchLost(gamma, "insufficient fold data for gamma_bp")
    gs = np.array([r[0] for r in records[-6:]])
    d2 = np.array([r[1] for r in records[-6:]]) ** 2
    slope, intercept = np.polyfit(gs, d2, 1)
    return float(-intercept / slope)


def continued_pair_states(g, a, gamma_values, detection=None, **tols):
    """The two analytically-continued real branches below gamma_cr.

    Reflects the PT-broken pair through the square-root fold at gamma_cr
    (real difference vector above becomes an imaginary one below), polishes
    both seeds in the doubly-complexified mode, and continues them down the
    requested gamma values (descending, all below gamma_cr).

    Returns (detection, branch_a, branch_b) where the branches are lists of
    states aligned with ``gamma_values``.
    """
    if detection is None:
        detection = detect_gamma_cr(g, a, **tols)
    gamma_cr = detection.gamma_cr
    plus = detection.pair_plus
    delta = max(plus.config.gamma.real - gamma_cr, 1e-4)
    ref_gamma = gamma_cr + delta
    plus = solve_from(config_at(plus.config, "gamma", ref_gamma), plus.unknowns)
    minus = pt_partner_state(plus)

    u_c = 0.5 * (plus.unknowns + minus.unknowns)
    d = 0.5 * (plus.unknowns - minus.unknowns)
    below = gamma_cr - delta
    cfg_full = GpeConfig(
        g=g, gamma=below, a=a, mode=SolveMode.FULL_CONTINUATION,
        ode_tol=plus.config.ode_tol, newton_tol=plus.config.newton_tol,
        symmetry_tol=plus.config.symmetry_tol,
    )
    branches = []
    for sign in (+1.0, -1.0):
        seed = promote_unknowns(u_c)
        seed[1::2] += sign * d
        branches.append(solve_bound_state(cfg_full, seed))

    gamma_values = [complex(v).real for v in gamma_values]
    out_a, out_b = [], []
    for st, sink in zip(branches, (out_a, out_b)):
        sweep = SweepSpec(st.config, "gamma", [below] + gamma_values)
        states = continue_branch(sweep, st)
        sink.extend(states[1:])
    return detection, out_a, out_b


# ---------------------------------------------------------------------------
# spectrum provider for contour tracing
# ---------------------------------------------------------------------------


class GpeSpectrumProvider:
    """Tracks a fixed set of bound states over a complexified parameter.

    Implements the spectrum-provider protocol used by the contour tracer:
    ``eigenvalues(z, carry)`` returns the recombined kappa of every tracked
    branch at parameter value z, where ``carry`` holds the branch states of
    the previously evaluated point (``None`` uses the seeds).  The outer
    cutoff is frozen across the whole contour so every solve sees the same
    truncated domain.
    """

    def __init__(self, seeds, parameter: str, labels=None):
        if parameter not in ("gamma", "asym"):
            raise ValueError("contour parameter must be 'gamma' or 'asym'")
        self.parameter = parameter
        self.seeds = list(seeds)
        min_re = min(s.kappa.real for s in self.seeds)
        if min_re <= 0:
            raise NonDecaying("contour seeds must have Re kappa > 0")
        base = self.seeds[0].config
        self.base_cfg = base.with_params(x_max=base.a / 2 + 12.0 / min_re)
        self.labels = list(labels) if labels else [
            f"branch{k}" for k in range(len(self.seeds))
        ]

    def eigenvalues(self, z, carry=None):
        states = carry if carry is not None else self.seeds
        cfg = config_at(self.base_cfg, self.parameter, z)
        new_states = [solve_from(cfg, st.unknowns) for st in states]
        return [st.kappa for st in new_states], new_states
