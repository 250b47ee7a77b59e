"""Interface linearization areas: classical mean and exactly well-balanced.

The still-water steady state is preserved exactly if and only if, at every
interface, the linearization area solves the scalar balance equation

    f(A~) = dA + chi(A~) / c~(A~)^2 = 0,
    chi(A~) = g A~ (db + H~ dcos) + Psi~(A~) dS,

because the per-cell pair of preservation conditions (equal interface traces
and equal interface discharges) is an invertible linear combination of the
two per-interface balance residuals.  Solving per interface therefore also
solves the per-cell 2x2 systems, and the two values computed for a shared
interface coincide, so the averaging reconciliation is a no-op.

Pressurized interfaces: ``f`` is affine in ``A~`` and solved in closed form
(for a uniform pipe this is the textbook -c^2 dA / (g db)).  Free-surface
interfaces: ``Psi = 0`` and ``g A~ / c~^2 = T(A~)/cos``, so ``f`` is solved
by a Newton iteration on the wetted angle.  Unsteady states use the observed
wet-area jump; when no root exists the classical mean is used instead and a
warning is logged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .flowstate import FREE_SURFACE, PRESSURIZED, total_head

logger = logging.getLogger(__name__)

__all__ = [
    "AtildeStrategy",
    "SteadyStateError",
    "atilde_classical",
    "atilde_exact_interface",
    "atilde_exact_pair",
    "exact_atilde_batch",
    "snl_residuals",
    "steady_state_next_area",
]


class SteadyStateError(ValueError):
    """A requested steady state does not fit in the pipe."""


@dataclass(frozen=True)
class AtildeStrategy:
    """Choice of the interface linearization area.

    ``kind`` is ``"classical"`` (arithmetic mean) or ``"exact"`` (balance
    equation root).  The Newton iteration of the exact kind runs to its
    float fixed point; ``max_iter`` only caps runaway cases and
    ``accept_tol`` (relative to the cell areas) decides when a stagnated
    iterate is still usable before falling back to the classical mean.
    """

    kind: str = "classical"
    accept_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self):
        if self.kind not in ("classical", "exact"):
            raise ValueError("strategy kind must be 'classical' or 'exact'")
        if self.accept_tol <= 0.0:
            raise ValueError("tolerance must be positive")


def atilde_classical(A_l, A_r):
    """Arithmetic mean of the adjacent wet areas."""
    out = 0.5 * (np.asarray(A_l, dtype=float) + np.asarray(A_r, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def exact_atilde_batch(E, A_l, A_r, S_t, ct_t, R_t, db_dyn, dcos, dS,
                       consts, max_iter=100, accept_tol=1e-12):
    """Vectorized exactly well-balanced linearization areas.

    Returns ``(atilde, fallback)`` where ``fallback`` marks interfaces that
    reverted to the classical mean (no root or no convergence).
    """
    E = np.asarray(E)
    A_l = np.asarray(A_l, dtype=float)
    A_r = np.asarray(A_r, dtype=float)
    mean = 0.5 * (A_l + A_r)
    atilde = mean.copy()
    fallback = np.zeros(mean.shape, dtype=bool)
    dA = A_r - A_l
    g, c = consts.g, consts.c

    pr = np.asarray(E == PRESSURIZED)
    if np.any(pr):
        # f(A~) = dA + g R~ ct dS/(2 c^2) + A~ [g(db + R~ dcos)/c^2 - dS/S~]
        num = dA[pr] + g * R_t[pr] * ct_t[pr] * dS[pr] / (2.0 * c * c)
        den = g * (db_dyn[pr] + R_t[pr] * dcos[pr]) / (c * c) - dS[pr] / S_t[pr]
        den_scale = (g * (np.abs(db_dyn[pr]) + R_t[pr] * np.abs(dcos[pr])) / (c * c)
                     + np.abs(dS[pr]) / S_t[pr])
        solvable = np.abs(den) > 1e-14 * np.maximum(den_scale, 1e-300)
        root = np.where(solvable, -num / np.where(solvable, den, 1.0), mean[pr])
        good = solvable & (root > 0.0) & np.isfinite(root)
        # no geometric jump at all: any value balances, keep the mean
        trivial = (den_scale == 0.0) & (np.abs(num) <= accept_tol * np.maximum(A_l[pr], A_r[pr]))
        sub = atilde[pr]
        sub[good] = root[good]
        atilde[pr] = sub
        fb = ~good & ~trivial
        sub = fallback[pr]
        sub[:] = fb
        fallback[pr] = sub

    fs = ~pr
    if np.any(fs):
        at, fb = _exact_free_surface(
            A_l[fs], A_r[fs], S_t[fs], ct_t[fs], R_t[fs],
            db_dyn[fs], dcos[fs], consts, max_iter, accept_tol)
        atilde[fs] = at
        fallback[fs] = fb
    if np.any(fallback):
        # per-interface events are frequent in unsteady runs; the solver
        # reports an aggregate warning per run
        logger.debug("exact linearization fell back to the classical mean "
                     "on %d interface(s)", int(fallback.sum()))
    return atilde, fallback


def _exact_free_surface(A_l, A_r, S_t, ct_t, R_t, db_dyn, dcos,
                        consts, max_iter, accept_tol):
    """Newton on the wetted angle for f = dA + (T/ct)(db + h dcos) = 0."""
    dA = A_r - A_l
    mean = 0.5 * (A_l + A_r)
    source_scale = np.abs(db_dyn) + R_t * np.abs(dcos)
    trivial = source_scale == 0.0
    need = ~trivial

    atilde = mean.copy()
    fallback = np.zeros(mean.shape, dtype=bool)
    # states with no geometric jump balance only if dA == 0; otherwise there
    # is no root and the classical mean is the honest choice
    fallback[trivial & (np.abs(dA) > accept_tol * np.maximum(A_l, A_r))] = True
    if not np.any(need):
        return atilde, fallback

    R = R_t[need]
    ct = ct_t[need]
    db = db_dyn[need]
    dc = dcos[need]
    target_dA = dA[need]
    om = geometry.angle_from_area(R, np.clip(mean[need], 1e-300, np.pi * R * R))
    om = np.atleast_1d(om)
    lo = np.full_like(om, 1e-9)
    hi = np.full_like(om, 2.0 * math.pi - 1e-9)

    def f_of(om_v):
        sin_h = np.sin(0.5 * om_v)
        cos_h = np.cos(0.5 * om_v)
        T = 2.0 * R * sin_h
        h = -R * cos_h
        return target_dA + (T / ct) * (db + h * dc)

    def fp_of(om_v):
        sin_h = np.sin(0.5 * om_v)
        cos_h = np.cos(0.5 * om_v)
        # d/dom of (2R sin)(db - R cos dc)/ct
        return (R * cos_h * (db - R * cos_h * dc)
                + 2.0 * R * sin_h * (0.5 * R * sin_h * dc)) / ct

    best = om.copy()
    best_f = np.abs(f_of(om))
    conv_tol = 0.25 * np.finfo(float).eps * (A_l[need] + A_r[need])
    om_prev = None
    for _ in range(max_iter):
        f = f_of(om)
        absf = np.abs(f)
        better = absf < best_f
        best[better] = om[better]
        best_f[better] = absf[better]
        if np.all(best_f <= conv_tol):
            break
        fp = fp_of(om)
        ok = np.abs(fp) > 1e-300
        step = np.where(ok, f / np.where(ok, fp, 1.0), 0.0)
        om_next = np.clip(om - step, lo, hi)
        if np.all(om_next == om):
            break
        if om_prev is not None and np.array_equal(om_next, om_prev):
            break  # 2-cycle at the float fixed point
        om_prev = om
        om = om_next
    root_A = geometry.area_from_angle(R, best)
    converged = best_f <= accept_tol * np.maximum(A_l[need], A_r[need])
    sub_a = atilde[need]
    sub_a[converged] = np.atleast_1d(root_A)[converged]
    atilde[need] = sub_a
    sub_f = fallback[need]
    sub_f[~converged] = True
    fallback[need] = sub_f
    return atilde, fallback


def atilde_exact_interface(W_l, W_r, regime, consts,
                           friction_left=0.0, friction_right=0.0,
                           max_iter=100, accept_tol=1e-12):
    """Scalar exactly well-balanced linearization area for one interface."""
    S_t = 0.5 * (W_l.S + W_r.S)
    ct_t = 0.5 * (W_l.cos_theta + W_r.cos_theta)
    R_t = math.sqrt(S_t / math.pi)
    db_dyn = (W_r.b - W_l.b) + friction_left + friction_right
    at, fb = exact_atilde_batch(
        np.array([regime]), np.array([W_l.A]), np.array([W_r.A]),
        np.array([S_t]), np.array([ct_t]), np.array([R_t]),
        np.array([db_dyn]), np.array([W_r.cos_theta - W_l.cos_theta]),
        np.array([W_r.S - W_l.S]), consts,
        max_iter=max_iter, accept_tol=accept_tol)
    return float(at[0]), bool(fb[0])


def _interface_quantities(state_l, geom_l, state_r, geom_r):
    from .riemann import ExtendedState

    W_l = ExtendedState(b=geom_l.b, cos_theta=geom_l.cos_theta, S=geom_l.S,
                        A=state_l.A, Q=state_l.Q)
    W_r = ExtendedState(b=geom_r.b, cos_theta=geom_r.cos_theta, S=geom_r.S,
                        A=state_r.A, Q=state_r.Q)
    return W_l, W_r


def atilde_exact_pair(state_prev, geom_prev, state_mid, geom_mid,
                      state_next, geom_next, consts):
    """Exactly well-balanced pair (A~_{i-1/2}, A~_{i+1/2}) around cell i.

    The two interfaces decouple (see the module docstring), so the pair is
    the two per-interface roots; neighbouring cells therefore compute
    identical values for a shared interface.  Both adjacent states must
    share the regime of ``state_mid`` on each interface side.
    """
    W_p, W_m = _interface_quantities(state_prev, geom_prev, state_mid, geom_mid)
    W_m2, W_n = _interface_quantities(state_mid, geom_mid, state_next, geom_next)
    if state_prev.E != state_mid.E or state_mid.E != state_next.E:
        raise ValueError("atilde_exact_pair requires a single regime")
    left, _ = atilde_exact_interface(W_p, W_m, state_mid.E, consts)
    right, _ = atilde_exact_interface(W_m2, W_n, state_mid.E, consts)
    return left, right


def snl_residuals(atilde_left, atilde_right, state_prev, geom_prev,
                  state_mid, geom_mid, state_next, geom_next, consts):
    """Scaled residuals of the two still-water preservation conditions.

    First entry: equality of the interface traces seen by the middle cell
    (its left-interface right trace versus its right-interface left trace);
    second: equality of the two interface discharges.  Both are evaluated
    from the per-interface balance residuals, scaled by the middle wet area.
    """
    from .riemann import _tilde_coefficients, upwinded_source

    E = state_mid.E
    resid = []
    c_ts = []
    for (s_a, g_a, s_b, g_b, at) in (
            (state_prev, geom_prev, state_mid, geom_mid, atilde_left),
            (state_mid, geom_mid, state_next, geom_next, atilde_right)):
        W_a, W_b = _interface_quantities(s_a, g_a, s_b, g_b)
        psi = upwinded_source(W_a, W_b, E, at, consts)
        S_t = 0.5 * (W_a.S + W_b.S)
        ct_t = 0.5 * (W_a.cos_theta + W_b.cos_theta)
        _, c_t, _, _ = _tilde_coefficients(S_t, ct_t, at, E, consts)
        resid.append((W_b.A - W_a.A) + consts.g * at * psi / c_t**2)
        c_ts.append(c_t)
    a_x, a_y = resid
    r_trace = 0.5 * (a_x + a_y)
    r_discharge = 0.5 * (c_ts[0] * a_x - c_ts[1] * a_y)
    scale = state_mid.A
    return r_trace / scale, r_discharge / (scale * max(c_ts))


def steady_state_next_area(state_i, geom_i, geom_next, regime_next, consts):
    """Wet area of the next cell on the same still-water head line.

    Inverts the total-head equality for the requested regime of the next
    cell: free surface gives the level (h_i cos - db)/cos mapped through the
    circular section, pressurized gives
    A_{i+1} = A_i (S_{i+1}/S_i) exp(-g (db + d(R cos)) / c^2).
    """
    head = total_head(state_i.A, 0.0, state_i.E, geom_i, consts)
    g, c = consts.g, consts.c
    if regime_next == FREE_SURFACE:
        h_next = (head / g - geom_next.b) / geom_next.cos_theta
        if not (-geom_next.R <= h_next <= geom_next.R):
            raise SteadyStateError(
                f"steady free-surface level {h_next:.6g} outside "
                f"[-R, R] = [{-geom_next.R:.6g}, {geom_next.R:.6g}]")
        if h_next <= -geom_next.R * (1.0 - 1e-12):
            raise SteadyStateError("steady state dries the pipe")
        return geometry.wet_area_from_level(geom_next.R, h_next)
    exponent = (head - g * (geom_next.R * geom_next.cos_theta + geom_next.b)) / c**2
    return geom_next.S * math.exp(exponent)
