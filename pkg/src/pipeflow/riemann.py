"""Linearized interface Riemann solvers.

A pipe interface couples two piecewise-constant extended states
``W = (b, cos_theta, S, A, Q)``.  Away from regime changes the interface is
solved with the linearized 5x5 convection system: three stationary waves
carry the geometry jump, two genuinely nonlinear waves ``u - c`` / ``u + c``
carry the flow, and upwinding the wave fan yields the interface traces
``AM`` (left of the standing wave), ``AP`` (right of it) and the single
interface discharge ``QMP``.

When the regime differs across the interface, the moving transition point is
treated as a discontinuity with Rankine-Hugoniot conditions; four moving
configurations reduce to two solvers plus the mirror symmetry
``(X, Q) -> (-X, -Q)``, and a stationary transition keeps the adjacent cell
values.

The geometric jump enters the momentum balance across the standing wave as

    chi = g*A~*(db + H~*dcos) + Psi~*dS,

i.e. the section-jump coefficient ``Psi`` multiplies ``dS`` directly, which
is what the eigenstructure of the convection matrix dictates.  The
``upwinded_source`` helper returns ``psi = chi / (g*A~)`` so the classical
trace formulas read ``g*A~*psi`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import geometry
from .flowstate import (
    FREE_SURFACE,
    PRESSURIZED,
    DegenerateSectionError,
    flux_momentum,
)

__all__ = [
    "ExtendedState",
    "InterfaceInput",
    "WaveFan",
    "InterfaceSolution",
    "ResonanceError",
    "DegenerateJumpError",
    "TransitionSolveError",
    "convection_matrix",
    "analytic_wave_fan",
    "upwinded_source",
    "solve_nontransition",
    "predict_interface_speed",
    "solve_transition_pressure_downstream",
    "solve_transition_freesurface_downstream",
    "solve_transition_upstream",
    "solve_interface",
    "transition_residuals_pressure_downstream",
    "transition_residuals_freesurface_downstream",
    "nontransition_traces_batch",
]

_RESONANCE_TOL = 1e-10
_NEWTON_MAX_ITER = 50
_NEWTON_TOL = 1e-12


class ResonanceError(ArithmeticError):
    """Stationary wave coincides with a material wave (|u| = c)."""


class DegenerateJumpError(ArithmeticError):
    """Interface speed prediction with A_r = A_l."""


class TransitionSolveError(ArithmeticError):
    """Newton failed on a transition-point system."""


@dataclass(frozen=True)
class ExtendedState:
    """One side of an interface: geometry plus conservative pair."""

    b: float
    cos_theta: float
    S: float
    A: float
    Q: float

    @property
    def u(self):
        return self.Q / self.A


@dataclass(frozen=True)
class InterfaceInput:
    left: ExtendedState
    right: ExtendedState
    regime_left: int
    regime_right: int
    consts: object
    atilde: float | None = None
    friction_left: float = 0.0   # signed half-cell quadrature (dx/2) K u|u|
    friction_right: float = 0.0


@dataclass(frozen=True)
class WaveFan:
    eigenvalues: np.ndarray     # (5,)  three zeros then u-c, u+c
    eigenvectors: np.ndarray    # (5,5) columns r1..r5
    strengths: np.ndarray       # (5,)

    def reconstruct_jump(self):
        return self.eigenvectors @ self.strengths


@dataclass(frozen=True)
class InterfaceSolution:
    AM: float
    AP: float
    QMP: float
    regime_left: int
    regime_right: int
    w: float | None = None
    kind: str = "nontransition"
    scaled_residual: float = 0.0
    rh_mismatch: float = 0.0
    admissible: bool = True
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def _geom_ns(R, S, b, cos_theta):
    return SimpleNamespace(R=R, S=S, b=b, cos_theta=cos_theta)


def _tilde_coefficients(S_t, ct_t, atilde, E, consts):
    """Celerity, water level and section coefficient of the linearized state."""
    R_t = math.sqrt(S_t / math.pi)
    if E == PRESSURIZED:
        c_t = consts.c
        H_t = R_t
        psi_S = consts.g * R_t * ct_t / 2.0 - consts.c**2 * atilde / S_t
    else:
        a_eff = min(atilde, S_t)
        h = geometry.level_from_wet_area(R_t, a_eff)
        T = 2.0 * math.sqrt(max(R_t * R_t - h * h, 0.0))
        if T <= 0.0:
            raise DegenerateSectionError("linearized free-surface width is zero")
        c_t = math.sqrt(consts.g * atilde * ct_t / T)
        H_t = h
        psi_S = 0.0  # g*Sphys*(dH/dSphys)*cos - c^2 A/Sphys cancels exactly
    return R_t, c_t, H_t, psi_S


def convection_matrix(W: ExtendedState, E, consts):
    """5x5 quasilinear matrix of the extended system at state ``W``."""
    u = W.u
    R = math.sqrt(W.S / math.pi)
    if E == PRESSURIZED:
        c2 = consts.c**2
        H = R
        psi = consts.g * W.S * W.cos_theta / (2.0 * math.pi * R) - c2 * W.A / W.S
    else:
        h = geometry.level_from_wet_area(R, min(W.A, W.S))
        T = 2.0 * math.sqrt(max(R * R - h * h, 0.0))
        if T <= 0.0:
            raise DegenerateSectionError("convection matrix at zero surface width")
        c2 = consts.g * W.A * W.cos_theta / T
        H = h
        psi = consts.g * W.A * (1.0 / T) * W.cos_theta - c2  # identically zero
    D = np.zeros((5, 5))
    D[3, 4] = 1.0
    D[4, :] = [consts.g * W.A, consts.g * W.A * H, psi, c2 - u * u, 2.0 * u]
    return D


def upwinded_source(W_l, W_r, regime, atilde, consts,
                    friction_left=0.0, friction_right=0.0):
    """Normalized upwinded source psi such that g*A~*psi = chi.

    chi is the momentum jump across the standing wave:
    g*A~*(db_dyn + H~*dcos) + Psi~*dS, with the dynamic slope db_dyn holding
    the half-cell friction quadrature of both sides.
    """
    S_t = 0.5 * (W_l.S + W_r.S)
    ct_t = 0.5 * (W_l.cos_theta + W_r.cos_theta)
    _, _, H_t, psi_S = _tilde_coefficients(S_t, ct_t, atilde, regime, consts)
    db_dyn = (W_r.b - W_l.b) + friction_left + friction_right
    dcos = W_r.cos_theta - W_l.cos_theta
    dS = W_r.S - W_l.S
    return db_dyn + H_t * dcos + psi_S * dS / (consts.g * atilde)


def analytic_wave_fan(W_l, W_r, atilde, regime, consts):
    """Wave fan of the linearized problem with the analytic eigenvectors."""
    S_t = 0.5 * (W_l.S + W_r.S)
    ct_t = 0.5 * (W_l.cos_theta + W_r.cos_theta)
    Q_t = 0.5 * (W_l.Q + W_r.Q)
    u_t = Q_t / atilde
    _, c_t, H_t, psi_S = _tilde_coefficients(S_t, ct_t, atilde, regime, consts)
    g = consts.g
    lam = np.array([0.0, 0.0, 0.0, u_t - c_t, u_t + c_t])
    r1 = np.array([c_t**2 - u_t**2, 0.0, 0.0, -g * atilde, 0.0])
    r2 = np.array([psi_S, 0.0, -g * atilde, 0.0, 0.0])
    r3 = np.array([H_t, -1.0, 0.0, 0.0, 0.0])
    r4 = np.array([0.0, 0.0, 0.0, 1.0, lam[3]])
    r5 = np.array([0.0, 0.0, 0.0, 1.0, lam[4]])
    P = np.column_stack([r1, r2, r3, r4, r5])
    db = W_r.b - W_l.b
    dcos = W_r.cos_theta - W_l.cos_theta
    dS = W_r.S - W_l.S
    dA = W_r.A - W_l.A
    dQ = W_r.Q - W_l.Q
    a3 = -dcos
    a2 = -dS / (g * atilde)
    a1 = (db - a2 * psi_S - a3 * H_t) / (c_t**2 - u_t**2)
    DA = dA + g * atilde * a1
    a4 = ((u_t + c_t) * DA - dQ) / (2.0 * c_t)
    a5 = (dQ - (u_t - c_t) * DA) / (2.0 * c_t)
    return WaveFan(lam, P, np.array([a1, a2, a3, a4, a5]))


def solve_nontransition(inp: InterfaceInput):
    """Upwind wave summation at a same-regime interface.

    In the subcritical case this reproduces the closed-form traces

        AM  = A_l + g*A~*psi / (2 c~ (c~ - u~)) + (u~ + c~)/(2 c~) dA
              - dQ / (2 c~)
        QMP = Q_l - g*A~*psi / (2 c~) + (u~^2 - c~^2)/(2 c~) dA
              - (u~ - c~)/(2 c~) dQ
        AP  = AM + g*A~*psi / (u~^2 - c~^2)

    and in super-critical cases it sums the waves by the sign of their
    speeds (the A-equation stays conservative: one shared QMP).
    """
    if inp.regime_left != inp.regime_right:
        raise ValueError("solve_nontransition requires equal regimes")
    E = inp.regime_left
    W_l, W_r = inp.left, inp.right
    consts = inp.consts
    atilde = inp.atilde if inp.atilde is not None else 0.5 * (W_l.A + W_r.A)
    S_t = 0.5 * (W_l.S + W_r.S)
    ct_t = 0.5 * (W_l.cos_theta + W_r.cos_theta)
    u_t = 0.5 * (W_l.Q + W_r.Q) / atilde
    _, c_t, H_t, psi_S = _tilde_coefficients(S_t, ct_t, atilde, E, consts)
    if abs(c_t - abs(u_t)) <= _RESONANCE_TOL * max(1.0, c_t):
        raise ResonanceError("stationary wave coincides with a material wave")
    psi = upwinded_source(W_l, W_r, E, atilde, consts,
                          inp.friction_left, inp.friction_right)
    g = consts.g
    gA1 = g * atilde * psi / (c_t**2 - u_t**2)
    dA = W_r.A - W_l.A
    dQ = W_r.Q - W_l.Q
    DA = dA + gA1
    lam4, lam5 = u_t - c_t, u_t + c_t
    a4 = ((u_t + c_t) * DA - dQ) / (2.0 * c_t)
    a5 = (dQ - (u_t - c_t) * DA) / (2.0 * c_t)
    AM = W_l.A
    QMP = W_l.Q
    if lam4 < 0.0:
        AM += a4
        QMP += a4 * lam4
    if lam5 < 0.0:
        AM += a5
        QMP += a5 * lam5
    AP = AM - gA1
    return InterfaceSolution(AM=AM, AP=AP, QMP=QMP,
                             regime_left=E, regime_right=E)


def predict_interface_speed(A_l, Q_l, A_r, Q_r):
    """Transition-point speed prediction (Q_r - Q_l) / (A_r - A_l)."""
    dA = A_r - A_l
    if abs(dA) < 1e-12 * max(A_l, A_r):
        raise DegenerateJumpError("wet-area jump too small for a speed prediction")
    return (Q_r - Q_l) / dA


def _interface_means(inp):
    S_t = 0.5 * (inp.left.S + inp.right.S)
    ct_t = 0.5 * (inp.left.cos_theta + inp.right.cos_theta)
    return S_t, ct_t


def _chi_left_zone(inp, regime, atilde_l):
    """Momentum source jump chi with the left-zone linearization."""
    S_t, ct_t = _interface_means(inp)
    _, c_l, H_t, psi_S = _tilde_coefficients(S_t, ct_t, atilde_l, regime, inp.consts)
    db_dyn = (inp.right.b - inp.left.b) + inp.friction_left + inp.friction_right
    dcos = inp.right.cos_theta - inp.left.cos_theta
    dS = inp.right.S - inp.left.S
    chi = inp.consts.g * atilde_l * (db_dyn + H_t * dcos) + psi_S * dS
    return chi, c_l


def _right_geom(inp):
    S_r = inp.right.S
    return _geom_ns(math.sqrt(S_r / math.pi), S_r, inp.right.b, inp.right.cos_theta)


def transition_residuals_pressure_downstream(inp, A_m, Q_m):
    """Residuals and scales of the 2-unknown pressurizing-front system.

    Unknowns are the pressurized state (A_m, Q_m) to the left of the moving
    transition; the right state is the given free-surface one.  Equation 1 is
    the Rankine-Hugoniot pair with the front speed eliminated, equation 2 the
    jump across the left acoustic wave u_l - c including the standing-wave
    source.
    """
    W_l, W_r, consts = inp.left, inp.right, inp.consts
    geom_r = _right_geom(inp)
    F_r = flux_momentum(W_r.A, W_r.Q, inp.regime_right, geom_r, consts)
    F_m = flux_momentum(A_m, Q_m, PRESSURIZED, geom_r, consts)
    rh = (W_r.Q - Q_m) ** 2 / (W_r.A - A_m)
    r1 = F_r - F_m - rh
    # scale by the largest constituent of the flux difference: the sonic
    # term dominates the attainable float accuracy
    s1 = max(abs(F_r), abs(F_m), abs(rh),
             consts.c**2 * max(A_m, W_r.A, geom_r.S), 1e-30)
    chi, _ = _chi_left_zone(inp, PRESSURIZED, W_l.A)
    u_l = W_l.u
    c = consts.c
    t_a = (A_m - W_l.A) * (u_l - c)
    t_chi = chi / (c + u_l)
    r2 = (Q_m - W_l.Q) - t_a + t_chi
    s2 = max(abs(Q_m), abs(W_l.Q), abs(t_a), abs(t_chi),
             c * max(A_m, W_l.A), 1e-30)
    return np.array([r1, r2]), np.array([s1, s2])


def transition_residuals_freesurface_downstream(inp, x):
    """Residuals and scales of the 4-unknown depressurizing-front system.

    ``x = (A_m, Q_m, A_p, Q_p)``: free-surface state left of the moving
    transition and pressurized state right of it.  Equations: incoming
    acoustic jump on the pressurized side, Rankine-Hugoniot momentum and mass
    relations with the predicted front speed, and the head jump across the
    transition.
    """
    A_m, Q_m, A_p, Q_p = x
    W_l, W_r, consts = inp.left, inp.right, inp.consts
    geom_r = _right_geom(inp)
    c = consts.c
    u_r = W_r.u
    w_pred = (W_r.Q - W_l.Q) / (W_r.A - W_l.A)

    t1 = (W_r.A - A_p) * (u_r + c)
    r1 = (W_r.Q - Q_p) - t1
    s1 = max(abs(W_r.Q), abs(Q_p), (abs(u_r) + c) * max(W_r.A, A_p), 1e-30)

    F_p = flux_momentum(A_p, Q_p, PRESSURIZED, geom_r, consts)
    F_m = flux_momentum(A_m, Q_m, FREE_SURFACE, geom_r, consts)
    lhs2 = (Q_p - Q_m) * (W_r.Q - W_l.Q)
    rhs2 = (W_r.A - W_l.A) * (F_p - F_m)
    r2 = lhs2 - rhs2
    s2 = max(abs(lhs2), abs(rhs2),
             abs(W_r.A - W_l.A) * c**2 * max(A_p, A_m, geom_r.S), 1e-30)

    h_m = geometry.level_from_wet_area(geom_r.R, min(A_m, geom_r.S))
    head_p = 0.5 * (Q_p / A_p) ** 2 + c**2 * math.log(A_p) \
        + consts.g * geom_r.cos_theta * geom_r.R
    head_m = 0.5 * (Q_m / A_m) ** 2 + c**2 * math.log(A_m) \
        + consts.g * geom_r.cos_theta * h_m
    t3 = w_pred * (Q_p / A_p - Q_m / A_m)
    r3 = head_p - head_m - t3
    s3 = max(abs(head_p), abs(head_m), abs(t3),
             c**2 * max(abs(math.log(A_p)), abs(math.log(A_m)), 1e-3), 1e-30)

    lhs4 = (W_r.Q - W_l.Q) * (A_p - A_m)
    rhs4 = (Q_p - Q_m) * (W_r.A - W_l.A)
    r4 = lhs4 - rhs4
    s4 = max(abs(lhs4), abs(rhs4),
             abs(W_r.Q - W_l.Q) * max(A_p, A_m),
             max(abs(Q_p), abs(Q_m)) * abs(W_r.A - W_l.A), 1e-30)
    return np.array([r1, r2, r3, r4]), np.array([s1, s2, s3, s4])


def _damped_newton(residual_fn, x0, domain_fn, what):
    """Damped Newton with finite-difference Jacobian on a scaled residual."""
    x = np.asarray(x0, dtype=float).copy()
    if not domain_fn(x):
        raise TransitionSolveError(f"{what}: initial guess outside the domain")
    r, s = residual_fn(x)
    norm = float(np.max(np.abs(r) / s))
    n = x.size
    its = 0
    for its in range(1, _NEWTON_MAX_ITER + 1):
        if norm <= _NEWTON_TOL:
            break
        J = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * max(abs(x[j]), 1e-8)
            xp = x.copy()
            xp[j] += h
            if not domain_fn(xp):
                xp[j] = x[j] - h
                h = -h
                if not domain_fn(xp):
                    raise TransitionSolveError(f"{what}: Jacobian stencil infeasible")
            rp, _ = residual_fn(xp)
            J[:, j] = (rp - r) / h
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise TransitionSolveError(f"{what}: singular Jacobian") from exc
        step = 1.0
        accepted = False
        while step >= 1e-6:
            x_try = x + step * dx
            if domain_fn(x_try):
                r_try, s_try = residual_fn(x_try)
                norm_try = float(np.max(np.abs(r_try) / s_try))
                if norm_try < norm or norm_try <= _NEWTON_TOL:
                    x, r, s, norm = x_try, r_try, s_try, norm_try
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
    if norm > 1e-10:
        raise TransitionSolveError(f"{what}: no convergence (residual {norm:.3e})")
    return x, norm, its


def _rh_mismatch(A_m, Q_m, A_p, Q_p, F_m, F_p):
    """Relative disagreement of the two Rankine-Hugoniot speed estimates."""
    dA, dQ = A_p - A_m, Q_p - Q_m
    if abs(dA) < 1e-300:
        return 0.0
    w1 = dQ / dA
    if abs(dQ) < 1e-14 * max(abs(Q_m), abs(Q_p), 1e-30) or abs(dQ) < 1e-300:
        return 0.0 if abs(F_p - F_m) <= 1e-10 * max(abs(F_p), abs(F_m), 1e-30) else math.inf
    w2 = (F_p - F_m) / dQ
    return abs(w1 - w2) / max(abs(w1), abs(w2), 1e-30)


def solve_transition_pressure_downstream(inp: InterfaceInput):
    """Pressurized zone advancing into a free-surface zone (w > 0)."""
    W_l, W_r, consts = inp.left, inp.right, inp.consts
    geom_r = _right_geom(inp)

    def domain(x):
        A_m = x[0]
        return A_m > 1e-12 and abs(W_r.A - A_m) > 1e-13 * max(W_r.A, A_m)

    def residual(x):
        return transition_residuals_pressure_downstream(inp, x[0], x[1])

    x, norm, its = _damped_newton(residual, np.array([W_l.A, W_l.Q]), domain,
                                  "pressure-downstream transition")
    A_m, Q_m = float(x[0]), float(x[1])
    chi, _ = _chi_left_zone(inp, PRESSURIZED, W_l.A)
    u_l = W_l.u
    AP = A_m
    QMP = Q_m
    AM = AP - chi / (u_l**2 - consts.c**2)
    w = (W_r.Q - Q_m) / (W_r.A - A_m)
    F_m = flux_momentum(A_m, Q_m, PRESSURIZED, geom_r, consts)
    F_r = flux_momentum(W_r.A, W_r.Q, inp.regime_right, geom_r, consts)
    rh = _rh_mismatch(A_m, Q_m, W_r.A, W_r.Q, F_m, F_r)
    S_t, ct_t = _interface_means(inp)
    try:
        _, c_r, _, _ = _tilde_coefficients(S_t, ct_t, W_r.A, FREE_SURFACE, consts)
        admissible = (W_r.u + c_r) < w < (u_l + consts.c)
    except (DegenerateSectionError, geometry.GeometryError):
        admissible = False
    return InterfaceSolution(AM=AM, AP=AP, QMP=QMP,
                             regime_left=PRESSURIZED, regime_right=PRESSURIZED,
                             w=w, kind="pressure_downstream",
                             scaled_residual=norm, rh_mismatch=rh,
                             admissible=admissible, iterations=its,
                             extra={"A_minus": A_m, "Q_minus": Q_m})


def _eliminate_plus_state(inp, A_m, Q_m, w_pred):
    # the acoustic jump on the pressurized side and the mass jump across the
    # transition are linear in (A_p, Q_p); eliminating them conditions the
    # Newton iteration far better than the raw 4x4 system (the sonic speed
    # makes that one ill-conditioned)
    W_r = inp.right
    u_r = W_r.u
    c = inp.consts.c
    den = w_pred - u_r - c
    A_p = (W_r.Q - Q_m + w_pred * A_m - W_r.A * (u_r + c)) / den
    Q_p = Q_m + w_pred * (A_p - A_m)
    return A_p, Q_p


def solve_transition_freesurface_downstream(inp: InterfaceInput):
    """Free-surface zone advancing into a pressurized zone (w > 0)."""
    W_l, W_r, consts = inp.left, inp.right, inp.consts
    geom_r = _right_geom(inp)
    w_pred = predict_interface_speed(W_l.A, W_l.Q, W_r.A, W_r.Q)
    u_r = W_r.u
    if abs(w_pred - u_r - consts.c) < 1e-9 * consts.c:
        raise TransitionSolveError("transition speed resonates with the "
                                   "pressurized acoustic wave")

    def domain(x2):
        A_m = x2[0]
        if not 1e-12 < A_m <= geom_r.S * (1.0 + 1e-12):
            return False
        A_p, _ = _eliminate_plus_state(inp, x2[0], x2[1], w_pred)
        return A_p > 1e-12

    def residual(x2):
        A_p, Q_p = _eliminate_plus_state(inp, x2[0], x2[1], w_pred)
        r, s = transition_residuals_freesurface_downstream(
            inp, np.array([x2[0], x2[1], A_p, Q_p]))
        return r[1:3], s[1:3]

    x0 = np.array([min(W_l.A, geom_r.S), W_l.Q])
    x2, _, its = _damped_newton(residual, x0, domain,
                                "free-surface-downstream transition")
    A_m, Q_m = float(x2[0]), float(x2[1])
    A_p, Q_p = _eliminate_plus_state(inp, A_m, Q_m, w_pred)
    r_all, s_all = transition_residuals_freesurface_downstream(
        inp, np.array([A_m, Q_m, A_p, Q_p]))
    norm = float(np.max(np.abs(r_all) / s_all))
    if norm > 1e-10:
        raise TransitionSolveError(
            f"free-surface-downstream transition: residual {norm:.3e}")

    chi, c_l = _chi_left_zone(inp, FREE_SURFACE, W_l.A)
    u_l = W_l.u
    AM = (W_l.A + chi / (2.0 * c_l * (c_l - u_l))
          + (u_l + c_l) / (2.0 * c_l) * (A_m - W_l.A)
          - (Q_m - W_l.Q) / (2.0 * c_l))
    QMP = (W_l.Q - chi / (2.0 * c_l)
           + (u_l**2 - c_l**2) / (2.0 * c_l) * (A_m - W_l.A)
           - (u_l - c_l) / (2.0 * c_l) * (Q_m - W_l.Q))
    AP = AM + chi / (u_l**2 - c_l**2)
    F_m = flux_momentum(A_m, Q_m, FREE_SURFACE, geom_r, consts)
    F_p = flux_momentum(A_p, Q_p, PRESSURIZED, geom_r, consts)
    rh = _rh_mismatch(A_m, Q_m, A_p, Q_p, F_m, F_p)
    admissible = (u_l + c_l) < w_pred < (W_r.u + consts.c)
    return InterfaceSolution(AM=AM, AP=AP, QMP=QMP,
                             regime_left=FREE_SURFACE, regime_right=FREE_SURFACE,
                             w=w_pred, kind="freesurface_downstream",
                             scaled_residual=norm, rh_mismatch=rh,
                             admissible=admissible, iterations=its,
                             extra={"A_minus": A_m, "Q_minus": Q_m,
                                    "A_plus": A_p, "Q_plus": Q_p})


def _mirror_state(W: ExtendedState):
    return ExtendedState(b=W.b, cos_theta=W.cos_theta, S=W.S, A=W.A, Q=-W.Q)


def _mirror_input(inp: InterfaceInput):
    # reflection (X, Q) -> (-X, -Q): sides swap, discharges and the signed
    # friction quadratures change sign
    return InterfaceInput(
        left=_mirror_state(inp.right),
        right=_mirror_state(inp.left),
        regime_left=inp.regime_right,
        regime_right=inp.regime_left,
        consts=inp.consts,
        atilde=inp.atilde,
        friction_left=-inp.friction_right,
        friction_right=-inp.friction_left,
    )


_MIRROR_KEYS = {"A_minus": "A_plus", "A_plus": "A_minus",
                "Q_minus": "Q_plus", "Q_plus": "Q_minus"}


def _mirror_solution(sol: InterfaceSolution):
    extra = {_MIRROR_KEYS.get(k, k): (-v if k.startswith("Q") else v)
             for k, v in sol.extra.items()}
    return InterfaceSolution(
        AM=sol.AP, AP=sol.AM, QMP=-sol.QMP,
        regime_left=sol.regime_right, regime_right=sol.regime_left,
        w=None if sol.w is None else -sol.w,
        kind=sol.kind + "_mirrored",
        scaled_residual=sol.scaled_residual, rh_mismatch=sol.rh_mismatch,
        admissible=sol.admissible, iterations=sol.iterations, extra=extra)


def solve_transition_upstream(inp: InterfaceInput):
    """Upstream-moving transition solved by mirroring the downstream twin."""
    w_pred = predict_interface_speed(inp.left.A, inp.left.Q,
                                     inp.right.A, inp.right.Q)
    if w_pred >= 0.0:
        raise ValueError("upstream transition requires w_pred < 0")
    mirrored = _mirror_input(inp)
    if inp.regime_left == FREE_SURFACE and inp.regime_right == PRESSURIZED:
        sol = solve_transition_pressure_downstream(mirrored)
    elif inp.regime_left == PRESSURIZED and inp.regime_right == FREE_SURFACE:
        sol = solve_transition_freesurface_downstream(mirrored)
    else:
        raise ValueError("not a transition interface")
    return _mirror_solution(sol)


def _stationary_transition(inp: InterfaceInput):
    # a transition point at rest: the traces keep the adjacent cell values
    # and the single interface discharge is the (equal) cell discharge
    return InterfaceSolution(
        AM=inp.left.A, AP=inp.right.A,
        QMP=0.5 * (inp.left.Q + inp.right.Q),
        regime_left=inp.regime_left, regime_right=inp.regime_right,
        w=0.0, kind="stationary_transition")


def solve_interface(inp: InterfaceInput):
    """Dispatch an interface to the proper solver.

    Same regimes go to the linearized solver.  A regime change with a
    degenerate wet-area jump falls back to the non-transition solver using
    the regime of the side the flow points to; a vanishing predicted speed
    keeps the transition stationary; otherwise the four moving cases map to
    the two downstream solvers, mirrored when the front moves upstream.
    """
    if inp.regime_left == inp.regime_right:
        return solve_nontransition(inp)
    dA = inp.right.A - inp.left.A
    if abs(dA) < 1e-12 * max(inp.left.A, inp.right.A):
        q_mean = 0.5 * (inp.left.Q + inp.right.Q)
        qtol = 1e-12 * max(abs(inp.left.Q), abs(inp.right.Q), 1.0)
        regime = inp.regime_right if q_mean > qtol else inp.regime_left
        fallback = InterfaceInput(
            left=inp.left, right=inp.right,
            regime_left=regime, regime_right=regime,
            consts=inp.consts, atilde=inp.atilde,
            friction_left=inp.friction_left, friction_right=inp.friction_right)
        sol = solve_nontransition(fallback)
        return InterfaceSolution(AM=sol.AM, AP=sol.AP, QMP=sol.QMP,
                                 regime_left=regime, regime_right=regime,
                                 kind="degenerate_fallback")
    w_pred = (inp.right.Q - inp.left.Q) / dA
    if abs(w_pred) <= 1e-10 * max(inp.consts.c, 1.0):
        return _stationary_transition(inp)
    if inp.regime_left == PRESSURIZED and inp.regime_right == FREE_SURFACE:
        if w_pred > 0.0:
            return solve_transition_pressure_downstream(inp)
        return solve_transition_upstream(inp)
    if inp.regime_left == FREE_SURFACE and inp.regime_right == PRESSURIZED:
        if w_pred > 0.0:
            return solve_transition_freesurface_downstream(inp)
        return solve_transition_upstream(inp)
    raise ValueError("invalid regime pair")


def nontransition_traces_batch(E, A_l, A_r, Q_l, Q_r, S_t, ct_t, R_t,
                               db_dyn, dcos, dS, atilde, consts):
    """Vectorized non-transition traces; mirrors ``solve_nontransition``.

    ``db_dyn`` already holds the friction quadrature.  Returns
    ``(AM, AP, QMP)`` arrays; raises on resonance or a degenerate linearized
    section so the caller can reject the step.
    """
    E = np.asarray(E)
    pr = E == PRESSURIZED
    fs = ~pr
    g = consts.g
    c_t = np.full(atilde.shape, consts.c, dtype=float)
    H_t = R_t.copy()
    psi_S = np.zeros_like(atilde)
    if np.any(pr):
        psi_S[pr] = g * R_t[pr] * ct_t[pr] / 2.0 - consts.c**2 * atilde[pr] / S_t[pr]
    if np.any(fs):
        a_eff = np.minimum(atilde[fs], S_t[fs])
        h = geometry.level_from_wet_area(R_t[fs], a_eff)
        T = 2.0 * np.sqrt(np.maximum(R_t[fs] ** 2 - h * h, 0.0))
        if np.any(T <= 0.0):
            raise DegenerateSectionError("zero linearized surface width")
        c_t[fs] = np.sqrt(g * atilde[fs] * ct_t[fs] / T)
        H_t[fs] = h
    u_t = 0.5 * (Q_l + Q_r) / atilde
    if np.any(np.abs(c_t - np.abs(u_t)) <= _RESONANCE_TOL * np.maximum(1.0, c_t)):
        raise ResonanceError("stationary wave coincides with a material wave")
    chi = g * atilde * (db_dyn + H_t * dcos) + psi_S * dS
    gA1 = chi / (c_t**2 - u_t**2)
    dA = A_r - A_l
    dQ = Q_r - Q_l
    DA = dA + gA1
    lam4 = u_t - c_t
    lam5 = u_t + c_t
    a4 = ((u_t + c_t) * DA - dQ) / (2.0 * c_t)
    a5 = (dQ - (u_t - c_t) * DA) / (2.0 * c_t)
    take4 = lam4 < 0.0
    take5 = lam5 < 0.0
    AM = A_l + np.where(take4, a4, 0.0) + np.where(take5, a5, 0.0)
    QMP = Q_l + np.where(take4, a4 * lam4, 0.0) + np.where(take5, a5 * lam5, 0.0)
    AP = AM - gA1
    return AM, AP, QMP
