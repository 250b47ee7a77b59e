"""Pointwise physics of the mixed free-surface/pressurized flow state.

The conservative pair is ``(A, Q)`` where ``A`` is the free-surface
equivalent wet area (``(rho/rho0) S`` when pressurized) and ``Q`` the
equivalent discharge.  The binary regime flag ``E`` selects the branch of
the unified pressure law

    p(A, E) = c^2 (A - Sphys) + g I1(Sphys) cos(theta),

with physical wet area ``Sphys = A`` for free-surface flow and ``Sphys = S``
(full section) when pressurized, which is continuous across the regime
change at ``A = S``.

Functions accept scalars or numpy arrays and broadcast; ``geom`` may be a
single ``CellGeometry`` or any object carrying ``R``, ``S``, ``b``,
``cos_theta`` arrays (e.g. ``PipeGeometry``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import geometry

A_MIN = 1e-14

__all__ = [
    "FlowRegime",
    "FREE_SURFACE",
    "PRESSURIZED",
    "PhysicalConstants",
    "CellState",
    "DryStateError",
    "DegenerateSectionError",
    "physical_wet_area",
    "pressure",
    "flux_momentum",
    "celerity",
    "eigenvalues",
    "total_head",
    "entropy",
    "friction_coefficient",
    "friction_slope",
    "piezometric_head",
]


class FlowRegime(IntEnum):
    FREE_SURFACE = 0
    PRESSURIZED = 1


FREE_SURFACE = int(FlowRegime.FREE_SURFACE)
PRESSURIZED = int(FlowRegime.PRESSURIZED)


class DryStateError(ValueError):
    """Raised when a wet area is at or below the dry-cell guard (1e-14)."""


class DegenerateSectionError(ValueError):
    """Raised when a free-surface celerity is requested at zero width."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Gravity, sonic speed and friction inputs.

    ``c`` is the pressurized sonic speed; ``Ks`` the Strickler roughness
    (the usual tabulated input is ``1/Ks``).  ``beta``/``rho0`` are kept for
    reference when ``c`` was derived from the compressibility.
    """

    g: float = 9.81
    c: float = 1400.0
    Ks: float = 1.0 / 0.012
    rho0: float = 1000.0
    beta: float | None = None

    def __post_init__(self):
        if self.g <= 0.0 or self.c <= 0.0 or self.Ks <= 0.0:
            raise ValueError("g, c and Ks must be positive")

    @classmethod
    def from_compressibility(cls, beta, rho0=1000.0, g=9.81, Ks=1.0 / 0.012):
        c = 1.0 / np.sqrt(beta * rho0)
        return cls(g=g, c=float(c), Ks=Ks, rho0=rho0, beta=beta)


@dataclass(frozen=True)
class CellState:
    """Conservative state of one cell: wet area, discharge, regime flag."""

    A: float
    Q: float
    E: int

    def __post_init__(self):
        if self.A <= A_MIN:
            raise DryStateError(f"wet area {self.A!r} at or below the dry guard")
        if self.E not in (0, 1):
            raise ValueError("regime flag must be 0 or 1")

    @property
    def u(self):
        return self.Q / self.A


def _check_wet(A):
    if np.any(np.asarray(A) <= A_MIN):
        raise DryStateError("wet area at or below the dry guard (1e-14)")


def _regimes(E):
    E = np.asarray(E)
    return E == PRESSURIZED


def physical_wet_area(A, E, S):
    """Sphys: the full section S when pressurized, A otherwise."""
    _check_wet(A)
    out = np.where(_regimes(E), S, A)
    return float(out) if out.ndim == 0 else out


def _saturated_sphys(A, E, S):
    # Free-surface traces may transiently overshoot the full section during a
    # step; the pressure then continues with the just-full branch (the unified
    # law is continuous there).
    return np.where(_regimes(E), S, np.minimum(A, S))


def pressure(A, E, geom, consts):
    """Section-integrated pressure term of the momentum flux."""
    _check_wet(A)
    A = np.asarray(A, dtype=float)
    sphys = _saturated_sphys(A, E, geom.S)
    I1 = geometry.hydrostatic_integral_I1(geom.R, sphys)
    out = consts.c**2 * (A - sphys) + consts.g * I1 * geom.cos_theta
    return float(out) if np.ndim(out) == 0 else out


def flux_momentum(A, Q, E, geom, consts):
    """Momentum flux Q^2/A + p(A, E)."""
    out = np.asarray(Q, dtype=float) ** 2 / np.asarray(A, dtype=float) + pressure(
        A, E, geom, consts
    )
    return float(out) if np.ndim(out) == 0 else out


def celerity(A, E, geom, consts):
    """Local wave celerity: sqrt(g A cos(theta) / T(A)) free surface, c pressurized."""
    _check_wet(A)
    scalar = np.ndim(A) == 0 and np.ndim(E) == 0
    A = np.atleast_1d(np.asarray(A, dtype=float))
    pr = np.atleast_1d(_regimes(E))
    R = np.broadcast_to(np.asarray(geom.R, dtype=float), A.shape)
    S = np.broadcast_to(np.asarray(geom.S, dtype=float), A.shape)
    ct = np.broadcast_to(np.asarray(geom.cos_theta, dtype=float), A.shape)
    pr = np.broadcast_to(pr, A.shape)
    out = np.full(A.shape, consts.c, dtype=float)
    fs = ~pr
    if np.any(fs):
        if np.any(A[fs] >= S[fs]):
            raise DegenerateSectionError("free-surface celerity at zero width")
        T = geometry.surface_width(R[fs], A[fs])
        if np.any(T <= 0.0):
            raise DegenerateSectionError("free-surface celerity at zero width")
        out[fs] = np.sqrt(consts.g * A[fs] * ct[fs] / T)
    return float(out[0]) if scalar else out


def eigenvalues(u, c_loc):
    """Characteristic speeds (u - c, u + c)."""
    u = np.asarray(u, dtype=float)
    c_loc = np.asarray(c_loc, dtype=float)
    lam_m, lam_p = u - c_loc, u + c_loc
    if np.ndim(lam_m) == 0:
        return float(lam_m), float(lam_p)
    return lam_m, lam_p


def _water_level(A, E, geom):
    # H(Sphys): level of the wet area in free surface, the radius when full.
    scalar = np.ndim(A) == 0 and np.ndim(E) == 0
    A = np.atleast_1d(np.asarray(A, dtype=float))
    pr = np.broadcast_to(np.atleast_1d(_regimes(E)), A.shape)
    R = np.broadcast_to(np.asarray(geom.R, dtype=float), A.shape)
    S = np.broadcast_to(np.asarray(geom.S, dtype=float), A.shape)
    out = R.copy()
    fs = ~pr
    if np.any(fs):
        out[fs] = geometry.level_from_wet_area(R[fs], np.minimum(A[fs], S[fs]))
    return float(out[0]) if scalar else out


def total_head(A, Q, E, geom, consts):
    """u^2/2 + c^2 ln(A/Sphys) + g H cos(theta) + g b; constant at rest."""
    _check_wet(A)
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    pr = _regimes(E)
    u = Q / A
    ln_term = np.where(pr, consts.c**2 * np.log(np.maximum(A, A_MIN) / geom.S), 0.0)
    H = _water_level(A, E, geom)
    out = 0.5 * u * u + ln_term + consts.g * (H * geom.cos_theta + geom.b)
    return float(out) if np.ndim(out) == 0 else out


def entropy(A, Q, E, geom, consts):
    """Mathematical entropy density of the model (continuous across regimes)."""
    _check_wet(A)
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    pr = _regimes(E)
    sphys = _saturated_sphys(A, E, geom.S)
    ln_term = np.where(pr, consts.c**2 * A * np.log(np.maximum(A, A_MIN) / geom.S), 0.0)
    zbar = geometry.center_of_mass_depth(geom.R, sphys)
    out = (
        0.5 * Q * Q / A
        + ln_term
        + consts.c**2 * geom.S
        + consts.g * A * (zbar * geom.cos_theta + geom.b)
    )
    return float(out) if np.ndim(out) == 0 else out


def friction_coefficient(A, E, geom, consts):
    """Manning-Strickler coefficient K = 1 / (Ks^2 Rh(Sphys)^{4/3})."""
    _check_wet(A)
    sphys = _saturated_sphys(np.asarray(A, dtype=float), E, geom.S)
    rh = geometry.hydraulic_radius(geom.R, sphys)
    out = 1.0 / (consts.Ks**2 * rh ** (4.0 / 3.0))
    return float(out) if np.ndim(out) == 0 else out


def friction_slope(A, Q, E, geom, consts):
    """Friction source magnitude K(A, E) Q |Q| / A (odd in Q, zero at rest)."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    out = friction_coefficient(A, E, geom, consts) * Q * np.abs(Q) / A
    return float(out) if np.ndim(out) == 0 else out


def piezometric_head(A, E, geom, consts):
    """Engineering head: b + 2R + c^2 (A - S)/(S g) pressurized, b + h(A) free surface."""
    _check_wet(A)
    A = np.asarray(A, dtype=float)
    pr = _regimes(E)
    gauge = consts.c**2 * (A - geom.S) / (geom.S * consts.g)
    level = _water_level(A, E, geom)
    out = np.where(pr, geom.b + 2.0 * geom.R + gauge, geom.b + level)
    return float(out) if np.ndim(out) == 0 else out
