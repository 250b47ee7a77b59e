"""Circular cross-section geometry of a closed pipe.

The water level ``h`` is measured from the pipe axis, so ``h`` ranges over
``[-R, R]``.  The wetted part of the circle is parameterised by the central
angle ``om`` in ``[0, 2*pi]``:

    A(om)  = R^2 (om - sin om) / 2          wet area
    h(om)  = -R cos(om / 2)                 water level
    T(om)  = 2 R sin(om / 2)                free-surface width
    P_m    = R om                           wetted perimeter

All functions are pure, accept scalars or numpy arrays, and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FULL_ANGLE = 2.0 * math.pi

__all__ = [
    "GeometryError",
    "CellGeometry",
    "PipeGeometry",
    "area_from_angle",
    "level_from_angle",
    "width_from_angle",
    "angle_from_level",
    "angle_from_area",
    "wet_area_from_level",
    "level_from_wet_area",
    "surface_width",
    "wetted_perimeter",
    "hydraulic_radius",
    "hydrostatic_integral_I1",
    "center_of_mass_depth",
    "pressure_source_I_term",
]


class GeometryError(ValueError):
    """Raised for out-of-domain geometric inputs."""


def _maybe_scalar(x, scalar):
    return float(x) if scalar else x


def area_from_angle(R, omega):
    """Wet area of a circular section from the wetted central angle."""
    R = np.asarray(R, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return 0.5 * R * R * (omega - np.sin(omega))


def level_from_angle(R, omega):
    return -np.asarray(R, dtype=float) * np.cos(0.5 * np.asarray(omega, dtype=float))


def width_from_angle(R, omega):
    return 2.0 * np.asarray(R, dtype=float) * np.sin(0.5 * np.asarray(omega, dtype=float))


def angle_from_level(R, h):
    R = np.asarray(R, dtype=float)
    h = np.asarray(h, dtype=float)
    ratio = np.clip(h / R, -1.0, 1.0)
    return 2.0 * (np.pi - np.arccos(ratio))


def angle_from_area(R, A, max_iter=80):
    """Invert A(om) = R^2 (om - sin om)/2 on [0, 2*pi].

    Safeguarded Newton on the angle: the bracket [lo, hi] is maintained from
    the sign of the residual and the iterate falls back to its midpoint
    whenever the Newton step leaves the bracket or the derivative degenerates.
    Iterates until the residual stops improving (float fixed point).
    """
    scalar = np.ndim(R) == 0 and np.ndim(A) == 0
    R = np.atleast_1d(np.asarray(R, dtype=float))
    A = np.atleast_1d(np.asarray(A, dtype=float))
    R, A = np.broadcast_arrays(R, A)
    target = 2.0 * A / (R * R)  # om - sin om
    target = np.clip(target, 0.0, FULL_ANGLE)

    # piecewise initial guess: cubic asymptotics near the empty/full limits
    om = np.where(
        target < 0.1,
        np.cbrt(6.0 * target),
        np.where(
            target > FULL_ANGLE - 0.1,
            FULL_ANGLE - np.cbrt(6.0 * (FULL_ANGLE - target)),
            np.pi + 0.5 * (target - np.pi),
        ),
    )
    lo = np.zeros_like(om)
    hi = np.full_like(om, FULL_ANGLE)
    best = om.copy()
    best_res = np.full_like(om, np.inf)
    for _ in range(max_iter):
        f = om - np.sin(om) - target
        absf = np.abs(f)
        improved = absf < best_res
        best = np.where(improved, om, best)
        best_res = np.where(improved, absf, best_res)
        if np.all(best_res == 0.0):
            break
        lo = np.where(f < 0.0, om, lo)
        hi = np.where(f > 0.0, om, hi)
        fp = 1.0 - np.cos(om)
        step_ok = fp > 1e-14
        nwt = om - f / np.where(step_ok, fp, 1.0)
        inside = step_ok & (nwt > lo) & (nwt < hi)
        om_next = np.where(inside, nwt, 0.5 * (lo + hi))
        if np.all(om_next == om):
            break
        om = om_next
    return float(best[0]) if scalar else best


def wet_area_from_level(R, h):
    """Wet area below level ``h`` (from the axis), for ``h`` in ``[-R, R]``."""
    scalar = np.ndim(R) == 0 and np.ndim(h) == 0
    R = np.asarray(R, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(np.abs(h) > R * (1.0 + 1e-12)):
        raise GeometryError("water level outside [-R, R]")
    out = area_from_angle(R, angle_from_level(R, h))
    return _maybe_scalar(out, scalar)


def level_from_wet_area(R, A):
    """Water level such that the forward map returns ``A`` (0 < A <= pi R^2)."""
    scalar = np.ndim(R) == 0 and np.ndim(A) == 0
    R = np.asarray(R, dtype=float)
    A = np.asarray(A, dtype=float)
    S = np.pi * R * R
    if np.any(A <= 0.0):
        raise GeometryError("wet area must be positive")
    if np.any(A > S * (1.0 + 1e-12)):
        raise GeometryError("wet area exceeds the full section")
    om = angle_from_area(R, np.minimum(A, S))
    return _maybe_scalar(level_from_angle(R, om), scalar)


def surface_width(R, A):
    """Free-surface width T(A); tends to 0 at the full section."""
    scalar = np.ndim(R) == 0 and np.ndim(A) == 0
    R = np.asarray(R, dtype=float)
    h = level_from_wet_area(R, A)
    return _maybe_scalar(2.0 * np.sqrt(np.maximum(R * R - h * h, 0.0)), scalar)


def wetted_perimeter(R, S_phys):
    """Arc length of the wall in contact with water; 2 pi R when full."""
    scalar = np.ndim(R) == 0 and np.ndim(S_phys) == 0
    R = np.asarray(R, dtype=float)
    om = angle_from_area(R, np.asarray(S_phys, dtype=float))
    return _maybe_scalar(R * om, scalar)


def hydraulic_radius(R, S_phys):
    """Wet area over wetted perimeter; R/2 for the full section."""
    scalar = np.ndim(R) == 0 and np.ndim(S_phys) == 0
    S_phys = np.asarray(S_phys, dtype=float)
    if np.any(S_phys <= 0.0):
        raise GeometryError("wet area must be positive")
    return _maybe_scalar(S_phys / wetted_perimeter(R, S_phys), scalar)


def hydrostatic_integral_I1(R, S_phys):
    """Hydrostatic pressure integral int_{-R}^{h} (h - Z) sigma(Z) dZ.

    Closed form for sigma(Z) = 2 sqrt(R^2 - Z^2):

        I1 = h^2 sqrt(R^2 - h^2) + h R^2 (asin(h/R) + pi/2)
             + (2/3) (R^2 - h^2)^(3/2)

    which gives pi R^3 at the full section.
    """
    scalar = np.ndim(R) == 0 and np.ndim(S_phys) == 0
    R = np.asarray(R, dtype=float)
    h = np.asarray(level_from_wet_area(R, S_phys), dtype=float)
    root = np.sqrt(np.maximum(R * R - h * h, 0.0))
    out = (
        h * h * root
        + h * R * R * (np.arcsin(np.clip(h / R, -1.0, 1.0)) + 0.5 * np.pi)
        + (2.0 / 3.0) * root**3
    )
    return _maybe_scalar(out, scalar)


def center_of_mass_depth(R, S_phys):
    """Z-coordinate of the center of mass of the wet section: h - I1/A."""
    scalar = np.ndim(R) == 0 and np.ndim(S_phys) == 0
    S_phys = np.asarray(S_phys, dtype=float)
    h = level_from_wet_area(R, S_phys)
    return _maybe_scalar(h - hydrostatic_integral_I1(R, S_phys) / S_phys, scalar)


def pressure_source_I_term(R, S_phys):
    """Section-variation pressure coefficient of a circular pipe.

    Evaluates (H pi/2 + H asin(H/R) + sigma(H)/2) / (2 pi) at the water level
    H of ``S_phys``.  Continuous in ``S_phys`` and equal to 1/2 at the full
    section; provided for diagnostics (the interface scheme never uses it).
    """
    scalar = np.ndim(R) == 0 and np.ndim(S_phys) == 0
    R = np.asarray(R, dtype=float)
    H = np.asarray(level_from_wet_area(R, S_phys), dtype=float)
    sigma = 2.0 * np.sqrt(np.maximum(R * R - H * H, 0.0))
    out = (0.5 * np.pi * H + H * np.arcsin(np.clip(H / R, -1.0, 1.0)) + 0.5 * sigma) / (
        2.0 * np.pi
    )
    return _maybe_scalar(out, scalar)


@dataclass(frozen=True)
class CellGeometry:
    """Piecewise-constant geometry of one cell of the discretised pipe."""

    x_center: float
    dx: float
    R: float
    S: float
    b: float
    cos_theta: float
    sin_theta: float

    def __post_init__(self):
        if self.R <= 0.0 or self.dx <= 0.0:
            raise GeometryError("cell radius and length must be positive")
        if abs(self.S - math.pi * self.R**2) > 1e-9 * self.S:
            raise GeometryError("S must equal pi R^2 for a circular pipe")
        if abs(self.cos_theta**2 + self.sin_theta**2 - 1.0) > 1e-9:
            raise GeometryError("direction cosines must be normalised")
        if self.cos_theta <= 0.0:
            raise GeometryError("cos(theta) must be positive (moderate slope)")


class PipeGeometry:
    """Discretised pipe held as per-cell arrays (radius, elevation, angle).

    Attributes are read-only numpy arrays of equal length: ``x_center``,
    ``dx``, ``R``, ``S``, ``b``, ``cos_theta``, ``sin_theta``.
    """

    def __init__(self, x_center, dx, R, b, cos_theta, sin_theta, length=None):
        self.x_center = np.asarray(x_center, dtype=float)
        self.dx = np.asarray(dx, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.cos_theta = np.asarray(cos_theta, dtype=float)
        self.sin_theta = np.asarray(sin_theta, dtype=float)
        self.S = np.pi * self.R * self.R
        n = self.x_center.size
        if n < 1:
            raise GeometryError("a pipe needs at least one cell")
        for arr in (self.dx, self.R, self.b, self.cos_theta, self.sin_theta):
            if arr.size != n:
                raise GeometryError("geometry arrays must have equal length")
        if np.any(np.diff(self.x_center) <= 0.0):
            raise GeometryError("cell centers must be strictly increasing")
        if np.any(self.R <= 0.0) or np.any(self.dx <= 0.0):
            raise GeometryError("radii and cell lengths must be positive")
        if np.any(self.cos_theta <= 0.0):
            raise GeometryError("cos(theta) must be positive")
        self.length = float(self.dx.sum()) if length is None else float(length)
        if abs(self.dx.sum() - self.length) > 1e-9 * max(self.length, 1.0):
            raise GeometryError("cell lengths must sum to the pipe length")
        for arr in (self.x_center, self.dx, self.R, self.S, self.b,
                    self.cos_theta, self.sin_theta):
            arr.flags.writeable = False

    @property
    def n_cells(self):
        return self.x_center.size

    def cell(self, i):
        return CellGeometry(
            x_center=float(self.x_center[i]),
            dx=float(self.dx[i]),
            R=float(self.R[i]),
            S=float(self.S[i]),
            b=float(self.b[i]),
            cos_theta=float(self.cos_theta[i]),
            sin_theta=float(self.sin_theta[i]),
        )

    @classmethod
    def from_profile(cls, length, n_cells, radius_upstream, radius_downstream,
                     elevation_upstream, elevation_downstream):
        """Uniform mesh with affine radius and elevation between the ends.

        The axis slope is constant, sin(theta) = (b_down - b_up) / length,
        and must stay below 1 in magnitude.
        """
        if n_cells < 1:
            raise GeometryError("n_cells must be >= 1")
        if length <= 0.0:
            raise GeometryError("length must be positive")
        if radius_upstream <= 0.0 or radius_downstream <= 0.0:
            raise GeometryError("radii must be positive")
        slope = (elevation_downstream - elevation_upstream) / length
        if abs(slope) >= 1.0:
            raise GeometryError("axis slope magnitude must be below 1")
        dx = np.full(n_cells, length / n_cells)
        x = (np.arange(n_cells) + 0.5) * (length / n_cells)
        frac = x / length
        R = radius_upstream + (radius_downstream - radius_upstream) * frac
        b = elevation_upstream + (elevation_downstream - elevation_upstream) * frac
        sin_t = np.full(n_cells, slope)
        cos_t = np.sqrt(1.0 - sin_t**2)
        return cls(x, dx, R, b, cos_t, sin_t, length=length)
