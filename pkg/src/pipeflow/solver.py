"""Explicit first-order finite-volume time loop.

Each step solves every interface (vectorized on the same-regime ones, the
rare transition interfaces individually), updates the conservative pair

    A_i <- A_i - dt/dx (QMP_{i+1/2} - QMP_{i-1/2})
    Q_i <- Q_i - dt/dx (F(AM_{i+1/2}, QMP_{i+1/2}) - F(AP_{i-1/2}, QMP_{i-1/2}))

with the momentum flux evaluated on the cell's own geometry and the regime
carried by each trace, then applies the regime-indicator automaton.  Friction
enters through the upwinded dynamic slope inside the interface source, never
as a separate pointwise term.

Time stepping is sequential; within a step all interface solves are
independent and evaluated in a fixed order, so results do not depend on any
worker count (the implementation is single-threaded numpy).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import geometry, riemann, wellbalance
from .flowstate import (
    FREE_SURFACE,
    PRESSURIZED,
    CellState,
    DegenerateSectionError,
    PhysicalConstants,
    celerity,
    entropy,
    flux_momentum,
    friction_slope,
    piezometric_head,
    physical_wet_area,
    total_head,
)
from .geometry import PipeGeometry
from .riemann import (
    ExtendedState,
    InterfaceInput,
    ResonanceError,
    TransitionSolveError,
)
from .wellbalance import AtildeStrategy, SteadyStateError, steady_state_next_area

logger = logging.getLogger(__name__)

__all__ = [
    "Hydrograph",
    "BoundaryCondition",
    "SimulationConfig",
    "SimulationState",
    "StepDiagnostics",
    "TransitionAudit",
    "RunResult",
    "SolverError",
    "PositivityError",
    "cfl_timestep",
    "apply_boundary_conditions",
    "step",
    "advance",
    "update_regime",
    "build_steady_state",
    "run",
]

_MAX_RETRIES = 10


class SolverError(RuntimeError):
    """Unrecoverable failure of the time loop."""


class PositivityError(ArithmeticError):
    """A step produced a non-positive or non-finite wet area."""


@dataclass(frozen=True)
class Hydrograph:
    """Piecewise-linear boundary signal with strictly increasing times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.size == 0 or self.times.size != self.values.size:
            raise ValueError("hydrograph needs matching, non-empty samples")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("hydrograph times must be strictly increasing")
        object.__setattr__(self, "_warned", [False])

    def __call__(self, t):
        if (t < self.times[0] or t > self.times[-1]) and not self._warned[0]:
            logger.warning("hydrograph evaluated outside its time range at "
                           "t=%.6g; clamping to the nearest sample", t)
            self._warned[0] = True
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class BoundaryCondition:
    """``wall`` (mirror), ``head`` (piezometric) or ``discharge``."""

    kind: str = "wall"
    hydrograph: Hydrograph | None = None

    def __post_init__(self):
        if self.kind not in ("wall", "head", "discharge"):
            raise ValueError("boundary kind must be wall, head or discharge")
        if self.kind != "wall" and self.hydrograph is None:
            raise ValueError(f"{self.kind} boundary needs a hydrograph")


@dataclass(frozen=True)
class SimulationConfig:
    t_end: float
    cfl: float = 0.8
    strategy: AtildeStrategy = field(default_factory=AtildeStrategy)
    friction_enabled: bool = False
    upstream: BoundaryCondition = field(default_factory=BoundaryCondition)
    downstream: BoundaryCondition = field(default_factory=BoundaryCondition)
    record_interval: float | None = None

    def __post_init__(self):
        if not (0.0 < self.cfl < 1.0):
            raise ValueError("cfl must lie in (0, 1)")
        if self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")


@dataclass
class SimulationState:
    """Cell fields at one instant; arrays are owned by the state."""

    t: float
    A: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    step_count: int = 0

    @classmethod
    def from_fields(cls, t, A, Q, E):
        return cls(t=float(t), A=np.array(A, dtype=float),
                   Q=np.array(Q, dtype=float), E=np.array(E, dtype=np.int64))

    def copy(self):
        return SimulationState(self.t, self.A.copy(), self.Q.copy(),
                               self.E.copy(), self.step_count)

    def cell_state(self, i):
        return CellState(A=float(self.A[i]), Q=float(self.Q[i]), E=int(self.E[i]))

    def mass(self, geom):
        return float(np.sum(self.A * geom.dx))

    def total_entropy(self, geom, consts):
        return float(np.sum(entropy(self.A, self.Q, self.E, geom, consts) * geom.dx))


@dataclass
class StepDiagnostics:
    t: float
    dt: float
    mass: float
    entropy: float
    max_cfl: float
    retries: int = 0


@dataclass
class TransitionAudit:
    """Aggregate health of the transition solves over a run."""

    count: int = 0
    max_scaled_residual: float = 0.0
    max_rh_mismatch: float = 0.0
    admissibility_violations: int = 0

    def record(self, sol):
        if sol.kind in ("nontransition", "stationary_transition",
                        "degenerate_fallback"):
            return
        self.count += 1
        self.max_scaled_residual = max(self.max_scaled_residual,
                                       sol.scaled_residual)
        self.max_rh_mismatch = max(self.max_rh_mismatch, sol.rh_mismatch)
        if not sol.admissible:
            self.admissibility_violations += 1


@dataclass
class RunResult:
    state: SimulationState
    records: list
    diagnostics: list
    transition_audit: TransitionAudit
    atilde_fallbacks: int = 0


def cfl_timestep(state, geom, config, consts):
    """dt = cfl * min(dx) / max(|u| + c) over the cells."""
    c = celerity(state.A, state.E, geom, consts)
    speed = np.abs(state.Q / state.A) + c
    vmax = float(np.max(speed))
    if not math.isfinite(vmax) or vmax <= 0.0:
        raise SolverError("non-finite wave speed")
    return config.cfl * float(np.min(geom.dx)) / vmax


def update_regime(E, A_new, S):
    """Regime automaton applied after the wet-area update.

    A free-surface cell pressurizes exactly when its new area reaches the
    full section.  A pressurized cell stays pressurized while A >= S; below
    the full section it stays pressurized (depression) unless an adjacent
    cell was free surface, i.e. the new flag is the product of the old
    neighbour flags.  Domain ends reuse the boundary cell's own flag for the
    missing neighbour.
    """
    E = np.asarray(E, dtype=np.int64)
    full = np.asarray(A_new) >= np.asarray(S)
    padded = np.concatenate(([E[0]], E, [E[-1]]))
    neighbour_product = padded[:-2] * padded[2:]
    return np.where(E == FREE_SURFACE,
                    full.astype(np.int64),
                    np.where(full, 1, neighbour_product)).astype(np.int64)


def _invariant_shift(A_from, A_to, R, S, cos_theta, consts):
    # Riemann-invariant increment int c/A dA used to couple the ghost
    # discharge to the interior one; split at the full section, midpoint
    # rule on the free-surface part, exact c ln(A) on the pressurized part.
    def fs_part(a0, a1):
        if a0 == a1:
            return 0.0
        mid = min(0.5 * (a0 + a1), S * (1.0 - 1e-9))
        T = geometry.surface_width(R, mid)
        c_mid = math.sqrt(consts.g * mid * cos_theta / T)
        return c_mid / mid * (a1 - a0)

    def pr_part(a0, a1):
        return consts.c * math.log(a1 / a0)

    if A_from <= S and A_to <= S:
        return fs_part(A_from, A_to)
    if A_from >= S and A_to >= S:
        return pr_part(A_from, A_to)
    if A_from < S:
        return fs_part(A_from, S) + pr_part(S, A_to)
    return pr_part(A_from, S) + fs_part(S, A_to)


def _ghost_from_head(cell: CellState, geom_cell, consts, target_head):
    """Ghost state whose piezometric head matches the hydrograph.

    The area follows from the head through the output convention (free
    surface below the crown level, pressurized above); the discharge matches
    the outgoing Riemann invariant of the adjacent cell.
    """
    h_target = target_head - geom_cell.b
    if h_target < geom_cell.R:
        h_min = -geom_cell.R * (1.0 - 1e-9)
        if h_target < h_min:
            logger.warning("head boundary below the pipe invert; clamping")
            h_target = h_min
        A_g = geometry.wet_area_from_level(geom_cell.R, h_target)
        E_g = FREE_SURFACE
    else:
        A_g = geom_cell.S * (1.0 + consts.g * (h_target - 2.0 * geom_cell.R)
                             / consts.c**2)
        E_g = PRESSURIZED
    u_cell = cell.Q / cell.A
    u_g = u_cell + _invariant_shift(cell.A, A_g, geom_cell.R, geom_cell.S,
                                    geom_cell.cos_theta, consts)
    return CellState(A=A_g, Q=A_g * u_g, E=E_g)


def apply_boundary_conditions(state, geom, config, consts, t):
    """Ghost states for both ends; ghost geometry copies the end cell."""
    first = state.cell_state(0)
    last = state.cell_state(-1)
    bc_up, bc_dn = config.upstream, config.downstream

    if bc_up.kind == "wall":
        ghost_l = CellState(A=first.A, Q=-first.Q, E=first.E)
    elif bc_up.kind == "head":
        ghost_l = _ghost_from_head(first, geom.cell(0), consts,
                                   bc_up.hydrograph(t))
    else:  # prescribed discharge upstream
        ghost_l = CellState(A=first.A, Q=bc_up.hydrograph(t), E=first.E)

    if bc_dn.kind == "wall":
        ghost_r = CellState(A=last.A, Q=-last.Q, E=last.E)
    elif bc_dn.kind == "discharge":
        ghost_r = CellState(A=last.A, Q=bc_dn.hydrograph(t), E=last.E)
    else:  # prescribed head downstream
        ghost_r = _ghost_from_head(last, geom.cell(geom.n_cells - 1), consts,
                                   bc_dn.hydrograph(t))
    return ghost_l, ghost_r


def _pad_edge(arr):
    return np.concatenate(([arr[0]], arr, [arr[-1]]))


def step(state, geom, config, consts, dt, audit=None):
    """One explicit step of size ``dt``; returns the new state.

    Raises ``PositivityError`` / ``TransitionSolveError`` / ``ResonanceError``
    for failures the caller may retry with a smaller step, and returns the
    number of exact-strategy fallbacks through the optional audit.
    """
    n = geom.n_cells
    ghost_l, ghost_r = apply_boundary_conditions(state, geom, config, consts,
                                                 state.t)
    A = np.concatenate(([ghost_l.A], state.A, [ghost_r.A]))
    Q = np.concatenate(([ghost_l.Q], state.Q, [ghost_r.Q]))
    E = np.concatenate(([ghost_l.E], state.E, [ghost_r.E]))
    b = _pad_edge(geom.b)
    S = _pad_edge(geom.S)
    ct = _pad_edge(geom.cos_theta)
    R = _pad_edge(geom.R)
    dx = _pad_edge(geom.dx)

    if config.friction_enabled:
        geom_ext = SimpleNamespace(R=R, S=S, cos_theta=ct, b=b)
        # half-cell quadrature of the dynamic slope: (dx/2) K u|u|
        half_fric = 0.5 * dx * friction_slope(A, Q, E, geom_ext, consts) / A
    else:
        half_fric = np.zeros_like(A)

    # interface j sits between extended cells j and j+1
    A_l, A_r = A[:-1], A[1:]
    Q_l, Q_r = Q[:-1], Q[1:]
    E_l, E_r = E[:-1], E[1:]
    db = b[1:] - b[:-1]
    dcos = ct[1:] - ct[:-1]
    dS = S[1:] - S[:-1]
    S_t = 0.5 * (S[:-1] + S[1:])
    ct_t = 0.5 * (ct[:-1] + ct[1:])
    R_t = np.sqrt(S_t / np.pi)
    db_dyn = db + half_fric[:-1] + half_fric[1:]

    same = E_l == E_r
    AM = np.empty(n + 1)
    AP = np.empty(n + 1)
    QMP = np.empty(n + 1)
    regime_AM = np.empty(n + 1, dtype=np.int64)
    regime_AP = np.empty(n + 1, dtype=np.int64)
    fallbacks = 0

    if np.any(same):
        if config.strategy.kind == "exact":
            atilde, fb = wellbalance.exact_atilde_batch(
                E_l[same], A_l[same], A_r[same], S_t[same], ct_t[same],
                R_t[same], db_dyn[same], dcos[same], dS[same], consts,
                max_iter=config.strategy.max_iter,
                accept_tol=config.strategy.accept_tol)
            fallbacks = int(fb.sum())
        else:
            atilde = wellbalance.atilde_classical(A_l[same], A_r[same])
        am, ap, qmp = riemann.nontransition_traces_batch(
            E_l[same], A_l[same], A_r[same], Q_l[same], Q_r[same],
            S_t[same], ct_t[same], R_t[same],
            db_dyn[same], dcos[same], dS[same], np.asarray(atilde), consts)
        AM[same] = am
        AP[same] = ap
        QMP[same] = qmp
        regime_AM[same] = E_l[same]
        regime_AP[same] = E_l[same]

    for j in np.flatnonzero(~same):
        inp = InterfaceInput(
            left=ExtendedState(b=b[j], cos_theta=ct[j], S=S[j],
                               A=A[j], Q=Q[j]),
            right=ExtendedState(b=b[j + 1], cos_theta=ct[j + 1], S=S[j + 1],
                                A=A[j + 1], Q=Q[j + 1]),
            regime_left=int(E[j]), regime_right=int(E[j + 1]),
            consts=consts,
            friction_left=float(half_fric[j]),
            friction_right=float(half_fric[j + 1]))
        sol = riemann.solve_interface(inp)
        AM[j] = sol.AM
        AP[j] = sol.AP
        QMP[j] = sol.QMP
        regime_AM[j] = sol.regime_left
        regime_AP[j] = sol.regime_right
        if audit is not None:
            audit.record(sol)

    if not (np.all(np.isfinite(AM)) and np.all(np.isfinite(AP))
            and np.all(np.isfinite(QMP))):
        raise PositivityError("non-finite interface trace")
    if np.any(AM <= 0.0) or np.any(AP <= 0.0):
        raise PositivityError("non-positive interface trace")

    ratio = dt / geom.dx
    A_new = state.A - ratio * (QMP[1:] - QMP[:-1])
    if np.any(~np.isfinite(A_new)) or np.any(A_new <= 0.0):
        raise PositivityError("non-positive wet area after update")

    F_right = flux_momentum(AM[1:], QMP[1:], regime_AM[1:], geom, consts)
    F_left = flux_momentum(AP[:-1], QMP[:-1], regime_AP[:-1], geom, consts)
    Q_new = state.Q - ratio * (F_right - F_left)
    if np.any(~np.isfinite(Q_new)):
        raise PositivityError("non-finite discharge after update")

    E_new = update_regime(state.E, A_new, geom.S)
    new_state = SimulationState(t=state.t + dt, A=A_new, Q=Q_new, E=E_new,
                                step_count=state.step_count + 1)
    return new_state, fallbacks


def advance(state, geom, config, consts, audit=None):
    """One accepted step: CFL-sized, halved on rejection (at most 10 times)."""
    dt = cfl_timestep(state, geom, config, consts)
    dt = min(dt, config.t_end - state.t)
    retries = 0
    while True:
        try:
            new_state, fallbacks = step(state, geom, config, consts, dt,
                                        audit=audit)
            return new_state, dt, retries, fallbacks
        except (PositivityError, TransitionSolveError, ResonanceError,
                DegenerateSectionError) as exc:
            retries += 1
            if retries > _MAX_RETRIES:
                raise SolverError(
                    f"step rejected {retries} times at t={state.t:.6g}: {exc}"
                ) from exc
            dt *= 0.5


def run(state, geom, config, consts, sinks=None):
    """Advance to ``t_end``; record snapshots at the configured cadence.

    Returns the final state, the recorded snapshots (including the initial
    and final instants), per-step diagnostics and the transition audit.
    Deterministic: identical inputs give bitwise identical outputs.
    """
    state = state.copy()
    audit = TransitionAudit()
    records = [state.copy()]
    diagnostics = []
    fallback_total = 0
    if sinks:
        for sink in sinks:
            sink(state)
    next_record = (state.t + config.record_interval
                   if config.record_interval else None)
    tiny = 1e-12 * max(config.t_end, 1.0)
    while state.t < config.t_end - tiny:
        pre = state
        new_state, dt, retries, fallbacks = advance(pre, geom, config, consts,
                                                    audit=audit)
        fallback_total += fallbacks
        c = celerity(pre.A, pre.E, geom, consts)
        max_cfl = float(np.max((np.abs(pre.Q / pre.A) + c) * dt / geom.dx))
        state = new_state
        diagnostics.append(StepDiagnostics(
            t=state.t, dt=dt, mass=state.mass(geom),
            entropy=state.total_entropy(geom, consts),
            max_cfl=max_cfl, retries=retries))
        if next_record is not None and state.t >= next_record - tiny:
            records.append(state.copy())
            if sinks:
                for sink in sinks:
                    sink(state)
            while next_record <= state.t + tiny:
                next_record += config.record_interval
    if not records or records[-1].t != state.t:
        records.append(state.copy())
        if sinks:
            for sink in sinks:
                sink(state)
    if fallback_total:
        logger.warning("exact linearization fell back to the classical mean "
                       "%d time(s) during the run", fallback_total)
    if audit.admissibility_violations:
        logger.warning("%d transition solve(s) violated the front-speed "
                       "admissibility inequalities (accepted)",
                       audit.admissibility_violations)
    return RunResult(state=state, records=records, diagnostics=diagnostics,
                     transition_audit=audit, atilde_fallbacks=fallback_total)


def _anchor_state(cell0, consts, forced_regime, anchor_kind, anchor_value):
    """First-cell state from the anchor; forced_regime None means 'auto'."""
    if anchor_kind == "level":
        if forced_regime == PRESSURIZED:
            raise SteadyStateError("a pressurized anchor needs an area or head")
        if not (-cell0.R < anchor_value <= cell0.R):
            raise SteadyStateError("anchor level outside the pipe section")
        return geometry.wet_area_from_level(cell0.R, anchor_value), FREE_SURFACE
    if anchor_kind == "area":
        A0 = float(anchor_value)
        if forced_regime is None:
            E0 = PRESSURIZED if A0 >= cell0.S else FREE_SURFACE
        else:
            E0 = forced_regime
        if E0 == FREE_SURFACE and A0 > cell0.S:
            raise SteadyStateError("anchor area exceeds the full section")
        return A0, E0
    if anchor_kind == "head":
        h_try = (anchor_value - cell0.b) / cell0.cos_theta
        if forced_regime is None:
            E0 = FREE_SURFACE if h_try < cell0.R else PRESSURIZED
        else:
            E0 = forced_regime
        if E0 == FREE_SURFACE:
            if not (-cell0.R < h_try <= cell0.R):
                raise SteadyStateError("anchor head outside the free-surface "
                                       "range of the first cell")
            return geometry.wet_area_from_level(cell0.R, h_try), E0
        A0 = cell0.S * math.exp(
            consts.g * (anchor_value - cell0.b
                        - cell0.R * cell0.cos_theta) / consts.c**2)
        return A0, E0
    raise ValueError("anchor kind must be level, area or head")


def build_steady_state(geom, consts, regime_layout="free_surface",
                       anchor_kind="level", anchor_value=0.0):
    """Still-water state with equal total head in every cell.

    ``regime_layout`` is ``"free_surface"``, ``"pressurized"``, ``"auto"``
    (regime chosen per cell from the head line, producing mixed layouts with
    a stationary transition) or an explicit flag sequence.  The head line is
    anchored at the first cell by a water level, a wet area or a head.
    """
    n = geom.n_cells
    if isinstance(regime_layout, str):
        if regime_layout not in ("free_surface", "pressurized", "auto"):
            raise ValueError("unknown regime layout")
        layout = None
        forced = {"free_surface": FREE_SURFACE, "pressurized": PRESSURIZED,
                  "auto": None}[regime_layout]
    else:
        layout = np.asarray(regime_layout, dtype=np.int64)
        if layout.size != n:
            raise ValueError("explicit regime layout must cover every cell")
        forced = int(layout[0])

    A0, E0 = _anchor_state(geom.cell(0), consts, forced,
                           anchor_kind, anchor_value)
    A = np.empty(n)
    E = np.empty(n, dtype=np.int64)
    A[0], E[0] = A0, E0
    for i in range(n - 1):
        state_i = CellState(A=float(A[i]), Q=0.0, E=int(E[i]))
        cell_i = geom.cell(i)
        cell_n = geom.cell(i + 1)
        if layout is not None:
            E_next = int(layout[i + 1])
        elif forced is None:
            head = total_head(state_i.A, 0.0, state_i.E, cell_i, consts)
            h_try = (head / consts.g - cell_n.b) / cell_n.cos_theta
            E_next = FREE_SURFACE if h_try < cell_n.R else PRESSURIZED
        else:
            E_next = forced
        try:
            A[i + 1] = steady_state_next_area(state_i, cell_i, cell_n,
                                              E_next, consts)
        except SteadyStateError as exc:
            raise SteadyStateError(f"cell {i + 1}: {exc}") from exc
        E[i + 1] = E_next
    return SimulationState.from_fields(0.0, A, np.zeros(n), E)


def profile_columns(state, geom, consts):
    """Output columns (x, A, Q, E, piezo, ratio) for every cell."""
    piezo = piezometric_head(state.A, state.E, geom, consts)
    sphys = physical_wet_area(state.A, state.E, geom.S)
    ratio = np.where(state.E == PRESSURIZED, state.A / sphys, 1.0)
    return geom.x_center, state.A, state.Q, state.E, piezo, ratio
