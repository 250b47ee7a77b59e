"""Scenario-driven command line front end.

Scenario files are INI-style text with sections ``pipe``, ``physics``,
``numerics``, ``initial``, ``boundaries`` and ``outputs``; hydrographs are
inline two-column tables (indented continuation lines).  ``run`` writes
``probes.csv``, ``profiles.csv`` and ``diagnostics.csv`` into the output
directory; ``steady`` emits only the constructed initial state; ``compare``
diffs two output directories column by column.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flowstate import PhysicalConstants, PRESSURIZED, physical_wet_area, piezometric_head
from .geometry import PipeGeometry
from .solver import (
    BoundaryCondition,
    Hydrograph,
    SimulationConfig,
    SolverError,
    build_steady_state,
    run,
)
from .wellbalance import AtildeStrategy, SteadyStateError

logger = logging.getLogger(__name__)

CSV_HEADER = ["t", "x", "A", "Q", "E", "piezo", "ratio"]
REQUIRED_SECTIONS = ("pipe", "physics", "numerics", "initial")

__all__ = ["ScenarioError", "ScenarioFile", "parse_scenario", "run_scenario",
           "compare_runs", "main"]


class ScenarioError(ValueError):
    """Invalid scenario file; ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ScenarioFile:
    path: str
    length: float
    cells: int
    upstream_diameter: float
    downstream_diameter: float
    elevation_upstream: float
    elevation_downstream: float
    g: float
    sonic_speed: float
    compressibility: float | None
    reference_density: float
    inverse_strickler: float
    cfl: float
    strategy: str
    t_end: float
    initial_kind: str
    initial_regime: str
    anchor: str
    anchor_value: float
    uniform_area: float | None
    uniform_discharge: float
    upstream_kind: str
    upstream_hydrograph: Hydrograph | None
    downstream_kind: str
    downstream_hydrograph: Hydrograph | None
    probes: list = field(default_factory=list)
    probe_interval: float = 0.1
    profile_times: list = field(default_factory=list)

    def constants(self):
        if self.compressibility is not None:
            return PhysicalConstants.from_compressibility(
                self.compressibility, rho0=self.reference_density, g=self.g,
                Ks=1.0 / self.inverse_strickler if self.inverse_strickler > 0
                else 1.0 / 0.012)
        ks = 1.0 / self.inverse_strickler if self.inverse_strickler > 0 \
            else 1.0 / 0.012
        return PhysicalConstants(g=self.g, c=self.sonic_speed, Ks=ks)

    def geometry(self):
        return PipeGeometry.from_profile(
            self.length, self.cells,
            0.5 * self.upstream_diameter, 0.5 * self.downstream_diameter,
            self.elevation_upstream, self.elevation_downstream)

    def config(self, strategy=None, cfl=None):
        def bc(kind, hydro):
            if kind == "wall":
                return BoundaryCondition("wall")
            return BoundaryCondition(kind, hydro)

        return SimulationConfig(
            t_end=self.t_end,
            cfl=self.cfl if cfl is None else cfl,
            strategy=AtildeStrategy(strategy or self.strategy),
            friction_enabled=self.inverse_strickler > 0,
            upstream=bc(self.upstream_kind, self.upstream_hydrograph),
            downstream=bc(self.downstream_kind, self.downstream_hydrograph),
            record_interval=self.probe_interval)

    def initial_state(self, geom, consts):
        if self.initial_kind == "uniform":
            n = geom.n_cells
            E = PRESSURIZED if self.initial_regime == "pressurized" else 0
            from .solver import SimulationState

            return SimulationState.from_fields(
                0.0, np.full(n, self.uniform_area),
                np.full(n, self.uniform_discharge), np.full(n, E))
        return build_steady_state(geom, consts, self.initial_regime,
                                  self.anchor, self.anchor_value)


def _parse_table(text, where, problems):
    times, values = [], []
    for lineno, raw in enumerate(text.strip().splitlines(), 1):
        parts = raw.split()
        if len(parts) != 2:
            problems.append(f"{where}: line {lineno} is not 'time value'")
            continue
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError:
            problems.append(f"{where}: line {lineno} has non-numeric entries")
    if times and np.any(np.diff(times) <= 0.0):
        problems.append(f"{where}: times must be strictly increasing")
    return times, values


def parse_scenario(path):
    """Parse and validate a scenario; raises ScenarioError with every problem."""
    path = Path(path)
    problems = []
    if not path.is_file():
        raise ScenarioError([f"{path}: not a readable file"])
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#",))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ScenarioError([f"{path}: {exc}"]) from exc
    for section in REQUIRED_SECTIONS:
        if not cp.has_section(section):
            problems.append(f"{path}: missing section [{section}]")
    if problems:
        raise ScenarioError(problems)

    def get_float(section, key, default=None, minimum=None):
        if not cp.has_option(section, key):
            if default is None:
                problems.append(f"[{section}] {key}: required")
                return None
            return default
        try:
            value = float(cp.get(section, key))
        except ValueError:
            problems.append(f"[{section}] {key}: not a number")
            return None
        if minimum is not None and value <= minimum:
            problems.append(f"[{section}] {key}: must be > {minimum}")
            return None
        return value

    def get_choice(section, key, choices, default):
        value = cp.get(section, key, fallback=default).strip()
        if value not in choices:
            problems.append(f"[{section}] {key}: expected one of {choices}")
            return default
        return value

    length = get_float("pipe", "length", minimum=0.0)
    cells_raw = cp.get("pipe", "cells", fallback=None)
    cells = None
    if cells_raw is None:
        problems.append("[pipe] cells: required")
    else:
        try:
            cells = int(cells_raw)
            if cells < 3:
                problems.append("[pipe] cells: at least 3 cells required")
        except ValueError:
            problems.append("[pipe] cells: not an integer")

    def first_of(section, keys, default=None, minimum=None):
        for key in keys:
            if cp.has_option(section, key):
                return get_float(section, key, minimum=minimum)
        if default is None:
            problems.append(f"[{section}] {keys[0]}: required")
        return default

    d_up = first_of("pipe", ("upstream_diameter", "diameter"), minimum=0.0)
    d_dn = first_of("pipe", ("downstream_diameter",), default=d_up,
                    minimum=0.0)
    b_up = first_of("pipe", ("elevation_upstream", "elevation"), default=0.0)
    b_dn = first_of("pipe", ("elevation_downstream",), default=b_up)

    g = get_float("physics", "g", default=9.81, minimum=0.0)
    beta = get_float("physics", "compressibility", default=-1.0)
    beta = None if beta is not None and beta <= 0.0 else beta
    rho0 = get_float("physics", "reference_density", default=1000.0,
                     minimum=0.0)
    sonic = get_float("physics", "sonic_speed", default=0.0)
    if beta is None and (sonic is None or sonic <= 0.0):
        problems.append("[physics]: give sonic_speed or compressibility")
    inv_ks = get_float("physics", "inverse_strickler", default=0.0)

    cfl = get_float("numerics", "cfl", default=0.8)
    if cfl is not None and not (0.0 < cfl < 1.0):
        problems.append("[numerics] cfl: must lie in (0, 1)")
    strategy = get_choice("numerics", "strategy", ("classical", "exact"),
                          "classical")
    t_end = get_float("numerics", "t_end", minimum=0.0)

    kind = get_choice("initial", "kind", ("steady", "uniform"), "steady")
    regime = get_choice("initial", "regime",
                        ("free_surface", "pressurized", "auto"),
                        "free_surface")
    anchor = get_choice("initial", "anchor", ("level", "area", "head"),
                        "level")
    anchor_value = get_float("initial", "anchor_value", default=0.0)
    uniform_area = get_float("initial", "area", default=-1.0)
    uniform_area = None if uniform_area is not None and uniform_area <= 0.0 \
        else uniform_area
    uniform_q = get_float("initial", "discharge", default=0.0)
    if kind == "uniform" and uniform_area is None:
        problems.append("[initial] area: required for a uniform state")

    def boundary(side, allowed):
        kind_b = "wall"
        hydro = None
        if cp.has_section("boundaries"):
            kind_b = get_choice("boundaries", side, allowed + ("wall",), "wall")
            text = cp.get("boundaries", f"{side}_hydrograph", fallback="")
            if kind_b != "wall":
                if not text.strip():
                    problems.append(f"[boundaries] {side}_hydrograph: required "
                                    f"for a {kind_b} boundary")
                else:
                    times, values = _parse_table(
                        text, f"[boundaries] {side}_hydrograph", problems)
                    if times:
                        hydro = Hydrograph(np.array(times), np.array(values))
        return kind_b, hydro

    up_kind, up_hydro = boundary("upstream", ("head", "discharge"))
    dn_kind, dn_hydro = boundary("downstream", ("head", "discharge"))

    probes, probe_interval, profile_times = [], 0.1, []
    if cp.has_section("outputs"):
        text = cp.get("outputs", "probes", fallback="").strip()
        if text:
            try:
                probes = [float(v) for v in text.replace(",", " ").split()]
            except ValueError:
                problems.append("[outputs] probes: not a number list")
        probe_interval = get_float("outputs", "probe_interval", default=0.1,
                                   minimum=0.0)
        ptext = cp.get("outputs", "profile_times", fallback="").strip()
        if ptext:
            try:
                profile_times = [float(v) for v in
                                 ptext.replace(",", " ").split()]
            except ValueError:
                problems.append("[outputs] profile_times: not a number list")
        pint = get_float("outputs", "profile_interval", default=0.0)
        if pint and t_end is not None and not profile_times:
            profile_times = list(np.arange(0.0, t_end + 0.5 * pint, pint))
    if length is not None:
        for p in probes:
            if not (0.0 <= p <= length):
                problems.append(f"[outputs] probes: {p} outside [0, {length}]")

    if problems:
        raise ScenarioError(problems)
    return ScenarioFile(
        path=str(path), length=length, cells=cells,
        upstream_diameter=d_up, downstream_diameter=d_dn,
        elevation_upstream=b_up, elevation_downstream=b_dn,
        g=g, sonic_speed=sonic, compressibility=beta,
        reference_density=rho0, inverse_strickler=inv_ks,
        cfl=cfl, strategy=strategy, t_end=t_end,
        initial_kind=kind, initial_regime=regime,
        anchor=anchor, anchor_value=anchor_value,
        uniform_area=uniform_area, uniform_discharge=uniform_q,
        upstream_kind=up_kind, upstream_hydrograph=up_hydro,
        downstream_kind=dn_kind, downstream_hydrograph=dn_hydro,
        probes=probes, probe_interval=probe_interval,
        profile_times=profile_times)


def _fmt(x):
    return format(float(x), ".17g")


def _state_rows(state, geom, consts, cells):
    piezo = piezometric_head(state.A, state.E, geom, consts)
    sphys = physical_wet_area(state.A, state.E, geom.S)
    ratio = np.where(state.E == PRESSURIZED, state.A / sphys, 1.0)
    for i in cells:
        yield [_fmt(state.t), _fmt(geom.x_center[i]), _fmt(state.A[i]),
               _fmt(state.Q[i]), str(int(state.E[i])), _fmt(piezo[i]),
               _fmt(ratio[i])]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _probe_cells(geom, probes):
    return [int(np.argmin(np.abs(geom.x_center - p))) for p in probes]


def write_outputs(scenario, geom, consts, result, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    probe_cells = _probe_cells(geom, scenario.probes)
    rows = []
    for record in result.records:
        rows.extend(_state_rows(record, geom, consts, probe_cells))
    _write_csv(outdir / "probes.csv", CSV_HEADER, rows)

    rows = []
    taken = set()
    times = [r.t for r in result.records]
    for target in scenario.profile_times or [0.0, result.state.t]:
        idx = next((k for k, t in enumerate(times)
                    if t >= target - 1e-9 * max(1.0, target)), len(times) - 1)
        if idx in taken:
            continue
        taken.add(idx)
        rows.extend(_state_rows(result.records[idx], geom, consts,
                                range(geom.n_cells)))
    _write_csv(outdir / "profiles.csv", CSV_HEADER, rows)

    rows = [[str(k + 1), _fmt(d.t), _fmt(d.dt), _fmt(d.mass),
             _fmt(d.entropy), _fmt(d.max_cfl), str(d.retries)]
            for k, d in enumerate(result.diagnostics)]
    _write_csv(outdir / "diagnostics.csv",
               ["step", "t", "dt", "mass", "entropy", "max_cfl", "retries"],
               rows)


def run_scenario(scenario, outdir, strategy=None, cfl=None, dry_run=False):
    """Run a parsed scenario; returns the process exit status."""
    geom = scenario.geometry()
    consts = scenario.constants()
    if dry_run:
        print(f"scenario {scenario.path}: {geom.n_cells} cells, "
              f"L={geom.length:g} m, c={consts.c:g} m/s")
        print("x_center dx R S b")
        for i in range(geom.n_cells):
            print(f"{geom.x_center[i]:.6g} {geom.dx[i]:.6g} {geom.R[i]:.6g} "
                  f"{geom.S[i]:.6g} {geom.b[i]:.6g}")
        return 0
    try:
        state = scenario.initial_state(geom, consts)
    except SteadyStateError as exc:
        print(f"error: infeasible initial state: {exc}", file=sys.stderr)
        return 2
    config = scenario.config(strategy=strategy, cfl=cfl)
    try:
        result = run(state, geom, config, consts)
    except SolverError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        dump = Path(outdir)
        dump.mkdir(parents=True, exist_ok=True)
        _write_csv(dump / "last_state.csv", CSV_HEADER,
                   _state_rows(state, geom, consts, range(geom.n_cells)))
        return 3
    write_outputs(scenario, geom, consts, result, outdir)
    audit = result.transition_audit
    print(f"completed t={result.state.t:g} s in {result.state.step_count} "
          f"steps; mass={result.state.mass(geom):.12g}")
    if audit.count:
        print(f"transition solves: {audit.count}, max scaled residual "
              f"{audit.max_scaled_residual:.3e}, max RH mismatch "
              f"{audit.max_rh_mismatch:.3e}, "
              f"{audit.admissibility_violations} admissibility warning(s)")
    return 0


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows) if rows else np.empty((0, len(header)))


def compare_runs(dir_a, dir_b):
    """Per-column max/L2 differences of two output directories."""
    report = {}
    for name in ("probes.csv", "profiles.csv", "diagnostics.csv"):
        pa, pb = Path(dir_a) / name, Path(dir_b) / name
        if not pa.is_file() or not pb.is_file():
            raise ValueError(f"{name}: missing in one of the directories")
        header_a, a = _read_csv(pa)
        header_b, b = _read_csv(pb)
        if header_a != header_b or a.shape != b.shape:
            raise ValueError(f"{name}: mismatched shapes or headers")
        diff = np.abs(a - b)
        report[name] = {
            col: (float(diff[:, j].max(initial=0.0)),
                  float(np.sqrt(np.mean(diff[:, j] ** 2))) if len(diff) else 0.0)
            for j, col in enumerate(header_a)
        }
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pipeflow",
        description="Mixed free-surface/pressurized pipe flow simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--strategy", choices=("classical", "exact"))
    p_run.add_argument("--cfl", type=float)
    p_run.add_argument("--dry-run", action="store_true")

    p_cmp = sub.add_parser("compare", help="diff two output directories")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")

    p_steady = sub.add_parser("steady",
                              help="emit the constructed steady state")
    p_steady.add_argument("scenario")
    p_steady.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        try:
            scenario = parse_scenario(args.scenario)
        except ScenarioError as exc:
            for problem in exc.problems:
                print(f"config error: {problem}", file=sys.stderr)
            return 2
        return run_scenario(scenario, args.out, strategy=args.strategy,
                            cfl=args.cfl, dry_run=args.dry_run)

    if args.command == "compare":
        try:
            report = compare_runs(args.dir_a, args.dir_b)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for name, cols in report.items():
            print(name)
            for col, (dmax, dl2) in cols.items():
                print(f"  {col}: max={dmax:.6e} l2={dl2:.6e}")
        return 0

    try:
        scenario = parse_scenario(args.scenario)
        geom = scenario.geometry()
        consts = scenario.constants()
        state = scenario.initial_state(geom, consts)
    except (ScenarioError, SteadyStateError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "steady_state.csv", CSV_HEADER,
               _state_rows(state, geom, consts, range(geom.n_cells)))
    print(f"wrote {outdir / 'steady_state.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
