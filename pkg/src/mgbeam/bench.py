"""Monte-Carlo experiment harness.

Sweeps transmit SNR and antenna count over seeded Rayleigh instances, runs the
selected solver/structure combination on each, and aggregates per-trial
records into CSV tables and JSON traces.  Trial seeds derive from
``base_seed + trial_index`` through a counter-based generator, so any record
is reproducible in isolation and results are independent of execution order.

Reported wall-clock times cover basis construction and the solver only;
scenario generation and serialization are excluded.  WSR values are in the
natural-log rate units used throughout the solver stack.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import BaselineOptions, LseSolver, SaSolver
from .cm import CmOptions, CmReport, run_cm
from .model import Scenario, generate_rayleigh_scenario, scenario_to_dict, sinr_all
from .pagd import PagdOptions, PagdSolver
from .structures import StructureKind, build_basis

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "build_inner_solver",
    "run_trial",
    "run_experiment",
    "emit_table",
    "emit_trace",
    "write_records",
    "load_config",
]

SOLVER_NAMES = ("cm-pagd", "cm-sa", "cm-lse")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep axes, fixed system shape, solver selection and tolerances."""

    snr_db: tuple[float, ...] = (20.0,)
    antennas: tuple[int, ...] = (16,)
    groups: int = 3
    users_per_group: int = 4
    group_sizes: tuple[int, ...] | None = None
    solver: str = "cm-pagd"
    structure: str = "full"
    trials: int = 100
    base_seed: int = 0
    eps_outer: float = 1e-4
    eps_inner: float = 1e-4
    max_outer: int = 500
    max_inner: int = 2000
    rho_c: float = 1.0
    rho_v: float = 0.02
    mu: float = 0.1
    step_a: float | None = None
    step_b: float = 10.0
    baseline_max_iters: int = 500
    out_dir: str = "results"
    trace_outer: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.solver not in SOLVER_NAMES:
            raise ValueError(f"solver must be one of {SOLVER_NAMES}")
        StructureKind.parse(self.structure)
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "antennas", tuple(int(a) for a in self.antennas))
        if self.group_sizes is not None:
            object.__setattr__(self, "group_sizes",
                               tuple(int(k) for k in self.group_sizes))

    def resolved_group_sizes(self) -> tuple[int, ...]:
        if self.group_sizes is not None:
            return self.group_sizes
        return (self.users_per_group,) * self.groups

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    """Metrics of one (sweep point, seed) solver run."""

    snr_db: float
    L: int
    solver: str
    structure: str
    seed: int
    wsr: float
    group_rates: tuple[float, ...]
    outer_iterations: int
    inner_iterations: int
    wall_time_s: float
    max_rel_duality_gap: float
    max_kkt_stationarity: float
    outer_converged: bool
    inner_converged: bool
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def build_inner_solver(config: ExperimentConfig):
    if config.solver == "cm-pagd":
        return PagdSolver(PagdOptions(eps=config.eps_inner, max_iters=config.max_inner,
                                      rho_c=config.rho_c, rho_v=config.rho_v))
    opts = BaselineOptions(kind=config.solver.removeprefix("cm-"), a=config.step_a,
                           b=config.step_b, mu=config.mu,
                           max_iters=config.baseline_max_iters, eps=config.eps_inner)
    return SaSolver(opts) if config.solver == "cm-sa" else LseSolver(opts)


def _nat_group_rates(scenario: Scenario, W: np.ndarray) -> tuple[float, ...]:
    s = sinr_all(scenario, W, normalized=False)
    rates = np.minimum.reduceat(np.log1p(s), scenario.group_starts)
    return tuple(float(r) for r in rates)


def run_trial(config: ExperimentConfig, snr_db: float, L: int, seed: int,
              solver=None, trace: bool = False):
    """Run one seeded trial; returns ``(record, report)``.

    The report is None when the trial failed.  Timing covers basis
    construction plus the solve, excluding scenario generation.
    """
    scenario = generate_rayleigh_scenario(
        L, len(config.resolved_group_sizes()), config.resolved_group_sizes(), snr_db, seed)
    solver = solver if solver is not None else build_inner_solver(config)
    cm_opts = CmOptions(eps_outer=config.eps_outer, max_outer=config.max_outer,
                        trace_outer_index=config.trace_outer if trace else None)
    base = dict(snr_db=float(snr_db), L=int(L), solver=config.solver,
                structure=config.structure, seed=int(seed))
    try:
        t0 = time.perf_counter()
        basis = build_basis(scenario, StructureKind.parse(config.structure))
        report = run_cm(scenario, basis, solver, cm_opts)
        wall = time.perf_counter() - t0
    except Exception as exc:  # individual trial failures are recorded, not fatal
        record = TrialRecord(**base, wsr=math.nan, group_rates=(),
                             outer_iterations=0, inner_iterations=0,
                             wall_time_s=0.0, max_rel_duality_gap=math.nan,
                             max_kkt_stationarity=math.nan, outer_converged=False,
                             inner_converged=False, error=f"{type(exc).__name__}: {exc}")
        return record, None

    gaps = [s.rel_duality_gap for s in report.inner_stats if s.rel_duality_gap is not None]
    stats = [s.stationarity_residual for s in report.inner_stats
             if s.stationarity_residual is not None]
    record = TrialRecord(
        **base,
        wsr=report.wsr,
        group_rates=_nat_group_rates(scenario, report.beamformer.W),
        outer_iterations=report.outer_iterations,
        inner_iterations=int(sum(s.iterations for s in report.inner_stats)),
        wall_time_s=wall,
        max_rel_duality_gap=max(gaps) if gaps else math.nan,
        max_kkt_stationarity=max(stats) if stats else math.nan,
        outer_converged=report.converged,
        inner_converged=all(s.converged for s in report.inner_stats),
    )
    return record, report


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """All sweep points and trials, deterministically ordered by
    (snr, antennas, seed)."""
    solver = build_inner_solver(config)
    records = []
    for snr_db in config.snr_db:
        for L in config.antennas:
            for trial in range(config.trials):
                record, _ = run_trial(config, snr_db, L, config.base_seed + trial,
                                      solver=solver)
                records.append(record)
    return records


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


def emit_table(records, out, group_by=("snr_db", "L", "solver", "structure")) -> Path:
    """Aggregate records into a CSV table, one row per group key.

    Failed trials are excluded from the means but counted against the
    convergence rate.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in group_by), []).append(r)
    header = list(group_by) + ["trials", "mean_wsr", "std_wsr", "mean_wall_time_s",
                               "mean_outer_iterations", "convergence_rate"]
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
            rs = groups[key]
            ok = [r for r in rs if not r.failed]
            n_conv = sum(1 for r in ok if r.outer_converged)
            if ok:
                stats = [np.mean([r.wsr for r in ok]), np.std([r.wsr for r in ok]),
                         np.mean([r.wall_time_s for r in ok]),
                         np.mean([r.outer_iterations for r in ok])]
            else:
                stats = [math.nan] * 4
            writer.writerow([_fmt(v) for v in key] + [str(len(rs))]
                            + [_fmt(float(v)) for v in stats]
                            + [_fmt(n_conv / len(rs))])
    return out


def emit_trace(report: CmReport, out) -> Path:
    """Write outer trajectory and, when recorded, one inner primal/dual trace."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {"outer": [[i, float(v)] for i, v in enumerate(report.wsr_trajectory)]}
    if report.inner_trace is not None:
        doc["inner"] = report.inner_trace
    out.write_text(json.dumps(doc, indent=1))
    return out


def write_records(records, out) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in records:
        d = dataclasses.asdict(r)
        d["group_rates"] = list(d["group_rates"])
        rows.append(d)
    out.write_text(json.dumps(rows, indent=1))
    return out


def write_scenario_snapshot(scenario: Scenario, out) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(scenario_to_dict(scenario)))
    return out


def load_config(path) -> ExperimentConfig:
    """Read a TOML key/value config whose keys mirror ExperimentConfig fields."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    for key in ("snr_db", "antennas", "group_sizes"):
        if key in data and not isinstance(data[key], (list, tuple)):
            data[key] = [data[key]]
    return ExperimentConfig.from_dict(data)
