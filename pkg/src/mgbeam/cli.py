"""Benchmark command line: ``mgbeam run --config <path> [overrides]``.

Writes ``table.csv``, ``records.json`` and per-sweep-point scenario snapshots
to the output directory; ``--trace N`` additionally captures the inner
primal/dual sequences of outer iteration ``N`` on the first trial.  Exits 0 on
full success and 2 when any trial failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .bench import (ExperimentConfig, SOLVER_NAMES, build_inner_solver, emit_table,
                    emit_trace, load_config, run_experiment, run_trial,
                    write_records, write_scenario_snapshot)
from .model import generate_rayleigh_scenario
from .structures import StructureKind


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgbeam",
                                     description="Multi-group multicast WSR benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep of Monte-Carlo trials")
    run.add_argument("--config", help="TOML config file; CLI flags override it")
    run.add_argument("--snr", type=_float_list, help="transmit SNR list in dB, e.g. '0,10,20'")
    run.add_argument("--antennas", type=_int_list, help="antenna count list, e.g. '16,64'")
    run.add_argument("--groups", type=int, help="number of multicast groups")
    run.add_argument("--users-per-group", type=int, help="users in every group")
    run.add_argument("--solver", choices=SOLVER_NAMES)
    run.add_argument("--structure", choices=[k.value for k in StructureKind])
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="base seed; trial i uses seed base+i")
    run.add_argument("--out", help="output directory")
    run.add_argument("--trace", type=int,
                     help="record the inner primal/dual trace of this outer iteration")
    return parser


_OVERRIDES = {
    "snr": "snr_db",
    "antennas": "antennas",
    "groups": "groups",
    "users_per_group": "users_per_group",
    "solver": "solver",
    "structure": "structure",
    "trials": "trials",
    "seed": "base_seed",
    "out": "out_dir",
    "trace": "trace_outer",
}


def _resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    for arg_name, field in _OVERRIDES.items():
        value = getattr(args, arg_name)
        if value is not None:
            if field in ("snr_db", "antennas"):
                value = tuple(value)
            updates[field] = value
    if "groups" in updates or "users_per_group" in updates:
        updates["group_sizes"] = None  # shape flags beat a config group_sizes list
    return dataclasses.replace(config, **updates) if updates else config


def cmd_run(args) -> int:
    config = _resolve_config(args)
    out_dir = config.out_dir
    records = run_experiment(config)
    table = emit_table(records, f"{out_dir}/table.csv")
    write_records(records, f"{out_dir}/records.json")
    sizes = config.resolved_group_sizes()
    for snr_db in config.snr_db:
        for L in config.antennas:
            scenario = generate_rayleigh_scenario(L, len(sizes), sizes, snr_db,
                                                  config.base_seed)
            write_scenario_snapshot(
                scenario, f"{out_dir}/scenarios/snr{snr_db:g}_L{L}_seed{config.base_seed}.json")
    if config.trace_outer is not None:
        _, report = run_trial(config, config.snr_db[0], config.antennas[0],
                              config.base_seed, solver=build_inner_solver(config),
                              trace=True)
        if report is not None:
            emit_trace(report, f"{out_dir}/trace.json")
    failed = sum(1 for r in records if r.failed)
    print(f"{len(records)} trials ({failed} failed) -> {table}")
    return 2 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    raise AssertionError(f"unhandled command {args.command}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
