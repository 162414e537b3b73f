"""Command line interface: validate inputs, run scenarios, export CSV.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 grid or scenario
setup error, 5 simulation or value-solve failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .equilibrium import PERIOD_TWO, fixed_point_solve, serialize_report
from .errors import (
    GridError,
    ParseError,
    RouteflowError,
    ScenarioError,
    SimulationError,
    ValidationError,
    ValueSolveError,
)
from .network import Network, load_network, validate_network
from .routing import DensityHistory
from .scenario import Scenario, emit_benchmark, load_scenario, validate_scenario
from .simulate import RunResult, Simulation, run_basic, run_rational

__all__ = ["main", "run_scenario", "write_density_csv", "write_events_csv"]

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SETUP = 4
EXIT_RUNTIME = 5


def write_density_csv(
    hist: DensityHistory, network: Network, path: str, stride: int = 1
) -> None:
    """Density records at every stride-th time step (the all-zero initial
    slice is not exported). Columns: t, road, x, dest, density; x is the cell
    center in the road's own coordinates; dest is 1-based."""
    grid = hist.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,road,x,dest,density\n")
        for j in range(stride, grid.n_steps + 1, stride):
            t = j * grid.dt
            for road in network.roads:
                arr = hist.dens[road.id][j]
                for k in range(arr.shape[1]):
                    x = road.a + (k + 0.5) * grid.dx
                    for d in range(arr.shape[0]):
                        fh.write(
                            f"{t:.9g},{road.id},{x:.9g},{d + 1},{arr[d, k]:.9g}\n"
                        )


def write_events_csv(events, path: str) -> None:
    """Policy-switch records: t, junction, dest (1-based), from_road, to_road."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,junction,dest,from_road,to_road\n")
        for t, junction, dest, old, new in events:
            fh.write(f"{t:.9g},{junction},{dest + 1},{old},{new}\n")


def _export_run(run: RunResult, network: Network, out_dir: str, stride: int, suffix: str = ""):
    paths = []
    dens = os.path.join(out_dir, f"density{suffix}.csv")
    write_density_csv(run.hist, network, dens, stride)
    paths.append(dens)
    ev = os.path.join(out_dir, f"events{suffix}.csv")
    write_events_csv(run.events, ev)
    paths.append(ev)
    return paths


def run_scenario(
    network: Network, scenario: Scenario, out_dir: str, stride: int = 1
) -> list[str]:
    """Run one scenario under its declared behavior and export the results.

    basic/rational write density.csv and events.csv. high runs the
    fixed-point search and writes diagnostics.csv plus one exported run per
    witness (suffixes _a/_b when the search ends in a two-cycle). Returns the
    written paths; progress lines go to stdout.
    """
    if scenario.behavior is None:
        raise ScenarioError("scenario declares no behavior and none was given")
    os.makedirs(out_dir, exist_ok=True)
    sim = Simulation.prepare(network, scenario)
    written: list[str] = []
    if scenario.behavior == "basic":
        run = run_basic(sim)
        written += _export_run(run, network, out_dir, stride)
        _print_run_summary(scenario.behavior, run)
    elif scenario.behavior == "rational":
        run = run_rational(sim)
        written += _export_run(run, network, out_dir, stride)
        _print_run_summary(scenario.behavior, run)
    else:
        report = fixed_point_solve(sim, guess=scenario.guess)
        diag = os.path.join(out_dir, "diagnostics.csv")
        with open(diag, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(serialize_report(report))
        written.append(diag)
        suffixes = ("_a", "_b") if report.status == PERIOD_TWO else ("",)
        for witness, suffix in zip(report.witnesses, suffixes):
            run = RunResult(
                witness.hist,
                witness.policy,
                witness.injected,
                witness.discharged,
                witness.events,
            )
            written += _export_run(run, network, out_dir, stride, suffix)
        print(
            f"high: {report.status} after {len(report.residuals)} iterations "
            f"(tol {report.tol:.3e})"
        )
        if report.residuals:
            tail = ", ".join(f"{r:.3e}" for r in report.residuals[-4:])
            print(f"residual tail: {tail}")
    for p in written:
        print(f"wrote {p}")
    return written


def _print_run_summary(behavior: str, run: RunResult) -> None:
    inj = ", ".join(f"{v:.6g}" for v in run.injected)
    dis = ", ".join(f"{v:.6g}" for v in run.discharged)
    print(f"{behavior}: injected [{inj}] discharged [{dis}] vehicles per group")
    print(f"policy switches: {len(run.events)}")


def _load_inputs(args) -> tuple[Network, Scenario]:
    network = load_network(args.network)
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.behavior is not None:
        overrides["behavior"] = args.behavior
    if args.tol is not None:
        overrides["tol_rel"] = args.tol
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    if args.guess is not None:
        overrides["guess"] = args.guess
    if overrides:
        scenario = replace(scenario, **overrides)
    problems = validate_scenario(scenario, network)
    if problems:
        raise ValidationError(problems)
    return network, scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routeflow",
        description="Multi-group traffic simulation on road networks with "
        "route choice and equilibrium search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and export CSVs")
    sim.add_argument("--network", required=True, help="network file")
    sim.add_argument("--scenario", required=True, help="scenario file")
    sim.add_argument(
        "--behavior",
        choices=["basic", "rational", "high"],
        help="override the scenario's behavior",
    )
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--tol", type=float, help="relative residual tolerance (high)")
    sim.add_argument("--max-iters", type=int, help="iteration cap (high)")
    sim.add_argument("--guess", choices=["basic", "rational"], help="initial guess (high)")
    sim.add_argument("--stride", type=int, default=1, help="export every n-th step")

    bench = sub.add_parser("emit-benchmark", help="write the benchmark inputs")
    bench.add_argument("--out", required=True, help="output directory")

    val = sub.add_parser("validate", help="check a network (and scenario) file")
    val.add_argument("--network", required=True, help="network file")
    val.add_argument("--scenario", help="scenario file to check against the network")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.stride < 1:
                raise ValidationError(f"stride must be at least 1, got {args.stride}")
            network, scenario = _load_inputs(args)
            run_scenario(network, scenario, args.out, args.stride)
        elif args.command == "emit-benchmark":
            for p in emit_benchmark(args.out):
                print(f"wrote {p}")
        elif args.command == "validate":
            network = load_network(args.network)
            print(f"network ok: {network.n_roads} roads, {network.n_junctions} junctions")
            if args.scenario is not None:
                scenario = load_scenario(args.scenario, network)
                print(f"scenario ok: {len(scenario.inflows)} inflows")
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GridError, ScenarioError) as exc:
        print(f"setup error: {exc}", file=sys.stderr)
        return EXIT_SETUP
    except (SimulationError, ValueSolveError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RouteflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
