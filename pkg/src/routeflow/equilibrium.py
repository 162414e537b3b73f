"""Fixed-point search over the plan-against-the-outcome operator.

One application of the operator: take a density history, solve the
time-indexed value functions of every group against it, freeze the resulting
policies per slab, and simulate the network forward under them. A fixed point
is a self-consistent traffic pattern (no group can improve by rerouting); in
practice the iteration either converges or falls into an exact two-cycle,
because the policy space is finite and the forward map is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .routing import DensityHistory, PolicyTable, RunningCost, UNIT_COST, value_highly_rational
from .simulate import RunResult, Simulation, run_basic, run_rational

__all__ = [
    "XiState",
    "ConvergenceReport",
    "density_distance",
    "xi_apply",
    "fixed_point_solve",
    "serialize_report",
]

CONVERGED = "Converged"
PERIOD_TWO = "PeriodTwoCycle"
MAX_ITERS = "MaxIterations"


@dataclass
class XiState:
    """One iterate: the history produced by simulating its own policy."""

    hist: DensityHistory
    policy: PolicyTable
    iteration: int
    injected: np.ndarray
    discharged: np.ndarray
    events: list


@dataclass
class ConvergenceReport:
    status: str  # CONVERGED | PERIOD_TWO | MAX_ITERS
    residuals: list[float]
    witnesses: list[XiState]
    tol: float


def density_distance(a: DensityHistory, b: DensityHistory, substeps: int = 1) -> float:
    """Discrete L1 distance between two histories: sum of |rho_a - rho_b| over
    every group, road, cell, and slab-boundary time slice, weighted by
    dx * dtau. Zero exactly when the sampled slices are identical."""
    ga, gb = a.grid, b.grid
    if (
        ga.dx != gb.dx
        or ga.dt != gb.dt
        or ga.n_steps != gb.n_steps
        or ga.cells != gb.cells
    ):
        raise GridError("histories live on different grids")
    if ga.n_steps % substeps != 0:
        raise GridError(f"{ga.n_steps} steps do not divide into slabs of {substeps}")
    dtau = ga.dt * substeps
    total = 0.0
    for rid, arr_a in a.dens.items():
        diff = np.abs(arr_a[::substeps] - b.dens[rid][::substeps])
        total += diff.sum() * ga.dx * dtau
    return float(total)


def _from_run(run: RunResult, iteration: int) -> XiState:
    return XiState(
        run.hist, run.policy, iteration, run.injected, run.discharged, run.events
    )


def xi_apply(
    hist: DensityHistory,
    sim: Simulation,
    iteration: int = 0,
    cost: RunningCost = UNIT_COST,
) -> XiState:
    """One operator application: best-response policies against hist, frozen
    per slab, then a fresh forward run under them."""
    nxt = [
        value_highly_rational(sim.network, d, hist, sim.ctx.params, cost)[1]
        for d in range(sim.ctx.n_dest)
    ]
    policy = PolicyTable.from_time_indexed(nxt, sim.n_slabs, sim.substeps)
    run = sim.run_policy(policy)
    return _from_run(run, iteration)


def fixed_point_solve(
    sim: Simulation,
    guess: str | DensityHistory = "basic",
    tol: float | None = None,
    max_iters: int | None = None,
    cost: RunningCost = UNIT_COST,
) -> ConvergenceReport:
    """Iterate the operator from an initial guess run.

    guess selects the first history: "basic", "rational", or a ready-made
    DensityHistory. tol is the absolute residual threshold; when omitted it is
    scenario.tol_rel * (mass injected by the guess run) * horizon. Stops at
    Converged when the residual to the previous iterate is within tol, at
    PeriodTwoCycle when the residual to the iterate two back is within tol
    while the previous one is not, and at MaxIterations otherwise; the report
    always carries the full residual sequence.
    """
    if max_iters is None:
        max_iters = sim.scenario.max_iters
    if isinstance(guess, DensityHistory):
        start = xi_apply(guess, sim, iteration=0, cost=cost)
    elif guess == "basic":
        start = _from_run(run_basic(sim, cost), 0)
    elif guess == "rational":
        start = _from_run(run_rational(sim, cost), 0)
    else:
        raise ValueError(f"unknown guess {guess!r}")
    if tol is None:
        tol = sim.scenario.tol_rel * float(start.injected.sum()) * sim.grid.horizon

    residuals: list[float] = []
    two_back: XiState | None = None
    prev = start
    for i in range(1, max_iters + 1):
        cur = xi_apply(prev.hist, sim, iteration=i, cost=cost)
        r = density_distance(cur.hist, prev.hist, sim.substeps)
        residuals.append(r)
        if r <= tol:
            return ConvergenceReport(CONVERGED, residuals, [cur], tol)
        if two_back is not None:
            r2 = density_distance(cur.hist, two_back.hist, sim.substeps)
            if r2 <= tol:
                return ConvergenceReport(PERIOD_TWO, residuals, [prev, cur], tol)
        two_back, prev = prev, cur
    return ConvergenceReport(MAX_ITERS, residuals, [prev], tol)


def serialize_report(report: ConvergenceReport) -> str:
    """CSV rows (iteration, residual, status); the status column repeats the
    final verdict so the file stays a plain rectangular table."""
    lines = ["iteration,residual,status"]
    for i, r in enumerate(report.residuals, start=1):
        lines.append(f"{i},{r:.9g},{report.status}")
    return "\n".join(lines) + "\n"
