"""Forward simulation of a scenario: boundary inflows, slab loop, history.

The policy table is the only thing the three behaviors disagree about. This
module runs the network forward under a given table (or, for the rational
behavior, a table re-solved at every slab boundary) and records the full
density history plus the injected / discharged vehicle ledger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SimulationError
from .junctions import SimContext, UNREACHABLE, advance_slab, make_context, zero_state
from .network import Network
from .routing import (
    DensityHistory,
    PolicyTable,
    RunningCost,
    UNIT_COST,
    frozen_road_weights,
    value_basic,
    value_from_weights,
)
from .scenario import Scenario
from .solver import Grid, build_grid

__all__ = ["RunResult", "Simulation", "run_basic", "run_rational"]


@dataclass
class RunResult:
    """One complete forward run."""

    hist: DensityHistory
    policy: PolicyTable
    injected: np.ndarray
    discharged: np.ndarray
    events: list[tuple[float, int, int, int, int]]


@dataclass(frozen=True)
class Simulation:
    """A scenario bound to a network: grid, context, and slab geometry."""

    network: Network
    scenario: Scenario
    grid: Grid
    ctx: SimContext
    substeps: int  # time steps per policy slab

    @property
    def n_slabs(self) -> int:
        return self.grid.n_steps // self.substeps

    @property
    def dtau(self) -> float:
        return self.substeps * self.grid.dt

    @classmethod
    def prepare(cls, network: Network, scenario: Scenario) -> "Simulation":
        grid = build_grid(network, scenario.dx, scenario.dt, scenario.horizon)
        ctx = make_context(
            network,
            grid,
            scenario.delta,
            outflow=scenario.outflow,
            resplit_each_step=scenario.resplit_each_step,
        )
        q = round(scenario.dtau / scenario.dt)
        return cls(network, scenario, grid, ctx, q)

    def dest_index(self, junction: int) -> int:
        return self.network.destinations.index(junction)

    def boundary_fn(self, slab_policy: np.ndarray):
        """Ghost densities feeding the origins at time t under one slab's
        policy: each (origin, group) inflow is applied to the road the group
        is routed onto. Windows are half-open [t_on, t_off)."""
        n_dest = self.network.n_destinations
        entries = [
            (f.origin, self.dest_index(f.dest_junction), f.value, f.t_on, f.t_off)
            for f in self.scenario.inflows
        ]

        def at(t: float) -> dict[int, np.ndarray]:
            ghosts: dict[int, np.ndarray] = {}
            for origin, d, value, t_on, t_off in entries:
                if not (t_on <= t < t_off) or value == 0.0:
                    continue
                target = int(slab_policy[d, origin])
                if target == UNREACHABLE:
                    raise SimulationError(
                        f"inflow for group {d + 1} at junction {origin} has no route"
                    )
                vec = ghosts.setdefault(target, np.zeros(n_dest))
                vec[d] += value
            return ghosts

        return at

    def run_policy(self, policy: PolicyTable) -> RunResult:
        """Advance the whole horizon under a fixed per-slab policy table."""
        if policy.n_slabs != self.n_slabs:
            raise SimulationError(
                f"policy covers {policy.n_slabs} slabs, scenario needs {self.n_slabs}"
            )
        state = zero_state(self.network, self.grid)
        hist = DensityHistory.allocate(self.network, self.grid)
        hist.store(0, state)
        injected = np.zeros(self.ctx.n_dest)
        discharged = np.zeros(self.ctx.n_dest)

        def record(st):
            hist.store(round(st.time / self.grid.dt), st)

        for h in range(self.n_slabs):
            slab = policy.slab(h)
            state, inj, dis = advance_slab(
                state, slab, self.ctx, self.substeps, self.boundary_fn(slab), record
            )
            injected += inj
            discharged += dis
        return RunResult(hist, policy, injected, discharged, self.events_of(policy))

    def events_of(self, policy: PolicyTable):
        return policy.switch_events(self.dtau)


def run_basic(sim: Simulation, cost: RunningCost = UNIT_COST) -> RunResult:
    """Single empty-network value solve, then one forward run."""
    nxt = [
        value_basic(sim.network, d, sim.grid, sim.ctx.params, cost)[1]
        for d in range(sim.ctx.n_dest)
    ]
    policy = PolicyTable.constant(nxt, sim.n_slabs)
    return sim.run_policy(policy)


def run_rational(sim: Simulation, cost: RunningCost = UNIT_COST) -> RunResult:
    """Re-solve the values against the frozen current densities at every slab
    boundary, then advance that slab under the resulting policy."""
    state = zero_state(sim.network, sim.grid)
    hist = DensityHistory.allocate(sim.network, sim.grid)
    hist.store(0, state)
    injected = np.zeros(sim.ctx.n_dest)
    discharged = np.zeros(sim.ctx.n_dest)

    def record(st):
        hist.store(round(st.time / sim.grid.dt), st)

    slabs = []
    for h in range(sim.n_slabs):
        w = frozen_road_weights(sim.network, state, sim.grid, sim.ctx.params, cost)
        nxt = [
            value_from_weights(sim.network, d, w, mode="rational", time=state.time)[1]
            for d in range(sim.ctx.n_dest)
        ]
        slab = np.stack(nxt, axis=0)
        slabs.append(slab)
        state, inj, dis = advance_slab(
            state, slab, sim.ctx, sim.substeps, sim.boundary_fn(slab), record
        )
        injected += inj
        discharged += dis
    policy = PolicyTable(np.stack(slabs, axis=0))
    return RunResult(hist, policy, injected, discharged, sim.events_of(policy))
