"""Road weights, value functions, and next-road policies.

Three driver behaviors differ only in the density information their route
costs see:

* basic: an empty network, so every road weight is its free-flow time;
* rational: the density frozen at the moment of the decision;
* highly rational: the full space-time density history, so costs are
  evaluated along the actual trajectory through it.

All three reduce to a Bellman system over junctions. The basic and rational
systems are static shortest-path solves; the highly rational one is a
backward induction over the time grid in which crossing a road maps time
slot n to the slot nearest to n*dt + crossing time.

Weights are computed by walking the road cell by cell: cell k is crossed in
dx / v(rho_k) time units, reading rho at the time slice containing the
current clock (frozen variants read a single profile). A nonnegative running
cost rate ell(s, rho) may reweigh that time; with the default ell == 1 the
weight equals the travel time bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ValueSolveError
from .junctions import NetworkState, UNREACHABLE
from .network import Network
from .solver import FluxParams, Grid, velocity

__all__ = [
    "DensityHistory",
    "RunningCost",
    "UNIT_COST",
    "WeightSample",
    "ValueTable",
    "PolicyTable",
    "travel_time_frozen",
    "travel_time_spacetime",
    "road_weight_frozen",
    "road_weight_spacetime",
    "value_basic",
    "value_rational",
    "value_highly_rational",
    "value_from_weights",
    "empty_road_weights",
    "frozen_road_weights",
    "extract_next",
]

#: nudge added before flooring t/dt so grid-aligned clocks land on their slice
SLICE_EPS = 1e-9


class DensityHistory:
    """Full space-time record of every group's density on every road.

    dens[r] has shape (n_slices, n_destinations, n_cells(r)); slice j holds
    the state at time j*dt, j = 0 .. n_steps.
    """

    def __init__(self, grid: Grid, dens: dict[int, np.ndarray]):
        self.grid = grid
        self.dens = dens
        self._totals: dict[int, np.ndarray] = {}

    @classmethod
    def allocate(cls, network: Network, grid: Grid) -> "DensityHistory":
        n_slices = grid.n_steps + 1
        dens = {
            r.id: np.zeros((n_slices, network.n_destinations, grid.cells[r.id]))
            for r in network.roads
        }
        return cls(grid, dens)

    @property
    def n_slices(self) -> int:
        return next(iter(self.dens.values())).shape[0]

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    def store(self, j: int, state: NetworkState) -> None:
        for rid, arr in state.dens.items():
            self.dens[rid][j] = arr
        self._totals.clear()

    def slice_index(self, t: float) -> int:
        j = math.floor(t / self.grid.dt + SLICE_EPS)
        return min(max(j, 0), self.n_slices - 1)

    def totals_series(self, rid: int) -> np.ndarray:
        """(n_slices, n_cells) total density of one road, cached."""
        if rid not in self._totals:
            self._totals[rid] = self.dens[rid].sum(axis=1)
        return self._totals[rid]

    def state_slice(self, j: int, time: float | None = None) -> NetworkState:
        t = j * self.grid.dt if time is None else time
        return NetworkState(t, {rid: arr[j].copy() for rid, arr in self.dens.items()})


class RunningCost:
    """Nonnegative cost rate ell(s, rho) accumulated while driving.

    rates maps road id to a rate callable; missing roads (or rates=None) use
    the unit rate, for which the accumulated weight is exactly the travel
    time. A single callable applies to every road.
    """

    def __init__(self, rates: dict[int, Callable] | Callable | None = None):
        self._rates = rates

    def rate(self, rid: int) -> Callable | None:
        if self._rates is None:
            return None
        if callable(self._rates):
            return self._rates
        return self._rates.get(rid)


UNIT_COST = RunningCost()


class WeightSample(NamedTuple):
    road: int
    t0: float
    weight: float
    travel_time: float


def _traverse(read_density, n_cells: int, p: FluxParams, dx: float, t0: float, ell):
    """Walk one road cell by cell from clock t0.

    read_density(clock, k) yields the density governing cell k at that clock.
    Returns (weight, duration); a stalled cell (v <= 0) makes the duration
    +inf and adds +inf weight unless the rate there is exactly zero, in which
    case the stalled cell (and everything beyond, never reached) costs 0.
    """
    tau = 0.0
    w = 0.0
    for k in range(n_cells):
        clock = t0 + tau
        rho = read_density(clock, k)
        v = float(velocity(rho, p))
        rate = 1.0 if ell is None else float(ell(clock, rho))
        if rate < 0.0:
            raise ValueError(f"running cost must be nonnegative, got {rate}")
        if v <= 0.0:
            return (w if rate == 0.0 else math.inf), math.inf
        dt_k = dx / v
        w += rate * dt_k
        tau += dt_k
    return w, tau


def travel_time_frozen(omega: np.ndarray, p: FluxParams, dx: float) -> float:
    """Time to cross a road whose density profile omega is frozen in time:
    sum of dx / v(omega_k); +inf as soon as one cell is jammed."""
    return _traverse(lambda s, k: float(omega[k]), len(omega), p, dx, 0.0, None)[1]


def road_weight_frozen(
    rid: int,
    omega: np.ndarray,
    p: FluxParams,
    dx: float,
    t0: float = 0.0,
    cost: RunningCost = UNIT_COST,
) -> WeightSample:
    """Accumulated cost of crossing a frozen density profile. The density is
    pinned but the clock still advances, so a time-dependent rate sees the
    actual passage times."""
    w, tau = _traverse(lambda s, k: float(omega[k]), len(omega), p, dx, t0, cost.rate(rid))
    return WeightSample(rid, t0, w, tau)


def _history_reader(hist: DensityHistory, rid: int):
    tot = hist.totals_series(rid)
    dt = hist.grid.dt
    top = hist.n_slices - 1

    def read(clock: float, k: int) -> float:
        j = min(max(math.floor(clock / dt + SLICE_EPS), 0), top)
        return float(tot[j, k])

    return read


def travel_time_spacetime(
    hist: DensityHistory, rid: int, t0: float, p: FluxParams
) -> float:
    """Crossing duration through the recorded space-time density, entering at
    t0; +inf if the trajectory stalls or does not reach the far end of the
    road by the history's horizon."""
    n_cells = hist.dens[rid].shape[2]
    _, tau = _traverse(_history_reader(hist, rid), n_cells, p, hist.grid.dx, t0, None)
    if t0 + tau > hist.horizon + SLICE_EPS:
        return math.inf
    return tau


def road_weight_spacetime(
    hist: DensityHistory,
    rid: int,
    t0: float,
    p: FluxParams,
    cost: RunningCost = UNIT_COST,
) -> WeightSample:
    n_cells = hist.dens[rid].shape[2]
    w, tau = _traverse(
        _history_reader(hist, rid), n_cells, p, hist.grid.dx, t0, cost.rate(rid)
    )
    return WeightSample(rid, t0, w, tau)


@dataclass(frozen=True)
class ValueTable:
    """Minimal cost-to-destination per junction.

    values is (n_junctions,) for the static modes and
    (n_slices, n_junctions) for the time-indexed one; time is the density
    snapshot instant for mode "rational".
    """

    mode: str  # "basic" | "rational" | "highly_rational"
    values: np.ndarray
    time: float | None = None


def _bellman_static(network: Network, dest_junction: int, w: dict[int, float]) -> np.ndarray:
    """Gauss-Seidel sweeps of V(J) = min over r out of J of w[r] + V(end(r)),
    from V = +inf except 0 at the destination. Nonnegative weights make the
    iteration monotone, so n_junctions sweeps must suffice."""
    n_j = network.n_junctions
    v = np.full(n_j, math.inf)
    v[dest_junction] = 0.0
    for _ in range(n_j + 1):
        changed = False
        for jn in network.junctions:
            if jn.id == dest_junction or not jn.out:
                continue
            best = math.inf
            for rid in jn.out:
                c = w[rid] + v[network.road(rid).end]
                if c < best:
                    best = c
            if best < v[jn.id]:
                v[jn.id] = best
                changed = True
        if not changed:
            return v
    raise ValueSolveError(
        f"value iteration still changing after {n_j + 1} sweeps (negative weight?)"
    )


def extract_next(table: ValueTable, network: Network, weights) -> np.ndarray:
    """Argmin road per junction (ties broken toward the lowest road id).

    For the static modes weights maps road id to its scalar weight and the
    result is (n_junctions,). For the time-indexed mode weights is the pair
    (cost, arrival_slot) of per-road arrays over start slots and the result
    is (n_slices, n_junctions). Entries with no finite option are UNREACHABLE.
    """
    v = table.values
    if v.ndim == 1:
        nxt = np.full(network.n_junctions, UNREACHABLE, dtype=int)
        for jn in network.junctions:
            best = math.inf
            for rid in jn.out:
                c = weights[rid] + v[network.road(rid).end]
                if c < best:
                    best = c
                    nxt[jn.id] = rid
        return nxt

    cost_tab, slot_tab = weights
    n_slices, _ = v.shape
    nxt = np.full((n_slices, network.n_junctions), UNREACHABLE, dtype=int)
    for jn in network.junctions:
        if not jn.out:
            continue
        best = np.full(n_slices, math.inf)
        for rid in jn.out:
            slots = slot_tab[rid]
            valid = slots < n_slices
            c = np.full(n_slices, math.inf)
            c[valid] = cost_tab[rid][valid] + v[slots[valid], network.road(rid).end]
            better = c < best
            best[better] = c[better]
            nxt[better, jn.id] = rid
    return nxt


def value_from_weights(
    network: Network,
    dest: int,
    weights: dict[int, float],
    mode: str = "rational",
    time: float | None = None,
) -> tuple[ValueTable, np.ndarray]:
    """Static Bellman solve plus policy for precomputed road weights. The
    weights are destination-independent, so callers solving several groups
    against the same densities compute them once and reuse them here."""
    v = _bellman_static(network, network.destinations[dest], weights)
    table = ValueTable(mode, v, time=time)
    return table, extract_next(table, network, weights)


def empty_road_weights(
    network: Network,
    grid: Grid,
    params: dict[int, FluxParams],
    cost: RunningCost = UNIT_COST,
) -> dict[int, float]:
    return {
        r.id: road_weight_frozen(
            r.id, np.zeros(grid.cells[r.id]), params[r.id], grid.dx, 0.0, cost
        ).weight
        for r in network.roads
    }


def frozen_road_weights(
    network: Network,
    state: NetworkState,
    grid: Grid,
    params: dict[int, FluxParams],
    cost: RunningCost = UNIT_COST,
) -> dict[int, float]:
    return {
        r.id: road_weight_frozen(
            r.id, state.totals(r.id), params[r.id], grid.dx, state.time, cost
        ).weight
        for r in network.roads
    }


def value_basic(
    network: Network,
    dest: int,
    grid: Grid,
    params: dict[int, FluxParams],
    cost: RunningCost = UNIT_COST,
) -> tuple[ValueTable, np.ndarray]:
    """Costs and policy for drivers who plan on an empty network. dest is the
    destination index into network.destinations."""
    w = empty_road_weights(network, grid, params, cost)
    table, nxt = value_from_weights(network, dest, w, mode="basic")
    return table, nxt


def value_rational(
    network: Network,
    dest: int,
    state: NetworkState,
    grid: Grid,
    params: dict[int, FluxParams],
    cost: RunningCost = UNIT_COST,
) -> tuple[ValueTable, np.ndarray]:
    """Costs and policy against the densities frozen at state.time."""
    w = frozen_road_weights(network, state, grid, params, cost)
    return value_from_weights(network, dest, w, mode="rational", time=state.time)


def _crossing_tables(
    network: Network,
    hist: DensityHistory,
    params: dict[int, FluxParams],
    cost: RunningCost,
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Per road: weight and arrival slot for a crossing started at every time
    slot. Arrival slots are rounded half-up to the nearest grid node;
    stalled or never-finishing crossings get the sentinel slot n_slices."""
    n = hist.n_slices
    grid = hist.grid
    t0 = np.arange(n) * grid.dt
    cost_tab: dict[int, np.ndarray] = {}
    slot_tab: dict[int, np.ndarray] = {}
    for road in network.roads:
        rid = road.id
        p = params[rid]
        ell = cost.rate(rid)
        if ell is None:
            tot = hist.totals_series(rid)
            tau = np.zeros(n)
            alive = np.ones(n, dtype=bool)
            for k in range(tot.shape[1]):
                clock = t0 + np.where(alive, tau, 0.0)
                j = np.clip(np.floor(clock / grid.dt + SLICE_EPS).astype(int), 0, n - 1)
                v = p.v_max * (1.0 - tot[j, k] / p.rho_max)
                alive &= v > 0.0
                step = np.where(alive, grid.dx / np.where(v > 0.0, v, 1.0), np.inf)
                tau = np.where(alive, tau + step, np.inf)
            w = tau.copy()
        else:
            w = np.empty(n)
            tau = np.empty(n)
            for i in range(n):
                sample = road_weight_spacetime(hist, rid, t0[i], p, cost)
                w[i], tau[i] = sample.weight, sample.travel_time
        arrival = t0 + tau
        slots = np.full(n, hist.n_slices, dtype=int)
        finite = np.isfinite(arrival)
        slots[finite] = np.floor(arrival[finite] / grid.dt + 0.5).astype(int)
        slots[slots > n - 1] = n
        cost_tab[rid] = w
        slot_tab[rid] = slots
    return cost_tab, slot_tab


def value_highly_rational(
    network: Network,
    dest: int,
    hist: DensityHistory,
    params: dict[int, FluxParams],
    cost: RunningCost = UNIT_COST,
) -> tuple[ValueTable, np.ndarray]:
    """Time-indexed costs against a full density history.

    Backward induction over time slots: a crossing started at slot n arrives
    at a strictly later slot on any admissible grid, so each slot usually
    settles in one sweep; zero-slot crossings (degenerate grids) are iterated
    to a fixed point and reported if they fail to settle.
    """
    dest_junction = network.destinations[dest]
    cost_tab, slot_tab = _crossing_tables(network, hist, params, cost)
    n = hist.n_slices
    n_j = network.n_junctions
    v = np.full((n, n_j), math.inf)
    v[:, dest_junction] = 0.0
    end_of = {r.id: r.end for r in network.roads}
    sweep_junctions = [
        jn for jn in network.junctions if jn.out and jn.id != dest_junction
    ]
    for slot in range(n - 1, -1, -1):
        for _ in range(n_j + 1):
            changed = False
            for jn in sweep_junctions:
                best = math.inf
                for rid in jn.out:
                    ns = slot_tab[rid][slot]
                    if ns >= n:
                        continue
                    c = cost_tab[rid][slot] + v[ns, end_of[rid]]
                    if c < best:
                        best = c
                if best < v[slot, jn.id]:
                    v[slot, jn.id] = best
                    changed = True
            if not changed:
                break
        else:
            raise ValueSolveError(
                f"value iteration did not settle at t={slot * hist.grid.dt:.6g}"
            )
    table = ValueTable("highly_rational", v)
    return table, extract_next(table, network, (cost_tab, slot_tab))


@dataclass(frozen=True)
class PolicyTable:
    """Per-slab routing choices: table[h, d, J] is the road id group d takes
    at junction J during slab h (UNREACHABLE where no route exists)."""

    table: np.ndarray

    @property
    def n_slabs(self) -> int:
        return self.table.shape[0]

    def slab(self, h: int) -> np.ndarray:
        return self.table[h]

    @classmethod
    def constant(cls, next_by_dest: list[np.ndarray], n_slabs: int) -> "PolicyTable":
        per_slab = np.stack(next_by_dest, axis=0)
        return cls(np.broadcast_to(per_slab, (n_slabs,) + per_slab.shape).copy())

    @classmethod
    def from_time_indexed(
        cls, next_by_dest: list[np.ndarray], n_slabs: int, substeps: int
    ) -> "PolicyTable":
        per_dest = np.stack(next_by_dest, axis=0)  # (n_dest, n_slices, n_j)
        slots = np.arange(n_slabs) * substeps
        return cls(per_dest[:, slots, :].transpose(1, 0, 2).copy())

    def switch_events(self, dtau: float) -> list[tuple[float, int, int, int, int]]:
        """(t, junction, dest, old road, new road) whenever a slab boundary
        changes a policy entry."""
        events = []
        n_slabs, n_dest, n_j = self.table.shape
        for h in range(1, n_slabs):
            prev, cur = self.table[h - 1], self.table[h]
            for d in range(n_dest):
                for j in range(n_j):
                    if cur[d, j] != prev[d, j]:
                        events.append((h * dtau, j, d, int(prev[d, j]), int(cur[d, j])))
        return events
