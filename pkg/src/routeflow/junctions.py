"""Junction coupling: neighborhoods, path populations, and the slab advance.

Each internal junction owns a small neighborhood of cells: the last
``m = delta/dx`` cells of every incoming road and the first ``m`` cells of
every outgoing road. Inside a policy slab (an interval on which the routing
policy is frozen) the neighborhood is advanced as a family of path
populations: for every (incoming road i, group d) one population lives on the
concatenation of i's strip and the strip of the road the policy assigns to
group d. All populations sharing a physical cell move at the common speed of
their summed density, so the junction itself needs no flux-maximization
solver: every population just follows its own 1-D conservation law.

Two bookkeeping extensions keep mass exactly conserved when policies change
between slabs:

* carry-over populations: if group d still has vehicles inside an outgoing
  strip that the new policy no longer selects, those vehicles keep flowing
  down that road (they already crossed the junction) as a population with no
  inflow of its own;
* groups whose policy entry is "unreachable" are advanced on the incoming
  strips only, and any more-than-negligible mass arriving there is a fatal
  routing error.

Interfaces between a neighborhood and the adjacent road interiors use the
same Godunov flux evaluated on the same cell values from both sides, which is
what makes the domain decomposition conservative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, SimulationError
from .network import Network
from .solver import (
    FluxParams,
    Grid,
    godunov_numerical_flux,
    interface_flux,
    population_share,
)

__all__ = [
    "Neighborhood",
    "Layout",
    "NetworkState",
    "PathPopulation",
    "SimContext",
    "build_layout",
    "split_coefficients",
    "init_path_populations",
    "advance_slab",
    "total_mass",
    "zero_state",
]

#: vehicles below this count as an empty population (numerical dust)
MASS_EPS = 1e-12

#: absolute per-substep tolerance of the internal mass-balance audit
BALANCE_TOL = 1e-9

UNREACHABLE = -1


@dataclass(frozen=True)
class Neighborhood:
    """Cell neighborhood of one internal junction (m cells per road end)."""

    junction: int
    inc: tuple[int, ...]
    out: tuple[int, ...]
    m: int


@dataclass(frozen=True)
class Layout:
    """Static decomposition of the grid into road interiors and junction
    neighborhoods. ``interior[r]`` is the half-open cell range of road r that
    is advanced by the plain road scheme."""

    m: int
    interior: dict[int, tuple[int, int]]
    hoods: tuple[Neighborhood, ...]


def build_layout(network: Network, grid: Grid, delta: float) -> Layout:
    """Split every road into interior cells and junction-neighborhood cells.

    delta must be a positive integer multiple of dx, and every road must be at
    least two neighborhoods long (length >= 2*delta).
    """
    m = round(delta / grid.dx)
    if m < 1 or abs(m * grid.dx - delta) > 1e-9 * max(1.0, delta):
        raise GridError(f"delta={delta} is not a positive multiple of dx={grid.dx}")
    internal = set(network.internal_junctions)
    interior: dict[int, tuple[int, int]] = {}
    for r in network.roads:
        k = grid.cells[r.id]
        if k < 2 * m:
            raise GridError(
                f"road {r.id}: {k} cells is shorter than two neighborhoods (2*m={2 * m})"
            )
        s = m if r.start in internal else 0
        e = k - m if r.end in internal else k
        interior[r.id] = (s, e)
    hoods = tuple(
        Neighborhood(j.id, j.inc, j.out, m)
        for j in network.junctions
        if j.id in internal
    )
    return Layout(m=m, interior=interior, hoods=hoods)


@dataclass
class NetworkState:
    """Densities of every group on every road at one instant.

    dens[r] has shape (n_destinations, n_cells(r)); time is the clock.
    """

    time: float
    dens: dict[int, np.ndarray]

    def copy(self) -> "NetworkState":
        return NetworkState(self.time, {r: a.copy() for r, a in self.dens.items()})

    def totals(self, r: int) -> np.ndarray:
        return self.dens[r].sum(axis=0)


def zero_state(network: Network, grid: Grid, time: float = 0.0) -> NetworkState:
    dens = {
        r.id: np.zeros((network.n_destinations, grid.cells[r.id])) for r in network.roads
    }
    return NetworkState(time, dens)


def total_mass(state: NetworkState, grid: Grid) -> np.ndarray:
    """Vehicles per group, summed over the whole network (cells * dx).

    Neighborhood cells are counted once, through their host road arrays.
    """
    n_dest = next(iter(state.dens.values())).shape[0] if state.dens else 0
    out = np.zeros(n_dest)
    for arr in state.dens.values():
        out += arr.sum(axis=1) * grid.dx
    return out


@dataclass
class PathPopulation:
    """One population inside a junction neighborhood.

    inc_road is None for carry-over populations (mass already past the
    junction whose selected road changed); out_road is None when the policy
    marks the group's destination unreachable from this junction.
    """

    dest: int
    inc_road: int | None
    out_road: int | None
    values: np.ndarray


def split_coefficients(state: NetworkState, hood: Neighborhood, n_dest: int) -> np.ndarray:
    """Per-(incoming road, group) share of the mass queued on the incoming
    strips. Shape (len(inc), n_dest); each column sums to 1. When a group has
    no mass on any incoming strip the share is equidistributed."""
    m = hood.m
    masses = np.empty((len(hood.inc), n_dest))
    for ii, rid in enumerate(hood.inc):
        arr = state.dens[rid]
        masses[ii] = arr[:, arr.shape[1] - m :].sum(axis=1)
    lam = np.empty_like(masses)
    col_tot = masses.sum(axis=0)
    for d in range(n_dest):
        if col_tot[d] == 0.0:
            lam[:, d] = 1.0 / len(hood.inc)
        else:
            lam[:, d] = masses[:, d] / col_tot[d]
    return lam


def init_path_populations(
    state: NetworkState,
    hood: Neighborhood,
    policy_col: np.ndarray,
    lam: np.ndarray,
    grid: Grid,
) -> list[PathPopulation]:
    """Build the population family of one junction for a new policy slab.

    policy_col[d] is the road id selected for group d at this junction (or
    UNREACHABLE). The incoming halves copy the road densities; the selected
    outgoing halves receive the split-coefficient share of the road density
    there; out-strip mass of groups pointed elsewhere becomes carry-over.
    """
    m = hood.m
    n_dest = len(policy_col)
    out_set = set(hood.out)
    pops: list[PathPopulation] = []
    for ii, i_road in enumerate(hood.inc):
        arr = state.dens[i_road]
        k = arr.shape[1]
        for d in range(n_dest):
            o_road = int(policy_col[d])
            inc_half = arr[d, k - m :]
            if o_road == UNREACHABLE:
                if inc_half.sum() * grid.dx > MASS_EPS:
                    raise SimulationError(
                        f"group {d + 1} has mass at junction {hood.junction} "
                        f"but no route to its destination"
                    )
                pops.append(PathPopulation(d, i_road, None, inc_half.copy()))
                continue
            if o_road not in out_set:
                raise SimulationError(
                    f"policy selects road {o_road} which does not leave junction {hood.junction}"
                )
            out_half = lam[ii, d] * state.dens[o_road][d, :m]
            pops.append(PathPopulation(d, i_road, o_road, np.concatenate((inc_half, out_half))))
    for o_road in hood.out:
        for d in range(n_dest):
            if int(policy_col[d]) == o_road:
                continue
            left_behind = state.dens[o_road][d, :m]
            if left_behind.any():
                pops.append(PathPopulation(d, None, o_road, left_behind.copy()))
    return pops


@dataclass
class SimContext:
    """Everything a slab advance needs besides the state itself."""

    network: Network
    grid: Grid
    layout: Layout
    params: dict[int, FluxParams]
    outflow: str = "free"  # boundary condition at destination roads
    resplit_each_step: bool = False

    n_dest: int = field(init=False)

    def __post_init__(self):
        self.n_dest = self.network.n_destinations
        if self.outflow not in ("free", "blocked"):
            raise ValueError(f"unknown outflow condition {self.outflow!r}")


def make_context(network: Network, grid: Grid, delta: float, **kw) -> SimContext:
    layout = build_layout(network, grid, delta)
    params = {r.id: FluxParams(r.rho_max, r.v_max) for r in network.roads}
    return SimContext(network, grid, layout, params, **kw)


def _hood_interface_fluxes(ctx: SimContext, hood: Neighborhood, tot, pairs):
    """Godunov fluxes at every physical interface of one neighborhood.

    Returns (entry, inc_inner, cross, out_inner, exit_) dictionaries keyed by
    road id (cross by (i, o) pair). tot maps road id to its total-density
    array of the current snapshot.
    """
    m = hood.m
    entry, inc_inner, out_inner, exit_ = {}, {}, {}, {}
    for i in hood.inc:
        p = ctx.params[i]
        t = tot[i]
        k = t.shape[0]
        entry[i] = godunov_numerical_flux(t[k - m - 1], t[k - m], p)
        inc_inner[i] = godunov_numerical_flux(t[k - m : k - 1], t[k - m + 1 :], p)
    for o in hood.out:
        p = ctx.params[o]
        t = tot[o]
        out_inner[o] = godunov_numerical_flux(t[: m - 1], t[1:m], p)
        exit_[o] = godunov_numerical_flux(t[m - 1], t[m], p)
    cross = {
        (i, o): interface_flux(tot[i][-1], tot[o][0], ctx.params[i], ctx.params[o])
        for (i, o) in pairs
    }
    return entry, inc_inner, cross, out_inner, exit_


def _pop_chain(ctx, hood, pop, work, tot, fluxes):
    """Left-cell values, left-cell totals and interface fluxes along one
    population's domain (length L+1 arrays for L cells)."""
    entry, inc_inner, cross, out_inner, exit_ = fluxes
    m = hood.m
    d = pop.dest
    if pop.inc_road is None:  # carry-over: out strip only, sealed inflow
        o = pop.out_road
        g = np.concatenate(([0.0], out_inner[o], [exit_[o]]))
        left_vals = np.concatenate(([0.0], pop.values))
        left_tots = np.concatenate(([1.0], tot[o][:m]))
        return left_vals, left_tots, g
    i = pop.inc_road
    k = tot[i].shape[0]
    if pop.out_road is None:  # unreachable: incoming strip only, sealed exit
        g = np.concatenate(([entry[i]], inc_inner[i], [0.0]))
        left_vals = np.concatenate(([work[i][d, k - m - 1]], pop.values))
        left_tots = np.concatenate(([tot[i][k - m - 1]], tot[i][k - m :]))
        return left_vals, left_tots, g
    o = pop.out_road
    g = np.concatenate(
        ([entry[i]], inc_inner[i], [cross[(i, o)]], out_inner[o], [exit_[o]])
    )
    left_vals = np.concatenate(([work[i][d, k - m - 1]], pop.values))
    left_tots = np.concatenate(([tot[i][k - m - 1]], tot[i][k - m :], tot[o][:m]))
    return left_vals, left_tots, g


def _advance_substep(ctx, work, pops_by_hood, boundary, lam_dt_dx):
    """One global time step: road interiors plus every neighborhood, all read
    from the same snapshot, then committed together.

    boundary maps origin road id to its (n_dest,) ghost density vector.
    Returns (injected, discharged) per-group boundary fluxes.
    """
    net, grid, layout = ctx.network, ctx.grid, ctx.layout
    tot = {r: a.sum(axis=0) for r, a in work.items()}
    n_dest = ctx.n_dest
    injected = np.zeros(n_dest)
    discharged = np.zeros(n_dest)

    new_blocks: dict[int, np.ndarray] = {}
    for road in net.roads:
        rid = road.id
        s, e = layout.interior[rid]
        if e <= s:
            continue
        p = ctx.params[rid]
        arr = work[rid]
        t = tot[rid]
        if s == 0:  # origin end: prescribed ghost densities
            ghost = boundary.get(rid)
            if ghost is None:
                ghost = np.zeros(n_dest)
            up_vals, up_tot = ghost, ghost.sum()
        else:
            up_vals, up_tot = arr[:, s - 1], t[s - 1]
        if e == arr.shape[1]:  # destination end
            down_tot = t[e - 1] if ctx.outflow == "free" else p.rho_max
        else:
            down_tot = t[e]

        totals_ext = np.concatenate(([up_tot], t[s:e], [down_tot]))
        g = godunov_numerical_flux(totals_ext[:-1], totals_ext[1:], p)
        shares = np.concatenate(
            (population_share(up_vals, up_tot)[:, None], population_share(arr[:, s:e], t[s:e])),
            axis=1,
        )
        per = shares * g[None, :]
        new_blocks[rid] = arr[:, s:e] - lam_dt_dx * (per[:, 1:] - per[:, :-1])
        if s == 0:
            injected += per[:, 0]
        if e == arr.shape[1]:
            discharged += per[:, -1]

    new_pop_values: list[tuple[PathPopulation, np.ndarray]] = []
    for hood, pops in pops_by_hood:
        pairs = {(p.inc_road, p.out_road) for p in pops if p.inc_road is not None and p.out_road is not None}
        fluxes = _hood_interface_fluxes(ctx, hood, tot, pairs)
        for pop in pops:
            left_vals, left_tots, g = _pop_chain(ctx, hood, pop, work, tot, fluxes)
            per = population_share(left_vals, left_tots) * g
            new_pop_values.append((pop, pop.values - lam_dt_dx * (per[1:] - per[:-1])))

    # Commit interiors, then populations, then refresh the strip cells.
    for rid, block in new_blocks.items():
        s, e = layout.interior[rid]
        work[rid][:, s:e] = block
    for pop, vals in new_pop_values:
        pop.values = vals

    m = layout.m
    for hood, pops in pops_by_hood:
        for i in hood.inc:
            k = work[i].shape[1]
            buf = np.zeros((n_dest, m))
            for pop in pops:
                if pop.inc_road == i:
                    buf[pop.dest] = pop.values[:m]
            work[i][:, k - m :] = buf
        for o in hood.out:
            buf = np.zeros((n_dest, m))
            for pop in pops:
                if pop.out_road == o:
                    buf[pop.dest] += pop.values[-m:]
            work[o][:, :m] = buf
        for pop in pops:
            if pop.out_road is None and pop.values.sum() * grid.dx > MASS_EPS:
                raise SimulationError(
                    f"group {pop.dest + 1} has mass at junction {hood.junction} "
                    f"but no route to its destination"
                )

    for rid, arr in work.items():
        t_new = arr.sum(axis=0)
        if t_new.max() > ctx.params[rid].rho_max + 1e-12:
            raise SimulationError(
                f"road {rid}: density {t_new.max():.6g} exceeds the jam density; "
                f"the time step is too coarse for a merge feeding this road"
            )
        if arr.min() < -1e-12:
            raise SimulationError(f"road {rid}: negative density {arr.min():.3e}")
    return injected, discharged


def advance_slab(
    state: NetworkState,
    policy: np.ndarray,
    ctx: SimContext,
    n_substeps: int,
    boundary_inflow,
    on_substep=None,
) -> tuple[NetworkState, np.ndarray, np.ndarray]:
    """Advance the whole network across one policy slab of n_substeps steps.

    policy is an (n_destinations, n_junctions) int array of selected road ids
    (UNREACHABLE where none). boundary_inflow(t) must return a dict mapping
    origin road id to the (n_destinations,) ghost density vector active at
    time t. on_substep(state), when given, is called after every committed
    step, with state.time already advanced.

    Returns the new state plus per-group injected and discharged vehicle
    counts over the slab. Raises SimulationError if the internal mass audit
    |mass change - (in - out)| exceeds BALANCE_TOL in any substep.
    """
    grid, layout = ctx.grid, ctx.layout
    v_top = max(p.v_max for p in ctx.params.values())
    if grid.dt * v_top > grid.dx * (1.0 + 1e-12):
        raise SimulationError(f"CFL violated: dt*v_max = {grid.dt * v_top:.6g} > dx")
    lam_dt_dx = grid.dt / grid.dx

    work = state.copy()
    step0 = int(round(state.time / grid.dt))

    pops_by_hood = None
    injected = np.zeros(ctx.n_dest)
    discharged = np.zeros(ctx.n_dest)
    for sub in range(n_substeps):
        if pops_by_hood is None or ctx.resplit_each_step:
            pops_by_hood = []
            for hood in layout.hoods:
                lam = split_coefficients(work, hood, ctx.n_dest)
                pops = init_path_populations(work, hood, policy[:, hood.junction], lam, grid)
                pops_by_hood.append((hood, pops))
        t_snap = (step0 + sub) * grid.dt
        ghosts = boundary_inflow(t_snap)

        mass_before = total_mass(work, grid).sum()
        inj, dis = _advance_substep(ctx, work.dens, pops_by_hood, ghosts, lam_dt_dx)
        mass_after = total_mass(work, grid).sum()
        residual = mass_after - mass_before - grid.dt * (inj.sum() - dis.sum())
        if abs(residual) > BALANCE_TOL:
            raise SimulationError(
                f"mass balance violated at t={t_snap:.6g}: residual {residual:.3e}"
            )
        injected += inj * grid.dt
        discharged += dis * grid.dt
        work.time = (step0 + sub + 1) * grid.dt
        if on_substep is not None:
            on_substep(work)
    return work, injected, discharged
