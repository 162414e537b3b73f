"""Finite-volume core: Greenshields flux, Godunov interface flux, and the
shared-velocity multi-population step.

All driver groups on a road obey the same scalar conservation law through the
total density rho = sum_d rho_d: the common velocity is v(rho) and each group
moves with the flux share rho_d / rho. The update for group ``a`` on cell ``k``
is

    u_a[k] <- u_a[k] - (dt/dx) * (share_a[k] * G(u[k], u[k+1])
                                  - share_a[k-1] * G(u[k-1], u[k]))

where G is the Godunov numerical flux of the total density and share_a = u_a/u
with the convention that a share is zero when the total is (numerically) zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GridError, SimulationError
from .network import Network

__all__ = [
    "FluxParams",
    "Grid",
    "StepResult",
    "velocity",
    "flux",
    "demand",
    "supply",
    "godunov_numerical_flux",
    "interface_flux",
    "population_share",
    "scheme_step",
    "check_cfl",
    "build_grid",
]

#: totals below this are treated as an empty cell when forming shares
SHARE_GUARD = 1e-14

#: tolerance when checking grid alignment of lengths and horizons
ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class FluxParams:
    """Greenshields parameters of one road: jam density and free speed."""

    rho_max: float = 1.0
    v_max: float = 1.0

    @property
    def critical(self) -> float:
        return 0.5 * self.rho_max

    @property
    def max_flux(self) -> float:
        return float(flux(self.critical, self))


def velocity(u, p: FluxParams):
    """Greenshields speed v(u) = v_max * (1 - u / rho_max).

    Accepts scalars or arrays. Raises ValueError if u leaves [0, rho_max]
    beyond a 1e-12 tolerance.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < -1e-12) or np.any(arr > p.rho_max + 1e-12):
        raise ValueError(f"density outside [0, {p.rho_max}]: {arr.min()}..{arr.max()}")
    return p.v_max * (1.0 - arr / p.rho_max)


def flux(u, p: FluxParams):
    """Flux f(u) = u * v(u), concave with maximum at rho_max / 2."""
    arr = np.asarray(u, dtype=float)
    return arr * (p.v_max * (1.0 - arr / p.rho_max))


def demand(u, p: FluxParams):
    """Upstream sending capacity: f(u) below the critical density, else f_max."""
    arr = np.asarray(u, dtype=float)
    return flux(np.minimum(arr, p.critical), p)


def supply(u, p: FluxParams):
    """Downstream receiving capacity: f_max below the critical density, else f(u)."""
    arr = np.asarray(u, dtype=float)
    return flux(np.maximum(arr, p.critical), p)


def godunov_numerical_flux(u_left, u_right, p: FluxParams):
    """Godunov flux of the total density across one interface.

    Equals min of f over [u_left, u_right] when u_left <= u_right and max of
    f over [u_right, u_left] otherwise; for the concave Greenshields flux both
    cases collapse to min(demand(u_left), supply(u_right)).
    """
    return np.minimum(demand(u_left, p), supply(u_right, p))


def interface_flux(u_left, u_right, p_left: FluxParams, p_right: FluxParams):
    """Godunov flux across an interface where the parameters may change.

    Used at junction crossings between roads with different rho_max / v_max;
    reduces bitwise to godunov_numerical_flux when the parameters agree.
    """
    return np.minimum(demand(u_left, p_left), supply(u_right, p_right))


def population_share(u_part, u_total):
    """Per-group share u_part / u_total with 0/0 := 0.

    Totals below SHARE_GUARD (1e-14) count as empty: the share is zero, so no
    mass moves out of a numerically empty cell.
    """
    part = np.asarray(u_part, dtype=float)
    total = np.asarray(u_total, dtype=float)
    safe = np.where(total >= SHARE_GUARD, total, 1.0)
    return np.where(total >= SHARE_GUARD, part / safe, 0.0)


class StepResult(NamedTuple):
    field: np.ndarray   # (n_groups, n_cells) updated densities
    influx: np.ndarray  # (n_groups,) boundary flux entering at the left end
    outflux: np.ndarray  # (n_groups,) boundary flux leaving at the right end


def scheme_step(
    field: np.ndarray,
    upstream: np.ndarray,
    downstream,
    p: FluxParams,
    dt_over_dx: float,
) -> StepResult:
    """One Godunov step of the multi-population scheme on a single segment.

    field      : (n_groups, n_cells) densities, all groups sharing the cells.
    upstream   : (n_groups,) ghost densities feeding the left boundary.
    downstream : right boundary condition: "free" (ghost copies the last
                 cell), "blocked" (zero outflow wall), or an (n_groups,) ghost
                 density vector.
    dt_over_dx : time step over cell width; dt_over_dx * v_max <= 1 required.

    Returns the updated field together with the per-group boundary fluxes.
    Raises SimulationError on CFL violation or if the update leaves the
    admissible density band (which indicates an upstream bug).
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ValueError("field must have shape (n_groups, n_cells)")
    if dt_over_dx * p.v_max > 1.0 + 1e-12:
        raise SimulationError(
            f"CFL violation: dt/dx * v_max = {dt_over_dx * p.v_max:.6g} > 1"
        )
    upstream = np.asarray(upstream, dtype=float)
    total = field.sum(axis=0)

    up_total = upstream.sum()
    if isinstance(downstream, str):
        if downstream == "free":
            down_total = total[-1]
        elif downstream == "blocked":
            down_total = p.rho_max
        else:
            raise ValueError(f"unknown downstream condition {downstream!r}")
    else:
        down_total = float(np.asarray(downstream, dtype=float).sum())

    totals_ext = np.concatenate(([up_total], total, [down_total]))
    g = godunov_numerical_flux(totals_ext[:-1], totals_ext[1:], p)

    shares_left = np.concatenate(
        (population_share(upstream, up_total)[:, None], population_share(field, total)),
        axis=1,
    )
    per_group = shares_left * g[None, :]
    new = field - dt_over_dx * (per_group[:, 1:] - per_group[:, :-1])

    if np.any(new < 0.0) or np.any(new.sum(axis=0) > p.rho_max + 1e-12):
        raise SimulationError("density left [0, rho_max] after a step; upstream bug")
    return StepResult(new, per_group[:, 0].copy(), per_group[:, -1].copy())


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid shared by all roads.

    dx, dt, horizon are the cell width, time step, and final time; cells maps
    road id to its cell count (length / dx, exact to ALIGN_TOL).
    """

    dx: float
    dt: float
    horizon: float
    cells: dict[int, int]

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def dt_over_dx(self) -> float:
        return self.dt / self.dx

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def check_cfl(grid: Grid, v_max: float) -> bool:
    """True when dt * v_max <= dx (with a tiny tolerance)."""
    return grid.dt * v_max <= grid.dx * (1.0 + 1e-12)


def build_grid(network: Network, dx: float, dt: float, horizon: float) -> Grid:
    """Construct and validate the grid for a network.

    Every road length and the horizon must be integer multiples of dx and dt
    respectively, and the CFL bound must hold for the fastest road.
    """
    if dx <= 0 or dt <= 0 or horizon <= 0:
        raise GridError(f"dx, dt, horizon must be positive, got {dx}, {dt}, {horizon}")
    cells = {}
    for r in network.roads:
        k = round(r.length / dx)
        if k < 1 or abs(k * dx - r.length) > ALIGN_TOL * max(1.0, r.length):
            raise GridError(f"road {r.id}: length {r.length} is not a multiple of dx={dx}")
        cells[r.id] = int(k)
    n_steps = round(horizon / dt)
    if n_steps < 1 or abs(n_steps * dt - horizon) > ALIGN_TOL * max(1.0, horizon):
        raise GridError(f"horizon {horizon} is not a multiple of dt={dt}")
    grid = Grid(dx=dx, dt=dt, horizon=horizon, cells=cells)
    v = max(r.v_max for r in network.roads)
    if not check_cfl(grid, v):
        raise GridError(f"CFL violated: dt*v_max = {dt * v:.6g} > dx = {dx}")
    return grid
