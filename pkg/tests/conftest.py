"""Shared fixtures and generators: small canonical networks plus a random
layered-network generator used by conservation and shortest-path suites."""

from __future__ import annotations

import numpy as np
import pytest

import routeflow as rf

CHAIN_TEXT = """
road 0 0 1 1
road 1 1 2 1
destination 2
origin 0
"""


@pytest.fixture
def chain_network() -> rf.Network:
    """origin 0 -> junction 1 -> destination 2, two unit roads."""
    return rf.load_network(CHAIN_TEXT)


@pytest.fixture
def benchmark() -> rf.Network:
    return rf.benchmark_network()


def random_network(
    rng: np.random.Generator,
    max_junctions: int = 10,
    dx: float = 0.01,
    heterogeneous: bool = False,
) -> rf.Network:
    """A random valid network: layered DAG with guaranteed origin, internal
    and destination layers, repaired so every destination is reachable from
    every origin. Lengths are random multiples of dx."""
    n_j = int(rng.integers(4, max_junctions + 1))
    n_layers = int(rng.integers(3, min(n_j, 5) + 1))
    ids = rng.permutation(n_j)
    # each layer nonempty: cut points
    cuts = np.sort(rng.choice(np.arange(1, n_j), size=n_layers - 1, replace=False))
    layers = np.split(ids, cuts)
    layer_of = {}
    for li, layer in enumerate(layers):
        for j in layer:
            layer_of[int(j)] = li

    edges: set[tuple[int, int]] = set()
    for li in range(1, n_layers):  # every non-first junction gets an in-edge
        for j in layers[li]:
            src = int(rng.choice(layers[li - 1]))
            edges.add((src, int(j)))
    for li in range(n_layers - 1):  # every non-last junction gets an out-edge
        for j in layers[li]:
            if not any(a == int(j) for a, _ in edges):
                edges.add((int(j), int(rng.choice(layers[li + 1]))))
    n_extra = int(rng.integers(0, n_j))
    for _ in range(n_extra):
        a = int(rng.integers(0, n_j))
        la = layer_of[a]
        if la >= n_layers - 1:
            continue
        lb = int(rng.integers(la + 1, n_layers))
        b = int(rng.choice(layers[lb]))
        edges.add((a, b))

    origins = [int(j) for j in layers[0]]
    dests = [int(j) for j in layers[-1]]
    # repair: every origin must reach every destination
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)

    def reaches(src: int) -> set[int]:
        seen, stack = {src}, [src]
        while stack:
            for nb in adj.get(stack.pop(), []):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return seen

    for o in origins:
        missing = set(dests) - reaches(o)
        for d in missing:
            edges.add((o, d))
            adj.setdefault(o, []).append(d)

    lines = []
    for rid, (a, b) in enumerate(sorted(edges)):
        n_cells = int(rng.integers(2, 16))
        extra = ""
        if heterogeneous:
            rho_max = float(rng.uniform(0.8, 1.5))
            v_max = float(rng.uniform(0.5, 1.2))
            extra = f" {rho_max:.6g} {v_max:.6g}"
        lines.append(f"road {rid} {a} {b} {n_cells * dx:.12g}{extra}")
    lines += [f"destination {d}" for d in dests]
    net = rf.load_network("\n".join(lines))
    assert rf.validate_network(net) == []
    return net


def random_state(
    rng: np.random.Generator, net: rf.Network, grid: rf.Grid, fill: float = 0.7
) -> rf.NetworkState:
    """Random initial densities that every group can actually route: group d
    only occupies roads whose end junction still reaches destination d, and
    cell totals stay below fill * rho_max."""
    state = rf.zero_state(net, grid)
    reach = [rf.reachable_set(net, d) for d in range(net.n_destinations)]
    for road in net.roads:
        arr = state.dens[road.id]
        for d in range(net.n_destinations):
            if road.end in reach[d]:
                arr[d] = rng.uniform(0.0, 1.0, size=arr.shape[1])
        total = arr.sum(axis=0)
        cap = fill * road.rho_max
        scale = np.where(total > 0, cap * rng.uniform(0.2, 1.0) / np.maximum(total, 1e-30), 0.0)
        arr *= np.minimum(scale, 1.0)[None, :]
    return state


def conservative_grid(net: rf.Network, dx: float, horizon: float) -> rf.Grid:
    """Time step small enough that even the busiest merge obeys the discrete
    maximum principle: dt <= 0.9 * dx / (v_top * max incoming count)."""
    v_top = max(r.v_max for r in net.roads)
    max_inc = max((len(j.inc) for j in net.junctions if j.inc), default=1)
    steps_per_dx = max_inc / 0.9
    dt = dx / (v_top * steps_per_dx)
    n = round(horizon / dt)
    dt = horizon / n  # keep the horizon an exact multiple
    return rf.build_grid(net, dx, dt, horizon)


def basic_policy(net: rf.Network, grid: rf.Grid, ctx) -> np.ndarray:
    """(n_dest, n_junctions) free-flow policy array."""
    return np.stack(
        [rf.value_basic(net, d, grid, ctx.params)[1] for d in range(net.n_destinations)]
    )
