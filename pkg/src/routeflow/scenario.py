"""Scenario definition: grid parameters, behavior, boundary inflows.

File format (line oriented, ``#`` starts a comment)::

    dx 0.01            # cell size
    dt 0.005           # time step
    horizon 5          # simulated interval [0, horizon]
    delta 0.01         # junction neighborhood depth (default: dx)
    dtau 0.005         # policy slab length (default: dt)
    behavior basic     # basic | rational | high (optional, CLI may override)
    outflow free       # free | blocked boundary at destination roads
    inflow 0 6 0.3 0 5 # origin junction, destination junction, density, t_on, t_off
    tol_rel 1e-6       # equilibrium-search options (behavior high)
    max_iters 50
    guess basic        # basic | rational

Inflow windows are half-open [t_on, t_off). The density applies as a ghost
value on whichever road the group's current policy selects at the origin.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .errors import ParseError, ValidationError
from .network import Network, parse_network, serialize_network

__all__ = [
    "Inflow",
    "Scenario",
    "parse_scenario",
    "validate_scenario",
    "load_scenario",
    "serialize_scenario",
    "benchmark_network",
    "benchmark_scenario",
    "emit_benchmark",
]

BEHAVIORS = ("basic", "rational", "high")
GUESSES = ("basic", "rational")


@dataclass(frozen=True)
class Inflow:
    """Boundary density for one driver group at one origin, active on the
    half-open time window [t_on, t_off)."""

    origin: int
    dest_junction: int
    value: float
    t_on: float
    t_off: float


@dataclass(frozen=True)
class Scenario:
    dx: float
    dt: float
    horizon: float
    delta: float
    dtau: float
    behavior: str | None = None
    outflow: str = "free"
    inflows: tuple[Inflow, ...] = ()
    tol_rel: float = 1e-6
    max_iters: int = 50
    guess: str = "basic"
    resplit_each_step: bool = False


_SCALAR_KEYS = {
    "dx": float,
    "dt": float,
    "horizon": float,
    "delta": float,
    "dtau": float,
    "behavior": str,
    "outflow": str,
    "tol_rel": float,
    "max_iters": int,
    "guess": str,
    "resplit_each_step": lambda s: {"true": True, "false": False}[s.lower()],
}


def parse_scenario(text: str, name: str = "<scenario>") -> Scenario:
    values: dict = {}
    inflows: list[Inflow] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key = tokens[0]
        try:
            if key == "inflow":
                if len(tokens) != 6:
                    raise ValueError(
                        "expected: inflow <origin> <destination> <density> <t_on> <t_off>"
                    )
                inflows.append(
                    Inflow(
                        int(tokens[1]),
                        int(tokens[2]),
                        float(tokens[3]),
                        float(tokens[4]),
                        float(tokens[5]),
                    )
                )
            elif key in _SCALAR_KEYS:
                if len(tokens) != 2:
                    raise ValueError(f"expected: {key} <value>")
                if key in values:
                    raise ValueError(f"duplicate key {key}")
                values[key] = _SCALAR_KEYS[key](tokens[1])
            else:
                raise ValueError(f"unknown keyword {key!r}")
        except (ValueError, KeyError) as exc:
            raise ParseError(f"{name}:{lineno}: {exc}") from None
    for required in ("dx", "dt", "horizon"):
        if required not in values:
            raise ParseError(f"{name}: missing required key {required!r}")
    values.setdefault("delta", values["dx"])
    values.setdefault("dtau", values["dt"])
    return Scenario(inflows=tuple(inflows), **values)


def _aligned(span: float, unit: float) -> bool:
    q = round(span / unit)
    return q >= 1 and abs(q * unit - span) <= 1e-9 * max(1.0, span)


def validate_scenario(
    s: Scenario, network: Network, behavior: str | None = None
) -> list[str]:
    """All the ways a scenario can fail to fit a network. behavior overrides
    the scenario's own declaration (the CLI flag does exactly that)."""
    problems: list[str] = []
    effective = behavior or s.behavior
    for key in ("dx", "dt", "horizon", "delta", "dtau"):
        if getattr(s, key) <= 0:
            problems.append(f"{key} must be positive, got {getattr(s, key)}")
    if s.dt > 0 and s.dtau > 0 and not _aligned(s.dtau, s.dt):
        problems.append(f"dtau={s.dtau} is not a multiple of dt={s.dt}")
    if s.dtau > 0 and s.horizon > 0 and not _aligned(s.horizon, s.dtau):
        problems.append(f"horizon={s.horizon} is not a multiple of dtau={s.dtau}")
    if effective is not None and effective not in BEHAVIORS:
        problems.append(f"behavior must be one of {BEHAVIORS}, got {effective!r}")
    if s.outflow not in ("free", "blocked"):
        problems.append(f"outflow must be free or blocked, got {s.outflow!r}")
    if s.guess not in GUESSES:
        problems.append(f"guess must be one of {GUESSES}, got {s.guess!r}")
    if s.tol_rel <= 0:
        problems.append(f"tol_rel must be positive, got {s.tol_rel}")
    if s.max_iters < 2:
        problems.append(f"max_iters must be at least 2, got {s.max_iters}")

    origins = set(network.declared_origins or network.origins)
    dest_set = set(network.destinations)
    for i, f in enumerate(s.inflows):
        where = f"inflow #{i + 1}"
        if f.origin not in origins:
            problems.append(f"{where}: junction {f.origin} is not an origin")
        if f.dest_junction not in dest_set:
            problems.append(f"{where}: junction {f.dest_junction} is not a destination")
        if f.value < 0:
            problems.append(f"{where}: density must be nonnegative, got {f.value}")
        if not (0 <= f.t_on < f.t_off):
            problems.append(f"{where}: need 0 <= t_on < t_off, got [{f.t_on}, {f.t_off})")
        if effective == "high" and f.t_off >= s.horizon:
            problems.append(
                f"{where}: inflow must stop before the horizon for behavior high "
                f"(t_off={f.t_off}, horizon={s.horizon})"
            )

    # Same-group windows at one origin must not overlap, and the combined
    # active inflow can never be offered more than a road can hold.
    by_pair: dict[tuple[int, int], list[Inflow]] = {}
    for f in s.inflows:
        by_pair.setdefault((f.origin, f.dest_junction), []).append(f)
    for (origin, dest), group in by_pair.items():
        group.sort(key=lambda f: f.t_on)
        for a, b in zip(group, group[1:]):
            if b.t_on < a.t_off:
                problems.append(
                    f"overlapping inflow windows for origin {origin} -> {dest} "
                    f"at t={b.t_on}"
                )
    for origin in {f.origin for f in s.inflows}:
        if origin not in origins:
            continue
        jn = next((j for j in network.junctions if j.id == origin), None)
        if jn is None or not jn.out:
            continue
        cap = min(network.road(rid).rho_max for rid in jn.out)
        windows = [f for f in s.inflows if f.origin == origin]
        for f in windows:
            active = sum(g.value for g in windows if g.t_on <= f.t_on < g.t_off)
            if active >= cap:
                problems.append(
                    f"origin {origin}: combined inflow {active} at t={f.t_on} reaches "
                    f"the jam density {cap} of an outgoing road"
                )
    return problems


def load_scenario(path_or_text: str, network: Network | None = None) -> Scenario:
    """Read a scenario from a file path or from literal text; when a network
    is supplied the scenario is validated against it."""
    if "\n" not in path_or_text and os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
        name = os.path.basename(path_or_text)
    else:
        text, name = path_or_text, "<scenario>"
    s = parse_scenario(text, name)
    if network is not None:
        problems = validate_scenario(s, network)
        if problems:
            raise ValidationError(problems)
    return s


def serialize_scenario(s: Scenario) -> str:
    lines = [
        f"dx {s.dx:.12g}",
        f"dt {s.dt:.12g}",
        f"horizon {s.horizon:.12g}",
        f"delta {s.delta:.12g}",
        f"dtau {s.dtau:.12g}",
    ]
    if s.behavior is not None:
        lines.append(f"behavior {s.behavior}")
    if s.outflow != "free":
        lines.append(f"outflow {s.outflow}")
    for f in s.inflows:
        lines.append(
            f"inflow {f.origin} {f.dest_junction} {f.value:.12g} "
            f"{f.t_on:.12g} {f.t_off:.12g}"
        )
    lines.append(f"tol_rel {s.tol_rel:.12g}")
    lines.append(f"max_iters {s.max_iters}")
    lines.append(f"guess {s.guess}")
    if s.resplit_each_step:
        lines.append("resplit_each_step true")
    return "\n".join(lines) + "\n"


# The two-origin, two-destination test network (junctions 0..7, roads 0..7):
#   roads  0: 0->1   1: 1->3   2: 1->4   3: 2->4
#          4: 3->6   5: 4->5   6: 5->6   7: 5->7
#   group 1 enters at junction 0 bound for 6; group 2 enters at 2 bound for 7.
# Group 2's route is forced (2-4-5-7). Group 1 chooses at junction 1 between
# the direct corridor (roads 1+4, length 1.75) and the corridor shared with
# group 2 (roads 2+5+6, length 1.72). The margin is deliberately smaller than
# one queue's worth of delay: free-flow planners all take the shared corridor
# and pile up behind the merge at junction 4, while density-aware planners
# keep flip-flopping between the two corridors.
BENCHMARK_LENGTHS = {
    0: 0.85,  # 0 -> 1
    1: 0.75,  # 1 -> 3
    2: 0.70,  # 1 -> 4
    3: 0.50,  # 2 -> 4
    4: 1.00,  # 3 -> 6
    5: 0.50,  # 4 -> 5
    6: 0.52,  # 5 -> 6
    7: 0.50,  # 5 -> 7
}

_BENCHMARK_TOPOLOGY = [
    (0, 0, 1),
    (1, 1, 3),
    (2, 1, 4),
    (3, 2, 4),
    (4, 3, 6),
    (5, 4, 5),
    (6, 5, 6),
    (7, 5, 7),
]


def benchmark_network() -> Network:
    lines = ["# two-origin, two-destination benchmark network"]
    for rid, start, end in _BENCHMARK_TOPOLOGY:
        lines.append(f"road {rid} {start} {end} {BENCHMARK_LENGTHS[rid]:.12g}")
    lines += ["destination 6", "destination 7", "origin 0", "origin 2"]
    return parse_network("\n".join(lines), "<benchmark>")


def benchmark_scenario(behavior: str = "basic") -> Scenario:
    """Grid and inflows of the standard run: cell size 0.01, step 0.005,
    horizon 5, inflow 0.3 toward junction 6 and 0.4 toward junction 7. The
    equilibrium-search variant stops the inflows at t=1 so the network can
    empty within the horizon."""
    t_off = 1.0 if behavior == "high" else 5.0
    return Scenario(
        dx=0.01,
        dt=0.005,
        horizon=5.0,
        delta=0.01,
        dtau=0.005,
        behavior=behavior,
        inflows=(
            Inflow(0, 6, 0.3, 0.0, t_off),
            Inflow(2, 7, 0.4, 0.0, t_off),
        ),
    )


def emit_benchmark(out_dir: str) -> list[str]:
    """Write the benchmark network and one scenario file per behavior."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    net_path = os.path.join(out_dir, "benchmark.network")
    with open(net_path, "w", encoding="utf-8") as fh:
        fh.write("# two-origin, two-destination benchmark network\n")
        fh.write("# lengths make the corridor through junctions 4 and 5 the\n")
        fh.write("# shortest group-1 route by a deliberately small margin\n")
        fh.write(serialize_network(benchmark_network()))
    written.append(net_path)
    for behavior in BEHAVIORS:
        path = os.path.join(out_dir, f"benchmark_{behavior}.scenario")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(serialize_scenario(benchmark_scenario(behavior)))
        written.append(path)
    return written
