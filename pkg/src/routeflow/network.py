"""Road network model: typed graph, file format, validation, reachability.

A network is a directed graph of one-way roads between junctions. Junctions
with no incoming road are origins (traffic sources), junctions with no
outgoing road are destinations (traffic sinks), and every other junction is
internal. Each destination defines one driver group; group ``d`` consists of
the drivers bound for the ``d``-th declared destination.

File format (line oriented, ``#`` starts a comment):

    road <id> <start-junction> <end-junction> <length> [rho_max] [v_max]
    destination <junction-id>
    origin <junction-id>          # optional cross-check

Road and junction ids must be dense, i.e. exactly ``0 .. N-1``. The order of
``destination`` lines defines the group index ``d`` (1-based in files and CSV
outputs, 0-based inside this package). ``origin`` lines are optional; when
present they must match the set of junctions that have no incoming road.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

__all__ = [
    "Road",
    "Junction",
    "Network",
    "load_network",
    "parse_network",
    "validate_network",
    "serialize_network",
    "reachable_set",
]


@dataclass(frozen=True)
class Road:
    """One directed road. ``a`` and ``b`` are its endpoint coordinates in the
    road's own 1-D frame (``b - a`` is the length)."""

    id: int
    start: int
    end: int
    length: float
    rho_max: float = 1.0
    v_max: float = 1.0
    a: float = 0.0

    @property
    def b(self) -> float:
        return self.a + self.length


@dataclass(frozen=True)
class Junction:
    """A junction with its incoming/outgoing road id tuples."""

    id: int
    inc: tuple[int, ...] = ()
    out: tuple[int, ...] = ()

    @property
    def kind(self) -> str:
        if not self.inc:
            return "origin"
        if not self.out:
            return "destination"
        return "internal"


@dataclass
class Network:
    """A road network plus the ordered destination list.

    Construction does not validate; call validate_network (or go through
    load_network, which raises on any violation).
    """

    roads: list[Road]
    junctions: list[Junction]
    destinations: list[int]
    declared_origins: list[int] = field(default_factory=list)

    @property
    def n_roads(self) -> int:
        return len(self.roads)

    @property
    def n_junctions(self) -> int:
        return len(self.junctions)

    @property
    def n_destinations(self) -> int:
        return len(self.destinations)

    @property
    def origins(self) -> list[int]:
        return [j.id for j in self.junctions if not j.inc]

    @property
    def internal_junctions(self) -> list[int]:
        return [j.id for j in self.junctions if j.inc and j.out]

    def road(self, rid: int) -> Road:
        for r in self.roads:
            if r.id == rid:
                return r
        raise KeyError(f"no road with id {rid}")

    def junction(self, jid: int) -> Junction:
        for j in self.junctions:
            if j.id == jid:
                return j
        raise KeyError(f"no junction with id {jid}")


def parse_network(text: str, name: str = "<network>") -> Network:
    """Parse network text into an (unvalidated) Network object."""
    roads: list[Road] = []
    destinations: list[int] = []
    declared_origins: list[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        try:
            if kind == "road":
                if not 4 <= len(args) <= 6:
                    raise ValueError("expected: road <id> <start> <end> <length> [rho_max] [v_max]")
                roads.append(
                    Road(
                        id=int(args[0]),
                        start=int(args[1]),
                        end=int(args[2]),
                        length=float(args[3]),
                        rho_max=float(args[4]) if len(args) > 4 else 1.0,
                        v_max=float(args[5]) if len(args) > 5 else 1.0,
                    )
                )
            elif kind == "destination":
                if len(args) != 1:
                    raise ValueError("expected: destination <junction-id>")
                destinations.append(int(args[0]))
            elif kind == "origin":
                if len(args) != 1:
                    raise ValueError("expected: origin <junction-id>")
                declared_origins.append(int(args[0]))
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except ValueError as exc:
            raise ParseError(f"{name}:{lineno}: {exc}") from None

    junction_ids = sorted(
        {r.start for r in roads}
        | {r.end for r in roads}
        | set(destinations)
        | set(declared_origins)
    )
    junctions = [
        Junction(
            jid,
            inc=tuple(sorted(r.id for r in roads if r.end == jid)),
            out=tuple(sorted(r.id for r in roads if r.start == jid)),
        )
        for jid in junction_ids
    ]
    roads.sort(key=lambda r: r.id)
    return Network(roads, junctions, destinations, declared_origins)


def validate_network(n: Network) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems: list[str] = []

    road_ids = sorted(r.id for r in n.roads)
    if road_ids != list(range(len(road_ids))):
        problems.append(f"road ids must be dense 0..{len(road_ids) - 1}, got {road_ids}")
    junction_ids = sorted(j.id for j in n.junctions)
    if junction_ids != list(range(len(junction_ids))):
        problems.append(f"junction ids must be dense 0..{len(junction_ids) - 1}, got {junction_ids}")

    if not n.roads:
        problems.append("network has no roads")
    if not n.destinations:
        problems.append("network declares no destination")
    dups = {d for d in n.destinations if n.destinations.count(d) > 1}
    for d in sorted(dups):
        problems.append(f"destination {d} declared more than once")

    for r in n.roads:
        if r.length <= 0:
            problems.append(f"road {r.id}: length must be positive, got {r.length}")
        if r.rho_max <= 0:
            problems.append(f"road {r.id}: rho_max must be positive, got {r.rho_max}")
        if r.v_max <= 0:
            problems.append(f"road {r.id}: v_max must be positive, got {r.v_max}")
        if r.start == r.end:
            problems.append(f"road {r.id}: start and end junction coincide ({r.start})")

    jmap = {j.id: j for j in n.junctions}
    rmap = {r.id: r for r in n.roads}
    for r in n.roads:
        for jid in (r.start, r.end):
            if jid not in jmap:
                problems.append(f"road {r.id}: unknown junction {jid}")
    for j in n.junctions:
        if set(j.inc) & set(j.out):
            problems.append(f"junction {j.id}: a road both enters and leaves it")
        for rid in j.inc:
            if rid not in rmap or rmap[rid].end != j.id:
                problems.append(f"junction {j.id}: inconsistent incoming road {rid}")
        for rid in j.out:
            if rid not in rmap or rmap[rid].start != j.id:
                problems.append(f"junction {j.id}: inconsistent outgoing road {rid}")

    origins = [j.id for j in n.junctions if not j.inc]
    sinks = [j.id for j in n.junctions if not j.out]
    dest_set = set(n.destinations)
    for d in n.destinations:
        if d not in jmap:
            problems.append(f"destination {d} is not a junction of the network")
        elif jmap[d].out:
            problems.append(f"destination {d} has outgoing roads")
    for s in sinks:
        if s not in dest_set:
            problems.append(f"junction {s} has no outgoing road but is not declared a destination")
    if not origins:
        problems.append("network has no origin (every junction has an incoming road)")
    if n.roads and not any(j.inc and j.out for j in n.junctions):
        problems.append("network has no internal junction")
    if n.declared_origins and sorted(n.declared_origins) != sorted(origins):
        problems.append(
            f"declared origins {sorted(n.declared_origins)} do not match "
            f"junctions without incoming roads {sorted(origins)}"
        )

    if not problems:
        for d_idx in range(n.n_destinations):
            reach = reachable_set(n, d_idx)
            for o in origins:
                if o not in reach:
                    problems.append(
                        f"destination {n.destinations[d_idx]} (group {d_idx + 1}) "
                        f"is unreachable from origin {o}"
                    )
    return problems


def load_network(path_or_text: str, name: str | None = None) -> Network:
    """Load and validate a network from a file path or raw text.

    Raises ParseError on malformed input and ValidationError (carrying the
    full violation list) if the parsed network is structurally invalid.
    """
    if "\n" not in path_or_text and os.path.exists(path_or_text):
        name = name or path_or_text
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = path_or_text
        name = name or "<network>"
    net = parse_network(text, name=name)
    problems = validate_network(net)
    if problems:
        raise ValidationError(problems)
    return net


def serialize_network(n: Network) -> str:
    """Render a network back to its file format (load round-trips)."""
    lines = ["# road <id> <start> <end> <length> [rho_max] [v_max]"]
    for r in sorted(n.roads, key=lambda r: r.id):
        lines.append(f"road {r.id} {r.start} {r.end} {r.length:.12g} {r.rho_max:.12g} {r.v_max:.12g}")
    for d in n.destinations:
        lines.append(f"destination {d}")
    for o in sorted(j.id for j in n.junctions if not j.inc):
        lines.append(f"origin {o}")
    return "\n".join(lines) + "\n"


def reachable_set(n: Network, d: int) -> set[int]:
    """Junction ids from which the d-th destination can be reached along
    directed roads. Contains the destination itself."""
    if not 0 <= d < n.n_destinations:
        raise ValueError(f"destination index {d} out of range")
    preds: dict[int, list[int]] = {j.id: [] for j in n.junctions}
    for r in n.roads:
        preds[r.end].append(r.start)
    seen = {n.destinations[d]}
    frontier = [n.destinations[d]]
    while frontier:
        nxt = []
        for j in frontier:
            for p in preds[j]:
                if p not in seen:
                    seen.add(p)
                    nxt.append(p)
        frontier = nxt
    return seen
