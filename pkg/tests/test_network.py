"""Network parsing, validation, reachability, and serialization round-trips."""

import numpy as np
import pytest

import routeflow as rf

from conftest import CHAIN_TEXT, random_network


def brute_force_reachable(net: rf.Network, dest: int) -> set[int]:
    """Independent oracle: DFS on reversed road directions from the
    destination junction."""
    rev: dict[int, list[int]] = {}
    for r in net.roads:
        rev.setdefault(r.end, []).append(r.start)
    seen, stack = {dest}, [dest]
    while stack:
        for p in rev.get(stack.pop(), []):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


class TestParse:
    def test_two_road_chain(self, chain_network):
        net = chain_network
        assert net.n_roads == 2
        assert net.n_junctions == 3
        assert net.n_destinations == 1
        assert net.destinations == [2]
        assert net.origins == [0]
        assert net.road(1).start == 1 and net.road(1).end == 2
        assert net.junction(1).inc == (0,) and net.junction(1).out == (1,)
        assert net.junction(0).kind == "origin"
        assert net.junction(1).kind == "internal"
        assert net.junction(2).kind == "destination"

    def test_benchmark_counts(self, benchmark):
        assert benchmark.n_roads == 8
        assert benchmark.n_junctions == 8
        assert benchmark.n_destinations == 2

    def test_optional_road_parameters(self):
        net = rf.load_network("road 0 0 1 1 1.5 0.8\nroad 1 1 2 1\ndestination 2\n")
        assert net.road(0).rho_max == 1.5
        assert net.road(0).v_max == 0.8
        assert net.road(1).rho_max == 1.0 and net.road(1).v_max == 1.0

    def test_comments_and_blank_lines(self):
        text = "# heading\n\nroad 0 0 1 1\n  # indented\nroad 1 1 2 1  # trailing\ndestination 2\n"
        net = rf.load_network(text)
        assert net.n_roads == 2

    @pytest.mark.parametrize(
        "text",
        [
            "road 0 0 1\ndestination 1",  # missing length
            "road 0 0 1 one\ndestination 1",  # non-numeric
            "frob 0 0 1 1\ndestination 1",  # unknown record
            "road 0 0 1 1",  # no destination at all
            "road 0 0 1 1\ndestination 1\ndestination 1",  # duplicate
        ],
    )
    def test_malformed_input(self, text):
        with pytest.raises((rf.ParseError, rf.ValidationError)):
            rf.load_network(text)


class TestValidate:
    def test_self_loop_road(self):
        # a road whose start junction already lists it as incoming
        net = rf.parse_network("road 0 0 0 1\nroad 1 0 1 1\ndestination 1\n")
        problems = rf.validate_network(net)
        assert problems, "self loop must be rejected"

    def test_destination_with_outgoing_road(self):
        net = rf.parse_network("road 0 0 1 1\nroad 1 1 2 1\ndestination 1\n")
        assert rf.validate_network(net)

    def test_unknown_destination_junction(self):
        net = rf.parse_network("road 0 0 1 1\ndestination 7\n")
        assert rf.validate_network(net)

    def test_nonpositive_length(self):
        net = rf.parse_network("road 0 0 1 0\ndestination 1\n")
        assert rf.validate_network(net)

    def test_unreachable_destination(self):
        # junction 3 is declared a destination but no road ever gets there
        # from origin 2
        text = "road 0 0 1 1\nroad 1 2 3 1\ndestination 1\ndestination 3\n"
        net = rf.parse_network(text)
        problems = rf.validate_network(net)
        assert problems

    def test_sink_junction_not_declared(self):
        # junction 2 has no outgoing roads but is not a destination
        net = rf.parse_network("road 0 0 1 1\nroad 1 1 2 1\ndestination 1\n")
        assert rf.validate_network(net)

    def test_mutations_of_valid_network_are_caught(self, benchmark):
        assert rf.validate_network(benchmark) == []
        base = rf.serialize_network(benchmark)
        lines = [ln for ln in base.splitlines() if ln and not ln.startswith("#")]
        mutations = []
        # drop each road line in turn (creates gaps / dangling junctions)
        for i, ln in enumerate(lines):
            if ln.startswith("road"):
                mutations.append("\n".join(lines[:i] + lines[i + 1 :]))
        # negate one length
        mutations.append(base.replace("road 0 0 1 0.85", "road 0 0 1 -0.85"))
        for text in mutations:
            try:
                net = rf.parse_network(text)
            except rf.ParseError:
                continue
            assert rf.validate_network(net), f"mutation not caught:\n{text}"


class TestReachability:
    def test_chain(self, chain_network):
        assert rf.reachable_set(chain_network, 0) == {0, 1, 2}

    def test_contains_destination_itself(self, benchmark):
        for i, d in enumerate(benchmark.destinations):
            assert d in rf.reachable_set(benchmark, i)

    def test_benchmark_first_destination(self, benchmark):
        # every junction except the second destination can still reach the
        # first one
        got = rf.reachable_set(benchmark, 0)
        assert got == {0, 1, 2, 3, 4, 5, 6}
        assert got == brute_force_reachable(benchmark, benchmark.destinations[0])

    def test_benchmark_second_destination(self, benchmark):
        got = rf.reachable_set(benchmark, 1)
        assert got == brute_force_reachable(benchmark, benchmark.destinations[1])
        assert 3 not in got and 6 not in got

    def test_random_networks_match_dfs_oracle(self):
        rng = np.random.default_rng(1723)
        for _ in range(25):
            net = random_network(rng)
            for i, d in enumerate(net.destinations):
                assert rf.reachable_set(net, i) == brute_force_reachable(net, d)


class TestRoundTrip:
    def test_benchmark(self, benchmark):
        again = rf.parse_network(rf.serialize_network(benchmark))
        assert again.destinations == benchmark.destinations
        assert again.origins == benchmark.origins
        for r, s in zip(benchmark.roads, again.roads):
            assert (r.id, r.start, r.end) == (s.id, s.start, s.end)
            assert r.length == s.length
            assert r.rho_max == s.rho_max and r.v_max == s.v_max

    def test_random_networks(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            net = random_network(rng, heterogeneous=True)
            again = rf.parse_network(rf.serialize_network(net))
            assert rf.validate_network(again) == []
            assert again.n_roads == net.n_roads
            for r, s in zip(net.roads, again.roads):
                assert r.length == pytest.approx(s.length, abs=0.0)
                assert r.rho_max == s.rho_max and r.v_max == s.v_max
