"""Fundamental diagram, Godunov fluxes, and the multi-population road step.

The reference implementations in this file are written from the textbook
definitions (exact Riemann solver for a concave flux, plain scalar Godunov
update loop) and deliberately share no code with the package.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import routeflow as rf
from routeflow.solver import SHARE_GUARD

P = rf.FluxParams()  # rho_max = v_max = 1


def riemann_godunov_flux(ul: float, ur: float, p: rf.FluxParams) -> float:
    """Exact Godunov flux for concave f: min of f over [ul, ur] when the
    trace increases, max over [ur, ul] when it decreases.

    f is composed as u * v(u) (the definition), which keeps the comparison
    with the package bitwise."""

    def f(u):
        return u * (p.v_max * (1.0 - u / p.rho_max))

    c = p.rho_max / 2.0
    if ul <= ur:
        return min(f(ul), f(ur))
    if ur <= c <= ul:
        return f(c)
    return max(f(ul), f(ur))


def classical_godunov_run(u0, upstream_ghost, downstream, p, lam, n_steps):
    """Plain scalar Godunov scheme; returns the list of states after every
    step. upstream_ghost maps the step index to a ghost density."""
    u = np.asarray(u0, dtype=float).copy()
    out = []
    for n in range(n_steps):
        gl = upstream_ghost(n)
        gr = p.rho_max if downstream == "blocked" else u[-1]
        padded = np.concatenate(([gl], u, [gr]))
        g = np.array(
            [riemann_godunov_flux(padded[i], padded[i + 1], p) for i in range(len(u) + 1)]
        )
        u = u - lam * (g[1:] - g[:-1])
        out.append(u.copy())
    return out


class TestFundamentalDiagram:
    def test_velocity_values(self):
        assert rf.velocity(0.0, P) == 1.0
        assert rf.velocity(1.0, P) == 0.0
        assert rf.velocity(0.5, P) == 0.5

    def test_velocity_domain(self):
        with pytest.raises(ValueError):
            rf.velocity(-0.01, P)
        with pytest.raises(ValueError):
            rf.velocity(1.01, P)
        rf.velocity(1.0 + 1e-13, P)  # inside tolerance

    def test_flux_values(self):
        assert rf.flux(0.5, P) == 0.25
        assert rf.flux(0.3, P) == pytest.approx(0.21, abs=1e-15)
        assert rf.flux(1.0, P) == 0.0

    def test_params_derived(self):
        assert P.critical == 0.5
        assert P.max_flux == 0.25
        q = rf.FluxParams(rho_max=1.2, v_max=0.8)
        assert q.critical == 0.6
        assert q.max_flux == 1.2 * 0.8 / 4


class TestGodunovFlux:
    def test_known_values(self):
        assert rf.godunov_numerical_flux(0.3, 0.3, P) == pytest.approx(0.21, abs=1e-15)
        assert rf.godunov_numerical_flux(0.8, 0.2, P) == 0.25
        assert rf.godunov_numerical_flux(0.2, 0.8, P) == pytest.approx(0.16, abs=1e-15)
        assert rf.godunov_numerical_flux(0.0, 0.4, P) == 0.0

    def test_full_ghost_cell_demands_max_flux(self):
        # demand at rho_max equals the flux maximum, so a jammed upstream
        # ghost keeps pushing as hard as the road allows
        assert rf.demand(P.rho_max, P) == P.max_flux
        assert rf.supply(P.rho_max, P) == 0.0
        assert rf.supply(0.0, P) == P.max_flux

    @given(
        ul=st.floats(min_value=0.0, max_value=1.0),
        ur=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_matches_exact_riemann_solution(self, ul, ur):
        assert rf.godunov_numerical_flux(ul, ur, P) == riemann_godunov_flux(ul, ur, P)

    @given(
        ul=st.floats(min_value=0.0, max_value=1.2),
        ur=st.floats(min_value=0.0, max_value=1.2),
    )
    def test_heterogeneous_parameters(self, ul, ur):
        q = rf.FluxParams(rho_max=1.2, v_max=0.7)
        assert rf.godunov_numerical_flux(ul, ur, q) == riemann_godunov_flux(ul, ur, q)


def _random_field(rng, n_groups, n_cells, headroom=0.95):
    field = rng.uniform(0.0, 1.0, size=(n_groups, n_cells))
    total = field.sum(axis=0)
    field *= headroom * rng.uniform(0.1, 1.0) / max(total.max(), 1e-9)
    return field


class TestSchemeStep:
    def test_constant_state_is_preserved_bitwise(self):
        field = np.full((2, 8), 0.17)
        res = rf.scheme_step(field, upstream=field[:, 0], downstream="free", p=P, dt_over_dx=0.5)
        assert np.array_equal(res.field, field)

    def test_zero_stays_zero(self):
        field = np.zeros((3, 5))
        res = rf.scheme_step(field, upstream=np.zeros(3), downstream="free", p=P, dt_over_dx=0.5)
        assert np.array_equal(res.field, np.zeros((3, 5)))
        assert res.influx.sum() == 0.0 and res.outflux.sum() == 0.0

    def test_two_cell_wall_example(self):
        # single group, cells (0.8, 0.2), nothing enters, wall at the right:
        # interface flux 0.25 moves mass 0.125 from cell 1 to cell 2
        field = np.array([[0.8, 0.2]])
        res = rf.scheme_step(field, upstream=np.zeros(1), downstream="blocked", p=P, dt_over_dx=0.5)
        assert np.allclose(res.field, [[0.675, 0.325]], rtol=0, atol=1e-15)
        assert res.influx.sum() == 0.0
        assert res.outflux.sum() == 0.0

    def test_mass_balance_with_boundary_fluxes(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n_g = int(rng.integers(1, 4))
            field = _random_field(rng, n_g, int(rng.integers(2, 30)))
            up = rng.uniform(0, 1, n_g)
            up *= 0.9 / max(up.sum(), 1e-9)
            down = rng.choice(["free", "blocked"])
            res = rf.scheme_step(field, up, down, P, dt_over_dx=0.5)
            before = field.sum()
            after = res.field.sum()
            moved = 0.5 * (res.influx.sum() - res.outflux.sum())
            assert after - before == pytest.approx(moved, abs=1e-14)

    def test_maximum_principle_random_states(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            field = _random_field(rng, int(rng.integers(1, 4)), int(rng.integers(2, 20)))
            up = rng.uniform(0, 1, field.shape[0])
            up *= rng.uniform(0, 0.99) / max(up.sum(), 1e-9)
            res = rf.scheme_step(field, up, "free", P, dt_over_dx=0.5)
            total = res.field.sum(axis=0)
            assert res.field.min() >= 0.0
            assert total.max() <= P.rho_max + 1e-12

    def test_group_fractions_preserved_exactly(self):
        # dyadic fractions make share arithmetic exact, so each group must
        # stay an exact multiple of the total and match a single-group run
        rng = np.random.default_rng(23)
        frac = np.array([0.5, 0.25, 0.25])
        w = rng.uniform(0.0, 0.9, size=12)
        ghost = 0.6
        field = frac[:, None] * w[None, :]
        multi = rf.scheme_step(field, frac * ghost, "free", P, dt_over_dx=0.5)
        single = rf.scheme_step(w[None, :], np.array([ghost]), "free", P, dt_over_dx=0.5)
        assert np.array_equal(multi.field, frac[:, None] * single.field[0][None, :])

    def test_cfl_violation_raises(self):
        field = np.array([[0.3, 0.4]])
        with pytest.raises(rf.SimulationError):
            rf.scheme_step(field, np.zeros(1), "free", P, dt_over_dx=1.5)

    def test_matches_classical_godunov_bitwise(self):
        # single group + constant feed: the population scheme must reduce to
        # the plain scalar scheme exactly, including the startup from zero
        lam, n_cells, n_steps = 0.5, 60, 200
        mine = np.zeros((1, n_cells))
        for n in range(n_steps):
            mine = rf.scheme_step(mine, np.array([0.3]), "free", P, dt_over_dx=lam).field
        ref = classical_godunov_run(
            np.zeros(n_cells), lambda n: 0.3, "free", P, lam, n_steps
        )[-1]
        assert np.array_equal(mine[0], ref)

    def test_matches_classical_godunov_positive_states(self):
        # states bounded away from zero never touch the dust guard, so the
        # reduction to the scalar scheme is exact
        lam, n_cells, n_steps = 0.4, 30, 150
        rng = np.random.default_rng(3)
        u0 = rng.uniform(0.2, 0.8, n_cells)
        mine = u0[None, :].copy()
        for n in range(n_steps):
            mine = rf.scheme_step(mine, np.array([0.15]), "free", P, dt_over_dx=lam).field
        ref = classical_godunov_run(u0, lambda n: 0.15, "free", P, lam, n_steps)[-1]
        assert np.array_equal(mine[0], ref)

    def test_wall_drain_stays_within_dust_tolerance(self):
        # draining toward a wall leaves cells with < 1e-14 vehicles; the share
        # guard pins that dust in place while the plain scheme keeps halving
        # it, so the schemes may drift apart by at most guard-per-step
        lam, n_cells, n_steps = 0.4, 30, 150
        rng = np.random.default_rng(3)
        u0 = rng.uniform(0.0, 0.8, n_cells)
        mine = u0[None, :].copy()
        for n in range(n_steps):
            mine = rf.scheme_step(mine, np.zeros(1), "blocked", P, dt_over_dx=lam).field
        ref = classical_godunov_run(u0, lambda n: 0.0, "blocked", P, lam, n_steps)[-1]
        assert np.abs(mine[0] - ref).max() <= n_steps * SHARE_GUARD
        assert mine[0].sum() == pytest.approx(ref.sum(), abs=n_steps * SHARE_GUARD)


class TestShares:
    def test_share_of_zero_total_is_zero(self):
        assert rf.population_share(np.zeros(3), 0.0).tolist() == [0.0, 0.0, 0.0]

    def test_share_below_guard_is_zero(self):
        assert rf.population_share(np.array([SHARE_GUARD / 4]), SHARE_GUARD / 2)[0] == 0.0

    def test_single_population_share_is_exactly_one(self):
        for u in (1e-13, 0.3, 0.999):
            assert rf.population_share(np.array([u]), u)[0] == 1.0

    @given(st.lists(st.floats(min_value=1e-10, max_value=1.0), min_size=1, max_size=5))
    def test_shares_sum_to_one(self, parts):
        parts = np.array(parts)
        shares = rf.population_share(parts, float(parts.sum()))
        assert shares.sum() == pytest.approx(1.0, abs=1e-12)


class TestGrid:
    def test_check_cfl(self):
        g = rf.Grid(dx=0.01, dt=0.005, horizon=1.0, cells={})
        assert rf.check_cfl(g, 1.0)
        g2 = rf.Grid(dx=0.01, dt=0.02, horizon=1.0, cells={})
        assert not rf.check_cfl(g2, 1.0)
        assert rf.check_cfl(g2, 0.0)

    def test_build_grid_counts_cells(self, benchmark):
        g = rf.build_grid(benchmark, 0.01, 0.005, 5.0)
        assert g.cells[0] == 85
        assert g.cells[4] == 100
        assert g.n_steps == 1000
        assert g.dt_over_dx == 0.5

    def test_build_grid_rejects_misaligned_road(self, chain_network):
        with pytest.raises(rf.GridError):
            rf.build_grid(chain_network, dx=0.03, dt=0.01, horizon=1.0)

    def test_build_grid_rejects_misaligned_horizon(self, chain_network):
        with pytest.raises(rf.GridError):
            rf.build_grid(chain_network, dx=0.01, dt=0.004, horizon=0.01)

    def test_build_grid_rejects_cfl_violation(self, chain_network):
        with pytest.raises(rf.GridError):
            rf.build_grid(chain_network, dx=0.01, dt=0.02, horizon=1.0)

    def test_times(self, chain_network):
        g = rf.build_grid(chain_network, 0.5, 0.25, 1.0)
        assert np.allclose(g.times(), [0.0, 0.25, 0.5, 0.75, 1.0])
