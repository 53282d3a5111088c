"""Time grids, the logarithmic clock, and step-size diagnostics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from follmer.grids import (
    TimeGrid,
    grid_explicit,
    grid_uniform_t,
    grid_uniform_tau,
    random_tau_grid,
    t_of_tau,
    tau_of_t,
    terminal_clock_gap_bounds,
)


class TestConstructors:
    def test_uniform_t_endpoints_and_spacing(self):
        g = grid_uniform_t(1.0 / 11.0, 0.0, 10)
        assert_allclose(g.t, np.arange(1, 12) / 11.0, rtol=1e-15)
        assert g.t[-1] == 1.0
        assert g.t0 == 1.0 / 11.0
        assert_allclose(g.h, np.full(10, 1.0 / 11.0), rtol=1e-12)

    def test_uniform_tau_is_geometric(self):
        g = grid_uniform_tau(0.01, 0.01, 8)
        assert g.t0 == 0.01
        assert g.t_end == 0.99
        ratios = g.t[1:] / g.t[:-1]
        assert_allclose(ratios, ratios[0], rtol=1e-12)

    def test_steps_sum_to_span(self):
        g = grid_uniform_tau(0.05, 0.02, 13)
        assert_allclose(g.h.sum(), g.t_end - g.t0, rtol=1e-12)

    def test_explicit_rejects_nonincreasing(self):
        with pytest.raises(ValueError):
            grid_explicit([0.1, 0.5, 0.5])
        with pytest.raises(ValueError):
            grid_explicit([0.5, 0.1])

    def test_explicit_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            grid_explicit([0.0, 0.5])
        with pytest.raises(ValueError):
            grid_explicit([0.5, 1.5])

    def test_single_node_grid(self):
        g = grid_explicit([0.25])
        assert g.n_steps == 0
        assert g.kappa_step == 0.0
        assert g.kappa_tau == 0.0

    def test_construction_validation(self):
        with pytest.raises(ValueError):
            grid_uniform_t(0.0, 0.0, 4)
        with pytest.raises(ValueError):
            grid_uniform_t(0.5, 0.6, 4)
        with pytest.raises(ValueError):
            grid_uniform_tau(0.1, 0.0, 0)


class TestDiagnostics:
    """Frozen arithmetic oracles on the grid (0.2, 0.5, 0.75)."""

    def grid(self):
        return grid_explicit([0.2, 0.5, 0.75])

    def test_kappa_step(self):
        assert_allclose(self.grid().kappa_step, 1.0, rtol=1e-12)

    def test_kappa_relative(self):
        assert_allclose(self.grid().kappa_relative, 0.25, rtol=1e-12)

    def test_kappa_tau(self):
        assert_allclose(self.grid().kappa_tau, 1.4094208396532097, rtol=1e-10)

    def test_horizon(self):
        assert_allclose(self.grid().horizon, 0.8047189562170501, rtol=1e-12)

    def test_tau_values(self):
        assert_allclose(self.grid().tau, [0.0, 0.4581453659370775, 0.6608779199911596], rtol=1e-10, atol=1e-12)

    def test_kappa_step_infinite_at_unit_terminal(self):
        g = grid_uniform_t(0.25, 0.0, 4)
        assert g.t[-1] == 1.0
        assert g.kappa_step == math.inf

    def test_as_dict_keys(self):
        d = self.grid().as_dict()
        for key in ("t", "tau", "h", "kappa_step", "kappa_tau", "kappa_relative", "horizon"):
            assert key in d


class TestClock:
    def test_round_trip(self):
        t0 = 0.02
        ts = np.array([0.02, 0.1, 0.5, 0.97])
        assert_allclose(t_of_tau(tau_of_t(ts, t0), t0), ts, rtol=1e-12)

    def test_clock_zero_at_start(self):
        assert tau_of_t(0.3, 0.3) == 0.0

    def test_clock_rejects_bad_times(self):
        with pytest.raises(ValueError):
            tau_of_t(0.0, 0.1)
        with pytest.raises(ValueError):
            t_of_tau(10.0, 0.1)

    def test_terminal_gap_bounds(self):
        assert terminal_clock_gap_bounds(0.0) == (0.0, 0.0)
        lo, hi = terminal_clock_gap_bounds(0.1)
        assert_allclose([lo, hi], [0.05, 0.1 / 1.8], rtol=1e-12)

    def test_uniform_tau_terminal_gap_within_bounds(self):
        delta = 0.07
        g = grid_uniform_tau(0.01, delta, 12)
        gap = g.horizon - g.tau[-1]
        lo, hi = terminal_clock_gap_bounds(delta)
        assert lo <= gap <= hi * (1 + 1e-12)


class TestAssumptionReport:
    def test_uniform_tau_satisfies_clock_condition(self):
        g = grid_uniform_tau(0.01, 0.01, 32)
        rep = g.check_assumptions()
        assert rep.t0_at_most_half
        assert rep.tau_implies_step
        assert rep.tau_implies_relative

    def test_random_grids_satisfy_conditions(self):
        # small battery here; the thousand-grid sweep lives in acceptance
        rng = np.random.default_rng(11)
        for _ in range(50):
            kappa = float(rng.uniform(0.05, 1.0))
            g = random_tau_grid(kappa, int(rng.integers(2, 40)), rng)
            assert np.all(np.diff(g.t) > 0)
            assert 0.0 < g.t0 and g.t_end < 1.0
            assert g.kappa_tau <= kappa * (1 + 1e-9)
            rep = g.check_assumptions()
            assert rep.tau_implies_step
            assert rep.tau_implies_relative

    def test_coarse_grid_flags(self):
        g = grid_explicit([0.4, 0.99])
        # one huge step: h = 0.59, 1 - t_1 = 0.01 so kappa_step = 59
        assert g.kappa_step > 1.0
