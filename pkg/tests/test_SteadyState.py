import math

import numpy as np
import pytest

from kernels import Gaussian, PhiBeta
from numerics import SteadyState as steady_solver
from numerics.Errors import PositivityError
from numerics.Spectral import Field, Grid, asymmetry, convolve, second_derivative
from numerics.Stability import mu_star, sufficient_stability_bound
from numerics.SteadyState import (
    DENSE_LIMIT,
    NEWTON_TOL,
    NewtonSolver,
    apply_T,
    check_stationarity,
    continuation,
    find_steady,
    residual,
    seed_profile,
    verify_bounds,
)

PATTERN_KERNEL = PhiBeta(100.0)
PATTERN_L = 0.4


@pytest.fixture(scope="module")
def pattern_state():
    grid = Grid(PATTERN_L, 64)
    mu = 1.5 * mu_star(PATTERN_KERNEL, PATTERN_L, 1)
    return find_steady(mu, PATTERN_KERNEL, PATTERN_L, seed_profile(grid, 1))


class TestOperators:
    def test_constant_one_is_a_fixed_point(self):
        one = Field.constant(Grid(3.0, 32), 1.0)
        assert residual(one, 4.0, Gaussian(1.0)).sup() < 1e-14
        assert np.allclose(apply_T(one, 4.0, Gaussian(1.0)).values, 1.0, atol=1e-14)

    def test_fixed_point_matches_residual(self):
        grid = Grid(5.0, 64)
        u = seed_profile(grid, 2, 0.3)
        mu, kernel = 2.0, Gaussian(0.5)
        # T(u) - u solves -w'' + w = F(u)
        w = apply_T(u, mu, kernel) - u
        assert np.allclose((-second_derivative(w) + w).values, residual(u, mu, kernel).values, atol=1e-11)


class TestJacobian:
    def setup_method(self):
        self.grid = Grid(10.0, 64)
        self.kernel = Gaussian(1.0)
        self.mu = 3.0
        self.solver = NewtonSolver(self.mu, self.kernel, self.grid)
        self.u = Field.from_function(self.grid, lambda x: 1.0 + 0.4 * np.cos(2.0 * math.pi * x / 10.0))
        self.delta = 0.1 * np.cos(4.0 * math.pi * self.grid.nodes / 10.0) + 0.05 * np.sin(2.0 * math.pi * self.grid.nodes / 10.0)

    def test_matrix_matches_action(self):
        phi_u = convolve(self.kernel, self.u)
        by_matrix = self.solver.jacobian_matrix(self.u) @ self.delta
        by_action = self.solver.jacobian_action(self.u, phi_u, self.delta)
        assert np.allclose(by_matrix, by_action, atol=1e-11)

    def test_matrix_matches_finite_differences(self):
        eps = 1e-4
        d = Field(self.grid, self.delta)
        plus = residual(self.u + eps * d, self.mu, self.kernel)
        minus = residual(self.u - eps * d, self.mu, self.kernel)
        finite = (plus - minus).values / (2.0 * eps)
        assert np.allclose(self.solver.jacobian_matrix(self.u) @ self.delta, finite, atol=1e-7)

    def test_action_output_is_writable(self):
        phi_u = convolve(self.kernel, self.u)
        assert self.solver.jacobian_action(self.u, phi_u, self.delta).flags.writeable

    def test_zero_step_is_not_rescaled(self):
        assert NewtonSolver.deflation_factor(self.u, np.zeros(self.grid.n)) == 1.0


class TestNewton:
    def test_non_constant_state_above_threshold(self, pattern_state):
        assert pattern_state.residual_norm < NEWTON_TOL
        assert pattern_state.newton_steps <= 15
        assert not pattern_state.is_constant
        assert pattern_state.min_u > 0.0

    def test_bounds_of_pattern_state(self, pattern_state):
        report = verify_bounds(pattern_state, PATTERN_KERNEL)
        assert report.positive
        assert report.upper_ingredient_holds
        assert report.max_u > 1.0 > report.min_u

    def test_pattern_state_is_even(self, pattern_state):
        values = pattern_state.u.values
        assert np.allclose(values, np.roll(values[::-1], 1), atol=1e-12)

    def test_mean_identity(self, pattern_state):
        u = pattern_state.u
        assert abs((u * (1.0 - convolve(PATTERN_KERNEL, u))).integral()) < 1e-10

    @pytest.mark.parametrize("shift", [1, 5, 17])
    def test_translates_are_steady(self, pattern_state, shift):
        shifted = Field(pattern_state.u.grid, np.roll(pattern_state.u.values, shift))
        moved = residual(shifted, pattern_state.mu, PATTERN_KERNEL).sup()
        assert moved == pytest.approx(pattern_state.residual_norm, abs=1e-11)

    def test_fixed_point_of_T(self, pattern_state):
        u = pattern_state.u
        assert (apply_T(u, pattern_state.mu, PATTERN_KERNEL) - u).sup() < 1e-9

    def test_every_iterate_is_even(self, monkeypatch):
        seen = []
        plain_residual = steady_solver.residual

        def recording_residual(u, mu, kernel):
            seen.append(asymmetry(u))
            return plain_residual(u, mu, kernel)

        monkeypatch.setattr(steady_solver, "residual", recording_residual)
        grid = Grid(PATTERN_L, 64)
        mu = 1.5 * mu_star(PATTERN_KERNEL, PATTERN_L, 1)
        theta = 2.0 * math.pi * grid.nodes / PATTERN_L
        lopsided = Field(grid, 1.0 + 0.05 * np.cos(theta) + 0.02 * np.sin(theta))
        state = find_steady(mu, PATTERN_KERNEL, PATTERN_L, lopsided)
        assert len(seen) >= 2
        assert max(seen) < 1e-12
        assert not state.is_constant

    @pytest.mark.parametrize("kernel", [Gaussian(1.0), PATTERN_KERNEL])
    def test_only_constant_state_for_small_mu(self, kernel):
        L = 10.0
        grid = Grid(L, 64)
        mu = 0.1 * sufficient_stability_bound(L)
        rng = np.random.default_rng(7)
        for _ in range(10):
            mean = rng.uniform(0.8, 1.3)
            amplitudes = rng.uniform(-0.1, 0.1, size=3)
            values = mean + sum(a * np.cos(2.0 * math.pi * (k + 1) * grid.nodes / L) for k, a in enumerate(amplitudes))
            state = find_steady(mu, kernel, L, Field(grid, values))
            assert state.is_constant
            assert np.allclose(state.u.values, 1.0, atol=1e-9)

    def test_krylov_path(self):
        L = 10.0
        grid = Grid(L, 64)
        state = find_steady(1.0, Gaussian(1.0), L, Field.constant(grid, 1.2), deflate=False, dense_limit=0)
        assert state.residual_norm < NEWTON_TOL
        assert np.allclose(state.u.values, 1.0, atol=1e-9)

    def test_krylov_is_default_on_fine_grids(self):
        L = 10.0
        grid = Grid(L, 2 * DENSE_LIMIT)
        assert not NewtonSolver(1.0, Gaussian(1.0), grid).dense
        init = Field.from_function(grid, lambda x: 1.2 + 0.1 * np.cos(2.0 * math.pi * x / L))
        state = find_steady(1.0, Gaussian(1.0), L, init, deflate=False)
        assert state.residual_norm < NEWTON_TOL
        assert np.allclose(state.u.values, 1.0, atol=1e-9)

    def test_rejects_non_positive_guess(self):
        grid = Grid(2.0, 32)
        init = Field.from_function(grid, lambda x: np.cos(math.pi * x))
        with pytest.raises(PositivityError, match="not positive"):
            find_steady(1.0, Gaussian(1.0), 2.0, init, deflate=False)

    def test_rejects_period_mismatch(self):
        with pytest.raises(ValueError, match="period"):
            find_steady(1.0, Gaussian(1.0), 3.0, Field.constant(Grid(2.0, 32), 1.0))

    def test_rejects_non_positive_mu(self):
        with pytest.raises(ValueError):
            NewtonSolver(0.0, Gaussian(1.0), Grid(2.0, 32))


class TestContinuation:
    def test_branch_above_threshold(self):
        threshold = mu_star(PATTERN_KERNEL, PATTERN_L, 1)
        branch = continuation(PATTERN_KERNEL, PATTERN_L, 1, 1.3 * threshold, 1.6 * threshold, 3, n=64)
        assert len(branch) == 3
        assert [state.mu for state in branch] == pytest.approx([1.3 * threshold, 1.45 * threshold, 1.6 * threshold])
        for state in branch:
            assert state.residual_norm < NEWTON_TOL
            assert not state.is_constant

    def test_halving_the_step_reproduces_the_branch(self):
        threshold = mu_star(PATTERN_KERNEL, PATTERN_L, 1)
        coarse = continuation(PATTERN_KERNEL, PATTERN_L, 1, 1.3 * threshold, 1.6 * threshold, 3, n=64)
        fine = continuation(PATTERN_KERNEL, PATTERN_L, 1, 1.3 * threshold, 1.6 * threshold, 5, n=64)
        for a, b in zip(coarse, fine[::2]):
            assert a.mu == pytest.approx(b.mu, rel=1e-14)
            assert np.allclose(a.u.values, b.u.values, atol=1e-8)

    def test_start_must_exceed_threshold(self):
        threshold = mu_star(PATTERN_KERNEL, PATTERN_L, 1)
        with pytest.raises(ValueError, match="must exceed"):
            continuation(PATTERN_KERNEL, PATTERN_L, 1, 0.9 * threshold, 1.5 * threshold, 3, n=64)

    def test_needs_two_steps(self):
        with pytest.raises(ValueError, match="at least 2"):
            continuation(PATTERN_KERNEL, PATTERN_L, 1, 6000.0, 7000.0, 1, n=64)


class TestStationarity:
    def test_short_run_stays_on_the_state(self, pattern_state):
        report = check_stationarity(pattern_state, PATTERN_KERNEL, T=0.01, samples=10)
        assert report.times[0] == 0.0
        assert report.times[-1] == pytest.approx(0.01)
        assert report.max_deviation < 1e-9

    def test_constant_state_is_exactly_stationary(self):
        state = find_steady(2.0, Gaussian(1.0), 10.0, Field.constant(Grid(10.0, 32), 1.0))
        report = check_stationarity(state, Gaussian(1.0), T=1.0, dt=0.01)
        assert report.max_deviation < 1e-14
        assert len(report.rows()) == len(report.times)

    @pytest.mark.slow
    def test_pattern_state_is_stationary_over_ten_time_units(self, pattern_state):
        report = check_stationarity(pattern_state, PATTERN_KERNEL, T=10.0, dt=5e-5)
        assert report.times[-1] == pytest.approx(10.0)
        assert report.max_deviation < 1e-8
