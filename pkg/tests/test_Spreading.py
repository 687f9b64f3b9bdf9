import math

import numpy as np
import pytest
from scipy import integrate, special

from kernels import Gaussian
from numerics.CauchySolver import SimState
from numerics.Errors import FrontError, WraparoundError
from numerics.Spectral import Field, Grid
from numerics.Spreading import (
    FrontTrace,
    SpreadConfig,
    check_wraparound,
    estimate_speed,
    fit_trace,
    front_position,
    heat_envelope,
    is_monotone,
    spreading_experiment,
    spreading_grid,
    trace_fronts,
)


def plateau(grid, half_width, value=1.0):
    """value on |x| <= half_width with unit-width linear ramps down to zero"""
    return Field(grid, value * np.clip(half_width + 1.0 - np.abs(grid.nodes), 0.0, 1.0))


def synthetic_trace(speed, times):
    times = tuple(float(t) for t in times)
    return FrontTrace(
        level=0.5,
        times=times,
        left_positions=tuple(-1.0 - speed * t for t in times),
        right_positions=tuple(1.0 + speed * t for t in times),
    )


class TestFrontPosition:
    def test_plateau_crossings(self):
        u = plateau(Grid(40.0, 256), 5.0)
        left, right = front_position(u, 0.5)
        assert left == pytest.approx(-5.5, abs=1e-12)
        assert right == pytest.approx(5.5, abs=1e-12)

    def test_measured_from_center(self):
        u = plateau(Grid(40.0, 256), 5.0)
        left, right = front_position(u, 0.5, center=1.0)
        assert (left, right) == pytest.approx((-6.5, 4.5), abs=1e-12)

    def test_no_front(self):
        with pytest.raises(FrontError, match="no front"):
            front_position(plateau(Grid(40.0, 256), 5.0, 0.4), 0.5)

    def test_level_must_be_positive(self):
        with pytest.raises(FrontError):
            front_position(plateau(Grid(40.0, 256), 5.0), 0.0)

    def test_trace_marks_missing_fronts(self):
        grid = Grid(40.0, 256)
        states = [SimState(0.0, plateau(grid, 5.0, 0.3), 1.0, Gaussian(1.0)), SimState(1.0, plateau(grid, 6.0), 1.0, Gaussian(1.0))]
        trace = trace_fronts(states, 0.5)
        assert math.isnan(trace.right_positions[0])
        assert trace.right_positions[1] == pytest.approx(6.5)
        assert trace.rows()[1] == pytest.approx((1.0, -6.5, 6.5))


class TestSpeedFit:
    def test_linear_front(self):
        trace = synthetic_trace(2.0, np.arange(0.0, 20.25, 0.25))
        speed, stderr = estimate_speed(trace, 10.0)
        assert speed == pytest.approx(2.0, abs=1e-3)
        assert stderr < 1e-6
        fitted = fit_trace(trace, 10.0)
        assert fitted.fitted_speed_left == pytest.approx(2.0, abs=1e-3)
        assert fitted.fitted_speed_right == pytest.approx(2.0, abs=1e-3)

    def test_insufficient_samples(self):
        trace = synthetic_trace(2.0, np.arange(0.0, 5.0, 1.0))
        with pytest.raises(FrontError, match="insufficient samples"):
            estimate_speed(trace, 0.0)

    def test_side_is_validated(self):
        with pytest.raises(ValueError):
            estimate_speed(synthetic_trace(1.0, range(20)), 0.0, side="up")

    def test_monotone(self):
        assert is_monotone(synthetic_trace(1.0, range(20)))
        receding = FrontTrace(level=0.5, times=(5.0, 6.0, 7.0), left_positions=(0.0,) * 3, right_positions=(3.0, 2.0, 4.0))
        assert not is_monotone(receding)


class TestEnvelope:
    def test_short_time_recovers_data(self):
        assert heat_envelope(1e-4, 0.0, 1.0, 1.0, 2.0) == pytest.approx(2.0 * math.exp(1e-4), rel=1e-12)

    def test_decays_far_away(self):
        assert 0.0 < heat_envelope(1.0, 30.0, 1.0, 1.0, 1.0) < 1e-90

    def test_far_tail_does_not_cancel(self):
        t, x, mu, R = 17.672, 54.625, 1.0, 3.0
        value = heat_envelope(t, x, mu, R, 1.0)
        one_sided = math.exp(mu * t) * 0.5 * special.erfc((x - R) / (2.0 * math.sqrt(t)))
        assert value > 0.0
        assert value == pytest.approx(one_sided, rel=1e-2)

    def test_symmetric_in_x(self):
        xs = np.array([0.5, 7.0, 40.0])
        assert np.array_equal(heat_envelope(3.0, xs, 1.0, 2.0, 1.0), heat_envelope(3.0, -xs, 1.0, 2.0, 1.0))

    @pytest.mark.parametrize("x", [0.0, 1.5, 4.0])
    def test_against_heat_kernel_quadrature(self, x):
        t, mu, R, height = 2.0, 0.7, 1.5, 3.0
        value, _ = integrate.quad(
            lambda y: math.exp(-((x - y) ** 2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t), -R, R, epsabs=1e-14
        )
        expected = height * math.exp(mu * t) * value
        assert heat_envelope(t, x, mu, R, height) == pytest.approx(expected, abs=1e-10)

    def test_needs_positive_time(self):
        with pytest.raises(ValueError):
            heat_envelope(0.0, 0.0, 1.0, 1.0, 1.0)


class TestGridRules:
    def test_spreading_grid(self):
        grid = spreading_grid(1.0, 60.0, 2.0)
        assert grid.period == 512.0
        assert grid.n == 4096

    def test_wraparound_detected(self):
        grid = Grid(40.0, 256)
        state = SimState(3.0, plateau(grid, 18.0), 1.0, Gaussian(1.0))
        with pytest.raises(WraparoundError, match="domain edge"):
            check_wraparound(state, 0.5)
        check_wraparound(SimState(3.0, plateau(grid, 5.0), 1.0, Gaussian(1.0)), 0.5)

    def test_levels_must_lie_below_bump_height(self):
        with pytest.raises(FrontError, match="strictly between"):
            spreading_experiment(1.0, Gaussian(1.0), SpreadConfig(levels=(0.5, 1.5)))

    def test_mu_must_be_positive(self):
        with pytest.raises(ValueError):
            spreading_experiment(0.0, Gaussian(1.0))


@pytest.mark.slow
class TestSpreadingSpeed:
    @pytest.mark.parametrize("mu", [1.0, 4.0])
    def test_gaussian_kernel_spreads_at_linear_speed(self, mu):
        report = spreading_experiment(mu, Gaussian(1.0), SpreadConfig(T=60.0))
        assert report.speed_theory == pytest.approx(2.0 * math.sqrt(mu))
        assert report.speed_band_ok()
        assert report.envelope_ok
        assert report.interior_min > 0.1
        for trace in report.traces.values():
            assert abs(trace.fitted_speed_right - trace.fitted_speed_left) < 1e-6
            assert is_monotone(trace)
