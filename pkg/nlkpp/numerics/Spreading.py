"""
Front tracking and spreading-speed measurement for compactly supported data.

A compact bump is evolved on a periodic domain wide enough that the fronts
never see the images of the solution; level-set positions are tracked on
every recorded snapshot and their slope against time is the spreading speed,
expected to approach 2 sqrt(mu) for every admissible kernel.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from numerics.CauchySolver import (
    SimState,
    bump_field,
    bump_support_radius,
    default_dt,
    evolve,
    spreading_period,
)
from numerics.Errors import FrontError, WraparoundError
from numerics.NumericUtils import linear_fit, next_power_of_two
from numerics.Spectral import Field, Grid

DEFAULT_LEVELS = (0.5, 0.1, 0.01)
MIN_FIT_SAMPLES = 10
ENVELOPE_RTOL = 1e-6
ENVELOPE_FLOOR = 1e-12
EDGE_FRACTION = 0.05
INTERIOR_FRACTION = 0.8


@dataclass(frozen=True)
class FrontTrace:
    level: float
    times: Tuple[float, ...]
    left_positions: Tuple[float, ...]
    right_positions: Tuple[float, ...]
    fitted_speed_right: Optional[float] = None
    fitted_speed_left: Optional[float] = None
    stderr_right: Optional[float] = None
    stderr_left: Optional[float] = None

    def rows(self):
        return list(zip(self.times, self.left_positions, self.right_positions))


@dataclass(frozen=True)
class SpreadConfig:
    T: float = 60.0
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    period: Optional[float] = None
    n: Optional[int] = None
    max_spacing: float = 0.125
    bump_width: float = 2.0
    bump_height: float = 1.0
    record_interval: float = 0.25
    t_min: Optional[float] = None
    dt: Optional[float] = None
    scheme: str = "imex1"
    interior_fraction: float = INTERIOR_FRACTION


@dataclass(frozen=True)
class SpreadingReport:
    mu: float
    kernel_family: str
    grid: Grid
    dt: float
    speed_theory: float
    traces: Dict[float, FrontTrace]
    envelope_ok: bool
    envelope_worst_ratio: float
    interior_speed: float
    interior_min: float
    wake_min: float
    wake_max: float
    final: SimState = field(repr=False)

    def speed_band_ok(self, lower: float = 0.92, upper: float = 1.05) -> bool:
        return all(
            lower * self.speed_theory <= trace.fitted_speed_right <= upper * self.speed_theory
            for trace in self.traces.values()
        )


def front_position(u: Field, level: float, center: float = 0.0) -> Tuple[float, float]:
    """
    Outermost crossings (left, right) of u = level, linearly interpolated
    between grid nodes and measured from `center`.
    """
    if not level > 0.0:
        raise FrontError(f"front level must be positive, got {level}")
    values = u.values
    above = np.flatnonzero(values >= level)
    if above.size == 0 or u.max() <= level:
        raise FrontError(f"no front: max u = {u.max():.6g} does not exceed level {level:g}")

    x, h = u.grid.nodes, u.grid.spacing
    first, last = int(above[0]), int(above[-1])
    right = x[last]
    if last + 1 < u.grid.n:
        right += h * (values[last] - level) / (values[last] - values[last + 1])
    left = x[first]
    if first > 0:
        left -= h * (values[first] - level) / (values[first] - values[first - 1])
    return float(left - center), float(right - center)


def trace_fronts(trajectory: Sequence[SimState], level: float, center: float = 0.0) -> FrontTrace:
    """Front positions at every recorded time; NaN where u stays below the level."""
    times, lefts, rights = [], [], []
    for state in trajectory:
        try:
            left, right = front_position(state.u, level, center)
        except FrontError:
            left = right = math.nan
        times.append(state.t)
        lefts.append(left)
        rights.append(right)
    return FrontTrace(level=level, times=tuple(times), left_positions=tuple(lefts), right_positions=tuple(rights))


def estimate_speed(trace: FrontTrace, t_min: float, side: str = "right") -> Tuple[float, float]:
    """
    Least-squares slope of the front position against time over t >= t_min.

    The left front moves towards -inf, so its speed is reported as minus the
    slope.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    t = np.asarray(trace.times)
    positions = np.asarray(trace.right_positions if side == "right" else trace.left_positions)
    mask = (t >= t_min) & np.isfinite(positions)
    if int(mask.sum()) < MIN_FIT_SAMPLES:
        raise FrontError(
            f"insufficient samples: {int(mask.sum())} with t >= {t_min:g} at level {trace.level:g}, "
            f"need {MIN_FIT_SAMPLES}"
        )
    slope, stderr, _ = linear_fit(t[mask], positions[mask])
    return (slope if side == "right" else -slope), stderr


def fit_trace(trace: FrontTrace, t_min: float) -> FrontTrace:
    right, right_err = estimate_speed(trace, t_min, "right")
    left, left_err = estimate_speed(trace, t_min, "left")
    return replace(
        trace, fitted_speed_right=right, fitted_speed_left=left, stderr_right=right_err, stderr_left=left_err
    )


def is_monotone(trace: FrontTrace, t_from: float = 5.0) -> bool:
    """Whether the right front is nondecreasing after t_from."""
    t = np.asarray(trace.times)
    positions = np.asarray(trace.right_positions)[t >= t_from]
    positions = positions[np.isfinite(positions)]
    return bool(np.all(np.diff(positions) >= 0.0))


def heat_envelope(t: float, x, mu: float, R: float, u0_sup: float):
    """
    u0_sup exp(mu t) (1/2) [erf((x + R) / (2 sqrt t)) - erf((x - R) / (2 sqrt t))]:
    the heat flow of u0_sup times the indicator of [-R, R], amplified at rate mu.

    Evaluated as a difference of erfc at |x| so the far tail does not cancel to 0.
    """
    if not t > 0.0:
        raise ValueError(f"heat envelope needs t > 0, got {t}")
    dist = np.abs(np.asarray(x, dtype=float))
    scale = 2.0 * math.sqrt(t)
    result = u0_sup * math.exp(mu * t) * 0.5 * (erfc((dist - R) / scale) - erfc((dist + R) / scale))
    return float(result) if np.ndim(result) == 0 else result


def spreading_grid(mu: float, T: float, support: float, max_spacing: float = 0.125) -> Grid:
    """Power-of-two period from the wraparound rule and a power-of-two n with h <= max_spacing."""
    period = spreading_period(mu, T, support)
    n = max(8, next_power_of_two(period / max_spacing))
    return Grid(period, n)


def check_wraparound(state: SimState, level: float, center: float = 0.0):
    half = 0.5 * state.u.grid.period
    margin = EDGE_FRACTION * state.u.grid.period
    try:
        left, right = front_position(state.u, level, center)
    except FrontError:
        return
    if right > half - margin or left < -half + margin:
        raise WraparoundError(
            f"front at level {level:g} reached ({left:.4g}, {right:.4g}) at t={state.t:.4g}, within "
            f"{EDGE_FRACTION:.0%} of the domain edge +/-{half:g}; increase the period or shorten T"
        )


def envelope_check(trajectory: Sequence[SimState], mu: float, R: float, u0_sup: float) -> Tuple[bool, float]:
    """
    Check u <= envelope (1 + rtol) + floor at every recorded (t, x) with t > 0.

    Returns (ok, worst ratio of u to the envelope where the envelope is above
    the floor).
    """
    ok, worst = True, 0.0
    for state in trajectory:
        if state.t <= 0.0:
            continue
        envelope = heat_envelope(state.t, state.u.x, mu, R, u0_sup)
        values = state.u.values
        if np.any(values > envelope * (1.0 + ENVELOPE_RTOL) + ENVELOPE_FLOOR):
            if ok:
                logging.error(f"Heat envelope exceeded at t={state.t:.4g}")
            ok = False
        significant = envelope > ENVELOPE_FLOOR
        if np.any(significant):
            worst = max(worst, float(np.max(values[significant] / envelope[significant])))
    return ok, worst


def spreading_experiment(mu: float, kernel, config: SpreadConfig = SpreadConfig()) -> SpreadingReport:
    """
    Evolve a compact bump, trace the fronts at each level, fit the speeds
    over [t_min, T] and check the envelope and the interior floor.
    """
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    T = config.T
    levels = tuple(sorted(config.levels, reverse=True))
    if any(not 0.0 < level < config.bump_height for level in levels):
        raise FrontError(f"levels {levels} must lie strictly between 0 and the bump height {config.bump_height:g}")

    support = 0.5 * config.bump_width + 1.0
    grid = spreading_grid(mu, T, support, config.max_spacing)
    if config.period is not None or config.n is not None:
        period = config.period or grid.period
        grid = Grid(period, config.n or max(8, next_power_of_two(period / config.max_spacing)))

    u0 = bump_field(grid, 0.0, config.bump_width, config.bump_height)
    R = bump_support_radius(grid, 0.0, config.bump_width)
    dt = config.dt or default_dt(mu, kernel, u0, T)
    record_every = max(1, int(round(config.record_interval / dt)))
    logging.info(
        f"Spreading run mu={mu:g}, kernel={kernel.family}, grid={grid}, T={T:g}, record every {record_every} steps"
    )

    trajectory = evolve(u0, mu, kernel, T, dt=dt, record_every=record_every, scheme=config.scheme)
    for state in trajectory:
        check_wraparound(state, levels[-1])

    t_min = 0.5 * T if config.t_min is None else config.t_min
    traces = {level: fit_trace(trace_fronts(trajectory, level), t_min) for level in levels}
    envelope_ok, worst = envelope_check(trajectory, mu, R, float(u0.max()))

    final = trajectory[-1]
    c_in = config.interior_fraction * 2.0 * math.sqrt(mu)
    interior = np.abs(final.u.x) <= c_in * final.t
    if not np.any(interior):
        raise FrontError(f"interior region |x| <= {c_in * final.t:g} contains no grid node")
    wake = final.u.values[interior]

    report = SpreadingReport(
        mu=mu,
        kernel_family=kernel.family,
        grid=grid,
        dt=T / max(1, int(math.ceil(T / dt - 1e-9))),
        speed_theory=2.0 * math.sqrt(mu),
        traces=traces,
        envelope_ok=envelope_ok,
        envelope_worst_ratio=worst,
        interior_speed=c_in,
        interior_min=float(np.min(wake)),
        wake_min=float(np.min(wake)),
        wake_max=float(np.max(wake)),
        final=final,
    )
    for level, trace in traces.items():
        logging.info(
            f"level {level:g}: right speed {trace.fitted_speed_right:.5f} +/- {trace.stderr_right:.1e}, "
            f"left speed {trace.fitted_speed_left:.5f} (theory {report.speed_theory:.5f})"
        )
    return report


def speed_rows(report: SpreadingReport) -> List[tuple]:
    """Fit summary rows (level, speed_right, stderr_right, speed_left, stderr_left, theory)."""
    return [
        (level, t.fitted_speed_right, t.stderr_right, t.fitted_speed_left, t.stderr_left, report.speed_theory)
        for level, t in report.traces.items()
    ]
