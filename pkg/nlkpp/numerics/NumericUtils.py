import math

import numpy as np
from scipy import stats
from scipy.special import erf

# Gaussian mollifier width for compact-support data, in grid cells; at 2 cells
# the modes k >= 7n/16 still carry about 1e-8 of the bump, above the 1e-10 resolution floor
MOLLIFIER_CELLS = 3.0


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(value: float) -> int:
    """Smallest power of two >= value (and >= 1)."""
    if value <= 1.0:
        return 1
    return 1 << int(math.ceil(math.log2(value)))


def smoothed_indicator(x: np.ndarray, center: float, half_width: float, height: float, scale: float) -> np.ndarray:
    """
    height * indicator([center - half_width, center + half_width]) convolved
    with a Gaussian of standard deviation `scale`.
    """
    if scale <= 0.0:
        return np.where(np.abs(x - center) <= half_width, height, 0.0)
    z = math.sqrt(2.0) * scale
    return 0.5 * height * (erf((x - center + half_width) / z) - erf((x - center - half_width) / z))


def cosine_profile(x: np.ndarray, period: float, mean: float, amplitude: float, mode: int) -> np.ndarray:
    return mean + amplitude * np.cos(2.0 * math.pi * mode * x / period)


def linear_fit(t, y):
    """Least-squares slope of y against t and its standard error."""
    result = stats.linregress(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    return float(result.slope), float(result.stderr), float(result.intercept)


def fit_log_rate(t, magnitude):
    """Exponential rate of a positive series: slope of log(magnitude) against t."""
    slope, stderr, _ = linear_fit(t, np.log(np.asarray(magnitude, dtype=float)))
    return slope, stderr


def log_grid(start: float, stop: float, steps: int) -> np.ndarray:
    return np.geomspace(start, stop, steps)
