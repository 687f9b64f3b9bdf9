"""
Kernel Family Implementations
-----------------------------

Concrete interaction kernels with closed-form densities and transforms, plus
the registry that turns a config record such as
{"family": "phi_beta", "beta": 100.0} into a kernel instance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Tuple

import numpy as np

from KernelInterfaces import Kernel
from numerics.Errors import KernelError

SQRT_PI = math.sqrt(math.pi)


def _require_positive(name: str, value: float):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0.0):
        raise KernelError(f"{name} must be a positive finite real, got {value!r}")


@dataclass(frozen=True)
class Gaussian(Kernel):
    """phi(x) = exp(-x^2/s^2) / (s sqrt(pi))"""

    s: float = 1.0
    family = "gaussian"

    def __post_init__(self):
        _require_positive("s", self.s)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((x / self.s) ** 2)) / (self.s * SQRT_PI)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-((math.pi * self.s * xi) ** 2))

    def window_bound(self) -> Tuple[float, float]:
        sigma = self.s * math.sqrt(math.log(2.0))
        return sigma, 1.0 / (2.0 * self.s * SQRT_PI)

    def parameters(self) -> dict:
        return {"s": self.s}


@dataclass(frozen=True)
class TopHat(Kernel):
    """Uniform density 1/(2a) on [-a, a]"""

    a: float = 1.0
    family = "top_hat"

    def __post_init__(self):
        _require_positive("a", self.a)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.a, 1.0 / (2.0 * self.a), 0.0)

    def fourier(self, xi):
        # numpy's sinc is sin(pi t)/(pi t), so sinc(2 a xi) = sin(2 pi a xi)/(2 pi a xi)
        return np.sinc(2.0 * self.a * np.asarray(xi, dtype=float))

    def window_bound(self) -> Tuple[float, float]:
        return self.a, 1.0 / (2.0 * self.a)

    def parameters(self) -> dict:
        return {"a": self.a}


@dataclass(frozen=True)
class PhiBeta(Kernel):
    """
    Difference-of-Gaussians kernel whose transform turns negative for large beta:

        phi_beta(x) = (exp(-x^2) - exp(-beta x^2) + exp(-beta^2 x^2)) / (c_beta sqrt(pi)),
        c_beta = 1 - 1/sqrt(beta) + 1/beta.
    """

    beta: float = 100.0
    family = "phi_beta"

    def __post_init__(self):
        _require_positive("beta", self.beta)
        if self.beta <= 1.0:
            raise KernelError(f"phi_beta requires beta > 1, got {self.beta}")
        if not self.c_beta > 0.0:
            raise KernelError(f"phi_beta requires c_beta > 0, got {self.c_beta}")
        samples = self.density(np.linspace(-10.0, 10.0, 4001))
        if not np.min(samples) > 0.0:
            raise KernelError(f"phi_beta(beta={self.beta}) is not pointwise positive")

    @property
    def c_beta(self) -> float:
        return 1.0 - 1.0 / math.sqrt(self.beta) + 1.0 / self.beta

    def density(self, x):
        x2 = np.asarray(x, dtype=float) ** 2
        b = self.beta
        return (np.exp(-x2) - np.exp(-b * x2) + np.exp(-b * b * x2)) / (self.c_beta * SQRT_PI)

    def fourier(self, xi):
        q = (math.pi * np.asarray(xi, dtype=float)) ** 2
        b = self.beta
        return (np.exp(-q) - np.exp(-q / b) / math.sqrt(b) + np.exp(-q / (b * b)) / b) / self.c_beta

    def parameters(self) -> dict:
        return {"beta": self.beta}


@dataclass(frozen=True)
class DiracPair(Kernel):
    """The atomic kernel (delta_{-shift} + delta_{shift}) / 2"""

    shift: float = 1.0
    family = "dirac_pair"
    is_atomic = True

    def __post_init__(self):
        _require_positive("shift", self.shift)

    def density(self, x):
        raise KernelError("atomic kernel has no density")

    def eval_density(self, x):
        raise KernelError("atomic kernel has no density")

    def fourier(self, xi):
        return np.cos(2.0 * math.pi * self.shift * np.asarray(xi, dtype=float))

    def window_bound(self) -> Tuple[float, float]:
        # No (sigma, eta) exists: the boundedness argument does not apply.
        raise KernelError("window hypothesis violated: dirac_pair has no positive lower bound near 0")

    def parameters(self) -> dict:
        return {"shift": self.shift}


@dataclass(frozen=True, eq=False)
class Tabulated(Kernel):
    """
    Kernel sampled over one period on the nodes x_j = -P/2 + j*h.

    Samples are treated as already periodized and are normalized on
    construction so the trapezoid mass is 1.
    """

    values: np.ndarray = field(default=None)
    period: float = 1.0
    family = "tabulated"

    def __post_init__(self):
        _require_positive("period", self.period)
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 8 or values.size % 2:
            raise KernelError(f"tabulated kernel needs an even number (>= 8) of samples, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise KernelError("tabulated kernel has non-finite samples")
        if np.min(values) < 0.0:
            raise KernelError(f"tabulated kernel is negative somewhere (min {np.min(values):.3e})")
        mirrored = np.roll(values[::-1], 1)
        asymmetry = float(np.max(np.abs(values - mirrored)))
        if asymmetry > 1e-10 * max(1.0, float(np.max(values))):
            raise KernelError(f"tabulated kernel must be even, asymmetry {asymmetry:.3e}")
        mass = self.spacing * float(np.sum(values))
        if not mass > 0.0:
            raise KernelError("tabulated kernel has zero mass")
        values = values / mass
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        logging.debug(f"Tabulated kernel normalized (raw mass {mass:.12g}, {values.size} samples)")

    @property
    def spacing(self) -> float:
        return self.period / len(self.values)

    @property
    def nodes(self) -> np.ndarray:
        return -0.5 * self.period + self.spacing * np.arange(len(self.values))

    def density(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values, period=self.period)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        phases = np.cos(2.0 * math.pi * np.multiply.outer(xi, self.nodes))
        return self.spacing * (phases @ self.values)

    def window_bound(self) -> Tuple[float, float]:
        nodes, values = self.nodes, self.values
        peak = float(self.density(0.0))
        if not peak > 0.0:
            raise KernelError("window hypothesis violated: tabulated kernel vanishes at the origin")
        right = nodes > 0.0
        below = np.nonzero(values[right] <= 0.5 * peak)[0]
        if below.size == 0:
            sigma = float(nodes[right][-1])
        else:
            j = below[0]
            x_hi, y_hi = nodes[right][j], values[right][j]
            x_lo, y_lo = (nodes[right][j - 1], values[right][j - 1]) if j > 0 else (0.0, peak)
            sigma = float(x_lo + (0.5 * peak - y_lo) * (x_hi - x_lo) / (y_hi - y_lo)) if y_hi != y_lo else float(x_hi)
        inside = values[np.abs(nodes) < sigma]
        eta = min(float(self.density(sigma)), float(np.min(inside)) if inside.size else peak)
        if not eta > 0.0:
            raise KernelError("window hypothesis violated: tabulated kernel has a zero near the origin")
        return sigma, eta

    def parameters(self) -> dict:
        return {"period": self.period, "samples": len(self.values)}


KERNEL_FAMILIES = {
    "gaussian": (Gaussian, ("s",)),
    "top_hat": (TopHat, ("a",)),
    "phi_beta": (PhiBeta, ("beta",)),
    "dirac_pair": (DiracPair, ("shift",)),
    "tabulated": (Tabulated, ("values", "period")),
}


def make_kernel(spec: Mapping) -> Kernel:
    """
    Build a kernel from a tagged record, e.g. {"family": "gaussian", "s": 1.0}.
    """
    family = spec.get("family")
    if family not in KERNEL_FAMILIES:
        raise KernelError(f"unknown kernel family {family!r}; expected one of {sorted(KERNEL_FAMILIES)}")
    cls, names = KERNEL_FAMILIES[family]
    unknown = set(spec) - set(names) - {"family"}
    if unknown:
        raise KernelError(f"unknown parameters for {family}: {sorted(unknown)}")
    kwargs = {name: spec[name] for name in names if name in spec}
    kernel = cls(**kwargs)
    logging.debug(f"Constructed kernel {kernel.describe()}")
    return kernel
