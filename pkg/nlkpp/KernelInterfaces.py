"""
Kernel Interface Definitions for the nonlocal Fisher-KPP toolkit
---------------------------------------------------------------

This module contains the abstract base class for interaction kernels and the
executable version of the pattern-forming hypothesis on their transform.
It defines the contract that every kernel family must implement.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from numerics.Errors import DomainError, KernelError

TOL_FOURIER = 1e-12
WINDOW_SCAN = (1e-6, 1e6)
WINDOW_SCAN_POINTS = 8193


class Kernel(ABC):
    """
    Abstract base class for convolution kernels phi.

    All kernels must implement:
      • density(x) -> phi(x), vectorized over numpy arrays
      • fourier(xi) -> phi_hat(xi) = integral of phi(x) exp(-2 i pi xi x) dx
      • parameters() -> the defining parameters, used for reports and configs

    Kernels are immutable once constructed and safe to share between workers.
    """

    family: str = "generic"
    is_atomic: bool = False

    @abstractmethod
    def density(self, x):
        """Evaluate the density without argument checks."""
        pass

    @abstractmethod
    def fourier(self, xi):
        """Closed-form (or quadrature) Fourier transform, real for even kernels."""
        pass

    @abstractmethod
    def parameters(self) -> dict:
        pass

    def eval_density(self, x):
        """
        Evaluate phi(x) >= 0, rejecting non-finite arguments.
        """
        x_arr = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x_arr)):
            raise DomainError(f"density of {self.family} evaluated at non-finite x")
        return self.density(x)

    def window_bound(self) -> Tuple[float, float]:
        """
        Return (sigma, eta) with phi >= eta on (-sigma, sigma).

        sigma is the first half-maximum crossing going outward from 0, so a
        density that dips and recovers is cut at the dip. eta is the smallest
        sampled density on [0, sigma]; families with a closed form override this.
        """
        peak = float(self.density(0.0))
        if not peak > 0.0:
            raise KernelError(f"window hypothesis violated: {self.family} vanishes at the origin")
        xs = np.geomspace(WINDOW_SCAN[0], WINDOW_SCAN[1], WINDOW_SCAN_POINTS)
        below = np.nonzero(np.asarray(self.density(xs), dtype=float) <= 0.5 * peak)[0]
        if below.size == 0:
            raise KernelError(f"window hypothesis violated: {self.family} never halves")
        j = below[0]
        lo = float(xs[j - 1]) if j > 0 else 0.0
        sigma = brentq(lambda x: float(self.density(x)) - 0.5 * peak, lo, float(xs[j]), xtol=1e-14)
        inside = np.asarray(self.density(np.linspace(0.0, sigma, WINDOW_SCAN_POINTS)), dtype=float)
        eta = float(np.min(inside))
        logging.debug(f"Window bound for {self.family}: sigma={sigma:.12g}, eta={eta:.12g}")
        return sigma, eta

    def describe(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.parameters().items() if isinstance(v, (int, float)))
        return f"{self.family}({params})"

    def __repr__(self):
        return f"<Kernel {self.describe()}>"


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of scanning phi_hat(k/L) for exactly one negative sample."""

    satisfied: bool
    k0: Optional[int]
    L: float
    k_max: int
    values: List[float] = field(default_factory=list)

    @property
    def negative_modes(self) -> List[int]:
        return [k for k, v in enumerate(self.values) if v < -TOL_FOURIER]


def check_hypothesis(kernel: Kernel, L: float, k_max: int, tol_fourier: float = TOL_FOURIER) -> HypothesisReport:
    """
    Scan k = 0..k_max and report whether exactly one phi_hat(k/L) is negative.

    Two or more negative samples make the verdict false; all values are
    returned either way so callers can see why.
    """
    if not (L > 0.0 and math.isfinite(L)):
        raise ValueError(f"L must be positive, got {L}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")

    ks = np.arange(k_max + 1)
    values = [float(v) for v in np.broadcast_to(kernel.fourier(ks / L), ks.shape)]
    negatives = [k for k, v in enumerate(values) if v < -tol_fourier]
    satisfied = len(negatives) == 1
    k0 = negatives[0] if satisfied else None

    logging.debug(
        f"Hypothesis scan for {kernel.describe()} at L={L:g}, k_max={k_max}: negative modes {negatives[:8]}"
    )
    return HypothesisReport(satisfied=satisfied, k0=k0, L=L, k_max=k_max, values=values)
