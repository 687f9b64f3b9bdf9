"""
Periodic grids, sampled fields and the spectral operators built on them.

Conventions:
  • nodes are x_j = -P/2 + j*h, j = 0..n-1, h = P/n
  • dft_forward is the unnormalized DFT (a constant c maps to c*n at mode 0)
  • convolution multiplies mode k by the exact continuous transform phi_hat(k/P)
"""

import functools
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from numerics.Errors import GridMismatchError, ResolutionError, SymmetryError
from numerics.NumericUtils import is_power_of_two

_BINARY_HEADER = np.dtype([("period", "<f8"), ("n", "<i8")])
TAIL_FRACTION = 7 / 16


@dataclass(frozen=True)
class Grid:
    """Uniform periodic 1-D grid. Grids compare structurally."""

    period: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise ValueError(f"grid period must be positive, got {self.period}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 8 and is_power_of_two(int(self.n))):
            raise ValueError(f"grid n must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "period", float(self.period))

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -0.5 * self.period + self.spacing * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def modes(self) -> np.ndarray:
        """Non-negative mode indices k = 0..n/2 of the real transform."""
        k = np.arange(self.n // 2 + 1)
        k.setflags(write=False)
        return k

    @cached_property
    def kappa(self) -> np.ndarray:
        """Angular wavenumbers 2 pi k / P."""
        kappa = 2.0 * math.pi * self.modes / self.period
        kappa.setflags(write=False)
        return kappa

    def index_shift(self, length: float, tol: float = 1e-9) -> int:
        """Return length/h as an integer, or raise if it is not grid-aligned."""
        ratio = length / self.spacing
        shift = int(round(ratio))
        if abs(ratio - shift) > tol * max(1.0, abs(ratio)):
            raise ResolutionError(
                f"shift {length:g} is not a multiple of h={self.spacing:g}; refine the grid so shift/h is an integer"
            )
        return shift


@dataclass(frozen=True, eq=False)
class Field:
    """Real values sampled on a Grid. Immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise GridMismatchError(f"field has shape {values.shape}, grid expects ({self.grid.n},)")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func):
        return cls(grid, func(grid.nodes))

    @classmethod
    def constant(cls, grid: Grid, value: float):
        return cls(grid, np.full(grid.n, float(value)))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min(self) -> float:
        return float(np.min(self.values))

    def max(self) -> float:
        return float(np.max(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def integral(self) -> float:
        """Trapezoid (spectrally exact) integral over one period."""
        return self.grid.spacing * float(np.sum(self.values))

    def _check(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatchError(f"cannot combine fields on {self.grid} and {other.grid}")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._check(other))

    def __rsub__(self, other):
        return Field(self.grid, self._check(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._check(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._check(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def to_bytes(self) -> bytes:
        """Raw little-endian snapshot: header (period, n) then n float64 values."""
        header = np.array([(self.grid.period, self.grid.n)], dtype=_BINARY_HEADER)
        return header.tobytes() + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes):
        header = np.frombuffer(blob, dtype=_BINARY_HEADER, count=1)[0]
        grid = Grid(float(header["period"]), int(header["n"]))
        values = np.frombuffer(blob, dtype="<f8", offset=_BINARY_HEADER.itemsize)
        if values.size != grid.n:
            raise GridMismatchError(f"snapshot payload has {values.size} values, header says {grid.n}")
        return cls(grid, values)


@dataclass(frozen=True)
class CosineCoefficients:
    """a_k = (2/L) * integral_0^L u(x) cos(2 pi k x / L) dx for k = 0..n/2"""

    a: np.ndarray

    def reconstruct(self, grid: Grid) -> Field:
        if len(self.a) != grid.n // 2 + 1:
            raise GridMismatchError(f"{len(self.a)} coefficients do not match grid n={grid.n}")
        k = grid.modes
        basis = np.cos(np.multiply.outer(grid.nodes, grid.kappa))
        weights = np.array(self.a, dtype=float)
        weights[0] *= 0.5
        values = basis @ weights
        logging.debug(f"Reconstructed even field from {len(k)} cosine coefficients")
        return Field(grid, values)


def dft_forward(field: Field) -> np.ndarray:
    return np.fft.fft(field.values)


def dft_inverse(spectrum, grid: Grid) -> Field:
    spectrum = np.asarray(spectrum)
    if spectrum.shape != (grid.n,):
        raise GridMismatchError(f"spectrum has shape {spectrum.shape}, grid expects ({grid.n},)")
    return Field(grid, np.fft.ifft(spectrum).real)


def apply_multiplier(u: Field, multiplier: np.ndarray) -> Field:
    """Multiply the real spectrum of u by a per-mode factor (length n/2 + 1)."""
    return Field(u.grid, np.fft.irfft(np.fft.rfft(u.values) * multiplier, n=u.grid.n))


@functools.lru_cache(maxsize=128)
def kernel_multiplier(kernel, grid: Grid) -> np.ndarray:
    """phi_hat(k/P) for k = 0..n/2; cached per (kernel, grid), read-only."""
    values = np.array(np.broadcast_to(kernel.fourier(grid.modes / grid.period), grid.modes.shape), dtype=float)
    values.setflags(write=False)
    return values


def convolve(kernel, u: Field) -> Field:
    """
    Full-line convolution of the kernel with the periodic extension of u.

    Atomic kernels are applied as exact index shifts and require the shift
    to be a whole number of grid cells.
    """
    if kernel.is_atomic:
        s = u.grid.index_shift(kernel.shift)
        return Field(u.grid, 0.5 * (np.roll(u.values, s) + np.roll(u.values, -s)))
    return apply_multiplier(u, kernel_multiplier(kernel, u.grid))


def second_derivative(u: Field) -> Field:
    return apply_multiplier(u, -(u.grid.kappa**2))


def multiplier_matrix(grid: Grid, multiplier: np.ndarray) -> np.ndarray:
    """Dense n x n matrix of a Fourier multiplier acting on grid values."""
    identity = np.eye(grid.n)
    return np.fft.irfft(np.fft.rfft(identity, axis=0) * multiplier[:, None], n=grid.n, axis=0)


def convolution_matrix(kernel, grid: Grid) -> np.ndarray:
    if kernel.is_atomic:
        s = grid.index_shift(kernel.shift)
        identity = np.eye(grid.n)
        return 0.5 * (np.roll(identity, s, axis=0) + np.roll(identity, -s, axis=0))
    return multiplier_matrix(grid, kernel_multiplier(kernel, grid))


def even_basis(grid: Grid) -> np.ndarray:
    """Orthonormal basis (columns) of even grid functions: normalized cos(kappa_k x), k = 0..n/2."""
    basis = np.cos(np.multiply.outer(grid.nodes, grid.kappa))
    norms = np.full(grid.n // 2 + 1, math.sqrt(grid.n / 2.0))
    norms[0] = norms[-1] = math.sqrt(grid.n)
    return basis / norms


def reflect(u: Field) -> Field:
    """u(-x) on the same nodes (index j maps to (n - j) mod n)."""
    return Field(u.grid, np.roll(u.values[::-1], 1))


def even_part(u: Field) -> Field:
    return Field(u.grid, 0.5 * (u.values + np.roll(u.values[::-1], 1)))


def asymmetry(u: Field) -> float:
    return float(np.max(np.abs(u.values - np.roll(u.values[::-1], 1))))


def cosine_coefficients(u: Field, tol: float = 1e-10) -> CosineCoefficients:
    """
    Fourier-cosine coefficients of an even field, with the (2/L) normalization.

    Under this normalization the constant 1 has a_0 = 2.
    """
    measured = asymmetry(u)
    if measured > tol * max(1.0, u.sup()):
        raise SymmetryError(measured, tol)
    spectrum = np.fft.rfft(u.values)
    signs = np.where(u.grid.modes % 2 == 0, 1.0, -1.0)  # phase of the -P/2 grid origin
    a = (2.0 / u.grid.n) * signs * spectrum.real
    a[-1] *= 0.5
    return CosineCoefficients(a=a)


def spectral_tail(u: Field) -> float:
    """Largest modulus over the top band of modes, relative to the largest overall."""
    magnitude = np.abs(np.fft.rfft(u.values))
    peak = float(np.max(magnitude))
    if peak == 0.0:
        return 0.0
    cut = int(TAIL_FRACTION * u.grid.n)
    return float(np.max(magnitude[cut:])) / peak


def assert_resolved(u: Field, threshold: float = 1e-10):
    tail = spectral_tail(u)
    if tail > threshold:
        raise ResolutionError(
            f"spectrum tail {tail:.3e} exceeds {threshold:.0e} on n={u.grid.n}, P={u.grid.period:g}; refine the grid"
        )
    return tail
