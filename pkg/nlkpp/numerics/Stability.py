"""
Spectrum of the linearization about the constant state u = 1.

For mode k on period L, with A_k = 4 pi^2 k^2 / L^2:
  • the fixed-point operator has eigenvalue lambda_k = (1 - mu phi_hat(k/L)) / (A_k + 1)
  • the linearized PDE has growth rate       s_k = -A_k - mu phi_hat(k/L)
so lambda_k - 1 = s_k / (A_k + 1) and the two stability notions agree.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from numerics.Errors import StabilityError
from numerics.Spectral import Field, Grid, convolution_matrix, even_basis

EIG_TOL = 1e-12


def _laplacian_symbol(k, L: float):
    k = np.asarray(k, dtype=float)
    return 4.0 * math.pi**2 * k**2 / L**2


def dt_eigenvalue(mu: float, k, L: float, kernel):
    """Eigenvalue of DT_mu(1) on cos(2 pi k x / L); vectorized over k."""
    k = np.asarray(k)
    result = (1.0 - mu * kernel.fourier(k / L)) / (_laplacian_symbol(k, L) + 1.0)
    return float(result) if np.ndim(result) == 0 else result


def pde_growth_rate(mu: float, k, L: float, kernel):
    """Exponential rate of mode k under w_t = w_xx - mu * phi * w."""
    k = np.asarray(k)
    result = -_laplacian_symbol(k, L) - mu * kernel.fourier(k / L)
    return float(result) if np.ndim(result) == 0 else result


def mu_star(kernel, L: float, k0: int) -> float:
    """
    Threshold above which lambda_{k0} > 1: mu* = (4 pi^2 k0^2 / L^2) / |phi_hat(k0/L)|.
    """
    q = float(kernel.fourier(k0 / L))
    if q >= 0.0:
        raise StabilityError(f"mode not destabilizable: phi_hat({k0}/{L:g}) = {q:.6g} >= 0")
    return float(_laplacian_symbol(k0, L)) / abs(q)


def lambda_mu(mu: float, kernel, L: float, k0: int) -> float:
    mu_star(kernel, L, k0)
    return dt_eigenvalue(mu, k0, L, kernel)


def sufficient_stability_bound(L: float) -> float:
    """Sufficient (not sharp) stability bound: below it every |lambda_k| < 1."""
    return min(4.0 * math.pi**2 / L**2, 0.5)


def sharp_stability_threshold(kernel, L: float, k_max: int) -> Tuple[float, Optional[int]]:
    """
    Smallest mu at which some mode k <= k_max becomes unstable, and that mode.

    Returns (inf, None) when phi_hat(k/L) >= 0 for every scanned k.
    """
    ks = np.arange(1, k_max + 1)
    q = np.asarray(kernel.fourier(ks / L), dtype=float)
    negative = q < 0.0
    if not np.any(negative):
        return math.inf, None
    thresholds = _laplacian_symbol(ks[negative], L) / np.abs(q[negative])
    j = int(np.argmin(thresholds))
    return float(thresholds[j]), int(ks[negative][j])


@dataclass(frozen=True)
class ModeSpectrum:
    L: float
    mu: float
    lambdas: Tuple[float, ...]
    rates: Tuple[float, ...]

    @property
    def unstable_modes(self) -> List[int]:
        return [k for k, lam in enumerate(self.lambdas) if lam > 1.0 + EIG_TOL]

    @property
    def k_max(self) -> int:
        return len(self.lambdas) - 1


def mode_spectrum(mu: float, L: float, kernel, k_max: int) -> ModeSpectrum:
    ks = np.arange(k_max + 1)
    lambdas = dt_eigenvalue(mu, ks, L, kernel)
    rates = pde_growth_rate(mu, ks, L, kernel)
    spectrum = ModeSpectrum(L=L, mu=mu, lambdas=tuple(map(float, lambdas)), rates=tuple(map(float, rates)))
    logging.debug(f"Mode spectrum mu={mu:g}, L={L:g}: unstable modes {spectrum.unstable_modes}")
    return spectrum


def dt_matrix(mu: float, grid: Grid, kernel) -> np.ndarray:
    """
    Dense matrix of w = DT_mu(1)(u), i.e. the solution of -w'' + w = u - mu phi * u.
    """
    helmholtz = 1.0 / (grid.kappa**2 + 1.0)
    rhs = np.eye(grid.n) - mu * convolution_matrix(kernel, grid)
    return np.fft.irfft(np.fft.rfft(rhs, axis=0) * helmholtz[:, None], n=grid.n, axis=0)


def numeric_dt_modes(mu: float, grid: Grid, kernel, full: bool = False):
    """
    Eigenpairs of DT_mu(1), sorted by descending eigenvalue.

    By default the operator is restricted to even grid functions (cosine
    basis); full=True returns the whole periodic spectrum, where every k >= 1
    except the Nyquist mode appears twice (cosine and sine).
    """
    matrix = dt_matrix(mu, grid, kernel)
    if full:
        basis = np.eye(grid.n)
    else:
        basis = even_basis(grid)
    reduced = basis.T @ matrix @ basis
    reduced = 0.5 * (reduced + reduced.T)
    eigenvalues, eigenvectors = linalg.eigh(reduced)
    order = np.argsort(eigenvalues)[::-1]
    vectors = [Field(grid, basis @ eigenvectors[:, j]) for j in order]
    return eigenvalues[order], vectors


def numeric_dt_spectrum(mu: float, grid: Grid, kernel, full: bool = False) -> np.ndarray:
    eigenvalues, _ = numeric_dt_modes(mu, grid, kernel, full=full)
    return eigenvalues


def stability_table(kernel, L: float, mus, k_max: int):
    """Rows (mu, k, lambda_k, s_k, unstable) for every mu and k = 0..k_max."""
    rows = []
    for mu in mus:
        spectrum = mode_spectrum(float(mu), L, kernel, k_max)
        unstable = set(spectrum.unstable_modes)
        for k in range(k_max + 1):
            rows.append((float(mu), k, spectrum.lambdas[k], spectrum.rates[k], int(k in unstable)))
    return rows
