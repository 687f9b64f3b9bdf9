"""
Non-constant periodic steady states of u'' + mu u (1 - phi * u) = 0.

Newton's method with a spectral Jacobian:
    J delta = delta'' + mu delta (1 - phi * u) - mu u (phi * delta)
Linear solves are dense for n <= DENSE_LIMIT and preconditioned GMRES
otherwise (preconditioner: the Fourier-diagonal operator delta'' - mu delta).

The constant roots 0 and 1 attract Newton from small-amplitude seeds, so
when the seed is non-constant they are deflated: the iteration is run on
m(u) F(u) with m(u) = prod_r (1/||u - r||^2 + 1), which keeps every other
root and repels the iterates from r.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, gmres

from numerics.CauchySolver import default_dt, evolve
from numerics.Errors import ContinuationError, ConvergenceError, NlkppError, NumericalError, PositivityError
from numerics.Spectral import (
    Field,
    Grid,
    apply_multiplier,
    convolution_matrix,
    convolve,
    even_basis,
    even_part,
    multiplier_matrix,
    second_derivative,
)
from numerics.Stability import mu_star

NEWTON_TOL = 1e-10
MAX_NEWTON_STEPS = 50
DENSE_LIMIT = 256
SEED_AMPLITUDE = 0.05
CONSTANT_TOL = 1e-8
BOUNDS_TOL = 1e-8
DEFLATED_ROOTS = (0.0, 1.0)
STATIONARITY_T = 10.0


@dataclass(frozen=True)
class SteadyState:
    u: Field
    mu: float
    residual_norm: float
    newton_steps: int = 0
    residual_history: Tuple[float, ...] = field(default_factory=tuple)
    deflated: bool = False

    @property
    def min_u(self) -> float:
        return self.u.min()

    @property
    def max_u(self) -> float:
        return self.u.max()

    @property
    def amplitude(self) -> float:
        return self.max_u - self.min_u

    @property
    def is_constant(self) -> bool:
        return self.amplitude < CONSTANT_TOL


@dataclass(frozen=True)
class BoundsReport:
    min_u: float
    max_u: float
    x_max: float
    convolution_at_max: float
    positive: bool
    upper_ingredient_holds: bool


def residual(u: Field, mu: float, kernel) -> Field:
    """u'' + mu u (1 - phi * u), evaluated spectrally."""
    return second_derivative(u) + mu * u * (1.0 - convolve(kernel, u))


def apply_T(u: Field, mu: float, kernel) -> Field:
    """Solve -v'' + v = u + mu u (1 - phi * u) for v."""
    rhs = u + mu * u * (1.0 - convolve(kernel, u))
    return apply_multiplier(rhs, 1.0 / (u.grid.kappa**2 + 1.0))


class NewtonSolver:
    """Newton iteration for one (mu, kernel, grid)"""

    def __init__(
        self,
        mu: float,
        kernel,
        grid: Grid,
        even_restrict: bool = True,
        newton_tol: float = NEWTON_TOL,
        max_steps: int = MAX_NEWTON_STEPS,
        dense_limit: int = DENSE_LIMIT,
        max_halvings: int = 12,
    ):
        if not mu > 0.0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.mu = mu
        self.kernel = kernel
        self.grid = grid
        self.even_restrict = even_restrict
        self.newton_tol = newton_tol
        self.max_steps = max_steps
        self.dense = grid.n <= dense_limit
        self.max_halvings = max_halvings
        self._d2 = None
        self._conv = None
        self._basis = None

    def _dense_operators(self):
        if self._d2 is None:
            self._d2 = multiplier_matrix(self.grid, -(self.grid.kappa**2))
            self._conv = convolution_matrix(self.kernel, self.grid)
            self._basis = even_basis(self.grid)
        return self._d2, self._conv

    def jacobian_matrix(self, u: Field) -> np.ndarray:
        d2, conv = self._dense_operators()
        local = self.mu * (1.0 - conv @ u.values)
        return d2 + np.diag(local) - self.mu * (u.values[:, None] * conv)

    def jacobian_action(self, u: Field, phi_u: Field, delta: np.ndarray) -> np.ndarray:
        d = Field(self.grid, delta)
        out = second_derivative(d) + self.mu * d * (1.0 - phi_u) - self.mu * u * convolve(self.kernel, d)
        return np.array(out.values)

    def newton_direction(self, u: Field, F: Field) -> np.ndarray:
        """Solve J delta = -F."""
        if self.dense:
            jac = self.jacobian_matrix(u)
            if self.even_restrict:
                basis = self._basis
                coeffs = linalg.solve(basis.T @ jac @ basis, -(basis.T @ F.values))
                return basis @ coeffs
            return linalg.lstsq(jac, -F.values)[0]

        phi_u = convolve(self.kernel, u)
        n = self.grid.n
        operator = LinearOperator((n, n), matvec=lambda d: self.jacobian_action(u, phi_u, d), dtype=float)
        inverse_symbol = 1.0 / (-(self.grid.kappa**2) - self.mu)
        precond = LinearOperator(
            (n, n), matvec=lambda r: np.array(apply_multiplier(Field(self.grid, r), inverse_symbol).values), dtype=float
        )
        delta, info = gmres(operator, -F.values, M=precond, rtol=1e-12, atol=1e-14, restart=min(n, 200), maxiter=50)
        if info != 0:
            logging.warning(f"GMRES did not reach tolerance (info={info}) at mu={self.mu:g}")
        if self.even_restrict:
            delta = even_part(Field(self.grid, delta)).values
        return delta

    @staticmethod
    def deflation_factor(u: Field, delta: np.ndarray) -> float:
        """
        Scale applied to the plain Newton step so that it becomes the Newton
        step of the deflated residual m(u) F(u).
        """
        ratio = 0.0
        for root in DEFLATED_ROOTS:
            e = u.values - root
            norm2 = float(np.mean(e * e))
            m_r = 1.0 / norm2 + 1.0
            ratio += (-2.0 * float(np.mean(e * delta)) / norm2**2) / m_r
        denominator = 1.0 - ratio
        if abs(denominator) < 1e-12:
            return 1.0
        return 1.0 / denominator

    def solve(self, init: Field, deflate: bool = False) -> SteadyState:
        if init.grid != self.grid:
            raise ValueError(f"initial field lives on {init.grid}, solver on {self.grid}")
        u = even_part(init) if self.even_restrict else init
        if not u.min() > 0.0:
            raise PositivityError(f"initial guess is not positive (min {u.min():.3e})")

        history: List[float] = []
        for step in range(self.max_steps + 1):
            F = residual(u, self.mu, self.kernel)
            norm = F.sup()
            history.append(norm)
            logging.debug(f"Newton mu={self.mu:g} step {step}: |F|={norm:.3e} deflate={deflate}")
            if norm < self.newton_tol:
                return self._accept(u, norm, step, history, deflate)
            if step == self.max_steps or not math.isfinite(norm):
                break

            delta = self.newton_direction(u, F)
            if deflate:
                delta = self.deflation_factor(u, delta) * delta

            alpha = 1.0
            for _ in range(self.max_halvings):
                trial = u.values + alpha * delta
                if np.all(np.isfinite(trial)) and np.min(trial) > 0.0:
                    break
                alpha *= 0.5
            else:
                raise PositivityError(
                    f"left positive cone at mu={self.mu:g}, Newton step {step + 1} (min u {np.min(u.values + delta):.3e})"
                )
            if alpha < 1.0:
                logging.debug(f"Newton step {step + 1} damped to alpha={alpha:g} to stay positive")
            u = Field(self.grid, trial)
            if self.even_restrict:
                u = even_part(u)

        raise ConvergenceError(
            f"Newton did not converge within {self.max_steps} steps at mu={self.mu:g} (last |F|={history[-1]:.3e})",
            residual_history=history,
        )

    def _accept(self, u: Field, norm: float, steps: int, history, deflated: bool) -> SteadyState:
        if u.max() < CONSTANT_TOL:
            raise PositivityError(f"Newton converged to the zero state at mu={self.mu:g}")
        if not u.min() > 0.0:
            raise PositivityError(f"converged state is not positive (min {u.min():.3e})")
        state = SteadyState(
            u=u, mu=self.mu, residual_norm=norm, newton_steps=steps, residual_history=tuple(history), deflated=deflated
        )
        logging.debug(
            f"Accepted steady state mu={self.mu:g}: |F|={norm:.2e}, steps={steps}, "
            f"min={state.min_u:.6g}, max={state.max_u:.6g}, constant={state.is_constant}"
        )
        return state


def find_steady(
    mu: float,
    kernel,
    L: float,
    init: Field,
    even_restrict: bool = True,
    deflate: Optional[bool] = None,
    **options,
) -> SteadyState:
    """
    Newton solve of the steady equation from `init`.

    deflate=None deflates the constant roots whenever the seed is
    non-constant and falls back to plain Newton if the deflated iteration
    fails; True/False force one mode.
    """
    if not math.isclose(init.grid.period, L, rel_tol=1e-12):
        raise ValueError(f"initial field has period {init.grid.period:g}, expected L={L:g}")
    solver = NewtonSolver(mu, kernel, init.grid, even_restrict=even_restrict, **options)
    seed_varies = init.max() - init.min() >= CONSTANT_TOL
    if deflate is None:
        if not seed_varies:
            return solver.solve(init, deflate=False)
        try:
            return solver.solve(init, deflate=True)
        except NumericalError as e:
            logging.info(f"Deflated Newton failed at mu={mu:g} ({e}); retrying without deflation")
            return solver.solve(init, deflate=False)
    return solver.solve(init, deflate=deflate)


def seed_profile(grid: Grid, k0: int, amplitude: float = SEED_AMPLITUDE) -> Field:
    return Field.from_function(grid, lambda x: 1.0 + amplitude * np.cos(2.0 * math.pi * k0 * x / grid.period))


def continuation(
    kernel,
    L: float,
    k0: int,
    mu_from: float,
    mu_to: float,
    steps: int,
    n: int = 128,
    seed_amplitude: float = SEED_AMPLITUDE,
    **options,
) -> List[SteadyState]:
    """
    March mu over [mu_from, mu_to] warm-starting each Newton solve from the
    previous state. The first solve is seeded with 1 + eps0 cos(2 pi k0 x / L).
    """
    if steps < 2:
        raise ValueError(f"continuation needs at least 2 steps, got {steps}")
    threshold = mu_star(kernel, L, k0)
    if not mu_from > threshold:
        raise ValueError(f"mu_from={mu_from:g} must exceed mu*={threshold:g}")

    grid = Grid(L, n)
    u = seed_profile(grid, k0, seed_amplitude)
    branch: List[SteadyState] = []
    for mu in np.linspace(mu_from, mu_to, steps):
        try:
            state = find_steady(float(mu), kernel, L, u, **options)
        except NlkppError as e:
            raise ContinuationError(float(mu), e) from e
        branch.append(state)
        u = state.u
        logging.info(f"Branch point mu={mu:.8g}: amplitude {state.amplitude:.6g}, |F|={state.residual_norm:.2e}")
    return branch


def verify_bounds(state: SteadyState, kernel, tol: float = BOUNDS_TOL) -> BoundsReport:
    """
    Report (min u, max u) and check (phi * u)(x_max) <= 1 at the maximum of u,
    which holds at any interior maximum of a steady state since u'' <= 0 there.
    """
    j = int(np.argmax(state.u.values))
    conv_at_max = float(convolve(kernel, state.u).values[j])
    report = BoundsReport(
        min_u=state.min_u,
        max_u=state.max_u,
        x_max=float(state.u.x[j]),
        convolution_at_max=conv_at_max,
        positive=state.min_u > 0.0,
        upper_ingredient_holds=conv_at_max <= 1.0 + tol,
    )
    if not report.upper_ingredient_holds:
        logging.warning(f"(phi*u)(x_max) = {conv_at_max:.12g} exceeds 1 at mu={state.mu:g}")
    return report


@dataclass(frozen=True)
class StationarityReport:
    times: Tuple[float, ...]
    deviations: Tuple[float, ...]
    dt: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviations)

    def rows(self):
        return list(zip(self.times, self.deviations))


def check_stationarity(
    state: SteadyState, kernel, T: float = STATIONARITY_T, dt: Optional[float] = None, samples: int = 100
) -> StationarityReport:
    """
    Integrate the Cauchy problem from an accepted state with the ETDRK4
    scheme and record sup |u(t) - u*| at about `samples` times in [0, T].

    ETDRK4 maps a zero-residual state to itself for any dt, so the deviation
    reflects the Newton residual and the dynamics around u*.
    """
    if dt is None:
        dt = default_dt(state.mu, kernel, state.u, T)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    trajectory = evolve(state.u, state.mu, kernel, T, dt=dt, record_every=max(1, n_steps // samples), scheme="etdrk4")
    deviations = tuple(float(np.max(np.abs(s.u.values - state.u.values))) for s in trajectory)
    report = StationarityReport(times=tuple(s.t for s in trajectory), deviations=deviations, dt=T / n_steps)
    logging.info(f"Stationarity over [0, {T:g}] at mu={state.mu:g}: max drift {report.max_deviation:.3e}")
    return report
