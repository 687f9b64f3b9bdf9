"""
Time integration of u_t = u_xx + mu u (1 - phi * u) on a periodic grid.

Diffusion is integrated exactly in Fourier space (mode k is multiplied by
exp(-kappa_k^2 dt)); the reaction term is explicit. Two schemes:
  • "imex1":  u <- H_dt (u + dt R(u))
  • "strang": u <- H_dt/2 Heun_dt H_dt/2 u
  • "etdrk4": fourth-order exponential time differencing (Cox-Matthews),
    with the phi-function weights computed by contour averages. A state
    with zero residual is mapped to itself for any dt.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from numerics.Errors import BlowUpSignal, CertificateError, PositivityError
from numerics.NumericUtils import MOLLIFIER_CELLS, fit_log_rate, next_power_of_two, smoothed_indicator
from numerics.Spectral import Field, Grid, apply_multiplier, assert_resolved, convolve

REACTION_SAFETY = 0.5
MIN_STEPS = 4096
NEGATIVITY_TOL = 1e-12
CERTIFICATE_RTOL = 1e-6
# relative to sup |u|; round-off below it would grow at rate mu ahead of a front
NOISE_FLOOR = 1e-13
ETD_ROOTS = 32
SCHEMES = ("imex1", "strang", "etdrk4")


@dataclass(frozen=True)
class SimState:
    t: float
    u: Field
    mu: float
    kernel: object


@dataclass(frozen=True)
class BoundCertificate:
    sigma: float
    eta: float
    M_theoretical: float
    sup_v_observed: float
    sup_u_observed: float
    t_of_sup_v: float
    holds: bool
    local_bounds_hold: bool


@dataclass(frozen=True)
class CounterexampleReport:
    mu: float
    L: float
    rho: float
    rate_fitted: float
    rate_stderr: float
    rate_theory: float
    t_end: float
    sup_u_max: float
    t_u_exceeds: Optional[float]
    stopped_on_overflow: bool
    times: Tuple[float, ...] = field(repr=False, default=())
    sup_w: Tuple[float, ...] = field(repr=False, default=())
    sup_u: Tuple[float, ...] = field(repr=False, default=())

    @property
    def blew_up(self) -> bool:
        return self.t_u_exceeds is not None

    @property
    def relative_rate_error(self) -> float:
        if self.rate_theory == 0.0:
            return abs(self.rate_fitted)
        return abs(self.rate_fitted - self.rate_theory) / abs(self.rate_theory)


@functools.lru_cache(maxsize=32)
def heat_multiplier(grid: Grid, dt: float) -> np.ndarray:
    multiplier = np.exp(-(grid.kappa**2) * dt)
    multiplier.setflags(write=False)
    return multiplier


def _diffuse(values: np.ndarray, grid: Grid, dt: float) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(values) * heat_multiplier(grid, dt), n=grid.n)


@functools.lru_cache(maxsize=32)
def etd_coefficients(grid: Grid, dt: float) -> Tuple[np.ndarray, ...]:
    """
    ETDRK4 weights (f0, f1, f2, f3) for the diffusion symbol -kappa^2.

    Each phi-function is averaged over ETD_ROOTS points on the upper unit
    half-circle centred at dt * symbol, which avoids the cancellation of the
    direct formulas for small |dt * symbol|.
    """
    symbol = -(grid.kappa**2)
    roots = np.exp(1j * math.pi * (np.arange(ETD_ROOTS) + 0.5) / ETD_ROOTS)
    lr = dt * symbol[:, None] + roots[None, :]
    exp_lr = np.exp(lr)
    f0 = dt * ((np.exp(lr / 2.0) - 1.0) / lr).mean(axis=1).real
    f1 = dt * ((-4.0 - lr + exp_lr * (4.0 - 3.0 * lr + lr**2)) / lr**3).mean(axis=1).real
    f2 = dt * ((2.0 + lr + exp_lr * (lr - 2.0)) / lr**3).mean(axis=1).real
    f3 = dt * ((-4.0 - 3.0 * lr - lr**2 + exp_lr * (4.0 - lr)) / lr**3).mean(axis=1).real
    for weights in (f0, f1, f2, f3):
        weights.setflags(write=False)
    return f0, f1, f2, f3


def _etdrk4(values: np.ndarray, grid: Grid, dt: float, mu: float, kernel) -> np.ndarray:
    f0, f1, f2, f3 = etd_coefficients(grid, dt)
    half, full = heat_multiplier(grid, 0.5 * dt), heat_multiplier(grid, dt)

    def nonlinear(spectrum):
        return np.fft.rfft(reaction(np.fft.irfft(spectrum, n=grid.n), grid, mu, kernel))

    v = np.fft.rfft(values)
    n_v = nonlinear(v)
    a = half * v + f0 * n_v
    n_a = nonlinear(a)
    b = half * v + f0 * n_a
    n_b = nonlinear(b)
    c = half * a + f0 * (2.0 * n_b - n_v)
    n_c = nonlinear(c)
    return np.fft.irfft(full * v + f1 * n_v + 2.0 * f2 * (n_a + n_b) + f3 * n_c, n=grid.n)


def reaction(values: np.ndarray, grid: Grid, mu: float, kernel) -> np.ndarray:
    conv = convolve(kernel, Field(grid, values)).values
    return mu * values * (1.0 - conv)


def step(
    state: SimState,
    dt: float,
    scheme: str = "imex1",
    check_resolution: bool = True,
    noise_floor: float = NOISE_FLOOR,
    negativity_tol: Optional[float] = NEGATIVITY_TOL,
) -> SimState:
    """
    Advance one step; raises BlowUpSignal if the result is not finite and
    PositivityError if it dips below -negativity_tol.

    Values with |u| < noise_floor * max |u| are set to zero after the
    positivity check.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid, mu, kernel = state.u.grid, state.mu, state.kernel
    if check_resolution:
        assert_resolved(state.u)

    u = state.u.values
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            if scheme == "imex1":
                new = _diffuse(u + dt * reaction(u, grid, mu, kernel), grid, dt)
            elif scheme == "strang":
                a = _diffuse(u, grid, 0.5 * dt)
                k1 = reaction(a, grid, mu, kernel)
                k2 = reaction(a + dt * k1, grid, mu, kernel)
                new = _diffuse(a + 0.5 * dt * (k1 + k2), grid, 0.5 * dt)
            elif scheme == "etdrk4":
                new = _etdrk4(u, grid, dt, mu, kernel)
            else:
                raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        except ValueError as e:
            if "finite" not in str(e):
                raise
            new = np.array([np.nan])

    if not np.all(np.isfinite(new)):
        raise BlowUpSignal(state.t + dt, state.u.sup())
    low = float(np.min(new))
    if negativity_tol is not None and low < -negativity_tol:
        raise PositivityError(f"u became negative at t={state.t + dt:.6g} (min {low:.3e}); reduce dt")
    if noise_floor > 0.0:
        new[np.abs(new) < noise_floor * np.max(np.abs(new))] = 0.0
    return SimState(t=state.t + dt, u=Field(grid, new), mu=mu, kernel=kernel)


def reaction_dt_bound(mu: float, kernel, u: Field) -> float:
    """dt <= 0.5 / (mu (1 + |phi * u|_inf)) keeps the explicit reaction positive."""
    return REACTION_SAFETY / (mu * (1.0 + convolve(kernel, u).sup()))


def default_dt(mu: float, kernel, u0: Field, T: float) -> float:
    return min(reaction_dt_bound(mu, kernel, u0), T / MIN_STEPS)


def evolve(
    u0: Field,
    mu: float,
    kernel,
    T: float,
    dt: Optional[float] = None,
    record_every: int = 1,
    scheme: str = "imex1",
    blowup_threshold: Optional[float] = None,
) -> List[SimState]:
    """
    Fixed-step integration to T, recording every `record_every` steps and at T.

    dt is shrunk, if needed, so that a whole number of steps lands on T.
    """
    if not T > 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if dt is None:
        dt = default_dt(mu, kernel, u0, T)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    logging.info(f"Evolving to T={T:g} with dt={dt:.6g} ({n_steps} steps, scheme {scheme}) on {u0.grid}")

    state = SimState(t=0.0, u=u0, mu=mu, kernel=kernel)
    trajectory = [state]
    warned = False
    for i in range(1, n_steps + 1):
        state = step(state, dt, scheme=scheme)
        state = SimState(t=i * dt, u=state.u, mu=mu, kernel=kernel)
        if blowup_threshold is not None and state.u.sup() > blowup_threshold:
            raise BlowUpSignal(state.t, state.u.sup())
        if i % record_every == 0 or i == n_steps:
            trajectory.append(state)
            if not warned and dt > reaction_dt_bound(mu, kernel, state.u):
                logging.warning(f"dt={dt:.3g} exceeds the reaction bound at t={state.t:.4g}")
                warned = True
            logging.debug(f"t={state.t:.6g}: sup u={state.u.sup():.6g}, min u={state.u.min():.3e}")
    return trajectory


def local_average(u: Field, sigma: float) -> Field:
    """
    v(x) = integral of u over (x - sigma/2, x + sigma/2): an integral, not a
    mean, so |v|_inf <= sigma |u|_inf.
    """
    if not 0.0 < sigma < 0.5 * u.grid.period:
        raise ValueError(f"sigma must lie in (0, P/2) = (0, {0.5 * u.grid.period:g}), got {sigma}")
    return apply_multiplier(u, sigma * np.sinc(sigma * u.grid.modes / u.grid.period))


def local_bound(t: float, mu: float, u0_sup: float) -> float:
    """Local-in-time bound u(t, .) <= exp(mu t) |u0|_inf from comparison with v_t = v_xx + mu v."""
    exponent = mu * t
    if exponent > 700.0:
        return math.inf
    return math.exp(exponent) * u0_sup


def bound_certificate(trajectory: List[SimState]) -> BoundCertificate:
    """
    Check |v(t, .)|_inf <= max(sigma |u0|_inf, 1/eta) on every recorded time,
    with (sigma, eta) the kernel's window pair.
    """
    first = trajectory[0]
    kernel = first.kernel
    if kernel.is_atomic:
        raise CertificateError(f"certificate inapplicable: {kernel.family} violates the window hypothesis")
    sigma, eta = kernel.window_bound()
    u0_sup = first.u.sup()
    M = max(sigma * u0_sup, 1.0 / eta)

    sup_v, t_sup_v, sup_u = 0.0, first.t, 0.0
    local_ok = True
    for state in trajectory:
        v_sup = local_average(state.u, sigma).sup()
        if v_sup > sup_v:
            sup_v, t_sup_v = v_sup, state.t
        sup_u = max(sup_u, state.u.sup())
        if state.u.sup() > local_bound(state.t, state.mu, u0_sup) * (1.0 + CERTIFICATE_RTOL) + NEGATIVITY_TOL:
            local_ok = False

    certificate = BoundCertificate(
        sigma=sigma,
        eta=eta,
        M_theoretical=M,
        sup_v_observed=sup_v,
        sup_u_observed=sup_u,
        t_of_sup_v=t_sup_v,
        holds=sup_v <= M * (1.0 + CERTIFICATE_RTOL),
        local_bounds_hold=local_ok,
    )
    if not certificate.holds:
        logging.error(
            f"Boundedness certificate FAILED: sup v = {sup_v:.10g} > M = {M:.10g} at t={t_sup_v:.4g} "
            "(under-resolution or a genuine violation)"
        )
    else:
        logging.info(f"Boundedness certificate holds: sup v = {sup_v:.6g} <= M = {M:.6g}")
    return certificate


def bump_field(grid: Grid, center: float, width: float, height: float) -> Field:
    """height * indicator of [center - width/2, center + width/2], mollified at a few grid cells."""
    return Field(grid, smoothed_indicator(grid.nodes, center, 0.5 * width, height, MOLLIFIER_CELLS * grid.spacing))


def bump_support_radius(grid: Grid, center: float, width: float) -> float:
    """Radius about 0 outside which the mollified bump is negligible (10 mollifier widths)."""
    return abs(center) + 0.5 * width + 10.0 * MOLLIFIER_CELLS * grid.spacing


def spreading_period(mu: float, T: float, support: float) -> float:
    """Power-of-two period at least 4 (2 sqrt(mu) T + support) wide."""
    return float(next_power_of_two(4.0 * (2.0 * math.sqrt(mu) * T + support)))


def dirac_counterexample(
    mu: float,
    L: float,
    rho: float,
    T: float,
    grid: Grid,
    dt: float = 1e-3,
    overflow: float = 1e10,
    blowup_level: float = 1e3,
    fit_start: Optional[float] = None,
) -> CounterexampleReport:
    """
    Evolve the coupled local system equivalent to the Dirac-pair kernel,
        u_t = u_xx + mu u (1 - v),  v_t = v_xx + mu v (1 - u),  v(0, x) = u0(x + L),
    from u0 = 1 + rho cos(pi x / L), and fit the growth rate of w = u - v.

    Diffusion is exact; the reaction substep is the exact solution of the
    frozen-coefficient ODEs (u <- u exp(mu (1 - v) dt)), which stays positive
    however large the fields become.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if not math.isclose(grid.period, 2.0 * L, rel_tol=1e-12):
        raise ValueError(f"grid period must be 2L = {2.0 * L:g}, got {grid.period:g}")
    shift = grid.index_shift(L)

    u = 1.0 + rho * np.cos(math.pi * grid.nodes / L)
    v = np.roll(u, -shift)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps

    times, sup_w, sup_u = [0.0], [float(np.max(np.abs(u - v)))], [float(np.max(np.abs(u)))]
    t_exceeds = None
    stopped = False
    for i in range(1, n_steps + 1):
        u_d = _diffuse(u, grid, dt)
        v_d = _diffuse(v, grid, dt)
        with np.errstate(over="ignore", under="ignore"):
            u = u_d * np.exp(mu * (1.0 - v_d) * dt)
            v = v_d * np.exp(mu * (1.0 - u_d) * dt)
        t = i * dt
        w_sup = float(np.max(np.abs(u - v)))
        u_sup = float(np.max(np.abs(u)))
        if not (math.isfinite(w_sup) and math.isfinite(u_sup)):
            stopped = True
            break
        times.append(t)
        sup_w.append(w_sup)
        sup_u.append(u_sup)
        if t_exceeds is None and u_sup > blowup_level:
            t_exceeds = t
            logging.info(f"sup u exceeded {blowup_level:g} at t={t:.4g}")
        if w_sup > overflow:
            stopped = True
            break

    times_arr = np.array(times)
    start = min(1.0, 0.25 * times_arr[-1]) if fit_start is None else fit_start
    window = times_arr >= start
    rate, stderr = fit_log_rate(times_arr[window], np.array(sup_w)[window])
    report = CounterexampleReport(
        mu=mu,
        L=L,
        rho=rho,
        rate_fitted=rate,
        rate_stderr=stderr,
        rate_theory=mu - math.pi**2 / L**2,
        t_end=float(times_arr[-1]),
        sup_u_max=float(max(sup_u)),
        t_u_exceeds=t_exceeds,
        stopped_on_overflow=stopped,
        times=tuple(times),
        sup_w=tuple(sup_w),
        sup_u=tuple(sup_u),
    )
    logging.info(
        f"Dirac-pair run: fitted rate {rate:.6g} +/- {stderr:.2g} vs theory {report.rate_theory:.6g}, "
        f"t_end={report.t_end:.4g}, sup u={report.sup_u_max:.4g}"
    )
    return report


def logistic_solution(c: float, mu: float, t):
    """Closed form of u' = mu u (1 - u), u(0) = c."""
    growth = np.exp(mu * np.asarray(t, dtype=float))
    return c * growth / (1.0 - c + c * growth)


def trajectory_summary(trajectory: List[SimState], sigma: Optional[float] = None):
    """Rows (t, sup_u, sup_v, min_u, mass); sup_v is NaN when no window is available."""
    if sigma is None and not trajectory[0].kernel.is_atomic:
        sigma = trajectory[0].kernel.window_bound()[0]
    rows = []
    for state in trajectory:
        sup_v = local_average(state.u, sigma).sup() if sigma is not None else math.nan
        rows.append((state.t, state.u.sup(), sup_v, state.u.min(), state.u.integral()))
    return rows
