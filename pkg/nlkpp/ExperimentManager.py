"""
Runs one validated experiment config: builds the kernel and the grid, calls
the numerics for the experiment kind and hands every table to the
OutputManager.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np

from ConfigManager import ExperimentConfig
from kernels import check_hypothesis
from numerics.CauchySolver import bound_certificate, dirac_counterexample, evolve, trajectory_summary
from numerics.Errors import CertificateError, StabilityError
from numerics.Spectral import Grid
from numerics.Spreading import SpreadConfig, speed_rows, spreading_experiment
from numerics.Stability import (
    dt_eigenvalue,
    mu_star,
    numeric_dt_spectrum,
    sharp_stability_threshold,
    stability_table,
    sufficient_stability_bound,
)
from numerics.SteadyState import check_stationarity, continuation, find_steady, seed_profile, verify_bounds
from OutputManager import OutputManager, markdown_table

KERNEL_SAMPLE_POINTS = 401


def kernel_samples(kernel, points: int = KERNEL_SAMPLE_POINTS):
    """Rows (x, phi, xi, phi_hat) on x in [-5, 5] and xi in [0, 5]; phi is blank for atomic kernels."""
    x = np.linspace(-5.0, 5.0, points)
    xi = np.linspace(0.0, 5.0, points)
    phi = [None] * points if kernel.is_atomic else kernel.density(x)
    return list(zip(x, phi, xi, np.broadcast_to(kernel.fourier(xi), xi.shape)))


@dataclass
class ExperimentResult:
    kind: str
    mu: Optional[float]
    summary: Dict[str, Any] = field(default_factory=dict)
    blow_up: bool = False
    output_dir: str = ""


class ExperimentManager:
    """Dispatches a config to the handler of its experiment kind"""

    def __init__(self, app=None):
        self.app = app
        self.handlers = {
            "kernel-report": self.run_kernel_report,
            "stability": self.run_stability,
            "steady": self.run_steady,
            "evolve": self.run_evolve,
            "spread": self.run_spread,
            "counterexample": self.run_counterexample,
        }

    def run(self, config: ExperimentConfig, output_dir: Optional[str] = None, mu: Optional[float] = None):
        """
        Run one experiment point and write its report and manifest.

        `mu` replaces the config's mu (sweeps pass one value per point).
        """
        kind = config.base_kind
        output = OutputManager(output_dir or config.output_dir)
        mu = config.mu if mu is None else mu
        logging.info(f"Running '{config.name}' ({kind}) mu={mu} into {output.output_dir}")
        result = self.handlers[kind](config, mu, output)
        result.output_dir = output.output_dir
        output.write_report(f"{config.name}: {kind}")
        output.write_manifest()
        return result

    def run_kernel_report(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        kernel = config.kernel.to_kernel()
        xi = np.linspace(0.0, 5.0, 201)
        output.write_csv("kernel_transform.csv", ("xi", "phi_hat"), zip(xi, np.broadcast_to(kernel.fourier(xi), xi.shape)))
        summary: Dict[str, Any] = {"family": kernel.family}
        summary.update(kernel.parameters())
        if not kernel.is_atomic:
            x = np.linspace(-5.0, 5.0, 401)
            output.write_csv("kernel_density.csv", ("x", "phi"), zip(x, kernel.density(x)))
            summary["sigma"], summary["eta"] = kernel.window_bound()
        else:
            summary["sigma"] = summary["eta"] = math.nan

        L = _period_of(config)
        if L is not None:
            block = config.stability or config.steady
            report = check_hypothesis(kernel, L, block.k_max)
            summary.update({"L": L, "hypothesis": report.satisfied, "k0": report.k0 if report.k0 is not None else ""})
            output.write_csv(
                "kernel_modes.csv", ("k", "phi_hat_k_over_L"), ((k, v) for k, v in enumerate(report.values))
            )
        output.write_csv("kernel_summary.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Kernel", markdown_table(tuple(summary), [tuple(summary.values())]))
        return ExperimentResult(kind="kernel-report", mu=mu, summary=summary)

    def run_stability(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        block = config.stability
        kernel = config.kernel.to_kernel()
        L = block.L
        report = check_hypothesis(kernel, L, block.k_max)
        sharp, sharp_k = sharp_stability_threshold(kernel, L, block.k_max)
        threshold = mu_star(kernel, L, report.k0) if report.k0 is not None else math.nan
        summary: Dict[str, Any] = {
            "L": L,
            "hypothesis": report.satisfied,
            "k0": report.k0 if report.k0 is not None else "",
            "mu_star": threshold,
            "sufficient_bound": sufficient_stability_bound(L),
            "sharp_threshold": sharp,
            "sharp_mode": sharp_k if sharp_k is not None else "",
        }

        mus = [mu] if mu is not None else config.mu_values()
        if mus:
            rows = stability_table(kernel, L, mus, block.k_max)
            output.write_csv("stability_table.csv", ("mu", "k", "lambda", "growth_rate", "unstable"), rows)
            summary["unstable_modes"] = sum(row[4] for row in rows)
        if block.numeric_n is not None and mus:
            grid = Grid(L, block.numeric_n)
            check_rows = []
            for value in mus:
                numeric = numeric_dt_spectrum(value, grid, kernel)
                formula = np.sort(dt_eigenvalue(value, np.arange(grid.n // 2 + 1), L, kernel))[::-1]
                check_rows.append((value, float(np.max(np.abs(numeric - formula)))))
            output.write_csv("stability_numeric_check.csv", ("mu", "max_abs_difference"), check_rows)
            summary["numeric_max_difference"] = max(row[1] for row in check_rows)

        output.write_csv("stability_summary.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Stability", markdown_table(tuple(summary), [tuple(summary.values())]))
        return ExperimentResult(kind="stability", mu=mu, summary=summary)

    def run_steady(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        block = config.steady
        kernel = config.kernel.to_kernel()
        k0 = block.k0
        if k0 is None:
            k0 = check_hypothesis(kernel, block.L, block.k_max).k0
            if k0 is None:
                raise StabilityError(f"no single destabilizable mode for {kernel.describe()} at L={block.L:g}; set steady.k0")
        threshold = mu_star(kernel, block.L, k0)
        mu = block.mu_factor * threshold if mu is None else mu

        grid = Grid(block.L, block.n)
        seed = seed_profile(grid, k0, block.seed_amplitude)
        state = find_steady(mu, kernel, block.L, seed, deflate=block.deflate)
        bounds = verify_bounds(state, kernel)
        output.write_field_csv("steady_profile.csv", state.u)
        output.write_field("steady_profile.bin", state.u)
        output.write_csv("steady_newton.csv", ("step", "residual"), enumerate(state.residual_history))

        summary: Dict[str, Any] = {
            "mu": mu,
            "mu_star": threshold,
            "k0": k0,
            "residual": state.residual_norm,
            "newton_steps": state.newton_steps,
            "deflated": state.deflated,
            "min_u": state.min_u,
            "max_u": state.max_u,
            "is_constant": state.is_constant,
            "convolution_at_max": bounds.convolution_at_max,
            "upper_ingredient_holds": bounds.upper_ingredient_holds,
        }
        if block.stationarity_T is not None:
            stationarity = check_stationarity(state, kernel, block.stationarity_T, dt=block.stationarity_dt)
            output.write_csv("steady_stationarity.csv", ("t", "deviation"), stationarity.rows())
            summary["stationarity_drift"] = stationarity.max_deviation
        if block.continuation_to is not None:
            branch = continuation(
                kernel,
                block.L,
                k0,
                mu,
                block.continuation_to,
                block.continuation_steps,
                n=block.n,
                seed_amplitude=block.seed_amplitude,
            )
            output.write_csv(
                "steady_branch.csv",
                ("mu", "min_u", "max_u", "amplitude", "residual", "newton_steps"),
                ((s.mu, s.min_u, s.max_u, s.amplitude, s.residual_norm, s.newton_steps) for s in branch),
            )
        output.write_csv("steady_summary.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Steady state", markdown_table(tuple(summary), [tuple(summary.values())]))
        return ExperimentResult(kind="steady", mu=mu, summary=summary)

    def run_evolve(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        kernel = config.kernel.to_kernel()
        grid = config.grid.to_grid()
        u0 = config.initial.to_field(grid)
        spec = config.integration
        trajectory = evolve(u0, mu, kernel, spec.T, dt=spec.dt, record_every=spec.record_every, scheme=spec.scheme)
        output.write_csv(
            "evolve_summary.csv", ("t", "sup_u", "sup_v", "min_u", "mass"), trajectory_summary(trajectory)
        )
        output.write_field("evolve_final.bin", trajectory[-1].u)

        summary: Dict[str, Any] = {
            "mu": mu,
            "T": spec.T,
            "sup_u_final": trajectory[-1].u.sup(),
            "min_u_observed": min(s.u.min() for s in trajectory),
        }
        try:
            certificate = bound_certificate(trajectory)
        except CertificateError as e:
            logging.info(f"No certificate for this run: {e}")
        else:
            summary.update(
                {
                    "sigma": certificate.sigma,
                    "eta": certificate.eta,
                    "M_theoretical": certificate.M_theoretical,
                    "sup_v_observed": certificate.sup_v_observed,
                    "sup_u_observed": certificate.sup_u_observed,
                    "certificate_holds": certificate.holds,
                    "local_bounds_hold": certificate.local_bounds_hold,
                }
            )
        output.write_csv("evolve_certificate.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Cauchy problem", markdown_table(tuple(summary), [tuple(summary.values())]))
        return ExperimentResult(kind="evolve", mu=mu, summary=summary)

    def run_spread(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        kernel = config.kernel.to_kernel()
        block = config.spread
        settings = SpreadConfig(
            T=block.T,
            levels=tuple(block.levels),
            max_spacing=block.max_spacing,
            bump_width=block.bump_width,
            bump_height=block.bump_height,
            record_interval=block.record_interval,
            t_min=block.t_min,
            dt=block.dt,
            scheme=block.scheme,
        )
        if config.grid is not None:
            settings = replace(settings, period=config.grid.period, n=config.grid.n)
        report = spreading_experiment(mu, kernel, settings)

        levels = list(report.traces)
        header = ["t"] + [f"{side}_{level:g}" for level in levels for side in ("left", "right")]
        times = report.traces[levels[0]].times
        rows = []
        for i, t in enumerate(times):
            row = [t]
            for level in levels:
                trace = report.traces[level]
                row += [trace.left_positions[i], trace.right_positions[i]]
            rows.append(row)
        output.write_csv("spread_trace.csv", header, rows)
        output.write_csv(
            "spread_speeds.csv",
            ("level", "speed_right", "stderr_right", "speed_left", "stderr_left", "speed_theory"),
            speed_rows(report),
        )
        output.write_field("spread_final.bin", report.final.u)

        summary: Dict[str, Any] = {
            "mu": mu,
            "speed_theory": report.speed_theory,
            "speed_right": report.traces[min(levels)].fitted_speed_right,
            "envelope_ok": report.envelope_ok,
            "envelope_worst_ratio": report.envelope_worst_ratio,
            "interior_speed": report.interior_speed,
            "interior_min": report.interior_min,
            "wake_min": report.wake_min,
            "wake_max": report.wake_max,
            "period": report.grid.period,
            "n": report.grid.n,
        }
        output.write_csv("spread_checks.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Spreading", markdown_table(tuple(summary), [tuple(summary.values())]))
        speed_header = ("level", "speed_right", "stderr_right", "speed_left", "stderr_left", "speed_theory")
        output.add_section("Fitted speeds", markdown_table(speed_header, speed_rows(report)))
        return ExperimentResult(kind="spread", mu=mu, summary=summary)

    def run_counterexample(self, config: ExperimentConfig, mu: Optional[float], output: OutputManager):
        kernel = config.kernel.to_kernel()
        block = config.counterexample
        L = kernel.shift
        grid = Grid(2.0 * L, block.n)
        report = dirac_counterexample(mu, L, block.rho, block.T, grid, dt=block.dt)
        output.write_csv("counterexample_growth.csv", ("t", "sup_w", "sup_u"), zip(report.times, report.sup_w, report.sup_u))
        summary: Dict[str, Any] = {
            "mu": mu,
            "L": L,
            "rho": block.rho,
            "rate_fitted": report.rate_fitted,
            "rate_stderr": report.rate_stderr,
            "rate_theory": report.rate_theory,
            "relative_rate_error": report.relative_rate_error,
            "t_end": report.t_end,
            "sup_u_max": report.sup_u_max,
            "t_u_exceeds": report.t_u_exceeds if report.t_u_exceeds is not None else "",
            "blew_up": report.blew_up,
        }
        output.write_csv("counterexample_summary.csv", tuple(summary), [tuple(summary.values())])
        output.add_section("Dirac-pair counterexample", markdown_table(tuple(summary), [tuple(summary.values())]))
        return ExperimentResult(kind="counterexample", mu=mu, summary=summary, blow_up=report.blew_up)


def _period_of(config: ExperimentConfig) -> Optional[float]:
    if config.stability is not None:
        return config.stability.L
    if config.steady is not None:
        return config.steady.L
    return None
