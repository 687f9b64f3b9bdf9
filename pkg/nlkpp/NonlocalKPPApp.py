import argparse
import logging
import math
import sys
from typing import List, Optional

from ConfigManager import KERNEL_PARAMETERS, ConfigManager, ConfigValidationError
from ExperimentManager import ExperimentManager, kernel_samples
from numerics.Errors import NlkppError
from OutputManager import format_value, write_table
from SweepManager import SweepManager

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_BLOW_UP = 3

SUBCOMMANDS = {
    "kernel": "kernel-report",
    "stability": "stability",
    "steady": "steady",
    "evolve": "evolve",
    "spread": "spread",
    "counterexample": "counterexample",
    "sweep": "sweep",
}
PERIOD_KEYS = {"kernel-report": "stability.L", "stability": "stability.L", "steady": "steady.L"}


def _levels(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated numbers: {e}") from e


def _kernel_spec(text: str) -> dict:
    """'family:value' with the family's single parameter, e.g. phi_beta:100"""
    family, sep, value = text.partition(":")
    if not sep or family not in KERNEL_PARAMETERS or family == "tabulated":
        families = ", ".join(name for name in KERNEL_PARAMETERS if name != "tabulated")
        raise argparse.ArgumentTypeError(f"kernel must be FAMILY:VALUE with FAMILY one of {families}, got '{text}'")
    try:
        return {"family": family, KERNEL_PARAMETERS[family][0]: float(value)}
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"kernel parameter must be a number: {e}") from e


def _mu_range(text: str) -> dict:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError(f"expected START:STOP:POINTS, got '{text}'")
        return {"start": float(parts[0]), "stop": float(parts[1]), "points": int(parts[2])}
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"mu range: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlkpp", description="Nonlocal Fisher-KPP experiments.")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=f"Run a '{SUBCOMMANDS[name]}' experiment.")
        sub.add_argument("--config", help="Experiment config (JSON). Without it the flags make up the config.")
        sub.add_argument("--out", help="Output directory (overrides config and NLKPP_OUT).")
        sub.add_argument("--kernel", type=_kernel_spec, help="Kernel as FAMILY:VALUE, e.g. phi_beta:100.")
        sub.add_argument("--mu", type=float, help="Override mu.")
        sub.add_argument("--T", type=float, help="Override the final time of the run.")
        sub.add_argument("--dt", type=float, help="Override the time step.")
        sub.add_argument("--n", type=int, help="Override the grid size.")
        if SUBCOMMANDS[name] in PERIOD_KEYS:
            sub.add_argument("--L", type=float, help="Period of the steady/stability problem.")
        if name in ("stability", "sweep"):
            sub.add_argument("--mu-range", type=_mu_range, help="mu values as START:STOP:POINTS.")
        if name == "kernel":
            sub.add_argument("--report", action="store_true", help="Print (x, phi, xi, phi_hat) samples as CSV.")
        if name == "steady":
            sub.add_argument(
                "--continue",
                dest="continue_to",
                nargs=2,
                metavar=("MU_TO", "STEPS"),
                help="Continue the branch from mu to MU_TO in STEPS steps.",
            )
        if name == "spread":
            sub.add_argument("--levels", type=_levels, help="Front levels, e.g. 0.5,0.1,0.01.")
        if name == "sweep":
            sub.add_argument("--jobs", type=int, help="Concurrent sweep points.")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    """Map CLI flags to dotted config keys for the subcommand's experiment block."""
    kind = SUBCOMMANDS[args.command]
    overrides = {"kind": kind, "kernel": args.kernel, "mu": args.mu, "output_dir": args.out}
    if kind == "spread":
        overrides.update({"spread.T": args.T, "spread.dt": args.dt, "spread.levels": args.levels})
    elif kind == "counterexample":
        overrides.update({"counterexample.T": args.T, "counterexample.dt": args.dt, "counterexample.n": args.n})
    elif kind == "steady":
        overrides.update({"steady.n": args.n})
        if args.continue_to is not None:
            mu_to, steps = args.continue_to
            overrides.update({"steady.continuation_to": mu_to, "steady.continuation_steps": steps})
    elif kind == "stability":
        overrides.update({"stability.numeric_n": args.n})
    else:
        overrides.update({"integration.T": args.T, "integration.dt": args.dt, "grid.n": args.n})
    if kind in PERIOD_KEYS:
        overrides[PERIOD_KEYS[kind]] = args.L
    if getattr(args, "mu_range", None) is not None:
        overrides["mu_range"] = args.mu_range
    if kind == "sweep" and args.jobs is not None:
        overrides["sweep.jobs"] = args.jobs
    return overrides


def stability_line(summary: dict) -> str:
    """One-line verdict of a stability run."""
    L = format_value(summary["L"])
    if not summary["hypothesis"] or math.isnan(summary["mu_star"]):
        return f"L={L}: no single negative mode, mu* undefined (sharp threshold {format_value(summary['sharp_threshold'])})"
    return f"L={L}: k0={summary['k0']} mu*={format_value(summary['mu_star'])}"


class NonlocalKPPApp:
    """
    The command-line application: owns the managers and maps outcomes to
    exit codes.
    """

    def __init__(self, argv: Optional[List[str]] = None, stdout=None):
        self.args = build_parser().parse_args(argv)
        self.stdout = stdout if stdout is not None else sys.stdout
        logging.getLogger().setLevel(logging.DEBUG if self.args.verbose else logging.INFO)
        logging.debug("Initializing NonlocalKPPApp")

        self.config_manager = ConfigManager(self)
        self.experiment_manager = ExperimentManager(self)
        self.sweep_manager = SweepManager(self)
        self.config = None

    def exec(self) -> int:
        try:
            self.config = self.config_manager.load_config(self.args.config, overrides_from_args(self.args))
        except ConfigValidationError as e:
            logging.error(str(e))
            return EXIT_VALIDATION

        name = f"'{self.config.name}' ({self.config.kind})"
        try:
            if self.config.kind == "sweep":
                results = self.sweep_manager.run(self.config, jobs=getattr(self.args, "jobs", None))
                blow_up = any(result.blow_up for result in results)
            else:
                result = self.experiment_manager.run(self.config)
                blow_up = result.blow_up
                self.print_summary(result)
        except (NlkppError, ValueError) as e:
            logging.error(f"Experiment {name} failed: {e}", exc_info=True)
            return EXIT_NUMERICAL

        if blow_up:
            logging.info(f"Experiment {name} observed blow-up (expected for the counterexample)")
            return EXIT_BLOW_UP
        logging.info(f"Experiment {name} finished; artifacts in {self.config.output_dir}")
        return EXIT_OK

    def print_summary(self, result):
        """Stdout output of the kernel report and stability subcommands"""
        if result.kind == "kernel-report" and getattr(self.args, "report", False):
            write_table(self.stdout, ("x", "phi", "xi", "phi_hat"), kernel_samples(self.config.kernel.to_kernel()))
        elif result.kind == "stability":
            print(stability_line(result.summary), file=self.stdout)
