"""
mu sweeps: one experiment per mu value, each in its own output directory,
optionally spread over a process pool. The summary has one row per mu in
sweep order regardless of completion order.
"""

import concurrent.futures as cf
import logging
import os
from typing import List, Optional

from ConfigManager import ExperimentConfig
from ExperimentManager import ExperimentManager, ExperimentResult
from OutputManager import OutputManager, markdown_table


def point_directory(output_dir: str, index: int) -> str:
    return os.path.join(output_dir, f"point_{index:03d}")


def _run_point(args) -> ExperimentResult:
    config, mu, output_dir = args
    return ExperimentManager().run(config, output_dir=output_dir, mu=mu)


class SweepManager:
    """Runs a sweep config point by point and writes the summary table"""

    def __init__(self, app=None):
        self.app = app

    def run(self, config: ExperimentConfig, jobs: Optional[int] = None) -> List[ExperimentResult]:
        mus = config.mu_values()
        jobs = jobs or config.sweep.jobs
        tasks = [(config, mu, point_directory(config.output_dir, i)) for i, mu in enumerate(mus)]
        logging.info(f"Sweep '{config.name}': {len(mus)} points of kind {config.base_kind}, {jobs} job(s)")

        if jobs > 1 and len(tasks) > 1:
            with cf.ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
                results = list(ex.map(_run_point, tasks))
        else:
            results = [_run_point(task) for task in tasks]

        output = OutputManager(config.output_dir)
        columns = ["point", "mu"]
        for result in results:
            columns += [key for key in result.summary if key not in columns]
        rows = [
            [i, mu] + [result.summary.get(key, "") for key in columns[2:]]
            for i, (mu, result) in enumerate(zip(mus, results))
        ]
        output.write_csv("sweep_summary.csv", columns, rows)
        output.add_section(f"Sweep over mu ({config.base_kind})", markdown_table(columns, rows))
        output.write_report(f"{config.name}: sweep")
        output.write_manifest()
        return results
