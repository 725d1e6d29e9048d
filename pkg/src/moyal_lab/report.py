"""Run a command suite and write its artifacts.

Layout under the output directory::

    report.json          config echo, checks, estimates, artifact paths
    timings.json         wall-clock seconds per stage (kept apart so report.json is reproducible)
    spectra/<name>.csv
    estimates/<name>.json
    plotdata/<name>.csv  columns n, D_n, window_mean
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import io
from .config import ExperimentConfig
from .experiments import SUITES, Check, SuiteResult
from .traces import SignedEstimate, TraceEstimate


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list[Check] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    spectra: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "estimates": {k: self.estimates[k].to_json() for k in sorted(self.estimates)},
            "artifacts": sorted(self.artifacts),
        }

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            lines.append(f"{tag} {c.name}: {c.value:.3e} (threshold {c.threshold:.3e})")
        return lines


def from_suite(command: str, config: ExperimentConfig, suite: SuiteResult) -> RunReport:
    return RunReport(command, config.resolved(), list(suite.checks), dict(suite.estimates),
                     dict(suite.spectra), dict(suite.timings))


def run(command: str, config: ExperimentConfig) -> RunReport:
    if command not in SUITES:
        raise KeyError(f"unknown command {command!r}; choose from {', '.join(SUITES)}")
    return from_suite(command, config, SUITES[command](config))


def _plot_source(estimate) -> dict[str, TraceEstimate]:
    if isinstance(estimate, TraceEstimate):
        return {"": estimate}
    if isinstance(estimate, SignedEstimate):
        parts = {"_positive": estimate.positive, "_negative": estimate.negative}
        return {k: v for k, v in parts.items() if v is not None}
    return {}


def emit(report: RunReport, out_dir) -> Path:
    """Write every artifact, then ``report.json``; returns the report path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(report.spectra):
        written.append(io.write_spectrum(out / "spectra" / f"{name}.csv", report.spectra[name]))
    for name in sorted(report.estimates):
        est = report.estimates[name]
        written.append(io.write_estimate(out / "estimates" / f"{name}.json", est))
        for suffix, part in _plot_source(est).items():
            written.append(io.write_plotdata(out / "plotdata" / f"{name}{suffix}.csv", part))
    report.artifacts = [p.relative_to(out).as_posix() for p in written]
    path = out / "report.json"
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    return path


__all__ = ["RunReport", "emit", "from_suite", "run"]
