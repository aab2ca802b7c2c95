"""Structured experiment reports: measured values against theoretical bounds.

A point passes iff ``measured <= bound * (1 + tol) + 3 * stderr`` for
one-sided estimates, or ``|measured - target| <= tol + 3 * stderr`` for
equality targets; a tiny absolute epsilon keeps zero bounds comparable
against floating-point dust.  Reports serialize deterministically (no
timestamps).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

ABS_EPS = 1e-12


@dataclass
class ReportPoint:
    label: str
    inputs: dict
    measured: float
    bound: float | None = None
    target: float | None = None
    stderr: float = 0.0
    tol: float = 0.0
    passed: bool = True
    margin: float = 0.0

    @staticmethod
    def one_sided(label, inputs, measured, bound, tol=0.0, stderr=0.0) -> "ReportPoint":
        allowance = bound * (1.0 + tol) + 3.0 * stderr + ABS_EPS
        return ReportPoint(label, inputs, measured, bound=bound, stderr=stderr, tol=tol,
                           passed=measured <= allowance, margin=allowance - measured)

    @staticmethod
    def equality(label, inputs, measured, target, tol, stderr=0.0) -> "ReportPoint":
        gap = abs(measured - target)
        allowance = tol + 3.0 * stderr + ABS_EPS
        return ReportPoint(label, inputs, measured, target=target, stderr=stderr, tol=tol,
                           passed=gap <= allowance, margin=allowance - gap)


@dataclass
class ExperimentReport:
    experiment: str
    model: str
    points: list
    passed: bool
    seed: int | None = None
    excluded: bool = False      # emitted but kept out of a run's global verdict
    notes: list = field(default_factory=list)

    @staticmethod
    def build(experiment, model, points, seed=None, excluded=False, notes=None) -> "ExperimentReport":
        return ExperimentReport(experiment, model, list(points),
                                passed=all(p.passed for p in points),
                                seed=seed, excluded=excluded, notes=list(notes or []))

    def worst_margin(self) -> float:
        return min((p.margin for p in self.points), default=0.0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    def summary_rows(self):
        """Rows for the flat summary table: experiment,point,measured,bound,stderr,verdict."""
        rows = []
        for p in self.points:
            ref = p.bound if p.bound is not None else p.target
            rows.append((self.experiment, p.label, p.measured,
                         float("nan") if ref is None else ref,
                         p.stderr, "pass" if p.passed else "FAIL"))
        return rows


def write_summary_csv(reports, path):
    """Flat machine-readable verdict table for a batch of reports."""
    with open(path, "w") as fh:
        fh.write("experiment,point,measured,bound,stderr,verdict\n")
        for rep in reports:
            for exp, label, measured, ref, stderr, verdict in rep.summary_rows():
                fh.write(f"{exp},{label},{measured:.17g},{ref:.17g},{stderr:.17g},{verdict}\n")


def write_report_json(report: ExperimentReport, path):
    with open(path, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
