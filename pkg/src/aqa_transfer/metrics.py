"""Spearman rank correlation and Fisher-z aggregation.

Ties get average (fractional) ranks.  Per-action correlations are
aggregated as tanh(mean(atanh(rho))); values within 1e-12 of +-1 are
clamped first so perfect correlations on small test sets stay finite.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DegenerateMetricError

ATANH_CLAMP = 1.0 - 1e-12


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(pred, truth) -> float:
    """Pearson correlation of the two rank vectors."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ArgumentError(
            f"inputs must be equal-length vectors, got {p.shape} and {t.shape}"
        )
    if p.size < 2:
        raise ArgumentError("need at least 2 observations")
    rp = average_ranks(p)
    rt = average_ranks(t)
    dp = rp - rp.mean()
    dt = rt - rt.mean()
    denom = math.sqrt(float(dp @ dp) * float(dt @ dt))
    if denom == 0.0:
        raise DegenerateMetricError("zero rank variance in one of the inputs")
    return float(dp @ dt) / denom


def fisher_avg(rhos) -> float:
    """tanh of the mean atanh of the per-action correlations."""
    rhos = list(rhos)
    if not rhos:
        raise ArgumentError("cannot average an empty list of correlations")
    zs = []
    for r in rhos:
        if abs(r) > 1.0:
            raise ArgumentError(f"correlation {r} outside [-1, 1]")
        zs.append(math.atanh(max(-ATANH_CLAMP, min(ATANH_CLAMP, r))))
    return math.tanh(sum(zs) / len(zs))


@dataclass
class EvalReport:
    rho_by_action: dict[str, float]
    n_by_action: dict[str, int]
    avg_rho: float


def build_report(by_action: dict[str, tuple[list, list]]) -> EvalReport:
    """Per-action Spearman plus the Fisher-z average across actions.

    by_action maps action name -> (predictions, true raw scores).
    """
    rho = {}
    n = {}
    for action, (pred, truth) in by_action.items():
        rho[action] = spearman(pred, truth)
        n[action] = len(truth)
    return EvalReport(rho, n, fisher_avg(rho.values()))


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["action", "rho", "n_test"])
        for action in report.rho_by_action:
            writer.writerow(
                [action, f"{report.rho_by_action[action]:.17g}",
                 report.n_by_action[action]]
            )
        writer.writerow(["AVERAGE", f"{report.avg_rho:.17g}",
                         sum(report.n_by_action.values())])


def write_report_json(report: EvalReport, path: str | Path) -> None:
    doc = {
        "rho_by_action": {k: v for k, v in report.rho_by_action.items()},
        "n_by_action": report.n_by_action,
        "avg_rho": report.avg_rho,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
