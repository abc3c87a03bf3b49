"""Accuracy and fairness auditing for binary classifiers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

THRESHOLD = 0.5
DEFAULT_TAU = 0.8


def binarize(scores) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) > THRESHOLD).astype(np.int64)


def _group_masks(groups):
    groups = np.asarray(groups).ravel()
    masks = (groups == 0, groups == 1)
    if not (masks[0].any() and masks[1].any()):
        raise ValueError("empty group")
    return masks


def _parity_ratio(a: float, b: float) -> float:
    hi = max(a, b)
    if hi == 0:
        return 1.0
    return min(a, b) / hi


def disparate_impact(preds, groups) -> float:
    """min over groups of the positive rate divided by the max; 1 if nobody is predicted positive."""
    preds = np.asarray(preds).ravel()
    if preds.shape != np.asarray(groups).ravel().shape:
        raise ValueError("preds and groups differ in length")
    m0, m1 = _group_masks(groups)
    return _parity_ratio(float(preds[m0].mean()), float(preds[m1].mean()))


def equalized_odds(preds, targets, groups) -> dict[tuple[int, int], float]:
    """``P(pred = 1 | S = s, Y = y)`` keyed by ``(s, y)``; NaN marks an empty cell."""
    preds = np.asarray(preds).ravel()
    targets = np.asarray(targets).ravel()
    groups = np.asarray(groups).ravel()
    out = {}
    for s in (0, 1):
        for y in (0, 1):
            cell = (groups == s) & (targets == y)
            out[(s, y)] = float(preds[cell].mean()) if cell.any() else math.nan
    return out


def dmse(values, targets, groups, continuous: bool = False) -> float:
    """Ratio of the smaller to the larger group mean squared error.

    With ``continuous=False`` ``values`` are scores and are thresholded first.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if not continuous:
        values = binarize(values).astype(np.float64)
    sq = (values - np.asarray(targets, dtype=np.float64).ravel()) ** 2
    m0, m1 = _group_masks(groups)
    return _parity_ratio(float(sq[m0].mean()), float(sq[m1].mean()))


@dataclass(frozen=True)
class FairnessReport:
    accuracy: float
    di: float
    o00: float
    o10: float
    o01: float
    o11: float
    dmse: float
    cdmse: float
    mse: float
    gp0: float
    gp1: float
    n: int

    @property
    def odds(self) -> dict[tuple[int, int], float]:
        return {(0, 0): self.o00, (1, 0): self.o10, (0, 1): self.o01, (1, 1): self.o11}

    @property
    def gp_ratio(self) -> float:
        return self.gp0 / self.gp1 if self.gp1 else math.nan

    def to_text(self) -> str:
        """One ``key=value`` line per metric."""
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "FairnessReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(**{f.name: (int if f.name == "n" else float)(kv[f.name]) for f in fields(cls)})

    @staticmethod
    def csv_header() -> list[str]:
        return [f.name for f in fields(FairnessReport)]

    def csv_row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in self.csv_header()]


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def report_from_scores(scores, targets, groups) -> FairnessReport:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    targets = np.asarray(targets).ravel()
    groups = np.asarray(groups).ravel()
    preds = binarize(scores)
    correct = preds == targets
    m0, m1 = _group_masks(groups)
    odds = equalized_odds(preds, targets, groups)
    return FairnessReport(
        accuracy=float(correct.mean()),
        di=disparate_impact(preds, groups),
        o00=odds[(0, 0)],
        o10=odds[(1, 0)],
        o01=odds[(0, 1)],
        o11=odds[(1, 1)],
        dmse=dmse(scores, targets, groups, continuous=False),
        cdmse=dmse(scores, targets, groups, continuous=True),
        mse=float(np.mean((scores - targets) ** 2)),
        gp0=float(correct[m0].mean()),
        gp1=float(correct[m1].mean()),
        n=int(scores.size),
    )


def audit(model, dataset, tau: float = DEFAULT_TAU) -> tuple[FairnessReport, bool]:
    """Score ``dataset`` with ``model``; the flag is False when DI falls below ``tau``."""
    report = report_from_scores(model.forward(dataset.X), dataset.y, dataset.s)
    return report, passes(report, tau)


def passes(report: FairnessReport, tau: float = DEFAULT_TAU) -> bool:
    return report.di >= tau


def reports_to_csv(reports, extra_header=(), extra_rows=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(extra_header) + FairnessReport.csv_header())
    for i, rep in enumerate(reports):
        prefix = list(extra_rows[i]) if extra_rows else []
        writer.writerow(prefix + rep.csv_row())
    return buf.getvalue()
