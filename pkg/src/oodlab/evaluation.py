"""Detector thresholding and metrics: FPR at fixed TPR, AUROC, ID accuracy.

Both headline metrics are implemented so that a brute-force reference can
reproduce them exactly: the threshold is a plain order statistic of the ID
scores (no ROC interpolation) and AUROC is the pairwise rank statistic
P(id > ood) + 0.5 P(tie). Scores follow the package convention
higher = more ID-like, and a sample counts as "in" when score >= tau.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .data import LabeledBatch
from .errors import DataFormatError, InvalidInputError
from .model import MlpModel, forward
from .numeric import check_finite

# Slack for "count/n >= target" comparisons, so targets like 0.95 behave as
# exact fractions despite binary rounding of target*n.
_TPR_EPS = 1e-9

N_HISTOGRAM_BINS = 50


def _check_scores(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    return check_finite(arr, name)


def threshold_at_tpr(id_scores, target_tpr: float = 0.95) -> float:
    """Largest observed score tau with fraction(id >= tau) >= target_tpr.

    Equals the (n - ceil(target*n) + 1)-th smallest ID score.
    """
    s = np.sort(_check_scores(id_scores, "id_scores"))
    n = s.size
    if not 0.0 < target_tpr <= 1.0:
        raise InvalidInputError(f"target_tpr must be in (0, 1], got {target_tpr}")
    required = math.ceil(target_tpr * n - _TPR_EPS)
    return float(s[n - required])


def fpr_at_tpr(id_scores, ood_scores, target_tpr: float = 0.95) -> float:
    """Fraction of OOD scores at or above the TPR-matched ID threshold."""
    ood = _check_scores(ood_scores, "ood_scores")
    tau = threshold_at_tpr(id_scores, target_tpr)
    return float(np.count_nonzero(ood >= tau) / ood.size)


def auroc(id_scores, ood_scores) -> float:
    """P(id score > ood score) + 0.5 P(tie) over all pairs."""
    id_s = _check_scores(id_scores, "id_scores")
    ood = np.sort(_check_scores(ood_scores, "ood_scores"))
    below = np.searchsorted(ood, id_s, side="left")
    ties = np.searchsorted(ood, id_s, side="right") - below
    return float((below.sum() + 0.5 * ties.sum()) / (id_s.size * ood.size))


def id_accuracy(model: MlpModel, id_test: LabeledBatch) -> float:
    """Fraction of correct argmax-over-the-K-class-logits predictions.

    The absent head is excluded so accuracy is comparable to a plain K-way
    classifier.
    """
    if id_test.n == 0:
        raise InvalidInputError("id_test is empty")
    logits, _ = forward(model, id_test.features)
    k = logits.shape[1] - 1
    predicted = np.argmax(logits[:, :k], axis=1) + 1
    return float(np.mean(predicted == id_test.labels))


@dataclass
class EvalReport:
    fpr95: float
    auroc: float
    acc: float
    tau: float
    n_id: int
    n_ood: int
    hist_id: list[int]
    hist_ood: list[int]
    bin_edges: list[float]


def build_report(id_scores, ood_scores, acc: float,
                 target_tpr: float = 0.95) -> EvalReport:
    id_s = _check_scores(id_scores, "id_scores")
    ood = _check_scores(ood_scores, "ood_scores")
    tau = threshold_at_tpr(id_s, target_tpr)
    lo = float(min(id_s.min(), ood.min()))
    hi = float(max(id_s.max(), ood.max()))
    if lo == hi:  # degenerate range: widen so the histogram stays well-formed
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, N_HISTOGRAM_BINS + 1)
    hist_id, _ = np.histogram(id_s, bins=edges)
    hist_ood, _ = np.histogram(ood, bins=edges)
    return EvalReport(
        fpr95=float(np.count_nonzero(ood >= tau) / ood.size),
        auroc=auroc(id_s, ood),
        acc=float(acc),
        tau=tau,
        n_id=int(id_s.size),
        n_ood=int(ood.size),
        hist_id=[int(v) for v in hist_id],
        hist_ood=[int(v) for v in hist_ood],
        bin_edges=[float(v) for v in edges],
    )


def _validate_report(report: EvalReport) -> None:
    if report.n_id < 1 or report.n_ood < 1:
        raise InvalidInputError("report must cover at least one ID and one OOD sample")
    for name in ("fpr95", "auroc", "acc"):
        v = getattr(report, name)
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"{name}={v} outside [0, 1]")
    if sum(report.hist_id) != report.n_id or sum(report.hist_ood) != report.n_ood:
        raise InvalidInputError("histogram counts do not sum to the sample counts")


def export_report(report: EvalReport, path, fmt: str = "json") -> None:
    """Deterministic serialization; CSV carries a checksum footer with the
    histogram sums."""
    _validate_report(report)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(asdict(report), fh, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fpr95", "auroc", "acc", "tau", "n_id", "n_ood"])
            writer.writerow([repr(report.fpr95), repr(report.auroc), repr(report.acc),
                             repr(report.tau), report.n_id, report.n_ood])
            writer.writerow(["bin_lo", "bin_hi", "hist_id", "hist_ood"])
            for i in range(len(report.hist_id)):
                writer.writerow([repr(report.bin_edges[i]), repr(report.bin_edges[i + 1]),
                                 report.hist_id[i], report.hist_ood[i]])
            writer.writerow(["sum", "", sum(report.hist_id), sum(report.hist_ood)])
    else:
        raise InvalidInputError(f"unknown report format {fmt!r}")


def read_report(path, fmt: str | None = None) -> EvalReport:
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    if fmt == "json":
        with open(path) as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"bad report JSON: {exc}") from None
        try:
            report = EvalReport(**payload)
        except TypeError as exc:
            raise DataFormatError(f"bad report fields: {exc}") from None
    else:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 4 or rows[0][:6] != ["fpr95", "auroc", "acc", "tau", "n_id", "n_ood"]:
            raise DataFormatError("bad report CSV header")
        head = rows[1]
        hist_rows = rows[3:-1]
        footer = rows[-1]
        hist_id = [int(r[2]) for r in hist_rows]
        hist_ood = [int(r[3]) for r in hist_rows]
        if footer[0] != "sum" or int(footer[2]) != sum(hist_id) or int(footer[3]) != sum(hist_ood):
            raise DataFormatError("report CSV checksum footer mismatch")
        edges = [float(r[0]) for r in hist_rows] + [float(hist_rows[-1][1])]
        report = EvalReport(
            fpr95=float(head[0]), auroc=float(head[1]), acc=float(head[2]),
            tau=float(head[3]), n_id=int(head[4]), n_ood=int(head[5]),
            hist_id=hist_id, hist_ood=hist_ood, bin_edges=edges,
        )
    _validate_report(report)
    return report
