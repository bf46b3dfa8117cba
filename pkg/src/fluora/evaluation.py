"""Confusion counts, the four headline metrics, and rate reconciliation.

Fluorescent is always the positive class. Published tables round to one
decimal of a percentage (half-up), so the reconciler inverts that rounding
exactly: it searches integer confusion matrices whose computed rates land
in the half-open window around each published value.
"""

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from . import kernels
from .dataset import LABEL_FLUORESCENT
from .errors import LengthMismatch, NoSolution

STRATUM_OVERALL = "overall"
STRATUM_INTERNAL = "internal"
STRATUM_EXTERNAL = "external"
STRATUM_CUSTOM = "custom"

DEFAULT_SEARCH_TOTAL = 200


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    stratum: str = STRATUM_CUSTOM

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def quad(self):
        return (self.tp, self.fp, self.fn, self.tn)


@dataclass(frozen=True)
class MetricsReport:
    """Ratios in [0, 1]; None marks an undefined metric (never coerced to 0)."""

    counts: ConfusionCounts
    recall: float | None
    precision: float | None
    accuracy: float | None
    f1: float | None

    def to_json(self):
        return {
            "stratum": self.counts.stratum,
            "tp": self.counts.tp, "fp": self.counts.fp,
            "fn": self.counts.fn, "tn": self.counts.tn,
            "recall": self.recall, "precision": self.precision,
            "accuracy": self.accuracy, "f1": self.f1,
        }


def confusion(predictions, truths, strata=None):
    """Counts per stratum plus the overall row (always first).

    predictions/truths are label strings; strata, when given, is an aligned
    list of stratum tags (e.g. internal / external). Stratum rows appear in
    first-occurrence order.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch("predictions and truths differ in length")
    if strata is not None and len(strata) != len(truths):
        raise LengthMismatch("strata and truths differ in length")

    def tally(idx, tag):
        tp = fp = fn = tn = 0
        for i in idx:
            pred_pos = predictions[i] == LABEL_FLUORESCENT
            true_pos = truths[i] == LABEL_FLUORESCENT
            if pred_pos and true_pos:
                tp += 1
            elif pred_pos:
                fp += 1
            elif true_pos:
                fn += 1
            else:
                tn += 1
        return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, stratum=tag)

    out = [tally(range(len(truths)), STRATUM_OVERALL)]
    if strata is not None:
        seen = []
        for tag in strata:
            if tag not in seen:
                seen.append(tag)
        for tag in seen:
            idx = [i for i, t in enumerate(strata) if t == tag]
            out.append(tally(idx, tag))
    return out


def metrics(counts):
    """Recall, precision, accuracy, F1 from counts; undefined stays None."""
    tp, fp, fn, tn = counts.quad()
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    total = counts.total
    accuracy = (tp + tn) / total if total > 0 else None
    f1 = None
    if recall is not None and precision is not None and (recall + precision) > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(counts=counts, recall=recall, precision=precision,
                         accuracy=accuracy, f1=f1)


def round_half_up(value, ndigits=1):
    """Half-up decimal rounding (Table presentation convention)."""
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def percent(ratio, ndigits=1):
    """Ratio -> percentage rounded half-up; None passes through."""
    if ratio is None:
        return None
    return round_half_up(100.0 * ratio, ndigits)


def reconcile_rates(recall, precision, accuracy, f1,
                    total_hint=None, positives_hint=None):
    """Integer confusion matrices reproducing four published percentages.

    Rates are percentages rounded to one decimal (half-up). The search is
    exhaustive over quadruples with total <= max(total_hint, 200); the
    hints, when given, pin the total and the positive count (tp+fn).
    Results are sorted by total ascending. Raises NoSolution when nothing
    matches.
    """
    for name, rate in (("recall", recall), ("precision", precision),
                       ("accuracy", accuracy), ("f1", f1)):
        if not (0.0 <= rate <= 100.0):
            raise ValueError(f"{name} must be a percentage in [0, 100]")
    if total_hint is not None and total_hint < 1:
        raise ValueError("total_hint must be positive")
    if positives_hint is not None and positives_hint < 0:
        raise ValueError("positives_hint must be non-negative")

    n_max = max(total_hint or 0, DEFAULT_SEARCH_TOTAL)
    arr = kernels.search_confusions(
        int(round(recall * 10)), int(round(precision * 10)),
        int(round(accuracy * 10)), int(round(f1 * 10)),
        n_max, total=total_hint, positives=positives_hint,
    )
    if arr.shape[0] == 0:
        raise NoSolution(
            f"no confusion matrix with total <= {n_max} reproduces "
            f"({recall}, {precision}, {accuracy}, {f1})")
    return [ConfusionCounts(tp=int(t), fp=int(p), fn=int(n), tn=int(m),
                            stratum=STRATUM_CUSTOM)
            for t, p, n, m in arr]


def format_metrics_table(reports):
    """Plain-text table mirroring the published metrics layout."""
    headers = ["", "Recall / Sensitivity", "Precision / PPV", "Accuracy", "F1 score"]
    rows = [headers]
    for rep in reports:
        def cell(v):
            return "n/a" if v is None else f"{percent(v):.1f}%"
        rows.append([rep.counts.stratum, cell(rep.recall), cell(rep.precision),
                     cell(rep.accuracy), cell(rep.f1)])
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
