"""
Confusion matrices, precision/recall/F1 and model comparison tables.

Zero denominators give a metric of 0.  Macro averages run over the classes
that occur among the true labels.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError

REPORT_HEADER = ["model", "precision_macro", "recall_macro", "f1_macro", "accuracy", "test_loss"]
PER_CLASS_HEADER = ["model", "class", "precision", "recall", "f1"]

# Published 20-category results (macro P, R, F1, loss), kept for side-by-side reports.
REFERENCE_RESULTS = {
    "W-RNN": (0.85, 0.84, 0.84, 0.86),
    "RNN": (0.79, 0.77, 0.78, 1.36),
    "CRNN": (0.78, 0.76, 0.77, 1.33),
    "Bi-RNN": (0.75, 0.74, 0.75, 1.5),
    "DNN": (0.56, 0.55, 0.53, 1.2),
}
REFERENCE_ACCURACY = 0.8555


def confusion(preds, labels, n_classes):
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.size != labels.size:
        raise ValueError(f"{preds.size} predictions for {labels.size} labels")
    if preds.size and (min(preds.min(), labels.min()) < 0
                       or max(preds.max(), labels.max()) >= n_classes):
        raise ValueError(f"class id outside 0..{n_classes - 1}")
    M = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(M, (labels, preds), 1)
    return M


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass
class MetricsReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_micro: float
    recall_micro: float
    f1_micro: float
    accuracy: float
    loss: float
    zero_division: bool = False

    def summary(self):
        return (f"accuracy {self.accuracy:.4f}  macro P {self.precision_macro:.4f} "
                f"R {self.recall_macro:.4f} F1 {self.f1_macro:.4f}  loss {self.loss:.4f}")


def metrics(M, losses=None):
    M = np.asarray(M, dtype=np.int64)
    total = int(M.sum())
    if total == 0:
        raise ValueError("cannot compute metrics of an empty confusion matrix")
    tp = np.diag(M).astype(np.float64)
    col = M.sum(axis=0)
    row = M.sum(axis=1)
    precision = _safe_div(tp, col)
    recall = _safe_div(tp, row)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    present = row > 0
    acc = float(tp.sum() / total)
    loss = float(np.mean(losses)) if losses is not None and len(losses) else float("nan")
    return MetricsReport(
        precision=precision, recall=recall, f1=f1, support=row,
        precision_macro=float(precision[present].mean()),
        recall_macro=float(recall[present].mean()),
        f1_macro=float(f1[present].mean()),
        # single-label: micro P = micro R = accuracy
        precision_micro=acc, recall_micro=acc, f1_micro=acc,
        accuracy=acc, loss=loss,
        zero_division=bool(np.any((col == 0) | (row == 0))),
    )


def compare_models(reports):
    """Rows ``(name, P, R, F1, accuracy, loss)`` sorted by macro-F1 descending, then name."""
    rows = [(name, r.precision_macro, r.recall_macro, r.f1_macro, r.accuracy, r.loss)
            for name, r in reports]
    rows.sort(key=lambda row: (-row[3], row[0]))
    return rows


def render_table(rows, header=REPORT_HEADER):
    cells = [header] + [[r[0]] + [f"{v:.4f}" if isinstance(v, float) else str(v) for v in r[1:]]
                        for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = []
    for k, c in enumerate(cells):
        lines.append("  ".join(s.ljust(w) if i == 0 else s.rjust(w)
                               for i, (s, w) in enumerate(zip(c, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_report_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])


def write_per_class_csv(path, name, report, class_names=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PER_CLASS_HEADER)
        for c in range(len(report.f1)):
            label = class_names[c] if class_names else str(c)
            w.writerow([name, label, repr(float(report.precision[c])),
                        repr(float(report.recall[c])), repr(float(report.f1[c]))])


def read_report_csv(path):
    try:
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if header != REPORT_HEADER:
                raise DataError(f"{path}: unexpected header {header}")
            return [(r[0], *map(float, r[1:])) for r in rd if r]
    except (OSError, StopIteration, ValueError, IndexError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from None


def aggregate_rows(rows):
    """Merge rows sharing a model name into mean (and sample std) rows.

    Returns ``(mean_rows, std_rows)``, both sorted like ``compare_models``.
    """
    groups = {}
    for r in rows:
        groups.setdefault(r[0], []).append(r[1:])
    means, stds = [], []
    for name, vals in groups.items():
        a = np.array(vals, dtype=np.float64)
        means.append((name, *map(float, a.mean(axis=0))))
        sd = a.std(axis=0, ddof=1) if len(a) > 1 else np.zeros(a.shape[1])
        stds.append((name, *map(float, sd), len(a)))
    order = sorted(range(len(means)), key=lambda i: (-means[i][3], means[i][0]))
    return [means[i] for i in order], [stds[i] for i in order]
