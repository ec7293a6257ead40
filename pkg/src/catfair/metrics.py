"""Fairness and performance metrics over prediction tables.

Percent-valued metrics (AP rendering, DEO, BA) are reported in percentage
points. KL and dcor^2 are unitless.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, TieError, UndefinedMetricError
from .fileio import atomic_write_text

FORMULA_VERSION = "catfair-metrics/1"
DASH = "–"


@dataclass(frozen=True)
class MetricsConfig:
    bins: int = 10
    epsilon: float = 1e-6
    score_threshold: float = 0.5
    ap_ties: str = "stable"

    def __post_init__(self):
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.ap_ties not in ("stable", "pessimistic"):
            raise ConfigError(f"unknown AP tie mode {self.ap_ties!r}")


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Per-sample group, true labels and scores; optional representation vectors.

    ``groups`` holds the protected attribute value (0 or 1) of each sample.
    """

    ids: tuple[str, ...]
    groups: np.ndarray
    labels: dict[str, np.ndarray]
    scores: dict[str, np.ndarray]
    representation: np.ndarray | None = None
    protected: str = "group"

    def __post_init__(self):
        n = len(self.ids)
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(set(self.ids)) != n:
            raise ConfigError("duplicate sample ids in prediction table")
        groups = np.asarray(self.groups, dtype=np.int64)
        if groups.shape != (n,) or not np.isin(groups, (0, 1)).all():
            raise ConfigError("groups must be a length-n vector of 0/1")
        object.__setattr__(self, "groups", groups)
        if set(self.labels) != set(self.scores):
            raise ConfigError("labels and scores must cover the same attributes")
        labels, scores = {}, {}
        for attr in self.labels:
            y = np.asarray(self.labels[attr], dtype=np.int64)
            s = np.asarray(self.scores[attr], dtype=np.float64)
            if y.shape != (n,) or s.shape != (n,):
                raise ConfigError(f"{attr}: label/score columns must have length {n}")
            if not np.isin(y, (0, 1)).all():
                raise ConfigError(f"{attr}: labels must be binary")
            if not (np.all(np.isfinite(s)) and np.all((s >= 0) & (s <= 1))):
                raise ConfigError(f"{attr}: scores must be finite and within [0, 1]")
            labels[attr], scores[attr] = y, s
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)
        if self.representation is not None:
            rep = np.asarray(self.representation, dtype=np.float64)
            if rep.ndim != 2 or rep.shape[0] != n:
                raise ConfigError("representation must be an (n, d) matrix")
            object.__setattr__(self, "representation", rep)

    def __len__(self):
        return len(self.ids)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(self.labels)

    def take(self, rows) -> "PredictionTable":
        rows = np.asarray(rows, dtype=np.int64)
        rep = None if self.representation is None else self.representation[rows]
        return PredictionTable([self.ids[i] for i in rows], self.groups[rows],
                               {a: v[rows] for a, v in self.labels.items()},
                               {a: v[rows] for a, v in self.scores.items()}, rep, self.protected)

    def canonical(self) -> "PredictionTable":
        """Rows sorted by sample id, so results do not depend on file order."""
        return self.take(sorted(range(len(self)), key=self.ids.__getitem__))


# -- prediction files -----------------------------------------------------------

def read_predictions(path) -> PredictionTable:
    """Read ``id,<protected>,label:<attr>,score:<attr>,...,rep:0,rep:1,...`` CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty prediction file") from None
        rows = list(reader)
    if len(header) < 2 or header[0] != "id":
        raise ParseError("header must start with 'id,<group column>'", line=1)
    protected = header[1]
    label_cols = {h.split(":", 1)[1]: i for i, h in enumerate(header) if h.startswith("label:")}
    score_cols = {h.split(":", 1)[1]: i for i, h in enumerate(header) if h.startswith("score:")}
    rep_cols = [i for i, h in enumerate(header) if h.startswith("rep:")]
    if set(label_cols) != set(score_cols):
        raise ParseError("every label column needs a matching score column", line=1)
    attrs = [h.split(":", 1)[1] for h in header if h.startswith("label:")]
    ids, groups = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
        ids.append(row[0])
        g = row[1].strip()
        if g not in ("0", "1", "-1"):
            raise ParseError(f"group value must be 0/1 (or -1/1), got {g!r}", line=lineno)
        groups.append(1 if g == "1" else 0)

    def col(i, kind):
        try:
            return np.array([kind(r[i]) for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"column {header[i]!r}: {exc}") from exc

    labels = {a: (col(label_cols[a], int) > 0).astype(np.int64) for a in attrs}
    scores = {a: col(score_cols[a], float) for a in attrs}
    rep = np.stack([col(i, float) for i in rep_cols], axis=1) if rep_cols else None
    try:
        return PredictionTable(ids, groups, labels, scores, rep, protected)
    except ConfigError as exc:
        raise ParseError(str(exc)) from exc


def format_predictions(pred: PredictionTable) -> str:
    header = ["id", pred.protected]
    for a in pred.attributes:
        header += [f"label:{a}", f"score:{a}"]
    d = 0 if pred.representation is None else pred.representation.shape[1]
    header += [f"rep:{i}" for i in range(d)]
    lines = [",".join(header)]
    for r in range(len(pred)):
        row = [pred.ids[r], str(pred.groups[r])]
        for a in pred.attributes:
            row += [str(pred.labels[a][r]), repr(float(pred.scores[a][r]))]
        if d:
            row += [repr(float(v)) for v in pred.representation[r]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_predictions(path, pred: PredictionTable) -> Path:
    return atomic_write_text(path, format_predictions(pred))


# -- individual metrics -----------------------------------------------------------

def average_precision(scores, labels, ties: str = "stable") -> float:
    """Non-interpolated AP over the score-descending ranking.

    ``ties="stable"`` keeps tied scores in input order; ``"pessimistic"``
    ranks tied negatives ahead of tied positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ConfigError("scores and labels must be 1-D and equally long")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AP undefined: no positive labels")
    if ties == "stable":
        order = np.argsort(-scores, kind="stable")
    elif ties == "pessimistic":
        order = np.lexsort((labels, -scores))
    else:
        raise ConfigError(f"unknown tie mode {ties!r}")
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits == 1].sum() / n_pos)


def group_ap(pred: PredictionTable, attribute: str, group: int, ties: str = "stable") -> float:
    sel = pred.groups == group
    try:
        return average_precision(pred.scores[attribute][sel], pred.labels[attribute][sel], ties)
    except UndefinedMetricError:
        raise UndefinedMetricError(f"AP undefined for {attribute!r}: group {group} "
                                   "has no positives") from None


def deo_from_ap(ap_a: float, ap_b: float) -> float:
    """DEO from two per-group APs, both in the same unit (returns that unit)."""
    return abs(ap_a - ap_b)


def deo(pred: PredictionTable, attribute: str, ties: str = "stable") -> float:
    """|AP(group 0) - AP(group 1)| in percentage points."""
    return 100.0 * deo_from_ap(group_ap(pred, attribute, 0, ties), group_ap(pred, attribute, 1, ties))


def majority_group(train, attribute: str) -> int:
    pos = train.counts[attribute][:, 1]
    if pos[0] == pos[1]:
        raise TieError(f"no training-majority group for {attribute!r}: "
                       f"{int(pos[0])} positives in each group")
    return int(np.argmax(pos))


def bias_amplification(train, pred: PredictionTable, attribute: str,
                       score_threshold: float = 0.5) -> float:
    """Share of the training-majority group among predicted positives, minus its
    share among training positives, in percentage points.

    Positive values mean the model over-represents the group that already
    dominated the attribute's training positives.
    """
    z = majority_group(train, attribute)
    pos = train.counts[attribute][:, 1]
    train_share = pos[z] / pos.sum()
    predicted = pred.scores[attribute] > score_threshold
    if not predicted.any():
        raise UndefinedMetricError(f"BA undefined for {attribute!r}: no predicted positives")
    pred_share = np.mean(pred.groups[predicted] == z)
    return 100.0 * float(pred_share - train_share)


def smoothed_histogram(scores: np.ndarray, bins: int, epsilon: float) -> np.ndarray:
    hist = np.histogram(scores, bins=bins, range=(0.0, 1.0))[0] / scores.size
    return (hist + epsilon) / (1.0 + bins * epsilon)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def kl_score_divergence(pred: PredictionTable, attribute: str, bins: int = 10,
                        epsilon: float = 1e-6) -> float:
    """Mean over y in {0, 1} of KL(hist of group-0 scores | hist of group-1 scores),
    with scores conditioned on the true label y."""
    s, y, g = pred.scores[attribute], pred.labels[attribute], pred.groups
    total = 0.0
    for label in (0, 1):
        a, b = s[(g == 0) & (y == label)], s[(g == 1) & (y == label)]
        if a.size == 0 or b.size == 0:
            raise UndefinedMetricError(f"KL undefined for {attribute!r}: empty group with y={label}")
        total += kl_divergence(smoothed_histogram(a, bins, epsilon),
                               smoothed_histogram(b, bins, epsilon))
    return 0.5 * total


def _double_centered(d: np.ndarray) -> np.ndarray:
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def _distance_matrix(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def distance_correlation_sq(x, z) -> float:
    """Squared sample distance correlation (V-statistic form).

    Returns 0 when either variable has zero distance variance.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x = x[:, None] if x.ndim == 1 else x
    z = z[:, None] if z.ndim == 1 else z
    if x.shape[0] != z.shape[0]:
        raise ConfigError("x and z must have the same number of samples")
    if x.shape[0] < 2:
        raise ConfigError("distance correlation needs n >= 2")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ConfigError("distance correlation inputs must be finite")
    a = _double_centered(_distance_matrix(x))
    b = _double_centered(_distance_matrix(z))
    dvar_x, dvar_z = np.mean(a * a), np.mean(b * b)
    if dvar_x <= 0 or dvar_z <= 0:
        return 0.0
    value = np.mean(a * b) / math.sqrt(dvar_x * dvar_z)
    return float(min(max(value, 0.0), 1.0))


def group_accuracy(pred: PredictionTable, attribute: str, group: int, threshold: float = 0.5) -> float:
    sel = pred.groups == group
    if not sel.any():
        raise UndefinedMetricError(f"accuracy undefined: group {group} is empty")
    hits = (pred.scores[attribute][sel] > threshold).astype(np.int64) == pred.labels[attribute][sel]
    return 100.0 * float(hits.mean())


# -- report -------------------------------------------------------------------

METRIC_COLUMNS = ("AP", "DEO", "BA", "KL", "dcor2")


@dataclass
class MetricsReport:
    attributes: dict[str, dict]
    aggregates: dict[str, float | None]
    config: dict
    errors: dict[str, dict[str, str]] = field(default_factory=dict)
    representation_dcor2: float | None = None
    formula_version: str = FORMULA_VERSION
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def render_table(self) -> str:
        """Aligned text table: one row per metric, one column per attribute plus the mean."""
        names = list(self.attributes)
        header = ["Metric", *names, "Average"]
        rows = []
        for metric, arrow, fmt in (("AP", "↑", "{:.1f}"), ("DEO", "↓", "{:.1f}"),
                                   ("BA", "↓", "{:.2f}"), ("KL", "↓", "{:.2f}"),
                                   ("dcor2", "↓", "{:.2f}")):
            cells = [f"{metric} {arrow}"]
            for a in names:
                v = self.attributes[a][metric]
                cells.append(DASH if v is None else fmt.format(v))
            agg = self.aggregates.get(metric)
            cells.append(DASH if agg is None else fmt.format(agg))
            rows.append(cells)
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        fmt_row = lambda r: "  ".join(c.rjust(w) if i else c.ljust(w)
                                      for i, (c, w) in enumerate(zip(r, widths)))
        lines = [fmt_row(header), "  ".join("-" * w for w in widths)]
        lines += [fmt_row(r) for r in rows]
        if self.representation_dcor2 is not None:
            lines.append(f"representation dcor2: {self.representation_dcor2:.4f}")
        return "\n".join(lines) + "\n"


def _attempt(errors: dict, attr: str, metric: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except UndefinedMetricError as exc:
        errors.setdefault(attr, {})[metric] = str(exc)
        return None


def evaluate_all(pred: PredictionTable, train=None, config: MetricsConfig | None = None,
                 attributes: Sequence[str] | None = None) -> MetricsReport:
    """Every metric for every attribute, plus means over the defined values."""
    config = MetricsConfig() if config is None else config
    pred = pred.canonical()
    attributes = list(pred.attributes if attributes is None else attributes)
    errors: dict[str, dict[str, str]] = {}
    per_attr = {}
    for a in attributes:
        if a not in pred.labels:
            raise ConfigError(f"prediction table has no columns for {a!r}")
        ap = _attempt(errors, a, "AP", average_precision, pred.scores[a], pred.labels[a],
                      config.ap_ties)
        ap_g = [_attempt(errors, a, f"AP[{g}]", group_ap, pred, a, g, config.ap_ties) for g in (0, 1)]
        if train is None:
            errors.setdefault(a, {})["BA"] = "no training counts supplied"
            ba = None
        elif a not in train.counts:
            errors.setdefault(a, {})["BA"] = "attribute missing from training counts"
            ba = None
        else:
            ba = _attempt(errors, a, "BA", bias_amplification, train, pred, a, config.score_threshold)
        per_attr[a] = {
            "AP": None if ap is None else 100.0 * ap,
            "AP_group": [None if v is None else 100.0 * v for v in ap_g],
            "DEO": None if None in ap_g else 100.0 * deo_from_ap(*ap_g),
            "BA": ba,
            "KL": _attempt(errors, a, "KL", kl_score_divergence, pred, a, config.bins, config.epsilon),
            "dcor2": distance_correlation_sq(pred.scores[a], pred.groups),
            "accuracy_group": [_attempt(errors, a, f"accuracy[{g}]", group_accuracy, pred, a, g,
                                        config.score_threshold) for g in (0, 1)],
        }
    aggregates = {}
    for metric in METRIC_COLUMNS:
        vals = [per_attr[a][metric] for a in attributes if per_attr[a][metric] is not None]
        aggregates[metric] = float(np.mean(vals)) if vals else None
    rep_dcor = None
    if pred.representation is not None:
        rep_dcor = distance_correlation_sq(pred.representation, pred.groups)
    notes = [
        "AP/DEO/BA in percentage points; KL = mean over y of KL(group0 || group1) on "
        "smoothed score histograms; per-attribute dcor2 is between that attribute's "
        "scores and the protected group",
        f"per-group accuracy thresholds scores at {config.score_threshold} (assumed)",
    ]
    return MetricsReport(per_attr, aggregates, {**asdict(config), "protected": pred.protected,
                                                "n_samples": len(pred)},
                         errors, rep_dcor, FORMULA_VERSION, notes)
