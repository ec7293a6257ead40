"""Per-attribute bias study: positive rates, per-group AP, DEO and taxonomy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


from .annotations import AnnotationTable, normalize_name
from .config import Taxonomy
from .errors import ConfigError, UndefinedMetricError
from .metrics import DASH, PredictionTable, average_precision

UNBIASED, MASCULINITY, FEMININITY, AOI = "unbiased", "masculinity", "femininity", "aoi"


@dataclass(frozen=True)
class AttributeStudyRow:
    attribute: str
    positive_rate: tuple[float, float, float]  # group 0, group 1, overall (%)
    ap: tuple[float | None, float | None, float | None]  # group 0, group 1, overall (%)
    deo: float | None
    taxonomy: str


def classify(attribute: str, deo: float | None, taxonomy: Taxonomy) -> str:
    """``unbiased`` iff DEO is defined and strictly below the cutoff; otherwise
    the configured masculinity/femininity lists, otherwise ``aoi``."""
    if deo is not None and deo < taxonomy.unbiased_deo:
        return UNBIASED
    key = normalize_name(attribute)
    if key in {normalize_name(a) for a in taxonomy.masculinity}:
        return MASCULINITY
    if key in {normalize_name(a) for a in taxonomy.femininity}:
        return FEMININITY
    return AOI


def _ap(scores, labels):
    try:
        return 100.0 * average_precision(scores, labels)
    except UndefinedMetricError:
        return None


def attribute_study(ann: AnnotationTable, pred: PredictionTable, protected: str,
                    attributes: Sequence[str] | None = None,
                    taxonomy: Taxonomy | None = None) -> list[AttributeStudyRow]:
    taxonomy = Taxonomy() if taxonomy is None else taxonomy
    protected = ann.resolve(protected)
    if attributes is None:
        attributes = [a for a in ann.attributes if a != protected]
    else:
        attributes = [ann.resolve(a) for a in attributes]
        if protected in attributes:
            raise ConfigError(f"{protected!r} is the protected attribute, not an attribute of interest")

    pos = {sid: i for i, sid in enumerate(pred.ids)}
    missing = [sid for sid in ann.ids if sid not in pos]
    if missing:
        raise ConfigError(f"prediction table lacks {len(missing)} annotated ids, e.g. {missing[:3]}")
    rows_pred = pred.take(sorted(pos[sid] for sid in ann.ids))
    z = ann.column(protected)

    out = []
    for a in attributes:
        y = ann.column(a)
        rates = tuple(100.0 * float(y[z == g].mean()) if (z == g).any() else 0.0 for g in (0, 1))
        overall = 100.0 * float(y.mean()) if y.size else 0.0
        pred_attr = next((p for p in rows_pred.attributes if normalize_name(p) == normalize_name(a)),
                         None)
        if pred_attr is None:
            aps = (None, None, None)
        else:
            s, lab, g = rows_pred.scores[pred_attr], rows_pred.labels[pred_attr], rows_pred.groups
            aps = (_ap(s[g == 0], lab[g == 0]), _ap(s[g == 1], lab[g == 1]), _ap(s, lab))
        deo = None if aps[0] is None or aps[1] is None else abs(aps[0] - aps[1])
        out.append(AttributeStudyRow(a, (*rates, overall), aps, deo, classify(a, deo, taxonomy)))
    return out


def _fmt(v):
    return DASH if v is None else f"{v:.1f}"


def render_study(rows: Sequence[AttributeStudyRow], group_names=("group 0", "group 1")) -> str:
    header = ["Attribute", f"Rate {group_names[0]}", f"Rate {group_names[1]}", "Rate overall",
              f"AP {group_names[0]}", f"AP {group_names[1]}", "AP overall", "DEO", "Type"]
    body = [[r.attribute, *map(_fmt, r.positive_rate), *map(_fmt, r.ap), _fmt(r.deo), r.taxonomy]
            for r in rows]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def study_to_dicts(rows: Sequence[AttributeStudyRow]) -> list[dict]:
    return [{"attribute": r.attribute, "positive_rate": list(r.positive_rate), "ap": list(r.ap),
             "deo": r.deo, "taxonomy": r.taxonomy} for r in rows]
