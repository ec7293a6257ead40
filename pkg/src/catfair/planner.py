"""Count tables, fairness-criteria checks and balance plans.

Groups are indexed by the value of the protected attribute (0 or 1) and
labels by the attribute value, so ``counts[attr][g, y]`` is the number of
samples in group ``g`` with label ``y``. Gaps are always reported as
``group 0 - group 1``.

Training-set balance is checked as count equalities per attribute:

* demographic parity:  equal group totals;
* equal opportunity:   ``n(0, 1) == n(1, 1)``;
* equalized odds:      additionally ``n(0, 0) == n(1, 0)``.
"""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .annotations import AnnotationTable
from .errors import ConfigError, ParseError
from .fileio import atomic_write_json

log = logging.getLogger(__name__)

SUPPLEMENT = "supplement"
SAME_SIZE = "same_size"
MAX_JOINT = 3


@dataclass(frozen=True, eq=False)
class CountTable:
    protected: str
    group_totals: np.ndarray
    counts: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        totals = np.asarray(self.group_totals, dtype=np.int64).reshape(2)
        if (totals < 0).any():
            raise ConfigError("group totals must be nonnegative")
        counts = {}
        for attr, c in self.counts.items():
            c = np.asarray(c, dtype=np.int64).reshape(2, 2)
            if (c < 0).any():
                raise ConfigError(f"{attr}: counts must be nonnegative")
            if not np.array_equal(c.sum(axis=1), totals):
                raise ConfigError(f"{attr}: per-group counts {c.sum(axis=1).tolist()} do not sum "
                                  f"to group totals {totals.tolist()}")
            counts[attr] = c
        object.__setattr__(self, "group_totals", totals)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_quads(cls, protected: str, quads: Mapping[str, Sequence[int]],
                   group_totals: Sequence[int] | None = None) -> "CountTable":
        """Build from ``(n(0,Y), n(0,~Y), n(1,Y), n(1,~Y))`` per attribute."""
        counts = {a: np.array([[q[1], q[0]], [q[3], q[2]]]) for a, q in quads.items()}
        if group_totals is None:
            if not counts:
                raise ConfigError("group totals are required when no attribute is given")
            group_totals = next(iter(counts.values())).sum(axis=1)
        return cls(protected, group_totals, counts)

    def quad(self, attr: str) -> tuple[int, int, int, int]:
        c = self.counts[attr]
        return (int(c[0, 1]), int(c[0, 0]), int(c[1, 1]), int(c[1, 0]))

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(self.counts)

    def restrict(self, attributes: Iterable[str]) -> "CountTable":
        return CountTable(self.protected, self.group_totals, {a: self.counts[a] for a in attributes})

    def __eq__(self, other):
        if not isinstance(other, CountTable):
            return NotImplemented
        return (self.protected == other.protected
                and np.array_equal(self.group_totals, other.group_totals)
                and self.counts.keys() == other.counts.keys()
                and all(np.array_equal(self.counts[a], other.counts[a]) for a in self.counts))

    def to_dict(self) -> dict:
        return {"format": "catfair-counts", "version": 1, "protected": self.protected,
                "group_totals": self.group_totals.tolist(),
                "counts": {a: c.tolist() for a, c in self.counts.items()}}

    @classmethod
    def from_dict(cls, doc: dict) -> "CountTable":
        if doc.get("format") != "catfair-counts":
            raise ParseError("not a count-table document")
        return cls(doc["protected"], doc["group_totals"], doc.get("counts", {}))


def write_counts(path, ct: CountTable) -> Path:
    return atomic_write_json(path, ct.to_dict())


def read_counts(path) -> CountTable:
    return CountTable.from_dict(json.loads(Path(path).read_text()))


def tabulate_counts(ann: AnnotationTable, protected: str, aoi: Sequence[str] = (),
                    rows: Sequence[int] | None = None) -> CountTable:
    protected = ann.resolve(protected)
    aoi = [ann.resolve(a) for a in aoi]
    if protected in aoi:
        raise ConfigError("the protected attribute cannot also be an attribute of interest")
    z = ann.column(protected).astype(np.int64)
    sel = np.arange(len(ann)) if rows is None else np.asarray(rows, dtype=np.int64)
    z = z[sel]
    totals = np.bincount(z, minlength=2)
    counts = {}
    for a in aoi:
        y = ann.column(a).astype(np.int64)[sel]
        counts[a] = np.bincount(2 * z + y, minlength=4).reshape(2, 2)
    return CountTable(protected, totals, counts)


# -- criteria -------------------------------------------------------------------

@dataclass(frozen=True)
class AttributeCriteria:
    dp_ok: bool
    eo_ok: bool
    eodds_ok: bool
    deficits: dict  # {"positive": n(0,1)-n(1,1), "negative": n(0,0)-n(1,0), "total": ...}


@dataclass(frozen=True)
class CriteriaReport:
    dp_ok: bool
    total_gap: int
    attributes: dict[str, AttributeCriteria]

    @property
    def all_eodds(self) -> bool:
        return all(c.eodds_ok for c in self.attributes.values())


def check_criteria(ct: CountTable) -> CriteriaReport:
    total_gap = int(ct.group_totals[0] - ct.group_totals[1])
    per = {}
    for a, c in ct.counts.items():
        pos_gap = int(c[0, 1] - c[1, 1])
        neg_gap = int(c[0, 0] - c[1, 0])
        eo = pos_gap == 0
        per[a] = AttributeCriteria(total_gap == 0, eo, eo and neg_gap == 0,
                                   {"positive": pos_gap, "negative": neg_gap, "total": total_gap})
    return CriteriaReport(total_gap == 0, total_gap, per)


# -- plans ----------------------------------------------------------------------

@dataclass(frozen=True)
class PlanCell:
    group: int
    assignments: tuple[tuple[str, int], ...]
    count: int

    def __post_init__(self):
        if self.group not in (0, 1):
            raise ConfigError("plan cell group must be 0 or 1")
        if self.count < 0:
            raise ConfigError("plan cell count must be nonnegative")
        object.__setattr__(self, "assignments", tuple(sorted((a, int(v)) for a, v in
                                                             dict(self.assignments).items())))

    @property
    def assignment(self) -> dict[str, int]:
        return dict(self.assignments)


@dataclass(frozen=True, eq=False)
class BalancePlan:
    mode: str
    protected: str
    attributes: tuple[str, ...]
    cells: tuple[PlanCell, ...]
    base: CountTable
    joint: bool = False
    retained_original: dict[int, tuple[int, ...]] | None = None
    seed: int | None = None

    @property
    def total(self) -> int:
        return sum(c.count for c in self.cells)

    def __eq__(self, other):
        if not isinstance(other, BalancePlan):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        retained = None
        if self.retained_original is not None:
            retained = {str(g): list(map(int, v)) for g, v in sorted(self.retained_original.items())}
        return {
            "format": "catfair-plan", "version": 1, "mode": self.mode,
            "protected": self.protected, "attributes": list(self.attributes),
            "joint": self.joint, "seed": self.seed,
            "cells": [{"group": c.group, "assignments": dict(c.assignments), "count": c.count}
                      for c in self.cells],
            "total": self.total,
            "base_counts": self.base.to_dict(),
            "retained_original": retained,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BalancePlan":
        if doc.get("format") != "catfair-plan":
            raise ParseError("not a plan document")
        if doc.get("version") != 1:
            raise ParseError(f"unsupported plan version {doc.get('version')}")
        retained = doc.get("retained_original")
        if retained is not None:
            retained = {int(g): tuple(v) for g, v in retained.items()}
        cells = tuple(PlanCell(c["group"], tuple(c["assignments"].items()), c["count"])
                      for c in doc["cells"])
        return cls(doc["mode"], doc["protected"], tuple(doc["attributes"]), cells,
                   CountTable.from_dict(doc["base_counts"]), doc.get("joint", False),
                   retained, doc.get("seed"))


def write_plan(path, plan: BalancePlan, extra: dict | None = None) -> Path:
    doc = plan.to_dict()
    if extra:
        doc.update(extra)
    return atomic_write_json(path, doc)


def read_plan(path) -> BalancePlan:
    return BalancePlan.from_dict(json.loads(Path(path).read_text()))


def apply_plan(plan: BalancePlan, attribute: str | None = None) -> CountTable:
    """Counts after adding the plan's synthetic samples to ``plan.base``.

    With ``attribute`` the result covers that attribute only and counts only
    cells that assign it (plus the retained base); without it, every cell is
    added to the group totals and only attributes assigned by *every* cell are
    kept.
    """
    base = plan.base
    attrs = [attribute] if attribute is not None else [
        a for a in base.attributes if all(a in c.assignment for c in plan.cells)]
    counts = {a: base.counts[a].copy() for a in attrs}
    totals = base.group_totals.copy() if attribute is None else base.counts[attribute].sum(axis=1)
    for cell in plan.cells:
        assignment = cell.assignment
        if attribute is not None and attribute not in assignment:
            continue
        totals[cell.group] += cell.count
        for a in attrs:
            counts[a][cell.group, assignment[a]] += cell.count
    return CountTable(base.protected, totals, counts)


def _gap_cells(gaps: np.ndarray, assignments: Sequence[dict]) -> list[PlanCell]:
    cells = []
    for gap, assignment in zip(gaps, assignments):
        gap = int(gap)
        if gap > 0:
            cells.append(PlanCell(1, tuple(assignment.items()), gap))
        elif gap < 0:
            cells.append(PlanCell(0, tuple(assignment.items()), -gap))
    return cells


def _joint_counts(ann: AnnotationTable, protected: str, attrs: Sequence[str],
                  rows: np.ndarray) -> tuple[np.ndarray, list[dict]]:
    """``(2, 2**m)`` counts of each joint label vector per group, in lexicographic order."""
    z = ann.column(protected).astype(np.int64)[rows]
    code = np.zeros(rows.size, dtype=np.int64)
    for a in attrs:
        code = 2 * code + ann.column(a).astype(np.int64)[rows]
    m = len(attrs)
    joint = np.bincount(2 ** m * z + code, minlength=2 * 2 ** m).reshape(2, 2 ** m)
    vectors = [dict(zip(attrs, bits)) for bits in itertools.product((0, 1), repeat=m)]
    return joint, vectors


def _forbidden(assignment: dict, families: Sequence[Sequence[str]]) -> bool:
    return any(sum(assignment.get(a, 0) for a in fam) > 1 for fam in families)


def _check_families(cells: Sequence[PlanCell], families) -> None:
    for cell in cells:
        if _forbidden(cell.assignment, families):
            raise ConfigError(f"plan would assign several members of one mutually exclusive "
                              f"family in one cell: {cell.assignment}")


def resampling_baseline(ann: AnnotationTable, protected: str,
                        rng: np.random.Generator) -> dict[int, np.ndarray]:
    """Undersample the larger group uniformly to the size of the smaller one."""
    z = ann.column(protected)
    idx = {g: np.flatnonzero(z == g) for g in (0, 1)}
    m = min(idx[0].size, idx[1].size)
    if m == 0:
        raise ConfigError(f"protected attribute {protected!r} has an empty group")
    out = {}
    for g in (0, 1):
        if idx[g].size == m:
            out[g] = idx[g]
        else:
            out[g] = np.sort(rng.choice(idx[g], size=m, replace=False))
    return out


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    if total == 0 or weights.sum() == 0:
        out = np.zeros(weights.size, dtype=np.int64)
        if total:
            out[0] = total
        return out
    exact = total * weights / weights.sum()
    out = np.floor(exact).astype(np.int64)
    short = total - int(out.sum())
    order = np.argsort(-(exact - out), kind="stable")
    out[order[:short]] += 1
    return out


def plan_supplement(ct: CountTable, mode: str = SUPPLEMENT, *, ann: AnnotationTable | None = None,
                    joint: bool = False, seed: int | None = None,
                    exclusive_families: Sequence[Sequence[str]] = (),
                    registry=None) -> BalancePlan:
    """Plan synthetic samples that balance ``ct`` under equalized odds.

    ``supplement`` only adds samples: for every attribute and label, the
    smaller group receives the gap. With no attributes it balances group
    totals. ``same_size`` keeps a seeded half of the group-balanced original
    and tops each group back up to the balanced size with synthetic samples;
    it needs the annotation table to choose the retained rows.

    ``joint=True`` (at most three attributes, needs ``ann``) balances joint
    label vectors instead of marginals. If ``registry`` reports overlapping
    signatures for the joint assignments, planning falls back to marginal.
    """
    if mode not in (SUPPLEMENT, SAME_SIZE):
        raise ConfigError(f"unknown plan mode {mode!r}")
    attrs = list(ct.attributes)
    if joint:
        if len(attrs) > MAX_JOINT:
            raise ConfigError(f"joint planning supports at most {MAX_JOINT} attributes")
        if ann is None:
            raise ConfigError("joint planning needs the annotation table")
        if registry is not None and len(attrs) > 1:
            vectors = itertools.product((0, 1), repeat=len(attrs))
            if any(registry.conflicts(list(zip(attrs, v))) for v in vectors):
                warnings.warn(f"signatures for {attrs} overlap; planning attributes marginally",
                              stacklevel=2)
                joint = False
    if mode == SAME_SIZE:
        return _plan_same_size(ct, ann, attrs, joint, seed, exclusive_families)

    if joint and attrs:
        joint_counts, vectors = _joint_counts(ann, ct.protected, attrs, np.arange(len(ann)))
        cells = _gap_cells(joint_counts[0] - joint_counts[1], vectors)
    elif attrs:
        cells = []
        for a in attrs:
            c = ct.counts[a]
            cells += _gap_cells(c[0, ::-1] - c[1, ::-1], [{a: 1}, {a: 0}])
    else:
        cells = _gap_cells(np.array([ct.group_totals[0] - ct.group_totals[1]]), [{}])
    _check_families(cells, exclusive_families)
    return BalancePlan(SUPPLEMENT, ct.protected, tuple(attrs), tuple(cells), ct,
                       joint=bool(joint and attrs), seed=seed)


def _plan_same_size(ct, ann, attrs, joint, seed, families) -> BalancePlan:
    if ann is None:
        raise ConfigError("same_size planning needs the annotation table")
    if len(attrs) > 1 and not joint:
        raise ConfigError("same_size with several attributes needs joint planning")
    rng = np.random.default_rng(seed)
    balanced = resampling_baseline(ann, ct.protected, rng)
    m = balanced[0].size
    retained = {g: np.sort(rng.choice(balanced[g], size=m // 2, replace=False)) for g in (0, 1)}
    rows = np.concatenate([retained[0], retained[1]])
    base = tabulate_counts(ann, ct.protected, attrs, rows)

    joint_counts, vectors = _joint_counts(ann, ct.protected, attrs, rows)
    full, _ = _joint_counts(ann, ct.protected, attrs, np.concatenate([balanced[0], balanced[1]]))
    allowed = np.array([not _forbidden(v, families) for v in vectors])
    floor = joint_counts.max(axis=0)
    spare = m - int(floor.sum())
    extra = _largest_remainder(spare, full.sum(axis=0) * allowed)
    target = floor + extra
    cells = []
    for g in (0, 1):
        need = target - joint_counts[g]
        for n, v in zip(need, vectors):
            if n > 0:
                cells.append(PlanCell(g, tuple(v.items()), int(n)))
    _check_families(cells, families)
    return BalancePlan(SAME_SIZE, ct.protected, tuple(attrs), tuple(cells), base,
                       joint=bool(joint and attrs), retained_original=
                       {g: tuple(int(i) for i in retained[g]) for g in (0, 1)}, seed=seed)
