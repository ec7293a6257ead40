"""Binary attribute annotation tables (CelebA ``list_attr_celeba.txt`` layout)."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError
from .fileio import atomic_write_text

CELEBA_ATTRIBUTES = (
    "5_o_Clock_Shadow", "Arched_Eyebrows", "Attractive", "Bags_Under_Eyes", "Bald", "Bangs",
    "Big_Lips", "Big_Nose", "Black_Hair", "Blond_Hair", "Blurry", "Brown_Hair",
    "Bushy_Eyebrows", "Chubby", "Double_Chin", "Eyeglasses", "Goatee", "Gray_Hair",
    "Heavy_Makeup", "High_Cheekbones", "Male", "Mouth_Slightly_Open", "Mustache",
    "Narrow_Eyes", "No_Beard", "Oval_Face", "Pale_Skin", "Pointy_Nose", "Receding_Hairline",
    "Rosy_Cheeks", "Sideburns", "Smiling", "Straight_Hair", "Wavy_Hair", "Wearing_Earrings",
    "Wearing_Hat", "Wearing_Lipstick", "Wearing_Necklace", "Wearing_Necktie", "Young",
)

_TOKENS = {"1": 1, "+1": 1, "-1": 0, "0": 0}


def normalize_name(name: str) -> str:
    """Case- and punctuation-insensitive key: ``Blond_Hair`` == ``BlondHair`` == ``blond hair``."""
    return re.sub(r"[^0-9a-z]", "", name.lower())


@dataclass(frozen=True, eq=False)
class AnnotationTable:
    ids: tuple[str, ...]
    attributes: tuple[str, ...]
    values: np.ndarray  # (n, a) in {0, 1}

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        vals = np.array(self.values, dtype=np.int8).reshape(len(self.ids), len(self.attributes))
        if not np.isin(vals, (0, 1)).all():
            raise ConfigError("annotation values must be binary")
        if len(set(self.attributes)) != len(self.attributes):
            raise ConfigError("duplicate attribute names")
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("duplicate image ids")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, AnnotationTable):
            return NotImplemented
        return (self.ids == other.ids and self.attributes == other.attributes
                and np.array_equal(self.values, other.values))

    @property
    def is_celeba(self) -> bool:
        return set(self.attributes) == set(CELEBA_ATTRIBUTES)

    def resolve(self, name: str) -> str:
        """Map a user-supplied attribute name onto a column name."""
        if name in self.attributes:
            return name
        key = normalize_name(name)
        hits = [a for a in self.attributes if normalize_name(a) == key]
        if len(hits) != 1:
            raise ConfigError(f"unknown attribute column {name!r}")
        return hits[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.attributes.index(self.resolve(name))]

    def take(self, rows: Sequence[int]) -> "AnnotationTable":
        rows = np.asarray(rows, dtype=np.int64)
        return AnnotationTable([self.ids[i] for i in rows], self.attributes, self.values[rows])


def _split(line: str) -> list[str]:
    return [t.strip() for t in line.split(",")] if "," in line else line.split()


def parse_annotations(path) -> AnnotationTable:
    """Read a CelebA-style attribute list.

    Accepted layouts: an optional leading row-count line, then a header of
    attribute names (optionally led by an id column name), then one row per
    image: ``<id> v1 v2 ...`` with values in {-1, +1} or {0, 1}.
    """
    lines = [(i, ln) for i, ln in enumerate(Path(path).read_text().splitlines(), start=1)
             if ln.strip()]
    if not lines:
        raise ParseError("empty annotation file")
    declared = None
    first_no, first = lines[0]
    if re.fullmatch(r"\s*\d+\s*", first):
        declared = int(first)
        lines = lines[1:]
    if not lines:
        raise ParseError("missing attribute header", line=first_no)
    header_no, header_line = lines[0]
    header = _split(header_line)
    rows = lines[1:]
    if rows and len(_split(rows[0][1])) == len(header):
        header = header[1:]  # header names the id column
    width = len(header) + 1

    ids, values, seen_tokens, seen_ids = [], [], set(), set()
    for lineno, line in rows:
        toks = _split(line)
        if len(toks) != width:
            raise ParseError(f"expected {width} fields, found {len(toks)}", line=lineno)
        row = []
        for tok in toks[1:]:
            if tok not in _TOKENS:
                raise ParseError(f"unknown value token {tok!r}", line=lineno)
            seen_tokens.add(tok.lstrip("+"))
            row.append(_TOKENS[tok])
        if toks[0] in seen_ids:
            raise ParseError(f"duplicate image id {toks[0]!r}", line=lineno)
        seen_ids.add(toks[0])
        ids.append(toks[0])
        values.append(row)
    if {"-1", "0"} <= seen_tokens:
        raise ParseError("file mixes -1 and 0 as negative values")
    if declared is not None and declared != len(ids):
        raise ParseError(f"header declares {declared} rows, found {len(ids)}", line=first_no)
    try:
        return AnnotationTable(ids, header, np.array(values, dtype=np.int8).reshape(len(ids), len(header)))
    except ConfigError as exc:
        raise ParseError(str(exc), line=header_no) from exc


def format_annotations(table: AnnotationTable) -> str:
    out = [str(len(table)), " ".join(table.attributes)]
    signed = np.where(table.values == 1, "1", "-1")
    for img, row in zip(table.ids, signed):
        out.append(" ".join([img, *(f"{v:>2}" for v in row)]))
    return "\n".join(out) + "\n"


def write_annotations(path, table: AnnotationTable) -> Path:
    """Write in CelebA layout with values as -1 / 1."""
    return atomic_write_text(path, format_annotations(table))
