"""Attribute-signature discovery by intra-class similarity and inter-class difference.

For one layer of a set of positive seeds ``S_Y`` and negative seeds ``S_N``:

* ``A`` keeps the dimensions where *every* unordered pair of positive seeds
  differs by strictly less than ``intra_threshold``;
* ``B`` keeps the dimensions where *every* (positive, negative) pair differs by
  strictly more than ``inter_threshold``;
* the signature mask is ``C = A | B``.

Both accumulators start from the full dimension set and shrink by
intersection. Seeding them with the empty set makes every result empty.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, InsufficientSeedsError, ParseError
from .fileio import atomic_write_json, sha256_file
from .latent import POSITIVE, LayeredLatent, LayerRange, SeedSet, read_seed_set

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
RECOMMENDED_RANGE = (SQRT2, 2 * SQRT2)


class ThresholdWarning(UserWarning):
    pass


class EmptySignatureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Thresholds:
    intra_threshold: float = 2 * SQRT2
    inter_threshold: float = SQRT2

    def __post_init__(self):
        for name in ("intra_threshold", "inter_threshold"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ConfigError(f"{name} must be a nonnegative number, got {value}")
            lo, hi = RECOMMENDED_RANGE
            if not lo - 1e-12 <= value <= hi + 1e-12:
                warnings.warn(f"{name}={value:g} is outside the recommended range "
                              f"[{lo:.4f}, {hi:.4f}]", ThresholdWarning, stacklevel=3)


@dataclass(frozen=True)
class DimensionMask:
    layer: int
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(sorted({int(d) for d in self.dims}))
        if dims and dims[0] < 0:
            raise ConfigError(f"negative dimension index in mask: {dims[0]}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_bool(cls, layer: int, flags: np.ndarray) -> "DimensionMask":
        return cls(layer, tuple(np.flatnonzero(flags).tolist()))

    def to_bool(self, k: int) -> np.ndarray:
        if self.dims and self.dims[-1] >= k:
            raise ConfigError(f"mask index {self.dims[-1]} out of range for k={k}")
        out = np.zeros(k, dtype=bool)
        out[list(self.dims)] = True
        return out

    def __len__(self):
        return len(self.dims)

    def __contains__(self, d):
        return d in set(self.dims)

    def __or__(self, other: "DimensionMask") -> "DimensionMask":
        return DimensionMask(self.layer, tuple(set(self.dims) | set(other.dims)))

    def __and__(self, other: "DimensionMask") -> "DimensionMask":
        return DimensionMask(self.layer, tuple(set(self.dims) & set(other.dims)))


@dataclass(frozen=True, eq=False)
class AttributeSignature:
    """Per-layer dimension masks plus the donor seeds that supply their values.

    ``value`` is the label this signature assigns: 1 when the donors are
    positive seeds of ``label``, 0 when they are negative seeds.
    """

    label: str
    layer_range: LayerRange
    masks: tuple[DimensionMask, ...]
    donor_pool: SeedSet
    value: int = 1
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = [m.layer for m in self.masks]
        if layers != list(self.layer_range):
            raise ConfigError(f"masks cover layers {layers}, expected {list(self.layer_range)}")
        self.layer_range.check(self.donor_pool.shape[0])
        k = self.donor_pool.shape[1]
        for m in self.masks:
            m.to_bool(k)

    @property
    def key(self) -> tuple[str, int]:
        return (self.label, self.value)

    def cell_mask(self) -> np.ndarray:
        """Boolean ``(R, k)`` array of the (layer, dim) cells this signature writes."""
        layers, k = self.donor_pool.shape
        out = np.zeros((layers, k), dtype=bool)
        for m in self.masks:
            out[m.layer] = m.to_bool(k)
        return out

    def cells(self) -> set[tuple[int, int]]:
        return {(m.layer, d) for m in self.masks for d in m.dims}


def _layer(values: np.ndarray, layer: int) -> np.ndarray:
    if not 0 <= layer < values.shape[-2]:
        raise IndexError(f"layer {layer} out of range for {values.shape[-2]} layers")
    return values[..., layer, :]


def pairwise_similar_dims(a: LayeredLatent, b: LayeredLatent, layer: int, t: float) -> DimensionMask:
    if a.shape != b.shape:
        raise ConfigError(f"latent shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(_layer(a.values, layer) - _layer(b.values, layer))
    return DimensionMask.from_bool(layer, diff < t)


def pairwise_different_dims(a: LayeredLatent, b: LayeredLatent, layer: int, t: float) -> DimensionMask:
    if a.shape != b.shape:
        raise ConfigError(f"latent shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(_layer(a.values, layer) - _layer(b.values, layer))
    return DimensionMask.from_bool(layer, diff > t)


def _intra_flags(pos: np.ndarray, t: float) -> np.ndarray:
    # pos: (n, k). Unordered pairs i < j, scanned one row at a time.
    acc = np.ones(pos.shape[1], dtype=bool)
    for i in range(pos.shape[0] - 1):
        acc &= np.all(np.abs(pos[i] - pos[i + 1:]) < t, axis=0)
    return acc


def _inter_flags(pos: np.ndarray, neg: np.ndarray, t: float) -> np.ndarray:
    acc = np.ones(pos.shape[1], dtype=bool)
    for i in range(pos.shape[0]):
        acc &= np.all(np.abs(pos[i] - neg) > t, axis=0)
    return acc


def intra_class_similarity(pos: SeedSet, layer: int, t: float) -> DimensionMask:
    if len(pos) < 2:
        raise InsufficientSeedsError(f"intra-class similarity needs >= 2 seeds, got {len(pos)}")
    return DimensionMask.from_bool(layer, _intra_flags(_layer(pos.values, layer), t))


def inter_class_difference(pos: SeedSet, neg: SeedSet, layer: int, t: float) -> DimensionMask:
    if len(pos) < 1 or len(neg) < 1:
        raise InsufficientSeedsError("inter-class difference needs nonempty seed sets")
    if pos.shape != neg.shape:
        raise ConfigError(f"seed sets differ in shape: {pos.shape} vs {neg.shape}")
    return DimensionMask.from_bool(
        layer, _inter_flags(_layer(pos.values, layer), _layer(neg.values, layer), t))


def discover(pos: SeedSet, neg: SeedSet, layer_range: LayerRange,
             th: Thresholds | None = None) -> AttributeSignature:
    """Run discovery independently on every layer of ``layer_range``.

    The positive seeds become the donor pool. ``diagnostics`` records
    ``|A|, |B|, |C|`` per layer.
    """
    th = Thresholds() if th is None else th
    if len(pos) < 2:
        raise InsufficientSeedsError(f"discovery needs >= 2 positive seeds, got {len(pos)}")
    if len(neg) < 1:
        raise InsufficientSeedsError("discovery needs >= 1 negative seed")
    if pos.shape != neg.shape:
        raise ConfigError(f"seed sets differ in shape: {pos.shape} vs {neg.shape}")
    layer_range.check(pos.shape[0])

    masks, diag = [], {}
    for layer in layer_range:
        a = intra_class_similarity(pos, layer, th.intra_threshold)
        b = inter_class_difference(pos, neg, layer, th.inter_threshold)
        c = a | b
        masks.append(c)
        diag[str(layer)] = {"intra": len(a), "inter": len(b), "union": len(c)}
        log.debug("layer %d: |A|=%d |B|=%d |C|=%d", layer, len(a), len(b), len(c))
    if all(len(m) == 0 for m in masks):
        warnings.warn(f"signature for {pos.label!r} is empty on every layer of {layer_range}",
                      EmptySignatureWarning, stacklevel=2)
    value = 1 if pos.polarity == POSITIVE else 0
    return AttributeSignature(pos.label, layer_range, tuple(masks), pos, value, diag)


# -- signature files ----------------------------------------------------------

SIGNATURE_FORMAT = "catfair-signature"
SIGNATURE_VERSION = 1


def signature_to_dict(sig: AttributeSignature, donor_path, base_dir=None, extra=None) -> dict:
    donor_path = Path(donor_path)
    ref = os.path.relpath(donor_path, base_dir) if base_dir is not None else str(donor_path)
    out = {
        "format": SIGNATURE_FORMAT,
        "version": SIGNATURE_VERSION,
        "label": sig.label,
        "value": sig.value,
        "layer_range": str(sig.layer_range),
        "latent_shape": list(sig.donor_pool.shape),
        "masks": {str(m.layer): list(m.dims) for m in sig.masks},
        "diagnostics": sig.diagnostics,
        "donor_pool": {"path": ref.replace(os.sep, "/"), "sha256": sha256_file(donor_path),
                       "count": len(sig.donor_pool)},
    }
    if extra:
        out.update(extra)
    return out


def write_signature(path, sig: AttributeSignature, donor_path, extra=None) -> Path:
    path = Path(path)
    return atomic_write_json(path, signature_to_dict(sig, donor_path, path.parent, extra))


def read_signature(path, donor_pool: SeedSet | None = None) -> AttributeSignature:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") != SIGNATURE_FORMAT:
        raise ParseError(f"{path} is not a signature file")
    if donor_pool is None:
        ref = doc["donor_pool"]
        donor_file = (path.parent / ref["path"])
        digest = sha256_file(donor_file)
        if digest != ref["sha256"]:
            raise ParseError(f"donor pool {donor_file} does not match recorded checksum")
        donor_pool = read_seed_set(donor_file)
    lr = LayerRange.parse(doc["layer_range"])
    masks = tuple(DimensionMask(layer, tuple(doc["masks"].get(str(layer), [])))
                  for layer in lr)
    return AttributeSignature(doc["label"], lr, masks, donor_pool, int(doc["value"]),
                              doc.get("diagnostics", {}))


def ground_truth_signature(label: str, donor_pool: SeedSet, layer_range: LayerRange,
                           dims: Iterable[int], value: int = 1) -> AttributeSignature:
    """Signature with the same dims on every layer of the range (for fixtures and tests)."""
    dims = tuple(dims)
    masks = tuple(DimensionMask(layer, dims) for layer in layer_range)
    return AttributeSignature(label, layer_range, masks, donor_pool, value)
