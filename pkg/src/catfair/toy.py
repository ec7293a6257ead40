"""A ground-truth toy generator and oracle annotator.

Each toy attribute is controlled by a known block of latent cells
(``layers x control_dims``). Rendering mean-pools that block into one feature,
so an attribute is "present" when its pooled value exceeds ``threshold``. The
remaining features are fixed random linear mixtures of the whole latent.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fileio import atomic_write_json
from .latent import NEGATIVE, POSITIVE, LatentConfig, LayeredLatent, LayerRange, SeedSet


@dataclass(frozen=True)
class ToyAttribute:
    name: str
    control_dims: tuple[int, ...]
    layers: LayerRange
    shift: float = 3.0
    jitter: float = 0.1
    threshold: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "control_dims", tuple(sorted(set(self.control_dims))))
        if not self.control_dims:
            raise ConfigError(f"toy attribute {self.name!r} has no control dims")
        if not self.shift > self.threshold > 0:
            raise ConfigError(f"toy attribute {self.name!r} needs shift > threshold > 0")
        if self.jitter < 0:
            raise ConfigError("jitter must be nonnegative")

    def cells(self) -> set[tuple[int, int]]:
        return {(layer, d) for layer in self.layers for d in self.control_dims}


@dataclass(frozen=True)
class ToyGeneratorSpec:
    layers: int
    dims_per_layer: int
    attributes: tuple[ToyAttribute, ...]
    noise: float = 0.1
    n_mixed: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate toy attribute names: {names}")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")
        for a in self.attributes:
            a.layers.check(self.layers)
            if a.control_dims[-1] >= self.dims_per_layer:
                raise ConfigError(f"{a.name}: control dim out of range")
        for i, a in enumerate(self.attributes):
            for b in self.attributes[i + 1:]:
                shared = a.cells() & b.cells()
                if shared:
                    raise ConfigError(f"toy attributes {a.name!r} and {b.name!r} share "
                                      f"control cells {sorted(shared)[:5]}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.layers, self.dims_per_layer)

    @property
    def output_dim(self) -> int:
        return len(self.attributes) + self.n_mixed

    def attribute(self, name: str) -> ToyAttribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    @cached_property
    def mixing(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 0x6D6978])
        size = self.layers * self.dims_per_layer
        return rng.standard_normal((self.n_mixed, size)) / np.sqrt(size)

    def to_dict(self) -> dict:
        return {
            "layers": self.layers, "dims_per_layer": self.dims_per_layer,
            "noise": self.noise, "n_mixed": self.n_mixed, "seed": self.seed,
            "attributes": [
                {**asdict(a), "control_dims": list(a.control_dims), "layers": str(a.layers)}
                for a in self.attributes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ToyGeneratorSpec":
        attrs = tuple(
            ToyAttribute(a["name"], tuple(a["control_dims"]), LayerRange.parse(a["layers"]),
                         a.get("shift", 3.0), a.get("jitter", 0.1), a.get("threshold", 1.5))
            for a in doc["attributes"])
        return cls(doc["layers"], doc["dims_per_layer"], attrs, doc.get("noise", 0.1),
                   doc.get("n_mixed", 8), doc.get("seed", 0))


def write_toy_spec(path, spec: ToyGeneratorSpec) -> Path:
    return atomic_write_json(path, spec.to_dict())


def read_toy_spec(path) -> ToyGeneratorSpec:
    return ToyGeneratorSpec.from_dict(json.loads(Path(path).read_text()))


def _latent_rng(spec: ToyGeneratorSpec, values: np.ndarray) -> np.random.Generator:
    digest = hashlib.blake2b(np.ascontiguousarray(values).tobytes(), digest_size=8).digest()
    return np.random.default_rng([spec.seed, int.from_bytes(digest, "little")])


def pooled_features(values: np.ndarray, spec: ToyGeneratorSpec) -> np.ndarray:
    """Noise-free attribute features: the mean over each attribute's control block."""
    return np.array([values[a.layers.lo:a.layers.hi + 1][:, list(a.control_dims)].mean()
                     for a in spec.attributes])


def toy_render(latent: LayeredLatent, spec: ToyGeneratorSpec,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Render a latent to a feature vector.

    Attribute features come first, in ``spec.attributes`` order, each with
    Gaussian noise of scale ``spec.noise``. Without ``rng`` the noise is seeded
    from the latent itself, so rendering is a pure function of the latent.
    """
    if latent.shape != spec.shape:
        raise ConfigError(f"latent shape {latent.shape} does not match toy spec {spec.shape}")
    rng = _latent_rng(spec, latent.values) if rng is None else rng
    feats = pooled_features(latent.values, spec)
    if spec.noise > 0:
        feats = feats + spec.noise * rng.standard_normal(feats.shape)
    mixed = spec.mixing @ latent.values.ravel()
    return np.concatenate([feats, mixed])


def oracle_annotate(image: np.ndarray, spec: ToyGeneratorSpec) -> dict[str, int]:
    return {a.name: int(image[i] > a.threshold) for i, a in enumerate(spec.attributes)}


class ToyGenerator:
    """:class:`catfair.synthesis.Generator` backed by :func:`toy_render`."""

    def __init__(self, spec: ToyGeneratorSpec):
        self.spec = spec
        self.config = LatentConfig(spec.layers, spec.dims_per_layer, spec.seed)
        self.output_dim = spec.output_dim

    def render(self, latent: LayeredLatent) -> np.ndarray:
        return toy_render(latent, self.spec)

    def annotate(self, image: np.ndarray) -> dict[str, int]:
        return oracle_annotate(image, self.spec)


def toy_seed_sets(spec: ToyGeneratorSpec, name: str, n_pos: int, n_neg: int,
                  rng: np.random.Generator) -> tuple[SeedSet, SeedSet]:
    """Positive and negative attribute seeds with known control cells.

    Every entry is standard normal except the control block, which sits at
    ``+shift`` (positives) or ``-shift`` (negatives) with ``jitter`` spread.
    """
    attr = spec.attribute(name)
    rows = np.arange(attr.layers.lo, attr.layers.hi + 1)
    cols = np.asarray(attr.control_dims)

    def draw(n, sign):
        vals = rng.standard_normal((n, *spec.shape))
        block = np.ix_(np.arange(n), rows, cols)
        vals[block] = sign * attr.shift + attr.jitter * rng.standard_normal((n, rows.size, cols.size))
        return vals

    return (SeedSet(name, POSITIVE, draw(n_pos, 1.0)),
            SeedSet(name, NEGATIVE, draw(n_neg, -1.0)))
