"""Layered latent codes, seed sets and seeded sampling.

A latent is an ``R x k`` matrix: one ``k``-dimensional code per generator
resolution layer. Dimension indices are 0-based everywhere in this package.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, EmptyRequestError, ParseError
from .fileio import atomic_write_bytes, atomic_write_text

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class LatentConfig:
    layers: int = 14
    dims_per_layer: int = 512
    rng_seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.dims_per_layer < 1:
            raise ConfigError(f"layers and dims_per_layer must be >= 1, got {self.shape}")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.layers, self.dims_per_layer)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


#: The 256x256 StyleGAN2 profile: 14 style layers of 512 dims.
STYLEGAN2_256 = LatentConfig(14, 512)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LayeredLatent:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise ConfigError(f"latent must be 2-D (layers x dims), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("latent contains non-finite entries")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, LayeredLatent):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.shape, self.values.tobytes()))


@dataclass(frozen=True)
class LayerRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ConfigError(f"invalid layer range {self.lo}:{self.hi}")

    def check(self, layers: int) -> "LayerRange":
        if self.hi >= layers:
            raise ConfigError(f"layer range {self} exceeds {layers} layers")
        return self

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.lo, self.hi + 1))

    def __len__(self):
        return self.hi - self.lo + 1

    def __str__(self):
        return f"{self.lo}:{self.hi}"

    @classmethod
    def parse(cls, text: str) -> "LayerRange":
        try:
            if ":" in text:
                lo, hi = text.split(":", 1)
                return cls(int(lo), int(hi))
            return cls(int(text), int(text))
        except ValueError as exc:
            raise ConfigError(f"cannot parse layer range {text!r}") from exc


@dataclass(frozen=True, eq=False)
class SeedSet:
    """Labeled latents stacked into one ``(n, R, k)`` read-only array."""

    label: str
    polarity: str
    values: np.ndarray

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ConfigError(f"polarity must be {POSITIVE!r} or {NEGATIVE!r}")
        arr = _frozen(self.values)
        if arr.ndim != 3:
            raise ConfigError(f"seed set values must be (n, layers, dims), got {arr.shape}")
        if arr.shape[0] < 1:
            raise EmptyRequestError("seed set needs at least one member")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("seed set contains non-finite entries")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_members(cls, label: str, polarity: str, members: Sequence[LayeredLatent]) -> "SeedSet":
        if not members:
            raise EmptyRequestError("seed set needs at least one member")
        shapes = {m.shape for m in members}
        if len(shapes) != 1:
            raise ConfigError(f"seed members disagree on shape: {sorted(shapes)}")
        return cls(label, polarity, np.stack([m.values for m in members]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def members(self) -> list[LayeredLatent]:
        return [LayeredLatent(v) for v in self.values]

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> LayeredLatent:
        return LayeredLatent(self.values[i])

    def __eq__(self, other):
        if not isinstance(other, SeedSet):
            return NotImplemented
        return (self.label, self.polarity) == (other.label, other.polarity) and (
            self.values.shape == other.values.shape and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.label, self.polarity, self.values.tobytes()))


def sample_identity_seeds(n: int, cfg: LatentConfig, rng: np.random.Generator | None = None,
                          label: str = "identity") -> SeedSet:
    """Draw ``n`` latents with i.i.d. standard normal entries.

    Without an explicit generator the draw is seeded from ``cfg.rng_seed``.
    """
    if n < 1:
        raise EmptyRequestError("requested zero identity seeds")
    rng = cfg.rng() if rng is None else rng
    return SeedSet(label, POSITIVE, rng.standard_normal((n, *cfg.shape)))


def latent_delta(a: LayeredLatent, b: LayeredLatent) -> np.ndarray:
    if a.shape != b.shape:
        raise ConfigError(f"latent shapes differ: {a.shape} vs {b.shape}")
    return np.abs(a.values - b.values)


# -- seed-set files ---------------------------------------------------------

_MAGIC = b"CATSEED\x01"


def _header(seeds: SeedSet) -> dict:
    n, layers, dims = seeds.values.shape
    return {"label": seeds.label, "polarity": seeds.polarity, "layers": layers,
            "dims": dims, "count": n, "dtype": "<f4", "order": "C"}


def seed_set_to_bytes(seeds: SeedSet) -> bytes:
    header = json.dumps(_header(seeds), sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(seeds.values, dtype="<f4").tobytes()
    return _MAGIC + struct.pack("<I", len(header)) + header + payload


def seed_set_from_bytes(data: bytes) -> SeedSet:
    if not data.startswith(_MAGIC):
        raise ParseError("not a seed-set file (bad magic)")
    off = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + hlen])
    off += hlen
    shape = (header["count"], header["layers"], header["dims"])
    expected = int(np.prod(shape)) * 4
    if len(data) - off != expected:
        raise ParseError(f"payload is {len(data) - off} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=off).reshape(shape)
    return SeedSet(header["label"], header["polarity"], values.astype(np.float64))


def write_seed_set(path, seeds: SeedSet) -> Path:
    """Binary container. Entries are stored as float32."""
    return atomic_write_bytes(path, seed_set_to_bytes(seeds))


def read_seed_set(path) -> SeedSet:
    path = Path(path)
    if path.suffix == ".txt":
        return read_seed_set_text(path)
    return seed_set_from_bytes(path.read_bytes())


def write_seed_set_text(path, seeds: SeedSet) -> Path:
    n, layers, dims = seeds.values.shape
    lines = [f"# catfair-seeds label={seeds.label} polarity={seeds.polarity} "
             f"layers={layers} dims={dims}"]
    f32 = seeds.values.astype(np.float32)
    for member in f32:
        lines.append(" | ".join(" ".join(repr(float(v)) for v in row) for row in member))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_seed_set_text(path) -> SeedSet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# catfair-seeds"):
        raise ParseError("missing '# catfair-seeds' header", line=1)
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    layers, dims = int(meta["layers"]), int(meta["dims"])
    members = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rows = [r.split() for r in line.split("|")]
        if len(rows) != layers or any(len(r) != dims for r in rows):
            raise ParseError(f"expected {layers} layers of {dims} values", line=lineno)
        try:
            members.append(np.array(rows, dtype=np.float32))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    if not members:
        raise ParseError("no latents in file")
    return SeedSet(meta["label"], meta["polarity"], np.stack(members).astype(np.float64))
