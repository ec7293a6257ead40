"""Attribute assignment on identity seeds and labeled batch synthesis."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .discovery import AttributeSignature
from .errors import ConfigError, SignatureConflictError, UnknownSignatureError
from .fileio import atomic_write_bytes, atomic_write_text
from .latent import LatentConfig, LayeredLatent
from .planner import BalancePlan

ORIGINAL = "original"
SYNTHETIC = "synthetic"


class Generator(Protocol):
    config: LatentConfig
    output_dim: int

    def render(self, latent: LayeredLatent) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class LabeledSample:
    latent: LayeredLatent
    image: np.ndarray
    labels: dict[str, int]
    protected: int
    provenance: str = SYNTHETIC


def _is_member(donor: LayeredLatent, sig: AttributeSignature) -> bool:
    return bool(np.any(np.all(sig.donor_pool.values == donor.values, axis=(1, 2))))


def apply_attribute(identity: LayeredLatent, sig: AttributeSignature,
                    donor: LayeredLatent) -> LayeredLatent:
    """Copy the donor's values into the signature's (layer, dim) cells."""
    if identity.shape != donor.shape or identity.shape != sig.donor_pool.shape:
        raise ConfigError(f"shape mismatch: identity {identity.shape}, donor {donor.shape}, "
                          f"signature {sig.donor_pool.shape}")
    if not _is_member(donor, sig):
        raise ConfigError(f"donor is not in the donor pool of {sig.label!r}")
    mask = sig.cell_mask()
    out = np.array(identity.values)
    out[mask] = donor.values[mask]
    return LayeredLatent(out)


def overlapping_cells(sigs: Sequence[AttributeSignature]) -> list[tuple[int, int]]:
    if len(sigs) < 2:
        return []
    stacked = np.stack([s.cell_mask() for s in sigs])
    layers, dims = np.nonzero(stacked.sum(axis=0) > 1)
    return list(zip(layers.tolist(), dims.tolist()))


def apply_attributes(identity: LayeredLatent, sigs: Sequence[AttributeSignature],
                     donors: Sequence[LayeredLatent]) -> LayeredLatent:
    if len(sigs) != len(donors):
        raise ConfigError("need exactly one donor per signature")
    clash = overlapping_cells(sigs)
    if clash:
        raise SignatureConflictError(
            f"signatures {[s.key for s in sigs]} overlap in {len(clash)} cells, e.g. {clash[:5]}",
            clash)
    out = identity
    for sig, donor in zip(sigs, donors):
        out = apply_attribute(out, sig, donor)
    return out


class SignatureRegistry:
    """Signatures keyed by ``(attribute, assigned value)``."""

    def __init__(self, signatures: Iterable[AttributeSignature] = ()):
        self._sigs: dict[tuple[str, int], AttributeSignature] = {}
        for s in signatures:
            self.add(s)

    def add(self, sig: AttributeSignature) -> None:
        if sig.key in self._sigs:
            raise ConfigError(f"duplicate signature for {sig.key}")
        shapes = {s.donor_pool.shape for s in self._sigs.values()} | {sig.donor_pool.shape}
        if len(shapes) > 1:
            raise ConfigError(f"signatures disagree on latent shape: {sorted(shapes)}")
        self._sigs[sig.key] = sig

    def __getitem__(self, key: tuple[str, int]) -> AttributeSignature:
        try:
            return self._sigs[key]
        except KeyError:
            raise UnknownSignatureError(f"no signature registered for {key[0]}={key[1]}") from None

    def __contains__(self, key):
        return key in self._sigs

    def __len__(self):
        return len(self._sigs)

    def keys(self):
        return self._sigs.keys()

    def conflicts(self, keys: Sequence[tuple[str, int]]) -> list[tuple[int, int]]:
        return overlapping_cells([self[k] for k in keys if k in self._sigs])


def _assignment_key(assignment: Mapping[str, int]) -> int:
    text = json.dumps(sorted(assignment.items()))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def synthesize_batch(plan: BalancePlan, registry: SignatureRegistry, gen: Generator,
                     seed: int = 0, paired: bool = False) -> list[LabeledSample]:
    """Produce exactly ``cell.count`` labeled samples per plan cell, in plan order.

    Each sample's identity seed and donor choices come from a generator seeded
    by ``(seed, sample index)``. With ``paired=True`` the identity stream is
    keyed by the cell's attribute assignment and the within-cell index
    instead, so the two groups' cells with equal assignments share identities.
    Labels come from the plan, never from the generator.
    """
    shape = gen.config.shape
    resolved = []
    for cell in plan.cells:
        keys = [(plan.protected, cell.group), *cell.assignments]
        sigs = [registry[k] for k in keys]
        clash = overlapping_cells(sigs)
        if clash:
            raise SignatureConflictError(f"cell {dict(keys)} uses overlapping signatures", clash)
        if sigs and sigs[0].donor_pool.shape != shape:
            raise ConfigError(f"signatures are {sigs[0].donor_pool.shape}, generator is {shape}")
        resolved.append((cell, sigs))

    samples = []
    index = 0
    for cell, sigs in resolved:
        akey = _assignment_key(cell.assignment)
        for j in range(cell.count):
            rng = np.random.default_rng([seed, index])
            id_rng = np.random.default_rng([seed, akey, j]) if paired else rng
            identity = id_rng.standard_normal(shape)
            out = identity
            for sig in sigs:
                donor = sig.donor_pool.values[rng.integers(len(sig.donor_pool))]
                mask = sig.cell_mask()
                out = np.where(mask, donor, out)
            latent = LayeredLatent(out)
            samples.append(LabeledSample(latent, gen.render(latent), cell.assignment,
                                         cell.group, SYNTHETIC))
            index += 1
    return samples


# -- dataset files ---------------------------------------------------------------

MANIFEST = "manifest.jsonl"
LATENTS = "latents.f32"
IMAGES = "images.f32"
META = "meta.json"


def write_synthetic_dataset(out_dir, samples: Sequence[LabeledSample], protected: str,
                            meta: dict | None = None, append: bool = False) -> Path:
    """Write manifest records plus little-endian float32 latent/image blobs.

    Records carry byte offsets into the blobs. ``append`` extends an existing
    dataset; earlier records and bytes are left unchanged.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = (out_dir / MANIFEST).read_text() if append and (out_dir / MANIFEST).exists() else ""
    latents = (out_dir / LATENTS).read_bytes() if append and (out_dir / LATENTS).exists() else b""
    images = (out_dir / IMAGES).read_bytes() if append and (out_dir / IMAGES).exists() else b""
    start = manifest.count("\n")
    lat_parts, img_parts, lines = [latents], [images], []
    lat_off, img_off = len(latents), len(images)
    for i, s in enumerate(samples):
        lat = np.ascontiguousarray(s.latent.values, dtype="<f4").tobytes()
        img = np.ascontiguousarray(s.image, dtype="<f4").tobytes()
        lines.append(json.dumps({
            "index": start + i, "provenance": s.provenance, "protected": {protected: s.protected},
            "labels": dict(sorted(s.labels.items())), "latent_offset": lat_off,
            "latent_shape": list(s.latent.shape), "image_offset": img_off,
            "image_dim": int(s.image.size),
        }, sort_keys=True))
        lat_parts.append(lat)
        img_parts.append(img)
        lat_off += len(lat)
        img_off += len(img)
    atomic_write_bytes(out_dir / LATENTS, b"".join(lat_parts))
    atomic_write_bytes(out_dir / IMAGES, b"".join(img_parts))
    atomic_write_text(out_dir / MANIFEST, manifest + "".join(line + "\n" for line in lines))
    if meta is not None:
        atomic_write_text(out_dir / META, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out_dir


def read_synthetic_dataset(out_dir) -> tuple[list[dict], np.ndarray, np.ndarray]:
    """Return (records, latents ``(n, R, k)``, images ``(n, m)``) as float32 arrays."""
    out_dir = Path(out_dir)
    records = [json.loads(line) for line in (out_dir / MANIFEST).read_text().splitlines() if line]
    lat = np.frombuffer((out_dir / LATENTS).read_bytes(), dtype="<f4")
    img = np.frombuffer((out_dir / IMAGES).read_bytes(), dtype="<f4")
    if not records:
        return records, np.empty((0, 0, 0), np.float32), np.empty((0, 0), np.float32)
    shape = tuple(records[0]["latent_shape"])
    m = records[0]["image_dim"]
    latents = np.stack([lat[r["latent_offset"] // 4:][:int(np.prod(shape))].reshape(shape)
                        for r in records])
    images = np.stack([img[r["image_offset"] // 4:][:m] for r in records])
    return records, latents, images
