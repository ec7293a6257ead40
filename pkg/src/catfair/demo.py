"""A small self-contained workspace for exercising the CLI end to end.

``write_demo_workspace`` lays out a toy generator spec, attribute seed sets,
an annotation list with a skewed attribute, a prediction file and training
counts. Every file is a deterministic function of ``seed``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .annotations import AnnotationTable, write_annotations
from .latent import LayerRange, write_seed_set
from .metrics import PredictionTable, write_predictions
from .planner import tabulate_counts, write_counts
from .toy import ToyAttribute, ToyGeneratorSpec, toy_seed_sets, write_toy_spec

DEMO_ATTRIBUTES = ("Male", "Blond_Hair")


def demo_toy_spec(seed: int = 0) -> ToyGeneratorSpec:
    return ToyGeneratorSpec(
        4, 64,
        (ToyAttribute("Male", tuple(range(6)), LayerRange(1, 1)),
         ToyAttribute("Blond_Hair", tuple(range(10, 16)), LayerRange(2, 2)),
         ToyAttribute("Smiling", tuple(range(20, 26)), LayerRange(3, 3))),
        noise=0.1, seed=seed)


def demo_annotations(per_group: int = 100) -> AnnotationTable:
    """``per_group`` females (24% blond) and ``per_group`` males (2% blond)."""
    rows = []
    for male, rate in ((0, 0.24), (1, 0.02)):
        blond = int(round(rate * per_group))
        for i in range(per_group):
            rows.append((male, int(i < blond), int(i % 2 == 0)))
    ids = [f"{i + 1:06d}.jpg" for i in range(len(rows))]
    return AnnotationTable(ids, ("Male", "Blond_Hair", "Smiling"), np.array(rows))


def demo_predictions(ann: AnnotationTable, rng: np.random.Generator) -> PredictionTable:
    """Noisy scores that favour females for Blond_Hair, plus a 4-d representation."""
    z = ann.column("Male")
    labels, scores = {}, {}
    for a in ("Blond_Hair", "Smiling"):
        y = ann.column(a).astype(np.int64)
        bias = 0.15 * (1 - z) if a == "Blond_Hair" else 0.0
        s = 0.3 + 0.4 * y + bias + 0.15 * rng.standard_normal(len(y))
        labels[a], scores[a] = y, np.clip(s, 0.0, 1.0)
    rep = np.column_stack([z + 0.5 * rng.standard_normal(len(z)), rng.standard_normal((len(z), 3))])
    return PredictionTable(ann.ids, z, labels, scores, rep, "Male")


def write_demo_workspace(out_dir, seed: int = 0, n_seeds: int = 20) -> dict[str, Path]:
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    spec = demo_toy_spec(seed)
    paths = {"toy_spec": write_toy_spec(out / "toy.json", spec)}
    for name in DEMO_ATTRIBUTES:
        pos, neg = toy_seed_sets(spec, name, n_seeds, n_seeds, rng)
        key = name.lower()
        paths[f"{key}_pos"] = write_seed_set(out / "seeds" / f"{key}_pos.bin", pos)
        paths[f"{key}_neg"] = write_seed_set(out / "seeds" / f"{key}_neg.bin", neg)
    ann = demo_annotations()
    paths["annotations"] = write_annotations(out / "list_attr.txt", ann)
    paths["predictions"] = write_predictions(out / "predictions.csv", demo_predictions(ann, rng))
    paths["train_counts"] = write_counts(out / "train_counts.json",
                                         tabulate_counts(ann, "Male", ["Blond_Hair", "Smiling"]))
    return paths
