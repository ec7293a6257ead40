"""Run configuration: thresholds, layer registry, metric settings, taxonomy.

Config files are TOML with a ``schema_version`` key. Anything omitted falls
back to the defaults below.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .discovery import Thresholds
from .errors import ConfigError
from .latent import LayerRange
from .metrics import MetricsConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

# Style-layer pairs per synthesis resolution for the 14-layer, 256x256 profile.
RESOLUTION_LAYERS = {4: LayerRange(0, 1), 8: LayerRange(2, 3), 16: LayerRange(4, 5),
                     32: LayerRange(6, 7), 64: LayerRange(8, 9), 128: LayerRange(10, 11),
                     256: LayerRange(12, 13)}


def _span(lo_res: int, hi_res: int) -> LayerRange:
    return LayerRange(RESOLUTION_LAYERS[lo_res].lo, RESOLUTION_LAYERS[hi_res].hi)


MASCULINITY = ("5_o_Clock_Shadow", "Bald", "Bushy_Eyebrows", "Goatee", "Mustache",
               "Receding_Hairline", "Sideburns", "Wearing_Necktie")
FEMININITY = ("Arched_Eyebrows", "Heavy_Makeup", "No_Beard", "Oval_Face", "Rosy_Cheeks",
              "Wearing_Earrings", "Wearing_Lipstick", "Wearing_Necklace", "Attractive")
EXCLUSIVE_FAMILIES = (("Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair"),
                      ("Straight_Hair", "Wavy_Hair"))


def default_layer_registry() -> dict[str, LayerRange]:
    reg = {}
    for a in ("Chubby", "Big_Nose", "Pointy_Nose", "High_Cheekbones", "Double_Chin"):
        reg[a] = _span(8, 8)
    for a in ("Bags_Under_Eyes", "Wavy_Hair", "Straight_Hair"):
        reg[a] = _span(16, 16)
    for a in ("Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair"):
        reg[a] = _span(32, 64)
    reg["Pale_Skin"] = _span(128, 256)
    for a in (*MASCULINITY, *FEMININITY, "Male"):
        reg[a] = _span(8, 16)
    return reg


@dataclass(frozen=True)
class Taxonomy:
    masculinity: tuple[str, ...] = MASCULINITY
    femininity: tuple[str, ...] = FEMININITY
    unbiased_deo: float = 5.0


@dataclass(frozen=True)
class CatConfig:
    layers: int = 14
    dims_per_layer: int = 512
    thresholds: Thresholds = field(default_factory=Thresholds)
    layer_registry: dict = field(default_factory=default_layer_registry)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    taxonomy: Taxonomy = field(default_factory=Taxonomy)
    exclusive_families: tuple = EXCLUSIVE_FAMILIES

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "latent": {"layers": self.layers, "dims_per_layer": self.dims_per_layer},
            "thresholds": asdict(self.thresholds),
            "layer_registry": {a: str(r) for a, r in sorted(self.layer_registry.items())},
            "metrics": asdict(self.metrics),
            "taxonomy": {"masculinity": list(self.taxonomy.masculinity),
                         "femininity": list(self.taxonomy.femininity),
                         "unbiased_deo": self.taxonomy.unbiased_deo},
            "exclusive_families": [list(f) for f in self.exclusive_families],
        }


def load_config(path=None) -> CatConfig:
    if path is None:
        return CatConfig()
    try:
        doc = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    unknown = set(doc) - {"schema_version", "latent", "thresholds", "layer_registry", "metrics",
                          "taxonomy", "exclusive_families"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    cfg = CatConfig()
    latent = doc.get("latent", {})
    th = doc.get("thresholds", {})
    registry = dict(cfg.layer_registry)
    registry.update({a: LayerRange.parse(str(r)) for a, r in doc.get("layer_registry", {}).items()})
    tax = doc.get("taxonomy", {})
    try:
        return replace(
            cfg,
            layers=latent.get("layers", cfg.layers),
            dims_per_layer=latent.get("dims_per_layer", cfg.dims_per_layer),
            thresholds=Thresholds(th.get("intra_threshold", cfg.thresholds.intra_threshold),
                                  th.get("inter_threshold", cfg.thresholds.inter_threshold)),
            layer_registry=registry,
            metrics=MetricsConfig(**{**asdict(cfg.metrics), **doc.get("metrics", {})}),
            taxonomy=Taxonomy(tuple(tax.get("masculinity", cfg.taxonomy.masculinity)),
                              tuple(tax.get("femininity", cfg.taxonomy.femininity)),
                              tax.get("unbiased_deo", cfg.taxonomy.unbiased_deo)),
            exclusive_families=tuple(tuple(f) for f in
                                     doc.get("exclusive_families", cfg.exclusive_families)),
        )
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
