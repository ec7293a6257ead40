"""Command-line entry point: ``catfair {discover,plan,synthesize,evaluate,stats}``.

Every artifact embeds the configuration and seed that produced it and is
written atomically. Two invocations writing the same ``--out`` concurrently
are not supported.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .annotations import parse_annotations
from .config import CatConfig, load_config
from .discovery import Thresholds, discover, read_signature, write_signature
from .errors import CatError
from .fileio import atomic_write_json, atomic_write_text, sha256_file
from .latent import LayerRange, read_seed_set
from .metrics import MetricsConfig, evaluate_all, read_predictions
from .planner import (SAME_SIZE, SUPPLEMENT, plan_supplement, read_counts, read_plan,
                      tabulate_counts, write_plan)
from .study import attribute_study, render_study, study_to_dicts
from .synthesis import SignatureRegistry, synthesize_batch, write_synthetic_dataset
from .toy import ToyGenerator, read_toy_spec

log = logging.getLogger("catfair")


def _provenance(args, cfg: CatConfig, inputs: dict[str, str]) -> dict:
    return {
        "catfair_version": __version__,
        "command": args.command,
        "rng_seed": args.rng_seed,
        "config": cfg.to_dict(),
        "inputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(inputs.items())},
    }


def _echo(args, cfg: CatConfig) -> None:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    log.info("command: %s", json.dumps(flags, default=str, sort_keys=True))
    log.info("config: %s", json.dumps(cfg.to_dict(), sort_keys=True))


def cmd_discover(args, cfg: CatConfig) -> None:
    pos, neg = read_seed_set(args.pos), read_seed_set(args.neg)
    if args.layers:
        layers = LayerRange.parse(args.layers)
    elif pos.label in cfg.layer_registry:
        layers = cfg.layer_registry[pos.label]
    else:
        raise CatError(f"no --layers given and {pos.label!r} is not in the layer registry")
    th = Thresholds(args.intra if args.intra is not None else cfg.thresholds.intra_threshold,
                    args.inter if args.inter is not None else cfg.thresholds.inter_threshold)
    sig = discover(pos, neg, layers, th)
    prov = _provenance(args, cfg, {"pos": args.pos, "neg": args.neg})
    prov["thresholds"] = {"intra_threshold": th.intra_threshold,
                          "inter_threshold": th.inter_threshold}
    write_signature(args.out, sig, args.pos, extra={"provenance": prov})
    for layer, d in sig.diagnostics.items():
        log.info("layer %s: |A|=%d |B|=%d |C|=%d", layer, d["intra"], d["inter"], d["union"])


def cmd_plan(args, cfg: CatConfig) -> None:
    ann = parse_annotations(args.annotations)
    aoi = args.aoi or []
    ct = tabulate_counts(ann, args.protected, aoi)
    plan = plan_supplement(ct, args.mode, ann=ann, joint=args.joint, seed=args.rng_seed,
                           exclusive_families=cfg.exclusive_families)
    write_plan(args.out, plan, extra={"provenance": _provenance(args, cfg,
                                                                {"annotations": args.annotations})})
    log.info("planned %d synthetic samples in %d cells", plan.total, len(plan.cells))


def cmd_synthesize(args, cfg: CatConfig) -> None:
    plan = read_plan(args.plan)
    registry = SignatureRegistry(read_signature(p) for p in args.signatures)
    gen = ToyGenerator(read_toy_spec(args.toy_spec))
    samples = synthesize_batch(plan, registry, gen, seed=args.rng_seed, paired=args.paired)
    inputs = {"plan": args.plan, "toy_spec": args.toy_spec}
    inputs.update({f"signature_{i}": p for i, p in enumerate(args.signatures)})
    meta = _provenance(args, cfg, inputs)
    meta["paired"] = args.paired
    meta["count"] = len(samples)
    write_synthetic_dataset(args.out, samples, plan.protected, meta)
    log.info("wrote %d samples to %s", len(samples), args.out)


def cmd_evaluate(args, cfg: CatConfig) -> None:
    pred = read_predictions(args.pred)
    train = read_counts(args.train_counts) if args.train_counts else None
    mc = cfg.metrics
    mc = MetricsConfig(args.bins or mc.bins, args.epsilon or mc.epsilon,
                       mc.score_threshold, args.ap_ties or mc.ap_ties)
    report = evaluate_all(pred, train, mc)
    inputs = {"pred": args.pred}
    if args.train_counts:
        inputs["train_counts"] = args.train_counts
    doc = report.to_dict()
    doc["provenance"] = _provenance(args, cfg, inputs)
    atomic_write_json(args.out, doc)
    table = report.render_table()
    if args.table_out:
        atomic_write_text(args.table_out, table)
    sys.stdout.write(table)


def cmd_stats(args, cfg: CatConfig) -> None:
    ann = parse_annotations(args.annotations)
    protected = ann.resolve(args.protected)
    aoi = args.aoi if args.aoi else [a for a in ann.attributes if a != protected]
    ct = tabulate_counts(ann, protected, aoi)
    doc = ct.to_dict()
    doc["provenance"] = _provenance(args, cfg, {"annotations": args.annotations})
    atomic_write_json(args.out, doc)
    if args.pred:
        if not args.study_out:
            raise CatError("--pred needs --study-out")
        rows = attribute_study(ann, read_predictions(args.pred), protected, aoi, cfg.taxonomy)
        names = (f"not {protected}", protected)
        atomic_write_text(args.study_out, render_study(rows, names))
        sys.stdout.write(render_study(rows, names))
        atomic_write_json(Path(args.study_out).with_suffix(".json"),
                          {"protected": protected, "rows": study_to_dicts(rows)})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rng-seed", type=int, default=0, help="seed for every random draw")
    common.add_argument("--config", help="TOML config file (schema_version = 1)")
    common.add_argument("--out", required=True, help="output artifact path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="catfair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", parents=[common], help="find an attribute signature")
    p.add_argument("--pos", required=True, help="seed-set file with the attribute")
    p.add_argument("--neg", required=True, help="seed-set file without the attribute")
    p.add_argument("--layers", help="layer range lo:hi (default: config layer registry)")
    p.add_argument("--intra", type=float, help="intra-class threshold")
    p.add_argument("--inter", type=float, help="inter-class threshold")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("plan", parents=[common], help="plan a balanced synthetic supplement")
    p.add_argument("--annotations", required=True)
    p.add_argument("--protected", required=True)
    p.add_argument("--aoi", action="append", help="attribute of interest (repeatable)")
    p.add_argument("--mode", choices=(SUPPLEMENT, SAME_SIZE), default=SUPPLEMENT)
    p.add_argument("--joint", action="store_true", help="balance joint label vectors (<= 3 AOIs)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("synthesize", parents=[common], help="synthesize a planned dataset")
    p.add_argument("--plan", required=True)
    p.add_argument("--signatures", nargs="+", required=True)
    p.add_argument("--toy-spec", required=True, help="toy generator spec (JSON)")
    p.add_argument("--paired", action="store_true", help="share identities across groups")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", parents=[common], help="fairness metrics for predictions")
    p.add_argument("--pred", required=True, help="prediction CSV")
    p.add_argument("--train-counts", help="count-table JSON of the training set (for BA)")
    p.add_argument("--bins", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--ap-ties", choices=("stable", "pessimistic"))
    p.add_argument("--table-out", help="also write the aligned text table here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", parents=[common], help="count tables and attribute study")
    p.add_argument("--annotations", required=True)
    p.add_argument("--protected", required=True)
    p.add_argument("--aoi", action="append")
    p.add_argument("--pred", help="prediction CSV for the per-attribute AP/DEO study")
    p.add_argument("--study-out", help="text table of the attribute study")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not 0 <= args.rng_seed < 2**64:
        log.error("--rng-seed must be a 64-bit unsigned integer")
        return 2
    try:
        cfg = load_config(args.config)
        _echo(args, cfg)
        args.func(args, cfg)
    except (CatError, OSError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
