"""Drive every CLI subcommand over a demo workspace."""

from catfair.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(ws, tmp, seed=0):
    """Run every subcommand once; return the artifact paths."""
    out = {}
    sig_dir = tmp / "sigs"
    sigs = []
    for name in ("male", "blond_hair"):
        for value, (pos, neg) in ((1, ("pos", "neg")), (0, ("neg", "pos"))):
            path = sig_dir / f"{name}_{value}.json"
            layers = "1:1" if name == "male" else "2:2"
            assert run("discover", "--pos", ws[f"{name}_{pos}"], "--neg", ws[f"{name}_{neg}"],
                       "--layers", layers, "--rng-seed", seed, "--out", path) == 0
            sigs.append(path)
    out["signatures"] = sigs
    out["plan"] = tmp / "plan.json"
    assert run("plan", "--annotations", ws["annotations"], "--protected", "Male",
               "--aoi", "BlondHair", "--mode", "supplement", "--rng-seed", seed,
               "--out", out["plan"]) == 0
    out["dataset"] = tmp / "synthetic"
    assert run("synthesize", "--plan", out["plan"], "--signatures", *sigs,
               "--toy-spec", ws["toy_spec"], "--rng-seed", seed, "--out", out["dataset"]) == 0
    out["report"] = tmp / "report.json"
    out["table"] = tmp / "report.txt"
    assert run("evaluate", "--pred", ws["predictions"], "--train-counts", ws["train_counts"],
               "--rng-seed", seed, "--out", out["report"], "--table-out", out["table"]) == 0
    out["stats"] = tmp / "stats.json"
    out["study"] = tmp / "study.txt"
    assert run("stats", "--annotations", ws["annotations"], "--protected", "Male",
               "--pred", ws["predictions"], "--rng-seed", seed, "--out", out["stats"],
               "--study-out", out["study"]) == 0
    return out


def snapshot(tmp):
    return {p.relative_to(tmp): p.read_bytes() for p in sorted(tmp.rglob("*")) if p.is_file()}
