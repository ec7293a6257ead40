#!/usr/bin/env python3
"""Write a demo workspace (toy generator, seeds, annotations, predictions).

The printed commands run the whole CLI pipeline over it.
"""
import argparse
from pathlib import Path

from catfair.demo import write_demo_workspace


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo", help="workspace directory")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    paths = write_demo_workspace(args.out, seed=args.seed)
    for name, path in sorted(paths.items()):
        print(f"{name:14s} {path}")
    ws = Path(args.out)
    print("\nnext steps:")
    for name, layers in (("male", "1:1"), ("blond_hair", "2:2")):
        for value, pos, neg in ((1, "pos", "neg"), (0, "neg", "pos")):
            print(f"  catfair discover --pos {ws}/seeds/{name}_{pos}.bin "
                  f"--neg {ws}/seeds/{name}_{neg}.bin --layers {layers} "
                  f"--out {ws}/sigs/{name}_{value}.json")
    print(f"  catfair plan --annotations {ws}/list_attr.txt --protected Male --aoi BlondHair "
          f"--out {ws}/plan.json")
    print(f"  catfair synthesize --plan {ws}/plan.json --signatures {ws}/sigs/*.json "
          f"--toy-spec {ws}/toy.json --out {ws}/synthetic")
    print(f"  catfair evaluate --pred {ws}/predictions.csv --train-counts {ws}/train_counts.json "
          f"--out {ws}/report.json")
    print(f"  catfair stats --annotations {ws}/list_attr.txt --protected Male "
          f"--pred {ws}/predictions.csv --out {ws}/stats.json --study-out {ws}/study.txt")


if __name__ == "__main__":
    main()
