#!/usr/bin/env python3
"""Signature recovery on the toy profile across intra thresholds.

For each threshold, run discovery on fresh seed draws and report how often
the union mask equals the true control set, how often the inter mask alone
does, and the mean number of spurious dims. The last column is the chance
that one non-control dim survives the intra test: the range of n standard
normals must stay below the threshold.
"""
import argparse
import math
import warnings

import numpy as np
from scipy import integrate, stats

from catfair.discovery import Thresholds, ThresholdWarning, discover, inter_class_difference
from catfair.latent import LayerRange
from catfair.toy import ToyAttribute, ToyGeneratorSpec, toy_seed_sets


def range_below(t, n):
    """P(max - min of n iid N(0,1) < t)."""
    f = lambda x: n * stats.norm.pdf(x) * (stats.norm.cdf(x + t) - stats.norm.cdf(x)) ** (n - 1)
    return integrate.quad(f, -np.inf, np.inf)[0]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--seeds", type=int, default=20, help="positive and negative seeds each")
    parser.add_argument("--inter", type=float, default=math.sqrt(2))
    parser.add_argument("--rng-seed", type=int, default=0)
    args = parser.parse_args()
    warnings.simplefilter("ignore", ThresholdWarning)  # the sweep leaves the range on purpose

    spec = ToyGeneratorSpec(4, 64, (ToyAttribute("Y", tuple(range(6)), LayerRange(2, 2)),))
    truth = set(range(6))
    print(f"{'intra':>7} {'exact C':>8} {'exact B':>8} {'spurious':>9} {'P(dim kept)':>12}")
    for intra in (math.sqrt(2), 2.0, 2.5, 2 * math.sqrt(2), 3.5):
        exact = exact_b = 0
        spurious = []
        for trial in range(args.trials):
            rng = np.random.default_rng([args.rng_seed, trial])
            pos, neg = toy_seed_sets(spec, "Y", args.seeds, args.seeds, rng)
            found = set(discover(pos, neg, LayerRange(2, 2), Thresholds(intra, args.inter))
                        .masks[0].dims)
            exact += found == truth
            exact_b += set(inter_class_difference(pos, neg, 2, args.inter).dims) == truth
            spurious.append(len(found - truth))
        p = range_below(intra, args.seeds)
        print(f"{intra:7.3f} {exact:8d} {exact_b:8d} {np.mean(spurious):9.2f} {p:12.4f}")
    p = range_below(2 * math.sqrt(2), args.seeds)
    print(f"\nat intra = 2*sqrt(2): P(no spurious dim among 58) = {(1 - p) ** 58:.4f}")


if __name__ == "__main__":
    main()
