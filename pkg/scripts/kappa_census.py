"""Census of exact kappa over every integer metric on at most N points.

    python scripts/kappa_census.py --max-n 4 --max-d 5 --max-R 6
"""

import argparse
import itertools
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from coarsekit import FiniteMetricSpace, kappa_search


@dataclass
class CensusConfig:
    max_n: int = 4
    max_d: int = 5
    max_R: int = 6


def metrics(n: int, max_d: int):
    pairs = list(itertools.combinations(range(n), 2))
    for ds in itertools.product(range(1, max_d + 1), repeat=len(pairs)):
        D = np.zeros((n, n), dtype=np.int64)
        for (a, b), v in zip(pairs, ds):
            D[a, b] = D[b, a] = v
        if (D[:, None, :] <= D[:, :, None] + D[None, :, :]).all():
            yield D


def census(cfg: CensusConfig) -> Counter:
    tally: Counter = Counter()
    for n in range(1, cfg.max_n + 1):
        for D in metrics(n, cfg.max_d):
            X = FiniteMetricSpace([f"q{i}" for i in range(n)], D, check=False)
            for R in range(1, cfg.max_R + 1):
                res = kappa_search(X, R)
                tally[(n, res.lower if res.exact else f"{res.lower}..{res.upper}")] += 1
    return tally


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=CensusConfig.max_n)
    ap.add_argument("--max-d", type=int, default=CensusConfig.max_d)
    ap.add_argument("--max-R", type=int, default=CensusConfig.max_R)
    a = ap.parse_args()
    cfg = CensusConfig(a.max_n, a.max_d, a.max_R)
    t0 = time.perf_counter()
    tally = census(cfg)
    print(f"{'points':>6} {'kappa':>8} {'cases':>8}")
    for (n, k), c in sorted(tally.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        print(f"{n:>6} {k!s:>8} {c:>8}")
    print(f"total {sum(tally.values())} cases in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
