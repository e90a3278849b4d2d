"""Worst observed telescope distortion against the closed-form bounds.

    python scripts/telescope_bounds.py --trials 20 --max-n 10 --seed 0
"""

import argparse
from dataclasses import dataclass

import numpy as np

from coarsekit import random_space
from coarsekit.constructions import telescope_check, telescope_graph


@dataclass
class TelescopeConfig:
    trials: int = 20
    max_n: int = 10
    max_dist: int = 6
    radii: tuple = (1, 2, 3)
    seed: int = 0


def run(cfg: TelescopeConfig):
    rng = np.random.default_rng(cfg.seed)
    rows = {R: {"forward_ratio": 0.0, "backward_ratio": 0.0, "max_degree": 0, "ok": True} for R in cfg.radii}
    for _ in range(cfg.trials):
        X = random_space(rng, int(rng.integers(1, cfg.max_n + 1)), cfg.max_dist)
        for R in cfg.radii:
            rep = telescope_check(X, telescope_graph(X, R + 1), R)
            row = rows[R]
            row["forward_ratio"] = max(row["forward_ratio"], rep.forward_max / rep.forward_bound)
            row["backward_ratio"] = max(row["backward_ratio"], rep.backward_max / rep.backward_bound)
            row["max_degree"] = max(row["max_degree"], rep.max_degree)
            row["ok"] &= rep.ok
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=TelescopeConfig.trials)
    ap.add_argument("--max-n", type=int, default=TelescopeConfig.max_n)
    ap.add_argument("--seed", type=int, default=TelescopeConfig.seed)
    a = ap.parse_args()
    rows = run(TelescopeConfig(trials=a.trials, max_n=a.max_n, seed=a.seed))
    print(f"{'R':>3} {'fwd used':>9} {'bwd used':>9} {'deg':>4} {'ok':>5}")
    for R, r in rows.items():
        print(f"{R:>3} {r['forward_ratio']:>9.3f} {r['backward_ratio']:>9.3f} {r['max_degree']:>4} {r['ok']!s:>5}")


if __name__ == "__main__":
    main()
