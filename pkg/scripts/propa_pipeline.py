"""Measured constants of the vector/kernel/vector round trip on cycles.

    python scripts/propa_pipeline.py --sizes 12 60 200
"""

import argparse
import math
from dataclasses import dataclass, field

from coarsekit import cycle_space
from coarsekit.propa import as_variant, ball_certificate, kernel_to_vectors, vectors_to_kernel


@dataclass
class PipelineConfig:
    sizes: list = field(default_factory=lambda: [12, 60, 200])
    ball_fraction: float = 0.25
    target_fraction: float = 0.5
    R: int = 1


def run(cfg: PipelineConfig):
    rows = []
    for n in cfg.sizes:
        X = cycle_space(n)
        S = int(n * cfg.ball_fraction)
        cert = ball_certificate(X, S, cfg.R)
        kern = vectors_to_kernel(cert, X)
        out = kernel_to_vectors(as_variant(kern, "kernel-roe"), X, int(n * cfg.target_fraction))
        m = out.measurements
        rows.append({
            "n": n,
            "S": S,
            "eps_in": cert.eps,
            "eps_kernel": kern.eps,
            "sq_error": m["sq_error"],
            "eps_prime": m["eps_prime"],
            "variation": m["variation"],
            "bound": m["bound"],
            "slack": m["bound"] / max(m["variation"], 1e-300),
            "min_norm_sq": m["min_norm_sq"],
            "identity_error": kern.measurements["identity_error"],
        })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=PipelineConfig().sizes)
    ap.add_argument("--R", type=int, default=1)
    a = ap.parse_args()
    rows = run(PipelineConfig(sizes=a.sizes, R=a.R))
    cols = list(rows[0])
    print(" ".join(f"{c:>14}" for c in cols))
    for r in rows:
        print(" ".join(f"{v:>14}" if isinstance(v, int) else f"{v:>14.6g}" for v in r.values()))
    assert all(r["variation"] <= r["bound"] and not math.isnan(r["bound"]) for r in rows)


if __name__ == "__main__":
    main()
