"""Draw several airfoils for one feature triple and summarise how different they are.

Airfoils that self-intersect or whose evaluation does not converge are redrawn. The
script writes an SVG of the accepted shapes and prints the achieved features.

    python scripts/diversity_study.py --checkpoint out/checkpoint.json --features 0.6 0.01 0.02
"""

import argparse
from pathlib import Path

import numpy as np

from airfoil_ddpm.aero import OperatingPoint, evaluate_one
from airfoil_ddpm.cst import discretize, is_self_intersecting
from airfoil_ddpm.diffusion import sample
from airfoil_ddpm.metrics import diversity_stats
from airfoil_ddpm.neural import load_checkpoint
from airfoil_ddpm.plotting import airfoils_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--checkpoint", default="out/checkpoint.json")
    ap.add_argument("--features", nargs=3, type=float, default=(0.6, 0.01, 0.02))
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--solver", choices=("surrogate", "xfoil"), default="surrogate")
    ap.add_argument("--max-draws", type=int, default=200)
    ap.add_argument("--output", default="out/diversity.svg")
    args = ap.parse_args()

    ckpt = load_checkpoint(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    op = OperatingPoint()
    kept, results, draws = [], [], 0
    while len(kept) < args.count and draws < args.max_draws:
        draws += 1
        p = sample(ckpt, args.features, rng)
        if is_self_intersecting(p):
            continue
        r = evaluate_one(p, op, args.solver)
        if r.converged:
            kept.append(p)
            results.append(r.features)
    print(f"accepted {len(kept)} of {draws} draws")
    for k, f in enumerate(results):
        print(f"  {k:2d}: C_L {f.cl:7.4f}  C_D {f.cd:7.5f}  C_M {f.cm:7.4f}")
    if len(kept) >= 2:
        s = diversity_stats(kept)
        print(f"distinct shapes {s.distinct_count}; pairwise RMS height distance mean {s.mean_pairwise:.3e}, "
              f"min {s.min_pairwise:.3e}")
    labels = [f"C_L={f.cl:.3f} C_D={f.cd:.4f} C_M={f.cm:.3f}" for f in results]
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(airfoils_svg([discretize(p) for p in kept], labels))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
