"""Compare uniqueness and accuracy for the default and the large variant.

The large variant uses 6000 airfoils (3600/1200/1200) and 64-neuron hidden layers.
For each configuration the script reports the feature errors and the nearest-training
distance of the generated test airfoils.

    python scripts/large_dataset_variant.py --out runs/large
"""

import argparse
import json
import logging
from pathlib import Path

import numpy as np

from airfoil_ddpm.config import LARGE_VARIANT, RunConfig, apply_overrides
from airfoil_ddpm.metrics import render_side_by_side
from airfoil_ddpm.pipeline import build_dataset_from_config, evaluate_model, train_from_config


def run(cfg):
    ds = build_dataset_from_config(cfg)
    ckpt, hist = train_from_config(cfg, ds)
    return evaluate_model(ckpt, ds, cfg), hist


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/large")
    ap.add_argument("--skip-default", action="store_true", help="only run the large variant")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    configs = {"large": apply_overrides(RunConfig(), LARGE_VARIANT)}
    if not args.skip_default:
        configs = {"default": RunConfig(), **configs}
    reports = {}
    for name, cfg in configs.items():
        outcome, hist = run(cfg)
        (out / f"{name}_report.json").write_text(outcome.to_json())
        reports[name] = outcome.report
        nd = outcome.nearest_distances
        print(f"{name}: nearest-training distance mean {nd.mean():.3e}, median {np.median(nd):.3e}, "
              f"best epoch {hist.best_epoch}")
    print(render_side_by_side(reports))
    (out / "configs.json").write_text(json.dumps({k: v.to_dict() for k, v in configs.items()}, indent=2))


if __name__ == "__main__":
    main()
