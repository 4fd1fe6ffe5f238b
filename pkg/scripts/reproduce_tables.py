"""Train on the default setup and print the feature-error tables.

Produces the overall error table, the C_D-threshold split and the POD comparison,
all on the same 200 test-feature triples.

    python scripts/reproduce_tables.py --out runs/default [--solver xfoil] [--key value ...]
"""

import argparse
import logging
import time
from pathlib import Path

from airfoil_ddpm.config import RunConfig, apply_overrides
from airfoil_ddpm.dataset import provenance_path, save_csv, save_provenance
from airfoil_ddpm.metrics import render_side_by_side, render_table
from airfoil_ddpm.neural import save_checkpoint
from airfoil_ddpm.pipeline import build_dataset_from_config, evaluate_model, evaluate_pod, train_from_config


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/default")
    ap.add_argument("--solver", choices=("surrogate", "xfoil"), default="surrogate")
    args, extra = ap.parse_known_args()
    overrides = dict(zip((k.lstrip("-") for k in extra[::2]), extra[1::2]))
    overrides["dataset.solver"] = args.solver
    cfg = apply_overrides(RunConfig(), overrides)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    ds = build_dataset_from_config(cfg)
    save_csv(ds, out / "dataset.csv")
    save_provenance(ds, provenance_path(out / "dataset.csv"))
    ckpt, hist = train_from_config(cfg, ds)
    save_checkpoint(out / "checkpoint.json", ckpt)
    hist.to_csv(out / "checkpoint.loss.csv")
    ddpm = evaluate_model(ckpt, ds, cfg)
    pod, _ = evaluate_pod(ds, cfg)
    (out / "eval_report.json").write_text(ddpm.to_json())
    (out / "pod_report.json").write_text(pod.to_json())

    print(render_table(ddpm.report, "Feature errors, diffusion model"))
    print()
    for name, sub in ddpm.report.subreports.items():
        if sub is None:
            print(f"[{name}] no test rows")
        else:
            print(render_table(sub, f"Feature errors for {name}"))
        print()
    print(render_side_by_side({"diffusion": ddpm.report, "POD": pod.report}))
    print()
    print(f"valid geometry after retries: {ddpm.valid_fraction:.1%}")
    print(f"trained {len(hist.epochs)} epochs, best {hist.best_epoch}; total {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
