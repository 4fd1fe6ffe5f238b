"""``airfoil-ddpm`` command-line entry point.

Exit codes: 0 success, 1 domain error (invalid config, non-convergence, bad data),
2 I/O or environment error (missing files, missing solver binary).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .aero import GeometryError, SolverConfigError
from .config import ConfigError, RunConfig
from .cst import PARAM_NAMES, CstParams, discretize, export_dat, import_dat
from .dataset import DatasetError, load_csv, provenance_path, save_csv, save_provenance
from .diffusion import SamplingError, TrainingError, forward_noise, linear_schedule
from .metrics import ErrorReport, MetricsError, render_side_by_side, render_table
from .neural import CheckpointError, fit_normalizer, load_checkpoint, save_checkpoint
from .pipeline import (
    build_dataset_from_config,
    evaluate_model,
    evaluate_pod,
    generate_with_retries,
    train_from_config,
)
from .plotting import airfoils_svg, forward_process_svg, scatter_svg

log = logging.getLogger("airfoil_ddpm")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
DOMAIN_ERRORS = (ConfigError, DatasetError, TrainingError, SamplingError, MetricsError, GeometryError, ValueError)
IO_ERRORS = (OSError, SolverConfigError, CheckpointError)


def _config_epilog() -> str:
    lines = ["config keys (override with --section.key VALUE or --key VALUE when unique):"]
    for key, value in cfgmod.config_keys().items():
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"  {key:<30} default: {value}")
    return "\n".join(lines)


def _parse_overrides(tokens: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for {tok}")
            value = tokens[i + 1]
            i += 2
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(
        prog="airfoil-ddpm",
        description="Conditional diffusion model for CST airfoil generation.",
        epilog=_config_epilog(),
        formatter_class=fmt,
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        sp = sub.add_parser(name, help=help, epilog=_config_epilog(), formatter_class=fmt)
        sp.add_argument("--config", help="JSON run configuration")
        return sp

    sp = add("gen-dataset", "sample, label, filter and split the airfoil dataset")
    sp.add_argument("--out", help="dataset CSV path (default paths.dataset)")

    sp = add("train", "train the noise estimator")
    sp.add_argument("--dataset", help="dataset CSV (default paths.dataset)")
    sp.add_argument("--out", help="checkpoint path (default paths.checkpoint)")
    sp.add_argument("--resume", action="store_true", help="not supported")

    sp = add("sample", "generate airfoils for one feature triple")
    sp.add_argument("--checkpoint")
    sp.add_argument("--features", nargs=3, type=float, metavar=("CL", "CD", "CM"), required=True)
    sp.add_argument("--count", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--retry", action="store_true", help="redraw self-intersecting airfoils")
    sp.add_argument("--out-dir")

    sp = add("eval", "generate for every test-split feature triple and score")
    sp.add_argument("--checkpoint")
    sp.add_argument("--dataset")
    sp.add_argument("--solver", choices=("surrogate", "xfoil"))
    sp.add_argument("--out-dir")

    sp = add("pod-baseline", "POD interpolation baseline on the same test features")
    sp.add_argument("--dataset")
    sp.add_argument("--solver", choices=("surrogate", "xfoil"))
    sp.add_argument("--out-dir")
    sp.add_argument("--compare", help="diffusion eval_report.json to render side by side")

    sp = add("plot", "static SVG figures")
    sp.add_argument("inputs", nargs="+", help=".dat files or a dataset CSV")
    sp.add_argument("--mode", choices=("airfoils", "feature-scatter", "forward-process"), default="airfoils")
    sp.add_argument("--output", required=True)
    sp.add_argument("--row", type=int, default=0, help="dataset row for forward-process mode")
    sp.add_argument("--seed", type=int, default=0)
    return p


def _load_cfg(args, extra: list[str]) -> RunConfig:
    cfg = cfgmod.load_config(args.config) if args.config else RunConfig()
    return cfgmod.apply_overrides(cfg, _parse_overrides(extra))


def _out_dir(args, cfg: RunConfig) -> Path:
    d = Path(getattr(args, "out_dir", None) or cfg.paths.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_gen_dataset(args, cfg: RunConfig) -> int:
    ds = build_dataset_from_config(cfg)
    path = Path(args.out or cfg.paths.dataset)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, path)
    save_provenance(ds, provenance_path(path))
    counts = {s: int((ds.split == s).sum()) for s in ("train", "validation", "test")}
    p = ds.provenance
    print(f"wrote {len(ds)} rows to {path}")
    print(f"split: train {counts['train']} / validation {counts['validation']} / test {counts['test']}")
    print(
        f"rejected: geometry {p['rejected_geometry']}, unconverged {p['rejected_unconverged']}, "
        f"outliers {p['filtered_outliers']}"
    )
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    if args.resume:
        raise ConfigError("resuming training from a checkpoint is not supported")
    ds = load_csv(args.dataset or cfg.paths.dataset)
    ckpt, hist = train_from_config(cfg, ds)
    out = Path(args.out or cfg.paths.checkpoint)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, ckpt)
    loss_path = out.with_suffix(".loss.csv")
    hist.to_csv(loss_path)
    best = hist.validation_loss[hist.best_epoch - 1] if hist.best_epoch else float("nan")
    print(f"trained {len(hist.epochs)} epochs ({hist.steps} steps); best epoch {hist.best_epoch}, "
          f"validation loss {best:.5f}")
    print(f"wrote {out} and {loss_path}")
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    ckpt = load_checkpoint(args.checkpoint or cfg.paths.checkpoint)
    count = args.count if args.count is not None else cfg.sampling.count
    seed = args.seed if args.seed is not None else cfg.sampling.seed
    rng = np.random.default_rng(seed)
    feats = np.tile(np.asarray(args.features, dtype=float), (count, 1))
    gen = generate_with_retries(ckpt, feats, rng, cfg.sampling.max_retries if args.retry else 0)
    out = _out_dir(args, cfg)
    rows = []
    for k, (p, ok, n) in enumerate(zip(gen.airfoils, gen.valid, gen.attempts)):
        name = f"sample_{k:03d}"
        if ok or not args.retry:
            (out / f"{name}.dat").write_text(export_dat(discretize(p), name))
        rows.append([name, *p.to_vector(), int(ok), int(n)])
    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", *PARAM_NAMES, "valid", "attempts"])
        for r in rows:
            w.writerow([r[0], *(f"{v:.17g}" for v in r[1:12]), r[12], r[13]])
    n_bad = int((~gen.valid).sum())
    print(f"wrote {count - (n_bad if args.retry else 0)} airfoils to {out}")
    if n_bad:
        print(f"{n_bad} airfoil(s) self-intersecting" + (" after retries" if args.retry else ""))
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    ckpt = load_checkpoint(args.checkpoint or cfg.paths.checkpoint)
    ds = load_csv(args.dataset or cfg.paths.dataset)
    if ckpt.feature_dim != ds.features.shape[1] or ckpt.latent_dim != ds.params.shape[1]:
        raise ConfigError("checkpoint dimensions do not match the dataset")
    outcome = evaluate_model(ckpt, ds, cfg, args.solver)
    out = _out_dir(args, cfg)
    text = render_table(outcome.report, "diffusion model")
    nd = outcome.nearest_distances
    text += f"\nmean nearest-training distance {nd.mean():.3e} (min {nd.min():.3e})\n"
    (out / "eval_report.json").write_text(outcome.to_json())
    (out / "eval_report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_pod_baseline(args, cfg: RunConfig) -> int:
    ds = load_csv(args.dataset or cfg.paths.dataset)
    outcome, basis = evaluate_pod(ds, cfg, args.solver)
    out = _out_dir(args, cfg)
    (out / "pod_report.json").write_text(outcome.to_json())
    (out / "pod_basis.json").write_text(basis.to_json() + "\n")
    text = render_table(outcome.report, "POD baseline") + "\n"
    compare = Path(args.compare) if args.compare else out / "eval_report.json"
    if compare.exists():
        d = json.loads(compare.read_text())["errors"]
        other = ErrorReport(d["rmse"], d["rmdse"], d["mape"], d["n_total"], d["n_converged"])
        text = render_side_by_side({"diffusion": other, "POD": outcome.report}) + "\n"
    (out / "pod_report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_plot(args, cfg: RunConfig) -> int:
    inputs = [Path(p) for p in args.inputs]
    if args.mode == "airfoils":
        coords, labels = [], []
        for path in inputs:
            if path.suffix == ".csv":
                ds = load_csv(path)
                for k, (p, f) in enumerate(zip(ds.airfoils(), ds.features)):
                    coords.append(discretize(p))
                    labels.append(f"row {k}: C_L={f[0]:.3f} C_D={f[1]:.4f} C_M={f[2]:.3f}")
            else:
                name, c = import_dat(path.read_text())
                coords.append(c)
                labels.append(name)
        if not coords:
            raise ValueError("no airfoils selected")
        svg = airfoils_svg(coords, labels)
    elif args.mode == "feature-scatter":
        feats = np.vstack([load_csv(p).features for p in inputs])
        if not len(feats):
            raise ValueError("dataset is empty")
        svg = scatter_svg(feats)
    else:
        ds = load_csv(inputs[0])
        if not 0 <= args.row < len(ds):
            raise ValueError(f"row {args.row} out of range")
        train_rows = ds.params[ds.split == "train"]
        norm = fit_normalizer(train_rows if len(train_rows) >= 2 else ds.params)
        sched = linear_schedule(cfg.schedule.beta_start, cfg.schedule.beta_end, cfg.schedule.t_max)
        T = sched.t_max
        steps = [0, T // 4, T // 2, 3 * T // 4, T]
        x0 = norm.apply(ds.params[args.row])
        eps = np.random.default_rng(args.seed).standard_normal(len(x0))
        snaps = []
        for t in steps:
            xt = x0 if t == 0 else forward_noise(x0, t, eps, sched)
            snaps.append(discretize(CstParams.from_vector(norm.invert(xt))))
        svg = forward_process_svg(snaps, steps)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "pod-baseline": cmd_pod_baseline,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _load_cfg(args, extra)
        return COMMANDS[args.command](args, cfg)
    except IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
