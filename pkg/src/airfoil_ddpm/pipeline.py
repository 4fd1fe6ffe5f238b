"""End-to-end steps shared by the CLI, scripts and acceptance tests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aero import OperatingPoint, SolverResult, evaluate_batch
from .config import RunConfig
from .cst import CstParams, is_self_intersecting
from .dataset import LabeledDataset, make_dataset, split_arrays
from .diffusion import NoiseSchedule, TrainHistory, generate, linear_schedule, train
from .metrics import ErrorReport, full_report, nearest_training_distances
from .neural import Checkpoint, NoiseEstimator, fit_normalizer
from .pod import PodBasis, compute_pod, fit_feature_map, pod_generate_many


def operating_point(cfg: RunConfig) -> OperatingPoint:
    return OperatingPoint(cfg.dataset.reynolds, cfg.dataset.alpha_deg)


def schedule_from_config(cfg: RunConfig) -> NoiseSchedule:
    s = cfg.schedule
    return linear_schedule(s.beta_start, s.beta_end, s.t_max)


def build_dataset_from_config(cfg: RunConfig) -> LabeledDataset:
    d = cfg.dataset
    return make_dataset(
        d.n_target,
        d.solver,
        operating_point(cfg),
        d.seed,
        percentile=d.outlier_percentile,
        split_sizes=d.split_sizes,
        a0_range=d.a0_range,
        coeff_range=d.coeff_range,
        parallelism=d.parallelism,
    )


def train_from_config(cfg: RunConfig, ds: LabeledDataset) -> tuple[Checkpoint, TrainHistory]:
    """Fit normalizers on the training split and train the noise estimator."""
    xtr, ftr = split_arrays(ds, "train")
    xva, fva = split_arrays(ds, "validation")
    pn, fn = fit_normalizer(xtr), fit_normalizer(ftr)
    sched = schedule_from_config(cfg)
    m = cfg.model
    sizes = [xtr.shape[1] + 1 + ftr.shape[1], *[m.hidden_width] * m.hidden_layers, xtr.shape[1]]
    net = NoiseEstimator.init(sizes, np.random.default_rng(m.init_seed))
    net, hist = train(
        pn.apply(xtr), fn.apply(ftr), pn.apply(xva), fn.apply(fva),
        sched, net, cfg.training, np.random.default_rng(cfg.training.seed),
    )
    return Checkpoint(net, pn, fn, sched.to_dict()), hist


@dataclass
class Generation:
    airfoils: list[CstParams]
    valid: np.ndarray  # bool per airfoil
    attempts: np.ndarray  # draws used per airfoil


def generate_with_retries(
    ckpt: Checkpoint, features, rng: np.random.Generator, max_retries: int = 10
) -> Generation:
    """One airfoil per feature row; self-intersecting draws are redrawn up to ``max_retries`` times."""
    f = np.atleast_2d(np.asarray(features, dtype=float))
    out = generate(ckpt, f, len(f), rng)
    valid = np.array([not is_self_intersecting(p) for p in out])
    attempts = np.ones(len(f), dtype=int)
    for _ in range(max_retries):
        bad = np.flatnonzero(~valid)
        if not len(bad):
            break
        redo = generate(ckpt, f[bad], len(bad), rng)
        for i, p in zip(bad, redo):
            out[i] = p
            valid[i] = not is_self_intersecting(p)
            attempts[i] += 1
    return Generation(out, valid, attempts)


def evaluate_airfoils(airfoils, cfg: RunConfig, solver: Optional[str] = None) -> list[SolverResult]:
    return evaluate_batch(
        airfoils, operating_point(cfg), solver or cfg.dataset.solver, cfg.dataset.parallelism
    )


@dataclass
class EvalOutcome:
    report: ErrorReport
    generated: list[CstParams]
    results: list[SolverResult]
    valid_fraction: float
    nearest_distances: Optional[np.ndarray] = None
    nearest_indices: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        d = {"errors": self.report.to_dict(), "valid_fraction": self.valid_fraction}
        if self.nearest_distances is not None:
            nd = self.nearest_distances
            d["uniqueness"] = {
                "mean_nearest_training_distance": float(nd.mean()),
                "median_nearest_training_distance": float(np.median(nd)),
                "min_nearest_training_distance": float(nd.min()),
                "max_nearest_training_distance": float(nd.max()),
            }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate_model(ckpt: Checkpoint, ds: LabeledDataset, cfg: RunConfig, solver: Optional[str] = None) -> EvalOutcome:
    """Condition on every test-split feature triple, generate, re-evaluate and score."""
    _, fte = split_arrays(ds, "test")
    xtr, _ = split_arrays(ds, "train")
    rng = np.random.default_rng(cfg.sampling.seed)
    gen = generate_with_retries(ckpt, fte, rng, cfg.sampling.max_retries)
    results = evaluate_airfoils(gen.airfoils, cfg, solver)
    report = full_report(fte, results, "cd", cfg.sampling.cd_threshold)
    nd, ni = nearest_training_distances(gen.airfoils, xtr)
    return EvalOutcome(report, gen.airfoils, results, float(gen.valid.mean()), nd, ni)


def fit_pod_baseline(ds: LabeledDataset) -> PodBasis:
    xtr, ftr = split_arrays(ds, "train")
    return fit_feature_map(compute_pod(xtr), ftr, xtr)


def evaluate_pod(ds: LabeledDataset, cfg: RunConfig, solver: Optional[str] = None) -> tuple[EvalOutcome, PodBasis]:
    basis = fit_pod_baseline(ds)
    _, fte = split_arrays(ds, "test")
    airfoils = pod_generate_many(basis, fte)
    results = evaluate_airfoils(airfoils, cfg, solver)
    valid = np.array([not is_self_intersecting(p) for p in airfoils])
    report = full_report(fte, results, "cd", cfg.sampling.cd_threshold)
    return EvalOutcome(report, airfoils, results, float(valid.mean())), basis
