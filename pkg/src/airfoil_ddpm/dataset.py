"""Labeled airfoil dataset: sampling, geometric rejection, labeling, outlier removal, splits, CSV."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .aero import OperatingPoint, evaluate_batch
from .cst import LATENT_DIM, PARAM_NAMES, CstParams, ShapeClass, is_self_intersecting

FEATURE_NAMES = ("cl", "cd", "cm")
CSV_HEADER = (*PARAM_NAMES, *FEATURE_NAMES, "split")
SPLITS = ("train", "validation", "test")


class DatasetError(RuntimeError):
    pass


@dataclass
class LabeledDataset:
    params: np.ndarray  # (n, 11)
    features: np.ndarray  # (n, 3)
    split: np.ndarray  # (n,) of "train" | "validation" | "test" | ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).reshape(-1, LATENT_DIM)
        self.features = np.asarray(self.features, dtype=float).reshape(-1, len(FEATURE_NAMES))
        if self.split is None:
            self.split = np.full(len(self.params), "", dtype=object)
        self.split = np.asarray(self.split, dtype=object)
        if not len(self.params) == len(self.features) == len(self.split):
            raise ValueError("params, features and split must have equal length")

    def __len__(self) -> int:
        return len(self.params)

    def subset(self, name: str) -> "LabeledDataset":
        m = self.split == name
        return LabeledDataset(self.params[m], self.features[m], self.split[m], dict(self.provenance))

    def take(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.params[idx], self.features[idx], self.split[idx], dict(self.provenance))

    def airfoils(self) -> list[CstParams]:
        return [CstParams.from_vector(v) for v in self.params]

    def equals(self, other: "LabeledDataset") -> bool:
        return (
            np.array_equal(self.params, other.params)
            and np.array_equal(self.features, other.features)
            and list(self.split) == list(other.split)
        )


def sample_raw(
    rng: np.random.Generator,
    n: int,
    a0_range: tuple[float, float] = (0.3, 1.0),
    coeff_range: tuple[float, float] = (-0.5, 1.5),
) -> np.ndarray:
    """Uniform latent vectors, shape (n, 11)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a0 = rng.uniform(*a0_range, size=(n, 1))
    rest = rng.uniform(*coeff_range, size=(n, LATENT_DIM - 1))
    return np.hstack([a0, rest])


def build_dataset(
    n_target: int,
    solver: str = "surrogate",
    op: OperatingPoint = OperatingPoint(),
    rng: Optional[np.random.Generator] = None,
    *,
    shape: ShapeClass = ShapeClass(),
    a0_range=(0.3, 1.0),
    coeff_range=(-0.5, 1.5),
    parallelism: int = 1,
    accept=None,
    window: int = 10_000,
    min_rate: float = 0.01,
) -> LabeledDataset:
    """Draw candidates until ``n_target`` have valid geometry and converged features.

    ``accept`` is an optional extra predicate on a feature vector. Rows are kept in
    candidate order; rejected counts are recorded in the provenance.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    params, feats = [], []
    rejected_geom = rejected_unconv = rejected_other = 0
    outcomes: list[bool] = []
    while len(params) < n_target:
        need = n_target - len(params)
        cands = sample_raw(rng, max(16, int(need * 1.25)), a0_range, coeff_range)
        airfoils = [CstParams.from_vector(v) for v in cands]
        valid = [not is_self_intersecting(p, shape) for p in airfoils]
        to_eval = [p for p, ok in zip(airfoils, valid) if ok]
        results = iter(evaluate_batch(to_eval, op, solver, parallelism, shape))
        for v, ok in zip(cands, valid):
            if len(params) >= n_target:
                break
            res = next(results) if ok else None
            if not ok:
                rejected_geom += 1
            elif not res.converged:
                rejected_unconv += 1
            elif accept is not None and not accept(res.features.as_array()):
                rejected_other += 1
            else:
                params.append(v)
                feats.append(res.features.as_array())
                outcomes.append(True)
                continue
            outcomes.append(False)
            if len(outcomes) >= window and sum(outcomes[-window:]) < min_rate * window:
                raise DatasetError(
                    f"acceptance rate below {min_rate:.0%} over the last {window} candidates"
                )
    prov = {
        "solver": solver,
        "reynolds": op.reynolds,
        "alpha_deg": op.alpha_deg,
        "candidates": len(outcomes),
        "rejected_geometry": rejected_geom,
        "rejected_unconverged": rejected_unconv,
        "rejected_topup": rejected_other,
    }
    return LabeledDataset(np.array(params), np.array(feats), None, prov)


# --- outlier removal ----------------------------------------------------------

@dataclass(frozen=True)
class MahalanobisModel:
    mean: np.ndarray
    inv_cov: np.ndarray
    threshold: float

    def distances(self, features) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(features, dtype=float)) - self.mean
        return np.sqrt(np.einsum("ij,jk,ik->i", diff, self.inv_cov, diff))


def mahalanobis_distances(features) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distances from the mean under the population covariance; returns (d, mean, inverse cov)."""
    f = np.asarray(features, dtype=float)
    if len(f) < f.shape[1] + 1:
        raise DatasetError("need at least dim + 1 rows for a covariance estimate")
    mu = f.mean(axis=0)
    diff = f - mu
    cov = diff.T @ diff / len(f)
    if np.linalg.cond(cov) > 1e12:
        cov = cov + 1e-12 * np.trace(cov) / cov.shape[0] * np.eye(cov.shape[0])
        if np.linalg.cond(cov) > 1 / np.finfo(float).eps:
            raise DatasetError("feature covariance is singular")
    inv = np.linalg.inv(cov)
    d = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", diff, inv, diff), 0.0))
    return d, mu, inv


def mahalanobis_filter(dataset: LabeledDataset, percentile: float = 99.5):
    """Drop rows whose distance is strictly above the given percentile.

    Returns ``(filtered, model)``; the model can screen further rows against the
    same threshold.
    """
    d, mu, inv = mahalanobis_distances(dataset.features)
    q = float(np.percentile(d, percentile))
    keep = d <= q
    out = dataset.take(keep)
    out.provenance["filtered_outliers"] = int((~keep).sum()) + dataset.provenance.get("filtered_outliers", 0)
    return out, MahalanobisModel(mu, inv, q)


# --- splitting ------------------------------------------------------------------

def split(dataset: LabeledDataset, sizes: Sequence[int] = (600, 200, 200),
          rng: Optional[np.random.Generator] = None) -> LabeledDataset:
    if len(sizes) != 3 or min(sizes) < 0:
        raise ValueError("sizes must be three non-negative counts")
    if sum(sizes) > len(dataset):
        raise ValueError(f"split sizes {tuple(sizes)} exceed {len(dataset)} rows")
    rng = rng if rng is not None else np.random.default_rng(0)
    perm = rng.permutation(len(dataset))
    tags = np.full(len(dataset), "", dtype=object)
    bounds = np.cumsum([0, *sizes])
    for name, lo, hi in zip(SPLITS, bounds[:-1], bounds[1:]):
        tags[perm[lo:hi]] = name
    return LabeledDataset(dataset.params, dataset.features, tags, dict(dataset.provenance))


# --- full pipeline ----------------------------------------------------------------

def make_dataset(
    n_target: int = 1000,
    solver: str = "surrogate",
    op: OperatingPoint = OperatingPoint(),
    seed: int = 0,
    *,
    percentile: float = 99.5,
    split_sizes: Sequence[int] = (600, 200, 200),
    a0_range=(0.3, 1.0),
    coeff_range=(-0.5, 1.5),
    shape: ShapeClass = ShapeClass(),
    parallelism: int = 1,
) -> LabeledDataset:
    """Build, outlier-filter, top up to ``n_target`` and split.

    Top-up rows must fall within the distance threshold of the first filtering pass.
    """
    sample_ss, split_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(sample_ss)
    kw = dict(shape=shape, a0_range=a0_range, coeff_range=coeff_range, parallelism=parallelism)
    raw = build_dataset(n_target, solver, op, rng, **kw)
    filtered, model = mahalanobis_filter(raw, percentile)
    prov = dict(raw.provenance)
    prov["filtered_outliers"] = len(raw) - len(filtered)
    params, feats = [filtered.params], [filtered.features]
    missing = n_target - len(filtered)
    if missing > 0:
        extra = build_dataset(
            missing, solver, op, rng,
            accept=lambda f: model.distances(f)[0] <= model.threshold, **kw,
        )
        params.append(extra.params)
        feats.append(extra.features)
        for key in ("candidates", "rejected_geometry", "rejected_unconverged", "rejected_topup"):
            prov[key] += extra.provenance[key]
    prov.update(
        seed=seed,
        outlier_percentile=percentile,
        outlier_threshold=model.threshold,
        generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    ds = LabeledDataset(np.vstack(params), np.vstack(feats), None, prov)
    return split(ds, split_sizes, np.random.default_rng(split_ss))


# --- persistence --------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_csv(dataset: LabeledDataset, path) -> None:
    lines = [",".join(CSV_HEADER)]
    for p, f, s in zip(dataset.params, dataset.features, dataset.split):
        lines.append(",".join([*map(_fmt, p), *map(_fmt, f), s]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path) -> LabeledDataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if header != list(CSV_HEADER):
        missing = [c for c in CSV_HEADER if c not in header]
        extra = [c for c in header if c not in CSV_HEADER]
        detail = []
        if missing:
            detail.append("missing column(s) " + ", ".join(missing))
        if extra:
            detail.append("unexpected column(s) " + ", ".join(extra))
        if not detail:
            detail.append("columns out of order")
        raise DatasetError(f"{path}: malformed header: {'; '.join(detail)}")
    ncol = len(CSV_HEADER)
    nums = np.empty((len(lines) - 1, ncol - 1))
    tags = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != ncol:
            raise DatasetError(f"{path}: line {r} has {len(cells)} columns, expected {ncol}")
        for c, cell in enumerate(cells[:-1]):
            try:
                nums[r - 2, c] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: line {r}, column {CSV_HEADER[c]!r}: non-numeric value {cell!r}"
                ) from None
        tag = cells[-1].strip()
        if tag not in (*SPLITS, ""):
            raise DatasetError(f"{path}: line {r}: unknown split {tag!r}")
        tags.append(tag)
    return LabeledDataset(nums[:, :LATENT_DIM], nums[:, LATENT_DIM:], np.array(tags, dtype=object))


def provenance_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".provenance.json")


def save_provenance(dataset: LabeledDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset.provenance, indent=2, sort_keys=True) + "\n")


def split_arrays(dataset: LabeledDataset, name: str) -> tuple[np.ndarray, np.ndarray]:
    sub = dataset.subset(name)
    return sub.params, sub.features
