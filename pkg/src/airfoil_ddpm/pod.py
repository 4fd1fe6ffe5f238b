"""POD interpolation baseline.

The training latent vectors are decomposed into orthonormal modes, and a global
least-squares affine map takes normalized (cl, cd, cm) to mode coefficients. It
yields exactly one airfoil per feature triple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .cst import CstParams
from .neural import Normalizer, fit_normalizer


class PodError(ValueError):
    pass


@dataclass(frozen=True)
class PodBasis:
    mean: np.ndarray
    modes: np.ndarray  # (n_modes, dim), one mode per row
    eigenvalues: np.ndarray
    feature_map: Optional[np.ndarray] = None  # (1 + n_features, n_modes), intercept row first
    feature_normalizer: Optional[Normalizer] = None

    def project(self, rows) -> np.ndarray:
        return (np.asarray(rows, dtype=float) - self.mean) @ self.modes.T

    def reconstruct(self, coeffs) -> np.ndarray:
        return self.mean + np.asarray(coeffs, dtype=float) @ self.modes

    def to_dict(self) -> dict:
        d = {
            "mean": self.mean.tolist(),
            "modes": self.modes.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "feature_map": None if self.feature_map is None else self.feature_map.tolist(),
        }
        if self.feature_normalizer is not None:
            d["feature_normalizer"] = self.feature_normalizer.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compute_pod(rows) -> PodBasis:
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or len(x) < x.shape[1] + 1:
        raise PodError(f"need more rows than dimensions, got shape {x.shape}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / len(x)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    modes = vecs[:, order].T
    # sign convention: the largest-magnitude component of each mode is positive
    pivot = np.argmax(np.abs(modes), axis=1)
    signs = np.sign(modes[np.arange(len(modes)), pivot])
    modes = modes * signs[:, None]
    return PodBasis(mean, modes, vals)


def fit_feature_map(basis: PodBasis, features, rows, ridge: float = 1e-10) -> PodBasis:
    """Least-squares affine map from z-scored features to mode coefficients."""
    f = np.asarray(features, dtype=float)
    x = np.asarray(rows, dtype=float)
    if len(f) != len(x) or len(f) < 2:
        raise PodError("features and rows must have the same (>= 2) number of rows")
    if not np.all(np.isfinite(f)):
        raise PodError("non-finite features")
    norm = fit_normalizer(f)
    design = np.hstack([np.ones((len(f), 1)), norm.apply(f)])
    coeffs = basis.project(x)
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    w = np.linalg.solve(gram, design.T @ coeffs)
    return replace(basis, feature_map=w, feature_normalizer=norm)


def predict_coefficients(basis: PodBasis, features) -> np.ndarray:
    if basis.feature_map is None:
        raise PodError("feature map not fitted")
    f = np.atleast_2d(np.asarray(features, dtype=float))
    design = np.hstack([np.ones((len(f), 1)), basis.feature_normalizer.apply(f)])
    return design @ basis.feature_map


def pod_generate(basis: PodBasis, features) -> CstParams:
    """One airfoil for one (cl, cd, cm) triple."""
    coeffs = predict_coefficients(basis, np.asarray(features, dtype=float).reshape(1, -1))
    return CstParams.from_vector(basis.reconstruct(coeffs)[0])


def pod_generate_many(basis: PodBasis, features) -> list[CstParams]:
    return [CstParams.from_vector(v) for v in basis.reconstruct(predict_coefficients(basis, features))]
