"""Feature-accuracy, uniqueness and diversity metrics for generated airfoils."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .aero import AeroFeatures, SolverResult
from .cst import LATENT_DIM, CstParams, ShapeClass, bernstein_basis, class_function, cosine_stations

FEATURES = ("cl", "cd", "cm")
LABELS = {"cl": "C_L", "cd": "C_D", "cm": "C_M"}
MAPE_FEATURES = ("cl", "cd")  # cm is zero-centred, percentage errors are meaningless
N_STATIONS = 100


class MetricsError(ValueError):
    pass


@dataclass
class ErrorReport:
    rmse: dict
    rmdse: dict
    mape: dict  # cm maps to None
    n_total: int
    n_converged: int
    subreports: dict = field(default_factory=dict)

    @property
    def n_not_converged(self) -> int:
        return self.n_total - self.n_converged

    def to_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_converged": self.n_converged,
            "n_not_converged": self.n_not_converged,
            "rmse": self.rmse,
            "rmdse": self.rmdse,
            "mape": self.mape,
            "subreports": {k: (v.to_dict() if v is not None else None) for k, v in self.subreports.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_matrix(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return np.asarray(items, dtype=float).reshape(-1, 3)
    return np.array([f.as_array() for f in items], dtype=float).reshape(-1, 3)


def _achieved_matrix(achieved) -> np.ndarray:
    """Rows of NaN mark non-converged entries."""
    if isinstance(achieved, np.ndarray):
        return np.asarray(achieved, dtype=float).reshape(-1, 3)
    rows = []
    for a in achieved:
        if isinstance(a, SolverResult):
            a = a.features
        rows.append(a.as_array() if isinstance(a, AeroFeatures) else np.full(3, np.nan))
    return np.array(rows, dtype=float).reshape(-1, 3)


def feature_errors(desired, achieved) -> ErrorReport:
    """RMSE, root-median-squared error and MAPE over converged pairs.

    ``achieved`` entries may be AeroFeatures, SolverResults, None (not converged) or
    a matrix with NaN rows. MAPE uses the desired value as denominator.
    """
    d = _as_matrix(desired)
    a = _achieved_matrix(achieved)
    if len(d) != len(a):
        raise MetricsError("desired and achieved lists differ in length")
    ok = np.all(np.isfinite(a), axis=1)
    if not ok.any():
        raise MetricsError("no converged pairs to score")
    e = a[ok] - d[ok]
    sq = e**2
    rmse = {k: float(np.sqrt(np.mean(sq[:, i]))) for i, k in enumerate(FEATURES)}
    rmdse = {k: float(np.sqrt(np.median(sq[:, i]))) for i, k in enumerate(FEATURES)}
    mape = {
        k: (float(100 * np.mean(np.abs(e[:, i] / d[ok][:, i]))) if k in MAPE_FEATURES else None)
        for i, k in enumerate(FEATURES)
    }
    return ErrorReport(rmse, rmdse, mape, len(d), int(ok.sum()))


def errors_by_threshold(desired, achieved, key: str = "cd", threshold: float = 0.01):
    """Split on the desired value of one feature; an empty or fully failed side is None."""
    d = _as_matrix(desired)
    a = _achieved_matrix(achieved)
    col = d[:, FEATURES.index(key)]
    out = []
    for mask in (col < threshold, col >= threshold):
        try:
            out.append(feature_errors(d[mask], a[mask]) if mask.any() else None)
        except MetricsError:
            out.append(None)
    return tuple(out)


def full_report(desired, achieved, threshold_key: str = "cd", threshold: float = 0.01) -> ErrorReport:
    rep = feature_errors(desired, achieved)
    below, above = errors_by_threshold(desired, achieved, threshold_key, threshold)
    rep.subreports[f"{threshold_key} < {threshold:g}"] = below
    rep.subreports[f"{threshold_key} >= {threshold:g}"] = above
    return rep


# --- text rendering ---------------------------------------------------------

def _cell(v, pct=False) -> str:
    if v is None:
        return "-"
    return f"{v:.1f} %" if pct else f"{v:.2e}"


def render_table(report: ErrorReport, title: str = "") -> str:
    rows = [["Feature", *(LABELS[k] for k in FEATURES)]]
    rows.append(["RMSE", *(_cell(report.rmse[k]) for k in FEATURES)])
    rows.append(["RMdSE", *(_cell(report.rmdse[k]) for k in FEATURES)])
    rows.append(["MAPE", *(_cell(report.mape[k], pct=True) for k in FEATURES)])
    for name, sub in report.subreports.items():
        rows.append([f"RMSE {name}", *(_cell(sub.rmse[k]) if sub else "-" for k in FEATURES)])
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    lines = [title] if title else []
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    lines.append(f"converged {report.n_converged}/{report.n_total}, not converged {report.n_not_converged}")
    return "\n".join(lines)


def render_side_by_side(reports: dict[str, ErrorReport]) -> str:
    blocks = [render_table(r, title=f"[{name}]").splitlines() for name, r in reports.items()]
    width = [max(len(ln) for ln in b) for b in blocks]
    height = max(len(b) for b in blocks)
    out = []
    for i in range(height):
        out.append("   |   ".join((b[i] if i < len(b) else "").ljust(w) for b, w in zip(blocks, width)).rstrip())
    return "\n".join(out)


# --- geometry-space distances -------------------------------------------------

def surface_heights(params, shape: ShapeClass = ShapeClass(), n_stations: int = N_STATIONS) -> np.ndarray:
    """Upper then lower heights at fixed cosine stations; one row per airfoil."""
    if isinstance(params, CstParams):
        params = params.to_vector()
    elif not isinstance(params, np.ndarray):
        params = np.array([p.to_vector() if isinstance(p, CstParams) else p for p in params])
    p = np.atleast_2d(np.asarray(params, dtype=float)).reshape(-1, LATENT_DIM)
    s = cosine_stations(n_stations - 1)
    basis = bernstein_basis(s)
    cls = class_function(s, shape)
    # explicit sums rather than BLAS so a row's heights do not depend on batch size
    up = cls * (np.hstack([p[:, :1], p[:, 6:]])[:, None, :] * basis).sum(axis=2)
    lo = -cls * (p[:, None, :6] * basis).sum(axis=2)
    return np.hstack([up, lo])


def geometry_distance(a, b, shape: ShapeClass = ShapeClass()) -> float:
    ha, hb = surface_heights(a, shape), surface_heights(b, shape)
    return float(np.sqrt(np.mean((ha - hb) ** 2)))


def nearest_training_distance(generated, training, shape: ShapeClass = ShapeClass()) -> tuple[float, int]:
    """RMS height difference to the closest training airfoil; ties go to the lowest index."""
    ht = surface_heights(training, shape)
    if len(ht) == 0:
        raise MetricsError("empty training set")
    hg = surface_heights(generated, shape)
    d = np.sqrt(np.mean((ht - hg) ** 2, axis=1))
    i = int(np.argmin(d))
    return float(d[i]), i


def nearest_training_distances(generated, training, shape: ShapeClass = ShapeClass()):
    """Vectorised form over many generated airfoils; returns (distances, indices)."""
    hg = surface_heights(generated, shape)
    ht = surface_heights(training, shape)
    sq = (hg**2).sum(1)[:, None] + (ht**2).sum(1)[None, :] - 2 * hg @ ht.T
    idx = np.argmin(sq, axis=1)
    d = np.sqrt(np.mean((hg - ht[idx]) ** 2, axis=1))
    return d, idx


@dataclass(frozen=True)
class DiversityStats:
    mean_pairwise: float
    min_pairwise: float
    distinct_count: int


def pairwise_distances(samples, shape: ShapeClass = ShapeClass()) -> np.ndarray:
    h = surface_heights(samples, shape)
    diff = h[:, None, :] - h[None, :, :]
    return np.sqrt(np.mean(diff**2, axis=2))


def diversity_stats(samples, tol: float = 1e-3, shape: ShapeClass = ShapeClass()) -> DiversityStats:
    """Pairwise geometry distances; distinct count from greedy clustering at ``tol``."""
    if len(samples) < 2:
        raise MetricsError("need at least two samples")
    dist = pairwise_distances(samples, shape)
    iu = np.triu_indices(len(dist), k=1)
    reps: list[int] = []
    for i in range(len(dist)):
        if not any(dist[i, r] <= tol for r in reps):
            reps.append(i)
    return DiversityStats(float(dist[iu].mean()), float(dist[iu].min()), len(reps))
