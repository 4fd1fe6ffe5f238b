"""Aerodynamic feature evaluation: XFOIL subprocess adapter and a thin-airfoil surrogate."""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cst import (
    N_SIDE,
    AirfoilCoordinates,
    CstParams,
    ShapeClass,
    bernstein_basis,
    discretize,
    export_dat,
    is_self_intersecting,
)

SOLVERS = ("surrogate", "xfoil")
N_QUAD = 256


class GeometryError(ValueError):
    """Airfoil geometry is invalid (self-intersecting)."""


class SolverConfigError(RuntimeError):
    """The external solver cannot be located or started."""


class SolverProtocolError(RuntimeError):
    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


@dataclass(frozen=True)
class OperatingPoint:
    reynolds: float = 1e6
    alpha_deg: float = 5.0

    def __post_init__(self):
        if not self.reynolds > 0:
            raise ValueError("reynolds must be positive")


@dataclass(frozen=True)
class AeroFeatures:
    cl: float
    cd: float
    cm: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cl, self.cd, self.cm])

    @classmethod
    def from_array(cls, v) -> "AeroFeatures":
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class SolverResult:
    """``features`` is None when the solver did not converge or ``error`` is set."""

    features: Optional[AeroFeatures]
    solver_id: str
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.features is not None


# --- thin-airfoil surrogate -------------------------------------------------

def _quadrature_nodes(n: int = N_QUAD):
    theta = (np.arange(n) + 0.5) * np.pi / n
    return theta, 0.5 * (1.0 - np.cos(theta)), np.pi / n


def _bernstein_derivative(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    n = len(coeffs) - 1
    return n * (bernstein_basis(s, n) @ np.diff(coeffs))


def camber_slope(params: CstParams, shape: ShapeClass, s: np.ndarray) -> np.ndarray:
    """d(y_c)/ds with y_c the mean of the two surfaces; s must avoid the endpoints."""
    n1, n2 = shape.n1, shape.n2
    c = s**n1 * (1 - s) ** n2
    dc = n1 * s ** (n1 - 1) * (1 - s) ** n2 - n2 * s**n1 * (1 - s) ** (n2 - 1)
    diff = params.upper_coeffs() - params.lower_coeffs()
    d = bernstein_basis(s) @ diff
    dd = _bernstein_derivative(diff, s)
    return 0.5 * (dc * d + c * dd)


def thin_airfoil_coefficients(params: CstParams, shape: ShapeClass, alpha_rad: float):
    """Glauert coefficients (A0, A1, A2) by midpoint quadrature in theta."""
    theta, s, dtheta = _quadrature_nodes()
    slope = camber_slope(params, shape, s)
    a0 = alpha_rad - np.sum(slope) * dtheta / np.pi
    a1 = 2.0 / np.pi * np.sum(slope * np.cos(theta)) * dtheta
    a2 = 2.0 / np.pi * np.sum(slope * np.cos(2 * theta)) * dtheta
    return a0, a1, a2


def max_thickness(params: CstParams, shape: ShapeClass) -> float:
    _, s, _ = _quadrature_nodes()
    cls = s**shape.n1 * (1 - s) ** shape.n2
    basis = bernstein_basis(s)
    tau = cls * (basis @ params.upper_coeffs() + basis @ params.lower_coeffs())
    return float(tau.max())


def evaluate_surrogate(
    params: CstParams, shape: ShapeClass = ShapeClass(), op: OperatingPoint = OperatingPoint()
) -> SolverResult:
    """Thin-airfoil lift/moment plus an empirical flat-plate drag proxy.

    Always converges for valid geometry; raises GeometryError otherwise.
    """
    t0 = time.perf_counter()
    if is_self_intersecting(params, shape):
        raise GeometryError("self-intersecting airfoil")
    a0, a1, a2 = thin_airfoil_coefficients(params, shape, np.deg2rad(op.alpha_deg))
    cl = 2 * np.pi * (a0 + a1 / 2)
    cm = -np.pi / 4 * (a1 - a2)
    tau = max_thickness(params, shape)
    cf = 0.074 * op.reynolds ** (-0.2)
    cd = 2 * cf * (1 + 2 * tau + 60 * tau**4) + 0.01 * cl**2
    feats = AeroFeatures(float(cl), float(cd), float(cm))
    if not np.all(np.isfinite(feats.as_array())):
        raise GeometryError("non-finite surrogate result")
    return SolverResult(feats, "surrogate", time.perf_counter() - t0)


# --- XFOIL adapter ----------------------------------------------------------

def find_xfoil() -> str:
    path = os.environ.get("XFOIL_PATH") or shutil.which("xfoil")
    if not path or not (os.path.isfile(path) and os.access(path, os.X_OK)):
        raise SolverConfigError(
            "XFOIL binary not found; set XFOIL_PATH or put 'xfoil' on PATH"
        )
    return path


def xfoil_script(dat_name: str, polar_name: str, op: OperatingPoint, n_iter: int = 100) -> str:
    return "\n".join(
        [
            "PLOP",
            "G F",
            "",
            f"LOAD {dat_name}",
            "OPER",
            f"VISC {op.reynolds:.6g}",
            f"ITER {n_iter}",
            "PACC",
            polar_name,
            "",
            f"ALFA {op.alpha_deg:.6g}",
            "PACC",
            "",
            "QUIT",
            "",
        ]
    )


def parse_polar(text: str) -> Optional[AeroFeatures]:
    """Parse an XFOIL polar accumulation file.

    Columns after the dashed separator: alpha CL CD CDp CM Top_Xtr Bot_Xtr.
    Returns None when no data line is present (not converged).
    """
    lines = text.splitlines()
    sep = next((i for i, ln in enumerate(lines) if ln.strip().startswith("-----")), None)
    if sep is None:
        raise SolverProtocolError("polar file has no column separator", text)
    data = [ln for ln in lines[sep + 1:] if ln.strip()]
    if not data:
        return None
    cols = data[-1].split()
    try:
        cl, cd, cm = float(cols[1]), float(cols[2]), float(cols[4])
    except (IndexError, ValueError):
        raise SolverProtocolError(f"unparseable polar line: {data[-1]!r}", text) from None
    return AeroFeatures(cl, cd, cm)


def evaluate_xfoil(
    coords: AirfoilCoordinates,
    op: OperatingPoint = OperatingPoint(),
    timeout: float = 20.0,
    n_iter: int = 100,
) -> SolverResult:
    binary = find_xfoil()
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="xfoil_") as tmp:
        (Path(tmp) / "airfoil.dat").write_text(export_dat(coords, "airfoil"))
        script = xfoil_script("airfoil.dat", "polar.txt", op, n_iter)
        try:
            proc = subprocess.run(
                [binary],
                input=script,
                cwd=tmp,
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return SolverResult(None, "xfoil", time.perf_counter() - t0)
        except OSError as exc:
            raise SolverConfigError(f"cannot start XFOIL: {exc}") from exc
        polar = Path(tmp) / "polar.txt"
        if not polar.exists():
            raise SolverProtocolError("XFOIL produced no polar file", proc.stdout + proc.stderr)
        feats = parse_polar(polar.read_text())
    if feats is not None and not np.all(np.isfinite(feats.as_array())):
        feats = None
    return SolverResult(feats, "xfoil", time.perf_counter() - t0)


# --- batches ----------------------------------------------------------------

def evaluate_one(
    params: CstParams,
    op: OperatingPoint = OperatingPoint(),
    solver: str = "surrogate",
    shape: ShapeClass = ShapeClass(),
    timeout: float = 20.0,
) -> SolverResult:
    """Evaluate one airfoil, capturing per-airfoil failures as an error result."""
    if solver not in SOLVERS:
        raise SolverConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    try:
        if solver == "surrogate":
            return evaluate_surrogate(params, shape, op)
        if is_self_intersecting(params, shape):
            raise GeometryError("self-intersecting airfoil")
        return evaluate_xfoil(discretize(params, shape), op, timeout)
    except (GeometryError, SolverProtocolError) as exc:
        return SolverResult(None, solver, 0.0, error=str(exc))


def evaluate_batch(
    airfoils: Sequence[CstParams],
    op: OperatingPoint = OperatingPoint(),
    solver: str = "surrogate",
    parallelism: int = 1,
    shape: ShapeClass = ShapeClass(),
    timeout: float = 20.0,
) -> list[SolverResult]:
    """Results come back in input order; only configuration errors propagate."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if solver not in SOLVERS:
        raise SolverConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if solver == "xfoil" and airfoils:
        find_xfoil()

    def run(p):
        return evaluate_one(p, op, solver, shape, timeout)

    if parallelism == 1:
        return [run(p) for p in airfoils]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, airfoils))


def nominal_thickness_params(t: float = 0.12) -> CstParams:
    """Symmetric CST section roughly matching a NACA 00xx profile of thickness t."""
    # least-squares fit of the closed-TE NACA 0012 half-thickness, N1=0.5, N2=1
    base = np.array([0.1717, 0.1536, 0.1617, 0.1354, 0.1461, 0.1435]) * (t / 0.12)
    return CstParams(base[0], tuple(base[1:]), tuple(base[1:]))


__all__ = [
    "SOLVERS",
    "N_SIDE",
    "GeometryError",
    "SolverConfigError",
    "SolverProtocolError",
    "OperatingPoint",
    "AeroFeatures",
    "SolverResult",
    "evaluate_surrogate",
    "evaluate_xfoil",
    "evaluate_one",
    "evaluate_batch",
    "find_xfoil",
    "parse_polar",
    "xfoil_script",
    "nominal_thickness_params",
]
