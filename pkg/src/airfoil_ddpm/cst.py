"""CST (class/shape transformation) airfoil geometry.

An airfoil is described by 11 Bernstein coefficients: a leading-edge
coefficient shared by both surfaces plus five further coefficients per side.
The lower surface height is the negated CST expression, so positive
coefficients on both sides give a closed, positive-thickness section.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

N_SIDE = 6  # coefficients per surface, degree-5 basis
LATENT_DIM = 2 * N_SIDE - 1
PARAM_NAMES = ("a0", "l1", "l2", "l3", "l4", "l5", "u1", "u2", "u3", "u4", "u5")

_BINOM = np.array([comb(N_SIDE - 1, i) for i in range(N_SIDE)], dtype=float)


@dataclass(frozen=True)
class CstParams:
    a0: float
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != N_SIDE - 1 or len(self.upper) != N_SIDE - 1:
            raise ValueError(f"expected {N_SIDE - 1} coefficients per side")

    def to_vector(self) -> np.ndarray:
        return np.array([self.a0, *self.lower, *self.upper], dtype=float)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "CstParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (LATENT_DIM,):
            raise ValueError(f"expected a {LATENT_DIM}-vector, got shape {v.shape}")
        return cls(v[0], tuple(v[1:N_SIDE]), tuple(v[N_SIDE:]))

    def upper_coeffs(self) -> np.ndarray:
        return np.array([self.a0, *self.upper])

    def lower_coeffs(self) -> np.ndarray:
        return np.array([self.a0, *self.lower])


@dataclass(frozen=True)
class ShapeClass:
    n1: float = 0.5
    n2: float = 1.0
    chord: float = 1.0

    def __post_init__(self):
        if self.n1 <= 0 or self.n2 <= 0:
            raise ValueError("class exponents must be positive")


@dataclass(frozen=True)
class AirfoilCoordinates:
    """Selig-ordered points: upper TE -> LE -> lower TE."""

    points: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return len(self.points)


def bernstein_basis(s, n_coeffs: int = N_SIDE) -> np.ndarray:
    """Basis matrix of shape (len(s), n_coeffs)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    n = n_coeffs - 1
    binom = _BINOM if n_coeffs == N_SIDE else np.array([comb(n, i) for i in range(n_coeffs)], float)
    i = np.arange(n_coeffs)
    return binom * s[:, None] ** i * (1.0 - s[:, None]) ** (n - i)


def bernstein_eval(coeffs, s):
    """Evaluate sum_i A_i C(n,i) s^i (1-s)^(n-i); scalar in, scalar out."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (N_SIDE,):
        raise ValueError(f"expected {N_SIDE} coefficients, got {coeffs.shape}")
    out = bernstein_basis(s) @ coeffs
    return float(out[0]) if np.ndim(s) == 0 else out


def class_function(s, shape: ShapeClass = ShapeClass()) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return s**shape.n1 * (1.0 - s) ** shape.n2


def surface_height(params: CstParams, shape: ShapeClass, side: str, s):
    """y/c of one surface at chordwise fraction(s) s."""
    if side == "upper":
        coeffs, sign = params.upper_coeffs(), 1.0
    elif side == "lower":
        coeffs, sign = params.lower_coeffs(), -1.0
    else:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    y = sign * class_function(np.atleast_1d(s), shape) * (bernstein_basis(s) @ coeffs)
    return float(y[0]) if np.ndim(s) == 0 else y


def cosine_stations(m: int) -> np.ndarray:
    """m+1 cosine-spaced stations from 0 to 1 inclusive."""
    x = 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))
    x[0], x[-1] = 0.0, 1.0
    return x


def discretize(params: CstParams, shape: ShapeClass = ShapeClass(), n_elements: int = 100) -> AirfoilCoordinates:
    if n_elements < 4:
        raise ValueError("n_elements must be >= 4")
    x = cosine_stations(n_elements // 2)
    yu = surface_height(params, shape, "upper", x)
    yl = surface_height(params, shape, "lower", x)
    pts = np.concatenate(
        [np.column_stack([x[::-1], yu[::-1]]), np.column_stack([x[1:], yl[1:]])]
    )
    return AirfoilCoordinates(pts)


def _segments_properly_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Vectorised strict crossing test between every segment in (p1,p2) and every one in (q1,q2)."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    p1, p2 = p1[:, None, :], p2[:, None, :]
    q1, q2 = q1[None, :, :], q2[None, :, :]
    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def is_self_intersecting(params: CstParams, shape: ShapeClass = ShapeClass(), n_elements: int = 100) -> bool:
    """Strict crossing of the two surfaces or negative thickness anywhere.

    Touching surfaces (zero thickness) do not count.
    """
    s = np.linspace(0.0, 1.0, 202)[1:-1]
    thickness = surface_height(params, shape, "upper", s) - surface_height(params, shape, "lower", s)
    if np.any(thickness < 0):
        return True
    x = cosine_stations(n_elements // 2)
    up = np.column_stack([x, surface_height(params, shape, "upper", x)])
    lo = np.column_stack([x, surface_height(params, shape, "lower", x)])
    return bool(_segments_properly_intersect(up[:-1], up[1:], lo[:-1], lo[1:]).any())


def export_dat(coords: AirfoilCoordinates, name: str) -> str:
    lines = [name] + [f"{x:.6f} {y:.6f}" for x, y in coords.points]
    return "\n".join(lines) + "\n"


def import_dat(text: str) -> tuple[str, AirfoilCoordinates]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty airfoil file")
    name = lines[0].strip()
    try:
        pts = np.array([[float(tok) for tok in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise ValueError(f"malformed coordinate line: {exc}") from None
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected two columns of coordinates")
    return name, AirfoilCoordinates(pts)
