"""Small fully connected network with exact backprop, Adam, z-scores and JSON checkpoints."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NoiseEstimator:
    """tanh MLP; the last layer is affine only.

    ``weights[k]`` has shape (fan_in, fan_out).
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: input size {w.shape[0]} != previous output")

    @classmethod
    def init(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "NoiseEstimator":
        """Glorot-uniform weights, zero biases."""
        ws, bs = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(tuple(ws), tuple(bs))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def with_params(self, flat: Sequence[np.ndarray]) -> "NoiseEstimator":
        n = len(self.weights)
        return NoiseEstimator(tuple(flat[:n]), tuple(flat[n:]))


def forward(model: NoiseEstimator, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != model.n_in:
        raise ValueError(f"input has {h.shape[1]} features, model expects {model.n_in}")
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if k < last:
            h = np.tanh(h)
    return h[0] if single else h


def loss_and_gradients(model: NoiseEstimator, inputs, targets):
    """Mean squared error over batch and output dims, with exact gradients.

    Returns ``(loss, grads)`` where grads follow ``model.params()`` ordering.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("need a non-empty 2-D batch")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FloatingPointError("non-finite values in batch")
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if k < last:
            h = np.tanh(h)
        acts.append(h)
    diff = h - y
    loss = float(np.mean(diff**2))
    delta = 2.0 * diff / diff.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for k in range(last, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k].T) * (1.0 - acts[k] ** 2)
    return loss, gw + gb


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, model: NoiseEstimator) -> "AdamState":
        ps = model.params()
        return cls([np.zeros_like(p) for p in ps], [np.zeros_like(p) for p in ps])


def adam_step(model: NoiseEstimator, state: AdamState, grads, lr: float):
    """One bias-corrected Adam update. Returns a new model and a new state."""
    params = model.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("gradient shapes do not match parameters")
    t = state.step + 1
    b1, b2 = state.b1, state.b2
    m = [b1 * mi + (1 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1, c2 = 1 - b1**t, 1 - b2**t
    new = [p - lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for p, mi, vi in zip(params, m, v)]
    return model.with_params(new), AdamState(m, v, t, b1, b2, state.eps)


class FlatAdam:
    """Adam over one contiguous parameter vector, updated in place.

    Performs the same element-wise arithmetic as :func:`adam_step`, so a run of
    updates is bitwise identical; it only avoids per-array Python overhead in
    long training loops. ``model`` holds views into the live vector, and
    :meth:`snapshot` returns an independent copy.
    """

    def __init__(self, model: NoiseEstimator, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        ps = model.params()
        self._shapes = [p.shape for p in ps]
        self.theta = np.concatenate([p.ravel() for p in ps])
        self.m = np.zeros_like(self.theta)
        self.v = np.zeros_like(self.theta)
        self.step = 0
        self.b1, self.b2, self.eps = b1, b2, eps
        self.model = self._build(self.theta)

    def _build(self, flat: np.ndarray) -> NoiseEstimator:
        out, pos = [], 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            out.append(flat[pos:pos + size].reshape(shape))
            pos += size
        n = len(out) // 2
        return NoiseEstimator(tuple(out[:n]), tuple(out[n:]))

    def update(self, grads, lr: float) -> None:
        g = np.concatenate([gi.ravel() for gi in grads])
        self.step += 1
        b1, b2 = self.b1, self.b2
        self.m = b1 * self.m + (1 - b1) * g
        self.v = b2 * self.v + (1 - b2) * g * g
        c1, c2 = 1 - b1**self.step, 1 - b2**self.step
        self.theta -= lr * (self.m / c1) / (np.sqrt(self.v / c2) + self.eps)

    def snapshot(self) -> NoiseEstimator:
        return self._build(self.theta.copy())


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def apply(self, v) -> np.ndarray:
        return (np.asarray(v, dtype=float) - self.mean) / self.std

    def invert(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_normalizer(rows, floor: float = 1e-8) -> Normalizer:
    """Column z-scores with the population standard deviation."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) < 2:
        raise ValueError("need at least two rows to fit a normalizer")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    small = std < floor
    warnings = tuple(f"column {i} is constant; std floored at {floor:g}" for i in np.flatnonzero(small))
    return Normalizer(mean, np.where(small, floor, std), warnings)


# --- checkpoints ------------------------------------------------------------

class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    model: NoiseEstimator
    param_normalizer: Normalizer
    feature_normalizer: Normalizer
    schedule: dict  # beta_start, beta_end, t_max

    @property
    def latent_dim(self) -> int:
        return len(self.param_normalizer.mean)

    @property
    def feature_dim(self) -> int:
        return len(self.feature_normalizer.mean)


def checkpoint_to_dict(ckpt: Checkpoint) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "latent_dim": ckpt.latent_dim,
        "feature_dim": ckpt.feature_dim,
        "layer_sizes": ckpt.model.layer_sizes,
        "weights": [w.tolist() for w in ckpt.model.weights],
        "biases": [b.tolist() for b in ckpt.model.biases],
        "param_normalizer": ckpt.param_normalizer.to_dict(),
        "feature_normalizer": ckpt.feature_normalizer.to_dict(),
        "schedule": {
            "beta_start": float(ckpt.schedule["beta_start"]),
            "beta_end": float(ckpt.schedule["beta_end"]),
            "t_max": int(ckpt.schedule["t_max"]),
        },
    }


def checkpoint_from_dict(d: dict) -> Checkpoint:
    try:
        if d.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {d.get('version')!r}")
        sizes = [int(n) for n in d["layer_sizes"]]
        ws = tuple(np.asarray(w, dtype=float) for w in d["weights"])
        bs = tuple(np.asarray(b, dtype=float) for b in d["biases"])
        if len(ws) != len(sizes) - 1:
            raise CheckpointError("layer count does not match layer_sizes")
        for k, w in enumerate(ws):
            if w.shape != (sizes[k], sizes[k + 1]):
                raise CheckpointError(f"layer {k} weight shape {w.shape} != {(sizes[k], sizes[k + 1])}")
        model = NoiseEstimator(ws, bs)
        pn = Normalizer.from_dict(d["param_normalizer"])
        fn = Normalizer.from_dict(d["feature_normalizer"])
        latent, feat = int(d["latent_dim"]), int(d["feature_dim"])
        if pn.mean.shape != (latent,) or fn.mean.shape != (feat,):
            raise CheckpointError("normalizer dimensions disagree with latent/feature dims")
        if sizes[0] != latent + 1 + feat or sizes[-1] != latent:
            raise CheckpointError("network input/output sizes disagree with latent/feature dims")
        sched = d["schedule"]
        schedule = {
            "beta_start": float(sched["beta_start"]),
            "beta_end": float(sched["beta_end"]),
            "t_max": int(sched["t_max"]),
        }
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    return Checkpoint(model, pn, fn, schedule)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Write atomically so a crash never leaves a half-written checkpoint."""
    path = Path(path)
    text = json.dumps(checkpoint_to_dict(ckpt))
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise CheckpointError(f"corrupt checkpoint {path}: not a JSON object")
    return checkpoint_from_dict(d)
