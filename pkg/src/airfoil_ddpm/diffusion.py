"""DDPM noise schedule, closed-form forward process, training and conditional sampling."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .cst import CstParams
from .neural import (
    Checkpoint,
    FlatAdam,
    NoiseEstimator,
    forward,
    loss_and_gradients,
)

log = logging.getLogger(__name__)

EpsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class TrainingError(RuntimeError):
    pass


class SamplingError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state during reverse process at step t={step}")
        self.step = step


@dataclass(frozen=True)
class NoiseSchedule:
    """Tables indexed by step t = 1..T via ``beta(t)`` etc.; arrays are 0-based."""

    betas: np.ndarray
    beta_start: float
    beta_end: float

    def __post_init__(self):
        b = self.betas
        if b.ndim != 1 or len(b) < 1 or not np.all((b > 0) & (b < 1)):
            raise ValueError("betas must be a non-empty vector in (0, 1)")

    @property
    def t_max(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def alpha_bar(self, t):
        """Cumulative product at step t, with alpha_bar(0) = 1."""
        ab = np.concatenate([[1.0], self.alpha_bars])
        return ab[np.asarray(t)]

    def to_dict(self) -> dict:
        return {"beta_start": self.beta_start, "beta_end": self.beta_end, "t_max": self.t_max}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return linear_schedule(d["beta_start"], d["beta_end"], d["t_max"])


def linear_schedule(beta_start: float = 1e-3, beta_end: float = 0.2, t_max: int = 1000) -> NoiseSchedule:
    if not (0 < beta_start <= beta_end < 1):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if t_max == 1:
        betas = np.array([beta_start], dtype=float)
    else:
        betas = beta_start + np.arange(t_max) / (t_max - 1) * (beta_end - beta_start)
    return NoiseSchedule(betas, float(beta_start), float(beta_end))


def forward_noise(x0, t, eps, schedule: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; t may be a scalar or one step per row."""
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > schedule.t_max):
        raise ValueError(f"t must lie in [1, {schedule.t_max}]")
    ab = schedule.alpha_bar(t_arr)
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if t_arr.ndim == 1:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def network_input(x, t_norm, cond) -> np.ndarray:
    """Stack [x_t, t/T, features] row-wise."""
    n = len(x)
    t_col = np.broadcast_to(np.asarray(t_norm, dtype=float).reshape(-1, 1), (n, 1))
    cond = np.asarray(cond, dtype=float)
    if cond.ndim == 1:
        cond = np.broadcast_to(cond, (n, cond.shape[0]))
    return np.hstack([x, t_col, cond])


# --- training ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 1e-4
    patience: int = 2000
    max_epochs: int = 100000
    seed: int = 0
    max_steps: Optional[int] = None
    eval_seed: int = 12345
    val_draws: int = 8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.val_draws < 1:
            raise ValueError("val_draws must be >= 1")


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    steps: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "validation_loss"])
            for e, tr, va in zip(self.epochs, self.train_loss, self.validation_loss):
                w.writerow([e, repr(tr), repr(va)])


def _diffusion_batch(x0, cond, t, eps, schedule):
    xt = forward_noise(x0, t, eps, schedule)
    return network_input(xt, t / schedule.t_max, cond)


def validation_loss(model: NoiseEstimator, x_val, f_val, schedule: NoiseSchedule, draws) -> float:
    t, eps = draws
    x0 = np.tile(x_val, (len(t) // len(x_val), 1))
    f = np.tile(f_val, (len(t) // len(f_val), 1))
    pred = forward(model, _diffusion_batch(x0, f, t, eps, schedule))
    return float(np.mean((pred - eps) ** 2))


def train(
    x_train,
    f_train,
    x_val,
    f_val,
    schedule: NoiseSchedule,
    model: NoiseEstimator,
    config: TrainConfig = TrainConfig(),
    rng: Optional[np.random.Generator] = None,
) -> tuple[NoiseEstimator, TrainHistory]:
    """Noise-prediction training with early stopping on the validation objective.

    All arrays are already normalized. Returns the best-validation model.
    """
    x_train, f_train = np.asarray(x_train, float), np.asarray(f_train, float)
    x_val, f_val = np.asarray(x_val, float), np.asarray(f_val, float)
    if len(x_train) == 0 or len(x_val) == 0:
        raise TrainingError("empty training or validation split")
    n, d = x_train.shape
    if model.n_in != d + 1 + f_train.shape[1] or model.n_out != d:
        raise TrainingError(
            f"model shape {model.layer_sizes} does not fit latent {d} / features {f_train.shape[1]}"
        )
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    T = schedule.t_max

    eval_rng = np.random.default_rng(config.eval_seed)
    m = len(x_val) * config.val_draws
    val_draws = (eval_rng.integers(1, T + 1, size=m), eval_rng.standard_normal((m, d)))

    opt = FlatAdam(model)
    model = opt.model
    hist = TrainHistory()
    best_model, best_val = opt.snapshot(), validation_loss(model, x_val, f_val, schedule, val_draws)
    wait = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            t = rng.integers(1, T + 1, size=len(idx))
            eps = rng.standard_normal((len(idx), d))
            inp = _diffusion_batch(x_train[idx], f_train[idx], t, eps, schedule)
            loss, grads = loss_and_gradients(model, inp, eps)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, step {hist.steps}")
            opt.update(grads, config.learning_rate)
            losses.append(loss)
            hist.steps += 1
            if config.max_steps is not None and hist.steps >= config.max_steps:
                break
        val = validation_loss(model, x_val, f_val, schedule, val_draws)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        hist.epochs.append(epoch)
        hist.train_loss.append(float(np.mean(losses)))
        hist.validation_loss.append(val)
        if val < best_val:
            best_val, best_model, hist.best_epoch, wait = val, opt.snapshot(), epoch, 0
        else:
            wait += 1
        if epoch % 500 == 0:
            log.info("epoch %d train %.5f val %.5f best %.5f", epoch, hist.train_loss[-1], val, best_val)
        if wait >= config.patience:
            break
        if config.max_steps is not None and hist.steps >= config.max_steps:
            break
    return best_model, hist


# --- sampling ---------------------------------------------------------------

def reverse_process(
    estimator: Union[NoiseEstimator, EpsFn],
    schedule: NoiseSchedule,
    cond,
    n: int,
    latent_dim: int,
    rng: np.random.Generator,
    stochastic: bool = True,
    x_T: Optional[np.ndarray] = None,
    return_trajectory: bool = False,
):
    """Ancestral sampling from x_T ~ N(0, I) down to x_0, in normalized units.

    ``estimator`` is a network or a callable ``(x_t, t/T, cond) -> eps``.
    ``stochastic=False`` forces every z to zero.
    """
    if isinstance(estimator, NoiseEstimator):
        net = estimator

        def estimator(x, tn, c):
            return forward(net, network_input(x, tn, c))

    T = schedule.t_max
    betas, alphas, abars = schedule.betas, schedule.alphas, schedule.alpha_bars
    x = rng.standard_normal((n, latent_dim)) if x_T is None else np.array(x_T, dtype=float)
    traj = [x.copy()] if return_trajectory else None
    for t in range(T, 0, -1):
        i = t - 1
        eps = estimator(x, np.full(n, t / T), cond)
        x = (x - (1 - alphas[i]) / np.sqrt(1 - abars[i]) * eps) / np.sqrt(alphas[i])
        if t > 1 and stochastic:
            x = x + np.sqrt(betas[i]) * rng.standard_normal((n, latent_dim))
        if not np.all(np.isfinite(x)):
            raise SamplingError(t)
        if traj is not None:
            traj.append(x.copy())
    return (x, traj) if return_trajectory else x


def generate(ckpt: Checkpoint, features, n: int, rng: np.random.Generator,
             schedule: Optional[NoiseSchedule] = None) -> list[CstParams]:
    """Draw n airfoils for one feature triple, or one airfoil per row of an (n, 3) array."""
    schedule = schedule or NoiseSchedule.from_dict(ckpt.schedule)
    f = np.asarray(features, dtype=float)
    if f.shape[-1] != ckpt.feature_dim:
        raise ValueError(f"expected {ckpt.feature_dim} features, got {f.shape[-1]}")
    if f.ndim == 2 and len(f) != n:
        raise ValueError("per-row features must have n rows")
    cond = ckpt.feature_normalizer.apply(f)
    x0 = reverse_process(ckpt.model, schedule, cond, n, ckpt.latent_dim, rng)
    return [CstParams.from_vector(v) for v in ckpt.param_normalizer.invert(x0)]


def sample(ckpt: Checkpoint, features, rng: np.random.Generator,
           schedule: Optional[NoiseSchedule] = None) -> CstParams:
    return generate(ckpt, features, 1, rng, schedule)[0]
