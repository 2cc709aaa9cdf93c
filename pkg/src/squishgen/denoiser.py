"""Denoisers predicting p(x0~ | x_k): an exact Bayes oracle and a trainable net.

The oracle enumerates a small dataset and returns the exact posterior over its
members (marginalized per entry), which gives ground-truth reverse dynamics
for tests.  The trainable denoiser is the numpy convnet from
squishgen.network, optimized with hand-implemented Adam on the variational
loss of squishgen.diffusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network, rng
from .diffusion import PROB_FLOOR, DiffusionSchedule
from .errors import ConfigurationError, ContractError, ParameterError, TrainingError

MAX_ORACLE_CELLS = 10_000  # dataset patterns x entries the oracle will enumerate


class OracleDenoiser:
    """Exact posterior over an enumerable dataset of topology tensors.

    p(x0~ = d | T_k) is proportional to prior(d) * q(T_k | d) with the
    forward marginal factorizing over entries; predict() marginalizes the
    pattern posterior down to per-entry state probabilities.
    """

    def __init__(self, dataset, schedule: DiffusionSchedule, priors=None):
        data = np.asarray(dataset, dtype=np.uint8)
        if data.size == 0:
            raise ConfigurationError("oracle dataset is empty")
        if data.ndim != 4:
            raise ConfigurationError(
                f"dataset must be (N, C, M, M), got shape {data.shape}"
            )
        if data.shape[0] * data[0].size > MAX_ORACLE_CELLS:
            raise ConfigurationError(
                f"dataset too large to enumerate: {data.shape[0]} patterns x "
                f"{data[0].size} entries > {MAX_ORACLE_CELLS}"
            )
        if priors is None:
            priors = np.full(data.shape[0], 1.0 / data.shape[0])
        else:
            priors = np.asarray(priors, dtype=np.float64)
            if priors.shape != (data.shape[0],) or (priors <= 0).any():
                raise ConfigurationError("priors must be positive, one per pattern")
            priors = priors / priors.sum()
        self.dataset = data
        self.priors = priors
        self.schedule = schedule
        self._flat = data.reshape(data.shape[0], -1).astype(np.intp)

    def pattern_posterior(self, x_k: np.ndarray, k: int) -> np.ndarray:
        """Posterior over dataset members, shape (B, N) (B=1 for one tensor)."""
        x = np.asarray(x_k, dtype=np.intp)
        batched = x.ndim == 4
        xf = x.reshape(-1, x.shape[-3] * x.shape[-2] * x.shape[-1]) if batched else x.reshape(1, -1)
        lq = np.log(self.schedule.q_bar(k)).ravel()  # index 2*x0 + xk
        idx = 2 * self._flat[:, None, :] + xf[None, :, :]
        loglik = lq[idx].sum(axis=-1) + np.log(self.priors)[:, None]  # (N, B)
        loglik -= loglik.max(axis=0, keepdims=True)
        w = np.exp(loglik)
        w /= w.sum(axis=0, keepdims=True)
        return w.T

    def predict(self, x_k: np.ndarray, k: int) -> np.ndarray:
        """Per-entry probabilities over the clean state, trailing axis of 2."""
        x = np.asarray(x_k)
        batched = x.ndim == 4
        w = self.pattern_posterior(x, k)  # (B, N)
        p1 = np.einsum("bn,ne->be", w, self._flat.astype(np.float64))
        p1 = p1.reshape((-1,) + self.dataset.shape[1:])
        out = np.stack([1.0 - p1, p1], axis=-1)
        return out if batched else out[0]


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    batch_size: int = 128
    iterations: int = 2000
    grad_clip: float = 1.0
    dropout: float = 0.1
    lam: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.iterations <= 0:
            raise ParameterError("learning_rate, batch_size, iterations must be > 0")
        if self.grad_clip <= 0:
            raise ParameterError("grad_clip must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lam < 0:
            raise ParameterError("lambda must be >= 0")


class ConvDenoiser:
    """Time-conditioned residual convnet denoiser (see squishgen.network)."""

    def __init__(self, channels: int, m: int, depth: int, width: int, params: dict):
        self.channels = channels
        self.m = m
        self.depth = depth
        self.width = width
        self.params = params

    @classmethod
    def create(cls, channels: int, m: int, depth: int = 4, width: int = 64, seed: int = 0):
        params = network.init_params(channels, depth, width, seed)
        return cls(channels, m, depth, width, params)

    def _check_shape(self, x: np.ndarray) -> None:
        if x.shape[-3:] != (self.channels, self.m, self.m):
            raise ContractError(
                f"input shape {x.shape} does not match (C, M, M)="
                f"({self.channels}, {self.m}, {self.m})"
            )

    def logits(self, x_k, k):
        x = np.asarray(x_k, dtype=np.float64)
        self._check_shape(x)
        batched = x.ndim == 4
        if not batched:
            x = x[None]
        out, _ = network.forward(self.params, x, k, self.depth)
        return out if batched else out[0]

    def predict(self, x_k, k) -> np.ndarray:
        """Per-entry probabilities; deterministic (dropout off at inference)."""
        return _softmax(self.logits(x_k, k))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def posterior_tables(schedule: DiffusionSchedule) -> np.ndarray:
    """table[k-1, d, w, j] = q(x_{k-1}=j | x_k=w, x0=d), with k=1 a point mass."""
    K = schedule.K
    table = np.empty((K, 2, 2, 2))
    eye = np.eye(2)
    table[0] = eye[:, None, :]  # k=1: j == d regardless of w
    for k in range(2, K + 1):
        qk = schedule.Q[k - 1]
        qbp = schedule.Q_bar[k - 2]
        num = qk.T[None, :, :] * qbp[:, None, :]  # [d, w, j] = Qk[j,w]*Qbp[d,j]
        table[k - 1] = num / num.sum(axis=-1, keepdims=True)
    return table


def loss_and_grad_logits(logits, x0, x_k, ks, schedule, lam, tables=None):
    """Variational loss (mean over batch and entries) and d loss / d logits.

    Matches diffusion.vlb_loss when all entries share one k; supports a
    per-sample step vector for training.
    """
    p0 = _softmax(logits)
    x0 = np.asarray(x0, dtype=np.intp)
    xk = np.asarray(x_k, dtype=np.intp)
    ks = np.asarray(ks, dtype=np.intp)
    if tables is None:
        tables = posterior_tables(schedule)
    b = x0.shape[0]
    bidx = np.arange(b).reshape((-1,) + (1,) * (x0.ndim - 1))
    # per-entry posterior slices q(x_{k-1}=j | x_k, x0~=d): shape (..., d, j)
    post = tables[ks.reshape(bidx.shape) - 1, :, xk, :]
    q_true = np.take_along_axis(post, x0[..., None, None], axis=-2)[..., 0, :]
    p_mix = np.einsum("...dj,...d->...j", post, p0)
    kl = np.sum(q_true * (np.log(q_true + PROB_FLOOR) - np.log(p_mix + PROB_FLOOR)), axis=-1)
    p0_true = np.take_along_axis(p0, x0[..., None], axis=-1)[..., 0]
    ce = -np.log(p0_true + PROB_FLOOR)
    n_terms = kl.size
    loss = float((kl + lam * ce).sum() / n_terms)

    dmix = -q_true / (p_mix + PROB_FLOOR) / n_terms
    gp0 = np.einsum("...dj,...j->...d", post, dmix)
    ce_g = np.zeros_like(p0)
    np.put_along_axis(ce_g, x0[..., None], (-lam / (p0_true + PROB_FLOOR) / n_terms)[..., None], axis=-1)
    gp0 = gp0 + ce_g
    inner = (gp0 * p0).sum(axis=-1, keepdims=True)
    dlogits = p0 * (gp0 - inner)
    return loss, dlogits


def train(
    dataset,
    schedule: DiffusionSchedule,
    config: TrainConfig,
    depth: int = 4,
    width: int = 64,
    progress=None,
) -> tuple[ConvDenoiser, list[float]]:
    """Train a ConvDenoiser; returns the model and the per-iteration loss trace.

    Each iteration samples a batch, a per-example step k uniform on 1..K,
    forward-noises to T_k in one shot, and applies a clipped Adam update.
    Raises TrainingError (with the iteration index) if the loss goes
    non-finite.
    """
    data = np.asarray(dataset, dtype=np.uint8)
    if data.ndim != 4 or data.size == 0:
        raise ConfigurationError(f"dataset must be non-empty (N, C, M, M), got {data.shape}")
    n, c, m, m2 = data.shape
    if m != m2:
        raise ConfigurationError(f"topology tensors must be square, got {data.shape}")

    model = ConvDenoiser.create(c, m, depth, width, seed=config.seed)
    opt = network.Adam(model.params, lr=config.learning_rate)
    gen = rng.stream(config.seed, "train")
    tables = posterior_tables(schedule)
    qb1 = schedule.Q_bar[:, :, 1]  # (K, 2): P(x_k=1 | x0)
    losses: list[float] = []

    for it in range(1, config.iterations + 1):
        idx = gen.integers(0, n, size=config.batch_size)
        x0 = data[idx].astype(np.intp)
        ks = gen.integers(1, schedule.K + 1, size=config.batch_size)
        p1 = qb1[ks - 1][(np.arange(config.batch_size)[:, None, None, None], x0)]
        xk = (gen.random(x0.shape) < p1).astype(np.intp)
        logits, cache = network.forward(
            model.params,
            xk.astype(np.float64),
            ks,
            model.depth,
            dropout=config.dropout,
            dropout_rng=gen,
        )
        loss, dlogits = loss_and_grad_logits(
            logits, x0, xk, ks, schedule, config.lam, tables
        )
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at iteration {it}", it)
        grads = network.backward(model.params, cache, dlogits, model.depth)
        opt.step(model.params, grads, clip=config.grad_clip)
        losses.append(loss)
        if progress is not None and it % 100 == 0:
            progress(it, loss)
    return model, losses
