"""Two-state discrete denoising diffusion over topology tensors.

The forward chain perturbs each binary entry independently with the doubly
stochastic transition matrix

    Q_k = [[1 - beta_k, beta_k], [beta_k, 1 - beta_k]],

whose stationary distribution is uniform, so q(x_k | x_0) -> [0.5, 0.5] for
large k.  All distribution math is exact 64-bit arithmetic on the 2-state
chain; the closed-form posterior

    q(x_{k-1} | x_k, x_0) = Cat(p = x_k Q_k^T (.) x_0 Qbar_{k-1} / x_0 Qbar_k x_k^T)

is used both for training targets and for ancestral sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ContractError, ParameterError

PROB_FLOOR = 1e-12  # guards logs/KL against exact zeros from confident denoisers


def transition_matrix(beta: float) -> np.ndarray:
    """Single-step 2x2 transition matrix for noise level beta in (0, 1)."""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return np.array([[1.0 - beta, beta], [beta, 1.0 - beta]], dtype=np.float64)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step noise levels with cached transition and cumulative matrices."""

    beta: np.ndarray  # (K,), beta[k-1] = noise level of step k
    Q: np.ndarray = field(repr=False, default=None)  # (K, 2, 2)
    Q_bar: np.ndarray = field(repr=False, default=None)  # (K, 2, 2) products Q_1..Q_k

    @property
    def K(self) -> int:
        return len(self.beta)

    def q_step(self, k: int) -> np.ndarray:
        self._check_step(k)
        return self.Q[k - 1]

    def q_bar(self, k: int) -> np.ndarray:
        self._check_step(k)
        return self.Q_bar[k - 1]

    def _check_step(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ParameterError(f"step k={k} outside 1..{self.K}")


def make_schedule(K: int, beta_1: float, beta_K: float) -> DiffusionSchedule:
    """Linear beta schedule: beta_k = (k-1)(beta_K - beta_1)/(K-1) + beta_1."""
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    if not (0.0 < beta_1 <= beta_K < 1.0):
        raise ParameterError(
            f"need 0 < beta_1 <= beta_K < 1, got beta_1={beta_1}, beta_K={beta_K}"
        )
    if K == 1:
        beta = np.array([beta_1], dtype=np.float64)
    else:
        k = np.arange(1, K + 1, dtype=np.float64)
        beta = (k - 1.0) * (beta_K - beta_1) / (K - 1.0) + beta_1
    Q = np.stack([transition_matrix(b) for b in beta])
    Q_bar = np.empty_like(Q)
    Q_bar[0] = Q[0]
    for i in range(1, K):
        Q_bar[i] = Q_bar[i - 1] @ Q[i]
    return DiffusionSchedule(beta=beta, Q=Q, Q_bar=Q_bar)


def _as_state(x) -> np.ndarray:
    x = np.asarray(x)
    if not np.isin(x, (0, 1)).all():
        raise ParameterError("states must be 0 or 1")
    return x.astype(np.intp)


def forward_marginal(schedule: DiffusionSchedule, k: int, x0) -> np.ndarray:
    """q(x_k | x_0) rows; x0 may be a scalar state or an array of states.

    Returns probabilities with a trailing axis of length 2.
    """
    qb = schedule.q_bar(k)
    return qb[_as_state(x0)]


def forward_sample(x0, schedule: DiffusionSchedule, k: int, seed) -> np.ndarray:
    """Draw x_k ~ q(x_k | x_0) entrywise in one shot (no k-step simulation).

    `seed` is an integer root seed or a prepared numpy Generator.
    """
    gen = seed if isinstance(seed, np.random.Generator) else rng.stream(seed)
    x0 = _as_state(x0)
    p1 = schedule.q_bar(k)[x0, 1]  # P(x_k = 1) per entry
    return (gen.random(x0.shape) < p1).astype(np.uint8)


def posterior(schedule: DiffusionSchedule, k: int, x_k, x0) -> np.ndarray:
    """Closed-form q(x_{k-1} | x_k, x_0), entrywise over arrays.

    For k = 1 the posterior over x_0 collapses to the point mass at x0.
    """
    schedule._check_step(k)
    x_k = _as_state(x_k)
    x0 = _as_state(x0)
    if k == 1:
        out = np.zeros(x0.shape + (2,), dtype=np.float64)
        np.put_along_axis(out, x0[..., None], 1.0, axis=-1)
        return out
    qk = schedule.q_step(k)
    qb_prev = schedule.q_bar(k - 1)
    # numerator_j = Q_k[j, x_k] * Qbar_{k-1}[x0, j]
    num = np.moveaxis(qk[:, x_k], 0, -1) * qb_prev[x0]
    denom = num.sum(axis=-1, keepdims=True)
    assert (denom > 0).all(), "positive Q entries make a zero denominator impossible"
    return num / denom


def reverse_distribution(
    schedule: DiffusionSchedule, k: int, x_k, denoiser_probs
) -> np.ndarray:
    """p(x_{k-1} | x_k) = sum over x0~ of q(x_{k-1} | x_k, x0~) p(x0~ | x_k).

    denoiser_probs carries a trailing axis of length 2 over the clean state
    and must be normalized to 1e-6.
    """
    p0 = np.asarray(denoiser_probs, dtype=np.float64)
    if p0.shape[-1] != 2:
        raise ContractError(f"denoiser probs need a trailing axis of 2, got {p0.shape}")
    if np.abs(p0.sum(axis=-1) - 1.0).max() > 1e-6:
        raise ContractError("denoiser probabilities do not sum to 1")
    x_k = _as_state(x_k)
    zeros = np.zeros_like(x_k)
    mix = (
        p0[..., :1] * posterior(schedule, k, x_k, zeros)
        + p0[..., 1:] * posterior(schedule, k, x_k, zeros + 1)
    )
    return mix


def vlb_loss(x0, x_k, denoiser_probs, schedule: DiffusionSchedule, k: int, lam: float) -> float:
    """Variational loss at step k, averaged over all entries.

    KL(q(x_{k-1}|x_k,x_0) || p(x_{k-1}|x_k)) - lam * log p(x_0|x_k), with a
    1e-12 probability floor inside the logs.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    x0 = _as_state(x0)
    x_k = _as_state(x_k)
    p0 = np.asarray(denoiser_probs, dtype=np.float64)
    q_true = posterior(schedule, k, x_k, x0)
    p_mix = reverse_distribution(schedule, k, x_k, p0)
    kl = np.sum(
        q_true * (np.log(q_true + PROB_FLOOR) - np.log(p_mix + PROB_FLOOR)), axis=-1
    )
    ce = -np.log(np.take_along_axis(p0, x0[..., None], axis=-1)[..., 0] + PROB_FLOOR)
    return float(np.mean(kl + lam * ce))


def sample_topologies(
    denoiser, schedule: DiffusionSchedule, shape: tuple[int, int, int], seed: int, count: int, start_index: int = 0
) -> np.ndarray:
    """Ancestral sampling of `count` binary tensors of the given (C, M, M) shape.

    Pattern i draws every random number from the stream (seed, start_index+i),
    so results do not depend on batching or worker layout.  T_K starts uniform
    over {0,1}; steps K..2 sample from the reverse distribution and the final
    step draws directly from the denoiser's p(x0~ | x_1).
    """
    gens = [rng.stream(seed, start_index + i) for i in range(count)]
    x = np.stack([g.integers(0, 2, size=shape, dtype=np.uint8) for g in gens])
    for k in range(schedule.K, 1, -1):
        p0 = denoiser.predict(x, k)
        pm = reverse_distribution(schedule, k, x, p0)
        for i, g in enumerate(gens):
            x[i] = (g.random(shape) < pm[i, ..., 1]).astype(np.uint8)
    p0 = denoiser.predict(x, 1)
    for i, g in enumerate(gens):
        x[i] = (g.random(shape) < p0[i, ..., 1]).astype(np.uint8)
    return x


def sample_topology(
    denoiser, schedule: DiffusionSchedule, shape: tuple[int, int, int], seed: int, index: int = 0
) -> np.ndarray:
    """Sample one tensor; equals sample_topologies entry `index` bit for bit."""
    return sample_topologies(denoiser, schedule, shape, seed, 1, start_index=index)[0]
