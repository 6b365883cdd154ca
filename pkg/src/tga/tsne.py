"""Exact (O(n^2)) t-SNE.

Conditional Gaussian affinities are calibrated per point by bisection on the
precision so that each row's Shannon entropy (nats) equals ``log(perplexity)``.
The symmetrised joint ``P`` is matched by Student-t (one degree of freedom)
affinities ``Q`` in two dimensions, minimising ``KL(P || Q)`` with momentum
gradient descent, per-parameter adaptive gains and early exaggeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DimensionMismatch, PerplexityTooLarge, TooFewPoints

_EPS = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0
    min_gain: float = 0.01

    def check(self, n: int) -> None:
        if n < 4:
            raise TooFewPoints(f"t-SNE needs at least 4 points, got {n}")
        if not self.perplexity > 0:
            raise PerplexityTooLarge("perplexity must be positive")
        if not self.perplexity < (n - 1) / 3:
            raise PerplexityTooLarge(
                f"perplexity {self.perplexity} must be < (n-1)/3 = {(n - 1) / 3:.3f} for n={n}"
            )
        if self.iterations <= 0 or self.learning_rate <= 0:
            raise ValueError("iterations and learning_rate must be positive")
        if self.early_exaggeration_factor < 1 or self.early_exaggeration_iters < 0:
            raise ValueError("bad early exaggeration settings")
        for m in (self.momentum_initial, self.momentum_final):
            if not 0.0 <= m < 1.0:
                raise ValueError("momentum must lie in [0, 1)")


@dataclass
class TsneResult:
    embedding: np.ndarray
    P: np.ndarray
    kl_initial: float
    kl_final: float
    kl_trace: List[Tuple[int, float]] = field(default_factory=list)


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_entropy(d: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
    # shift by the smallest distance for numerical stability; cancels in the normalisation
    shifted = d - d.min()
    p = np.exp(-shifted * beta)
    s = p.sum()
    p /= s
    H = beta * float(np.dot(shifted, p)) + np.log(s)
    return float(H), p


def conditional_affinities(
    D: np.ndarray, perplexity: float, tol: float = 1e-10, max_iter: int = 200
) -> np.ndarray:
    """Row-stochastic ``P(j|i)`` whose entropies match ``log(perplexity)``."""
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        H, p = _row_entropy(d, beta)
        for _ in range(max_iter):
            diff = H - target
            if abs(diff) < tol:
                break
            if diff > 0:  # too flat: sharpen
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
            H, p = _row_entropy(d, beta)
        P[i, np.arange(n) != i] = p
    return P


def joint_probabilities(X: np.ndarray, perplexity: float) -> np.ndarray:
    cond = conditional_affinities(squared_distances(np.asarray(X, dtype=float)), perplexity)
    P = cond + cond.T
    return P / P.sum()


def student_t_affinities(Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(Q, W)`` where ``W = 1/(1+|y_i-y_j|^2)`` with a zero diagonal."""
    W = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(W, 0.0)
    return W / W.sum(), W


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = student_t_affinities(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], _EPS))))


def kl_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dKL/dY = 4 * sum_j (p_ij - q_ij) w_ij (y_i - y_j)."""
    Q, W = student_t_affinities(Y)
    M = (P - Q) * W
    return 4.0 * (np.diag(M.sum(axis=1)) - M) @ Y


def tsne(X: np.ndarray, cfg: TsneConfig = TsneConfig()) -> TsneResult:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("input must be a 2-D array")
    n = X.shape[0]
    cfg.check(n)

    P = joint_probabilities(X, cfg.perplexity)
    rng = np.random.default_rng(cfg.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)

    kl_initial = kl_divergence(P, Y)
    trace = [(0, kl_initial)]
    for it in range(cfg.iterations):
        exaggerate = it < cfg.early_exaggeration_iters
        momentum = cfg.momentum_initial if it < cfg.early_exaggeration_iters else cfg.momentum_final
        grad = kl_gradient(P * cfg.early_exaggeration_factor if exaggerate else P, Y)

        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, cfg.min_gain, out=gains)
        update = momentum * update - cfg.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if (it + 1) % 50 == 0 or it + 1 == cfg.iterations:
            trace.append((it + 1, kl_divergence(P, Y)))

    return TsneResult(Y, P, kl_initial, kl_divergence(P, Y), trace)
