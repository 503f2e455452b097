"""Empirical degree-1/degree-2 Chow parameters of a sampled target."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActivationSpec, NetworkParams, SampleSet, get_activation

__all__ = [
    "ChowMatrix",
    "MeanEstimate",
    "analytic_chow2",
    "chow_sample_size",
    "chow_spectral_error",
    "estimate_chow2",
    "estimate_mean",
]

_CHUNK = 65536


@dataclass(frozen=True)
class ChowMatrix:
    """Estimate of ``E[f(x) x x^T]``."""

    m_hat: np.ndarray
    n_used: int
    target_tol: float | None = None


@dataclass(frozen=True)
class MeanEstimate:
    mu_hat: float
    n_used: int


def chow_sample_size(d: int, k: int, eps: float, mult: float = 50.0) -> int:
    """Default sample count ``ceil(mult * d * k * log(d + 3) / eps**2)``."""
    return math.ceil(mult * d * k * math.log(d + 3) / eps**2)


def estimate_chow2(samples: SampleSet, target_tol: float | None = None) -> ChowMatrix:
    """Symmetrized ``(1/N) sum_i y_i x_i x_i^T``.

    Partial sums are accumulated chunk by chunk in a fixed order, so the
    result is bit-reproducible.
    """
    n = len(samples)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    xs, ys = samples.xs, samples.ys
    acc = np.zeros((samples.d, samples.d))
    for start in range(0, n, _CHUNK):
        x = xs[start : start + _CHUNK]
        acc += (x * ys[start : start + _CHUNK, None]).T @ x
    acc /= n
    return ChowMatrix((acc + acc.T) / 2.0, n, target_tol)


def estimate_mean(samples: SampleSet) -> MeanEstimate:
    """Sample mean of the labels (may be negative)."""
    return MeanEstimate(float(np.mean(samples.ys)), len(samples))


def analytic_chow2(params: NetworkParams, act: ActivationSpec | str = "relu") -> np.ndarray:
    """``B1 * sum(alpha) * I + C1 * sum_i alpha_i w_i w_i^T``."""
    m = get_activation(act).moments
    W = params.weights
    return m.B1 * params.alpha.sum() * np.eye(params.d) + m.C1 * (W.T * params.alpha) @ W


def chow_spectral_error(m_hat: ChowMatrix | np.ndarray, params: NetworkParams, act="relu") -> float:
    """Spectral norm of ``m_hat`` minus the analytic Chow matrix."""
    m = m_hat.m_hat if isinstance(m_hat, ChowMatrix) else np.asarray(m_hat)
    diff = m - analytic_chow2(params, act)
    diff = (diff + diff.T) / 2.0
    return float(np.max(np.abs(np.linalg.eigvalsh(diff))))
