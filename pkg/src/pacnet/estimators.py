"""scikit-learn style wrappers around the learner for a fixed dataset."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .chow import estimate_chow2
from .core import SampleSet, eval_network
from .learner import LearnConfig, _Phases, mom_buckets, top_k_subspace

__all__ = ["ChowSubspace", "PositiveNetworkRegressor"]


def _check_gaussian_design(X) -> None:
    if X.shape[1] < 1:
        raise ValueError("X needs at least one feature")


class ChowSubspace(TransformerMixin, BaseEstimator):
    """Project inputs onto the top-``k`` eigenspace of the empirical ``E[y x x^T]``.

    Inputs are assumed to be standard Gaussian.

    Parameters
    ----------
    k : int
        Subspace dimension.

    Attributes
    ----------
    components_ : ndarray of shape (n_features, k)
        Orthonormal basis, columns in decreasing eigenvalue order.
    eigenvalues_ : ndarray of shape (k,)
    chow_ : ndarray of shape (n_features, n_features)
    """

    def __init__(self, k: int = 1):
        self.k = k

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        _check_gaussian_design(X)
        chow = estimate_chow2(SampleSet(X, y, 0.0))
        sub = top_k_subspace(chow, self.k)
        self.chow_ = chow.m_hat
        self.components_ = sub.basis
        self.eigenvalues_ = sub.eigenvalues
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.components_


class PositiveNetworkRegressor(RegressorMixin, BaseEstimator):
    """Fit ``sum_i alpha_i act(<w_i, x>)`` with ``alpha_i > 0`` and unit ``w_i``.

    Rows of ``X`` should be standard Gaussian. The rows are split, in order,
    into a block for the Chow matrix, a block for the mean (which sizes the
    coefficient cover) and a block for candidate selection.

    Parameters
    ----------
    k : int
        Number of hidden units.
    eps : float
        Target accuracy; also the cover resolution unless ``cover_eps`` is set.
    sigma : float
        Known noise standard deviation.
    activation : str
        Non-negative activation name.
    chow_fraction, mean_fraction : float
        Share of rows used by the first two phases; the rest go to selection.
    delta : float
        Failure probability used for the median-of-means bucket count.
    c : float
        Noise multiplier in the coefficient bound.
    cover_eps : float or None
    max_candidates : int
        Refuse to sweep more candidates than this.

    Attributes
    ----------
    network_ : NetworkParams
    result_ : LearnResult
    """

    def __init__(
        self,
        k: int = 1,
        eps: float = 0.25,
        sigma: float = 0.0,
        activation: str = "relu",
        chow_fraction: float = 0.5,
        mean_fraction: float = 0.1,
        delta: float = 0.1,
        c: float = 2.0,
        cover_eps: float | None = None,
        max_candidates: int = 2_000_000,
    ):
        self.k = k
        self.eps = eps
        self.sigma = sigma
        self.activation = activation
        self.chow_fraction = chow_fraction
        self.mean_fraction = mean_fraction
        self.delta = delta
        self.c = c
        self.cover_eps = cover_eps
        self.max_candidates = max_candidates

    def _config(self) -> LearnConfig:
        return LearnConfig(
            k=self.k,
            eps=self.eps,
            sigma=self.sigma,
            activation=self.activation,
            delta=self.delta,
            c=self.c,
            cover_eps=self.cover_eps,
            max_candidates=self.max_candidates,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        _check_gaussian_design(X)
        if not (0 < self.chow_fraction and 0 < self.mean_fraction and self.chow_fraction + self.mean_fraction < 1):
            raise ValueError("chow_fraction and mean_fraction must be positive and sum below 1")
        n = X.shape[0]
        n_chow = int(n * self.chow_fraction)
        n_mean = int(n * self.mean_fraction)
        if min(n_chow, n_mean, n - n_chow - n_mean) < 2:
            raise ValueError(f"{n} samples are too few to split across the three phases")
        cut = [0, n_chow, n_chow + n_mean, n]
        blocks = [SampleSet(X[a:b], y[a:b], self.sigma) for a, b in zip(cut[:-1], cut[1:])]

        ph = _Phases(self._config())
        ph.reduce(blocks[0], X.shape[1])
        cover = ph.bound(blocks[1])
        buckets = mom_buckets(ph.result.n_candidates, self.delta)
        buckets = max(1, min(buckets, len(blocks[2]) // 2))
        self.result_ = ph.select(cover, blocks[2], buckets)
        self.network_ = self.result_.network
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.asarray(eval_network(self.network_, X, self.activation), dtype=float).reshape(-1)
