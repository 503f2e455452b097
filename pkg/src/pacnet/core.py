"""Networks, activations and the noisy Gaussian example oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .quadrature import gaussian_expectation
from .rng import RngStream

__all__ = [
    "ActivationMoments",
    "ActivationSpec",
    "NetworkParams",
    "NoiseKind",
    "NoiseModel",
    "SampleSet",
    "activation_moments",
    "ExampleOracle",
    "draw_samples",
    "eval_network",
    "get_activation",
    "make_oracle",
    "random_network",
]


def relu(t):
    return np.maximum(t, 0.0)


def softplus(t):
    return np.logaddexp(0.0, t)


def sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=float)))


def identity(t):
    return np.asarray(t, dtype=float)


def cube(t):
    return np.asarray(t, dtype=float) ** 3


def smooth_sign(t):
    t = np.asarray(t, dtype=float)
    return t / np.sqrt(1.0 + t * t)


# name -> (function, Lipschitz constant on the real line)
_ACTIVATIONS: dict[str, tuple[Callable, float]] = {
    "relu": (relu, 1.0),
    "softplus": (softplus, 1.0),
    "sigmoid": (sigmoid, 0.25),
    "tanh": (np.tanh, 1.0),
    "identity": (identity, 1.0),
    "abs": (np.abs, 1.0),
}


@dataclass(frozen=True)
class ActivationMoments:
    """Gaussian moments of an activation, ``t ~ N(0, 1)``."""

    B1: float  # E[phi(t)]
    C: float  # E[phi(t) t]
    C1: float  # E[phi(t) (t^2 - 1)]
    B2: float  # E[phi(t)^2]
    B4: float  # E[phi(t)^4]


def activation_moments(act: Callable, quad_nodes: int = 128) -> ActivationMoments:
    """Quadrature values of B1, C, C1, B2, B4 for ``act``.

    The integral is split at the origin (see :mod:`pacnet.quadrature`), so
    activations with a kink at zero are integrated exactly when they are
    piecewise polynomial.
    """
    def e(g):
        return gaussian_expectation(g, quad_nodes)

    return ActivationMoments(
        B1=e(lambda t: act(t)),
        C=e(lambda t: act(t) * t),
        C1=e(lambda t: act(t) * (t * t - 1.0)),
        B2=e(lambda t: act(t) ** 2),
        B4=e(lambda t: act(t) ** 4),
    )


@dataclass(frozen=True)
class ActivationSpec:
    """An activation with its Lipschitz constant and cached Gaussian moments."""

    name: str
    eval: Callable = field(repr=False)
    lipschitz_L: float
    moments: ActivationMoments = field(repr=False)

    def __call__(self, t):
        return self.eval(t)

    @property
    def nonnegative(self) -> bool:
        probe = np.linspace(-50.0, 50.0, 20001)
        return bool(np.all(self.eval(probe) >= 0.0))


def get_activation(name: str | ActivationSpec, quad_nodes: int = 128) -> ActivationSpec:
    """Look up a named activation (``relu``, ``softplus``, ``sigmoid``, ...)."""
    if isinstance(name, ActivationSpec):
        return name
    try:
        fn, lip = _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(_ACTIVATIONS)}") from None
    return _cached_spec(name, quad_nodes, fn, lip)


_SPEC_CACHE: dict[tuple[str, int], ActivationSpec] = {}


def _cached_spec(name, quad_nodes, fn, lip):
    key = (name, quad_nodes)
    if key not in _SPEC_CACHE:
        _SPEC_CACHE[key] = ActivationSpec(name, fn, lip, activation_moments(fn, quad_nodes))
    return _SPEC_CACHE[key]


@dataclass(frozen=True)
class NetworkParams:
    """``f(x) = sum_i alpha[i] * phi(<weights[i], x>)`` with unit weight rows.

    ``k = 0`` (no units) is the zero network.
    """

    alpha: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != alpha.shape[0]:
            raise ValueError(
                f"weights must have shape (k, d) with k={alpha.shape[0]}, got {weights.shape}"
            )
        if np.any(alpha <= 0):
            raise ValueError("coefficients must be strictly positive")
        norms = np.linalg.norm(weights, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError(f"weight rows must be unit vectors, got norms {norms}")
        alpha.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_vectors(cls, vectors, d: int | None = None) -> "NetworkParams":
        """Build from unnormalized rows: ``alpha = |v|``, ``w = v / |v|``."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if vectors.size == 0:
            return cls.zero(d if d is not None else vectors.shape[-1])
        norms = np.linalg.norm(vectors, axis=1)
        keep = norms > 0
        return cls(norms[keep], vectors[keep] / norms[keep, None])

    @classmethod
    def zero(cls, d: int) -> "NetworkParams":
        return cls(np.zeros(0), np.zeros((0, d)))

    @property
    def k(self) -> int:
        return self.alpha.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


def eval_network(params: NetworkParams, x, act: ActivationSpec | str = "relu") -> np.ndarray | float:
    """Evaluate the network at one point ``x`` of shape (d,) or a batch (n, d)."""
    act = get_activation(act)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.d:
        raise ValueError(f"input dimension {x.shape[-1]} does not match network dimension {params.d}")
    if params.k == 0:
        out = np.zeros(x.shape[:-1])
    else:
        out = act(x @ params.weights.T) @ params.alpha
    return float(out) if out.ndim == 0 else out


def random_network(d: int, k: int, rng: np.random.Generator, alpha_range=(0.5, 1.5)) -> NetworkParams:
    """Uniform coefficients in ``alpha_range`` and Haar-random unit weights."""
    w = rng.standard_normal((k, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    alpha = rng.uniform(*alpha_range, size=k)
    return NetworkParams(alpha, w)


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "bounded-uniform"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive label noise with standard deviation ``sigma``."""

    sigma: float = 0.0
    kind: NoiseKind = NoiseKind.GAUSSIAN

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        object.__setattr__(self, "kind", NoiseKind(self.kind))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind is NoiseKind.GAUSSIAN:
            return self.sigma * rng.standard_normal(n)
        half = math.sqrt(3.0) * self.sigma
        return rng.uniform(-half, half, size=n)


@dataclass(frozen=True)
class SampleSet:
    """An immutable batch of labelled examples."""

    xs: np.ndarray
    ys: np.ndarray
    sigma: float
    seed: RngStream | None = None

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float).reshape(-1)
        if xs.ndim != 2 or xs.shape[0] != ys.shape[0]:
            raise ValueError(f"xs rows ({xs.shape}) and ys length ({ys.shape[0]}) disagree")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return self.ys.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]


def draw_samples(
    params: NetworkParams,
    act: ActivationSpec | str,
    noise: NoiseModel,
    n: int,
    rng: RngStream,
) -> SampleSet:
    """Draw ``n`` examples ``(x, f(x) + xi)`` with ``x ~ N(0, I_d)``."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    gen = rng.generator()
    xs = gen.standard_normal((n, params.d))
    xi = noise.draw(gen, n)
    ys = eval_network(params, xs, act) + xi
    return SampleSet(xs, ys, noise.sigma, rng)


class ExampleOracle:
    """Noisy example oracle: each call returns fresh, independent samples."""

    def __init__(self, params: NetworkParams, act, noise: NoiseModel, rng: RngStream):
        self.params = params
        self.act = get_activation(act)
        self.noise = noise
        self.rng = rng
        self.calls = 0

    @property
    def d(self) -> int:
        return self.params.d

    def __call__(self, n: int) -> SampleSet:
        stream = self.rng.substream(self.calls)
        self.calls += 1
        return draw_samples(self.params, self.act, self.noise, n, stream)


def make_oracle(params: NetworkParams, act, noise: NoiseModel, rng: RngStream) -> ExampleOracle:
    return ExampleOracle(params, act, noise, rng)
