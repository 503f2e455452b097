"""Spectral dimension reduction, cover search and candidate selection.

The pipeline mirrors the positive-coefficient learner:

1. estimate the Chow matrix ``E[f(x) x x^T]`` and keep its top-k eigenvectors;
2. estimate ``E[f]`` to bound the coefficients;
3. build a cover of the k-ball in subspace coordinates;
4. score every multiset of k cover points on fresh samples with a
   median-of-means estimate of the squared error, and keep the best.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .chow import ChowMatrix, MeanEstimate, chow_sample_size, estimate_chow2, estimate_mean
from .core import ActivationSpec, NetworkParams, SampleSet, get_activation

__all__ = [
    "BudgetError",
    "Candidate",
    "Cover",
    "LearnConfig",
    "LearnResult",
    "Subspace",
    "build_cover",
    "candidate_count",
    "cover_radius",
    "empirical_sq_error",
    "enumerate_candidates",
    "learn",
    "mom_buckets",
    "nn_learner",
    "subspace_residual",
    "top_k_subspace",
]


class BudgetError(RuntimeError):
    """The candidate sweep would exceed the configured cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} candidates exceed the configured cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class LearnConfig:
    """Learner settings.

    ``cover_eps`` defaults to ``eps``. ``c`` is the noise multiplier in the
    coefficient bound; ``delta`` the failure probability used to size the
    median-of-means buckets.
    """

    k: int
    eps: float
    sigma: float = 0.0
    activation: str = "relu"
    chow_mult: float = 50.0
    mean_mult: float = 50.0
    select_mult: float = 1.0
    min_bucket_size: int = 64
    delta: float = 0.1
    c: float = 2.0
    cover_eps: float | None = None
    max_candidates: int = 2_000_000

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.cover_eps is not None and not 0 < self.cover_eps < 1:
            raise ValueError(f"cover_eps must lie in (0, 1), got {self.cover_eps}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def grid_eps(self) -> float:
        return self.eps if self.cover_eps is None else self.cover_eps

    def n_chow(self, d: int) -> int:
        return chow_sample_size(d, self.k, self.eps, self.chow_mult)

    def n_mean(self, act: ActivationSpec) -> int:
        return math.ceil(self.mean_mult * self.k * max(act.lipschitz_L**2, act.moments.B2))

    def n_select(self, n_candidates: int) -> int:
        base = self.select_mult * self.k**4 * math.log(max(n_candidates, 2) / self.delta) / self.eps**4
        return max(math.ceil(base), self.min_bucket_size * mom_buckets(n_candidates, self.delta))


def mom_buckets(n_candidates: int, delta: float) -> int:
    """Median-of-means bucket count ``max(9, ceil(8 ln(count / delta)))``."""
    return max(9, math.ceil(8.0 * math.log(max(n_candidates, 1) / delta)))


# --------------------------------------------------------------------------
# dimension reduction


@dataclass(frozen=True)
class Subspace:
    """Orthonormal basis (d, k) of the retained eigenvectors, eigenvalues descending."""

    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def k(self) -> int:
        return self.basis.shape[1]


def top_k_subspace(m: ChowMatrix | np.ndarray, k: int) -> Subspace:
    """Eigenvectors of the k algebraically largest eigenvalues.

    Each eigenvector's sign is fixed so its largest-magnitude entry is
    positive, making the basis a deterministic function of ``m``.
    """
    m = m.m_hat if isinstance(m, ChowMatrix) else np.asarray(m, dtype=float)
    d = m.shape[0]
    if k > d:
        raise ValueError(f"k={k} exceeds the dimension d={d}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    vals = vals[::-1][:k].copy()
    vecs = vecs[:, ::-1][:, :k].copy()
    lead = np.argmax(np.abs(vecs), axis=0)
    vecs *= np.sign(vecs[lead, np.arange(k)])
    return Subspace(vecs, vals)


def subspace_residual(sub: Subspace, params: NetworkParams) -> np.ndarray:
    """``|w_i - proj(w_i)|`` for every weight row."""
    W = params.weights
    proj = (W @ sub.basis) @ sub.basis.T
    return np.clip(np.linalg.norm(W - proj, axis=1), 0.0, 1.0)


# --------------------------------------------------------------------------
# cover


def cover_radius(mean: MeanEstimate | float, cfg: LearnConfig, act: ActivationSpec | str | None = None) -> float:
    """Upper bound ``(2 mu + 2 c sigma) / B1`` on the coefficient sum, ``mu`` clamped at 0."""
    act = get_activation(act if act is not None else cfg.activation)
    mu = mean.mu_hat if isinstance(mean, MeanEstimate) else float(mean)
    mu = max(mu, 0.0)
    return max(0.0, 2.0 * mu + 2.0 * cfg.c * cfg.sigma) / act.moments.B1


@dataclass(frozen=True)
class Cover:
    """Points in subspace coordinates: every direction at every radial shell.

    ``points[s * len(directions) + j] = radii[s] * directions[j]``.
    """

    points: np.ndarray
    eps: float
    radius: float
    scales: int
    directions: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.repeat(self.radii, self.directions.shape[0])

    @property
    def unit_points(self) -> np.ndarray:
        return np.tile(self.directions, (self.radii.shape[0], 1))


def shell_count(eps: float) -> int:
    """Index of the innermost shell, ``ceil(ln(1/eps) / eps)``."""
    return max(1, math.ceil(math.log(1.0 / eps) / eps - 1e-9))


def lattice_directions(k: int, eps: float) -> np.ndarray:
    """Unit directions forming a chordal ``~eps/2`` net of the sphere in R^k.

    Points of the cubic lattice with spacing ``eps / sqrt(k)`` lying in the
    annulus ``1 - eps <= |p| <= 1`` are projected onto the sphere. The
    lattice covering radius is ``eps / 2``, so every point of the sphere of
    radius ``1 - eps/2`` has a lattice point within ``eps/2`` inside the
    annulus.
    """
    h = min(eps, 0.5) / math.sqrt(k)
    m = int(math.floor(1.0 / h))
    ticks = np.arange(-m, m + 1) * h
    grid = np.stack(np.meshgrid(*([ticks] * k), indexing="ij"), axis=-1).reshape(-1, k)
    norms = np.linalg.norm(grid, axis=1)
    inner = 1.0 - min(eps, 0.5)
    pts = grid[(norms >= inner - 1e-12) & (norms <= 1.0 + 1e-12)]
    dirs = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    dirs = np.unique(np.round(dirs, 12), axis=0)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def build_cover(k: int, eps: float, radius: float) -> Cover:
    """Radial shells ``(1-eps)**i * radius`` times a lattice net of directions.

    For every ``v`` with ``eps * radius <= |v| <= radius`` some point lies
    within ``eps * radius`` of ``v``, and some point shares ``v``'s direction
    up to the chordal resolution of the direction net.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    scales = shell_count(eps)
    if radius == 0:
        return Cover(np.zeros((0, k)), eps, 0.0, scales, np.zeros((0, k)), np.zeros(0))
    dirs = lattice_directions(k, eps)
    radii = radius * (1.0 - eps) ** np.arange(scales + 1)
    points = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, k)
    return Cover(points, eps, float(radius), scales, dirs, radii)


# --------------------------------------------------------------------------
# candidates


def candidate_count(cover_size: int, k: int) -> int:
    """Number of k-multisets from ``cover_size`` points."""
    return math.comb(cover_size + k - 1, k) if cover_size > 0 else 0


@dataclass(frozen=True)
class Candidate:
    """k cover points (rows of ``us``) plus their cover indices."""

    us: np.ndarray
    index: tuple[int, ...] = ()

    def network(self, sub: Subspace) -> NetworkParams:
        """Lift to R^d: ``alpha_i = |u_i|``, ``w_i = basis u_i / |u_i|``."""
        norms = np.linalg.norm(self.us, axis=1)
        keep = norms > 0
        us = self.us[keep]
        w = (us @ sub.basis.T) / norms[keep, None]
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        return NetworkParams(norms[keep], w) if keep.any() else NetworkParams.zero(sub.basis.shape[0])


def enumerate_candidates(cover: Cover, k: int) -> Iterator[Candidate]:
    """Lazily yield every k-multiset of cover points."""
    for idx in itertools.combinations_with_replacement(range(len(cover)), k):
        yield Candidate(cover.points[list(idx)], idx)


def _sorted_units(us: np.ndarray) -> np.ndarray:
    order = np.lexsort(us.T[::-1])
    return us[order]


def _mom(values: np.ndarray, buckets: int) -> float:
    means = [blk.mean() for blk in np.array_split(values, buckets)]
    return float(np.median(means))


def empirical_sq_error(
    cand: Candidate,
    sub: Subspace,
    samples: SampleSet,
    buckets: int,
    act: ActivationSpec | str = "relu",
) -> float:
    """Median over ``buckets`` contiguous blocks of the block-mean squared error.

    Units are summed in lexicographic order of their vectors, so permuting
    the candidate leaves the result bit-identical. Zero vectors contribute 0.
    """
    act = get_activation(act)
    n = len(samples)
    if buckets < 1 or n < buckets:
        raise ValueError(f"need 1 <= buckets <= N, got buckets={buckets}, N={n}")
    xp = samples.xs @ sub.basis
    pred = np.zeros(n)
    for u in _sorted_units(np.atleast_2d(cand.us)):
        r = np.linalg.norm(u)
        if r > 0:
            pred = pred + r * act(xp @ (u / r))
    return _mom((pred - samples.ys) ** 2, buckets)


# --------------------------------------------------------------------------
# the full learner


@dataclass
class LearnResult:
    network: NetworkParams
    subspace: Subspace | None = None
    chow: ChowMatrix | None = None
    mean: MeanEstimate | None = None
    radius: float = 0.0
    cover_size: int = 0
    n_candidates: int = 0
    n_select: int = 0
    buckets: int = 0
    best_error: float = float("nan")
    timings: dict = field(default_factory=dict)


def _sweep(cover: Cover, sub: Subspace, samples: SampleSet, k: int, buckets: int, act: ActivationSpec,
           chunk: int = 1 << 15):
    """Median-of-means error for every k-multiset, via per-bucket Gram matrices.

    Returns ``(errors, index array)`` in enumeration order.
    """
    xp = samples.xs @ sub.basis
    V = cover.norms[:, None] * act(cover.unit_points @ xp.T)
    y = samples.ys
    splits = np.array_split(np.arange(len(samples)), buckets)
    G = len(cover)
    gram = np.empty((buckets, G, G))
    cross = np.empty((buckets, G))
    yy = np.empty(buckets)
    sizes = np.empty(buckets)
    for b, idx in enumerate(splits):
        Vb = V[:, idx]
        gram[b] = Vb @ Vb.T
        cross[b] = Vb @ y[idx]
        yy[b] = y[idx] @ y[idx]
        sizes[b] = idx.size
    del V

    errors = []
    indices = []
    combos = itertools.combinations_with_replacement(range(G), k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        sse = np.broadcast_to(yy[:, None], (buckets, block.shape[0])).copy()
        for a in range(k):
            sse -= 2.0 * cross[:, block[:, a]]
            for c in range(k):
                sse += gram[:, block[:, a], block[:, c]]
        errors.append(np.median(sse / sizes[:, None], axis=0))
        indices.append(block)
    return np.concatenate(errors), np.concatenate(indices)


def _select(cfg: LearnConfig, act: ActivationSpec, sub: Subspace, cover: Cover, samples: SampleSet,
            buckets: int):
    errors, idx = _sweep(cover, sub, samples, cfg.k, buckets, act)
    alpha_sum = cover.norms[idx].sum(axis=1)
    order = np.lexsort((np.arange(errors.size), alpha_sum, errors))
    best = order[0]
    choice = tuple(int(i) for i in idx[best])
    return Candidate(cover.points[list(choice)], choice), float(errors[best])


class _Phases:
    """Shared phase logic for the oracle-driven and fixed-dataset learners."""

    def __init__(self, cfg: LearnConfig):
        self.cfg = cfg
        self.act = get_activation(cfg.activation)
        if not self.act.nonnegative:
            raise ValueError(f"the learner needs a non-negative activation, {self.act.name!r} is not")
        self.result = LearnResult(network=None)

    def reduce(self, chow_samples: SampleSet, d: int):
        t = time.perf_counter()
        if self.cfg.k > d:
            raise ValueError(f"k={self.cfg.k} exceeds the dimension d={d}")
        chow = estimate_chow2(chow_samples, target_tol=self.cfg.eps)
        self.result.chow = chow
        self.result.subspace = top_k_subspace(chow, self.cfg.k)
        self.result.timings["chow"] = time.perf_counter() - t

    def bound(self, mean_samples: SampleSet) -> Cover:
        self.result.mean = estimate_mean(mean_samples)
        self.result.radius = cover_radius(self.result.mean, self.cfg, self.act)
        cover = build_cover(self.cfg.k, self.cfg.grid_eps, self.result.radius)
        self.result.cover_size = len(cover)
        self.result.n_candidates = candidate_count(len(cover), self.cfg.k)
        if self.result.n_candidates > self.cfg.max_candidates:
            raise BudgetError(self.result.n_candidates, self.cfg.max_candidates)
        return cover

    def select(self, cover: Cover, select_samples: SampleSet, buckets: int) -> LearnResult:
        t = time.perf_counter()
        sub = self.result.subspace
        if len(cover) == 0:
            self.result.network = NetworkParams.zero(sub.basis.shape[0])
        else:
            self.result.buckets = buckets
            self.result.n_select = len(select_samples)
            cand, err = _select(self.cfg, self.act, sub, cover, select_samples, buckets)
            self.result.network = cand.network(sub)
            self.result.best_error = err
        self.result.timings["sweep"] = time.perf_counter() - t
        return self.result


def learn(cfg: LearnConfig, oracle) -> LearnResult:
    """Run the learner against ``oracle`` (callable ``n -> SampleSet`` with a ``d`` attribute).

    Each phase draws its own fresh samples.
    """
    ph = _Phases(cfg)
    d = oracle.d
    ph.reduce(oracle(cfg.n_chow(d)), d)
    cover = ph.bound(oracle(cfg.n_mean(ph.act)))
    if len(cover) == 0:
        return ph.select(cover, None, 0)
    n_cand = ph.result.n_candidates
    return ph.select(cover, oracle(cfg.n_select(n_cand)), mom_buckets(n_cand, cfg.delta))


def nn_learner(cfg: LearnConfig, oracle) -> NetworkParams:
    """Return the selected hypothesis network (see :func:`learn`)."""
    return learn(cfg, oracle).network
