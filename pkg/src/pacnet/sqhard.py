"""Hard planar instances, near-orthogonal plane packings and a simulated
correlational statistical-query oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import cube, get_activation, identity, smooth_sign
from .hermite import check_plane, expand_2d
from .quadrature import expectation_2d, kink_aligned_grid
from .rng import RngStream

__all__ = [
    "CorrelationReport",
    "HardInstance",
    "OUTER_ACTIVATIONS",
    "PackingError",
    "PlaneQuery",
    "PlaneSet",
    "PrecisionError",
    "SqOracle",
    "angular_moments",
    "hard2d_eval",
    "make_instance",
    "moment_check",
    "nonvanishing_check",
    "pairwise_correlation_report",
    "plane_gap",
    "plane_packing",
    "random_plane",
    "rotate",
    "sq_query",
]

OUTER_ACTIVATIONS: dict[str, Callable] = {
    "identity": identity,
    "tanh": np.tanh,
    "cube": cube,
    "smooth_sign": smooth_sign,
}

VANISHING_TOL = 1e-8


def _inner(phi) -> Callable:
    return get_activation(phi).eval if isinstance(phi, str) else phi


def _outer(sigma_out) -> Callable:
    if callable(sigma_out):
        return sigma_out
    try:
        return OUTER_ACTIVATIONS[sigma_out]
    except KeyError:
        raise ValueError(f"unknown outer activation {sigma_out!r}; choose from {sorted(OUTER_ACTIVATIONS)}") from None


def hard2d_eval(k: int, phi, sigma_out, xy) -> np.ndarray:
    """``sigma_out(sum_{m=1}^{2k} (-1)^m phi(x cos(pi m/k) + y sin(pi m/k)))``.

    ``xy`` has shape (2,) or (n, 2).
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    phi, sigma_out = _inner(phi), _outer(sigma_out)
    xy = np.asarray(xy, dtype=float)
    pts = np.atleast_2d(xy)
    ang = np.pi * np.arange(1, 2 * k + 1) / k
    proj = pts[:, :1] * np.cos(ang) + pts[:, 1:2] * np.sin(ang)
    signs = np.where(np.arange(1, 2 * k + 1) % 2 == 0, 1.0, -1.0)
    out = sigma_out(phi(proj) @ signs)
    return out[0] if xy.ndim == 1 else out


def rotate(xy, angle: float) -> np.ndarray:
    """Apply ``(x, y) -> (x cos a + y sin a, -x sin a + y cos a)``."""
    xy = np.asarray(xy, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    return np.stack([c * xy[..., 0] + s * xy[..., 1], -s * xy[..., 0] + c * xy[..., 1]], axis=-1)


def _planar(k, phi, sigma_out):
    return lambda pts: hard2d_eval(k, phi, sigma_out, pts)


def nonvanishing_check(k: int, phi, sigma_out, grid=None) -> float:
    """Quadrature ``E[f^2]`` of the planar hard function; ``> 1e-8`` means non-vanishing."""
    grid = kink_aligned_grid(k) if grid is None else grid
    return expectation_2d(lambda p: _planar(k, phi, sigma_out)(p) ** 2, grid)


def moment_check(k: int, phi, sigma_out, degree_cap: int, grid=None) -> dict[int, float]:
    """Largest ``|fhat(J)|`` over ``|J| = m`` for each ``m <= degree_cap``."""
    grid = kink_aligned_grid(k) if grid is None else grid
    exp = expand_2d(_planar(k, phi, sigma_out), degree_cap, grid)
    return {
        m: max(abs(exp.coeffs[(m - j, j)]) for j in range(m + 1)) for m in range(degree_cap + 1)
    }


def angular_moments(k: int, phi, sigma_out, degree_cap: int, grid=None) -> dict[tuple[int, int], complex]:
    """``E[f(z) z^a conj(z)^b]`` for ``a + b <= degree_cap``, with ``z = x + iy``.

    These vanish whenever ``a - b`` is not congruent to ``k`` mod ``2k``.
    """
    grid = kink_aligned_grid(k) if grid is None else grid
    pts, w = grid.points, grid.weights
    z = pts[:, 0] + 1j * pts[:, 1]
    fw = w * _planar(k, phi, sigma_out)(pts)
    return {
        (a, b): complex(np.dot(fw, z**a * np.conj(z) ** b))
        for a in range(degree_cap + 1)
        for b in range(degree_cap + 1 - a)
    }


@dataclass(frozen=True)
class HardInstance:
    """Planar hard function embedded through ``plane`` and scaled to unit second moment."""

    k: int
    phi: str
    sigma_out: str
    plane: np.ndarray
    z_norm: float

    def planar(self, pts) -> np.ndarray:
        return hard2d_eval(self.k, self.phi, self.sigma_out, pts)

    def g2d(self, pts) -> np.ndarray:
        """Normalized planar function."""
        return self.planar(pts) / self.z_norm

    def __call__(self, x) -> np.ndarray:
        """Normalized function on R^d, ``f(plane @ x) / z_norm``."""
        return self.g2d(np.asarray(x, dtype=float) @ self.plane.T)

    @property
    def grid(self):
        return kink_aligned_grid(self.k)


def make_instance(k: int, phi: str, sigma_out: str, plane) -> HardInstance:
    """Build a normalized hard instance; raises if the planar function vanishes."""
    plane = check_plane(plane)
    t = np.linspace(-6.0, 6.0, 241)
    out = _outer(sigma_out)
    if np.max(np.abs(out(-t) + out(t))) > 1e-12:
        raise ValueError(f"outer activation {sigma_out!r} is not odd")
    second = nonvanishing_check(k, phi, sigma_out)
    if second <= VANISHING_TOL:
        raise ValueError(
            f"vanishing instance: E[f^2] = {second:.3g} for k={k}, phi={phi}, sigma_out={sigma_out}"
        )
    plane = plane.copy()
    plane.flags.writeable = False
    return HardInstance(k, phi, sigma_out, plane, math.sqrt(second))


# --------------------------------------------------------------------------
# plane packing


def random_plane(d: int, rng: RngStream | np.random.Generator, max_attempts: int = 5) -> np.ndarray:
    """Uniformly random 2 x d matrix with orthonormal rows."""
    if d < 2:
        raise ValueError(f"d must be at least 2, got {d}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    for _ in range(max_attempts):
        g = gen.standard_normal((d, 2))
        q, r = np.linalg.qr(g)
        if np.min(np.abs(np.diag(r))) > 1e-10:
            return (q * np.sign(np.diag(r))).T
    raise RuntimeError("degenerate Gaussian draws; could not orthonormalize")


def plane_gap(A, B) -> float:
    """``|A B^T|_2`` from the closed-form singular values of a 2 x 2 matrix."""
    return _spectral_norm_2x2(np.asarray(A) @ np.asarray(B).T)


def _spectral_norm_2x2(M) -> float:
    # sum of the half-norms of the conformal and anti-conformal parts; stable
    # when the two singular values coincide
    a, b, c, d = float(M[0, 0]), float(M[0, 1]), float(M[1, 0]), float(M[1, 1])
    return 0.5 * (math.hypot(a + d, b - c) + math.hypot(a - d, b + c))


class PackingError(RuntimeError):
    """Rejection sampling ran out of attempts."""

    def __init__(self, achieved: int, requested: int, attempts: int):
        super().__init__(
            f"packed only {achieved} of {requested} planes in {attempts} draws; bound too tight"
        )
        self.achieved = achieved
        self.requested = requested
        self.attempts = attempts


@dataclass(frozen=True)
class PlaneSet:
    planes: list
    pairwise_bound: float
    attempts: int = 0
    gaps: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.planes)


def _gap_matrix(planes) -> np.ndarray:
    m = len(planes)
    gaps = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            gaps[i, j] = gaps[j, i] = plane_gap(planes[i], planes[j])
    return gaps


def plane_packing(d: int, m: int, bound: float, rng: RngStream, max_attempts: int | None = None) -> PlaneSet:
    """Greedy rejection sampling of ``m`` planes with pairwise ``|A_i A_j^T|_2 <= bound``."""
    if not 0 <= bound < 1:
        raise ValueError(f"bound must lie in [0, 1), got {bound}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    max_attempts = 10 * m if max_attempts is None else max_attempts
    gen = rng.generator()
    planes: list[np.ndarray] = []
    stacked = np.zeros((0, d))
    attempts = 0
    while len(planes) < m:
        if attempts >= max_attempts:
            raise PackingError(len(planes), m, attempts)
        attempts += 1
        P = random_plane(d, gen)
        if planes:
            prods = (stacked @ P.T).reshape(-1, 2, 2)
            if max(_spectral_norm_2x2(M) for M in prods) > bound:
                continue
        planes.append(P)
        stacked = np.vstack([stacked, P])
    gaps = _gap_matrix(planes)
    return PlaneSet(planes, float(gaps.max()) if m > 1 else 0.0, attempts, gaps)


# --------------------------------------------------------------------------
# correlation decay


@dataclass
class CorrelationReport:
    """Pairwise Monte-Carlo correlations of normalized instances and the decay bounds."""

    estimates: np.ndarray
    stderr: np.ndarray
    gaps: np.ndarray
    bound_k: np.ndarray
    bound_k1: np.ndarray
    avg_correlation: float
    n_mc: int

    k: int = 1

    @property
    def packing_bound(self) -> float:
        """Largest off-diagonal plane gap (0 for a single instance)."""
        m = self.gaps.shape[0]
        return float(self.gaps[~np.eye(m, dtype=bool)].max()) if m > 1 else 0.0

    def violations(self, n_se: float = 3.0, per_pair: bool = False) -> np.ndarray:
        """Off-diagonal pairs with ``|estimate|`` above the decay bound plus ``n_se`` standard errors.

        The bound is ``packing_bound**k`` by default, or each pair's own
        ``gap**k`` when ``per_pair`` is set.
        """
        m = self.estimates.shape[0]
        off = ~np.eye(m, dtype=bool)
        bound = self.bound_k if per_pair else self.packing_bound**self.k
        return off & (np.abs(self.estimates) > bound + n_se * self.stderr)


def pairwise_correlation_report(instances, n_mc: int, rng: RngStream, chunk: int = 1 << 15) -> CorrelationReport:
    """Estimate ``E[g_i g_j]`` on one shared Gaussian sample, all pairs at once."""
    instances = list(instances)
    m = len(instances)
    if m == 0:
        raise ValueError("need at least one instance")
    first = instances[0]
    for inst in instances[1:]:
        if (inst.k, inst.phi, inst.sigma_out) != (first.k, first.phi, first.sigma_out):
            raise ValueError("instances must share k, phi and sigma_out")
        if inst.plane.shape != first.plane.shape:
            raise ValueError("instances must share the ambient dimension")
    d = first.plane.shape[1]
    stacked = np.vstack([inst.plane for inst in instances]).T
    gen = rng.generator()
    s1 = np.zeros((m, m))
    s2 = np.zeros((m, m))
    for start in range(0, n_mc, chunk):
        x = gen.standard_normal((min(chunk, n_mc - start), d))
        proj = (x @ stacked).reshape(x.shape[0], m, 2)
        G = first.g2d(proj.reshape(-1, 2)).reshape(x.shape[0], m)
        s1 += G.T @ G
        G2 = G * G
        s2 += G2.T @ G2
    mean = s1 / n_mc
    var = np.maximum(s2 / n_mc - mean**2, 0.0) * n_mc / max(n_mc - 1, 1)
    gaps = _gap_matrix([inst.plane for inst in instances])
    np.fill_diagonal(gaps, 1.0)
    off = ~np.eye(m, dtype=bool)
    avg = float(mean.sum() / m**2)
    return CorrelationReport(
        estimates=mean,
        stderr=np.sqrt(var / n_mc),
        gaps=gaps,
        bound_k=np.where(off, gaps**first.k, 1.0),
        bound_k1=np.where(off, gaps ** (first.k + 1), 1.0),
        avg_correlation=avg,
        n_mc=n_mc,
        k=first.k,
    )


# --------------------------------------------------------------------------
# correlational SQ oracle


class PrecisionError(RuntimeError):
    """The Monte-Carlo standard error is too large for the requested tolerance."""


@dataclass(frozen=True)
class PlaneQuery:
    """A query that depends on ``x`` only through ``plane @ x``."""

    plane: np.ndarray
    q2d: Callable

    def __call__(self, x):
        return self.q2d(np.asarray(x, dtype=float) @ self.plane.T)


@dataclass
class SqOracle:
    """Answers ``E[q(x) g(x)]`` to within ``tau`` for queries bounded in [-1, 1].

    Each answer is perturbed adversarially by a uniform offset; the running
    query count is kept in ``query_count``.
    """

    instance: HardInstance
    tau: float
    rng: RngStream
    query_count: int = 0
    quad_tol: float = 1e-9
    _gen: np.random.Generator = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        self._gen = self.rng.generator()

    def truth(self, q: PlaneQuery) -> float:
        """Quadrature value of ``E[q g]`` for a query aligned with the instance plane."""
        M = _alignment(q, self.instance)
        if M is None:
            raise ValueError("query plane must span the instance plane")
        pts = self.instance.grid.points
        return float(np.dot(self.instance.grid.weights, q.q2d(pts @ M.T) * self.instance.g2d(pts)))


def _alignment(q, instance) -> np.ndarray | None:
    """The 2 x 2 orthogonal ``M`` with ``q.plane = M @ instance.plane``, if any."""
    if not isinstance(q, PlaneQuery) or q.plane.shape != instance.plane.shape:
        return None
    M = q.plane @ instance.plane.T
    if not np.allclose(M @ M.T, np.eye(2), atol=1e-10):
        return None
    if not np.allclose(q.plane, M @ instance.plane, atol=1e-10):
        return None
    return M


def sq_query(oracle: SqOracle, q: Callable, n_mc: int = 200_000, chunk: int = 1 << 15) -> float:
    """One inner-product query.

    Queries that live on the instance plane (:class:`PlaneQuery`) are
    answered from planar quadrature plus a uniform offset in
    ``[-(tau - quad_tol), tau - quad_tol]``. Any other query is estimated by
    Monte Carlo; its standard error must stay below ``tau / 3`` and the
    offset shrinks to ``tau - 3 * stderr``.
    """
    inst = oracle.instance
    tau = oracle.tau
    gen = oracle._gen
    M = _alignment(q, inst)
    if M is not None:
        pts = inst.grid.points
        qv = np.asarray(q.q2d(pts @ M.T), dtype=float)
        if np.any(np.abs(qv) > 1.0):
            raise ValueError("query takes values outside [-1, 1]")
        center = float(np.dot(inst.grid.weights, qv * inst.g2d(pts)))
        slack = tau - oracle.quad_tol
    else:
        d = inst.plane.shape[1]
        total = 0.0
        total_sq = 0.0
        for start in range(0, n_mc, chunk):
            x = gen.standard_normal((min(chunk, n_mc - start), d))
            qv = np.asarray(q(x), dtype=float)
            if np.any(np.abs(qv) > 1.0):
                raise ValueError("query takes values outside [-1, 1]")
            prod = qv * inst(x)
            total += float(prod.sum())
            total_sq += float(prod @ prod)
        center = total / n_mc
        var = max(total_sq / n_mc - center**2, 0.0) * n_mc / max(n_mc - 1, 1)
        se = math.sqrt(var / n_mc)
        if se >= tau / 3:
            raise PrecisionError(f"standard error {se:.3g} >= tau/3 = {tau / 3:.3g}; increase n_mc")
        slack = tau - 3 * se
    oracle.query_count += 1
    return center + float(gen.uniform(-slack, slack))
