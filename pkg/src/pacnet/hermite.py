"""Normalized Hermite polynomials and planar Hermite expansions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .quadrature import DEFAULT_GRID, QuadratureGrid
from .rng import RngStream

__all__ = [
    "HermiteExpansion",
    "McEstimate",
    "MAX_DEGREE",
    "correlation_bound",
    "cross_plane_correlation",
    "degree_part_norm",
    "expand_2d",
    "hermite_1d",
    "hermite_2d",
    "multi_indices",
]

MAX_DEGREE = 60


def hermite_1d(m: int, t):
    """Normalized Hermite polynomial ``He_m(t) / sqrt(m!)``.

    Uses the recurrence ``H_{j+1} = (t H_j - sqrt(j) H_{j-1}) / sqrt(j+1)``,
    which never forms the factorial.
    """
    if m < 0:
        raise ValueError(f"degree must be non-negative, got {m}")
    if m > MAX_DEGREE:
        raise ValueError(f"degree {m} exceeds the supported cap {MAX_DEGREE}")
    return _hermite_table(m, t)[m]


def _hermite_table(m: int, t) -> list:
    t = np.asarray(t, dtype=float)
    table = [np.ones_like(t)]
    if m >= 1:
        table.append(t.copy())
    for j in range(1, m):
        table.append((t * table[j] - math.sqrt(j) * table[j - 1]) / math.sqrt(j + 1))
    return table


def multi_indices(max_degree: int) -> list[tuple[int, int]]:
    """All ``(j1, j2)`` with ``j1 + j2 <= max_degree``, by degree then ``j1`` descending."""
    return [(m - j2, j2) for m in range(max_degree + 1) for j2 in range(m + 1)]


def hermite_2d(J: tuple[int, int], points) -> np.ndarray:
    """``H_J(x, y) = H_{j1}(x) H_{j2}(y)`` at points of shape (n, 2)."""
    points = np.asarray(points, dtype=float)
    return hermite_1d(J[0], points[:, 0]) * hermite_1d(J[1], points[:, 1])


@dataclass(frozen=True)
class HermiteExpansion:
    """Coefficients ``E[f H_J]`` for ``|J| <= max_degree``, plus ``E[f^2]`` on the same grid."""

    coeffs: dict
    max_degree: int
    second_moment: float

    def degree_parts(self) -> np.ndarray:
        return np.array([degree_part_norm(self, m) for m in range(self.max_degree + 1)])

    def tail(self) -> float:
        """Parseval mass above ``max_degree`` (clamped at 0)."""
        return max(0.0, self.second_moment - float(self.degree_parts().sum()))


def expand_2d(f: Callable, max_degree: int, grid=DEFAULT_GRID) -> HermiteExpansion:
    """Hermite coefficients of a planar function by quadrature on ``grid``.

    ``f`` maps an (n, 2) array of points to (n,) values. The default grid is a
    polar grid with sector edges on the coordinate axes and diagonals, which
    handles ridge functions kinked along those lines.
    """
    if max_degree > MAX_DEGREE:
        raise ValueError(f"max_degree {max_degree} exceeds the supported cap {MAX_DEGREE}")
    pts, w = grid.points, grid.weights
    vals = np.asarray(f(pts), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise FloatingPointError(f"f is not finite at quadrature node {i}: {tuple(pts[i])}")
    hx = _hermite_table(max_degree, pts[:, 0])
    hy = _hermite_table(max_degree, pts[:, 1])
    wv = w * vals
    coeffs = {J: float(np.dot(wv, hx[J[0]] * hy[J[1]])) for J in multi_indices(max_degree)}
    return HermiteExpansion(coeffs, max_degree, float(np.dot(wv, vals)))


def degree_part_norm(exp: HermiteExpansion, m: int) -> float:
    """``sum_{|J| = m} fhat(J)**2``, the squared norm of the degree-m part."""
    if m < 0 or m > exp.max_degree:
        raise ValueError(f"degree {m} outside 0..{exp.max_degree}")
    return float(sum(exp.coeffs[(m - j, j)] ** 2 for j in range(m + 1)))


def gram_matrix(max_degree: int, grid=None) -> np.ndarray:
    """Quadrature Gram matrix of ``{H_J : |J| <= max_degree}``."""
    grid = QuadratureGrid.gauss_hermite(64) if grid is None else grid
    pts, w = grid.points, grid.weights
    H = np.array([hermite_2d(J, pts) for J in multi_indices(max_degree)])
    return (H * w) @ H.T


def correlation_bound(exp: HermiteExpansion, s: float) -> float:
    """``sum_m s**m |f^[m]|^2`` up to ``max_degree``, plus the tail times ``s**(max_degree+1)``.

    Upper-bounds ``E[f(Ux) f(Vx)]`` for planes with ``|U V^T|_2 = s <= 1``.
    """
    parts = exp.degree_parts()
    head = float(np.sum(parts * s ** np.arange(parts.size)))
    return head + exp.tail() * s ** (exp.max_degree + 1)


class McEstimate(NamedTuple):
    mean: float
    stderr: float


def check_plane(P, name: str = "plane", tol: float = 1e-10) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != 2:
        raise ValueError(f"{name} must have shape (2, d), got {P.shape}")
    if np.max(np.abs(P @ P.T - np.eye(2))) > tol:
        raise ValueError(f"{name} rows are not orthonormal")
    return P


def cross_plane_correlation(
    f: Callable,
    U,
    V,
    n_mc: int,
    rng: RngStream,
    chunk: int = 1 << 16,
) -> McEstimate:
    """Monte-Carlo ``E[f(Ux) f(Vx)]`` for ``x ~ N(0, I_d)`` with its standard error."""
    U = check_plane(U, "U")
    V = check_plane(V, "V")
    if U.shape != V.shape:
        raise ValueError(f"U and V shapes differ: {U.shape} vs {V.shape}")
    gen = rng.generator()
    total = 0.0
    total_sq = 0.0
    for start in range(0, n_mc, chunk):
        x = gen.standard_normal((min(chunk, n_mc - start), U.shape[1]))
        prod = f(x @ U.T) * f(x @ V.T)
        total += float(prod.sum())
        total_sq += float(prod @ prod)
    mean = total / n_mc
    var = max(total_sq / n_mc - mean * mean, 0.0) * n_mc / max(n_mc - 1, 1)
    return McEstimate(mean, math.sqrt(var / n_mc))
