"""Gaussian quadrature rules and 2D integration grids.

Plain Gauss-Hermite rules converge slowly on integrands with a kink at the
origin (ReLU and friends), so the 1D expectations here are split at zero and
each half-line is integrated with a Gauss rule for the weight
``t**p * exp(-t**2 / 2)`` on ``[0, inf)``. The recurrence coefficients of
that weight are obtained from its exact moments with the modified Chebyshev
algorithm in extended precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import eigh_tridiagonal

SQRT_2PI = math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=None)
def halfline_gauss_rule(n: int, power: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for ``int_0^inf g(t) t**power exp(-t**2/2) dt``.

    Exact for polynomial ``g`` of degree ``2n - 1``.

    Parameters
    ----------
    n : int
        Number of nodes.
    power : int, default 0
        Power of ``t`` in the weight. ``power=1`` is the radial weight of the
        planar standard Gaussian in polar coordinates.

    Returns
    -------
    nodes, weights : ndarray of shape (n,)
    """
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    # the Hankel system loses about one digit per node
    with mpmath.workdps(30 + 2 * n):
        mom = [
            mpmath.power(2, mpmath.mpf(j + power - 1) / 2) * mpmath.gamma(mpmath.mpf(j + power + 1) / 2)
            for j in range(2 * n)
        ]
        alpha = [mom[1] / mom[0]]
        beta = [mom[0]]
        prev = [mpmath.mpf(0)] * (2 * n)
        cur = list(mom)
        for k in range(1, n):
            nxt = [mpmath.mpf(0)] * (2 * n)
            for l in range(k, 2 * n - k):
                nxt[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l]
            alpha.append(nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1])
            beta.append(nxt[k] / cur[k - 1])
            prev, cur = cur, nxt
        a = np.array([float(v) for v in alpha])
        b = np.array([float(mpmath.sqrt(v)) for v in beta[1:]])
        mu0 = float(mom[0])
    nodes, vecs = eigh_tridiagonal(a, b)
    weights = mu0 * vecs[0] ** 2
    return nodes, weights


def gaussian_expectation(func, n: int = 128) -> float:
    """E[func(t)] for ``t ~ N(0, 1)``, split at the origin.

    ``func`` must accept a 1D array. Exact for functions that are
    polynomials of degree < 2n on each half-line.
    """
    nodes, weights = halfline_gauss_rule(n, 0)
    vals = np.asarray(func(nodes), dtype=float) + np.asarray(func(-nodes), dtype=float)
    total = float(np.dot(weights, vals)) / SQRT_2PI
    if not math.isfinite(total):
        raise FloatingPointError("non-finite quadrature sum")
    return total


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor Gauss-Hermite grid (probabilists' weight, normalized)."""

    nodes_1d: np.ndarray
    weights_1d: np.ndarray

    @classmethod
    def gauss_hermite(cls, order: int = 64) -> "QuadratureGrid":
        t, w = hermegauss(order)
        return cls(t, w / w.sum())

    @property
    def points(self) -> np.ndarray:
        x, y = np.meshgrid(self.nodes_1d, self.nodes_1d, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.weights_1d, self.weights_1d).ravel()


@dataclass(frozen=True)
class PolarGrid:
    """Polar product grid for the planar standard Gaussian.

    The angle is split into ``panels`` equal sectors starting at angle 0,
    each integrated with Gauss-Legendre; the radius uses the Gauss rule for
    ``r exp(-r**2/2)``. The grid is invariant under rotation by any multiple
    of ``2*pi/panels``, and functions whose kinks lie on sector edges are
    integrated to spectral accuracy.
    """

    radial_order: int = 64
    panels: int = 24
    panel_order: int = 16

    def _build(self):
        r, wr = halfline_gauss_rule(self.radial_order, 1)
        g, wg = np.polynomial.legendre.leggauss(self.panel_order)
        width = 2.0 * np.pi / self.panels
        theta = (np.arange(self.panels)[:, None] * width + (g[None, :] + 1.0) * width / 2).ravel()
        wt = np.tile(wg * width / 2, self.panels)
        pts = np.stack(
            [np.outer(r, np.cos(theta)).ravel(), np.outer(r, np.sin(theta)).ravel()], axis=1
        )
        w = np.outer(wr, wt).ravel() / (2.0 * np.pi)
        return pts, w

    @property
    def points(self) -> np.ndarray:
        return _polar_cache(self)[0]

    @property
    def weights(self) -> np.ndarray:
        return _polar_cache(self)[1]


@lru_cache(maxsize=32)
def _polar_cache(grid: PolarGrid):
    pts, w = grid._build()
    pts.flags.writeable = False
    w.flags.writeable = False
    return pts, w


def kink_aligned_grid(k: int, radial_order: int = 64, panel_order: int = 16) -> PolarGrid:
    """Polar grid whose sector edges contain the angles ``pi*m/k + pi/2``.

    Those are the lines where ridge terms ``phi(x cos(pi m/k) + y sin(pi m/k))``
    have their kinks; the grid is also invariant under rotation by ``pi/k``.
    """
    base = math.lcm(4, 2 * k)
    panels = base * max(1, math.ceil(24 / base))
    return PolarGrid(radial_order, panels, panel_order)


DEFAULT_GRID = PolarGrid()


def expectation_2d(func, grid=DEFAULT_GRID) -> float:
    """E[func(z)] for ``z ~ N(0, I_2)``; ``func`` maps (n, 2) arrays to (n,)."""
    vals = np.asarray(func(grid.points), dtype=float)
    return float(np.dot(grid.weights, vals))
