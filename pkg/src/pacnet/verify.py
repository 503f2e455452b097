"""Named numerical invariants, each returning a measured value and its threshold."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .chow import analytic_chow2, estimate_chow2
from .core import (
    NetworkParams,
    NoiseModel,
    activation_moments,
    draw_samples,
    eval_network,
    get_activation,
    random_network,
    relu,
)
from .hermite import degree_part_norm, expand_2d, gram_matrix, hermite_2d
from .learner import build_cover, top_k_subspace
from .quadrature import QuadratureGrid
from .rng import RngStream
from .sqhard import (
    OUTER_ACTIVATIONS,
    PlaneQuery,
    SqOracle,
    hard2d_eval,
    make_instance,
    moment_check,
    plane_packing,
    random_plane,
    rotate,
    sq_query,
)

__all__ = ["Check", "INVARIANTS", "run_invariants"]


@dataclass
class Check:
    """Outcome of one invariant: ``passed`` iff ``value <= threshold``."""

    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name, value, threshold, detail="") -> Check:
    value = float(value)
    return Check(name, bool(value <= threshold), value, float(threshold), detail)


def _mc_mean(vals: np.ndarray) -> tuple[float, float]:
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def activation_cache(settings, rng) -> Check:
    gap = max(
        abs(a - b)
        for a, b in zip(
            _moment_tuple(activation_moments(relu, 64)), _moment_tuple(activation_moments(relu, 128))
        )
    )
    return _check("activation_cache", gap, 1e-10, "ReLU moments at 64 vs 128 nodes")


def _moment_tuple(m):
    return (m.B1, m.C, m.C1, m.B2, m.B4)


def relu_moments(settings, rng) -> Check:
    m = get_activation("relu").moments
    s = 1.0 / math.sqrt(2.0 * math.pi)
    err = max(abs(m.B1 - s), abs(m.C - 0.5), abs(m.C1 - s), abs(m.B2 - 0.5), abs(m.B4 - 1.5))
    return _check("relu_moments", err, 1e-12, "closed-form ReLU Chow and moment constants")


def positive_homogeneity(settings, rng) -> Check:
    gen = rng.generator()
    net = random_network(10, 3, gen)
    x = gen.standard_normal((settings.n_points, 10))
    lam = gen.uniform(0.1, 10.0, size=(settings.n_points, 1))
    lhs = eval_network(net, lam * x)
    rhs = lam[:, 0] * eval_network(net, x)
    # scale of the pre-activation sum, so sign changes near zero are not amplified
    scale = lam[:, 0] * (np.abs(x @ net.weights.T) @ net.alpha)
    return _check("positive_homogeneity", np.max(np.abs(lhs - rhs) / scale), 1e-12)


def chow_symmetry(settings, rng) -> Check:
    net = random_network(8, 2, rng.substream(0).generator())
    s = draw_samples(net, "relu", NoiseModel(0.1), 20_000, rng.substream(1))
    m = estimate_chow2(s).m_hat
    return _check("chow_symmetry", np.max(np.abs(m - m.T)), 0.0, "bitwise transpose equality")


def chow_shift(settings, rng) -> Check:
    net = random_network(8, 2, rng.substream(0).generator())
    m = analytic_chow2(net)
    a = top_k_subspace(m, 2).basis
    b = top_k_subspace(m - 3.7 * np.eye(8), 2).basis
    return _check("chow_shift", np.max(np.abs(a - b)), 1e-10, "top eigenvectors of M and M - cI")


def chow_formula(settings, rng) -> Check:
    net = NetworkParams(np.array([1.0]), np.eye(5)[:1])
    s = draw_samples(net, "relu", NoiseModel(0.0), settings.n_mc, rng)
    err = np.linalg.norm(estimate_chow2(s).m_hat - analytic_chow2(net), 2)
    tol = 8.0 * math.sqrt(5.0 / settings.n_mc)
    return _check("chow_formula", err, tol, f"single ReLU, d=5, N={settings.n_mc}")


def subspace_orthonormality(settings, rng) -> Check:
    gen = rng.generator()
    worst = 0.0
    for d, k in ((5, 1), (12, 3), (30, 5)):
        a = gen.standard_normal((d, d))
        sub = top_k_subspace(a @ a.T, k)
        worst = max(worst, np.max(np.abs(sub.basis.T @ sub.basis - np.eye(k))))
    return _check("subspace_orthonormality", worst, 1e-10)


def relu_reparameterization(settings, rng) -> Check:
    gen = rng.generator()
    u = gen.standard_normal((settings.n_points, 4)) * gen.uniform(0.01, 10.0, (settings.n_points, 1))
    x = gen.standard_normal((settings.n_points, 4))
    r = np.linalg.norm(u, axis=1)
    lhs = r * relu(np.sum(u / r[:, None] * x, axis=1))
    rhs = relu(np.sum(u * x, axis=1))
    return _check("relu_reparameterization", np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1.0)), 1e-12)


def correlated_differences(settings, rng) -> Check:
    gen = rng.generator()
    worst = -np.inf
    for rho in (0.5, 0.9, 0.99):
        x = gen.standard_normal((settings.n_mc, 2))
        t_w = x[:, 0]
        t_v = rho * x[:, 0] + math.sqrt(1 - rho * rho) * x[:, 1]
        mean, se = _mc_mean(0.5 * (relu(t_w) - relu(t_v)) ** 2)
        worst = max(worst, mean - (1 - rho) * 0.5 - 3 * se)
    return _check("correlated_differences", worst, 0.0, "max of estimate - (1-rho)/2 - 3 se")


def fourth_moment(settings, rng) -> Check:
    m = get_activation("relu").moments
    worst = -np.inf
    for k in (1, 2, 3):
        net = random_network(10, k, rng.substream(k).generator())
        x = rng.substream(10 + k).generator().standard_normal((settings.n_mc, 10))
        f = eval_network(net, x)
        f4, se = _mc_mean(f**4)
        bound = m.B4 / m.B2**2 * k**2 * np.mean(f**2) ** 2
        worst = max(worst, f4 - bound - 3 * se)
    return _check("fourth_moment", worst, 0.0, "max of E[f^4] - bound - 3 se, k = 1, 2, 3")


def cover_soundness(settings, rng) -> Check:
    k, eps, radius = 2, 0.25, 3.0
    cover = build_cover(k, eps, radius)
    gen = rng.generator()
    n = 10_000
    v = gen.standard_normal((n, k))
    v *= (gen.uniform(eps * radius, radius, size=n) / np.linalg.norm(v, axis=1))[:, None]
    dist = np.min(np.linalg.norm(v[:, None, :] - cover.points[None, :, :], axis=2), axis=1)
    return _check("cover_soundness", dist.max() / radius, eps, f"k=2, eps=0.25, {len(cover)} points")


def hermite_orthonormality(settings, rng) -> Check:
    g = gram_matrix(12, QuadratureGrid.gauss_hermite(settings.grid_order))
    return _check(
        "hermite_orthonormality", np.max(np.abs(g - np.eye(g.shape[0]))), 1e-10, f"|J| <= 12, order {settings.grid_order}"
    )


def parseval(settings, rng) -> Check:
    worst = -np.inf
    funcs = [
        lambda p: relu(p[:, 0]),
        lambda p: np.abs(p[:, 0]) - np.abs(p[:, 1]),
        lambda p: hard2d_eval(4, "relu", "tanh", p),
    ]
    for f in funcs:
        exp = expand_2d(f, 20)
        worst = max(worst, sum(degree_part_norm(exp, m) for m in range(21)) - exp.second_moment)
    return _check("parseval", worst, 1e-8, "degree parts up to 20 minus E[f^2]; never positive, the gap is the truncated tail")


def derivative_identity(settings, rng) -> Check:
    h = 1e-3
    p = lambda x, y: hermite_2d((2, 1), np.array([[x, y]]))[0]
    total = 0.0
    for idx in itertools.product((0, 1), repeat=3):
        total += _third_difference(p, idx, h) ** 2
    return _check("derivative_identity", abs(total - 6.0), 1e-4, "|grad^3 H_(2,1)|^2 versus 3! E[H^2]")


def _third_difference(p, idx, h, at=(0.3, -0.4)) -> float:
    """Central-difference mixed third partial of ``p`` along the axes in ``idx``."""
    total = 0.0
    for signs in itertools.product((1, -1), repeat=3):
        pt = np.array(at, dtype=float)
        for axis, s in zip(idx, signs):
            pt[axis] += s * h
        total += np.prod(signs) * p(*pt)
    return total / (8 * h**3)


def _hard_menu():
    phis = ("relu", "tanh", "softplus", "identity")
    return [(k, phi, so) for k in (1, 2, 3, 4) for phi in phis for so in OUTER_ACTIVATIONS]


def antisymmetry(settings, rng) -> Check:
    xy = rng.generator().standard_normal((settings.n_points, 2))
    worst = 0.0
    for k, phi, so in _hard_menu():
        f = hard2d_eval(k, phi, so, xy)
        g = hard2d_eval(k, phi, so, rotate(xy, math.pi / k))
        worst = max(worst, np.max(np.abs(f + g)))
    return _check("antisymmetry", worst, 1e-12, "f(R x) + f(x) over k, phi, sigma_out")


def moment_vanishing(settings, rng) -> Check:
    worst = 0.0
    for k, phi in ((2, "relu"), (4, "relu"), (1, "tanh"), (3, "tanh")):
        for so in OUTER_ACTIVATIONS:
            table = moment_check(k, phi, so, k - 1)
            worst = max(worst, max(table.values()))
    return _check("moment_vanishing", worst, 1e-8, "Hermite coefficients below degree k")


def normalization(settings, rng) -> Check:
    worst = 0.0
    for k, phi in ((2, "relu"), (4, "relu"), (3, "tanh")):
        for so in OUTER_ACTIVATIONS:
            inst = make_instance(k, phi, so, random_plane(6, rng.substream(k).generator()))
            pts, w = inst.grid.points, inst.grid.weights
            worst = max(worst, abs(float(np.dot(w, inst.g2d(pts) ** 2)) - 1.0))
    return _check("normalization", worst, 1e-6)


def packing_exactness(settings, rng) -> Check:
    ps = plane_packing(60, 12, 0.6, rng)
    recomputed = max(
        np.linalg.svd(a @ b.T, compute_uv=False)[0] for a, b in itertools.combinations(ps.planes, 2)
    )
    return _check("packing_exactness", abs(recomputed - ps.pairwise_bound), 1e-12)


def oracle_honesty(settings, rng) -> Check:
    inst = make_instance(4, "relu", "tanh", random_plane(20, rng.substream(0).generator()))
    oracle = SqOracle(inst, 0.01, rng.substream(1))
    gen = rng.substream(2).generator()
    worst = 0.0
    for _ in range(100):
        a, b = gen.standard_normal(2)
        q = PlaneQuery(inst.plane, lambda p, a=a, b=b: np.tanh(a * p[:, 0] + b * p[:, 1] ** 2))
        worst = max(worst, abs(sq_query(oracle, q) - oracle.truth(q)))
    return _check("oracle_honesty", worst, 0.01, "100 plane queries at tau = 0.01")


INVARIANTS: dict[str, Callable] = {
    f.__name__: f
    for f in (
        activation_cache,
        relu_moments,
        positive_homogeneity,
        chow_symmetry,
        chow_shift,
        chow_formula,
        subspace_orthonormality,
        relu_reparameterization,
        correlated_differences,
        fourth_moment,
        cover_soundness,
        hermite_orthonormality,
        parseval,
        derivative_identity,
        antisymmetry,
        moment_vanishing,
        normalization,
        packing_exactness,
        oracle_honesty,
    )
}


def run_invariants(settings, rng: RngStream) -> list[Check]:
    """Run the selected invariants (all when ``settings.invariants`` is None), in registry order."""
    names = list(INVARIANTS) if settings.invariants is None else list(settings.invariants)
    unknown = [n for n in names if n not in INVARIANTS]
    if unknown:
        raise KeyError(f"unknown invariant(s) {unknown}; available: {sorted(INVARIANTS)}")
    order = list(INVARIANTS)
    return [INVARIANTS[n](settings, rng.substream(order.index(n))) for n in names]
