import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacnet.chow import MeanEstimate, analytic_chow2
from pacnet.core import NetworkParams, NoiseModel, SampleSet, draw_samples, eval_network, get_activation, make_oracle, random_network, relu
from pacnet.learner import (
    BudgetError,
    Candidate,
    LearnConfig,
    _sweep,
    build_cover,
    candidate_count,
    cover_radius,
    empirical_sq_error,
    enumerate_candidates,
    learn,
    mom_buckets,
    nn_learner,
    shell_count,
    subspace_residual,
    top_k_subspace,
)
from pacnet.rng import RngStream

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# --- dimension reduction --------------------------------------------------


def test_top_k_of_diagonal():
    sub = top_k_subspace(np.diag([3.0, 2.0, 1.0, 0.0, 0.0]), 2)
    assert np.allclose(np.abs(sub.basis), np.eye(5)[:, :2])
    assert np.allclose(sub.eigenvalues, [3.0, 2.0])


def test_top_k_of_rank_one():
    w = np.random.default_rng(0).standard_normal(6)
    w /= np.linalg.norm(w)
    sub = top_k_subspace(np.outer(w, w), 1)
    assert abs(sub.basis[:, 0] @ w) == pytest.approx(1.0, abs=1e-12)


def test_top_k_of_single_relu_chow():
    sub = top_k_subspace(analytic_chow2(NetworkParams([1.0], [np.eye(5)[0]])), 1)
    assert np.allclose(np.abs(sub.basis[:, 0]), np.eye(5)[0], atol=1e-12)
    assert sub.eigenvalues[0] == pytest.approx(2 * INV_SQRT_2PI, abs=1e-12)


def test_top_k_rejects_bad_k():
    with pytest.raises(ValueError):
        top_k_subspace(np.eye(3), 4)
    with pytest.raises(ValueError):
        top_k_subspace(np.eye(3), 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 25), data=st.data())
def test_subspace_orthonormal_and_sorted(seed, d, data):
    k = data.draw(st.integers(1, d))
    a = np.random.default_rng(seed).standard_normal((d, d))
    sub = top_k_subspace(a + a.T, k)
    assert np.max(np.abs(sub.basis.T @ sub.basis - np.eye(k))) <= 1e-10
    assert np.all(np.diff(sub.eigenvalues) <= 0)


def test_subspace_residual_examples():
    net = NetworkParams([1.0, 2.0], [np.eye(4)[0], np.eye(4)[1]])
    full = top_k_subspace(np.diag([2.0, 1.0, 0.0, 0.0]), 2)
    assert np.allclose(subspace_residual(full, net), 0.0)
    other = top_k_subspace(np.diag([0.0, 0.0, 2.0, 1.0]), 2)
    assert np.allclose(subspace_residual(other, net), 1.0)


# --- cover ----------------------------------------------------------------


def test_cover_radius_examples():
    cfg = LearnConfig(k=1, eps=0.25, sigma=0.0, c=2.0)
    assert cover_radius(MeanEstimate(0.39894, 100), cfg) == pytest.approx(2 * 0.39894 / INV_SQRT_2PI)
    assert cover_radius(MeanEstimate(INV_SQRT_2PI, 100), cfg) == pytest.approx(2.0)
    assert cover_radius(-0.3, cfg) == 0.0
    noisy = LearnConfig(k=1, eps=0.25, sigma=1.0, c=2.0)
    assert cover_radius(1.0, noisy, "relu") == pytest.approx(15.04, abs=0.005)


def test_one_dimensional_cover():
    cover = build_cover(1, 0.5, 1.0)
    pts = set(np.round(cover.points[:, 0], 12))
    assert {1.0, -1.0, 0.5, -0.5} <= pts
    t = np.concatenate([np.linspace(-1, -0.5, 101), np.linspace(0.5, 1, 101)])
    assert np.max(np.min(np.abs(t[:, None] - cover.points[:, 0]), axis=1)) <= 0.5 * 1.0 + 1e-12


def test_empty_cover_at_zero_radius():
    assert len(build_cover(2, 0.25, 0.0)) == 0


@pytest.mark.parametrize("k, eps, radius", [(1, 0.25, 1.0), (2, 0.25, 1.0), (2, 0.1, 3.0), (3, 0.3, 2.0)])
def test_cover_guarantees(k, eps, radius):
    cover = build_cover(k, eps, radius)
    norms = np.linalg.norm(cover.points, axis=1)
    assert norms.min() >= (1 - eps) ** cover.scales * radius - 1e-12
    assert norms.max() <= radius + 1e-12
    assert len(cover) <= (1 + 2 * k / eps) ** k * (cover.scales + 1)
    gen = np.random.default_rng(k)
    v = gen.standard_normal((5000, k))
    v *= (gen.uniform(eps * radius, radius, 5000) / np.linalg.norm(v, axis=1))[:, None]
    dist = np.min(np.linalg.norm(v[:, None, :] - cover.points[None], axis=2), axis=1)
    assert dist.max() <= eps * radius
    # some cover direction lies within angular eps of every v
    cosines = (v / np.linalg.norm(v, axis=1, keepdims=True)) @ cover.directions.T
    assert np.all(np.arccos(np.clip(cosines.max(axis=1), -1, 1)) <= eps)


def test_shell_count():
    assert shell_count(0.5) == math.ceil(math.log(2) / 0.5)
    assert shell_count(0.25) == math.ceil(math.log(4) / 0.25)


@pytest.mark.parametrize("g, k, expected", [(3, 2, 6), (1, 3, 1), (10, 2, 55)])
def test_candidate_counts(g, k, expected):
    cover = build_cover(1, 0.5, 1.0)
    sub_cover = type(cover)(cover.points[:g], cover.eps, cover.radius, cover.scales, cover.directions, cover.radii)
    if g <= len(cover):
        assert sum(1 for _ in enumerate_candidates(sub_cover, k)) == expected
    assert candidate_count(g, k) == expected


# --- selection ------------------------------------------------------------


def _setup(k=2, d=6, n=4000, seed=0):
    net = random_network(d, k, np.random.default_rng(seed))
    samples = draw_samples(net, "relu", NoiseModel(0.1), n, RngStream(seed))
    sub = top_k_subspace(analytic_chow2(net), k)
    return net, samples, sub


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), perm_seed=st.integers(0, 1000))
def test_sq_error_permutation_invariant(seed, perm_seed):
    _, samples, sub = _setup(k=3, seed=seed % 7)
    us = np.random.default_rng(seed).standard_normal((3, 3))
    perm = np.random.default_rng(perm_seed).permutation(3)
    a = empirical_sq_error(Candidate(us), sub, samples, 9)
    b = empirical_sq_error(Candidate(us[perm]), sub, samples, 9)
    assert a == b


def test_sq_error_bucket_validation():
    _, samples, sub = _setup(n=10)
    with pytest.raises(ValueError):
        empirical_sq_error(Candidate(np.ones((2, 2))), sub, samples, 11)
    with pytest.raises(ValueError):
        empirical_sq_error(Candidate(np.ones((2, 2))), sub, samples, 0)


def test_zero_unit_contributes_nothing():
    _, samples, sub = _setup()
    u = np.array([[0.7, 0.2], [0.0, 0.0]])
    assert empirical_sq_error(Candidate(u), sub, samples, 5) == empirical_sq_error(Candidate(u[:1]), sub, samples, 5)


def test_gram_sweep_matches_direct_evaluation():
    _, samples, sub = _setup(k=2, n=3000)
    cover = build_cover(2, 0.5, 2.0)
    act = get_activation("relu")
    errors, idx = _sweep(cover, sub, samples, 2, 9, act)
    assert len(errors) == candidate_count(len(cover), 2)
    for j in range(0, len(errors), 37):
        direct = empirical_sq_error(Candidate(cover.points[list(idx[j])]), sub, samples, 9)
        assert errors[j] == pytest.approx(direct, rel=1e-9, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_relu_reparameterization(seed, scale):
    gen = np.random.default_rng(seed)
    u = gen.standard_normal(5) * scale
    x = gen.standard_normal((30, 5))
    r = np.linalg.norm(u)
    lhs = r * relu(x @ (u / r))
    rhs = relu(x @ u)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(np.abs(rhs), r * np.abs(x).sum(axis=1)))


@pytest.mark.parametrize("rho", [0.5, 0.9, 0.99])
def test_correlated_differences(rho):
    gen = np.random.default_rng(int(rho * 100))
    n = 1_000_000
    x = gen.standard_normal((n, 2))
    diff = 0.5 * (relu(x[:, 0]) - relu(rho * x[:, 0] + math.sqrt(1 - rho**2) * x[:, 1])) ** 2
    se = diff.std(ddof=1) / math.sqrt(n)
    assert diff.mean() <= (1 - rho) * 0.5 + 3 * se


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fourth_moment_bound(k):
    m = get_activation("relu").moments
    gen = np.random.default_rng(10 + k)
    net = random_network(8, k, gen)
    f = eval_network(net, gen.standard_normal((500_000, 8)))
    se = (f**4).std(ddof=1) / math.sqrt(f.size)
    assert np.mean(f**4) <= m.B4 / m.B2**2 * k**2 * np.mean(f**2) ** 2 + 3 * se


# --- configuration --------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(k=0, eps=0.1), dict(k=1, eps=0.0), dict(k=1, eps=1.0), dict(k=1, eps=0.1, sigma=-1), dict(k=1, eps=0.1, delta=0)],
)
def test_learn_config_validation(kwargs):
    with pytest.raises(ValueError):
        LearnConfig(**kwargs)


def test_mom_buckets():
    assert mom_buckets(1, 0.5) == 9
    assert mom_buckets(10_000, 0.1) == math.ceil(8 * math.log(100_000))


def test_sample_schedules_grow_with_k():
    act = get_activation("relu")
    a, b = LearnConfig(k=1, eps=0.25), LearnConfig(k=2, eps=0.25)
    assert b.n_chow(20) > a.n_chow(20)
    assert b.n_mean(act) == 2 * a.n_mean(act) == 2 * math.ceil(50 * 1 * 1.0)
    assert a.n_select(100) >= a.min_bucket_size * mom_buckets(100, a.delta)


# --- end to end -----------------------------------------------------------


class ZeroOracle:
    d = 8

    def __init__(self):
        self.gen = np.random.default_rng(0)

    def __call__(self, n):
        return SampleSet(self.gen.standard_normal((n, self.d)), np.zeros(n), 0.0)


def test_zero_labels_give_zero_network():
    net = nn_learner(LearnConfig(k=2, eps=0.25), ZeroOracle())
    assert net.k == 0
    assert np.all(eval_network(net, np.ones((3, 8))) == 0)


def relative_error(target, hyp, sigma, n=100_000, seed=123):
    xs = np.random.default_rng(seed).standard_normal((n, target.d))
    f, h = eval_network(target, xs), eval_network(hyp, xs)
    return np.mean((f - h) ** 2) / (sigma**2 + np.mean(f**2))


def test_single_unit_learned():
    target = random_network(10, 1, np.random.default_rng(5))
    oracle = make_oracle(target, "relu", NoiseModel(0.1), RngStream(5))
    res = learn(LearnConfig(k=1, eps=0.25, sigma=0.1), oracle)
    assert relative_error(target, res.network, 0.1) <= 0.15
    assert res.cover_size > 0 and res.n_candidates == res.cover_size
    assert set(res.timings) == {"chow", "sweep"}


def test_budget_refusal_reports_count():
    target = random_network(10, 3, np.random.default_rng(0))
    oracle = make_oracle(target, "relu", NoiseModel(0.1), RngStream(0))
    with pytest.raises(BudgetError) as info:
        learn(LearnConfig(k=3, eps=0.25, sigma=0.1, max_candidates=1000), oracle)
    assert info.value.count > 1000 and info.value.cap == 1000


def test_rejects_signed_activation():
    oracle = make_oracle(random_network(5, 1, np.random.default_rng(0)), "relu", NoiseModel(0.1), RngStream(0))
    with pytest.raises(ValueError, match="non-negative"):
        learn(LearnConfig(k=1, eps=0.25, activation="tanh"), oracle)


def test_learner_is_deterministic():
    target = random_network(8, 2, np.random.default_rng(3))

    def run():
        return learn(LearnConfig(k=2, eps=0.25, sigma=0.1), make_oracle(target, "relu", NoiseModel(0.1), RngStream(3)))

    a, b = run(), run()
    assert a.network.alpha.tobytes() == b.network.alpha.tobytes()
    assert a.network.weights.tobytes() == b.network.weights.tobytes()
    assert a.best_error == b.best_error


def test_monotone_refinement():
    # harness regression check, not a guarantee
    coarse, fine = [], []
    for t in range(5):
        target = random_network(10, 1, np.random.default_rng(50 + t))
        for eps, out in ((0.25, coarse), (0.125, fine)):
            oracle = make_oracle(target, "relu", NoiseModel(0.1), RngStream(50 + t))
            out.append(relative_error(target, nn_learner(LearnConfig(k=1, eps=eps, sigma=0.1), oracle), 0.1))
    assert np.median(fine) <= 2 * np.median(coarse)
