import math

import numpy as np
import pytest

from pacnet.chow import (
    ChowMatrix,
    analytic_chow2,
    chow_sample_size,
    chow_spectral_error,
    estimate_chow2,
    estimate_mean,
)
from pacnet.core import NetworkParams, NoiseModel, SampleSet, draw_samples, random_network
from pacnet.learner import top_k_subspace
from pacnet.rng import RngStream

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SINGLE = NetworkParams([1.0], [np.eye(5)[0]])


def single_relu_samples(n, seed, sigma=0.0):
    return draw_samples(SINGLE, "relu", NoiseModel(sigma), n, RngStream(seed))


def test_analytic_formula_for_single_relu():
    expected = INV_SQRT_2PI * np.eye(5)
    expected[0, 0] += INV_SQRT_2PI
    assert np.allclose(analytic_chow2(SINGLE), expected, atol=1e-14)
    assert analytic_chow2(SINGLE)[0, 0] == pytest.approx(0.7979, abs=1e-4)


def test_single_relu_estimate_entries():
    m = estimate_chow2(single_relu_samples(2_000_000, 0)).m_hat
    assert m[0, 0] == pytest.approx(0.7979, abs=0.01)
    assert np.allclose(np.diag(m)[1:], 0.3989, atol=0.01)
    assert np.max(np.abs(m - np.diag(np.diag(m)))) <= 0.01


def test_zero_labels_give_zero_matrix():
    xs = np.random.default_rng(0).standard_normal((1000, 4))
    m = estimate_chow2(SampleSet(xs, np.zeros(1000), 0.0))
    assert np.array_equal(m.m_hat, np.zeros((4, 4)))
    assert m.n_used == 1000


def test_pure_noise_is_small():
    gen = np.random.default_rng(1)
    n = 1_000_000
    s = SampleSet(gen.standard_normal((n, 5)), gen.standard_normal(n), 1.0)
    assert np.linalg.norm(estimate_chow2(s).m_hat, 2) <= 0.02


def test_too_few_samples():
    with pytest.raises(ValueError):
        estimate_chow2(SampleSet(np.zeros((1, 3)), np.zeros(1), 0.0))


def test_symmetry_is_bitwise():
    net = random_network(9, 3, np.random.default_rng(2))
    m = estimate_chow2(draw_samples(net, "relu", NoiseModel(0.2), 150_000, RngStream(2))).m_hat
    assert np.array_equal(m, m.T)


def test_chunked_accumulation_is_deterministic():
    s = single_relu_samples(200_000, 3)
    assert estimate_chow2(s).m_hat.tobytes() == estimate_chow2(s).m_hat.tobytes()


def test_unbiasedness():
    runs = np.array([estimate_chow2(single_relu_samples(100_000, 100 + r, sigma=0.1)).m_hat for r in range(50)])
    se = runs.std(axis=0, ddof=1) / math.sqrt(50)
    assert np.all(np.abs(runs.mean(axis=0) - analytic_chow2(SINGLE)) <= 4 * se)


def test_inverse_sqrt_convergence():
    ratios = []
    for t in range(20):
        small = chow_spectral_error(estimate_chow2(single_relu_samples(50_000, 1000 + t)), SINGLE)
        large = chow_spectral_error(estimate_chow2(single_relu_samples(200_000, 2000 + t)), SINGLE)
        ratios.append(small / large)
    assert 1.6 <= np.median(ratios) <= 2.6


def test_spectral_error_ratio_half_million_vs_two_million():
    ratios = []
    for t in range(10):
        a = chow_spectral_error(estimate_chow2(single_relu_samples(500_000, 3000 + t)), SINGLE)
        b = chow_spectral_error(estimate_chow2(single_relu_samples(2_000_000, 4000 + t)), SINGLE)
        ratios.append(a / b)
    assert np.median(ratios) == pytest.approx(2.0, abs=0.7)


def test_shift_property():
    m = estimate_chow2(single_relu_samples(50_000, 5)).m_hat
    for c in (-2.0, 0.37, 10.0):
        a = np.linalg.eigh(m)[1]
        b = np.linalg.eigh(m - c * np.eye(5))[1]
        # eigenvectors agree up to sign
        assert np.allclose(np.abs(np.sum(a * b, axis=0)), 1.0, atol=1e-10)
        assert np.allclose(top_k_subspace(m, 2).basis, top_k_subspace(m - c * np.eye(5), 2).basis, atol=1e-10)


def test_spectral_error_examples():
    sigma = analytic_chow2(SINGLE)
    assert chow_spectral_error(sigma, SINGLE) == 0.0
    e1 = np.eye(5)[0]
    assert chow_spectral_error(sigma + 0.1 * np.outer(e1, e1), SINGLE) == pytest.approx(0.1, abs=1e-14)
    wrapped = ChowMatrix(sigma + 0.1 * np.outer(e1, e1), 10, None)
    assert chow_spectral_error(wrapped, SINGLE) == pytest.approx(0.1, abs=1e-14)


def test_estimate_mean():
    s = SampleSet(np.zeros((4, 2)), [1.0, 2.0, 3.0, -2.0], 0.0)
    est = estimate_mean(s)
    assert est.mu_hat == 1.0 and est.n_used == 4


def test_estimate_mean_converges():
    est = estimate_mean(single_relu_samples(400_000, 6, sigma=0.5))
    assert est.mu_hat == pytest.approx(INV_SQRT_2PI, abs=5 * math.sqrt(1.0 / 400_000))


def test_sample_size_schedule():
    assert chow_sample_size(20, 2, 0.1) == math.ceil(50 * 20 * 2 * math.log(23) / 0.01)
    assert chow_sample_size(20, 2, 0.1, mult=1) == math.ceil(20 * 2 * math.log(23) / 0.01)
