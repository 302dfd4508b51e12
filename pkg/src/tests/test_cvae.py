"""Tests for the complex-Gaussian latent machinery and the ELBO terms."""

import ast
import inspect

import numpy as np
import pytest

from crvae.core.exceptions import DegeneracyError, DomainError, ShapeError
from crvae.engine import cvae as cvae_module
from crvae.engine.cvae import (
    ComplexNormalParams,
    LatentPosterior,
    LossBreakdown,
    LossMode,
    complex_normal_logpdf,
    diagonal_logpdf,
    elbo_loss,
    kl_divergence,
    posterior_heads_forward,
    reconstruction_loss,
    reparameterization_coefficients,
    reparameterize,
    sample_complex_normal,
)
from crvae.engine.layers import DenseParams
from crvae.schemas import config

from .helpers import cnormal


def random_posterior(rng: np.random.Generator, n: int, min_ratio: float = 0.0) -> LatentPosterior:
    sigma = rng.uniform(0.3, 2.0, n)
    delta = sigma * rng.uniform(min_ratio, 0.9, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    return LatentPosterior(mu=cnormal(rng, n), sigma=sigma, delta=delta)


# ── reparameterization ────────────────────────────────────────────────────────


def test_reparameterization_coefficients_reproduce_second_moments(rng):
    for _ in range(20):
        q = random_posterior(rng, 6)
        k_r, k_i = reparameterization_coefficients(q)
        np.testing.assert_allclose(np.abs(k_r) ** 2 + np.abs(k_i) ** 2, q.sigma, rtol=0, atol=1e-12)
        np.testing.assert_allclose(k_r**2 + k_i**2, q.delta, rtol=0, atol=1e-12)


def test_monte_carlo_moments_match_posterior(rng):
    q = random_posterior(rng, 3, min_ratio=0.5)
    draws = sample_complex_normal(q, rng, 100_000)
    assert draws.shape == (100_000, 3)
    e = draws - q.mu
    scale = np.sqrt(q.sigma)
    assert np.all(np.abs(draws.mean(axis=0) - q.mu) <= 0.05 * scale)
    np.testing.assert_allclose(np.mean(np.abs(e) ** 2, axis=0), q.sigma, rtol=0.05)
    assert np.all(np.abs(np.mean(e**2, axis=0) - q.delta) <= 0.05 * np.abs(q.delta))


def test_zero_noise_returns_mean(rng):
    q = random_posterior(rng, 4)
    np.testing.assert_array_equal(reparameterize(q, np.zeros(4), np.zeros(4)), q.mu)
    with pytest.raises(ShapeError):
        reparameterize(q, np.zeros(3), np.zeros(4))


# ── densities and KL ──────────────────────────────────────────────────────────


def test_diagonal_logpdf_matches_augmented_form(rng):
    q = random_posterior(rng, 3)
    params = ComplexNormalParams(a=q.mu, Gamma=np.diag(q.sigma).astype(np.complex128), C=np.diag(q.delta))
    for h in cnormal(rng, 5, 3):
        assert complex_normal_logpdf(h, params) == pytest.approx(
            float(diagonal_logpdf(h, q.mu, q.sigma, q.delta)), abs=1e-10
        )


def test_circular_standard_normal_logpdf():
    h = np.array([1 + 1j])
    params = ComplexNormalParams(a=np.zeros(1, dtype=np.complex128), Gamma=np.eye(1), C=np.zeros((1, 1)))
    assert complex_normal_logpdf(h, params) == pytest.approx(-np.log(np.pi) - 2.0)


def test_improper_density_integrates_to_one(rng):
    a = np.array([0.3 + 0.2j, -0.5j])
    params = ComplexNormalParams(
        a=a,
        Gamma=np.diag([1.0, 0.6]).astype(np.complex128),
        C=np.diag([0.5 * np.exp(0.7j), -0.3j]),
    )
    # importance sampling from a wider circular normal around the same mean
    scale2, n = 4.0, 20000
    h = a + np.sqrt(scale2 / 2) * (rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2)))
    log_q = -2 * np.log(np.pi * scale2) - np.sum(np.abs(h - a) ** 2, axis=1) / scale2
    log_p = np.array([complex_normal_logpdf(sample, params) for sample in h])
    assert np.mean(np.exp(log_p - log_q)) == pytest.approx(1.0, abs=0.05)


def test_logpdf_rejects_degenerate_parameters():
    ones = np.ones((1, 1), dtype=np.complex128)
    with pytest.raises(DegeneracyError):
        complex_normal_logpdf(np.zeros(1, dtype=np.complex128), ComplexNormalParams(a=np.zeros(1), Gamma=ones, C=ones))
    with pytest.raises(DomainError):
        ComplexNormalParams(a=np.zeros(2), Gamma=np.array([[1, 1j], [1j, 1]]), C=np.zeros((2, 2)))


def test_kl_of_prior_is_exactly_zero():
    assert kl_divergence(LatentPosterior.prior((4,))) == 0.0


def test_kl_matches_monte_carlo_estimate(rng):
    """E_q[log q - log p] from samples agrees with the closed form per latent dimension."""
    for _ in range(10):
        q = random_posterior(rng, 2)
        draws = sample_complex_normal(q, rng, 1_000_000)
        zeros = np.zeros(2, dtype=np.complex128)
        log_ratio = diagonal_logpdf(draws, q.mu, q.sigma, q.delta) - diagonal_logpdf(draws, zeros, np.ones(2), zeros)
        assert abs(float(log_ratio.mean()) - kl_divergence(q)) <= 1e-2 * q.mu.size


def test_invalid_posterior_is_rejected():
    q = LatentPosterior(mu=np.zeros(1, dtype=np.complex128), sigma=np.ones(1), delta=np.array([1.2 + 0j]))
    with pytest.raises(DomainError):
        kl_divergence(q)


# ── posterior heads ───────────────────────────────────────────────────────────


def test_heads_keep_pseudo_covariance_inside_the_valid_region(rng):
    big = [DenseParams(W=50 * cnormal(rng, 3, 4), b=50 * cnormal(rng, 3)) for _ in range(3)]
    q, _ = posterior_heads_forward(*big, cnormal(rng, 8, 4))
    assert np.all(q.sigma > 0)
    assert np.all(q.sigma**2 - np.abs(q.delta) ** 2 > 0)
    assert np.all(np.isfinite(q.mu))


# ── reconstruction ────────────────────────────────────────────────────────────


def test_composite_l1_terms():
    x, xhat = np.array([1 + 1j]), np.array([2 - 1j])
    rec_real, rec_imag, rec_mag = reconstruction_loss(x, xhat)
    assert (rec_real, rec_imag) == (1.0, 2.0)
    assert rec_mag == pytest.approx(np.sqrt(5) - np.sqrt(2))


def test_gaussian_mode_is_squared_error():
    x, xhat = np.array([1 + 1j]), np.array([2 - 1j])
    assert reconstruction_loss(x, xhat, LossMode.L2_GAUSSIAN) == (1.0, 4.0, 0.0)


def test_elbo_combines_terms(rng):
    x, xhat = cnormal(rng, 4), cnormal(rng, 4)
    q = random_posterior(rng, 3)
    loss = elbo_loss(x, xhat, q, kl_weight=0.5)
    assert loss.total == pytest.approx(loss.rec_real + loss.rec_imag + loss.rec_mag + 0.5 * loss.kl)
    with pytest.raises(DomainError):
        elbo_loss(x, xhat, q, kl_weight=-1.0)
    with pytest.raises(ShapeError):
        reconstruction_loss(x, xhat[:3])


def test_loss_breakdown_arithmetic():
    a = LossBreakdown(rec_real=1, rec_imag=2, rec_mag=3, kl=4, total=10)
    b = (a + a).scaled(0.5)
    assert b == a


def test_loss_mode_lives_in_the_engine():
    assert config.LossMode is LossMode
    tree = ast.parse(inspect.getsource(cvae_module))
    imported = {node.module for node in ast.walk(tree) if isinstance(node, ast.ImportFrom)}
    assert not any(module and "schemas" in module for module in imported)
