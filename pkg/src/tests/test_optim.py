"""Tests for the split-plane Adam update and the unitarity projection after each step."""

from collections import OrderedDict

import numpy as np
import pytest

from crvae.core.exceptions import NumericalError
from crvae.engine.ctensor import project_unitary, unitarity_error
from crvae.engine.optim import AdamMoments, adam_step
from crvae.schemas.config import TrainConfig

from .helpers import cnormal


def test_first_step_moves_each_plane_by_learning_rate(rng):
    cfg = TrainConfig(learning_rate=0.01)
    p = cnormal(rng, 4)
    start = p.copy()
    g = cnormal(rng, 4)
    params = OrderedDict(p=p)
    adam_step(params, {"p": g}, AdamMoments.zeros_like(params), 1, cfg)
    step = start - p
    np.testing.assert_allclose(step.real, 0.01 * np.sign(g.real), atol=1e-8)
    np.testing.assert_allclose(step.imag, 0.01 * np.sign(g.imag), atol=1e-8)


def test_planes_are_independent():
    """A purely real gradient never moves the imaginary part."""
    cfg = TrainConfig(learning_rate=0.1)
    p = np.array([1 + 1j, 2 - 1j])
    params = OrderedDict(p=p)
    moments = AdamMoments.zeros_like(params)
    for t in range(1, 4):
        adam_step(params, {"p": np.array([0.5 + 0j, -3 + 0j])}, moments, t, cfg)
    np.testing.assert_array_equal(p.imag, [1.0, -1.0])
    assert np.all(moments.v["p"].imag == 0)


def test_real_parameters_stay_real(rng):
    b = rng.standard_normal(3)
    params = OrderedDict(b=b)
    adam_step(params, {"b": np.ones(3)}, AdamMoments.zeros_like(params), 1, TrainConfig())
    assert b.dtype == np.float64


def test_non_finite_gradient_leaves_parameters_untouched(rng):
    p = cnormal(rng, 3)
    before = p.copy()
    params = OrderedDict(p=p)
    with pytest.raises(NumericalError):
        bad = {"p": np.array([1, np.inf, 0], dtype=np.complex128)}
        adam_step(params, bad, AdamMoments.zeros_like(params), 1, TrainConfig())
    np.testing.assert_array_equal(p, before)


def test_step_counter_starts_at_one(rng):
    params = OrderedDict(p=cnormal(rng, 2))
    with pytest.raises(ValueError):
        adam_step(params, {"p": cnormal(rng, 2)}, AdamMoments.zeros_like(params), 0, TrainConfig())


def test_constrained_matrices_stay_unitary_over_many_steps(rng):
    cfg = TrainConfig(learning_rate=1e-2)
    W = project_unitary(cnormal(rng, 6, 6))
    V = cnormal(rng, 6, 3)
    params = OrderedDict(W=W, V=V)
    moments = AdamMoments.zeros_like(params)
    for t in range(1, 101):
        adam_step(params, {"W": cnormal(rng, 6, 6), "V": cnormal(rng, 6, 3)}, moments, t, cfg, constrained=["W"])
        assert unitarity_error(W) <= 1e-8


def test_converges_on_a_quadratic_bowl(rng):
    cfg = TrainConfig(learning_rate=1e-2)
    target_w, target_b = cnormal(rng, 3, 2), rng.standard_normal(2)
    curvature = np.array([1.0, 30.0])
    params = OrderedDict(W=cnormal(rng, 3, 2), b=rng.standard_normal(2))
    moments = AdamMoments.zeros_like(params)
    for t in range(1, 5001):
        grads = {
            "W": 2 * curvature * (params["W"] - target_w),
            "b": 2 * curvature * (params["b"] - target_b),
        }
        adam_step(params, grads, moments, t, cfg)
    np.testing.assert_allclose(params["W"], target_w, atol=5e-2)
    np.testing.assert_allclose(params["b"], target_b, atol=5e-2)


def test_zero_gradient_keeps_parameters_and_decays_moments(rng):
    cfg = TrainConfig()
    p = cnormal(rng, 4)
    before = p.copy()
    params = OrderedDict(p=p)
    moments = AdamMoments.zeros_like(params)
    adam_step(params, {"p": np.zeros(4, dtype=np.complex128)}, moments, 1, cfg)
    np.testing.assert_array_equal(p, before)
    np.testing.assert_array_equal(moments.m["p"], 0)

    adam_step(params, {"p": cnormal(rng, 4)}, moments, 2, cfg)
    m, v = moments.m["p"].copy(), moments.v["p"].copy()
    adam_step(params, {"p": np.zeros(4, dtype=np.complex128)}, moments, 3, cfg)
    np.testing.assert_allclose(moments.m["p"], cfg.adam_beta1 * m, rtol=1e-15)
    np.testing.assert_allclose(moments.v["p"], cfg.adam_beta2 * v, rtol=1e-15)
