import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardy_ground_states import grid as g
from hardy_ground_states.extremals import Bubble, HardyParams, bubble_integrals


def test_grid_validation():
    with pytest.raises(g.GridError):
        g.RadialGrid(4, 1.0, 0.5, 128)
    with pytest.raises(g.GridError):
        g.RadialGrid(4, 1e-3, 1e3, g.MIN_NODES - 1)
    with pytest.raises(g.GridError):
        g.RadialGrid(4, -1.0, 1e3, 128)


def test_refined_keeps_nodes():
    gr = g.RadialGrid(4, 1e-3, 1e3, 101)
    fine = gr.refined()
    assert fine.M == 201
    np.testing.assert_allclose(fine.s[::2], gr.s, atol=1e-13)
    assert fine.h == pytest.approx(gr.h / 2)


def test_profile_roundtrip():
    gr = g.RadialGrid(5, 1e-2, 1e2, 128)
    u = np.exp(-gr.r)
    np.testing.assert_allclose(gr.from_profile(gr.to_profile(u)), u, rtol=1e-14)


def _bubble_errors(N, lam, M):
    p = HardyParams(N, lam)
    b = Bubble(p)
    norm_sq, pow_int = bubble_integrals(b)
    gr = g.RadialGrid(N, 1e-4, 1e4, M)
    v = gr.to_profile(b(gr.r))
    m = p.decay_rate
    return (abs(g.dirichlet_form(gr, v, m) - norm_sq) / norm_sq,
            abs(g.power_integral(gr, v, p.crit, m) - pow_int) / pow_int)


@pytest.mark.parametrize("N,lam", [(3, 0.1), (4, 0.5), (5, 1.0)])
def test_discrete_forms_second_order(N, lam):
    d1, p1 = _bubble_errors(N, lam, 257)
    d2, p2 = _bubble_errors(N, lam, 513)
    assert 3.8 < d1 / d2 < 4.2
    # trapezoid on a smooth decaying integrand is spectrally accurate
    assert max(p1, p2) < 1e-11


def test_dirichlet_gradient_finite_difference():
    gr = g.RadialGrid(4, 1e-2, 1e2, 80)
    rng = np.random.default_rng(1)
    v = rng.uniform(0.1, 1.0, gr.M)
    w = rng.normal(size=gr.M)
    m = 0.7
    eps = 1e-6
    fd = (g.dirichlet_form(gr, v + eps * w, m) - g.dirichlet_form(gr, v - eps * w, m)) / (2 * eps)
    assert float(g.dirichlet_gradient(gr, v, m) @ w) == pytest.approx(fd, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 2.0))
def test_stiffness_is_hessian_of_form(seed, m):
    gr = g.RadialGrid(3, 1e-2, 1e2, 64)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=gr.M)
    assert gr.area * float(v @ g.stiffness_apply(gr, v, m)) == pytest.approx(
        g.dirichlet_form(gr, v, m), rel=1e-10)


def test_stiffness_symmetric_positive():
    gr = g.RadialGrid(4, 1e-2, 1e2, 64)
    K = np.column_stack([g.stiffness_apply(gr, e, 0.5) for e in np.eye(gr.M)])
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(K)) > 0


def test_mixed_integral_symmetric_and_reduces():
    gr = g.RadialGrid(4, 1e-3, 1e3, 200)
    v = np.exp(-np.abs(gr.s))
    y = np.exp(-2 * np.abs(gr.s - 1))
    a = g.mixed_integral(gr, v, y, 1.5, 2.5, 1.0, 1.0)
    b = g.mixed_integral(gr, y, v, 2.5, 1.5, 1.0, 1.0)
    assert a == pytest.approx(b, rel=1e-14)
    assert g.mixed_integral(gr, v, v, 2, 2, 1.0, 1.0) == pytest.approx(
        g.power_integral(gr, v, 4, 1.0), rel=1e-12)


def test_field_scaling_and_profile():
    gr = g.RadialGrid(4, 1e-2, 1e2, 64)
    f = g.RadialField.from_function(gr, lambda r: 1 / (1 + r * r))
    np.testing.assert_allclose(f.scaled(3.0).values, 3 * f.values)
    np.testing.assert_allclose(g.RadialField.from_profile(gr, f.profile).values, f.values)
    with pytest.raises(g.GridError):
        g.RadialField(gr, np.ones(gr.M + 1))
