import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fstar.grid import Axis, GridFn
from fstar.harmonic import (
    Domain, harmonic_measure, harmonic_weights, integrate_boundary, mean_value_check, poisson_kernel,
    solve_dirichlet, trig_interpolant,
)


def cos_theta(nodes):
    return nodes[:, 0]


def test_interval_measure():
    w = harmonic_measure(Domain.interval(), 0.3).weights
    np.testing.assert_allclose(w, [0.7, 0.3], rtol=1e-15)


def test_disk_centre_is_uniform():
    w = harmonic_measure(Domain.disk(n_boundary=64), (0.0, 0.0)).weights
    np.testing.assert_allclose(w, 1 / 64, rtol=1e-13)


def test_poisson_kernel_value():
    val = poisson_kernel(Domain.disk(), np.array([0.5, 0.0]), np.array([1.0, 0.0]))
    assert val == pytest.approx(3 / (2 * math.pi), rel=1e-14)


def test_outside_point_rejected():
    with pytest.raises(ValueError):
        harmonic_weights(Domain.disk(), [[1.5, 0.0]])
    with pytest.raises(ValueError):
        harmonic_weights(Domain.interval(), [1.2])


def test_integrate_constant_and_cos():
    disk = Domain.disk()
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(-0.6, 0.6, size=2)
        assert integrate_boundary(disk, x, np.ones(256)) == pytest.approx(1.0, abs=1e-14)
    for r in (0.1, 0.5, 0.8):
        assert integrate_boundary(disk, (r, 0.0), cos_theta) == pytest.approx(r, abs=1e-6)


def test_integrate_interval_exact():
    dom = Domain.interval(-1.0, 3.0)
    for t in (-0.5, 0.0, 2.9):
        s = (t + 1) / 4
        assert integrate_boundary(dom, t, [2.0, -5.0]) == pytest.approx((1 - s) * 2 - 5 * s, abs=1e-14)


def test_solve_dirichlet_constant_and_linear():
    f = solve_dirichlet(Domain.disk(), lambda p: 2.5 + 0 * p[:, 0], count=33)
    fin = np.isfinite(f.values)
    np.testing.assert_allclose(f.values[fin], 2.5, rtol=1e-12)
    g = solve_dirichlet(Domain.interval(), [0.0, 1.0], count=11)
    np.testing.assert_array_equal(g.values, g.axes[0].nodes)


def test_solve_dirichlet_cos_on_disk():
    f = solve_dirichlet(Domain.disk(), cos_theta, count=129)
    x, _ = f.mesh()
    fin = np.isfinite(f.values)
    assert np.max(np.abs(f.values - x)[fin]) <= 1e-3


def test_solve_from_samples_uses_trig_interpolant():
    dom = Domain.disk(n_boundary=64)
    th = dom.boundary_angles
    f = solve_dirichlet(dom, np.cos(2 * th), count=65)
    x, y = f.mesh()
    fin = np.isfinite(f.values)
    assert np.max(np.abs(f.values - (x**2 - y**2))[fin]) <= 2e-3


def test_trig_interpolant_reproduces_samples():
    v = np.random.default_rng(1).normal(size=16)
    th = 2 * np.pi * np.arange(16) / 16
    np.testing.assert_allclose(trig_interpolant(v)(th), v, atol=1e-13)


def test_grid_domain_measure_and_solve():
    axes = (Axis(-1, 1, 9), Axis(-1, 1, 9))
    mask = np.zeros((9, 9), dtype=bool)
    mask[2:7, 2:7] = True
    dom = Domain("grid", axes=axes, mask=mask)
    hm = harmonic_measure(dom, (0.0, 0.0))
    assert hm.weights.sum() == pytest.approx(1.0)
    # the 5-point scheme is exact for harmonic quadratics
    f = solve_dirichlet(dom, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2 + p[:, 0])
    x, y = f.mesh()
    np.testing.assert_allclose(f.values[mask], (x**2 - y**2 + x)[mask], atol=1e-12)


def test_mean_value_checks():
    f = solve_dirichlet(Domain.disk(), cos_theta, count=129)
    assert mean_value_check(f, (0.1, -0.2), 0.4) <= 1e-3
    axes = (Axis(-1, 1, 201), Axis(-1, 1, 201))
    q = GridFn.from_function(axes, lambda x, y: x**2 + y**2)
    assert mean_value_check(q, (0.1, 0.2), 0.5) == pytest.approx(0.25, abs=2 * 0.01**2)
    c = GridFn.from_function(axes, lambda x, y: 3.0 + 0 * x)
    assert mean_value_check(c, (0.0, 0.0), 0.5) == pytest.approx(0.0, abs=1e-14)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_weights_are_probabilities(seed):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(0, 0.98, size=20))
    th = rng.uniform(0, 2 * np.pi, size=20)
    X = np.stack([r * np.cos(th), r * np.sin(th)], -1)
    W = harmonic_weights(Domain.disk(), X)
    assert np.all(W >= 0)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_boundary_integral_is_harmonic(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.disk()
    th = dom.boundary_angles
    k = np.arange(1, 5)
    a, b = rng.normal(size=(2, 4))
    g = rng.normal() + np.cos(np.outer(th, k)) @ a + np.sin(np.outer(th, k)) @ b
    h = 1e-3
    x0 = rng.uniform(-0.4, 0.4, size=(5, 2))
    stencil = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    u = (harmonic_weights(dom, (x0[:, None, :] + stencil).reshape(-1, 2)) @ g).reshape(5, 5)
    lap = (u[:, 1:].sum(axis=1) - 4 * u[:, 0]) / h**2
    assert np.max(np.abs(lap)) <= 1e-3 * np.max(np.abs(g))


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_boundary_integral_monotone(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.disk()
    g1 = rng.normal(size=256)
    g2 = g1 + np.abs(rng.normal(size=256))
    x = rng.uniform(-0.6, 0.6, size=2)
    assert integrate_boundary(dom, x, g1) <= integrate_boundary(dom, x, g2)
