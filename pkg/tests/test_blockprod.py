import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fstar.blockprod import (
    BlockSym, null_space, product_contains, product_contains_sampled, product_margin, project_fiber,
    pseudo_inverse, quad8_matrix, restrict_graph, schur_margin,
)
from fstar.cones import Classification, half_spaces, pos_cone, random_psd, trace_cone
from fstar.formulas import random_block

INT, BND, EXT = Classification.INTERIOR, Classification.BOUNDARY, Classification.EXTERIOR


def test_restrict_graph_zero_slope():
    A = quad8_matrix(1.0, 2.0, 0.3, 0.5, -0.5)
    np.testing.assert_array_equal(restrict_graph(A, np.zeros((1, 2))), A.B)


def test_restrict_graph_identity():
    A = BlockSym(2, 1, np.eye(3))
    np.testing.assert_allclose(restrict_graph(A, [[1.0, 0.0]]), np.diag([2.0, 1.0]))


def test_restrict_graph_matches_congruence():
    rng = np.random.default_rng(0)
    A = quad8_matrix(1.3, 0.7, 0.2, 1.1, -0.4)
    for _ in range(100):
        g = rng.normal(size=(1, 2)) * 3
        P = np.vstack([np.eye(2), g])
        np.testing.assert_allclose(restrict_graph(A, g), P.T @ A.A @ P, atol=1e-12)


def test_restrict_graph_stacked_slopes():
    A = quad8_matrix(1.0, 1.0, 0.0, 1.0, 1.0)
    g = np.arange(12.0).reshape(6, 1, 2)
    out = restrict_graph(A, g)
    assert out.shape == (6, 2, 2)
    np.testing.assert_allclose(out[4], restrict_graph(A, g[4]))


def test_project_fiber():
    np.testing.assert_array_equal(project_fiber(BlockSym(2, 2, np.eye(4))), np.eye(2))
    assert project_fiber(quad8_matrix(1.0, 1.0, 0.0, 0.3, 0.1)).item() == 1.0
    np.testing.assert_array_equal(project_fiber(BlockSym(1, 2, np.zeros((3, 3)))), np.zeros((2, 2)))


def test_pseudo_inverse():
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))
    rng = np.random.default_rng(5)
    v = rng.normal(size=3)
    v *= 2 / np.linalg.norm(v)
    P = np.outer(v, v)
    Pp = pseudo_inverse(P)
    np.testing.assert_allclose(Pp, P / 16, atol=1e-14)
    np.testing.assert_allclose(P @ Pp @ P, P, atol=1e-12)
    np.testing.assert_allclose(Pp @ P @ Pp, Pp, atol=1e-14)


def test_null_space_cones_trivial():
    assert null_space(trace_cone(2), 1).dim == 0
    assert null_space(pos_cone(3), 2).dim == 0


def test_null_space_partial_trace():
    F = half_spaces(2, [(np.diag([1.0, 0.0]), 0.0)])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        nul = null_space(F, 1)
    assert any("presentation" in str(x.message) for x in w)
    assert nul.dim == 1
    np.testing.assert_allclose(np.abs(nul.basis[0]), [[0.0], [1.0]])
    # C along the null direction stays a member for every slope, C off it does not
    inside = BlockSym.from_blocks(np.diag([1.0, 0.0]), [[0.0], [1.0]], [[0.0]])
    outside = BlockSym.from_blocks(np.diag([1.0, 0.0]), [[1.0], [0.0]], [[0.0]])
    assert product_contains_sampled(F, inside).classification is not EXT
    assert product_contains_sampled(F, outside).classification is EXT
    assert product_contains(F, inside) is not EXT
    assert product_contains(F, outside) is EXT


def test_quad8_boundary_and_exterior():
    T = trace_cone(2)
    assert product_contains(T, quad8_matrix(1, 1, 0, 1, 1), 1e-9) is BND
    assert product_contains(T, quad8_matrix(1, 1, 0, 1.2, 1), 1e-9) is EXT
    assert product_contains_sampled(T, quad8_matrix(1, 1, 0, 1.2, 1)).classification is EXT
    np.testing.assert_allclose(schur_margin(T, quad8_matrix(1, 1, 0, 1.2, 1)), -0.44, atol=1e-12)


def test_identity_block_interior():
    for n, m in [(2, 1), (3, 2)]:
        A = BlockSym(n, m, np.eye(n + m))
        assert product_contains(trace_cone(n), A, 1e-9) is INT
        assert product_contains_sampled(trace_cone(n), A, margin=1e-9).classification is INT


def test_degenerate_fiber_with_coupling_is_exterior():
    A = BlockSym.from_blocks(np.eye(2), [[1.0], [0.0]], [[0.0]])
    assert product_contains(trace_cone(2), A) is EXT
    s = product_contains_sampled(trace_cone(2), A)
    assert s.classification is EXT
    assert s.margin < -100  # the violation grows with the slope


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        product_contains(trace_cone(3), quad8_matrix(1, 1, 0, 0, 0))


def test_trace_cone_scalar_fibre_closed_form():
    rng = np.random.default_rng(1)
    T = trace_cone(3)
    for _ in range(50):
        C = rng.normal(size=(3, 1))
        D = rng.uniform(0.1, 3.0)
        B = rng.normal(size=(3, 3))
        A = BlockSym.from_blocks(B + B.T, C, [[D]])
        expected = np.trace(A.B) - float(np.sum(C**2)) / D
        assert schur_margin(T, A) == pytest.approx(min(expected, D), abs=1e-10)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_schur_and_sampling_agree(seed):
    rng = np.random.default_rng(seed)
    A = random_block(rng)
    for F in (pos_cone(A.n), trace_cone(A.n)):
        mu = schur_margin(F, A)
        if abs(mu) <= 1e-6:
            continue
        s = product_contains_sampled(F, A, 200, 1e3, rng_seed=seed)
        assert (mu > 0) == (s.classification is not EXT)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 3), m=st.integers(1, 3))
def test_congruence_keeps_psd(seed, n, m):
    rng = np.random.default_rng(seed)
    A = BlockSym(n, m, random_psd(rng, n + m))
    g = rng.normal(scale=10.0, size=(m, n))
    assert np.linalg.eigvalsh(restrict_graph(A, g))[0] >= -1e-9 * (1 + np.abs(A.A).max()) * (1 + np.abs(g).max() ** 2)


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_adding_psd_keeps_membership(seed):
    rng = np.random.default_rng(seed)
    A = random_block(rng)
    P = random_psd(rng, A.n + A.m)
    for F in (pos_cone(A.n), trace_cone(A.n)):
        if product_margin(F, A.A, A.n) > 1e-6:
            assert product_margin(F, A.A + P, A.n) >= -1e-6
