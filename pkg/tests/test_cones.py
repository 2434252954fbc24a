import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fstar.cones import (
    Classification, DirichletSet, check_strict_domain_convexity, contains, dual_contains, eigen_cone,
    half_spaces, pos_cone, random_psd, random_sym, ray_set, signed_margin, trace_cone,
)
from fstar.harmonic import Domain

INT, BND, EXT = Classification.INTERIOR, Classification.BOUNDARY, Classification.EXTERIOR


def builtin_sets(n):
    u = np.zeros((n, n))
    u[0, 0] = 1.0
    return [
        pos_cone(n),
        trace_cone(n),
        half_spaces(n, [(np.eye(n), 1.0), (u, -0.5)]),
        eigen_cone(n, [(np.arange(1.0, n + 1), 0.0)]),
    ]


def test_trace_cone_interior():
    assert contains(trace_cone(2), np.diag([1.0, -0.5]), 1e-9) is INT


def test_pos_cone_identity():
    assert contains(pos_cone(3), np.eye(3), 1e-9) is INT


def test_boundary_band():
    assert contains(trace_cone(2), np.diag([1.0, -1.0]), 1e-9) is BND
    assert contains(pos_cone(2), np.diag([1.0, -1e-3]), 1e-9) is EXT


def test_eigen_cone_matches_trace_cone():
    rng = np.random.default_rng(7)
    E = eigen_cone(3, [([1.0, 1.0, 1.0], 0.0)])
    T = trace_cone(3)
    for _ in range(100):
        a = random_sym(rng, 3)
        assert contains(E, a, 1e-12) is contains(T, a, 1e-12)


def test_dual_contains_trace():
    assert dual_contains(trace_cone(2), np.eye(2))
    assert not dual_contains(trace_cone(2), -np.eye(2))


def test_dual_contains_pos_against_eigenvalues():
    rng = np.random.default_rng(3)
    F = pos_cone(2)
    for _ in range(200):
        a = random_sym(rng, 2)
        assert dual_contains(F, a) == (np.linalg.eigvalsh(a)[-1] >= 0)


def test_ray_set_of_cones_is_itself():
    assert ray_set(trace_cone(2)) == trace_cone(2)
    assert ray_set(pos_cone(2)) == pos_cone(2)


def test_ray_set_of_shifted_half_space():
    F = half_spaces(2, [(np.eye(2), 1.0)])
    R = ray_set(F)
    assert R == half_spaces(2, [(np.eye(2), 0.0)])
    # A is a ray direction iff A0 + t A stays in F for all large t
    rng = np.random.default_rng(11)
    a0 = 2.0 * np.eye(2)
    checked = 0
    for _ in range(200):
        a = random_sym(rng, 2)
        if abs(np.trace(a)) < 1e-3:
            continue
        stays = all(contains(F, a0 + t * a) is not EXT for t in (1e1, 1e3, 1e6))
        assert stays == (contains(R, a) is not EXT)
        checked += 1
        if checked == 50:
            break
    assert checked == 50


def test_ray_set_eigen_with_offset_unsupported():
    with pytest.raises(NotImplementedError):
        ray_set(eigen_cone(2, [([1.0, 1.0], 1.0)]))


def test_strict_domain_convexity():
    disk = Domain.disk()
    for F in (trace_cone(2), pos_cone(2)):
        rep = check_strict_domain_convexity(F, disk)
        assert rep.strictly_convex and rep.ray_class is INT
    for F in (trace_cone(1), pos_cone(1)):
        assert check_strict_domain_convexity(F, Domain.interval()).strictly_convex


def test_invalid_sets():
    with pytest.raises(ValueError):
        half_spaces(2, [(-np.eye(2), 0.0)])
    with pytest.raises(ValueError):
        eigen_cone(2, [([-1.0, 1.0], 0.0)])
    with pytest.raises(ValueError):
        contains(trace_cone(2), np.eye(3))
    with pytest.raises(ValueError):
        contains(trace_cone(2), [[1.0, 2.0], [0.0, 1.0]])


def test_dict_round_trip():
    for F in builtin_sets(3):
        assert DirichletSet.from_dict(F.to_dict()) == F


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, n=st.integers(1, 4))
def test_positive_monotonicity(seed, n):
    rng = np.random.default_rng(seed)
    for F in builtin_sets(n):
        for _ in range(20):
            a = random_sym(rng, n)
            if contains(F, a) is EXT:
                continue
            assert contains(F, a + random_psd(rng, n)) is not EXT


@settings(max_examples=25, deadline=None)
@given(seed=seeds, n=st.integers(1, 4))
def test_midpoint_convexity(seed, n):
    rng = np.random.default_rng(seed)
    for F in builtin_sets(n):
        members = [a for a in (random_sym(rng, n) + np.eye(n) for _ in range(20)) if contains(F, a) is not EXT]
        for a, b in zip(members, members[1:]):
            assert signed_margin(F, 0.5 * (a + b)) >= -1e-12


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(1, 4))
def test_dual_is_complement_of_negative_interior(seed, n):
    rng = np.random.default_rng(seed)
    for F in builtin_sets(n)[:3]:
        a = random_sym(rng, n)
        assert dual_contains(F, a) == (contains(F, -a) is not INT)
