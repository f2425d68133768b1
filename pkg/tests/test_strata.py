import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from linpert.calculus import numerical_rank
from linpert.errors import ArgumentError, ShapeError
from linpert.geometry import builtin
from linpert.strata import (
    assemble_M1,
    assemble_M2,
    codim_delta_s,
    codim_sigma_k,
    difference_matrix,
    estimate_sf,
    k0_max_corank,
    nc_regime,
    r_threshold_thm1,
    r_threshold_thm2,
    regularity_ok,
    s0_threshold,
    strata_profile,
)


def exact_rank(M):
    return sympy.Matrix(np.asarray(M, dtype=int).tolist()).rank()


@pytest.mark.parametrize(
    "n, l, k, codim",
    [(1, 1, 1, 1), (2, 2, 1, 1), (2, 2, 2, 4), (1, 3, 1, 3), (3, 1, 1, 3), (2, 5, 2, 10)],
)
def test_codim_sigma_examples(n, l, k, codim):
    assert codim_sigma_k(n, l, k) == codim


def test_named_values():
    assert k0_max_corank(7, 6) == 2
    assert k0_max_corank(2, 2) == 1
    assert k0_max_corank(4, 1) == 1
    assert s0_threshold(1, 3, 3) == -1
    assert s0_threshold(2, 1, 2) == 3
    assert codim_delta_s(3, 4) == 9
    assert r_threshold_thm1(1, 2, 1) == 1
    assert r_threshold_thm1(3, 1, 1) == 1
    assert r_threshold_thm1(4, 4, 1) == 4
    assert r_threshold_thm2(1, 3, 3) == 0
    assert nc_regime(1, 3, 3) and not nc_regime(1, 2, 2)


def test_grid_against_definitions():
    for n, l in itertools.product(range(1, 7), repeat=2):
        nu = min(n, l)
        for k in range(1, nu + 1):
            assert codim_sigma_k(n, l, k) == (n - nu + k) * (l - nu + k)
        feasible = [k for k in range(1, nu + 1) if (n - nu + k) * (l - nu + k) <= n]
        assert k0_max_corank(n, l) == (1 if l == 1 else max(feasible, default=1))
        for s_f in range(2, 8):
            assert s0_threshold(n, l, s_f) == max(s * (n - l) + l for s in range(2, s_f + 1))


def test_profile_dict_shape():
    d = strata_profile(1, 2, 1, 3).to_dict()
    assert set(d) == {"n", "m", "l", "nu", "codim_sigma", "k0", "s0", "s_f", "predicates", "r_thresholds"}
    assert d["codim_sigma"] == [1] and d["k0"] == 1 and d["s0"] == 1
    assert d["predicates"]["morse_applicable"] is True
    assert d["r_thresholds"] == {"thm1": [1], "thm2": 1}
    assert strata_profile(1, 2, 3).to_dict()["s0"] is None


def test_regularity_is_strict():
    p = strata_profile(1, 2, 1, 3)
    assert not regularity_ok(p, 1, "thm1", k=1)
    assert regularity_ok(p, 2, "thm1", k=1)
    assert not regularity_ok(p, 1, "thm2")
    assert regularity_ok(p, 2, "thm2")
    with pytest.raises(ArgumentError):
        regularity_ok(p, 2, "thm3")


def test_argument_errors():
    with pytest.raises(ArgumentError):
        codim_sigma_k(2, 2, 3)
    with pytest.raises(ArgumentError):
        codim_delta_s(2, 1)
    with pytest.raises(ArgumentError):
        strata_profile(1, 2, 1, 4)
    with pytest.raises(ShapeError):
        assemble_M1(np.ones((2, 2)), 3, 1)
    with pytest.raises(ShapeError):
        assemble_M2([[0.0, 1.0], [2.0]], 1)


def test_m1_example():
    M = assemble_M1([[1.0], [0.0]], 1, 1)
    np.testing.assert_array_equal(M, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]])
    assert numerical_rank(M).rank == 3


def test_m2_example():
    M = assemble_M2([[0.0], [1.0]], 1)
    np.testing.assert_array_equal(M, [[1, 0], [1, 1]])


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.integers(0, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_m1_rank_matches_exact_oracle(n, extra, l, seed):
    m = n + extra
    g = np.random.default_rng(seed)
    r = int(g.integers(0, n + 1))
    Jf = g.integers(-3, 4, (m, r)) @ g.integers(-3, 4, (r, n))
    M = assemble_M1(Jf, n, l)
    assert M.shape == (n + l + n * l, n + l + m * l)
    want = exact_rank(M)
    assert want == n + l + l * exact_rank(Jf)
    assert numerical_rank(M).rank == want
    assert (want == n + l + n * l) == (exact_rank(Jf) == n)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_m2_reduction_identity(s, m, l, seed):
    g = np.random.default_rng(seed)
    d = int(g.integers(0, min(s - 1, m) + 1))
    base = g.integers(-3, 4, m)
    pts = base + g.integers(-2, 3, (s, d)) @ g.integers(-2, 3, (d, m))
    M = assemble_M2(pts, l)
    assert M.shape == (l * s, l + m * l)
    want = exact_rank(M)
    assert want == l * (1 + exact_rank(difference_matrix(pts)))
    assert numerical_rank(M).rank == want


def test_sf_circle_and_interval():
    man, f = builtin("circle_in_R2")
    est = estimate_sf(f, man, 200, seed=0)
    assert est.estimate == 3 and est.witness["level"] == 4
    man, f = builtin("interval_in_R1")
    assert estimate_sf(f, man, 200, seed=0).estimate == 2


def test_sf_moment_curve_matches_vandermonde():
    man, f = builtin("moment_curve_in_R3")
    assert estimate_sf(f, man, 200, seed=1).estimate == 4
    # differences of 4 distinct moment-curve points span R^3
    t = np.array([0.1, 0.35, 0.6, 0.9])
    V = np.vander(t, 4, increasing=True)
    assert abs(np.linalg.det(V)) == pytest.approx(np.prod([b - a for a, b in itertools.combinations(t, 2)]))
    assert numerical_rank(difference_matrix(V[:, 1:])).rank == 3


def test_sf_is_seed_reproducible_and_needs_samples():
    man, f = builtin("circle_in_R2")
    assert estimate_sf(f, man, 100, 4).to_dict() == estimate_sf(f, man, 100, 4).to_dict()
    with pytest.raises(ArgumentError):
        estimate_sf(f, man, 10, 0)
