import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernel_entropy.errors import GridTooSmallError, PreconditionError
from kernel_entropy.spectral import (
    Grid, TrigPolynomial, block_cardinality, block_indices_upto, block_of, coefficients_from_values,
    dyadic_block_indices, evaluate_on_grid, hyperbolic_cross, norm_bracket, norm_Lq,
    norm_vector_Lq, parse_vector_exponent, random_polynomial, sup_bracket)


def naive_block(k):
    # smallest s with floor(2^(s-1)) <= |k| < 2^s
    s = 0
    while not (math.floor(2.0 ** (s - 1)) <= abs(k) < 2**s):
        s += 1
    return s


def brute_cross(n, d):
    box = range(-(2**n), 2**n + 1)
    return {k for k in itertools.product(box, repeat=d) if sum(naive_block(x) for x in k) <= n}


def test_block_membership_matches_definition():
    ks = np.arange(-300, 301)
    assert np.array_equal(block_of(ks[:, None])[:, 0], [naive_block(int(k)) for k in ks])


def test_univariate_blocks():
    assert dyadic_block_indices((0,)).tolist() == [[0]]
    assert sorted(dyadic_block_indices((1,))[:, 0].tolist()) == [-1, 1]
    assert sorted(dyadic_block_indices((3,))[:, 0].tolist()) == [-7, -6, -5, -4, 4, 5, 6, 7]
    assert [block_cardinality((s,)) for s in range(6)] == [1, 2, 4, 8, 16, 32]


@pytest.mark.parametrize("n", range(0, 21))
def test_cross_size_univariate(n):
    assert len(hyperbolic_cross(n, 1)) == 2 ** (n + 1) - 1


@pytest.mark.parametrize("n", range(0, 8))
def test_cross_matches_bruteforce_2d(n):
    got = {tuple(k) for k in hyperbolic_cross(n, 2).tolist()}
    assert got == brute_cross(n, 2)


def test_blocks_disjoint_and_exhaust_cross():
    n, d = 6, 2
    seen = set()
    for s in block_indices_upto(n, d):
        b = {tuple(k) for k in dyadic_block_indices(s).tolist()}
        assert len(b) == block_cardinality(s)
        assert not (b & seen)
        seen |= b
    assert seen == {tuple(k) for k in hyperbolic_cross(n, d).tolist()}


def test_polynomial_is_canonical_and_immutable():
    f = TrigPolynomial(1, [[2], [0], [2], [1]], [1.0, 0.0, 2.0, 1e-3])
    assert f.freqs[:, 0].tolist() == [1, 2]
    assert f.coefficient((2,)) == 3.0
    assert f.coefficient((0,)) == 0.0
    with pytest.raises(ValueError):
        f.coeffs[0] = 5


def test_grid_evaluation_matches_pointwise():
    rng = np.random.default_rng(1)
    f = random_polynomial(hyperbolic_cross(3, 2), rng, real=False)
    grid = Grid((17, 19))
    vals = evaluate_on_grid(f, grid)
    x0, x1 = np.meshgrid(grid.nodes(0), grid.nodes(1), indexing="ij")
    direct = f(np.stack([x0.ravel(), x1.ravel()], axis=1)).reshape(grid.sizes)
    assert np.max(np.abs(vals - direct)) < 1e-12


def test_coefficient_roundtrip():
    rng = np.random.default_rng(2)
    f = random_polynomial(hyperbolic_cross(4, 2), rng, real=False)
    g = coefficients_from_values(evaluate_on_grid(f, Grid.for_polynomial(f, 2)))
    assert f.max_abs_diff(g) < 1e-12


def test_grid_too_small():
    f = TrigPolynomial.exponential((9,))
    with pytest.raises(GridTooSmallError):
        evaluate_on_grid(f, Grid((8,)))


def test_vector_norm_nests_first_variable_innermost():
    # f(x1, x2) = 1 + cos(x1) sin(x2)-like mixture, compared with explicit numpy reduction
    f = TrigPolynomial(2, [[0, 0], [1, 0], [-1, 0], [0, 2], [0, -2], [1, 1]], [1, 0.5, 0.5, 0.3j, -0.3j, 0.7])
    grid = Grid((64, 64))
    v = np.abs(evaluate_on_grid(f, grid))
    expected = np.max(np.mean(v, axis=0))
    assert norm_vector_Lq(f, (1, math.inf), grid) == pytest.approx(expected, rel=1e-14)
    other = np.mean(np.max(v, axis=0))
    assert norm_vector_Lq(f, (math.inf, 1), grid) == pytest.approx(other, rel=1e-14)


def test_parse_exponents():
    assert parse_vector_exponent("1,inf") == (1.0, math.inf)
    assert parse_vector_exponent("2", 3) == (2.0, 2.0, 2.0)
    with pytest.raises(PreconditionError):
        parse_vector_exponent("0.5", 1)
    with pytest.raises(PreconditionError):
        parse_vector_exponent("1,2,3", 2)


def test_sup_bracket_contains_fine_grid_max():
    rng = np.random.default_rng(3)
    f = random_polynomial(hyperbolic_cross(4, 1), rng)
    lo, hi = sup_bracket(f, Grid.for_polynomial(f, 8))
    fine = norm_Lq(evaluate_on_grid(f, Grid((8192,))), math.inf)
    assert lo <= fine <= hi
    assert hi / lo < 1.1


def test_norm_bracket_l1_contains_fine_value():
    rng = np.random.default_rng(4)
    f = random_polynomial(hyperbolic_cross(4, 1), rng)
    lo, hi = norm_bracket(f, 1, Grid.for_polynomial(f, 64))
    fine = norm_Lq(evaluate_on_grid(f, Grid((2**16,))), 1)
    assert lo <= fine <= hi


def test_l2_norm_is_parseval():
    rng = np.random.default_rng(5)
    f = random_polynomial(hyperbolic_cross(5, 2), rng, real=False)
    parseval = math.sqrt(np.sum(np.abs(f.coeffs) ** 2))
    assert norm_vector_Lq(f, 2) == pytest.approx(parseval, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_translation_and_product(seed, t1, t2):
    rng = np.random.default_rng(seed)
    f = random_polynomial(hyperbolic_cross(3, 2), rng, real=False)
    g = random_polynomial(hyperbolic_cross(2, 2), rng, real=False)
    x = rng.uniform(0, 2 * np.pi, size=(5, 2))
    assert np.allclose(f.translate((t1, t2))(x), f(x + [t1, t2]), atol=1e-10)
    assert np.allclose(f.product(g)(x), f(x) * g(x), atol=1e-10)
    assert np.allclose((f + g)(x) - (f - g)(x), 2 * g(x), atol=1e-10)
