import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctemplates.errors import ValidationError
from ctemplates.genpos import (GeneralPositionSet, build_general_position, coeffs_from_roots,
                               evaluation_matrix, expected_size, monomial_exponents,
                               normalize_to_template_origin, verify_general_position)

from oracles import brute_force_rank

CASES = [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2), (2, 3)]


@pytest.mark.parametrize("roots, expected", [
    ([0.0], [0.0]),
    ([0.0, 1.0], [-1.0, 0.0]),
    ([1.0, 2.0], [-3.0, 2.0]),
])
def test_coeffs_from_roots_examples(roots, expected):
    assert np.allclose(coeffs_from_roots(roots), expected, atol=0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5))
def test_coeffs_from_roots_vanish_at_roots(roots):
    c = np.concatenate([[1.0], coeffs_from_roots(roots)])
    for r in roots:
        assert abs(np.polyval(c, r)) <= 1e-9 * max(1.0, np.polyval(np.abs(c), abs(r)))


def test_small_examples():
    g = build_general_position(1, 1, [0, 1])
    assert np.allclose(g.points.ravel(), [0.0, -1.0])
    g = build_general_position(1, 2, [0, 1, 2])
    assert np.allclose(g.points, [[-1, 0], [-2, 0], [-3, 2]])
    g = build_general_position(0, 1, [7])
    assert np.allclose(g.points, [[-7]])
    assert verify_general_position(g).general_position


def test_duplicate_anchors_rejected():
    with pytest.raises(ValidationError):
        build_general_position(1, 1, [2.0, 2.0])
    with pytest.raises(ValidationError):
        build_general_position(1, 1, [0.0, 0.5e-9])


def test_duplicated_point_not_general():
    bad = GeneralPositionSet(d=1, p=1, anchors=(0.0, 1.0), points=np.array([[0.0], [0.0]]),
                             subsets=((0,), (1,)))
    cert = verify_general_position(bad)
    assert cert.rank == 1 and not cert.general_position


def test_certificate_11_and_32():
    c = verify_general_position(build_general_position(1, 1, [0, 1]))
    assert c.rank == 2 and c.minimal
    c = verify_general_position(build_general_position(3, 2))
    assert c.rank == math.comb(5, 2) == 10 and c.minimal


@pytest.mark.parametrize("d, p", CASES)
def test_default_anchor_cases(d, p):
    g = build_general_position(d, p)
    assert len(g.points) == expected_size(d, p) == math.comb(p + d, p)
    cert = verify_general_position(g)
    assert cert.rank == cert.size == len(g.points)
    assert cert.minimal and cert.general_position
    # independent rank oracle
    rank, size = brute_force_rank(g.points, d)
    assert rank == size == len(g.points)


def test_monomials_count():
    for d, p in CASES:
        assert len(monomial_exponents(d, p)) == math.comb(p + d, p)


@pytest.mark.parametrize("d, p", CASES)
def test_anchor_permutation_invariance(d, p, rng):
    base = build_general_position(d, p)
    perm = rng.permutation(p + d)
    g = build_general_position(d, p, [base.anchors[i] for i in perm])
    as_sets = lambda pts: sorted(map(tuple, np.round(pts, 12)))
    assert as_sets(g.points) == as_sets(base.points)
    c1, c2 = verify_general_position(base), verify_general_position(g)
    assert (c1.rank, c1.minimal) == (c2.rank, c2.minimal)


@pytest.mark.parametrize("d, p", CASES)
def test_random_polynomial_witness(d, p, rng):
    g = build_general_position(d, p)
    V = evaluation_matrix(g.points, d)  # rows: monomials, columns: points
    for _ in range(50):
        h = rng.uniform(-1, 1, size=V.shape[0])
        values = h @ V
        assert np.max(np.abs(values)) > 1e-9 * np.linalg.norm(h)


@pytest.mark.parametrize("d, p", CASES)
def test_normalization(d, p):
    g = build_general_position(d, p)
    pts = normalize_to_template_origin(g)
    e1 = np.zeros(p)
    e1[0] = 1
    assert np.array_equal(pts[0], e1)
    shift = pts - g.points
    assert np.allclose(shift, shift[0])
    rank, size = brute_force_rank(pts, d)
    assert rank == size


def test_normalization_examples():
    g = build_general_position(1, 2, [0, 1, 2])
    assert np.allclose(normalize_to_template_origin(g), [[1, 0], [0, 0], [-1, 2]])
    assert np.allclose(normalize_to_template_origin(build_general_position(0, 1, [7])), [[1]])
    already = GeneralPositionSet(d=1, p=1, anchors=(0.0, 1.0),
                                 points=np.array([[1.0], [3.0]]), subsets=((0,), (1,)))
    assert np.array_equal(normalize_to_template_origin(already), already.points)
