import math

import numpy as np
import pytest

from ctemplates.errors import ValidationError
from ctemplates.genpos import build_general_position, normalize_to_template_origin
from ctemplates.hybridloop import rotation_to
from ctemplates.polyalg import polymat_det
from ctemplates.sysmodel import StateAffineSystem, find_full_rank_minor, kalman_matrix
from ctemplates.templates import (certify_template, explicit_family, genpos_family, mimo_template,
                                  orthogonal_samples, scaled_rotated, siso_family, siso_template,
                                  square_family)

from conftest import rotation_siso


def test_siso_template_example():
    v = siso_template(0.1, 2)
    assert np.allclose(v.breakpoints, [0, 0.05, 0.1])
    assert np.allclose(v.levels.ravel(), [1.0, 1.05], rtol=0, atol=1e-15)
    assert v(0.0)[0] == 1.0
    assert v(0.0499)[0] == 1.0 and abs(v(0.05)[0] - 1.05) < 1e-15


@pytest.mark.parametrize("N", [1, 2, 3, 7, 10])
def test_siso_levels_distinct_and_deviation(N):
    delta = 0.37
    v = siso_template(delta, N)
    levels = v.levels.ravel()
    assert v.num_segments == N and len(set(levels)) == N
    assert np.allclose(np.diff(v.breakpoints), delta / N)
    dev = np.max(np.abs(levels - 1.0))
    assert abs(dev - delta * (N - 1) / N) < 1e-14 and dev < delta


def test_siso_template_errors():
    for args in [(0.0, 2), (-1.0, 2), (0.1, 0)]:
        with pytest.raises(ValidationError):
            siso_template(*args)


def test_square_levels():
    d = 0.02
    v = square_family().generate(d)
    assert np.allclose(v.breakpoints, [0, d / 4, d / 2, 3 * d / 4, d])
    assert np.allclose(v.levels, [[1, 0], [1, d], [1 + d, d], [1 + d, 0]], rtol=0, atol=1e-15)
    # second input is the indicator of [d/4, 3d/4), first of [d/2, d], both times d
    for s in np.linspace(0, d, 41)[:-1]:
        u = v(s)
        assert abs(u[1] - d * (d / 4 <= s + 1e-15 < 3 * d / 4)) < 1e-15
        assert abs(u[0] - 1 - d * (s + 1e-15 >= d / 2)) < 1e-15


def test_mimo_first_segment_and_unit_delta():
    pts = normalize_to_template_origin(build_general_position(1, 2))
    v = mimo_template(1.0, pts)
    assert np.allclose(v.levels, pts)
    assert np.array_equal(mimo_template(0.3, pts).levels[0], [1.0, 0.0])


def test_mimo_wrong_anchor():
    with pytest.raises(ValidationError):
        mimo_template(0.1, [[0.0, 0.0], [1.0, 1.0]])


def test_scaled_rotated_examples():
    v = siso_template(0.1, 2)
    assert np.array_equal(scaled_rotated(v, 0.0, [[1.0]]).levels, np.zeros((2, 1)))
    assert scaled_rotated(v, 1.0, [[1.0]]) == v
    assert np.allclose(scaled_rotated(v, 2.0, [[-1.0]]).levels.ravel(), [-2.0, -2.1])
    with pytest.raises(ValidationError):
        scaled_rotated(square_family().generate(0.1), 1.0, [[1.0, 0.1], [0.0, 1.0]])


FAMILIES = [siso_family(3), square_family(), genpos_family(2, 2), genpos_family(1, 3),
            explicit_family([[1.0, 0.0], [0.0, 2.0]], T=0.5)]


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f"{f.kind}-{f.N}")
def test_sampling_family_axioms(family, rng):
    T = family.T if math.isfinite(family.T) else 1.0
    for delta in rng.uniform(0, T, 20):
        delta = max(delta, 1e-6)
        v = family.generate(delta)
        e1 = np.zeros(family.p)
        e1[0] = 1
        assert np.array_equal(v(0.0), e1)
        assert v.num_segments == family.N
        assert np.allclose(np.diff(v.breakpoints), delta / family.N)
        dev = np.max(np.linalg.norm(v.levels - e1, axis=1))
        assert dev <= family.kappa(delta) * (1 + 1e-12)


def test_family_domain():
    with pytest.raises(ValidationError):
        explicit_family([[1.0, 0.0], [0.0, 2.0]], T=0.5).generate(0.6)


def test_orthogonal_samples():
    assert [R[0, 0] for R in orthogonal_samples(1, 5)] == [1.0, -1.0]
    Rs = orthogonal_samples(2, 8)
    dets = [round(np.linalg.det(R)) for R in Rs]
    assert dets.count(1) == 8 and dets.count(-1) == 8
    Rs3 = orthogonal_samples(3, 10, seed=4)
    assert len(Rs3) == 10
    for R in Rs + Rs3:
        assert np.linalg.norm(R.T @ R - np.eye(R.shape[0])) < 1e-12
    again = orthogonal_samples(3, 10, seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(Rs3, again))


def test_square_family_never_all_singular(demo_sys, rng):
    det = find_full_rank_minor(demo_sys).det
    v = square_family().generate(0.02)
    for _ in range(500):
        mu = rng.uniform(0, 50)
        R = rotation_to(rng.normal(size=2))
        if rng.random() < 0.5:
            R = R @ np.diag([1.0, -1.0])
        levels = mu * v.levels @ R.T
        assert max(abs(det(u)) for u in levels) > 1e-12


def test_certify_constant_output_system():
    sys = StateAffineSystem.from_numeric([[0.0]], [[1.0]], p=2)
    cert = certify_template(sys, square_family(), 0.3, 5.0, mu_grid=4, rot_grid=4)
    assert abs(cert.g_estimate - 0.3) < 1e-12


def test_certify_example_positive(demo_sys):
    cert = certify_template(demo_sys, square_family(), 0.02, 20.0, mu_grid=10, rot_grid=16)
    assert cert.positive and cert.num_rotations == 32
    assert 0 <= cert.worst_mu <= 20.0


def test_certify_nested_grid_monotone(demo_sys):
    small = certify_template(demo_sys, square_family(), 0.02, 10.0, mu_grid=5, rot_grid=8)
    large = certify_template(demo_sys, square_family(), 0.02, 20.0, mu_grid=10, rot_grid=8)
    assert large.g_estimate <= small.g_estimate


def test_certify_is_min_over_grid(demo_sys):
    from ctemplates.sysmodel import gramian
    cert = certify_template(demo_sys, square_family(), 0.02, 4.0, mu_grid=2, rot_grid=4)
    v = square_family().generate(0.02)
    vals = [np.linalg.eigvalsh(gramian(demo_sys, scaled_rotated(v, mu, R), 0, 0.02))[0]
            for mu in (0.0, 2.0, 4.0) for R in orthogonal_samples(2, 4)]
    assert abs(cert.g_estimate - min(vals)) <= 1e-12 * max(1.0, abs(min(vals)))


def test_rotation_siso_det_degree():
    sys = rotation_siso()
    det = polymat_det(kalman_matrix(sys))
    assert det.degree == 1 and abs(det([1.0])) == 0.0


def test_siso_enough_segments_positive():
    cert = certify_template(rotation_siso(), siso_family(2), 0.1, 2.0, mu_grid=50)
    assert cert.positive


def test_siso_root_aligned_single_segment():
    # with one level, mu = 1 puts the whole window on the root of 1 - u
    cert = certify_template(rotation_siso(), siso_family(1), 0.1, 2.0, mu_grid=50)
    assert abs(cert.g_estimate) < 1e-12
    assert cert.worst_mu == 1.0 and cert.worst_R[0, 0] == 1.0
