import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpm.errors import DegenerateCenters, DegenerateInput, IllConditioned, NoIntersection, ParallelPlanes
from fpm.geometry import (
    FrameTransform,
    circle_plane_intersection,
    fit_plane,
    fit_sphere,
    homogeneous,
    rotation,
    rotation_xyz,
    three_sphere_intersection,
)
from oracles import grid_search_sphere, newton_three_sphere, svd_plane

angles = st.floats(-10, 10, allow_nan=False)


def test_rotation_identity_and_quarter_turn():
    assert np.array_equal(rotation("Z", 0.0), np.eye(3))
    assert np.allclose(rotation("X", math.pi / 2) @ [0, 1, 0], [0, 0, 1], atol=1e-15)


def test_rotation_xyz_matches_hand_expansion():
    phi, theta, psi = 0.1, 0.2, 0.3
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st_ = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    expected = np.array([
        [ct * cp, -ct * sp, st_],
        [cf * sp + sf * st_ * cp, cf * cp - sf * st_ * sp, -sf * ct],
        [sf * sp - cf * st_ * cp, sf * cp + cf * st_ * sp, cf * ct],
    ])
    assert np.allclose(rotation_xyz(phi, theta, psi), expected, atol=1e-15)


@settings(max_examples=200)
@given(st.sampled_from("XYZ"), angles)
def test_rotation_orthonormal(axis, a):
    R = rotation(axis, a)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1) < 1e-12


def test_homogeneous_examples():
    T = homogeneous(0, 0, 0, 2.5)
    assert np.array_equal(T.rotation, np.eye(3))
    assert np.allclose(T.translation, [0, 0, 2.5])
    I = homogeneous(0, 0, 0, 0)
    assert np.allclose(I.matrix, np.eye(4))
    chain = homogeneous(0, 0, 0, 1) @ homogeneous(0, math.pi / 2, 0, 1)
    assert abs(np.linalg.norm(chain.apply([0, 0, 0])) - math.sqrt(2)) < 1e-15


@given(angles, angles, angles, st.floats(-5, 5), angles, angles, angles, st.floats(-5, 5))
def test_frame_algebra(a, b, c, L, d, e, f, M):
    T, U = homogeneous(a, b, c, L), homogeneous(d, e, f, M)
    V = homogeneous(c, a, b, L + M)
    lhs, rhs = (T @ U) @ V, T @ (U @ V)
    assert np.allclose(lhs.matrix, rhs.matrix, atol=1e-12)
    assert np.allclose((T.inverse() @ T).matrix, np.eye(4), atol=1e-12)
    assert np.allclose((T @ U).matrix, T.matrix @ U.matrix, atol=1e-12)


def test_fit_plane_exact_and_alternating():
    pts = np.array([[0, 0, 1], [1, 0, 3], [0, 1, 4], [1, 1, 6]], dtype=float)
    for mode in ("functional", "orthogonal"):
        f = fit_plane(pts, mode)
        assert (f.a, f.b, f.c) == pytest.approx((2, 3, 1), abs=1e-12)
        assert f.rmse < 1e-12
    sq = np.array([[1, 1, 1], [-1, 1, -1], [-1, -1, 1], [1, -1, -1]], dtype=float)
    f = fit_plane(sq, "orthogonal")
    assert f.rmse == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(f.normal, [0, 0, 1], atol=1e-12)


def test_fit_plane_matches_eigen_oracle():
    rng = np.random.default_rng(3)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    u = np.cross(n, [1, 0, 0])
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    pts = rng.normal(size=(50, 1)) * u * 3 + rng.normal(size=(50, 1)) * v * 2 + rng.normal(0, 0.01, (50, 1)) * n
    f = fit_plane(pts, "orthogonal")
    n_ref, rmse_ref = svd_plane(pts)
    assert np.allclose(f.normal, n_ref, atol=1e-9)
    assert f.rmse == pytest.approx(rmse_ref, abs=1e-9)
    assert abs(np.linalg.norm(f.normal) - 1) < 1e-15


def test_fit_plane_errors():
    with pytest.raises(DegenerateInput):
        fit_plane([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]])
    with pytest.raises(DegenerateInput):
        fit_plane([[0, 0, 0], [1, 0, 0]])
    vertical = [[0, 0, 0], [1, 0, 0], [0, 0, 1], [1, 0, 1]]
    with pytest.raises(IllConditioned):
        fit_plane(vertical, "functional")
    assert fit_plane(vertical, "orthogonal").rmse < 1e-15


@settings(max_examples=50)
@given(angles, angles, angles, st.integers(0, 2**32 - 1))
def test_orthogonal_fit_rotation_invariant(a, b, c, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(30, 3)) * [5, 3, 0.2]
    R = rotation_xyz(a, b, c)
    assert fit_plane(pts @ R.T + [1, -2, 3]).rmse == pytest.approx(fit_plane(pts).rmse, abs=1e-10)


def test_fit_sphere_examples():
    c = np.array([1.0, 2.0, 3.0])
    six = c + np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    f = fit_sphere(six)
    assert np.allclose(f.center, c, atol=1e-12) and f.radius == pytest.approx(1, abs=1e-12) and f.rmse < 1e-12
    octa = 4.5 * (six - c)
    f = fit_sphere(octa)
    assert np.allclose(f.center, 0, atol=1e-12) and f.radius == pytest.approx(4.5, abs=1e-12)
    with pytest.raises(DegenerateInput):
        fit_sphere([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [2, 1, 0]])
    with pytest.raises(DegenerateInput):
        fit_sphere(six[:3])


def test_fit_sphere_matches_grid_search():
    rng = np.random.default_rng(5)
    v = rng.normal(size=(60, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    pts = np.array([1.0, -2.0, 0.5]) + 3.0 * v + rng.normal(0, 0.02, (60, 3))
    f = fit_sphere(pts)
    c_ref, r_ref = grid_search_sphere(pts, [1.2, -1.8, 0.3], 0.6)
    assert np.allclose(f.center, c_ref, atol=1e-6)
    assert f.radius == pytest.approx(r_ref, abs=1e-6)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_fit_sphere_exact_samples(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-10, 10, 3)
    r = rng.uniform(0.1, 20)
    v = rng.normal(size=(12, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = fit_sphere(c + r * v)
    assert np.allclose(f.center, c, atol=1e-9 * max(r, np.abs(c).max()))
    assert f.radius == pytest.approx(r, rel=1e-9)


def test_three_sphere_symmetric():
    lo, hi = three_sphere_intersection((1, 0, 0), 1, (0, 1, 0), 1, (0, 0, 1), 1)
    assert np.allclose(lo, 0, atol=1e-15)
    assert np.allclose(hi, [2 / 3] * 3, atol=1e-15)


def test_three_sphere_degenerate():
    with pytest.raises(DegenerateCenters):
        three_sphere_intersection((0, 0, 0), 1, (1, 0, 0), 1, (2, 0, 0), 1)
    with pytest.raises(NoIntersection):
        three_sphere_intersection((1, 0, 0), 0.1, (0, 1, 0), 0.1, (0, 0, 1), 0.1)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_three_sphere_random_feasible(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5, 5, (3, 3))
    span = centers[:, :2] - centers[0, :2]
    if abs(span[1, 0] * span[2, 1] - span[1, 1] * span[2, 0]) < 1e-2:
        return
    truth = rng.uniform(-5, 5, 3)
    radii = np.linalg.norm(centers - truth, axis=1)
    lo, hi = three_sphere_intersection(centers[0], radii[0], centers[1], radii[1], centers[2], radii[2])
    assert lo[2] <= hi[2]
    for p in (lo, hi):
        assert np.all(np.abs(np.linalg.norm(p - centers, axis=1) - radii) <= 1e-10 * radii.max())
    # the Newton oracle started from the planted point converges to one of the two roots
    ref = newton_three_sphere(centers, radii, truth + 1e-3)
    assert min(np.linalg.norm(ref - lo), np.linalg.norm(ref - hi)) < 1e-8 * max(1, radii.max())


def test_three_sphere_batched_matches_scalar():
    rng = np.random.default_rng(9)
    c = rng.uniform(-5, 5, (7, 3, 3))
    truth = rng.uniform(-5, 5, (7, 3))
    r = np.linalg.norm(c - truth[:, None, :], axis=2)
    lo, hi = three_sphere_intersection(c[:, 0], r[:, 0], c[:, 1], r[:, 1], c[:, 2], r[:, 2])
    for k in range(7):
        l1, h1 = three_sphere_intersection(c[k, 0], r[k, 0], c[k, 1], r[k, 1], c[k, 2], r[k, 2])
        assert np.array_equal(lo[k], l1) and np.array_equal(hi[k], h1)


def test_circle_plane_examples():
    p1, p2 = circle_plane_intersection((0, 0, 0), 1, (0, 0, 1), (1, 0, 0), (0, 0, 0))
    assert {tuple(np.round(p1, 12)), tuple(np.round(p2, 12))} == {(0, -1, 0), (0, 1, 0)}
    t1, t2 = circle_plane_intersection((0, 0, 0), 1, (0, 0, 1), (1, 0, 0), (1, 0, 0))
    assert np.allclose(t1, [1, 0, 0]) and np.array_equal(t1, t2)
    with pytest.raises(NoIntersection):
        circle_plane_intersection((0, 0, 0), 1, (0, 0, 1), (1, 0, 0), (2, 0, 0))
    with pytest.raises(ParallelPlanes):
        circle_plane_intersection((0, 0, 0), 1, (0, 0, 1), (0, 0, 2), (2, 0, 0))


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_circle_plane_random(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-3, 3, 3)
    r = rng.uniform(0.5, 3)
    nb = rng.normal(size=3)
    ng = rng.normal(size=3)
    if np.linalg.norm(np.cross(nb / np.linalg.norm(nb), ng / np.linalg.norm(ng))) < 1e-3:
        return
    q = c + rng.uniform(-0.5, 0.5) * r * ng / np.linalg.norm(ng)
    try:
        pts = circle_plane_intersection(c, r, nb, ng, q)
    except NoIntersection:
        return
    scale = max(r, np.abs(c).max(), 1)
    for p in pts:
        assert abs((p - c) @ nb) / np.linalg.norm(nb) <= 1e-10 * scale
        assert abs((p - q) @ ng) / np.linalg.norm(ng) <= 1e-10 * scale
        assert abs(np.linalg.norm(p - c) - r) <= 1e-10 * scale


def test_frame_transform_identity():
    T = FrameTransform.identity()
    assert np.array_equal(T.apply([1, 2, 3]), [1, 2, 3])
