"""Geometric primitives: rotations, frame transforms, least-squares fits and
the two closed-form intersection solvers used by the kinematics.

Points and directions are plain ``numpy`` arrays of shape ``(3,)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateCenters,
    DegenerateInput,
    IllConditioned,
    NoIntersection,
    ParallelPlanes,
)

# relative threshold for treating a discriminant as a tangency
TANGENT_TOL = 1e-12
# relative threshold on line-direction norm and on the three-sphere denominator
DEGENERATE_TOL = 1e-12


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    return v


def rotation(axis: str, angle: float) -> np.ndarray:
    """Right-handed elementary rotation about ``X``, ``Y`` or ``Z``."""
    c, s = np.cos(angle), np.sin(angle)
    axis = axis.upper()
    if axis == "X":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "Y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "Z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"unknown rotation axis {axis!r}")


def rotation_xyz(phi: float, theta: float, psi: float) -> np.ndarray:
    return rotation("X", phi) @ rotation("Y", theta) @ rotation("Z", psi)


@dataclass(frozen=True)
class FrameTransform:
    """Rigid transform ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "FrameTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def pure_rotation(cls, rot: np.ndarray) -> "FrameTransform":
        return cls(np.asarray(rot, dtype=float), np.zeros(3))

    def __matmul__(self, other: "FrameTransform") -> "FrameTransform":
        return FrameTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def inverse(self) -> "FrameTransform":
        rt = self.rotation.T
        return FrameTransform(rt, -rt @ self.translation)

    @property
    def origin(self) -> np.ndarray:
        return self.translation

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def homogeneous(phi: float, theta: float, psi: float, L: float) -> FrameTransform:
    """Frame reached by rotating by ``R_x(phi) R_y(theta) R_z(psi)`` and then
    travelling ``L`` along the rotated z axis (a link of length ``L``)."""
    rot = rotation_xyz(phi, theta, psi)
    return FrameTransform(rot, rot @ np.array([0.0, 0.0, L]))


# -- least-squares fits -----------------------------------------------------


@dataclass(frozen=True)
class PlaneFit:
    """Best-fit plane.

    ``mode == "functional"``: ``z = a*x + b*y + c`` (vertical residuals).
    ``mode == "orthogonal"``: ``normal . p = offset`` with unit ``normal``
    (perpendicular residuals). Both forms are filled in whenever they exist.
    """

    mode: str
    a: float
    b: float
    c: float
    normal: np.ndarray
    offset: float
    rmse: float

    def residuals(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.mode == "functional":
            return pts[:, 2] - (self.a * pts[:, 0] + self.b * pts[:, 1] + self.c)
        return pts @ self.normal - self.offset


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateInput(f"expected an (N, 3) point array, got shape {pts.shape}")
    return pts


def _check_not_collinear(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 3:
        raise DegenerateInput("plane fit needs at least 3 points")
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] == 0.0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateInput("points are collinear")
    return s


def fit_plane(points, mode: Literal["functional", "orthogonal"] = "orthogonal") -> PlaneFit:
    pts = _as_points(points)
    _check_not_collinear(pts)
    if mode == "orthogonal":
        centroid = pts.mean(axis=0)
        _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
        n = vt[-1]
        # orient the normal towards +z so that a/b/c have the natural sign
        if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
            n = -n
        offset = float(n @ centroid)
        resid = pts @ n - offset
        rmse = float(np.sqrt(np.mean(resid**2)))
        if abs(n[2]) > 1e-12:
            a, b, c = -n[0] / n[2], -n[1] / n[2], offset / n[2]
        else:
            a = b = c = float("nan")
        return PlaneFit("orthogonal", float(a), float(b), float(c), n, offset, rmse)
    if mode == "functional":
        xy = pts[:, :2] - pts[:, :2].mean(axis=0)
        sxy = np.linalg.svd(xy, compute_uv=False)
        if sxy[1] <= 1e-9 * max(sxy[0], 1e-300):
            raise IllConditioned("points lie in a (near-)vertical plane; z = ax+by+c is ill-posed")
        design = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
        (a, b, c), *_ = np.linalg.lstsq(design, pts[:, 2], rcond=None)
        resid = pts[:, 2] - design @ np.array([a, b, c])
        rmse = float(np.sqrt(np.mean(resid**2)))
        n = np.array([-a, -b, 1.0])
        norm = np.linalg.norm(n)
        return PlaneFit("functional", float(a), float(b), float(c), n / norm, float(c / norm), rmse)
    raise ValueError(f"unknown plane-fit mode {mode!r}")


@dataclass(frozen=True)
class SphereFit:
    center: np.ndarray
    radius: float
    rmse: float


def fit_sphere(points, refine: bool = True) -> SphereFit:
    """Algebraic least-squares sphere, optionally polished by a geometric
    (radial-residual) Gauss-Newton step."""
    pts = _as_points(points)
    if len(pts) < 4:
        raise DegenerateInput("sphere fit needs at least 4 points")
    scale = np.abs(pts - pts.mean(axis=0)).max()
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if scale == 0.0 or s[2] <= 1e-12 * s[0]:
        raise DegenerateInput("points are coplanar")

    # shift to the centroid for conditioning
    origin = pts.mean(axis=0)
    q = pts - origin
    design = np.column_stack([2.0 * q, np.ones(len(q))])
    rhs = np.sum(q**2, axis=1)
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    center = sol[:3]
    radius = np.sqrt(sol[3] + center @ center)

    if refine:
        def resid(p):
            return np.linalg.norm(q - p[:3], axis=1) - p[3]

        out = least_squares(resid, np.append(center, radius), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        center, radius = out.x[:3], abs(out.x[3])

    radial = np.linalg.norm(q - center, axis=1) - radius
    return SphereFit(center + origin, float(radius), float(np.sqrt(np.mean(radial**2))))


# -- intersection solvers ----------------------------------------------------


def _solve_quadratic(a, b, c, scale2):
    """Real roots of ``a t^2 + b t + c`` (a > 0), ascending; elementwise."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    disc = b * b - 4.0 * a * c
    tangent = -disc <= TANGENT_TOL * np.maximum(b * b, 4.0 * np.abs(a) * scale2)
    if np.any((disc < 0.0) & ~tangent):
        raise NoIntersection(f"negative discriminant {np.min(disc):.3e}")
    sq = np.sqrt(np.maximum(disc, 0.0))
    # pair roots without cancellation
    qv = -0.5 * (b + np.where(b >= 0, sq, -sq))
    safe = np.where(qv == 0.0, 1.0, qv)
    r1 = qv / a
    r2 = np.where(qv == 0.0, r1, c / safe)
    return np.minimum(r1, r2), np.maximum(r1, r2)


def three_sphere_intersection(c3, r3, c4, r4, c5, r5) -> tuple[np.ndarray, np.ndarray]:
    """Both intersection points of three spheres, ordered by ascending z.

    Pairwise differences of the sphere equations give two planes whose
    intersection line is written as ``y = a1*z + b1``, ``x = a2*z + b2``;
    substituting back into the first sphere leaves a quadratic in ``z``.
    The elimination divides by ``d``, twice the signed area of the
    xy-projected centre triangle.

    Centres may carry leading batch dimensions (``(..., 3)``) with radii
    broadcasting against them; an error is raised if any member fails.
    """
    c3, c4, c5 = (np.asarray(c, dtype=float) for c in (c3, c4, c5))
    r3, r4, r5 = (np.asarray(r, dtype=float) for r in (r3, r4, r5))
    x3, y3, z3 = np.moveaxis(c3, -1, 0)
    x4, y4, z4 = np.moveaxis(c4, -1, 0)
    x5, y5, z5 = np.moveaxis(c5, -1, 0)
    w3 = x3 * x3 + y3 * y3 + z3 * z3 - r3 * r3
    w4 = x4 * x4 + y4 * y4 + z4 * z4 - r4 * r4
    w5 = x5 * x5 + y5 * y5 + z5 * z5 - r5 * r5

    d = 2.0 * (y3 * (x4 - x5) + y4 * (x5 - x3) + y5 * (x3 - x4))
    span = np.max(np.ptp(np.stack([c3, c4, c5]), axis=0), axis=-1)
    if np.any(np.abs(d) <= DEGENERATE_TOL * span * span):
        raise DegenerateCenters("sphere centres have collinear xy projections")

    a1 = -2.0 / d * (z3 * (x4 - x5) + z4 * (x5 - x3) + z5 * (x3 - x4))
    b1 = 1.0 / d * (x3 * (w5 - w4) + x4 * (w3 - w5) + x5 * (w4 - w3))
    a2 = 2.0 / d * (z3 * (y4 - y5) + z4 * (y5 - y3) + z5 * (y3 - y4))
    b2 = -1.0 / d * (y3 * (w5 - w4) + y4 * (w3 - w5) + y5 * (w4 - w3))

    qa = a1 * a1 + a2 * a2 + 1.0
    qb = 2.0 * a1 * (b1 - y3) - 2.0 * z3 + 2.0 * a2 * (b2 - x3)
    qc = z3 * z3 + (b1 - y3) ** 2 + (b2 - x3) ** 2 - r3 * r3
    scale2 = np.maximum(np.maximum(r3, r4), r5) ** 2
    za, zb = _solve_quadratic(qa, qb, qc, scale2)
    lower = np.stack([a2 * za + b2, a1 * za + b1, za], axis=-1)
    upper = np.stack([a2 * zb + b2, a1 * zb + b1, zb], axis=-1)
    return lower, upper


def circle_plane_intersection(
    circle_center, circle_radius: float, circle_normal, plane_normal, plane_point
) -> tuple[np.ndarray, np.ndarray]:
    """Points where a circle meets a plane, ordered by the line parameter t.

    The circle lies in the plane through ``circle_center`` with normal
    ``circle_normal``. Tangency returns the same point twice.
    """
    center = vec3(circle_center)
    nb = vec3(circle_normal)
    ng = vec3(plane_normal)
    if np.linalg.norm(nb) == 0.0 or np.linalg.norm(ng) == 0.0:
        raise ParallelPlanes("zero normal")
    nb = nb / np.linalg.norm(nb)
    ng = ng / np.linalg.norm(ng)
    db = float(nb @ center)
    dg = float(ng @ vec3(plane_point))

    d = np.cross(nb, ng)
    dd = float(d @ d)
    if np.sqrt(dd) < DEGENERATE_TOL:
        raise ParallelPlanes("circle plane is parallel to the cutting plane")
    p0 = (db * np.cross(ng, d) + dg * np.cross(d, nb)) / dd
    p0r = p0 - center
    a = dd
    b = 2.0 * float(p0r @ d)
    c = float(p0r @ p0r) - circle_radius**2
    t1, t2 = _solve_quadratic(a, b, c, circle_radius**2)
    return p0 + float(t1) * d, p0 + float(t2) * d
