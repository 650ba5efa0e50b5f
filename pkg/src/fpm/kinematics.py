"""Forward and inverse kinematics of the flat-plane mechanism.

Base frame ``O0`` sits at the ground node O with +z along the ground link
towards F. Node names follow the link table in :mod:`fpm.design`:

* B is the control node (``FB`` is the control link),
* A, C, E form the equatorial triangle of the bipyramid,
* D is the endpoint, the inverse of B about a sphere centred on O.

Forward kinematics works in three steps: a virtual link ``L2 = |OB|`` gives
frame ``O2`` at B; the triangles (O, B, X) for X in {C, A, E} fix the
equatorial nodes in ``O2``; the endpoint is the upper intersection of the
spheres of radius ``CD``, ``AD``, ``ED`` about them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import LinkSet
from .errors import (
    DegenerateCenters,
    DegenerateFrame,
    DegenerateTarget,
    NoIntersection,
    OutOfWorkspace,
    ParallelPlanes,
)
from .geometry import (
    FrameTransform,
    circle_plane_intersection,
    homogeneous,
    rotation,
    three_sphere_intersection,
)


@dataclass(frozen=True)
class ControlInput:
    theta: float  # control-link deflection at F; 0 = control link continues the ground link
    phi: float  # azimuth of the deflection about the ground axis

    def __post_init__(self):
        if not (0.0 <= self.theta < math.pi) or not math.isfinite(self.phi):
            raise OutOfWorkspace(f"control input out of range: theta={self.theta}, phi={self.phi}")


@dataclass(frozen=True)
class JointAngles:
    alpha: float
    beta: float


@dataclass(frozen=True)
class KinematicTrace:
    L2: float
    frames: dict  # "O0".."O5" -> FrameTransform
    angles: dict  # intermediate angles of the derivation, radians
    endpoint: np.ndarray
    B_point: np.ndarray

    @property
    def nodes(self) -> dict:
        """Global positions of every joint, keyed by node letter."""
        f = self.frames
        return {
            "O": f["O0"].origin,
            "F": f["O1"].origin,
            "B": f["O2"].origin,
            "C": f["O3"].origin,
            "A": f["O4"].origin,
            "E": f["O5"].origin,
            "D": self.endpoint,
        }


@dataclass(frozen=True)
class InversionReport:
    collinearity_residual: float
    k_squared: float
    k_squared_expected: float

    @property
    def k_squared_error(self) -> float:
        return self.k_squared - self.k_squared_expected


def _acos(x, what: str):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12) or np.any(np.isnan(x)):
        raise OutOfWorkspace(f"{what}: cosine argument outside [-1, 1]")
    return np.arccos(np.clip(x, -1.0, 1.0))


def _rz(angle) -> np.ndarray:
    """Stack of z rotations, shape ``angle.shape + (3, 3)``."""
    c, s = np.cos(angle), np.sin(angle)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def _ry(angle) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _chain(per_link, theta, phi, twist_free: bool = True) -> dict:
    """Vectorised forward kinematics over arrays of control angles.

    Returns node positions, frame rotations and the intermediate angles, all
    with the leading shape of ``theta``.
    """
    (A0, A1, B0, B1, B2, B3, B4, B5, C0, C1, C2, D_AE, D_AC) = (float(v) for v in per_link)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)

    # step 1: virtual link O -> B
    L2 = np.sqrt(A0 * A0 + A1 * A1 - 2 * A0 * A1 * np.cos(np.pi - theta))
    s2 = A1 * np.sin(np.pi - theta) / L2
    if np.any(s2 > 1.0 + 1e-12):
        raise OutOfWorkspace("virtual-link angle undefined")
    theta2 = np.arcsin(np.minimum(1.0, s2))
    # obtuse angle at O is possible only when the control link is longer than the ground link
    theta2 = np.where(A1 * A1 > A0 * A0 + L2 * L2, np.pi - theta2, theta2)
    # tilt by theta2 in the azimuth phi; the trailing R_z(-phi) keeps the frame from twisting
    R2 = _rz(phi) @ _ry(theta2)
    if twist_free:
        R2 = R2 @ _rz(-phi)
    ez = np.array([0.0, 0.0, 1.0])
    Bp = (_rz(phi) @ _ry(theta2) @ ez) * L2[..., None]

    # step 2: equatorial nodes from the (O, B, X) triangles
    def angle_at_B(b, c, what):
        return _acos((L2 * L2 + b * b - c * c) / (2 * L2 * b), what)

    beta_C = angle_at_B(B0, C0, "triangle OBC")
    beta_A = angle_at_B(B1, C1, "triangle OBA")
    beta_E = angle_at_B(B2, C2, "triangle OBE")
    theta3, theta4, theta5 = np.pi - beta_C, beta_A - np.pi, np.pi - beta_E

    # projected lengths in the xy plane of O2
    pC, pA, pE = B0 * np.sin(beta_C), B1 * np.sin(beta_A), B2 * np.sin(beta_E)
    if min(pC.min(), pA.min(), pE.min()) <= 0:
        raise DegenerateFrame("equatorial node on the OB axis")
    # D links tilt out of the O2 xy plane when the C links differ
    dAC = D_AC * np.cos(np.arctan((C1 * np.cos(beta_A) - C0 * np.cos(beta_C)) / D_AC))
    dAE = D_AE * np.cos(np.arctan((C1 * np.cos(beta_A) - C2 * np.cos(beta_E)) / D_AE))
    omega_C = _acos((pC * pC + pA * pA - dAC * dAC) / (2 * pC * pA), "projected triangle A-G-C")
    omega_E = _acos((pE * pE + pA * pA - dAE * dAE) / (2 * pE * pA), "projected triangle A-G-E")
    # A sits at azimuth pi in O2; C and E are swung to either side of it
    az_C, az_E = np.pi - omega_C, np.pi + omega_E

    R3 = R2 @ _rz(az_C) @ _ry(theta3)
    R4 = R2 @ _ry(theta4)
    R5 = R2 @ _rz(az_E) @ _ry(theta5)
    Cp = Bp + (R3 @ ez) * B0
    Ap = Bp + (R4 @ ez) * B1
    Ep = Bp + (R5 @ ez) * B2

    # step 3: endpoint from three spheres, upper root
    try:
        _, Dp = three_sphere_intersection(Cp, B3, Ap, B4, Ep, B5)
    except NoIntersection as exc:
        raise OutOfWorkspace(f"endpoint spheres do not meet: {exc}") from None
    except DegenerateCenters as exc:
        raise DegenerateFrame(str(exc)) from None

    return {
        "L2": L2,
        "R": (R2, R3, R4, R5),
        "nodes": {"B": Bp, "C": Cp, "A": Ap, "E": Ep, "D": Dp},
        "angles": {
            "theta2": theta2,
            "theta3": theta3,
            "theta4": theta4,
            "theta5": theta5,
            "azimuth3": az_C,
            "azimuth5": az_E,
            "proj_BC": pC,
            "proj_BA": pA,
            "proj_BE": pE,
            "proj_AC": dAC,
            "proj_AE": dAE,
        },
    }


def forward(links: LinkSet, inp: ControlInput, twist_free: bool = True) -> tuple[np.ndarray, KinematicTrace]:
    """Endpoint position in ``O0`` for control angles ``inp``.

    The 13-link mechanism leaves the equatorial triangle free to spin about
    ``OB``; ``twist_free`` selects how that is pinned. ``True`` carries the
    frame at B by the minimal rotation that tilts the ground axis onto
    ``OB``; ``False`` drops the trailing ``R_z(-phi)`` so the triangle turns
    with the azimuth. The two agree exactly on ideal links.
    """
    ch = _chain(links.per_link, inp.theta, inp.phi, twist_free)
    R2, R3, R4, R5 = ch["R"]
    nd = ch["nodes"]
    frames = {
        "O0": FrameTransform.identity(),
        "O1": homogeneous(0.0, 0.0, 0.0, links["A0"]),
        "O2": FrameTransform(R2, nd["B"]),
        "O3": FrameTransform(R3, nd["C"]),
        "O4": FrameTransform(R4, nd["A"]),
        "O5": FrameTransform(R5, nd["E"]),
    }
    endpoint = np.array(nd["D"])
    trace = KinematicTrace(
        L2=float(ch["L2"]),
        frames=frames,
        angles={k: float(v) for k, v in ch["angles"].items()},
        endpoint=endpoint,
        B_point=np.array(nd["B"]),
    )
    return endpoint, trace


def forward_many(links: LinkSet, theta, phi, twist_free: bool = True) -> np.ndarray:
    """Endpoints for arrays of control angles, shape ``theta.shape + (3,)``.

    Raises if any input leaves the workspace.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta >= np.pi):
        raise OutOfWorkspace("theta outside [0, pi)")
    return _chain(links.per_link, theta, phi, twist_free)["nodes"]["D"]


def ideal_endpoint(L_c: float, inp: ControlInput) -> np.ndarray:
    """Closed-form endpoint of an exact mechanism: the plane z = L_c, at
    radius ``L_c * tan(theta / 2)`` in direction ``phi``."""
    r = L_c * math.tan(inp.theta / 2)
    return np.array([r * math.cos(inp.phi), r * math.sin(inp.phi), L_c])


def control_for_target(L_c: float, x: float, y: float) -> ControlInput:
    """Control angles whose ideal endpoint is ``(x, y, L_c)``."""
    r = math.hypot(x, y)
    phi = math.atan2(y, x) % (2 * math.pi) if r > 0 else 0.0
    return ControlInput(theta=2 * math.atan(r / L_c), phi=phi)


# -- inverse kinematics of the two-motor robot ---------------------------------


def _ik_point_A(links: LinkSet, x: float, y: float) -> tuple[float, np.ndarray]:
    A, B, C = links.A, links.B, links.C
    L_c = links.L_c
    X = np.array([x, y, L_c])
    OD = float(np.linalg.norm(X))
    Az = math.atan2(x, L_c)
    El = math.atan2(y, math.hypot(x, L_c))
    theta = math.atan2(math.hypot(x, y), L_c)
    OB = 2 * A * math.cos(theta)
    Bp = OB * np.array([math.cos(El) * math.sin(Az), math.sin(El), math.cos(El) * math.cos(Az)])

    alpha = math.atan2(Bp[0], Bp[2] - A)
    Nb = rotation("Y", alpha) @ np.array([1.0, 0.0, 0.0])
    Ng = X / OD
    lam = (OB + OD) / (2 * OD)
    G = lam * X
    try:
        lower, _ = circle_plane_intersection(Bp, B, Nb, Ng, G)
    except NoIntersection:
        raise OutOfWorkspace(f"target ({x}, {y}) unreachable: circle misses plane P") from None
    except ParallelPlanes:
        raise DegenerateTarget(f"target ({x}, {y}): circle plane parallel to plane P") from None
    # node A is the smaller-t root, (-b - sqrt(disc)) / 2a; both coincide at tangency
    return alpha, lower


_HOME_CACHE: dict = {}


def _beta_home(links: LinkSet) -> float:
    key = (links.A, links.B, links.C)
    if key not in _HOME_CACHE:
        _, Ap = _ik_point_A(links, 0.0, 0.0)
        _HOME_CACHE[key] = math.atan2(Ap[1], Ap[2])
    return _HOME_CACHE[key]


def inverse(links: LinkSet, target_x: float, target_y: float) -> JointAngles:
    """Motor angles placing the endpoint at ``(target_x, target_y, L_c)``.

    ``beta`` is reported relative to the home pose (control link parallel to
    the ground link), where both motors read zero.
    """
    alpha, Ap = _ik_point_A(links, target_x, target_y)
    beta = math.atan2(Ap[1], Ap[2]) - _beta_home(links)
    return JointAngles(alpha=alpha, beta=beta)


def joint_forward(links: LinkSet, angles: JointAngles) -> np.ndarray:
    """Endpoint reached from motor angles, via the full forward kinematics.

    Motor 1 turns the plane containing the control link about the y axis
    through F; motor 2 turns the plane containing ``OA`` about the x axis
    through O. Their intersection line fixes node A, A fixes B, and B is
    converted to control angles for :func:`forward`.
    """
    A, B, C = links.A, links.B, links.C
    F = np.array([0.0, 0.0, A])
    beta_abs = angles.beta + _beta_home(links)
    Nb = rotation("Y", angles.alpha) @ np.array([1.0, 0.0, 0.0])
    Nbeta = np.array([0.0, math.cos(beta_abs), -math.sin(beta_abs)])

    # node A: on both motor planes, at distance C from O
    u = np.cross(Nb, Nbeta)
    uu = float(u @ u)
    if uu < 1e-24:
        raise DegenerateTarget("motor planes are parallel")
    p0 = (float(Nb @ F) * np.cross(Nbeta, u)) / uu
    qa, qb, qc = uu, 2 * float(p0 @ u), float(p0 @ p0) - C * C
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        raise OutOfWorkspace("motor angles do not reach a valid pose")
    roots = [(-qb + s * math.sqrt(disc)) / (2 * qa) for s in (1, -1)]
    cand = [p0 + t * u for t in roots]
    Ap = max(cand, key=lambda p: p[2])

    # node B: on the motor-1 plane, |FB| = A and |AB| = B (radical plane of the two spheres)
    n = Ap - F
    offset = (A * A - B * B + Ap @ Ap - F @ F) / 2
    try:
        b1, b2 = circle_plane_intersection(F, A, Nb, n, n * offset / (n @ n))
    except NoIntersection:
        raise OutOfWorkspace("control node unreachable") from None
    Bp = max((b1, b2), key=lambda p: float(p @ p))

    rel = Bp - F
    theta = math.atan2(math.hypot(rel[0], rel[1]), rel[2])
    phi = math.atan2(rel[1], rel[0]) % (2 * math.pi)
    endpoint, _ = forward(links, ControlInput(theta, phi))
    return endpoint


def inversion_invariants(links: LinkSet, inp: ControlInput) -> InversionReport:
    endpoint, trace = forward(links, inp)
    Bp = trace.B_point
    OB = float(np.linalg.norm(Bp))
    OD = float(np.linalg.norm(endpoint))
    collinear = float(np.linalg.norm(np.cross(endpoint, Bp / OB)))
    return InversionReport(
        collinearity_residual=collinear,
        k_squared=OB * OD,
        k_squared_expected=links.C**2 - links.B**2,
    )


def workspace_radius(links: LinkSet, workspace_rel: float = 0.4) -> float:
    return 0.5 * workspace_rel * links.L_c
