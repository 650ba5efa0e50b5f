"""Flatness, Z-error-field calibration and compensation, plane tilt and
repeatability statistics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import griddata

from .errors import DegenerateInput, InsufficientSamples, OutOfDomain, ZeroNormal
from .geometry import fit_plane


@dataclass(frozen=True)
class SurfaceScan:
    points: np.ndarray  # (N, 3)
    frame: str = "machine"
    unit: str = "mm"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DegenerateInput(f"scan points must have shape (N, 3), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class ErrorField:
    """Plane-removed residuals on a regular grid, indexed ``e[iy, ix]``."""

    a: float
    b: float
    c: float
    xs: np.ndarray
    ys: np.ndarray
    e: np.ndarray

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return float(self.xs[0]), float(self.xs[-1]), float(self.ys[0]), float(self.ys[-1])

    def to_dict(self) -> dict:
        return {
            "plane": {"a": self.a, "b": self.b, "c": self.c},
            "grid": {"xs": self.xs.tolist(), "ys": self.ys.tolist(), "e": self.e.tolist()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorField":
        p, g = data["plane"], data["grid"]
        return cls(
            float(p["a"]), float(p["b"]), float(p["c"]),
            np.asarray(g["xs"], dtype=float), np.asarray(g["ys"], dtype=float), np.asarray(g["e"], dtype=float),
        )

    @classmethod
    def zeros(cls, xs, ys) -> "ErrorField":
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        return cls(0.0, 0.0, 0.0, xs, ys, np.zeros((len(ys), len(xs))))


@dataclass(frozen=True)
class RepeatabilityStats:
    mean: np.ndarray
    std: np.ndarray
    count: int


def flatness_rmse(scan: SurfaceScan) -> float:
    """RMS perpendicular distance from the orthogonal least-squares plane."""
    if len(scan.points) < 4:
        raise DegenerateInput("flatness needs at least 4 points")
    return fit_plane(scan.points, "orthogonal").rmse


def _grid_axes(pts: np.ndarray, tol: float = 1e-9):
    """Distinct x and y node coordinates if the points form a full grid."""
    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300)

    def distinct(v):
        v = np.sort(v)
        keep = np.concatenate([[True], np.diff(v) > tol * span])
        return v[keep]

    xs, ys = distinct(pts[:, 0]), distinct(pts[:, 1])
    return xs, ys, len(xs) * len(ys) == len(pts)


def build_error_field(scan: SurfaceScan, grid_shape: tuple[int, int] | None = None) -> ErrorField:
    """Fit ``z = ax + by + c`` and store the residuals on a regular grid.

    Gridded scans are used as they are. Irregular scans are resampled onto a
    ``grid_shape`` (ny, nx) grid over their bounding box by piecewise-linear
    interpolation on a Delaunay triangulation; nodes outside the convex hull
    take the nearest sample.
    """
    pts = scan.points
    if len(pts) < 4:
        raise DegenerateInput("error field needs at least 4 points")
    plane = fit_plane(pts, "functional")
    resid = plane.residuals(pts)
    xs, ys, gridded = _grid_axes(pts)

    if gridded and grid_shape is None:
        ix = np.searchsorted(xs, pts[:, 0] - 1e-9 * max(np.ptp(xs), 1.0))
        iy = np.searchsorted(ys, pts[:, 1] - 1e-9 * max(np.ptp(ys), 1.0))
        e = np.full((len(ys), len(xs)), np.nan)
        e[iy, ix] = resid
        if np.isnan(e).any():
            raise DegenerateInput("scan xy positions are not distinct")
    else:
        ny, nx = grid_shape or (int(round(math.sqrt(len(pts)))),) * 2
        xs = np.linspace(pts[:, 0].min(), pts[:, 0].max(), nx)
        ys = np.linspace(pts[:, 1].min(), pts[:, 1].max(), ny)
        gx, gy = np.meshgrid(xs, ys)
        e = griddata(pts[:, :2], resid, (gx, gy), method="linear")
        holes = np.isnan(e)
        if holes.any():
            e[holes] = griddata(pts[:, :2], resid, (gx[holes], gy[holes]), method="nearest")
    return ErrorField(plane.a, plane.b, plane.c, xs, ys, e)


def interpolate_error(field: ErrorField, x, y, clip: bool = True):
    """Bilinear interpolation of the residual grid at ``(x, y)``.

    Outside the grid the query is clamped to the boundary, or
    :class:`OutOfDomain` is raised when ``clip`` is false.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys, e = field.xs, field.ys, field.e
    x0, x1, y0, y1 = field.bounds
    if not clip:
        tol = 1e-12 * max(x1 - x0, y1 - y0, 1.0)
        outside = (x < x0 - tol) | (x > x1 + tol) | (y < y0 - tol) | (y > y1 + tol)
        if np.any(outside):
            raise OutOfDomain(f"query outside field domain [{x0}, {x1}] x [{y0}, {y1}]")
    x = np.clip(x, x0, x1)
    y = np.clip(y, y0, y1)

    def cell(v, nodes):
        if len(nodes) == 1:
            return np.zeros_like(v, dtype=int), np.zeros_like(v)
        i = np.clip(np.searchsorted(nodes, v, side="right") - 1, 0, len(nodes) - 2)
        return i, (v - nodes[i]) / (nodes[i + 1] - nodes[i])

    ix, tx = cell(x, xs)
    iy, ty = cell(y, ys)
    jx = np.minimum(ix + 1, len(xs) - 1)
    jy = np.minimum(iy + 1, len(ys) - 1)
    out = (
        e[iy, ix] * (1 - tx) * (1 - ty)
        + e[iy, jx] * tx * (1 - ty)
        + e[jy, ix] * (1 - tx) * ty
        + e[jy, jx] * tx * ty
    )
    return float(out) if out.ndim == 0 else out


def compensate(scan: SurfaceScan, field: ErrorField, clip: bool = True) -> SurfaceScan:
    """Subtract the predicted error ``e(x, y)`` from every z."""
    pts = np.array(scan.points)
    pts[:, 2] -= interpolate_error(field, pts[:, 0], pts[:, 1], clip=clip)
    return SurfaceScan(pts, scan.frame, scan.unit)


def tilt_between_planes(n_i, n_g) -> float:
    """Angle between two plane normals, in degrees."""
    a = np.asarray(n_i, dtype=float)
    b = np.asarray(n_g, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroNormal("plane normal has zero length")
    # atan2 keeps full precision for nearly parallel normals
    return math.degrees(math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b)))


def lateral_runout(tilt_deg: float, travel: float) -> float:
    return travel * math.tan(math.radians(tilt_deg))


def repeatability_stats(samples) -> RepeatabilityStats:
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or len(s) < 2:
        raise InsufficientSamples("repeatability needs at least 2 samples")
    return RepeatabilityStats(mean=s.mean(axis=0), std=s.std(axis=0, ddof=1), count=len(s))


# -- file formats ----------------------------------------------------------------


def read_scan(path) -> SurfaceScan:
    """CSV with header ``x,y,z`` and an optional ``# unit=mm`` comment line."""
    unit = "mm"
    rows = []
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                key, _, val = s[1:].strip().partition("=")
                if key.strip() == "unit":
                    unit = val.strip()
                continue
            if s:
                lines.append(s)
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"x", "y", "z"} <= {f.strip() for f in reader.fieldnames}:
        raise DegenerateInput(f"{path}: expected header x,y,z")
    for row in reader:
        row = {k.strip(): v for k, v in row.items()}
        rows.append((float(row["x"]), float(row["y"]), float(row["z"])))
    return SurfaceScan(np.array(rows).reshape(-1, 3), unit=unit)


def write_scan(scan: SurfaceScan, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# unit={scan.unit}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for p in scan.points:
            w.writerow([repr(float(v)) for v in p])


def save_field(field: ErrorField, path) -> None:
    Path(path).write_text(json.dumps(field.to_dict(), indent=2))


def load_field(path) -> ErrorField:
    return ErrorField.from_dict(json.loads(Path(path).read_text()))
