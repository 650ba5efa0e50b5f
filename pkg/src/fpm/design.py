"""Design parameterisation (bipyramid L_c, R, H, gamma) and link sets.

The thirteen physical links are stored in the fixed order

    A0 A1 | B0 B1 B2 B3 B4 B5 | C0 C1 C2 | D0 D1
    OF FB | BC BA BE CD AD ED | OC OA OE | AE AC
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDesign, InvalidLinks, NonPositiveResult

LINK_NAMES = (
    "A0", "A1",
    "B0", "B1", "B2", "B3", "B4", "B5",
    "C0", "C1", "C2",
    "D0", "D1",
)
LINK_TYPES = "AABBBBBBCCCDD"
N_LINKS = 13

# noise draws beyond this many sigmas are clipped
TRUNCATE_SIGMAS = 6.0


@dataclass(frozen=True)
class DesignParams:
    L_c: float
    R: float
    H: float
    gamma: float  # radians

    def check(self) -> None:
        if not all(math.isfinite(v) for v in (self.L_c, self.R, self.H, self.gamma)):
            raise InvalidDesign("non-finite design parameter")
        if not self.L_c > 0:
            raise InvalidDesign(f"L_c must be positive, got {self.L_c}")
        if not 0 < self.H < self.L_c / 2:
            raise InvalidDesign(f"H must lie in (0, L_c/2), got H={self.H}, L_c={self.L_c}")
        if not self.R > 0:
            raise InvalidDesign(f"R must be positive, got {self.R}")
        if not 0 < self.gamma < 2 * math.pi:
            raise InvalidDesign(f"gamma must lie in (0, 2*pi), got {self.gamma}")

    def scaled(self, s: float) -> "DesignParams":
        return DesignParams(self.L_c * s, self.R * s, self.H * s, self.gamma)

    @property
    def H_over_R(self) -> float:
        return self.H / self.R


OPTIMAL_DESIGN = DesignParams(L_c=1.0, R=0.5, H=0.25, gamma=math.pi / 2)


@dataclass(frozen=True)
class LinkSet:
    """Nominal type lengths plus the 13 per-link lengths of one instance."""

    A: float
    B: float
    C: float
    D: float
    per_link: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.per_link is None:
            lengths = self.type_lengths()
        else:
            lengths = np.array(self.per_link, dtype=float).reshape(N_LINKS)
        lengths.setflags(write=False)
        object.__setattr__(self, "per_link", lengths)

    def type_lengths(self) -> np.ndarray:
        lut = {"A": self.A, "B": self.B, "C": self.C, "D": self.D}
        return np.array([lut[t] for t in LINK_TYPES], dtype=float)

    def with_lengths(self, per_link) -> "LinkSet":
        return LinkSet(self.A, self.B, self.C, self.D, np.asarray(per_link, dtype=float))

    def __getitem__(self, name: str) -> float:
        return float(self.per_link[LINK_NAMES.index(name)])

    @property
    def L_c(self) -> float:
        """Nominal tip-to-base distance, (C^2 - B^2) / (2A)."""
        return (self.C**2 - self.B**2) / (2.0 * self.A)

    @property
    def is_nominal(self) -> bool:
        return bool(np.array_equal(self.per_link, self.type_lengths()))

    def __eq__(self, other):
        if not isinstance(other, LinkSet):
            return NotImplemented
        return (self.A, self.B, self.C, self.D) == (other.A, other.B, other.C, other.D) and bool(
            np.array_equal(self.per_link, other.per_link)
        )

    def __hash__(self):
        return hash((self.A, self.B, self.C, self.D, self.per_link.tobytes()))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    obtuse_check: bool
    triangle_check: bool
    apex_check: bool
    # (C^2 - 4A^2 - B^2, 2A + B - C, D, 2R - D); positive inside the design space
    margins: tuple[float, float, float, float]


def links_from_design(p: DesignParams) -> LinkSet:
    p.check()
    A = (p.L_c - 2 * p.H) / 2
    B = math.sqrt(p.H**2 + p.R**2)
    C = math.sqrt((p.L_c - p.H) ** 2 + p.R**2)
    D = math.sqrt((p.R + p.R * math.cos(p.gamma / 2)) ** 2 + (p.R * math.sin(p.gamma / 2)) ** 2)
    return LinkSet(A, B, C, D)


def design_from_links(links: LinkSet) -> DesignParams:
    report = validate_links(links)
    if not report.valid:
        raise InvalidLinks(f"links do not form a valid design: {report}")
    A, B, C, D = links.A, links.B, links.C, links.D
    L_c = (C * C - B * B) / (2 * A)
    H = (L_c - 2 * A) / 2
    R = math.sqrt(B * B - H * H)
    gamma = 4 * math.acos(D / (2 * R))
    return DesignParams(L_c=L_c, R=R, H=H, gamma=gamma)


def validate_links(links: LinkSet) -> ValidityReport:
    """Two-stage check: (2A, B, C) must be a strictly obtuse, non-degenerate
    triangle with C longest, then D must close a bipyramid apex."""
    A, B, C, D = links.A, links.B, links.C, links.D
    if min(A, B, C, D) <= 0:
        raise InvalidLinks("link lengths must be positive")
    obtuse_margin = C * C - 4 * A * A - B * B
    triangle_margin = 2 * A + B - C
    obtuse = obtuse_margin > 1e-12 * C * C
    triangle = triangle_margin > 1e-12 * C

    # implied bipyramid radius; only meaningful when the first stage passes
    L_c = (C * C - B * B) / (2 * A)
    H = (L_c - 2 * A) / 2
    r2 = B * B - H * H
    R = math.sqrt(r2) if r2 > 0 else 0.0
    apex_lo, apex_hi = D, 2 * R - D
    apex = r2 > 0 and apex_lo > 0 and apex_hi > 1e-12 * max(D, 2 * R)
    return ValidityReport(
        valid=bool(obtuse and triangle and apex),
        obtuse_check=bool(obtuse),
        triangle_check=bool(triangle),
        apex_check=bool(apex),
        margins=(obtuse_margin, triangle_margin, apex_lo, apex_hi),
    )


def perturb_links(links: LinkSet, sigma: float, rng: np.random.Generator) -> LinkSet:
    """Independent additive Gaussian error on each of the 13 physical links."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return links
    noise = np.clip(rng.standard_normal(N_LINKS), -TRUNCATE_SIGMAS, TRUNCATE_SIGMAS) * sigma
    out = links.per_link + noise
    if np.any(out <= 0):
        raise NonPositiveResult("perturbation produced a non-positive link length")
    return links.with_lengths(out)


def link_rmse(nominal: LinkSet, instance: LinkSet) -> float:
    dev = np.asarray(instance.per_link) - np.asarray(nominal.per_link)
    return float(np.sqrt(np.sum(dev**2) / N_LINKS))


# -- design files --------------------------------------------------------------


def load_design(path) -> tuple[LinkSet, DesignParams | None, str]:
    """Read a design JSON file; returns (links, params or None, unit)."""
    data = json.loads(Path(path).read_text())
    return design_from_dict(data)


def design_from_dict(data: dict) -> tuple[LinkSet, DesignParams | None, str]:
    unit = data.get("unit", "mm")
    if "links" in data:
        ln = data["links"]
        links = LinkSet(float(ln["A"]), float(ln["B"]), float(ln["C"]), float(ln["D"]))
        return links, None, unit
    try:
        p = DesignParams(
            L_c=float(data["L_c"]),
            R=float(data["R"]),
            H=float(data["H"]),
            gamma=math.radians(float(data["gamma_deg"])),
        )
    except KeyError as exc:
        raise InvalidDesign(f"design file is missing {exc.args[0]!r}") from None
    return links_from_design(p), p, unit


def design_to_dict(p: DesignParams, unit: str = "mm") -> dict:
    return {"L_c": p.L_c, "R": p.R, "H": p.H, "gamma_deg": math.degrees(p.gamma), "unit": unit}


def links_to_dict(links: LinkSet, unit: str = "mm") -> dict:
    return {"links": {"A": links.A, "B": links.B, "C": links.C, "D": links.D}, "unit": unit}
