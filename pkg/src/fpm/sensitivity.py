"""Monte Carlo kinematic sensitivity S_k, design-space sweeps and the
workspace/flatness trade-off.

S_k for one perturbed instance is the orthogonal-plane rms flatness of the
endpoint cloud divided by the rms error of the 13 link lengths. Every random
stream is derived from ``(seed, *key, instance)`` with ``SeedSequence``
spawn keys, so results never depend on evaluation order or worker count.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .design import DesignParams, LinkSet, link_rmse, links_from_design, perturb_links, validate_links
from .errors import FPMError, InvalidDesign, InvalidLinks, OutOfWorkspace
from .geometry import fit_plane
from .kinematics import forward_many

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
# share of failed instances at which an evaluation is abandoned
MAX_FAILURE_RATE = 0.1
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SensitivityConfig:
    sigma_rel: float = 0.0005
    n_points: int = 50
    n_instances: int = 50
    workspace_rel: float = 0.4
    seed: int = 0
    aggregate: Literal["mean_of_ratios", "ratio_of_means"] = "mean_of_ratios"
    twist_free: bool = True

    def __post_init__(self):
        if self.n_points < 3 or self.n_instances < 2:
            raise ValueError("need n_points >= 3 and n_instances >= 2")
        if not 0 < self.workspace_rel < 2:
            raise ValueError("workspace_rel must lie in (0, 2)")
        if not self.sigma_rel > 0:
            raise ValueError("sigma_rel must be positive")
        if self.aggregate not in ("mean_of_ratios", "ratio_of_means"):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")


@dataclass(frozen=True)
class SensitivityResult:
    s_k: float
    ci95: float
    flatness_rmse_mean: float
    link_rmse_mean: float
    # (flatness, link rmse) per instance; NaN pairs mark failed instances
    per_instance: np.ndarray
    failures: int
    config: SensitivityConfig

    @property
    def n_ok(self) -> int:
        return len(self.per_instance) - self.failures


def sunflower_disc(n: int, radius: float) -> np.ndarray:
    """``n`` golden-angle points filling a disc, shape ``(n, 2)``."""
    i = np.arange(n)
    r = radius * np.sqrt((i + 0.5) / n)
    a = i * GOLDEN_ANGLE
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def sample_controls(L_c: float, workspace_rel: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Control angles whose ideal endpoints form a sunflower disc of
    diameter ``workspace_rel * L_c``."""
    xy = sunflower_disc(n, 0.5 * workspace_rel * L_c)
    r = np.hypot(xy[:, 0], xy[:, 1])
    return 2.0 * np.arctan(r / L_c), np.arctan2(xy[:, 1], xy[:, 0]) % (2 * np.pi)


def endpoint_flatness(links: LinkSet, theta, phi, twist_free: bool = True) -> float:
    """Orthogonal-plane rms flatness of the endpoints at the given inputs."""
    pts = forward_many(links, theta, phi, twist_free)
    return fit_plane(pts, "orthogonal").rmse


def instance_rng(seed: int, key: tuple = ()) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _check_workspace(links: LinkSet, cfg: SensitivityConfig, levels) -> list:
    controls = []
    for w in levels:
        theta, phi = sample_controls(links.L_c, w, cfg.n_points)
        try:
            forward_many(links, theta, phi, cfg.twist_free)
        except FPMError as exc:
            raise OutOfWorkspace(f"workspace_rel={w} is too large for this design: {exc}") from None
        controls.append((theta, phi))
    return controls


def _paired_instances(links: LinkSet, cfg: SensitivityConfig, levels, key: tuple):
    """Flatness of every instance at every workspace level plus its link rmse.

    An instance failing at any level is failed at all levels.
    """
    report = validate_links(links)
    if not report.valid:
        raise InvalidLinks(f"links do not form a valid design: {report}")
    controls = _check_workspace(links, cfg, levels)
    sigma = cfg.sigma_rel * links.L_c
    flat = np.full((cfg.n_instances, len(levels)), np.nan)
    lrmse = np.full(cfg.n_instances, np.nan)
    for i in range(cfg.n_instances):
        rng = instance_rng(cfg.seed, key + (i,))
        try:
            inst = perturb_links(links, sigma, rng)
            row = [endpoint_flatness(inst, th, ph, cfg.twist_free) for th, ph in controls]
        except FPMError:
            continue
        flat[i] = row
        lrmse[i] = link_rmse(links, inst)
    failures = int(np.isnan(lrmse).sum())
    if failures >= MAX_FAILURE_RATE * cfg.n_instances:
        raise OutOfWorkspace(f"{failures} of {cfg.n_instances} perturbed instances failed")
    return flat, lrmse, failures


def _aggregate(flat: np.ndarray, lrmse: np.ndarray, how: str) -> tuple[float, float]:
    ok = ~np.isnan(lrmse)
    f, l = flat[ok], lrmse[ok]
    n = len(f)
    if how == "mean_of_ratios":
        ratios = f / l
        return float(ratios.mean()), float(Z95 * ratios.std(ddof=1) / math.sqrt(n))
    # delta-method interval for a ratio of means
    r = f.mean() / l.mean()
    se = (f - r * l).std(ddof=1) / (l.mean() * math.sqrt(n))
    return float(r), float(Z95 * se)


def kinematic_sensitivity(links: LinkSet, cfg: SensitivityConfig, key: tuple = ()) -> SensitivityResult:
    """Mean S_k over ``cfg.n_instances`` perturbed copies of ``links``.

    ``key`` extends the seed path, letting callers such as the sweep give
    every design its own reproducible stream.
    """
    flat, lrmse, failures = _paired_instances(links, cfg, [cfg.workspace_rel], key)
    flat = flat[:, 0]
    s_k, ci = _aggregate(flat, lrmse, cfg.aggregate)
    return SensitivityResult(
        s_k=s_k,
        ci95=ci,
        flatness_rmse_mean=float(np.nanmean(flat)),
        link_rmse_mean=float(np.nanmean(lrmse)),
        per_instance=np.column_stack([flat, lrmse]),
        failures=failures,
        config=cfg,
    )


def workspace_flatness_curve(
    links: LinkSet, cfg: SensitivityConfig, workspace_levels: Sequence[float], key: tuple = ()
) -> list[tuple[float, float]]:
    """Mean flatness per workspace level, reusing the same instances at
    every level."""
    levels = [float(w) for w in workspace_levels]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ValueError("workspace levels must be ascending")
    flat, _, _ = _paired_instances(links, cfg, levels, key)
    return [(w, float(np.nanmean(flat[:, j]))) for j, w in enumerate(levels)]


# -- landscape sweep -------------------------------------------------------------

LANDSCAPE_HEADER = ["H", "R", "gamma", "H_over_R", "s_k", "ci95", "failures"]


@dataclass(frozen=True)
class LandscapeGrid:
    H: tuple
    R: tuple
    gamma: tuple = (math.pi / 2,)
    L_c: float = 1.0

    @classmethod
    def regular(cls, n_h: int, n_r: int, h_max: float = 0.5, r_max: float = 1.0, gamma=(math.pi / 2,)):
        """Nodes at ``h_max * k / n_h`` and ``r_max * k / n_r`` for k = 1..n."""
        H = tuple(h_max * k / n_h for k in range(1, n_h + 1))
        R = tuple(r_max * k / n_r for k in range(1, n_r + 1))
        return cls(H, R, tuple(gamma))

    def nodes(self) -> list[DesignParams]:
        return [
            DesignParams(self.L_c, r, h, g)
            for g in self.gamma
            for h in self.H
            for r in self.R
        ]


@dataclass(frozen=True)
class LandscapeRow:
    H: float
    R: float
    gamma: float
    H_over_R: float
    s_k: float
    ci95: float
    failures: int
    # "ok", "invalid" (outside the design space) or "failed" (workspace or too many failures)
    status: str = "ok"


@dataclass
class LandscapeTable:
    rows: list[LandscapeRow] = field(default_factory=list)

    def minimum(self) -> LandscapeRow:
        ok = [r for r in self.rows if r.status == "ok"]
        return min(ok, key=lambda r: r.s_k)

    def as_array(self, gamma: float | None = None):
        """(H values, R values, S_k matrix indexed [H, R]) for one gamma."""
        g = self.rows[0].gamma if gamma is None else gamma
        rows = [r for r in self.rows if r.gamma == g]
        Hs = sorted({r.H for r in rows})
        Rs = sorted({r.R for r in rows})
        out = np.full((len(Hs), len(Rs)), np.nan)
        for r in rows:
            out[Hs.index(r.H), Rs.index(r.R)] = r.s_k
        return np.array(Hs), np.array(Rs), out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LANDSCAPE_HEADER)
            for r in self.rows:
                w.writerow([repr(r.H), repr(r.R), repr(r.gamma), repr(r.H_over_R), repr(r.s_k), repr(r.ci95), r.failures])


def _evaluate_node(args) -> LandscapeRow:
    index, p, cfg = args
    base = dict(H=p.H, R=p.R, gamma=p.gamma, H_over_R=p.H / p.R)
    try:
        links = links_from_design(p)
        if not validate_links(links).valid:
            raise InvalidDesign("links fail validation")
    except (InvalidDesign, InvalidLinks):
        return LandscapeRow(**base, s_k=math.nan, ci95=math.nan, failures=cfg.n_instances, status="invalid")
    try:
        res = kinematic_sensitivity(links, cfg, key=(index,))
    except OutOfWorkspace:
        return LandscapeRow(**base, s_k=math.nan, ci95=math.nan, failures=cfg.n_instances, status="failed")
    return LandscapeRow(**base, s_k=res.s_k, ci95=res.ci95, failures=res.failures)


def default_workers() -> int:
    return int(os.environ.get("FPM_THREADS", "1"))


def sweep_landscape(grid: LandscapeGrid, cfg: SensitivityConfig, workers: int | None = None) -> LandscapeTable:
    """S_k on every grid node; node ``k`` draws from seed path ``(seed, k, i)``."""
    jobs = [(k, p, cfg) for k, p in enumerate(grid.nodes())]
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        rows = [_evaluate_node(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_node, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return LandscapeTable(rows)


def config_dict(cfg: SensitivityConfig) -> dict:
    return asdict(cfg)
