"""Simulation of measurement-free fabrication: integer-multiple link scaling
and feedback-polygon refinement of the B, C, K and D links.

Lengths are normalised so that the seed link A = 1. The targets follow from
right-triangle loops built out of integer multiples of A:

* B closes legs A and 2A (sqrt 5),
* C closes legs 2A and 3A (sqrt 13),
* K closes legs 2A and 2A (2 sqrt 2),
* D closes two 2A sides whose apex angle is set by the K triangle
  (90 degrees plus the K triangle's apex half-angle, 135 degrees when exact).

Each loop is modelled by pinning the link at the far end of one leg and
swinging it onto the line of the other leg; the closure gap is the distance
along that leg, which changes with the link length at a fixed gain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .design import LinkSet, validate_links
from .errors import FPMError
from .sensitivity import SensitivityConfig, kinematic_sensitivity

TYPES = ("A", "B", "C", "K", "D")
TARGETS = {
    "A": 1.0,
    "B": math.sqrt(5.0),
    "C": math.sqrt(13.0),
    "K": 2.0 * math.sqrt(2.0),
    "D": 2.0 * math.sqrt(2.0 + math.sqrt(2.0)),
}
INITIAL = {"A": 1.0, "B": 2.0, "C": 3.0, "K": 2.0, "D": 3.0}


@dataclass(frozen=True)
class NoiseModel:
    copy_sigma_rel: float = 0.01
    closure_sigma_rel: float = 0.005
    cut_sigma_rel: float = 0.005
    # fraction of the measured correction applied per iteration
    relaxation: float = 1.0

    def __post_init__(self):
        if min(self.copy_sigma_rel, self.closure_sigma_rel, self.cut_sigma_rel) < 0:
            raise ValueError("noise levels must be non-negative")
        if not self.relaxation > 0:
            raise ValueError("relaxation must be positive")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)


def _draw(rng: np.random.Generator, sigma: float) -> float:
    # no draw when noise is off, so noiseless runs consume no randomness
    return float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0


# -- integer-multiple scaling ------------------------------------------------------


@dataclass(frozen=True)
class ScalingTrace:
    target: float
    estimates: tuple  # candidate length after each iteration
    rel_errors: tuple  # signed (candidate - target) / target

    @property
    def final(self) -> float:
        return self.estimates[-1]

    @property
    def final_error(self) -> float:
        return self.rel_errors[-1]


def scale_link_integer(
    seed_length: float, n: int, noise: NoiseModel, rng: np.random.Generator, max_iters: int = 5
) -> ScalingTrace:
    """Make a link ``n`` times the seed from a chain of ``n`` copied seeds.

    Every iteration compares the candidate against the chain (closure noise)
    and recuts it by the observed gap (cut noise). Iteration stops once the
    observed gap is within the closure noise level.
    """
    if n < 1 or max_iters < 1:
        raise ValueError("need n >= 1 and max_iters >= 1")
    target = n * seed_length
    if n == 1:
        copy = seed_length * (1 + _draw(rng, noise.copy_sigma_rel))
        return ScalingTrace(target, (copy,), ((copy - target) / target,))

    chain = sum(seed_length * (1 + _draw(rng, noise.copy_sigma_rel)) for _ in range(n))
    candidate = seed_length  # rough stock to be cut to length
    estimates = []
    threshold = noise.closure_sigma_rel * target
    for _ in range(max_iters):
        gap = chain - candidate + _draw(rng, noise.closure_sigma_rel) * target
        done = abs(gap) <= threshold
        candidate = (candidate + gap) * (1 + _draw(rng, noise.cut_sigma_rel))
        estimates.append(candidate)
        if done:
            break
    return ScalingTrace(target, tuple(estimates), tuple((e - target) / target for e in estimates))


# -- feedback polygons -------------------------------------------------------------


def _swing_gap(length: float, pinned_leg: float, free_leg: float, cos_apex: float = 0.0) -> float:
    """Closure gap when a link pinned at the end of ``pinned_leg`` is swung
    onto the line of ``free_leg``; both legs meet at an apex with the given
    cosine. Returns the signed distance along the free leg."""
    # |pinned_leg * u1 - x * u2| = length, u1 . u2 = cos_apex
    b = pinned_leg * cos_apex
    disc = length * length - pinned_leg * pinned_leg * (1 - cos_apex * cos_apex)
    if disc < 0:
        return math.nan
    return b + math.sqrt(disc) - free_leg


def _d_apex_cos(K: float, leg: float) -> float:
    """Cosine of the D polygon apex: 90 degrees plus half the K triangle's apex."""
    half = math.asin(min(1.0, K / (2 * leg)))
    return math.cos(math.pi / 2 + half)


def polygon_gap(link: str, length: float, legs: dict | None = None, K: float | None = None) -> float:
    """Exact geometric closure gap of ``link``'s feedback polygon.

    ``legs`` maps 1, 2, 3 to the physical A multiples (defaults exact).
    """
    L = {1: 1.0, 2: 2.0, 3: 3.0} if legs is None else legs
    if link == "B":
        return _swing_gap(length, L[2], L[1])
    if link == "C":
        return _swing_gap(length, L[3], L[2])
    if link == "K":
        return _swing_gap(length, L[2], L[2])
    if link == "D":
        k = TARGETS["K"] if K is None else K
        return _swing_gap(length, L[2], L[2], _d_apex_cos(k, L[2]))
    raise ValueError(f"no feedback polygon for link {link!r}")


def polygon_target(link: str, legs: dict | None = None, K: float | None = None) -> float:
    """Length that closes ``link``'s polygon exactly."""
    L = {1: 1.0, 2: 2.0, 3: 3.0} if legs is None else legs
    if link == "B":
        return math.hypot(L[1], L[2])
    if link == "C":
        return math.hypot(L[2], L[3])
    if link == "K":
        return math.sqrt(2.0) * L[2]
    if link == "D":
        k = TARGETS["K"] if K is None else K
        c = _d_apex_cos(k, L[2])
        return L[2] * math.sqrt(2.0 - 2.0 * c)
    raise ValueError(f"no feedback polygon for link {link!r}")


def polygon_gain(link: str) -> float:
    """d(gap)/d(length) at the exact target, in closed form."""
    t = TARGETS[link]
    if link == "B":
        return t / 1.0  # sqrt(5) / short leg A
    if link == "C":
        return t / 2.0
    if link == "K":
        return t / 2.0
    if link == "D":
        # d/dD of sqrt(D^2 - 2) at D^2 = 8 + 4 sqrt 2
        return t / (2.0 + math.sqrt(2.0))
    raise ValueError(f"no feedback polygon for link {link!r}")


def closure_gap(
    current: float, target: float, polygon_gain: float, noise: NoiseModel, rng: np.random.Generator
) -> float:
    """First-order closure gap plus comparison noise."""
    if not target > 0 or not polygon_gain > 0:
        raise ValueError("target and gain must be positive")
    return polygon_gain * (current - target) + _draw(rng, noise.closure_sigma_rel) * target


# -- bootstrap ---------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapState:
    iteration: int
    lengths: dict  # type -> length
    s_k: float = math.nan
    valid: bool = True

    @property
    def delta(self) -> dict:
        """Relative design error per link type."""
        return {t: abs(self.lengths[t] - TARGETS[t]) / TARGETS[t] for t in TYPES}

    @property
    def delta_mean(self) -> float:
        """Mean relative error over all five types, A included."""
        return float(np.mean([self.delta[t] for t in TYPES]))

    @property
    def delta_mean_refined(self) -> float:
        """Mean relative error over the refined types B, C, K, D."""
        return float(np.mean([self.delta[t] for t in TYPES[1:]]))

    def link_set(self) -> LinkSet:
        g = self.lengths
        return LinkSet(g["A"], g["B"], g["C"], g["D"])


@dataclass(frozen=True)
class BootstrapConfig:
    iters: int = 3
    # None skips the S_k prediction
    sensitivity: SensitivityConfig | None = field(default_factory=SensitivityConfig)


def predict_sk(state: BootstrapState, cfg: SensitivityConfig | None) -> BootstrapState:
    if cfg is None:
        return state
    links = state.link_set()
    if not validate_links(links).valid:
        return replace(state, s_k=math.nan, valid=False)
    try:
        s_k = kinematic_sensitivity(links, cfg).s_k
    except FPMError:
        s_k = math.nan
    return replace(state, s_k=s_k, valid=True)


def initial_state(noise: NoiseModel, rng: np.random.Generator) -> tuple[BootstrapState, dict]:
    """Integer initialisation built from scaled copies of the seed.

    Returns the state and the physical A multiples (1, 2, 3) used as
    polygon legs.
    """
    legs = {1: 1.0}
    for n in (2, 3):
        legs[n] = scale_link_integer(1.0, n, noise, rng, max_iters=2).final
    lengths = {"A": 1.0, "B": legs[2], "C": legs[3], "K": legs[2], "D": legs[3]}
    return BootstrapState(0, lengths), legs


def bootstrap_refine(
    init: BootstrapState,
    noise: NoiseModel,
    rng: np.random.Generator,
    iters: int = 3,
    legs: dict | None = None,
    sensitivity: SensitivityConfig | None = None,
) -> list[BootstrapState]:
    """Refine B, C, K, D by polygon closure; returns states 0..iters.

    The measured gap is converted back to a length correction through the
    polygon gain, scaled by ``noise.relaxation``, and the link is re-cut
    with cut noise. D is refined last against the freshly cut K.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if min(init.lengths.values()) <= 0:
        raise ValueError("initial lengths must be positive")
    legs = {1: 1.0, 2: 2.0, 3: 3.0} if legs is None else legs
    states = [predict_sk(init, sensitivity)]
    cur = dict(init.lengths)
    for i in range(1, iters + 1):
        for t in ("B", "C", "K", "D"):
            target = polygon_target(t, legs, K=cur["K"])
            gain = polygon_gain(t)
            gap = closure_gap(cur[t], target, gain, noise, rng)
            cur[t] = (cur[t] - noise.relaxation * gap / gain) * (1 + _draw(rng, noise.cut_sigma_rel))
        states.append(predict_sk(BootstrapState(i, dict(cur)), sensitivity))
    return states


TRAJECTORY_HEADER = ["iter", "len_A", "len_B", "len_C", "len_K", "len_D", "delta_mean", "delta_mean_refined", "s_k"]


def write_trajectory(states, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for s in states:
            g = s.lengths
            w.writerow([s.iteration] + [repr(g[t]) for t in TYPES] + [repr(s.delta_mean), repr(s.delta_mean_refined), repr(s.s_k)])
