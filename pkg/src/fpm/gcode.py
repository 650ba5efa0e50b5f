"""A small G-code front end: parse G0/G1/G28/G90/G91 programs and turn them
into motor-angle trajectories through the inverse kinematics.

The planar axes go through the linkage; Z is an independent linear axis.
With an error field the commanded z becomes ``z + e(x, y)``. The field holds
what the probe read minus the best plane, so ``e = -0.020`` at (10, 0) means
the tool touched the reference 20 um below its reported height there, i.e.
it physically sits 20 um higher than commanded. A move to z = 5 is
therefore sent as z = 4.980 and the tool lands on z = 5.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .design import LinkSet
from .errors import FPMError, OutOfWorkspace, ParseError, UnsupportedCommand
from .kinematics import inverse
from .metrology import ErrorField, interpolate_error


class Kind(Enum):
    RAPID = "G0"
    LINEAR = "G1"
    HOME = "G28"
    ABSOLUTE = "G90"
    RELATIVE = "G91"


_CODES = {"0": Kind.RAPID, "00": Kind.RAPID, "1": Kind.LINEAR, "01": Kind.LINEAR,
          "28": Kind.HOME, "90": Kind.ABSOLUTE, "91": Kind.RELATIVE}
_WORD = re.compile(r"([A-Za-z])([-+]?(?:\d+\.?\d*|\.\d+))$")


@dataclass(frozen=True)
class GCommand:
    kind: Kind
    x: float | None = None
    y: float | None = None
    z: float | None = None
    f: float | None = None
    line: int = 0

    def to_gcode(self) -> str:
        words = [self.kind.value]
        for name in ("x", "y", "z", "f"):
            v = getattr(self, name)
            if v is not None:
                # shortest round-tripping digits, never in exponent form
                words.append(name.upper() + np.format_float_positional(v, unique=True, trim="-"))
        return " ".join(words)


@dataclass(frozen=True)
class JointSample:
    index: int
    alpha: float
    beta: float
    z: float
    line: int = 0
    f: float | None = None


def _strip_comments(text: str) -> str:
    text = text.split(";", 1)[0]
    return re.sub(r"\([^)]*\)", " ", text)


def parse_gcode(text: str) -> list[GCommand]:
    cmds = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comments(raw).strip()
        if not body:
            continue
        tokens = body.split()
        head = tokens[0].upper()
        if not head.startswith("G") or not head[1:].isdigit():
            if head[:1] in ("M", "T", "G", "S"):
                raise UnsupportedCommand(lineno, head)
            raise ParseError(lineno, tokens[0], "expected a G command")
        kind = _CODES.get(head[1:])
        if kind is None:
            raise UnsupportedCommand(lineno, head)
        vals = {}
        for tok in tokens[1:]:
            m = _WORD.match(tok)
            if m is None:
                raise ParseError(lineno, tok)
            letter = m.group(1).lower()
            if letter not in "xyzf" or letter in vals:
                raise ParseError(lineno, tok, "unexpected word")
            v = float(m.group(2))
            if not math.isfinite(v):
                raise ParseError(lineno, tok, "non-finite value")
            vals[letter] = v
        if kind in (Kind.RAPID, Kind.LINEAR) and not {"x", "y", "z"} & vals.keys():
            raise ParseError(lineno, tokens[0], "move without an axis word")
        if kind in (Kind.ABSOLUTE, Kind.RELATIVE) and vals:
            raise ParseError(lineno, tokens[1], "mode command takes no words")
        cmds.append(GCommand(kind, line=lineno, **vals))
    return cmds


def serialize_gcode(cmds) -> str:
    return "".join(c.to_gcode() + "\n" for c in cmds)


def plan_trajectory(
    cmds,
    links: LinkSet,
    field: ErrorField | None = None,
    max_segment: float = 1.0,
    workspace_diameter: float | None = None,
) -> list[JointSample]:
    """Fold the program into joint samples, one per segment endpoint.

    Moves are sampled every ``max_segment`` along the path plus at their
    end point; a move that does not change xy yields a single sample. Targets outside the
    workspace disc (default diameter ``0.4 * L_c``) raise OutOfWorkspace.
    """
    if not max_segment > 0:
        raise ValueError("max_segment must be positive")
    radius = 0.5 * (0.4 * links.L_c if workspace_diameter is None else workspace_diameter)
    pos = np.zeros(3)
    relative = False
    samples: list[JointSample] = []

    def emit(p, cmd):
        try:
            ja = inverse(links, float(p[0]), float(p[1]))
        except FPMError as exc:
            raise type(exc)(f"line {cmd.line}: {exc}") from None
        z = float(p[2])
        if field is not None:
            z += interpolate_error(field, p[0], p[1])
        samples.append(JointSample(len(samples), ja.alpha, ja.beta, z, cmd.line, cmd.f))

    for cmd in cmds:
        if cmd.kind is Kind.ABSOLUTE:
            relative = False
            continue
        if cmd.kind is Kind.RELATIVE:
            relative = True
            continue
        if cmd.kind is Kind.HOME:
            target = np.zeros(3)
        else:
            target = pos.copy()
            for i, v in enumerate((cmd.x, cmd.y, cmd.z)):
                if v is not None:
                    target[i] = pos[i] + v if relative else v
        # the disc is convex, so checking the move's end covers every segment
        if math.hypot(target[0], target[1]) > radius * (1 + 1e-12):
            raise OutOfWorkspace(
                f"line {cmd.line}: target ({target[0]:g}, {target[1]:g}) outside workspace radius {radius:g}"
            )
        # stations every max_segment from the move start, then the end point;
        # halving max_segment therefore keeps every earlier station
        dist = math.hypot(*(target[:2] - pos[:2]))
        k = 1
        while k * max_segment < dist * (1 - 1e-12):
            emit(pos + (target - pos) * (k * max_segment / dist), cmd)
            k += 1
        emit(target, cmd)
        pos = target
    return samples


def write_samples_csv(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "alpha_rad", "beta_rad", "z_mm"])
        for s in samples:
            w.writerow([s.index, repr(s.alpha), repr(s.beta), repr(s.z)])


def write_samples_json(samples, path) -> None:
    data = [
        {"index": s.index, "alpha_rad": s.alpha, "beta_rad": s.beta, "z_mm": s.z, "line": s.line, "f": s.f}
        for s in samples
    ]
    Path(path).write_text(json.dumps(data, indent=1))
