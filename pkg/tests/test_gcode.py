import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpm.design import LinkSet
from fpm.errors import OutOfWorkspace, ParseError, UnsupportedCommand
from fpm.gcode import (
    GCommand,
    Kind,
    parse_gcode,
    plan_trajectory,
    serialize_gcode,
    write_samples_csv,
    write_samples_json,
)
from fpm.kinematics import JointAngles, joint_forward
from fpm.metrology import ErrorField

ROBOT = LinkSet(125, 224.06, 414.82, 329.10)


def test_parse_examples():
    (c,) = parse_gcode("G1 X10 Y5 F1200")
    assert c == GCommand(Kind.LINEAR, x=10, y=5, f=1200, line=1)
    (h,) = parse_gcode("G28 ; home all")
    assert h.kind is Kind.HOME
    with pytest.raises(ParseError) as err:
        parse_gcode("G1 Q7")
    assert err.value.line == 1 and err.value.token == "Q7"


def test_parse_comments_case_and_numbers():
    text = "(header)\ng90\n\ng0 x-1.5 (inline) y.25 ; tail\nG01 Z+3.\nG91\nG00 X2"
    cmds = parse_gcode(text)
    assert [c.kind for c in cmds] == [Kind.ABSOLUTE, Kind.RAPID, Kind.LINEAR, Kind.RELATIVE, Kind.RAPID]
    assert (cmds[1].x, cmds[1].y, cmds[1].line) == (-1.5, 0.25, 4)
    assert cmds[2].z == 3.0


def test_parse_errors_carry_line_numbers():
    for text, exc, line in [
        ("G1 X1\nM104 S200", UnsupportedCommand, 2),
        ("G2 X1 Y1 I1", UnsupportedCommand, 1),
        ("G1 X1\n\nT0", UnsupportedCommand, 3),
        ("G1 X1 X2", ParseError, 1),
        ("G1 F100", ParseError, 1),
        ("G1 Xabc", ParseError, 1),
        ("hello", ParseError, 1),
        ("G90 X1", ParseError, 1),
    ]:
        with pytest.raises(exc) as err:
            parse_gcode(text)
        assert err.value.line == line


coords = st.one_of(st.none(), st.floats(-1e4, 1e4, allow_nan=False))


@st.composite
def commands(draw):
    kind = draw(st.sampled_from(list(Kind)))
    if kind in (Kind.RAPID, Kind.LINEAR):
        x, y, z = draw(coords), draw(coords), draw(st.floats(-1e3, 1e3))
        return GCommand(kind, x, y, z, draw(st.one_of(st.none(), st.floats(1, 1e4))))
    return GCommand(kind)


@settings(max_examples=200)
@given(st.lists(commands(), max_size=8))
def test_parse_serialize_fixed_point(cmds):
    text = serialize_gcode(cmds)
    once = parse_gcode(text)
    assert serialize_gcode(once) == text
    assert [(c.kind, c.x, c.y, c.z, c.f) for c in once] == [(c.kind, c.x, c.y, c.z, c.f) for c in cmds]


def test_single_move_to_origin():
    (s,) = plan_trajectory(parse_gcode("G1 X0 Y0"), ROBOT)
    assert (s.alpha, s.beta, s.z) == (0.0, 0.0, 0.0)


def test_straight_line_on_segment():
    samples = plan_trajectory(parse_gcode("G1 X80 Y0 F600"), ROBOT, max_segment=1.0)
    assert len(samples) == 80
    for k, s in enumerate(samples, start=1):
        p = joint_forward(ROBOT, JointAngles(s.alpha, s.beta))
        assert abs(p[0] - k) < 1e-9 * ROBOT.L_c and abs(p[1]) < 1e-9 * ROBOT.L_c
        assert s.f == 600 and s.line == 1


def test_workspace_enforced():
    with pytest.raises(OutOfWorkspace):
        plan_trajectory(parse_gcode("G1 X120 Y0"), ROBOT, workspace_diameter=200)
    with pytest.raises(OutOfWorkspace) as err:
        plan_trajectory(parse_gcode("G1 X50\nG91\nG1 X40\nG1 X40"), ROBOT, workspace_diameter=200)
    assert "line 4" in str(err.value)
    with pytest.raises(ValueError):
        plan_trajectory([], ROBOT, max_segment=0)


def test_relative_mode_and_home():
    a = plan_trajectory(parse_gcode("G91\nG1 X10\nG1 Y10\nG28"), ROBOT, max_segment=100)
    b = plan_trajectory(parse_gcode("G1 X10\nG1 X10 Y10\nG1 X0 Y0"), ROBOT, max_segment=100)
    assert [(s.alpha, s.beta) for s in a] == [(s.alpha, s.beta) for s in b]
    assert (a[-1].alpha, a[-1].beta) == (0.0, 0.0)


def test_z_only_move_single_sample():
    s = plan_trajectory(parse_gcode("G1 X10\nG1 Z5"), ROBOT, max_segment=1)
    assert len(s) == 11 and s[-1].z == 5 and (s[-1].alpha, s[-1].beta) == (s[-2].alpha, s[-2].beta)


@settings(max_examples=30, deadline=None)
@given(st.floats(-60, 60), st.floats(-60, 60), st.floats(0.5, 8))
def test_halving_segments_keeps_endpoints(x, y, seg):
    cmds = [GCommand(Kind.LINEAR, x, y), GCommand(Kind.LINEAR, -y, x)]
    coarse = plan_trajectory(cmds, ROBOT, max_segment=seg)
    fine = plan_trajectory(cmds, ROBOT, max_segment=seg / 2)
    fine_set = [(s.alpha, s.beta) for s in fine]
    for s in coarse:
        assert any(math.isclose(s.alpha, a, abs_tol=1e-12) and math.isclose(s.beta, b, abs_tol=1e-12)
                   for a, b in fine_set)


def test_zero_field_changes_nothing():
    cmds = parse_gcode("G1 X10 Y-20 Z3\nG1 X-30 Z1")
    field = ErrorField.zeros([-100, 0, 100], [-100, 100])
    assert plan_trajectory(cmds, ROBOT, field) == plan_trajectory(cmds, ROBOT)


def test_compensation_sign_worked_example():
    field = ErrorField(0, 0, 0, np.array([0.0, 20.0]), np.array([-10.0, 10.0]), np.full((2, 2), -0.020))
    (s,) = plan_trajectory(parse_gcode("G1 X10 Y0 Z5"), ROBOT, field, max_segment=100)
    assert s.z == pytest.approx(4.980, abs=1e-12)


def test_outputs(tmp_path):
    samples = plan_trajectory(parse_gcode("G1 X2 F100"), ROBOT)
    write_samples_csv(samples, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "index,alpha_rad,beta_rad,z_mm" and len(lines) == 3
    write_samples_json(samples, tmp_path / "s.json")
    data = json.loads((tmp_path / "s.json").read_text())
    assert data[1]["line"] == 1 and data[1]["alpha_rad"] == samples[1].alpha
