"""``fpm`` command-line entry point.

Angles on the command line are in degrees and lengths in the design file's
unit. Every run writes a JSON manifest next to its output (or
``fpm-<command>.manifest.json`` in the working directory when the data goes
to stdout); existing files are only replaced with ``--force``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import design as dsg
from . import fabrication as fab
from . import gcode
from . import kinematics as kin
from . import metrology as met
from . import sensitivity as sens
from .errors import FPMError
from .geometry import fit_plane


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0.0.0"


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return vals


def _vec3(text: str):
    return _floats(text, 3)


def _grid(text: str) -> tuple[int, int]:
    try:
        h, r = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 20x20, got {text!r}") from None
    if h < 1 or r < 1:
        raise argparse.ArgumentTypeError("grid sizes must be positive")
    return h, r


def _load_design(path):
    data = json.loads(Path(path).read_text())
    links, params, unit = dsg.design_from_dict(data)
    return links, params, unit, data


def _sens_config(args) -> sens.SensitivityConfig:
    return sens.SensitivityConfig(
        sigma_rel=args.sigma,
        n_points=args.points,
        n_instances=args.instances,
        workspace_rel=args.workspace,
        seed=args.seed,
        aggregate=args.aggregate,
        twist_free=not args.azimuth_locked,
    )


class Outputs:
    """Tracks declared output paths and refuses to clobber without --force."""

    def __init__(self, args):
        self.force = args.force
        self.paths: list[str] = []

    def claim(self, path) -> Path:
        p = Path(path)
        if p.exists() and not self.force:
            raise UsageError(f"{p} exists; pass --force to overwrite")
        self.paths.append(str(p))
        return p


def _manifest_path(args) -> Path:
    if args.manifest:
        return Path(args.manifest)
    out = getattr(args, "out", None)
    if out:
        return Path(str(out) + ".manifest.json")
    return Path(f"fpm-{args.command}.manifest.json")


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# -- subcommands -----------------------------------------------------------------


def cmd_fk(args, outs, info):
    links, _, unit, _ = _load_design(args.design)
    inp = kin.ControlInput(math.radians(args.theta), math.radians(args.phi) % (2 * math.pi))
    p, _ = kin.forward(links, inp, twist_free=not args.azimuth_locked)
    # round-off far below the solver tolerance prints as zero
    p = np.where(np.abs(p) < 1e-12 * links.L_c, 0.0, p)
    print(f"{p[0]:.12g} {p[1]:.12g} {p[2]:.12g}")
    info["result"] = {"endpoint": p.tolist(), "unit": unit}


def cmd_ik(args, outs, info):
    links, _, unit, _ = _load_design(args.design)
    ja = kin.inverse(links, args.x, args.y)
    a, b = math.degrees(ja.alpha), math.degrees(ja.beta)
    print(f"{a:.12g} {b:.12g}")
    info["result"] = {"alpha_deg": a, "beta_deg": b}


def cmd_validate(args, outs, info):
    links, _, _, _ = _load_design(args.design)
    rep = dsg.validate_links(links)
    print(json.dumps({**asdict(rep), "margins": list(rep.margins)}, indent=2))
    info["result"] = {"valid": rep.valid}
    if not rep.valid:
        raise dsg.InvalidLinks("design is not valid")


def cmd_links(args, outs, info):
    if args.links is not None:
        A, B, C, D = args.links
        p = dsg.design_from_links(dsg.LinkSet(A, B, C, D))
        out = dsg.design_to_dict(p, args.unit)
    else:
        links, _, unit, _ = _load_design(args.design)
        out = dsg.links_to_dict(links, unit)
        out["L_c"] = links.L_c
    print(json.dumps(out, indent=2))
    info["result"] = out


def cmd_sensitivity(args, outs, info):
    links, _, _, _ = _load_design(args.design)
    cfg = _sens_config(args)
    info["config"] = asdict(cfg)
    res = sens.kinematic_sensitivity(links, cfg)
    print(f"S_k {res.s_k:.6g} ci95 {res.ci95:.3g} failures {res.failures}")
    info["result"] = {"s_k": res.s_k, "ci95": res.ci95, "failures": res.failures,
                      "flatness_rmse_mean": res.flatness_rmse_mean, "link_rmse_mean": res.link_rmse_mean}


def cmd_sweep(args, outs, info):
    n_h, n_r = args.grid
    gammas = tuple(math.radians(g) for g in args.gamma)
    grid = sens.LandscapeGrid.regular(n_h, n_r, args.h_max, args.r_max, gammas)
    cfg = _sens_config(args)
    info["config"] = {**asdict(cfg), "grid": [n_h, n_r], "h_max": args.h_max, "r_max": args.r_max,
                      "gamma_deg": list(args.gamma)}
    out = outs.claim(args.out)
    table = sens.sweep_landscape(grid, cfg, workers=args.threads)
    table.write_csv(out)
    best = table.minimum()
    print(f"minimum S_k {best.s_k:.6g} at H={best.H:g} R={best.R:g} gamma={math.degrees(best.gamma):g}", file=sys.stderr)


def cmd_tradeoff(args, outs, info):
    links, _, _, _ = _load_design(args.design)
    cfg = _sens_config(args)
    info["config"] = {**asdict(cfg), "levels": args.levels}
    curve = sens.workspace_flatness_curve(links, cfg, args.levels)
    out = outs.claim(args.out)
    with open(out, "w") as fh:
        fh.write("W_rel,flatness_rmse\n")
        for w, f in curve:
            fh.write(f"{w!r},{f!r}\n")


def cmd_flatness(args, outs, info):
    scan = met.read_scan(args.scan)
    r = met.flatness_rmse(scan)
    print(f"{r:.9g} {scan.unit}")
    info["result"] = {"flatness_rmse": r, "unit": scan.unit}


def cmd_calibrate(args, outs, info):
    scan = met.read_scan(args.scan)
    field = met.build_error_field(scan, tuple(args.grid) if args.grid else None)
    met.save_field(field, outs.claim(args.out))
    info["result"] = {"plane": {"a": field.a, "b": field.b, "c": field.c}}


def cmd_compensate(args, outs, info):
    scan = met.read_scan(args.scan)
    field = met.load_field(args.field)
    out = met.compensate(scan, field, clip=not args.no_clip)
    met.write_scan(out, outs.claim(args.out))
    info["result"] = {"flatness_before": met.flatness_rmse(scan), "flatness_after": met.flatness_rmse(out)}


def cmd_tilt(args, outs, info):
    if args.scans:
        normals = [fit_plane(met.read_scan(p).points, "orthogonal").normal for p in args.scans]
    elif args.normals:
        normals = args.normals
    else:
        raise UsageError("give --normals or --scans")
    t = met.tilt_between_planes(*normals)
    runout = met.lateral_runout(t, args.travel)
    print(f"tilt_deg {t:.6g} runout {runout:.6g}")
    info["result"] = {"tilt_deg": t, "runout": runout, "travel": args.travel}


def cmd_bootstrap(args, outs, info):
    noise = fab.NoiseModel.noiseless() if args.noiseless else fab.NoiseModel(
        args.copy_sigma, args.closure_sigma, args.cut_sigma, args.relaxation
    )
    cfg = None if args.no_sk else _sens_config(args)
    info["config"] = {"noise": asdict(noise), "iters": args.iters, "runs": args.runs,
                      "sensitivity": asdict(cfg) if cfg else None}
    out = outs.claim(args.out)
    rows = []
    for run in range(args.runs):
        rng = sens.instance_rng(args.seed, (run,))
        if args.integer_init:
            init, legs = fab.BootstrapState(0, dict(fab.INITIAL)), None
        else:
            init, legs = fab.initial_state(noise, rng)
        rows.append(fab.bootstrap_refine(init, noise, rng, args.iters, legs, cfg))
    with open(out, "w") as fh:
        fh.write("run," + ",".join(fab.TRAJECTORY_HEADER) + "\n")
        for run, states in enumerate(rows):
            for s in states:
                g = s.lengths
                vals = [s.iteration] + [g[t] for t in fab.TYPES] + [s.delta_mean, s.delta_mean_refined, s.s_k]
                fh.write(f"{run}," + ",".join(repr(v) for v in vals) + "\n")
    last = [r[-1] for r in rows]
    msg = f"final delta_mean {np.mean([s.delta_mean for s in last]):.4g}"
    if cfg is not None:
        msg += f" s_k {np.nanmean([s.s_k for s in last]):.4g}"
    print(msg, file=sys.stderr)


def cmd_scale_link(args, outs, info):
    noise = fab.NoiseModel(args.copy_sigma, args.closure_sigma, args.cut_sigma)
    info["config"] = {"noise": asdict(noise), "n": args.n, "iters": args.iters, "runs": args.runs}
    out = outs.claim(args.out)
    with open(out, "w") as fh:
        fh.write("run,iter,estimate,rel_error\n")
        for run in range(args.runs):
            tr = fab.scale_link_integer(args.seed_length, args.n, noise, sens.instance_rng(args.seed, (run,)), args.iters)
            for i, (e, r) in enumerate(zip(tr.estimates, tr.rel_errors), start=1):
                fh.write(f"{run},{i},{e!r},{r!r}\n")


def cmd_plan(args, outs, info):
    links, _, unit, data = _load_design(args.design)
    cmds = gcode.parse_gcode(Path(args.gcode).read_text(encoding="utf-8"))
    field = met.load_field(args.field) if args.field else None
    wd = args.workspace_diameter if args.workspace_diameter is not None else data.get("W_d")
    samples = gcode.plan_trajectory(cmds, links, field, args.max_segment, wd)
    gcode.write_samples_csv(samples, outs.claim(args.out))
    if args.json:
        gcode.write_samples_json(samples, outs.claim(args.json))
    info["result"] = {"samples": len(samples), "unit": unit}


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpm", description="Flat-plane mechanism toolkit")
    ap.add_argument("--version", action="version", version=f"fpm {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func, parser=p)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--manifest", help="manifest path")
        return p

    def mc(p, seed=True):
        p.add_argument("--sigma", type=float, default=0.0005, help="link noise as a fraction of L_c")
        p.add_argument("--points", type=int, default=50)
        p.add_argument("--instances", type=int, default=50)
        p.add_argument("--workspace", type=float, default=0.4, help="W_d / L_c")
        p.add_argument("--aggregate", choices=["mean_of_ratios", "ratio_of_means"], default="mean_of_ratios")
        p.add_argument("--azimuth-locked", action="store_true", help="let the equatorial triangle turn with phi")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=sens.default_workers())

    p = add("fk", cmd_fk, "forward kinematics")
    p.add_argument("--design", required=True)
    p.add_argument("--theta", type=float, required=True, help="degrees")
    p.add_argument("--phi", type=float, required=True, help="degrees")
    p.add_argument("--azimuth-locked", action="store_true")

    p = add("ik", cmd_ik, "inverse kinematics")
    p.add_argument("--design", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)

    p = add("validate", cmd_validate, "check a design")
    p.add_argument("--design", required=True)

    p = add("links", cmd_links, "convert between design parameters and links")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--design")
    g.add_argument("--links", type=lambda s: _floats(s, 4), help="A,B,C,D")
    p.add_argument("--unit", default="mm")

    p = add("sensitivity", cmd_sensitivity, "S_k of one design")
    p.add_argument("--design", required=True)
    mc(p)

    p = add("sweep", cmd_sweep, "S_k landscape over (H, R)")
    p.add_argument("--grid", type=_grid, default=(100, 100))
    p.add_argument("--gamma", type=float, nargs="+", default=[90.0], help="degrees")
    p.add_argument("--h-max", type=float, default=0.5)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--out", default="landscape.csv")
    mc(p)
    p.set_defaults(instances=20)

    p = add("tradeoff", cmd_tradeoff, "flatness against workspace size")
    p.add_argument("--design", required=True)
    p.add_argument("--levels", type=_floats, default=[0.1, 0.2, 0.3, 0.4])
    p.add_argument("--out", default="tradeoff.csv")
    mc(p)

    p = add("flatness", cmd_flatness, "rms flatness of a scan")
    p.add_argument("--scan", required=True)

    p = add("calibrate", cmd_calibrate, "build a Z-error field from a scan")
    p.add_argument("--scan", required=True)
    p.add_argument("--grid", type=lambda s: _grid(s), help="resample irregular scans to NYxNX")
    p.add_argument("--out", required=True)

    p = add("compensate", cmd_compensate, "subtract a Z-error field from a scan")
    p.add_argument("--scan", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--no-clip", action="store_true", help="fail on queries outside the field")
    p.add_argument("--out", required=True)

    p = add("tilt", cmd_tilt, "angle between two planes")
    p.add_argument("--normals", type=_vec3, nargs=2, metavar="NX,NY,NZ")
    p.add_argument("--scans", nargs=2, metavar="CSV")
    p.add_argument("--travel", type=float, default=50.0, help="travel for the runout estimate")

    p = add("bootstrap", cmd_bootstrap, "simulate feedback-polygon refinement")
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--copy-sigma", type=float, default=0.01)
    p.add_argument("--closure-sigma", type=float, default=0.005)
    p.add_argument("--cut-sigma", type=float, default=0.005)
    p.add_argument("--relaxation", type=float, default=1.0)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--integer-init", action="store_true", help="start from exact integers (1,2,3,2,3)")
    p.add_argument("--no-sk", action="store_true", help="skip S_k prediction")
    p.add_argument("--out", default="bootstrap.csv")
    mc(p)

    p = add("scale-link", cmd_scale_link, "simulate integer-multiple link scaling")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed-length", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--copy-sigma", type=float, default=0.01)
    p.add_argument("--closure-sigma", type=float, default=0.005)
    p.add_argument("--cut-sigma", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="scaling.csv")

    p = add("plan", cmd_plan, "convert G-code into motor angles")
    p.add_argument("--gcode", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--field")
    p.add_argument("--max-segment", type=float, default=1.0)
    p.add_argument("--workspace-diameter", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--json")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    outs = Outputs(args)
    info: dict = {}
    code = 0
    try:
        manifest = outs.claim(_manifest_path(args))
        args.func(args, outs, info)
    except UsageError as exc:
        args.parser.print_usage(sys.stderr)
        print(f"fpm {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"fpm {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except (FPMError, OSError) as exc:
        print(f"fpm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        info["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    record = {
        "subcommand": args.command,
        "config": {k: _jsonable(v) for k, v in vars(args).items() if k not in ("func", "parser")},
        "seed": getattr(args, "seed", None),
        "inputs": [str(getattr(args, k)) for k in ("design", "scan", "field", "gcode") if getattr(args, k, None)],
        "outputs": [p for p in outs.paths if Path(p) != manifest],
        "version": _version(),
        "exit_code": code,
        **info,
    }
    manifest.write_text(json.dumps(record, indent=2, default=_jsonable) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
