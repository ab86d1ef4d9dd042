"""``tiltx`` command-line entry point.

Angles are degrees on the command line. Exit codes: 0 success, 1 input
error, 2 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import math
import sys

from . import analysis, chain, workspace
from .arckin import ArcParams
from .errors import UnreachableTargetError
from .geometry import load_geometry

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _json(obj, indent: int = 0) -> str:
    """JSON with every float printed at six decimals (stable across runs)."""
    pad = "  " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  "{k}": {_json(v, indent + 1).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        return pad + "[" + ", ".join(_json(v).strip() for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return pad + {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, int):
        return pad + str(obj)
    if isinstance(obj, float):
        s = f"{obj:.6f}"
        return pad + ("0.000000" if s == "-0.000000" else s)
    return pad + '"' + str(obj).replace('"', '\\"') + '"'


def _parse_cfg(text: str, g) -> chain.TiltXConfig:
    try:
        kappa, phi_deg, alpha_deg, beta = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"config {text!r} must be 'kappa,phi_deg,alpha_deg,beta_mm'") from None
    return chain.TiltXConfig(ArcParams(kappa, math.radians(phi_deg), g.L), math.radians(alpha_deg), beta)


def _parse_grid(text: str) -> tuple[int, int, int, int]:
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        dims = ()
    if len(dims) != 4 or min(dims) < 1:
        raise InputError(f"--grid {text!r} must look like KxPxAxB with positive counts")
    return dims


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tiltx", description="Tilt-X kinematics and actuation planning")
    p.add_argument("--geometry", help="geometry JSON (default: $TILTX_GEOMETRY, then built-in)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    geo = sub.add_parser("geometry", help="print the active geometry")
    geo.add_argument("--dump", action="store_true", help="print the geometry JSON")

    fk = sub.add_parser("fk", help="hinge-to-tip pose for one configuration")
    fk.add_argument("--kappa", type=float, default=0.0, help="curvature, 1/mm")
    fk.add_argument("--phi-deg", type=float, default=0.0)
    fk.add_argument("--alpha-deg", type=float, default=0.0)
    fk.add_argument("--beta", type=float, default=0.0, help="extension, mm")

    ik = sub.add_parser("ik", help="configuration reaching a tip position (hinge frame, mm)")
    ik.add_argument("--x", type=float, required=True)
    ik.add_argument("--y", type=float, required=True)
    ik.add_argument("--z", type=float, required=True)
    ik.add_argument("--tol", type=float, default=chain.TOL_IK)

    plan = sub.add_parser("plan", help="motor increments between two configurations")
    plan.add_argument("--from", dest="frm", required=True, help="kappa,phi_deg,alpha_deg,beta_mm")
    plan.add_argument("--to", required=True, help="kappa,phi_deg,alpha_deg,beta_mm")

    ws = sub.add_parser("workspace", help="sample the workspace and report reach")
    ws.add_argument("--grid", default="10x12x10x4", help="KxPxAxB sample counts")
    ws.add_argument("--out", help="cloud file (.csv or .ply)")
    ws.add_argument("--workers", type=int, default=1)

    sl = sub.add_parser("slices", help="experiment slice targets")
    sl.add_argument("--offsets", type=float, nargs="+", help="tip depths below the section base, mm")
    sl.add_argument("--phi-step", type=float, default=30.0, help="bend-plane step, deg")
    sl.add_argument("--alpha-deg", type=float, default=0.0)
    sl.add_argument("--beta", type=float, default=0.0)
    sl.add_argument("--id-offset", type=int, default=0)
    sl.add_argument("--out", required=True)

    an = sub.add_parser("analyze", help="per-target pose error statistics")
    an.add_argument("--mode", choices=["model", "baseline"], required=True)
    an.add_argument("--targets", required=True)
    an.add_argument("--log", required=True)
    an.add_argument("--baseline")
    an.add_argument("--out", required=True)
    an.add_argument("--frame", default="E", choices=list(analysis.FRAME_IDS))
    an.add_argument("--window", type=float, default=analysis.REST_WINDOW_S, help="rest window, s")
    an.add_argument("--sample-std", action="store_true", help="use N-1 in the standard deviation")
    return p


def _pose_dict(tf) -> dict:
    return {
        "rotation": [list(map(float, row)) for row in tf.rotation],
        "translation": list(map(float, tf.translation)),
        "norm_mm": float(math.sqrt(float(tf.translation @ tf.translation))),
    }


def _cmd_geometry(args, g, out):
    out.write(g.dumps() + "\n")


def _cmd_fk(args, g, out):
    cfg = chain.TiltXConfig(ArcParams(args.kappa, math.radians(args.phi_deg), g.L), math.radians(args.alpha_deg), args.beta)
    chain.check_config(cfg, g)
    out.write(_json(_pose_dict(chain.tiltx_fk(cfg, g))) + "\n")


def _cmd_ik(args, g, out):
    cfg = chain.ik_position([args.x, args.y, args.z], g, tol=args.tol)
    tf = chain.tiltx_fk(cfg, g)
    res = math.dist(tf.translation, (args.x, args.y, args.z))
    doc = {
        "kappa": cfg.kappa,
        "phi_deg": math.degrees(cfg.phi),
        "alpha_deg": math.degrees(cfg.alpha),
        "beta_mm": cfg.beta,
        "residual_mm": res,
    }
    out.write(_json(doc) + "\n")


def _cmd_plan(args, g, out):
    plan = chain.actuation_plan(_parse_cfg(args.frm, g), _parse_cfg(args.to, g), g)
    out.write(_json(plan.to_dict()) + "\n")


def _cmd_workspace(args, g, out):
    dims = _parse_grid(args.grid)
    cloud = workspace.sample_workspace(g, *dims, workers=args.workers)
    stats = workspace.reach_stats(cloud)
    if args.out:
        workspace.export_cloud(cloud, args.out)
    doc = {"points": len(cloud), **stats.to_dict()}
    out.write(_json(doc) + "\n")


def _cmd_slices(args, g, out):
    targets = workspace.slice_targets(g, args.offsets, args.phi_step, math.radians(args.alpha_deg), args.beta, args.id_offset)
    workspace.export_targets(targets, args.out)
    out.write(f"{len(targets)} targets written to {args.out}\n")


def _cmd_analyze(args, g, out):
    targets = analysis.read_targets_csv(args.targets, g)
    test = analysis.load_pose_log(args.log)
    ddof = 1 if args.sample_std else 0
    if args.mode == "baseline":
        if not args.baseline:
            raise InputError("--mode baseline needs --baseline")
        base = analysis.load_pose_log(args.baseline)
        table = analysis.compare_runs(base, test, targets, args.frame, args.window, ddof)
    else:
        table = analysis.compare_to_model(test, targets, args.frame, args.window, ddof)
    table.write_csv(args.out)
    out.write(f"{len(table.rows)} targets analysed, written to {args.out}\n")
    if table.gaps:
        sys.stderr.write(f"gap report: no data in both sources for {', '.join(table.gaps)}\n")
    if table.short_windows:
        sys.stderr.write(f"warning: rest window shorter than {args.window:g} s for {', '.join(table.short_windows)}\n")


_COMMANDS = {
    "geometry": _cmd_geometry,
    "fk": _cmd_fk,
    "ik": _cmd_ik,
    "plan": _cmd_plan,
    "workspace": _cmd_workspace,
    "slices": _cmd_slices,
    "analyze": _cmd_analyze,
}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        g = load_geometry(args.geometry)
        _COMMANDS[args.command](args, g, out)
    except UnreachableTargetError as exc:
        sys.stderr.write(f"tiltx: {exc}\n")
        return EXIT_NUMERIC
    except (InputError, ValueError, OSError) as exc:
        sys.stderr.write(f"tiltx: {exc}\n")
        return EXIT_INPUT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
