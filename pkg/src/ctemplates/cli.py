"""Command line entry point: ``ctemplates {simulate,certify,genpos,obsmatrix,example-config}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import genpos as gp
from .config import ScenarioConfig, example_config_text, parse_config
from .errors import CTemplatesError
from .hybridloop import simulate
from .sysmodel import find_full_rank_minor, kalman_matrix
from .templates import certify_template


def _load(path: str) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CTemplatesError(f"config: cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _run_simulation(cfg: ScenarioConfig, substeps: int | None = None):
    return simulate(cfg.system, cfg.family, cfg.feedback, cfg.theta, cfg.delta,
                    cfg.loop_state(), cfg.T_final, substeps or cfg.substeps)


def cmd_simulate(args) -> dict:
    cfg = _load(args.config)
    traj = _run_simulation(cfg, args.substeps)
    out = args.output or cfg.output
    traj.to_csv(out)
    summary = traj.summary()
    summary["csv"] = out
    _emit(summary, None)
    return summary


def lambda_bar_from_trajectory(cfg: ScenarioConfig) -> tuple[float, float]:
    """``sup |lambda|`` over the smallest origin-centred ball holding the simulated estimate."""
    traj = _run_simulation(cfg)
    radius = float(np.max(np.linalg.norm(traj.xhat, axis=1)))
    return cfg.feedback.sup_norm_on_ball(radius), radius


def cmd_certify(args) -> dict:
    cfg = _load(args.config)
    delta = args.delta if args.delta is not None else cfg.delta
    lam = args.lambda_bar if args.lambda_bar is not None else cfg.lambda_bar
    source = {"kind": "given"}
    if lam is None:
        lam, radius = lambda_bar_from_trajectory(cfg)
        source = {"kind": "trajectory_ball", "radius": radius}
    cert = certify_template(
        cfg.system, cfg.family, delta, lam,
        mu_grid=args.mu_grid or cfg.mu_grid,
        rot_grid=args.rot_grid or cfg.rot_grid,
        seed=cfg.seed if args.seed is None else args.seed,
        substeps=cfg.substeps,
    )
    doc = cert.to_dict()
    doc["template"] = {"kind": cfg.family.kind, "N": cfg.family.N}
    doc["lambda_bar_source"] = source
    _emit(doc, args.output)
    return doc


def cmd_genpos(args) -> dict:
    gps = gp.build_general_position(args.d, args.p, args.anchors)
    cert = gp.verify_general_position(gps)
    doc = {
        "d": gps.d,
        "p": gps.p,
        "anchors": list(gps.anchors),
        "subsets": [[i + 1 for i in s] for s in gps.subsets],
        "points": gps.points.tolist(),
        "normalized_points": gp.normalize_to_template_origin(gps).tolist(),
        "certificate": cert.to_dict(),
    }
    _emit(doc, args.output)
    return doc


def cmd_obsmatrix(args) -> dict:
    cfg = _load(args.config)
    O = kalman_matrix(cfg.system)
    minor = find_full_rank_minor(cfg.system)
    doc = {
        "shape": [O.rows, O.cols],
        "kalman_matrix": O.to_encoding(),
        "minor_rows": list(minor.row_indices),
        "determinant": minor.det.to_encoding(),
        "determinant_text": repr(minor.det),
        "degree": minor.degree,
        "degree_bound": minor.degree_bound,
    }
    _emit(doc, args.output)
    return doc


def cmd_example_config(args) -> None:
    text = example_config_text()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctemplates", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the hybrid closed loop and write a CSV trajectory")
    p.add_argument("config")
    p.add_argument("--output", help="CSV path (default: config 'output')")
    p.add_argument("--substeps", type=int)
    p.add_argument("--seed", type=int, help="accepted for uniformity; simulation is deterministic")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="sampled lower bound on the template Gramian")
    p.add_argument("config")
    p.add_argument("--delta", type=float)
    p.add_argument("--lambda-bar", type=float, dest="lambda_bar")
    p.add_argument("--mu-grid", type=int, dest="mu_grid")
    p.add_argument("--rot-grid", type=int, dest="rot_grid")
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("genpos", help="points in (d, p)-general position")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--anchors", type=float, nargs="+")
    p.add_argument("--output")
    p.set_defaults(func=cmd_genpos)

    p = sub.add_parser("obsmatrix", help="symbolic Kalman matrix and minor determinant")
    p.add_argument("config")
    p.add_argument("--output")
    p.set_defaults(func=cmd_obsmatrix)

    p = sub.add_parser("example-config", help="print the bundled example scenario")
    p.add_argument("--output")
    p.set_defaults(func=cmd_example_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CTemplatesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
