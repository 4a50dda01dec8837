"""Command-line front end.

Exit status: 0 pass, 1 falsified or failed certification, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .composer import AutomorphismSeq, StageError, cloud_rows, completeness_report, compose
from .config import ConfigError, RunConfig
from .fixtures import five_ball_forest, fixture_surface, outer_shell_ball
from .forest import (TidyForest, build_bound_forest, build_complete_forest, build_shell_forest, default_schedules,
                     verify_tidy)
from .geom import GeometryError, HullSpec, SolidBall
from .path_oracle import MODES, CrossingProblem, falsify_bound
from .runge import build_shear
from .sampling import ball_points, set_threads
from .serialize import polyline_csv, read_json, write_csv, write_json
from .sphere_net import SphericalNet, build_net, scale_net, verify_net

log = logging.getLogger("ballforest")

PASS, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(path, what: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    try:
        return read_json(p)
    except ValueError as err:
        raise UsageError(f"{what} file is not valid JSON: {err}") from err


def _load_forest(path) -> TidyForest:
    d = _load(path, "forest")
    try:
        return TidyForest.from_dict(d)
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"malformed forest {path}: {err}") from err


def _write(out: Path, name: str, obj) -> Path:
    p = write_json(out / name, obj)
    log.info("wrote %s", p)
    return p


def cmd_net_build(args) -> int:
    if args.n < 1 or not args.r > 0 or not args.t > 0:
        raise UsageError("need n >= 1, r > 0, t > 0")
    net = build_net(args.n, args.r / args.t)
    if args.t != 1.0:
        net = scale_net(net, args.t)
    rep = verify_net(net, samples=args.samples, seed=args.seed)
    _write(args.out, "net.json", net.to_dict())
    _write(args.out, "net_report.json", rep.to_dict())
    print(f"net n={args.n} r={args.r}: {len(net)} points, {'pass' if rep.passed else 'FAIL'}")
    return PASS if rep.passed else FAIL


def cmd_net_verify(args) -> int:
    d = _load(args.net, "net")
    try:
        net = SphericalNet.from_dict(d)
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"malformed net: {err}") from err
    rep = verify_net(net, samples=args.samples, seed=args.seed)
    _write(args.out, "net_report.json", rep.to_dict())
    print(f"net verify: {'pass' if rep.passed else 'FAIL'} (gap {rep.min_gap:.6g}, cover {rep.max_cover:.6g})")
    return PASS if rep.passed else FAIL


def cmd_forest_build(args) -> int:
    if args.kind == "shell":
        f = build_shell_forest(args.n, args.r1, args.r2)
        name = f"shell_{args.r1:g}_{args.r2:g}"
    elif args.kind == "bound":
        f = build_bound_forest(args.n, args.r1, args.r2, args.rho)
        name = f"bound_{args.r1:g}_{args.r2:g}_{args.rho:g}"
    elif args.kind == "fixture5":
        f = five_ball_forest()
        name = "fixture5_forest"
    else:
        s, rho = default_schedules(args.lambda0, args.J, args.rho_scale)
        f = build_complete_forest(args.n, s, rho, args.J)
        name = f"complete_{args.lambda0:g}_J{args.J}"
    rep = verify_tidy(f)
    _write(args.out, name + ".json", f.to_dict())
    (args.out / (name + ".csv")).write_text(f.to_csv())
    _write(args.out, name + "_tidy.json", rep.to_dict())
    print(f"forest {name}: {len(f)} balls, tidy {'pass' if rep.passed else 'FAIL'}")
    return PASS if rep.passed else FAIL


def cmd_forest_verify(args) -> int:
    f = _load_forest(args.forest)
    rep = verify_tidy(f)
    _write(args.out, "tidy_report.json", rep.to_dict())
    print(f"forest verify: {len(f)} balls, {'pass' if rep.passed else 'FAIL'}")
    return PASS if rep.passed else FAIL


def cmd_path_verify(args) -> int:
    f = _load_forest(args.forest)
    r1, r2 = args.r1, args.r2
    if r1 is None or r2 is None:
        if not f.shells:
            raise UsageError("forest records no shell; pass --r1 and --r2")
        r1 = f.shells[0].r1 if r1 is None else r1
        r2 = f.shells[0].r2 if r2 is None else r2
    try:
        prob = CrossingProblem(f, r1, r2, args.h, args.mode, seed=args.seed)
    except GeometryError as err:
        raise UsageError(str(err)) from err
    verdict, res = falsify_bound(prob, args.claimed)
    _write(args.out, "verdict.json", verdict.to_dict())
    if len(res.witness):
        (args.out / "witness.csv").write_text(polyline_csv(res.witness))
    print(f"path verify: measured {res.length:.6g} vs claimed {args.claimed:.6g}: {verdict.verdict}")
    return FAIL if verdict.falsified else PASS


def shear_fixture(eps: float = 0.01, threshold: str = "strict", seed: int = 0):
    """One shell ball in C^2 against E = 0.45 closed ball and Z = {w = 0.05}."""
    D = outer_shell_ball()
    E = HullSpec((SolidBall(np.zeros(4), 0.45),))
    return build_shear(D, E, fixture_surface(), eps, seed=seed, threshold=threshold)


def cmd_shear_demo(args) -> int:
    try:
        shear, rep, surface = shear_fixture(args.eps, args.threshold, args.seed)
    except GeometryError as err:
        print(f"shear demo: certification failed: {err}")
        return FAIL
    pts = ball_points(4, 1000, 0.45, seed=args.seed)
    back = shear.inverse_real(shear.forward_real(pts))
    d = shear.to_dict()
    d["margins"] = rep.to_dict()
    d["margins"]["roundtrip_error"] = float(np.max(np.abs(back - pts)))
    d["translation_applied"] = rep.translation
    _write(args.out, "shear.json", d)
    print(f"shear demo: degree {rep.degree}, avoidance {rep.avoidance_margin:.3g}, "
          f"displacement {rep.max_displacement:.3g}: {'pass' if rep.passed else 'FAIL'}")
    return PASS if rep.passed else FAIL


def _run_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    return RunConfig.load(p)


def cmd_compose_run(args) -> int:
    cfg = _run_config(args.config)
    forest = _load_forest(cfg.forest_file)
    tidy = verify_tidy(forest)
    if not tidy.passed:
        _write(args.out, "tidy_report.json", tidy.to_dict())
        print("compose run: forest failed verify_tidy")
        return FAIL
    ccfg = cfg.compose_config(args.seed)
    try:
        res = compose(cfg.Z, forest, ccfg)
    except StageError as err:
        _write(args.out, "report.json", {"passed": False, "stage": err.stage, "error": str(err),
                                         "margins": err.margins})
        print(f"compose run: {err}")
        return FAIL
    _write(args.out, "seq.json", res.seq.to_dict())
    write_csv(args.out / "clouds.csv", ["Re z", "Im z", "Re w", "Im w", "stage"] if forest.n == 3 else
              [f"x{i + 1}" for i in range(forest.n + 1)] + ["stage"], cloud_rows(res.clouds))
    _write(args.out, "report.json", res.report)
    print(f"compose run: J={ccfg.J}, |Psi-id| on K = {res.report['identity_displacement_on_K']:.3g}: "
          f"{'pass' if res.passed else 'FAIL'}")
    return PASS if res.passed else FAIL


def cmd_report(args) -> int:
    cfg = _run_config(args.config)
    forest = _load_forest(cfg.forest_file)
    seq = AutomorphismSeq.from_dict(_load(args.seq, "sequence"))
    rep = completeness_report(seq, cfg.Z, forest, path_count=args.paths, lambda0=cfg.lambda0)
    _write(args.out, "completeness.json", rep)
    print(f"report: {len(rep['paths'])} paths, consumed-ball crossings {rep['consumed_crossings']}")
    return PASS if rep["consumed_crossings"] == 0 else FAIL


def build_parser() -> argparse.ArgumentParser:
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--seed", type=int, default=0)
    glob.add_argument("--out", type=Path, default=Path("out"))
    glob.add_argument("--threads", type=int, default=None)
    glob.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="ballforest", description=__doc__)
    sub = ap.add_subparsers(dest="group", required=True)

    net = sub.add_parser("net").add_subparsers(dest="action", required=True)
    p = net.add_parser("build", parents=[glob])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_net_build)
    p = net.add_parser("verify", parents=[glob])
    p.add_argument("--net", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_net_verify)

    forest = sub.add_parser("forest").add_subparsers(dest="action", required=True)
    p = forest.add_parser("build", parents=[glob])
    p.add_argument("--kind", choices=["shell", "bound", "complete", "fixture5"], default="shell")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--r1", type=float, default=0.5)
    p.add_argument("--r2", type=float, default=0.8)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--lambda0", type=float, default=0.3)
    p.add_argument("--J", type=int, default=2)
    p.add_argument("--rho-scale", type=float, default=0.1)
    p.set_defaults(func=cmd_forest_build)
    p = forest.add_parser("verify", parents=[glob])
    p.add_argument("--forest", required=True)
    p.set_defaults(func=cmd_forest_verify)

    path = sub.add_parser("path").add_subparsers(dest="action", required=True)
    p = path.add_parser("verify", parents=[glob])
    p.add_argument("--forest", required=True)
    p.add_argument("--claimed", type=float, required=True)
    p.add_argument("--h", type=float, default=0.002)
    p.add_argument("--mode", choices=MODES, default="euclidean")
    p.add_argument("--r1", type=float, default=None)
    p.add_argument("--r2", type=float, default=None)
    p.set_defaults(func=cmd_path_verify)

    shear = sub.add_parser("shear").add_subparsers(dest="action", required=True)
    p = shear.add_parser("demo", parents=[glob])
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--threshold", choices=["strict", "needed"], default="strict")
    p.set_defaults(func=cmd_shear_demo)

    comp = sub.add_parser("compose").add_subparsers(dest="action", required=True)
    p = comp.add_parser("run", parents=[glob])
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_compose_run)

    p = sub.add_parser("report", parents=[glob])
    p.add_argument("--config", required=True)
    p.add_argument("--seq", required=True)
    p.add_argument("--paths", type=int, default=16)
    p.set_defaults(func=cmd_report)
    return ap


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("BALLFOREST_THREADS")
    if env is None or env == "":
        return 1
    try:
        return int(env)
    except ValueError as err:
        raise UsageError(f"BALLFOREST_THREADS must be an integer, got {env!r}") from err


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        n = resolve_threads(args.threads)
        if n < 1:
            raise UsageError("--threads must be >= 1")
        set_threads(n)
        args.out.mkdir(parents=True, exist_ok=True)
        with np.errstate(over="ignore", invalid="ignore"):
            return args.func(args)
    except (UsageError, ConfigError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
