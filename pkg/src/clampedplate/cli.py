"""
Command-line entry point.

    clampedplate constants --dim 2 --omega0 3.141592653589793 [--eps E]
    clampedplate solve --config run.json [--shape ball|full|rectangle|annulus]
    clampedplate optimize --config run.json [--out DIR]
    clampedplate diagnose --input out/run_result.json

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
non-convergence, 3 certificate FAIL.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import shapes
from .diagnostics import _jsonable, assemble_report
from .grid import GridError, Support, build_grid, make_shape
from .io import config_from_dict, grid_from_record, load_result, load_support, read_config, write_outputs
from .optimizer import (
    ConfigError,
    EmptySupportCollapse,
    OptimizeResult,
    certify_result,
    dichotomy_clipping,
    minimize_penalized,
)
from .spectral import NonConvergence, min_eigenpair
from .theory import ball_buckling_load, penalty, thresholds, unit_ball_volume

EXIT_OK, EXIT_USAGE, EXIT_NONCONV, EXIT_CERT = 0, 1, 2, 3

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clampedplate", description="Penalized buckling-load optimization on grids.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    c = sub.add_parser("constants", help="print omega_n, Lambda(B1), c_n, eps1, eps0, alpha0")
    c.add_argument("--dim", type=int, required=True)
    c.add_argument("--omega0", type=float, required=True)
    c.add_argument("--eps", type=float, default=None, help="default 0.9 * eps1")
    c.add_argument("--c-n", type=float, default=None, help="override the comparison constant")

    s = sub.add_parser("solve", help="smallest eigenpair on a generated shape of volume omega0")
    s.add_argument("--config", required=True)
    s.add_argument("--shape", choices=["ball", "full", "rectangle", "annulus"], default="ball")
    s.add_argument("--aspect", type=float, default=4.0, help="rectangle side ratio")
    s.add_argument("--hole", type=float, default=0.3, help="annulus inner/outer radius ratio")

    o = sub.add_parser("optimize", help="minimize the penalized functional and certify the result")
    o.add_argument("--config", required=True)
    o.add_argument("--out", default=None, help="override the output directory")

    d = sub.add_parser("diagnose", help="re-run diagnostics on a stored result")
    d.add_argument("--input", required=True)
    d.add_argument("--out", default=None, help="write the report JSON here")
    return p


def _print(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=1, sort_keys=True))


def _constants(args) -> int:
    if args.dim < 2 or args.omega0 <= 0:
        raise ConfigError("need --dim >= 2 and --omega0 > 0")
    eps = args.eps
    if eps is None:
        eps = 0.9 * thresholds(args.dim, args.omega0, 1.0, args.c_n).eps1
    thr = thresholds(args.dim, args.omega0, eps, args.c_n)
    _print(dict(thr.as_dict(), dim=args.dim, omega0=args.omega0, eps=eps))
    return EXIT_OK


def _shape_support(grid, kind: str, omega0: float, aspect: float, hole: float) -> Support:
    c = [float(x) for x in grid.center]
    n = grid.dim
    if kind == "full":
        return Support(grid, grid.mask)
    if kind == "ball":
        return make_shape(grid, shapes.ball_of_volume(c, omega0))
    if kind == "rectangle":
        # sides a*aspect x a x ... x a with the prescribed volume
        a = (omega0 / aspect) ** (1.0 / n)
        half = [0.5 * a * aspect] + [0.5 * a] * (n - 1)
        return make_shape(grid, shapes.Rectangle([x - h for x, h in zip(c, half)], [x + h for x, h in zip(c, half)]))
    r_out = (omega0 / (unit_ball_volume(n) * (1 - hole**n))) ** (1.0 / n)
    return make_shape(grid, shapes.Annulus(c, hole * r_out, r_out))


def _solve(args) -> int:
    run = read_config(args.config)
    cfg = run.optimize
    grid = build_grid(cfg.dim, cfg.cells_per_side, cfg.container)
    support = _shape_support(grid, args.shape, cfg.penalty.omega0, args.aspect, args.hole)
    eig = min_eigenpair(support, cfg.objective, tol=cfg.eig_tol)
    _print(dict(
        shape=args.shape, objective=cfg.objective.value, volume=support.volume, cells=support.count,
        lam=eig.lam, residual=eig.residual, iterations=eig.iterations,
        lam_ball_same_volume=ball_buckling_load(cfg.dim, support.volume),
    ))
    return EXIT_OK


def _optimize(args) -> int:
    run = read_config(args.config)
    if args.out is not None:
        run = replace(run, output_dir=Path(args.out))
    t0 = time.time()
    result = minimize_penalized(run.optimize)
    thr = thresholds(run.optimize.dim, result.params.omega0, result.params.eps, run.c_n)
    cert = certify_result(result, thr, result.params, run.tol_vol)
    report = assemble_report(result.support, result.eig, certificate=cert, c_n=run.c_n) if run.diagnostics else None
    meta = dict(elapsed_seconds=time.time() - t0, started=time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)))
    paths = write_outputs(result, report, run, cert, metadata=meta)
    _print(dict(lam=result.eig.lam, i_eps=result.i_eps, volume=result.volume, converged=result.converged,
                certificate=cert.label, statement=cert.statement, outputs=paths))
    if not result.converged:
        return EXIT_NONCONV
    return EXIT_CERT if cert.passed is False else EXIT_OK


def _diagnose(args) -> int:
    rec = load_result(args.input)
    run = config_from_dict(rec["config"], base_dir=Path(args.input).parent)
    grid = grid_from_record(rec["grid"])
    support = load_support(Path(args.input), grid)
    cfg = run.optimize
    eig = min_eigenpair(support, cfg.objective, tol=cfg.eig_tol)
    stored = rec["result"]
    result = OptimizeResult(
        support=support, eig=eig, i_eps=eig.lam + penalty(cfg.penalty, support.volume), volume=support.volume,
        history=[], converged=bool(stored["converged"]),
        clipping_flag=dichotomy_clipping(support, cfg.penalty.omega0), params=cfg.penalty,
    )
    thr = thresholds(cfg.dim, cfg.penalty.omega0, cfg.penalty.eps, run.c_n)
    cert = certify_result(result, thr, cfg.penalty, run.tol_vol)
    report = assemble_report(support, eig, certificate=cert, c_n=run.c_n)
    payload = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    _print(payload)
    return EXIT_CERT if cert.passed is False else EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = dict(constants=_constants, solve=_solve, optimize=_optimize, diagnose=_diagnose)
    try:
        return handlers[args.cmd](args)
    except (ConfigError, GridError, FileNotFoundError) as exc:
        sys.stderr.write(f"clampedplate {args.cmd}: {exc}\n")
        return EXIT_USAGE
    except (NonConvergence, EmptySupportCollapse) as exc:
        sys.stderr.write(f"clampedplate {args.cmd}: {exc}\n")
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
