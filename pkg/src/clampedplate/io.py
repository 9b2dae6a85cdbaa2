"""
Run configuration, result serialization and field images.

Output files for a run with prefix ``run``::

    run_history.csv   iter,I,lambda,volume,moved_cells
    run_result.json   config echo, thresholds, certificate, diagnostics, support
    run_support.pgm   active cells (P5)
    run_field.pgm     |u|, min-max scaled (P5)
    run_field.csv     i,j[,k],x,y[,z],u for every node
"""

from __future__ import annotations

import copy
import csv
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .grid import Ball, Box, Grid, Support, build_grid
from .optimizer import ConfigError, OptimizeConfig, OptimizeResult
from .theory import PenaltyParams, thresholds

__all__ = [
    "RunConfig",
    "read_config",
    "config_from_dict",
    "load_schema",
    "write_outputs",
    "write_history_csv",
    "write_pgm",
    "read_pgm",
    "write_field_csv",
    "result_payload",
    "load_result",
    "load_support",
]

SIG = 12


def load_schema() -> dict:
    return json.loads(resources.files("clampedplate").joinpath("config.schema.json").read_text())


def _fill_defaults(instance: dict, schema: dict) -> dict:
    out = copy.deepcopy(instance)
    for key, sub in schema.get("properties", {}).items():
        if key not in out and "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        if isinstance(out.get(key), dict) and sub.get("type") == "object":
            out[key] = _fill_defaults(out[key], sub)
    return out


@dataclass(frozen=True)
class RunConfig:
    optimize: OptimizeConfig
    output_dir: Path
    prefix: str
    diagnostics: bool
    c_n: Optional[float]
    tol_vol: Optional[float]
    echo: dict


def _container(spec: dict):
    if "box" in spec:
        return Box(float(spec["box"]))
    return Ball(float(spec["ball"]))


def config_from_dict(raw: dict, *, base_dir: Path | None = None) -> RunConfig:
    """
    Validate a decoded configuration and fill in defaults.

    Raises
    ------
    ConfigError
        With the offending field path for schema violations, or naming both
        values when ``omega0`` does not fit the container.
    """
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {e.message}")
    cfg = _fill_defaults(raw, schema)

    dim = cfg["dim"]
    container = _container(cfg["container"])
    measure = container.measure(dim)
    w0 = float(cfg["omega0"])
    if not w0 < 0.9 * measure:
        raise ConfigError(f"omega0 = {w0} must be below 0.9 * container measure = {0.9 * measure:.12g} (measure {measure:.12g})")
    thr = thresholds(dim, w0, 1.0, cfg["c_n"])
    if cfg["eps"] is None:
        cfg["eps"] = cfg["eps_factor"] * thr.eps1
    params = PenaltyParams(cfg["penalty"], float(cfg["eps"]), w0)

    init = cfg["init"]
    if init not in ("ball", "full_container") and base_dir is not None and not Path(init).is_absolute():
        init = str(base_dir / init)
    out_dir = Path(cfg["output"]["dir"])
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    probe = out_dir
    while not probe.exists():
        probe = probe.parent
    if not os.access(probe, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")

    opt = OptimizeConfig(
        dim=dim,
        cells_per_side=cfg["cells_per_side"],
        container=container,
        penalty=params,
        objective=cfg["objective"],
        strategy=cfg["strategy"],
        init=init,
        init_volume_factor=cfg["init_volume_factor"],
        sweep_size=cfg["sweep_size"],
        eig_tol=cfg["tol"],
        max_outer=cfg["max_outer"],
        stall_limit=cfg["stall_limit"],
        seed=cfg["seed"],
        move_fraction=cfg["move_fraction"],
        relaxed_iters=cfg["relaxed_iters"],
    )
    return RunConfig(opt, out_dir, cfg["output"]["prefix"], cfg["diagnostics"], cfg["c_n"], cfg["tol_vol"], cfg)


def read_config(path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, base_dir=path.parent)


# -- writers ------------------------------------------------------------------


def _g(x: float) -> str:
    return format(float(x), f".{SIG}g")


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "I", "lambda", "volume", "moved_cells"])
        for row in history:
            w.writerow([row.iteration, _g(row.I), _g(row.lam), _g(row.volume), row.moved_cells])


def _image(values: np.ndarray) -> np.ndarray:
    """
    N x N view with x across and max y on top; 3-D fields use the middle z slice.

    Nodes ``0..N-1`` are kept along each axis. Node ``N`` lies outside both
    container masks, so dropping it loses nothing.
    """
    if values.ndim == 3:
        values = values[:, :, values.shape[2] // 2]
    if values.ndim != 2:
        raise ValueError(f"cannot image a {values.ndim}-D field")
    return values[:-1, :-1].T[::-1]


def write_pgm(values: np.ndarray, path) -> dict:
    """
    Write a binary P5 image, min-max scaled to 0..255.

    Returns the scale ``{"min": ..., "max": ...}`` for the record.
    """
    img = _image(np.asarray(values, dtype=float))
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        data = np.rint((img - lo) / (hi - lo) * 255.0)
    else:
        data = np.zeros_like(img)
    data = data.astype(np.uint8)
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
    return {"min": lo, "max": hi}


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a P5 file")
    cols, rows = (int(x) for x in parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError(f"{path}: maxval must be 255")
    data = np.frombuffer(parts[3], dtype=np.uint8)
    if data.size != rows * cols:
        raise ValueError(f"{path}: payload has {data.size} bytes, expected {rows * cols}")
    return data.reshape(rows, cols)


def write_field_csv(grid: Grid, values: np.ndarray, path) -> None:
    names = "ijk"[: grid.dim]
    coords = "xyz"[: grid.dim]
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    vals = np.asarray(values).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, *coords, "u"])
        for row, u in zip(idx, vals):
            w.writerow([*row.tolist(), *(_g(c * grid.spacing) for c in row), repr(float(u))])


def _grid_record(grid: Grid) -> dict:
    c = grid.container
    cont = {"box": c.side} if isinstance(c, Box) else {"ball": c.radius}
    return dict(dim=grid.dim, cells_per_side=grid.cells_per_side, spacing=grid.spacing, container=cont)


def result_payload(result: OptimizeResult, run: RunConfig, certificate=None, report=None) -> dict:
    """The deterministic part of the result JSON (no timestamps)."""
    from dataclasses import asdict

    from .diagnostics import _jsonable

    thr = thresholds(run.optimize.dim, result.params.omega0, result.params.eps, run.c_n)
    cert = None
    if certificate is not None:
        cert = _jsonable(dict(asdict(certificate), label=certificate.label))
    return _jsonable(
        dict(
            config=run.echo,
            grid=_grid_record(result.grid),
            thresholds=thr.as_dict(),
            result={
                "lambda": result.eig.lam,
                "i_eps": result.i_eps,
                "volume": result.volume,
                "converged": result.converged,
                "stop_reason": result.stop_reason,
                "clipping_flag": result.clipping_flag,
                "eig_residual": result.eig.residual,
                "accepted_steps": len(result.history) - 1,
                "support_indices": np.flatnonzero(result.support.active.ravel()).tolist(),
            },
            certificate=cert,
            diagnostics=None if report is None else report.to_dict(),
        )
    )


def write_outputs(result: OptimizeResult, report, run: RunConfig, certificate=None, metadata: Optional[dict] = None) -> dict:
    """
    Write the history CSV, result JSON, the two PGM images and the field CSV.

    Returns the mapping of output kind to path.

    Raises
    ------
    OSError
        With the offending path in the message.
    """
    out = Path(run.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    p = run.prefix
    paths = dict(
        history=out / f"{p}_history.csv",
        result=out / f"{p}_result.json",
        support_pgm=out / f"{p}_support.pgm",
        field_pgm=out / f"{p}_field.pgm",
        field_csv=out / f"{p}_field.csv",
    )
    try:
        write_history_csv(result.history, paths["history"])
        images = {}
        if result.grid.dim in (2, 3):
            images["support"] = write_pgm(result.support.active.astype(float), paths["support_pgm"])
            images["field"] = write_pgm(np.abs(result.eig.field.values), paths["field_pgm"])
        write_field_csv(result.grid, result.eig.field.values, paths["field_csv"])
        payload = result_payload(result, run, certificate, report)
        payload["images"] = images
        payload["metadata"] = metadata or {}
        paths["result"].write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing outputs under {out}: {exc}") from exc
    return {k: str(v) for k, v in paths.items()}


# -- readers ------------------------------------------------------------------


def load_result(path) -> dict:
    return json.loads(Path(path).read_text())


def load_support(path, grid: Grid) -> Support:
    """Support stored in a result JSON or a field CSV (nonzero nodes)."""
    path = Path(path)
    if path.suffix == ".json":
        rec = load_result(path)
        active = np.zeros(grid.shape, dtype=bool)
        active.ravel()[rec["result"]["support_indices"]] = True
        return Support(grid, active)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    active = np.zeros(grid.shape, dtype=bool)
    names = "ijk"[: grid.dim]
    for r in rows:
        if float(r["u"]) != 0.0:
            active[tuple(int(r[n]) for n in names)] = True
    return Support(grid, active)


def grid_from_record(rec: dict) -> Grid:
    return build_grid(rec["dim"], rec["cells_per_side"], _container(rec["container"]))
