"""Command-line interface.

``gcsim run <config>`` evaluates a TOML scenario file or a built-in scenario
name and writes one CSV per observable plus ``manifest.json`` into
``<out>/<scenario name>/``.  The output root defaults to ``$GCSIM_OUT`` and
then ``./gcsim-out``.

CSV conventions: a header row names the columns; complex columns are split
into ``<name>.re`` and ``<name>.im``; grids are in long format.  Floats are
written with ``repr`` so reruns are bit-identical.

Exit codes: 0 success, 1 other simulator error, 2 configuration error,
3 engine incompatibility, 4 regression failure, 5 numerical failure.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import click
import numpy as np
import scipy

from .config import load_config
from .errors import ConfigError, GCSError, NumericalFailure, RegressionFailure
from .regressions import REGISTRY, regression_eval
from .scenarios import BUILTINS, ENGINES, RunResult, ScenarioConfig, Table, builtin, run_scenario

OUT_ENV = "GCSIM_OUT"
DEFAULT_OUT = "gcsim-out"


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _parse_pairs(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v.strip())
    return out


def _cell(v) -> list[str]:
    if isinstance(v, (complex, np.complexfloating)):
        return [repr(float(v.real)), repr(float(v.imag))]
    if isinstance(v, (float, np.floating)):
        return [repr(float(v))]
    if isinstance(v, (int, np.integer)):
        return [str(int(v))]
    return [str(v)]


def _complex_columns(table: Table) -> list[bool]:
    flags = [False] * len(table.columns)
    for row in table.rows:
        for i, v in enumerate(row):
            if isinstance(v, (complex, np.complexfloating)):
                flags[i] = True
    return flags


def write_table(table: Table, path: Path) -> None:
    """Write ``table`` as CSV, splitting complex columns; atomic via rename."""
    flags = _complex_columns(table)
    header = []
    for name, cplx in zip(table.columns, flags):
        header.extend([f"{name}.re", f"{name}.im"] if cplx else [name])
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table.rows:
            cells = []
            for v, cplx in zip(row, flags):
                if cplx:
                    c = complex(v)
                    cells.extend([repr(c.real), repr(c.imag)])
                else:
                    cells.extend(_cell(v))
            w.writerow(cells)
    os.replace(tmp, path)


def _version(pkg: str) -> str:
    try:
        return metadata.version(pkg)
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_bundle(result: RunResult, out_root: Path, source: str) -> Path:
    cfg = result.config
    run_dir = out_root / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, table in sorted(result.tables.items()):
        path = run_dir / f"{name}.csv"
        write_table(table, path)
        files.append(path.name)
    digests = {f: hashlib.sha256((run_dir / f).read_bytes()).hexdigest() for f in files}
    manifest = {
        "scenario": cfg.name,
        "source": source,
        "builtin": cfg.builtin,
        "params": cfg.params,
        "engine": cfg.engine,
        "seed": cfg.seed,
        "integrator": asdict(cfg.integrator),
        "n_max": cfg.n_max if cfg.engine == "oracle" or result.oracle_max_diff is not None else None,
        "trajectory_info": result.trajectory.info,
        "times": {"first": cfg.times[0], "last": cfg.times[-1], "count": len(cfg.times)},
        "regressions": [{"name": r.name, "max_abs_diff": r.max_abs_diff, "tolerance": r.tolerance,
                         "passed": r.passed} for r in result.regressions],
        "oracle_max_abs_diff": result.oracle_max_diff,
        "wall_time_s": result.wall_time,
        "versions": {
            "gcsim": _version("artifact"),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "click": _version("click"),
        },
        "files": digests,
    }
    tmp = run_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True))
    os.replace(tmp, run_dir / "manifest.json")
    return run_dir


def _fail(exc: Exception) -> None:
    code = getattr(exc, "exit_code", 1)
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(_version("artifact"), prog_name="gcsim")
def main():
    """Phase-space simulator for Gaussian-branched cat states."""


@main.command()
@click.argument("config")
@click.option("--engine", type=click.Choice(ENGINES), default=None, help="Override the configured engine.")
@click.option("--oracle", "with_oracle", is_flag=True, help="Also run the Fock oracle and write a comparison.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Output root (default: ${OUT_ENV} or ./{DEFAULT_OUT}).")
@click.option("--seed", type=int, default=None, help="Seed for outcome sampling.")
@click.option("-p", "--param", "params", multiple=True, help="Built-in parameter override key=value.")
def run(config, engine, with_oracle, out_dir, seed, params):
    """Run CONFIG: a TOML scenario file or a built-in scenario name."""
    try:
        overrides = _parse_pairs(params)
        if config in BUILTINS and not Path(config).exists():
            if engine is not None:
                overrides["engine"] = engine
            cfg = builtin(config, **overrides)
        else:
            if overrides:
                raise ConfigError("--param overrides apply to built-in scenarios only")
            cfg = load_config(config)
            if engine is not None and engine != cfg.engine:
                cfg = ScenarioConfig(**{**cfg.__dict__, "engine": engine})
        if seed is not None:
            cfg.seed = seed
        out_root = Path(out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        try:
            result = run_scenario(cfg, with_oracle=with_oracle, strict=True)
        except RegressionFailure as exc:
            res = getattr(exc, "result", None)
            if res is not None:
                write_bundle(res, out_root, config)
            raise
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(str(exc)) from exc
        run_dir = write_bundle(result, out_root, config)
    except GCSError as exc:
        _fail(exc)
    click.echo(f"wrote {len(result.tables)} tables to {run_dir} ({result.wall_time:.2f} s)")
    for r in result.regressions:
        click.echo(f"  regression {r.name}: max |diff| {r.max_abs_diff:.2e} (tol {r.tolerance:.0e}) ok")
    if result.oracle_max_diff is not None:
        click.echo(f"  oracle comparison: max |diff| {result.oracle_max_diff:.2e}")


@main.command("list-scenarios")
def list_scenarios():
    """List built-in scenarios and their default parameters."""
    import inspect

    for name, factory in sorted(BUILTINS.items()):
        sig = inspect.signature(factory)
        defaults = ", ".join(f"{k}={v.default!r}" for k, v in sig.parameters.items())
        click.echo(f"{name}: {defaults}")


@main.command("eval")
@click.argument("regression", required=False)
@click.argument("params", nargs=-1)
@click.option("--list", "list_all", is_flag=True, help="List the registered formulas.")
def eval_cmd(regression, params, list_all):
    """Evaluate a closed-form REGRESSION with key=value PARAMS."""
    if list_all or regression is None:
        for name in sorted(REGISTRY):
            reg = REGISTRY[name]
            click.echo(f"{name}({', '.join(reg.params)}) [{reg.status}] {reg.origin}")
        return
    try:
        kv = _parse_pairs(params)
        value = regression_eval(regression, **kv)
    except GCSError as exc:
        _fail(exc)
    except (TypeError, ValueError) as exc:
        _fail(ConfigError(str(exc)))
    click.echo(repr(float(value)))


if __name__ == "__main__":  # pragma: no cover
    main()
