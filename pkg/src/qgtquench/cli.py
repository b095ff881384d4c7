"""Command-line entry point: ``qgtquench {metric,chern,sweep,validate}``.

Every invocation writes into ``<out>/<run id>/``: the result files and a
``manifest.json`` that echoes the resolved configuration, lists the outputs
with their SHA-256 and records the headline numbers. Nothing is written
until the computation has finished.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__, chern, geometry, quench, validate
from .chern import IntegrationQualityError, QuenchSettings
from .config import ConfigError, RunConfig, load_file, merge
from .models import ChartError, ContractError
from .numlin import ConvergenceError, GaugeSingularityError
from .presets import PRESETS, sweep_points

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".17g")


def _csv_text(header: Sequence[str], rows: list[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands; each returns (files, headline, exit code)


def cmd_metric(cfg: RunConfig):
    preset = PRESETS.get(cfg.preset) if cfg.preset else None
    if preset is not None:
        cfg.family = preset.family
    spec = cfg.model_spec()
    fixed = cfg.fixed if cfg.fixed is not None else (preset.fixed if preset else None)
    if fixed is None:
        raise ConfigError("metric needs a preset or a 'fixed' coordinate list")
    if len(fixed) != spec.dim:
        raise ConfigError(f"'fixed' needs {spec.dim} coordinates for {spec.family}")
    axis = preset.sweep_axis if preset and cfg.fixed is None else cfg.sweep_axis
    if not 0 <= axis < spec.dim:
        raise ConfigError(f"sweep_axis must lie in [0, {spec.dim})")
    values = cfg.sweep_values or (preset.sweep_values() if preset else [fixed[axis]])
    comps = [tuple(c) for c in cfg.components] if cfg.components else (
        list(preset.components) if preset else quench.full_selection(spec.dim, spec.degeneracy)
    )
    for mu, nu, j, jp in comps:
        if max(mu, nu) >= spec.dim or max(j, jp) >= spec.degeneracy:
            raise ConfigError(f"component {(mu, nu, j, jp)} out of range for {spec.family}")

    pts = sweep_points(fixed, axis, values)
    dlam = cfg.delta_lambda or quench.default_delta_lambda(spec)
    est, gam = quench.measure_metric_batch(
        spec, pts, comps, delta_lambda=dlam, schedule=cfg.schedule_obj(), gauge=cfg.gauge,
        threads=cfg.threads,
    )
    oracle = geometry.metric_from_qgt(geometry.qgt_fd_batch(spec, pts, cfg.gauge)).blocks
    analytic = _analytic_metric(spec, pts, cfg.gauge)

    names = spec.coord_names
    rows, worst = [], 0.0
    for i, v in enumerate(values):
        for mu, nu, j, jp in comps:
            for part, take in (("re", np.real), ("im", np.imag)):
                qv = float(take(est[i, mu, nu, j, jp]))
                ov = float(take(oracle[i, mu, nu, j, jp]))
                av = None if analytic is None else float(take(analytic[i, mu, nu, j, jp]))
                err = abs(qv - ov)
                worst = max(worst, err)
                rows.append([fmt(v), names[mu], names[nu], j + 1, jp + 1, part,
                             fmt(qv), fmt(ov), fmt(av), fmt(err)])
    header = ["sweep_value", "mu", "nu", "j", "jprime", "part", "quench", "oracle", "analytic", "abs_error"]
    run_rows = []
    for r, (state, dirs) in enumerate(gam):
        for i in range(len(values)):
            run_rows.append(
                quench.RunRecord(
                    r * len(values) + i, spec.family, tuple(pts[i]), state.label, dirs, dlam,
                    cfg.schedule, cfg.T if cfg.schedule == "linear" else 0.0,
                    cfg.substeps if cfg.schedule == "linear" else 0, float(gam[(state, dirs)][i]),
                ).csv_row()
            )
    files = {
        "metric.csv": _csv_text(header, rows),
        "runs.csv": _csv_text(quench.RunRecord.CSV_HEADER, run_rows),
    }
    print(f"{len(values)} sweep points, {len(gam)} runs per point; max |quench - oracle| = {worst:.3e}")
    return files, {"max_abs_error_vs_oracle": worst, "points": len(values)}, EXIT_OK


def _analytic_metric(spec, pts, gauge):
    if spec.family == "yang-eff":
        return chern.yang_analytic_metric(pts)
    if spec.family == "dirac3d-eff" and (gauge or geometry.default_gauge(spec)) == "analytic":
        return chern.dirac_analytic_blocks(pts, spec.sign)[0]
    return None


def _settings(cfg: RunConfig, **override) -> QuenchSettings:
    c = RunConfig(**{**cfg.to_dict(), **override})
    return QuenchSettings(c.delta_lambda, c.schedule_obj())


def _chern(cfg: RunConfig, **override) -> chern.ChernResult:
    spec = cfg.model_spec()
    mode = "quench" if cfg.source == "quench" else "oracle"
    kw = dict(gauge=cfg.gauge, threads=cfg.threads)
    if cfg.invariant == "real":
        grid = cfg.grid_obj("S2", mode)
        if cfg.pipeline == "curvature":
            return chern.real_chern_from_curvature(spec, grid, cfg.source, **kw)
        return chern.real_chern_from_metric(spec, grid, cfg.source, settings=_settings(cfg, **override), **kw)
    grid = cfg.grid_obj("S4", mode)
    if cfg.pipeline == "curvature":
        return chern.second_chern_from_curvature(spec, grid, cfg.source, **kw)
    return chern.second_chern_from_metric(
        spec, grid, cfg.source, cfg.normalization, settings=_settings(cfg, **override), seed=cfg.seed, **kw
    )


def cmd_chern(cfg: RunConfig):
    res = _chern(cfg)
    print(f"{res.invariant} Chern number ({res.method}): {res.value:.6f}")
    if res.coarse:
        print(f"warning: value is {res.integer_distance:.3f} from the nearest integer; grid may be too coarse",
              file=sys.stderr)
    headline = {"value": res.value, "mod2": res.mod2, "calibration_ratio": res.calibration_ratio}
    return {"chern.json": res.to_json() + "\n"}, headline, EXIT_OK


DEFAULT_SWEEPS = {"T": [0.05, 0.01, 0.001], "delta_lambda": [math.pi / 20, math.pi / 50, math.pi / 100]}


def cmd_sweep(cfg: RunConfig):
    if cfg.source != "quench" or cfg.pipeline != "metric":
        raise ConfigError("sweep varies quench parameters; use source 'quench' and pipeline 'metric'")
    values = cfg.sweep_list or DEFAULT_SWEEPS[cfg.sweep_param]
    rows, errors = [], []
    results = []
    for v in values:
        res = _chern(cfg, **{cfg.sweep_param: v})
        results.append(res)
        errors.append(res.integer_distance)
        rows.append([cfg.sweep_param, fmt(v), fmt(res.value), fmt(res.integer_distance), res.clamped_nodes])
        print(f"{cfg.sweep_param}={v:.6g}: {res.value:.6f}")
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    header = ["param", "value", "chern", "abs_error", "clamped_nodes"]
    summary = {"param": cfg.sweep_param, "values": values, "errors": errors, "non_increasing": monotone}
    print(f"|C - round(C)| non-increasing along the sweep: {monotone}")
    files = {
        "sweep.csv": _csv_text(header, rows),
        "sweep_summary.json": json.dumps(summary, sort_keys=True, indent=2) + "\n",
    }
    return files, {"non_increasing": monotone, "values": [r.value for r in results]}, EXIT_OK


def cmd_validate(cfg: RunConfig):
    checks = validate.run_suite(cfg.seed, cfg.quick, cfg.corrupt)
    failed = [c.name for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: residual {c.residual:.3e} (tol {c.tol:.1e}) {c.detail}")
    report = {
        "seed": cfg.seed,
        "quick": cfg.quick,
        "corrupt": cfg.corrupt,
        "passed": not failed,
        "failed": failed,
        "checks": [c.to_dict() for c in checks],
    }
    if failed:
        print("failing invariants: " + ", ".join(failed), file=sys.stderr)
    files = {"validate.json": json.dumps(report, sort_keys=True, indent=2) + "\n"}
    return files, {"passed": not failed, "failed": failed}, EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"metric": cmd_metric, "chern": cmd_chern, "sweep": cmd_sweep, "validate": cmd_validate}


# ---------------------------------------------------------------------------


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def write_run(cfg: RunConfig, command: str, files: dict, headline: dict, started: str) -> str:
    run_id = cfg.run_id(command)
    run_dir = os.path.join(cfg.out, run_id)
    os.makedirs(run_dir, exist_ok=True)
    listing = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        with open(os.path.join(run_dir, name), "wb") as fh:
            fh.write(data)
        listing.append({"path": name, "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {
        "run_id": run_id,
        "command": command,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "config": cfg.to_dict(),
        "outputs": listing,
        "headline": headline,
    }
    with open(os.path.join(run_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, default=float)
        fh.write("\n")
    return run_dir


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", help="JSON run configuration")
    g.add_argument("--out", metavar="DIR", help="output root (default: runs)")
    g.add_argument("--threads", type=int, metavar="N", help="worker threads (default: available cores)")
    g.add_argument("--seed", type=int, metavar="S", help="seed for randomised validation draws")
    g.add_argument("--time-unit", dest="time_unit", choices=["two-pi", "one"])
    m = common.add_argument_group("model and protocol")
    m.add_argument("--family")
    m.add_argument("--sign", type=int, choices=[1, -1])
    m.add_argument("--gauge", choices=list(geometry.GAUGES))
    m.add_argument("--delta-lambda", dest="delta_lambda", help="quench step, e.g. 0.0314 or pi/100")
    m.add_argument("--T", dest="T", help="quench time in units of 2 pi / Omega_0")
    m.add_argument("--substeps", type=int)
    m.add_argument("--schedule", choices=["linear", "sudden"])

    parser = argparse.ArgumentParser(prog="qgtquench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metric", parents=[common], help="quench vs oracle metric components along a line")
    p.add_argument("--preset", choices=sorted(PRESETS))

    for name, text in (("chern", "one Chern number"), ("sweep", "Chern number over T or delta_lambda")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--invariant", choices=["real", "second"])
        p.add_argument("--pipeline", choices=["metric", "curvature"])
        p.add_argument("--source", choices=list(chern.SOURCES))
        p.add_argument("--normalization", choices=list(chern.NORMALIZATIONS))
        p.add_argument("--grid", type=int, nargs="+", metavar="N")
        p.add_argument("--rule", choices=["gauss", "midpoint"])
        if name == "sweep":
            p.add_argument("--param", dest="sweep_param", choices=["T", "delta_lambda"])
            p.add_argument("--values", dest="sweep_list", nargs="+", metavar="V")

    p = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    p.add_argument("--quick", action="store_true", default=None)
    p.add_argument("--corrupt", choices=["dirac-algebra"])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    started = _now()
    try:
        file_layer = load_file(args.config) if args.config else None
        cfg = merge(file_layer, flags)
        files, headline, code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationQualityError, ConvergenceError, GaugeSingularityError,
            geometry.GapCollapseError, geometry.ClusterMismatchError) as exc:
        print(f"numerical-quality error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ChartError, ContractError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run_dir = write_run(cfg, args.command, files, headline, started)
    print(f"wrote {run_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
