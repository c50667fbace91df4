"""Command-line entry point.

Subcommands: fit, predict, evaluate, synth, experiment {nsbl-sweep,separation},
validate-model. A JSON ``--config`` file may supply any option (keys are the
option names with dashes replaced by underscores); flags given on the command
line take precedence. Failures print a single ``error: <Kind>: <message>`` line
on stderr and exit with 2 (usage), 3 (data) or 4 (numeric).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import fit_fspl_baseline, fit_omp
from .data import (DEFAULT_COLUMNS, SyntheticScene, distinct_altitudes, filter_by_altitude,
                   generate_synthetic, load_measurements_csv, random_points, save_measurements_csv,
                   survey_points)
from .errors import ConfigurationError, DataError, GsSblError
from .evaluation import NSBL_RANGE, SEPARATIONS_M, evaluate, predict, run_nsbl_sweep, run_separation_comparison
from .gs_sbl import fit_gs_sbl
from .grid import VoxelGrid
from .micro_sbl import SblPriors
from .persistence import digest_array, load_model, model_to_dict, save_json, save_model, write_table
from .propagation import PropagationConfig, build_sensing_matrix

TABLE_COLUMNS = ("algorithm", "n_sbl", "separation_m", "seed", "rmse_db", "n_test")
SWEEP_COLUMNS = TABLE_COLUMNS + ("train_z_m", "test_z_m")
PAIR_COLUMNS = TABLE_COLUMNS + ("train_z_m", "test_z_m")


# -- argument helpers -------------------------------------------------------

def _floats(text, n=None):
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _names(text):
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _json_arg(value, what):
    """Inline JSON object, dict (from a config file) or path to a JSON file."""
    if value is None:
        return None
    if isinstance(value, dict):
        return value
    text = str(value).strip()
    try:
        if text.startswith("{"):
            return json.loads(text)
        return json.loads(Path(text).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{what}: invalid JSON ({exc})") from exc


def _grid(args) -> VoxelGrid:
    doc = _json_arg(args.grid, "--grid")
    if doc is None:
        raise ConfigurationError("--grid is required")
    return VoxelGrid.from_dict(doc.get("grid", doc))


def _propagation(args) -> PropagationConfig:
    return PropagationConfig.from_dbi(args.freq_hz, args.gain_tx_dbi, args.gain_rx_dbi, args.min_distance_m)


def _priors(args) -> SblPriors:
    return SblPriors(a=args.sbl_a, b=args.sbl_b, beta_init=args.sbl_beta0, max_iters=args.sbl_iters,
                     tol=args.sbl_tol)


def _threads(args) -> int:
    return max(1, int(args.threads or os.cpu_count() or 1))


def _check_n_sources(n):
    if n < 1:
        raise ConfigurationError(f"--n-sources must be >= 1, got {n}")


def _add_propagation(p):
    g = p.add_argument_group("propagation")
    g.add_argument("--freq-hz", type=float, default=3.5e9, help="carrier frequency")
    g.add_argument("--gain-tx-dbi", type=float, default=0.0, help="transmit antenna gain")
    g.add_argument("--gain-rx-dbi", type=float, default=0.0, help="receive antenna gain")
    g.add_argument("--min-distance-m", type=float, default=1.0, help="near-field clamp distance")


def _add_priors(p):
    g = p.add_argument_group("Micro-SBL priors")
    g.add_argument("--sbl-a", type=float, default=0.05, help="Gamma shape a")
    g.add_argument("--sbl-b", type=float, default=0.05, help="Gamma rate b")
    g.add_argument("--sbl-beta0", type=float, default=1e3, help="initial noise precision")
    g.add_argument("--sbl-iters", type=int, default=10, help="iteration limit per candidate")
    g.add_argument("--sbl-tol", type=float, default=1e-8, help="relative convergence tolerance")


def _add_common(p):
    p.add_argument("--config", help="JSON file with option defaults (flags override)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (all CPUs when omitted)")


def _add_sampling(p):
    g = p.add_argument_group("synthetic sampling")
    g.add_argument("--scene", help="scene JSON (file or inline)")
    g.add_argument("--pattern", choices=("zigzag", "random"), default="zigzag", help="sampling pattern")
    g.add_argument("--altitudes", default="30,50,70,90,110", help="survey altitudes in m")
    g.add_argument("--x-range", default=None, help="lo,hi in m; grid extent when omitted")
    g.add_argument("--y-range", default=None, help="lo,hi in m; grid extent when omitted")
    g.add_argument("--legs", type=int, default=6, help="zigzag legs per altitude")
    g.add_argument("--points-per-leg", type=int, default=40, help="samples per zigzag leg")
    g.add_argument("--n-points", type=int, default=1000, help="random pattern sample count")
    g.add_argument("--seed", type=int, default=None, help="override the scene seed")
    g.add_argument("--noise-db", type=float, default=None, help="override the scene shadowing std")


_HELP = argparse.ArgumentDefaultsHelpFormatter


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gssbl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a sparse source model to measurements", formatter_class=_HELP)
    _add_common(p)
    p.add_argument("--algo", choices=("gs-sbl", "omp", "fspl"), default="gs-sbl", help="algorithm")
    p.add_argument("--n-sources", type=int, default=2, help="number of virtual sources")
    # not argparse-required so that --config can supply it
    p.add_argument("--measurements", help="measurement CSV (required)")
    p.add_argument("--columns", default=",".join(DEFAULT_COLUMNS), help="x,y,z,rsrp column names")
    p.add_argument("--grid", help="grid JSON {origin, cell_size, counts} (file or inline)")
    p.add_argument("--bs-location", help="x,y,z of the physical transmitter (fspl)")
    p.add_argument("--out", default="model.rem.json", help="model file to write")
    p.add_argument("--report", default=None, help="fit report JSON; <out>.report.json when omitted")
    _add_propagation(p)
    _add_priors(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict RSS (dBm) from a model", formatter_class=_HELP)
    _add_common(p)
    p.add_argument("--model", help="model file (required)")
    p.add_argument("--points", help="CSV with x,y,z columns")
    p.add_argument("--columns", default="x,y,z", help="x,y,z column names in --points")
    p.add_argument("--slice-z", type=float, help="emit a horizontal REM slice at this altitude")
    p.add_argument("--slice-x", help="lo,hi for the slice")
    p.add_argument("--slice-y", help="lo,hi for the slice")
    p.add_argument("--slice-step", type=float, default=5.0, help="slice grid spacing in m")
    p.add_argument("--out", default="-", help="output CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="dB-domain RMSE of a model on held-out measurements", formatter_class=_HELP)
    _add_common(p)
    p.add_argument("--model", help="model file (required)")
    p.add_argument("--measurements", help="measurement CSV (required)")
    p.add_argument("--columns", default=",".join(DEFAULT_COLUMNS), help="x,y,z,rsrp column names")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate synthetic measurements from a scene", formatter_class=_HELP)
    _add_common(p)
    _add_sampling(p)
    p.add_argument("--out", default="-", help="output CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="run an altitude-generalisation experiment", formatter_class=_HELP)
    esub = p.add_subparsers(dest="experiment", required=True)
    for name, helptext, func in (("nsbl-sweep", "RMSE versus number of sources", cmd_nsbl_sweep),
                                 ("separation", "GS-SBL vs OMP vs FSPL by elevation gap", cmd_separation)):
        e = esub.add_parser(name, help=helptext, formatter_class=_HELP)
        _add_common(e)
        e.add_argument("--measurements", help="measurement CSV (alternative to --scene)")
        e.add_argument("--columns", default=",".join(DEFAULT_COLUMNS), help="x,y,z,rsrp column names")
        e.add_argument("--grid", help="grid JSON")
        e.add_argument("--seeds", type=int, default=1, help="number of scene seeds (synthetic only)")
        e.add_argument("--z-tol", type=float, default=1.0, help="altitude matching tolerance in m")
        e.add_argument("--out", default="-", help="results CSV")
        _add_sampling(e)
        _add_propagation(e)
        _add_priors(e)
        e.set_defaults(func=func)
        if name == "nsbl-sweep":
            e.add_argument("--train-z", default="30,110", help="training altitudes in m")
            e.add_argument("--test-z", default="50,70,90", help="test altitudes in m, one split each")
            e.add_argument("--n-min", type=int, default=NSBL_RANGE.start, help="smallest N_SBL")
            e.add_argument("--n-max", type=int, default=NSBL_RANGE.stop - 1, help="largest N_SBL")
        else:
            e.add_argument("--separations", default=",".join(f"{s:g}" for s in SEPARATIONS_M),
                           help="train/test altitude gaps in m")
            e.add_argument("--algorithms", default="gs_sbl,omp,fspl", help="algorithms to compare")
            e.add_argument("--n-sources", type=int, default=2, help="sources for GS-SBL and OMP")
            e.add_argument("--bs-location", help="x,y,z of the transmitter")
            e.add_argument("--train-altitudes", default=None,
                           help="altitudes to pair")
            e.add_argument("--pairs-out", default=None, help="per altitude-pair CSV")

    p = sub.add_parser("validate-model", help="check a model file against the model invariants", formatter_class=_HELP)
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config(parser, argv):
    """Re-parse with ``--config`` values installed as defaults."""
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if not cfg_path:
        return args
    cfg = _json_arg(cfg_path, "--config")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    if args.command == "experiment":
        sub = sub._subparsers._group_actions[0].choices[args.experiment]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


# -- subcommands -------------------------------------------------------------

def _write_csv_or_stdout(write, out):
    write(sys.stdout if out in (None, "-") else out)


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ConfigurationError(f"--{n.replace('_', '-')} is required")


def cmd_fit(args):
    _require(args, "measurements")
    _check_n_sources(args.n_sources)
    ms = load_measurements_csv(args.measurements, _names(args.columns))
    config = _propagation(args)
    report = {"algorithm": args.algo, "n_measurements": len(ms), "dropped_rows": ms.metadata["dropped_rows"]}
    if args.algo == "fspl":
        if args.bs_location is None:
            raise ConfigurationError("--bs-location is required for --algo fspl")
        extra = {}
        model = fit_fspl_baseline(ms, _floats(args.bs_location, 3), config, report=extra)
        report.update(extra)
    else:
        grid = _grid(args)
        phi = build_sensing_matrix(config, grid, ms.points, threads=_threads(args))
        if args.algo == "gs-sbl":
            model, fit_report = fit_gs_sbl(ms, phi, args.n_sources, _priors(args), threads=_threads(args))
            report.update(fit_report.to_dict())
        else:
            extra = {}
            model = fit_omp(ms, phi, args.n_sources, report=extra)
            report.update(extra)
    save_model(model, args.out, input_digest=digest_array(ms.points, ms.rsrp_dbm))
    report_path = args.report or str(Path(args.out).with_suffix("")) + ".report.json"
    save_json(report, report_path)
    print(json.dumps({"model": str(args.out), "report": report_path, "support": list(model.support),
                      "rho": model.rho}))


def _slice_points(args, model):
    grid = model.grid
    if args.slice_x is None or args.slice_y is None:
        if grid is None:
            raise ConfigurationError("--slice-x/--slice-y are required for models without a grid")
    lo = np.asarray(grid.origin) if grid is not None else None
    hi = grid.upper if grid is not None else None
    xr = _floats(args.slice_x, 2) if args.slice_x else [lo[0], hi[0]]
    yr = _floats(args.slice_y, 2) if args.slice_y else [lo[1], hi[1]]
    if not args.slice_step > 0:
        raise ConfigurationError("--slice-step must be positive")
    xs = np.arange(xr[0], xr[1] + 1e-9, args.slice_step)
    ys = np.arange(yr[0], yr[1] + 1e-9, args.slice_step)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), np.full(xx.size, args.slice_z)])


def _read_points(path, columns):
    import csv
    cols = _names(columns)
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not header:
            raise DataError(f"{path}: empty file")
        missing = [c for c in cols if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        try:
            rows = [[float(r[c]) for c in cols] for r in reader]
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed coordinate ({exc})") from exc
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def cmd_predict(args):
    _require(args, "model")
    model = load_model(args.model)
    if args.slice_z is not None:
        pts = _slice_points(args, model)
    elif args.points:
        pts = _read_points(args.points, args.columns)
    else:
        raise ConfigurationError("give --points or --slice-z")
    pred = predict(model, pts) if len(pts) else np.empty(0)
    rows = [{"x": p[0], "y": p[1], "z": p[2], "pred_dbm": v} for p, v in zip(pts, pred)]
    _write_csv_or_stdout(lambda path: write_table(rows, path, ("x", "y", "z", "pred_dbm")), args.out)


def cmd_evaluate(args):
    _require(args, "model", "measurements")
    model = load_model(args.model)
    ms = load_measurements_csv(args.measurements, _names(args.columns))
    res = evaluate(model, ms)
    print(json.dumps({"algorithm": model.algorithm, "rmse_db": res.rmse_db, "n_test": res.n_test,
                      "dropped_rows": ms.metadata["dropped_rows"]}))


def _scene(args) -> SyntheticScene:
    doc = _json_arg(args.scene, "--scene")
    if doc is None:
        raise ConfigurationError("--scene is required")
    scene = SyntheticScene.from_dict(doc)
    if args.seed is not None:
        scene = scene.with_seed(args.seed)
    if args.noise_db is not None:
        scene = SyntheticScene(scene.grid, scene.true_sources, scene.propagation, args.noise_db, scene.seed,
                               scene.path_loss_exponent, scene.noise_mode, scene.noise_sigma_w)
    return scene


def _sample_points(args, grid: VoxelGrid) -> np.ndarray:
    lo, hi = np.asarray(grid.origin), grid.upper
    xr = _floats(args.x_range, 2) if args.x_range else [lo[0], hi[0]]
    yr = _floats(args.y_range, 2) if args.y_range else [lo[1], hi[1]]
    alts = _floats(args.altitudes)
    if args.pattern == "zigzag":
        return survey_points(xr, yr, alts, args.legs, args.points_per_leg)
    seed = 0 if args.seed is None else args.seed
    pts = random_points([xr[0], yr[0], 0.0], [xr[1], yr[1], 1.0], args.n_points, seed=seed)
    # random horizontal positions, altitudes drawn from the survey levels
    pts[:, 2] = np.asarray(alts)[np.random.default_rng(seed).integers(0, len(alts), args.n_points)]
    return pts


def cmd_synth(args):
    scene = _scene(args)
    ms = generate_synthetic(scene, _sample_points(args, scene.grid))
    _write_csv_or_stdout(lambda path: save_measurements_csv(ms, path), args.out)


def _experiment_inputs(args):
    """Yield ``(seed, MeasurementSet, grid, scene)`` for each data realisation."""
    if args.measurements and args.scene:
        raise ConfigurationError("give either --measurements or --scene, not both")
    if args.measurements:
        ms = load_measurements_csv(args.measurements, _names(args.columns))
        return [(None, ms, _grid(args), None)]
    scene = _scene(args)
    grid = _grid(args) if args.grid else scene.grid
    pts = _sample_points(args, scene.grid)
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be >= 1")
    return [(s, generate_synthetic(scene.with_seed(s), pts), grid, scene)
            for s in range(scene.seed, scene.seed + args.seeds)]


def _map_ordered(func, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(i) for i in items]


def cmd_nsbl_sweep(args):
    config, priors = _propagation(args), _priors(args)
    train_z, test_z = _floats(args.train_z), _floats(args.test_z)
    if not 1 <= args.n_min <= args.n_max:
        raise ConfigurationError("need 1 <= --n-min <= --n-max")

    def one(item):
        seed, ms, grid, _ = item
        train = filter_by_altitude(ms, train_z, args.z_tol)
        tests = [filter_by_altitude(ms, [z], args.z_tol) for z in test_z]
        phi = build_sensing_matrix(config, grid, train.points)
        return run_nsbl_sweep(train, tests, phi, range(args.n_min, args.n_max + 1), priors, seed=seed)

    results = _map_ordered(one, _experiment_inputs(args), _threads(args))
    rows = [r.row() for res in results for r in res]
    _write_csv_or_stdout(lambda path: write_table(rows, path, SWEEP_COLUMNS), args.out)


def cmd_separation(args):
    config, priors = _propagation(args), _priors(args)
    _check_n_sources(args.n_sources)
    seps = _floats(args.separations)
    algos = _names(args.algorithms)

    def one(item):
        seed, ms, grid, scene = item
        if args.bs_location:
            bs = _floats(args.bs_location, 3)
        elif scene is not None:
            bs = scene.source_positions[0]
        else:
            bs = None
        alts = (_floats(args.train_altitudes) if args.train_altitudes
                else [round(z, 6) for z in distinct_altitudes(ms, args.z_tol)])
        return run_separation_comparison(ms, alts, grid, config, seps, algos, args.n_sources, bs, priors,
                                         tolerance_m=args.z_tol, seed=seed)

    results = _map_ordered(one, _experiment_inputs(args), _threads(args))
    summary = [r.row() for s, _ in results for r in s]
    pairs = [r.row() for _, p in results for r in p]
    _write_csv_or_stdout(lambda path: write_table(summary, path, TABLE_COLUMNS), args.out)
    pairs_out = args.pairs_out
    if pairs_out is None and args.out not in (None, "-"):
        pairs_out = str(Path(args.out).with_suffix("")) + ".pairs.csv"
    if pairs_out:
        write_table(pairs, pairs_out, PAIR_COLUMNS)


def cmd_validate(args):
    model = load_model(args.model)
    d = model_to_dict(model)
    print(json.dumps({"valid": True, "algorithm": d["algorithm"], "n_sources": model.n_sources,
                      "rho": model.rho}))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except GsSblError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
