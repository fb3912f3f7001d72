"""Command-line interface: scenario/estimate drivers and experiment sweeps.

Exit codes: 0 success, 1 validation (bad config or arguments), 2 runtime
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import nmse
from .errors import MacawError, ValidationError
from .estimator import EstimatorConfig, estimate
from .harness import bound_experiment, rayleigh_report, sweep, table2
from .scenario import gen_scenario, table1_defaults
from .serialization import (RunManifest, config_from_dict, config_to_dict,
                            dump_json, load_json, scenario_from_dict,
                            scenario_to_dict, write_complex)
from .sketch import make_srft, observe

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

SWEEP_COLUMNS = ["label", "snr_db", "trial", "seed", "nmse", "nmse_median",
                 "time_s", "time_relax_s", "time_per_path_s",
                 "time_stage2_s", "n_dropped"]
TABLE2_COLUMNS = ["experiment", "label", "swc_fitting_nmse", "macaw_nmse",
                  "trials", "snr_db", "seed"]
BOUND_COLUMNS = ["mu_star", "cos_sim", "bound", "bin"]


def _write_rows(rows: list[dict], columns: list[str], out: str | None,
                fmt: str) -> None:
    if fmt == "json":
        payload = json.dumps(rows, indent=2, sort_keys=True) + "\n"
        if out:
            Path(out).write_text(payload, encoding="utf-8")
        else:
            sys.stdout.write(payload)
        return
    rows_out = [{c: r.get(c, "") for c in columns} for r in rows]
    if out:
        with open(out, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=columns)
            w.writeheader()
            w.writerows(rows_out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=columns)
        w.writeheader()
        w.writerows(rows_out)


def _load_config(path: str | None, seed: int):
    if path is None:
        cfg = table1_defaults(seed=seed)
    else:
        d = load_json(path)
        if "config" in d and "paths" in d:
            raise ValidationError(
                f"{path} is a scenario file, not a config; pass it to "
                "'estimate' instead")
        cfg = config_from_dict(d)
        if seed != cfg.seed:
            from dataclasses import replace
            cfg = replace(cfg, seed=seed)
    return cfg


def cmd_scenario(args) -> int:
    cfg = _load_config(args.config, args.seed)
    sc = gen_scenario(cfg)
    out = args.out or "scenario.json"
    dump_json(scenario_to_dict(sc), out)
    chan_path = str(Path(out).with_suffix("")) + ".chan.bin"
    write_complex(chan_path, sc.channel())
    print(f"wrote {out} and {chan_path} "
          f"({cfg.n_scatterers} paths, seed {cfg.seed})")
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.config is None:
        raise ValidationError("estimate requires --config <scenario.json>")
    d = load_json(args.config)
    if "true_params" not in d:
        raise ValidationError(
            f"{args.config} is not a scenario file (missing ground truth); "
            "generate one with the 'scenario' subcommand")
    sc = scenario_from_dict(d)
    cfg = sc.config
    h = sc.channel()
    op = make_srft(cfg.upa.n_y, cfg.upa.n_z, cfg.n_measurements,
                   seed=args.seed)
    snr = None if args.noiseless else (args.snr if args.snr is not None
                                       else cfg.snr_db)
    obs = observe(h, op, snr, seed=args.seed + 1)
    est_cfg = EstimatorConfig(n_paths=cfg.n_scatterers, r_min=cfg.r_min)
    t0 = time.perf_counter()
    params, h_hat, diag = estimate(obs, est_cfg, cfg.upa, cfg.ofdm)
    elapsed = time.perf_counter() - t0
    from .serialization import params_to_dict
    result = {
        "nmse": nmse(h_hat, h),
        "snr_db": "inf" if snr is None else snr,
        "time_s": elapsed,
        "stage_times": diag.stage_times,
        "dropped_paths": diag.dropped_paths,
        "params": [params_to_dict(p) for p in params],
        "manifest": RunManifest.create(
            {"scenario": config_to_dict(cfg), "seed": args.seed,
             "snr_db": "inf" if snr is None else snr},
            __version__).to_dict(),
    }
    if args.out:
        dump_json(result, args.out)
        print(f"nmse={result['nmse']:.6e} -> {args.out}")
    else:
        dump_json_stdout(result)
    return EXIT_OK


def dump_json_stdout(obj: dict) -> None:
    json.dump(obj, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args.seed)
    snr_list = [float(s) for s in args.snr_list.split(",")] \
        if args.snr_list else [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0]
    rows = sweep(cfg, snr_list, args.trials, args.seed, jobs=args.jobs,
                 noiseless=args.noiseless)
    _write_rows(rows, SWEEP_COLUMNS, args.out, args.format)
    return EXIT_OK


def cmd_table2(args) -> int:
    exps = [args.exp] if args.exp else [1, 2, 3, 4]
    rows = []
    for e in exps:
        rows.extend(table2(e, trials=args.trials, seed=args.seed,
                           snr_db=args.snr if args.snr is not None else 10.0,
                           jobs=args.jobs))
    _write_rows(rows, TABLE2_COLUMNS, args.out, args.format)
    return EXIT_OK


def cmd_bound(args) -> int:
    rows = bound_experiment(n_samples=args.samples, n_bins=args.bins,
                            n=args.array_n, seed=args.seed)
    _write_rows(rows, BOUND_COLUMNS, args.out, args.format)
    return EXIT_OK


def cmd_rayleigh(args) -> int:
    src = np.inf if args.source_distance in (None, "inf") \
        else float(args.source_distance)
    report = rayleigh_report(source_distance=src,
                             cylinder_curvature=args.cylinder_curvature,
                             incidence_deg=args.incidence_deg,
                             n=args.array_n, d_ant=args.spacing,
                             wavelength=args.wavelength,
                             target_mu=args.target_mu)
    if args.format == "csv":
        _write_rows([report], list(report.keys()), args.out, "csv")
    elif args.out:
        dump_json(report, args.out)
    else:
        dump_json_stdout(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", type=str, default=None)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--noiseless", action="store_true")
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    p = argparse.ArgumentParser(
        prog="macaw",
        description="Anisotropic-wavefront channel simulation and estimation")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scenario", parents=[common],
                        help="generate a multipath scenario file")
    sp.set_defaults(fn=cmd_scenario)

    ep = sub.add_parser("estimate", parents=[common],
                        help="run the estimator on a scenario file")
    ep.add_argument("--snr", type=float, default=None)
    ep.set_defaults(fn=cmd_estimate)

    wp = sub.add_parser("sweep", parents=[common],
                        help="Monte-Carlo NMSE vs SNR sweep")
    wp.add_argument("--snr-list", type=str, default=None,
                    help="comma-separated dB values")
    wp.add_argument("--trials", type=int, default=25)
    wp.set_defaults(fn=cmd_sweep)

    tp = sub.add_parser("table2", parents=[common],
                        help="modeling-deviation experiment table")
    tp.add_argument("--exp", type=int, choices=[1, 2, 3, 4], default=None)
    tp.add_argument("--trials", type=int, default=10)
    tp.add_argument("--snr", type=float, default=None)
    tp.set_defaults(fn=cmd_table2)

    bp = sub.add_parser("bound", parents=[common],
                        help="stratified similarity-bound experiment")
    bp.add_argument("--samples", type=int, default=1000)
    bp.add_argument("--bins", type=int, default=20)
    bp.add_argument("--array-n", type=int, default=64)
    bp.set_defaults(fn=cmd_bound)

    rp = sub.add_parser("rayleigh", parents=[common],
                        help="effective-sphericity distance calculator")
    rp.add_argument("--source-distance", type=str, default="inf",
                    help="meters, or 'inf' for a plane wave")
    rp.add_argument("--cylinder-curvature", type=float, default=2.0)
    rp.add_argument("--incidence-deg", type=float, default=45.0)
    rp.add_argument("--array-n", type=int, default=256)
    rp.add_argument("--spacing", type=float, default=0.005)
    rp.add_argument("--wavelength", type=float, default=0.01)
    rp.add_argument("--target-mu", type=float, default=0.59)
    rp.set_defaults(fn=cmd_rayleigh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno}, column "
              f"{exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MacawError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
