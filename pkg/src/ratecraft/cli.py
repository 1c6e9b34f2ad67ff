"""Batch command-line front end.

Subcommands: synth, solve, curves, segment, simulate. Parameters resolve as
CLI flag > JSON config file (--config, keys mirror flag names) > built-in
default, and the defaults are visible in each subcommand's --help. All
randomized procedures derive their streams from the single --seed. Output
files are written atomically (temp file + rename) with fixed numeric
formatting, so re-running a command with identical flags and seed yields
byte-identical files. Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .costs import consumer_stats, group_lambda, individual_lambda
from .forecast import cv_curve
from .ingest import (
    DEFAULT_TRAIN_SPLIT,
    SynthSpec,
    align,
    load_meter_csv,
    load_price_csv,
    synth_population,
    write_meter_csv,
    write_price_csv,
)
from .segmentation import default_size_grid, segment_population, stability_audit
from .simulate import replay_validate
from .solver import DEFAULT_GAMMA, lambda_curve, solve_min_lambda
from .types import Dataset, SelectionVector

_DEFAULTS = {
    "out_dir": ".",
    "gamma": DEFAULT_GAMMA,
    "seed": 0,
    "split": DEFAULT_TRAIN_SPLIT,
    "n": 200,
    "days": 90,
    "fraction_peaky": 0.5,
    "base_kwh": 10.0,
    "noise_cv": 0.3,
    "trials": 30,
    "cv_threshold": 10.0,
    "policy": "aggregate",
    "design": "two_sided",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratecraft",
        description="Aggregate electricity consumers into minimum-cost rate groups.",
    )
    parser.add_argument("--version", action="version", version=f"ratecraft {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p, data=True):
        p.add_argument("--out-dir", help=f"output directory (default {_DEFAULTS['out_dir']})")
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--gamma", type=float, help=f"solver tolerance in cents/kWh (default {_DEFAULTS['gamma']})")
        p.add_argument("--seed", type=int, help=f"master random seed (default {_DEFAULTS['seed']})")
        if data:
            p.add_argument("--meter", help="meter CSV path")
            p.add_argument("--prices", help="price CSV path")
            p.add_argument("--split", type=float, help=f"train fraction of days (default {_DEFAULTS['split']})")

    p = sub.add_parser("synth", help="write a synthetic meter and price CSV pair")
    add_shared(p, data=False)
    p.add_argument("--n", type=int, help=f"number of consumers (default {_DEFAULTS['n']})")
    p.add_argument("--days", type=int, help=f"number of days (default {_DEFAULTS['days']})")
    p.add_argument("--fraction-peaky", type=float, help=f"share of evening-peaking consumers (default {_DEFAULTS['fraction_peaky']})")
    p.add_argument("--base-kwh", type=float, help=f"mean daily kWh per consumer (default {_DEFAULTS['base_kwh']})")
    p.add_argument("--noise-cv", type=float, help=f"day-to-day noise coefficient of variation (default {_DEFAULTS['noise_cv']})")

    p = sub.add_parser("solve", help="find the minimum-rate group of a given size")
    add_shared(p)
    p.add_argument("--m", type=int, help="group size (required)")

    p = sub.add_parser("curves", help="rate and forecast-error curves over group sizes")
    add_shared(p)
    p.add_argument("--sizes", help="comma-separated group sizes (default: log-spaced grid)")
    p.add_argument("--trials", type=int, help=f"random groups per size (default {_DEFAULTS['trials']})")

    p = sub.add_parser("segment", help="partition the population into rate groups")
    add_shared(p)
    p.add_argument("--cv-threshold", type=float, help=f"forecast-error limit in percent (default {_DEFAULTS['cv_threshold']})")
    p.add_argument("--policy", choices=["aggregate", "drop"], help=f"leftover policy (default {_DEFAULTS['policy']})")
    p.add_argument("--size-grid", help="comma-separated candidate sizes (default: log-spaced grid)")

    p = sub.add_parser("simulate", help="replay the validate window under realized prices")
    add_shared(p)
    p.add_argument("--selection", help="selection CSV of consumer ids (default: everyone)")
    p.add_argument("--design", choices=["two_sided", "one_sided"], help=f"settlement design (default {_DEFAULTS['design']})")
    p.add_argument("--days-limit", type=int, help="replay at most this many validate days")

    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg: dict, key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return _DEFAULTS.get(key, default)


def _parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"expected a comma-separated list of integers, got {text!r}") from None


def _require(cfg_value, name):
    if cfg_value is None:
        raise ValueError(f"--{name.replace('_', '-')} is required")
    return cfg_value


def _check_common(params):
    if params["gamma"] <= 0:
        raise ValueError("gamma must be > 0")
    if params["seed"] < 0:
        raise ValueError("seed must be >= 0")
    if "split" in params and not (0.0 < params["split"] <= 1.0):
        raise ValueError("split must be in (0, 1]")


def _atomic_write_text(path: Path, text: str):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _load_dataset(params) -> Dataset:
    consumers = load_meter_csv(_require(params["meter"], "meter"))
    prices = load_price_csv(_require(params["prices"], "prices"))
    return align(consumers, prices, params["split"])


# -- synth ------------------------------------------------------------------


def _prepare_synth(args, cfg):
    params = {
        "out_dir": _resolve(args, cfg, "out_dir"),
        "gamma": float(_resolve(args, cfg, "gamma")),
        "seed": int(_resolve(args, cfg, "seed")),
        "split": float(_resolve(args, cfg, "split")),
    }
    _check_common(params)
    params["spec"] = SynthSpec(
        n_consumers=int(_resolve(args, cfg, "n")),
        n_days=int(_resolve(args, cfg, "days")),
        fraction_peaky=float(_resolve(args, cfg, "fraction_peaky")),
        base_kwh_per_day=float(_resolve(args, cfg, "base_kwh")),
        noise_cv=float(_resolve(args, cfg, "noise_cv")),
        seed=params["seed"],
    )
    return params


def _run_synth(params):
    spec = params["spec"]
    dataset = synth_population(spec, split=params["split"])
    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_meter_csv(list(dataset.consumers), out / "meter.csv")
    write_price_csv(dataset.prices, out / "prices.csv")
    n_peaky = sum(1 for c in dataset.consumers if c.consumer_id.startswith("peak"))
    print(f"consumers={dataset.n_consumers} days={dataset.n_days} "
          f"train_days={dataset.train_days} validate_days={dataset.validate_days}")
    print(f"archetypes: peak={n_peaky} night={dataset.n_consumers - n_peaky}")
    print(f"wrote {out / 'meter.csv'} and {out / 'prices.csv'}")


# -- solve ------------------------------------------------------------------


def _prepare_solve(args, cfg):
    params = {
        "out_dir": _resolve(args, cfg, "out_dir"),
        "gamma": float(_resolve(args, cfg, "gamma")),
        "seed": int(_resolve(args, cfg, "seed")),
        "split": float(_resolve(args, cfg, "split")),
        "meter": _resolve(args, cfg, "meter"),
        "prices": _resolve(args, cfg, "prices"),
        "m": _resolve(args, cfg, "m"),
    }
    _check_common(params)
    params["m"] = int(_require(params["m"], "m"))
    if params["m"] < 1:
        raise ValueError("m must be >= 1")
    return params


def _run_solve(params):
    dataset = _load_dataset(params)
    if params["m"] > dataset.n_consumers:
        raise ValueError(f"m={params['m']} exceeds population size {dataset.n_consumers}")
    stats = consumer_stats(dataset, "train")
    result = solve_min_lambda(stats, params["m"], params["gamma"])
    bits = result.selection.bits
    certificate = float((stats.t - result.lambda_star * stats.w)[bits].sum())
    ids = [dataset.consumer_ids[i] for i in result.selection.indices]

    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "selection.csv", "consumer_id\n" + "".join(f"{i}\n" for i in ids))
    print(f"lambda_star={result.lambda_star:.9f} cents/kWh")
    print(f"iterations={result.iterations}")
    print(f"certificate={certificate:.9e}")
    print(f"members={','.join(ids)}")
    print(f"wrote {out / 'selection.csv'}")


# -- curves -----------------------------------------------------------------


def _prepare_curves(args, cfg):
    params = {
        "out_dir": _resolve(args, cfg, "out_dir"),
        "gamma": float(_resolve(args, cfg, "gamma")),
        "seed": int(_resolve(args, cfg, "seed")),
        "split": float(_resolve(args, cfg, "split")),
        "meter": _resolve(args, cfg, "meter"),
        "prices": _resolve(args, cfg, "prices"),
        "trials": int(_resolve(args, cfg, "trials")),
        "sizes": _resolve(args, cfg, "sizes"),
    }
    _check_common(params)
    if params["trials"] < 1:
        raise ValueError("trials must be >= 1")
    if params["sizes"] is not None:
        sizes = sorted(set(_parse_int_list(params["sizes"])))
        if not sizes or sizes[0] < 1:
            raise ValueError("sizes must be positive integers")
        params["sizes"] = sizes
    return params


def _curve_sizes(n: int) -> list[int]:
    grid = np.logspace(0, np.log10(n), 20)
    return sorted({int(round(g)) for g in grid})


def _run_curves(params):
    dataset = _load_dataset(params)
    sizes = params["sizes"] or _curve_sizes(dataset.n_consumers)
    if sizes[-1] > dataset.n_consumers:
        raise ValueError(f"largest size {sizes[-1]} exceeds population {dataset.n_consumers}")
    stats = consumer_stats(dataset, "train")

    lam_points = lambda_curve(stats, sizes, params["gamma"])
    lam_rows = [f"{m},{lam:.9f}" for m, lam in lam_points]

    curve = cv_curve(dataset, sizes, n_random_trials=params["trials"],
                     gamma=params["gamma"], seed=params["seed"])
    cv_rows = []
    for point in curve.points:
        if point.kind == "random":
            lo, hi = curve.random_ci[point.m]
            cv_rows.append(f"{point.m},random,{point.cv:.9f},{lo:.9f},{hi:.9f}")
        else:
            cv_rows.append(f"{point.m},optimal,{point.cv:.9f},,")

    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "lambda_curve.csv",
                       "M,lambda_cents_per_kwh\n" + "".join(r + "\n" for r in lam_rows))
    _atomic_write_text(out / "cv_curve.csv",
                       "M,kind,cv,ci_low,ci_high\n" + "".join(r + "\n" for r in cv_rows))
    print(f"sizes={','.join(str(m) for m in sizes)}")
    print(f"wrote {out / 'lambda_curve.csv'} and {out / 'cv_curve.csv'}")


# -- segment ----------------------------------------------------------------


def _prepare_segment(args, cfg):
    params = {
        "out_dir": _resolve(args, cfg, "out_dir"),
        "gamma": float(_resolve(args, cfg, "gamma")),
        "seed": int(_resolve(args, cfg, "seed")),
        "split": float(_resolve(args, cfg, "split")),
        "meter": _resolve(args, cfg, "meter"),
        "prices": _resolve(args, cfg, "prices"),
        "cv_threshold": float(_resolve(args, cfg, "cv_threshold")),
        "policy": _resolve(args, cfg, "policy"),
        "size_grid": _resolve(args, cfg, "size_grid"),
    }
    _check_common(params)
    if params["cv_threshold"] <= 0:
        raise ValueError("cv-threshold must be > 0")
    if params["policy"] not in ("aggregate", "drop"):
        raise ValueError("policy must be aggregate or drop")
    if params["size_grid"] is not None:
        params["size_grid"] = sorted(set(_parse_int_list(params["size_grid"])))
        if not params["size_grid"] or params["size_grid"][0] < 1:
            raise ValueError("size-grid must be positive integers")
    return params


def _run_segment(params):
    dataset = _load_dataset(params)
    result = segment_population(
        dataset,
        cv_threshold=params["cv_threshold"],
        size_grid=params["size_grid"],
        gamma=params["gamma"],
        leftover_policy=params["policy"],
    )
    stats = consumer_stats(dataset, "train")
    audit = stability_audit(result, stats, params["gamma"])

    payload = {
        "cv_threshold": params["cv_threshold"],
        "leftover_policy": params["policy"],
        "gamma": params["gamma"],
        "groups": [
            {
                "round": g.round,
                "size": g.size,
                "rate_cents_per_kwh": g.rate,
                "cv_percent": g.cv,
                "threshold_met": g.threshold_met,
                "member_ids": [dataset.consumer_ids[i] for i in g.members.indices],
            }
            for g in result.groups
        ],
        "stability_audit": {
            "pairs_checked": audit.pairs_checked,
            "moves_checked": audit.moves_checked,
            "violations": [
                {
                    "kind": v.kind,
                    "earlier_round": v.earlier_round,
                    "later_round": v.later_round,
                    "consumer_index": v.consumer_index,
                    "magnitude": v.magnitude,
                }
                for v in audit.violations
            ],
        },
    }

    rounds_rows = [
        f"{g.round},{g.size},{g.rate:.9f},{g.cv:.9f},{str(g.threshold_met).lower()}"
        for g in result.groups
    ]
    assign_rows = []
    for g in result.groups:
        for i in g.members.indices:
            assign_rows.append(f"{dataset.consumer_ids[i]},{g.round},{g.rate:.9f}")

    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "segmentation.json", json.dumps(payload, indent=2) + "\n")
    _atomic_write_text(out / "rounds.csv",
                       "round,size,rate_cents_per_kwh,cv_percent,threshold_met\n"
                       + "".join(r + "\n" for r in rounds_rows))
    _atomic_write_text(out / "assignments.csv",
                       "consumer_id,group_round,group_rate_cents_per_kwh\n"
                       + "".join(r + "\n" for r in assign_rows))
    print(f"groups={len(result.groups)} assigned={result.n_assigned} of {dataset.n_consumers}")
    print(f"audit: pairs={audit.pairs_checked} moves={audit.moves_checked} "
          f"violations={len(audit.violations)}")
    print(f"wrote {out / 'segmentation.json'}, {out / 'rounds.csv'}, {out / 'assignments.csv'}")


# -- simulate ---------------------------------------------------------------


def _prepare_simulate(args, cfg):
    params = {
        "out_dir": _resolve(args, cfg, "out_dir"),
        "gamma": float(_resolve(args, cfg, "gamma")),
        "seed": int(_resolve(args, cfg, "seed")),
        "split": float(_resolve(args, cfg, "split")),
        "meter": _resolve(args, cfg, "meter"),
        "prices": _resolve(args, cfg, "prices"),
        "design": _resolve(args, cfg, "design"),
        "selection": _resolve(args, cfg, "selection"),
        "days_limit": _resolve(args, cfg, "days_limit"),
    }
    _check_common(params)
    if params["design"] not in ("two_sided", "one_sided"):
        raise ValueError("design must be two_sided or one_sided")
    if params["days_limit"] is not None and int(params["days_limit"]) < 1:
        raise ValueError("days-limit must be >= 1")
    return params


def _read_selection_ids(path) -> list[str]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "consumer_id":
        raise ValueError(f"{path}: expected a selection CSV with header consumer_id")
    return [line for line in lines[1:] if line]


def _run_simulate(params):
    dataset = _load_dataset(params)
    selection = None
    if params["selection"] is not None:
        ids = _read_selection_ids(params["selection"])
        index = {cid: i for i, cid in enumerate(dataset.consumer_ids)}
        missing = [cid for cid in ids if cid not in index]
        if missing:
            raise ValueError(f"selection ids not in dataset: {', '.join(missing[:5])}")
        selection = SelectionVector.from_indices(dataset.n_consumers, [index[c] for c in ids])
    limit = params["days_limit"]
    report = replay_validate(
        dataset,
        selection=selection,
        design=params["design"],
        n_days=None if limit is None else int(limit),
    )

    rows = []
    for s in report.settlements:
        rows.append(
            f"{s.day_index},{dataset.date_of_row(s.day_index).isoformat()},"
            f"{float(s.consumed.sum()):.4f},{float(s.purchased.sum()):.4f},{s.cost:.6f}"
        )
    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "settlement.csv",
                       "day_index,date,demand_kwh,purchased_kwh,cost_cents\n"
                       + "".join(r + "\n" for r in rows))
    print(f"design={report.design} days={report.n_days} demand_kwh={report.demand_kwh:.4f}")
    print(f"realized_rate={report.realized_rate:.9f} cents/kWh")
    print(f"lambda={report.lambda_rate:.9f} cents/kWh")
    print(f"penalty_gap={report.penalty_gap:.9f} expected_gap={report.expected_gap:.9f}")
    print(f"wrote {out / 'settlement.csv'}")


_COMMANDS = {
    "synth": (_prepare_synth, _run_synth),
    "solve": (_prepare_solve, _run_solve),
    "curves": (_prepare_curves, _run_curves),
    "segment": (_prepare_segment, _run_segment),
    "simulate": (_prepare_simulate, _run_simulate),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    prepare, execute = _COMMANDS[args.command]
    try:
        cfg = _load_config(args.config)
        params = prepare(args, cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        execute(params)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
