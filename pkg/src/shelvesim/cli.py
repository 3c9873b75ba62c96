"""Command-line entry point: ``run`` ensembles, compute reference
``oracle`` rates, and ``analyze`` emission files into JSON reports.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 analysis
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import analysis
from .baselines import (
    TelegraphParams,
    load_oracle,
    oracle_filename,
    save_oracle,
    telegraph_oracle,
)
from .engine import DEFAULT_TARGET_P, run_ensemble
from .errors import AnalysisError, NumericError, SchemeError
from .programs import configuration_graph
from .records import (
    Channel,
    EmissionRecord,
    read_emissions,
    write_emissions,
)
from .schemes import (
    build_scheme,
    default_gap_threshold,
    parse_scheme_dict,
    scheme_hash,
    serialize_scheme,
)

_RUN_KEYS = ("trajectories", "t_max", "seed", "engine", "out")
_ENGINES = ("nrules", "mcwf")
_RATE_TOLERANCE = 0.10
_ORDERING_MIN_FRACTION = 0.99


def _load_config(path) -> tuple:
    """Split a key=value config file into run settings and scheme fields."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise SchemeError(f"scheme file not found: {path}") from None
    raw = parse_scheme_dict(text)
    run_cfg = {}
    for key in _RUN_KEYS:
        if key in raw:
            run_cfg[key] = raw.pop(key)
    return run_cfg, raw


def _coerce_run_config(run_cfg: dict) -> dict:
    out = {}
    try:
        if "trajectories" in run_cfg:
            out["trajectories"] = int(run_cfg["trajectories"])
        if "t_max" in run_cfg:
            out["t_max"] = float(run_cfg["t_max"])
        if "seed" in run_cfg:
            out["seed"] = int(run_cfg["seed"])
    except ValueError as exc:
        raise SchemeError(f"bad run setting: {exc}") from None
    if "engine" in run_cfg:
        engine = str(run_cfg["engine"]).strip()
        if engine not in _ENGINES:
            raise SchemeError(
                f"engine must be one of {_ENGINES}, got {engine!r}", field="engine"
            )
        out["engine"] = engine
    if "out" in run_cfg:
        out["out"] = str(run_cfg["out"]).strip()
    return out


def _resolve_scheme(args):
    """Scheme from file plus flag overrides; flags win on conflict."""
    run_cfg = {}
    scheme_fields = {}
    if getattr(args, "scheme", None):
        file_run, scheme_fields = _load_config(args.scheme)
        run_cfg.update(_coerce_run_config(file_run))
    scheme = build_scheme(scheme_fields)
    for key in _RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            run_cfg[key] = val
    return scheme, run_cfg


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    scheme, run_cfg = _resolve_scheme(args)
    n_traj = int(run_cfg.get("trajectories", 1))
    t_max = float(run_cfg.get("t_max", 1000.0))
    seed = int(run_cfg.get("seed", 0))
    engine = run_cfg.get("engine", "nrules")
    out_dir = Path(run_cfg.get("out", "shelvesim-out"))
    if n_traj < 1:
        raise SchemeError("trajectories must be at least 1", field="trajectories")
    if t_max < 0.0:
        raise SchemeError("t_max must be nonnegative", field="t_max")
    if engine not in _ENGINES:
        raise SchemeError(f"engine must be one of {_ENGINES}", field="engine")

    records = run_ensemble(scheme, n_traj, t_max, seed, engine=engine)
    out_dir.mkdir(parents=True, exist_ok=True)
    emissions_path = out_dir / "emissions.csv"
    write_emissions(emissions_path, records)
    manifest = {
        "scheme": serialize_scheme(scheme),
        "scheme_hash": scheme_hash(scheme),
        "configuration": scheme.config.value,
        "n_trajectories": n_traj,
        "t_max": t_max,
        "base_seed": seed,
        "engine": engine,
        "target_p": DEFAULT_TARGET_P,
        "emissions": "emissions.csv",
    }
    _write_json(out_dir / "manifest.json", manifest)

    n_events = sum(r.n_events for r in records)
    n_strong = sum(r.counts()[Channel.STRONG] for r in records)
    n_weak = sum(r.counts()[Channel.WEAK] for r in records)
    print(f"wrote {emissions_path} ({n_traj} trajectories, "
          f"{n_events} events: {n_strong} strong, {n_weak} weak)")
    print(f"wrote {out_dir / 'manifest.json'}")
    return 0


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    scheme, _run_cfg = _resolve_scheme(args)
    params = telegraph_oracle(scheme)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / oracle_filename(scheme)
    save_oracle(params, path)
    print(f"wrote {path}: beta1={params.beta1:.6g} lambda2={params.lambda2:.6g} "
          f"weight={params.weight:.6g}")
    return 0


# ---------------------------------------------------------------------------
# analyze


def _load_manifest(emissions_path: Path):
    manifest_path = emissions_path.parent / "manifest.json"
    if not manifest_path.exists():
        return None
    with open(manifest_path) as fh:
        return json.load(fh)


def _fit_block(waits):
    """Fit dict for the report; a failed/thin fit is reported, not fatal."""
    try:
        fit = analysis.fit_waiting_distribution(waits)
    except (AnalysisError, ValueError) as exc:
        return {"skipped": str(exc)}, None
    return {
        "fast_rate": fit.fast_rate,
        "slow_rate": fit.slow_rate,
        "weight": fit.weight,
        "ks_statistic": fit.goodness,
        "n_samples": fit.n_samples,
        "t_min": fit.t_min,
    }, fit


def cmd_analyze(args) -> int:
    emissions_path = Path(args.emissions)
    if not emissions_path.exists():
        raise SchemeError(f"emissions file not found: {emissions_path}")
    manifest = _load_manifest(emissions_path)

    t_max = args.t_max
    if t_max is None and manifest is not None:
        t_max = float(manifest["t_max"])
    scheme = None
    if manifest is not None:
        scheme = build_scheme(parse_scheme_dict(manifest["scheme"]))
    gap_threshold = args.gap_threshold
    if gap_threshold is None:
        if scheme is None:
            raise SchemeError(
                "no manifest.json next to the emissions file; "
                "pass --gap-threshold explicitly"
            )
        gap_threshold = default_gap_threshold(scheme)

    records = read_emissions(emissions_path, t_max)
    if not records:
        n_traj = int(manifest["n_trajectories"]) if manifest else 1
        records = [EmissionRecord(i, t_max or 0.0) for i in range(n_traj)]

    oracle: TelegraphParams | None = None
    if args.oracle:
        oracle_path = Path(args.oracle)
        if not oracle_path.exists():
            raise SchemeError(f"oracle file not found: {oracle_path}")
        oracle = load_oracle(oracle_path)

    report = {
        "emissions": str(emissions_path),
        "n_trajectories": len(records),
        "n_events": int(sum(r.n_events for r in records)),
        "gap_threshold": gap_threshold,
        "segmentation": analysis.segmentation_summary(records, gap_threshold),
    }

    waits = {
        "strong": analysis.pooled_waiting_times(records, Channel.STRONG),
        "weak": analysis.pooled_waiting_times(records, Channel.WEAK),
    }
    fits = {}
    blocks = {}
    for label, samples in waits.items():
        blocks[label], fits[label] = _fit_block(samples)
    report["waiting_fits"] = blocks

    dark = analysis.dark_statistics(records, gap_threshold)
    report["dark"] = {
        "count": dark.count,
        "mean_excess": None if dark.count == 0 else dark.mean_excess,
        "rate": None if dark.count == 0 else dark.rate,
    }

    checks = []

    def check(name, ok, detail):
        checks.append({"name": name, "pass": bool(ok), "detail": detail})

    if oracle is not None:
        report["oracle"] = {"beta1": oracle.beta1, "lambda2": oracle.lambda2,
                            "weight": oracle.weight}
        fit = fits["strong"]
        if fit is not None:
            target = 0.5 * oracle.beta1
            check("strong_fast_rate_vs_oracle",
                  abs(fit.fast_rate - target) <= _RATE_TOLERANCE * target,
                  f"fit {fit.fast_rate:.6g} vs beta1/2 {target:.6g}")
            check("strong_slow_rate_vs_oracle",
                  abs(fit.slow_rate - oracle.lambda2)
                  <= _RATE_TOLERANCE * oracle.lambda2,
                  f"fit {fit.slow_rate:.6g} vs lambda2 {oracle.lambda2:.6g}")
        if dark.count > 0:
            target = 1.0 / oracle.lambda2
            check("dark_mean_vs_oracle",
                  abs(dark.mean_excess - target) <= _RATE_TOLERANCE * target,
                  f"mean dark excess {dark.mean_excess:.6g} vs 1/lambda2 "
                  f"{target:.6g}")

    if scheme is not None:
        expected = configuration_graph(scheme).expected_ordering
        ordering = analysis.weak_ordering(records, gap_threshold)
        frac = ordering.fraction(expected)
        report["ordering"] = {
            "expected": expected,
            "n_dark": ordering.n_dark,
            "n_before": ordering.n_before,
            "n_after": ordering.n_after,
            "fraction_expected": None if math.isnan(frac) else frac,
        }
        if ordering.n_before + ordering.n_after > 0:
            check(f"weak_{expected}_dark_ordering",
                  frac >= _ORDERING_MIN_FRACTION,
                  f"{frac:.4f} of classified dark periods have the weak "
                  f"photon {expected} the dark time")

    report["checks"] = checks
    report["pass"] = all(c["pass"] for c in checks)

    out_dir = Path(args.out) if args.out else emissions_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    _write_json(report_path, report)
    for label, samples in waits.items():
        if samples.size:
            edges, counts = analysis.waiting_histogram(samples)
            analysis.write_histogram_csv(
                out_dir / f"waiting_{label}_hist.csv", edges, counts)

    print(f"wrote {report_path}")
    for c in checks:
        print(f"  [{'PASS' if c['pass'] else 'FAIL'}] {c['name']}: {c['detail']}")
    if not checks:
        print("  (no oracle/ordering checks requested)")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shelvesim",
        description="Stochastic state-reduction trajectories for driven "
                    "two- and three-level emitters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate an ensemble and write emissions")
    run.add_argument("--scheme", help="key=value scheme/config file")
    run.add_argument("--trajectories", type=int, help="number of trajectories")
    run.add_argument("--t-max", dest="t_max", type=float, help="horizon per trajectory")
    run.add_argument("--seed", type=int, help="base seed for the ensemble")
    run.add_argument("--engine", choices=list(_ENGINES), help="trajectory engine")
    run.add_argument("--out", help="output directory")
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="write reference telegraph rates")
    oracle.add_argument("--scheme", help="key=value scheme file")
    oracle.add_argument("--out", help="output directory (default: .)")
    oracle.set_defaults(func=cmd_oracle)

    an = sub.add_parser("analyze", help="report on an emissions file")
    an.add_argument("--emissions", required=True, help="emissions.csv path")
    an.add_argument("--oracle", help="oracle JSON to compare rates against")
    an.add_argument("--gap-threshold", dest="gap_threshold", type=float,
                    help="dark-period detection threshold")
    an.add_argument("--t-max", dest="t_max", type=float,
                    help="trajectory horizon when no manifest is present")
    an.add_argument("--out", help="report directory (default: alongside emissions)")
    an.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemeError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except AnalysisError as exc:
        print(f"analysis failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
