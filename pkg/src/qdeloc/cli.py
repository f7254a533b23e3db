"""Command-line interface.

Verbs: ``exact``, ``tn``, ``oracle``, ``fit``, ``figure``, ``crosscheck``.
A flat key=value config file can seed any verb's options; explicit flags win
on conflict.  ``QDELOC_THREADS`` caps worker processes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import figures, harness, oracles
from .errors import QdelocError


def _parse_num_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def read_flat_config(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise QdelocError(f"config line without '=': {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip().strip('"').strip("'")
    return out


def _apply_config_defaults(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    overrides = read_flat_config(args.config)
    given = {a for a in sys.argv[1:] if a.startswith("--")}
    for key, val in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if f"--{key}" in given or f"--{attr}" in given:
            continue  # explicit flags win
        current = getattr(args, attr)
        if isinstance(current, bool):
            setattr(args, attr, val.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, attr, int(val))
        elif isinstance(current, float):
            setattr(args, attr, float(val))
        elif isinstance(current, list):
            setattr(args, attr, _parse_num_list(val))
        else:
            setattr(args, attr, val)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdeloc",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    pe = sub.add_parser("exact", help="statevector Monte Carlo ensemble")
    pe.add_argument("--d", type=int, default=2)
    pe.add_argument("--N", type=str, default="8")
    pe.add_argument("--depth", type=int, default=10)
    pe.add_argument("--q", type=str, default="2")
    pe.add_argument("--realizations", type=int, default=1000)
    pe.add_argument("--seed", type=int, default=42)
    pe.add_argument("--out", type=str, default="runs/exact.csv")
    pe.add_argument("--purity-cut", type=str, default="")
    pe.add_argument("--workers", type=int, default=None)
    pe.add_argument("--config", type=str, default=None)

    pt = sub.add_parser("tn", help="exact averaged tensor-network contraction")
    pt.add_argument("--d", type=int, default=2)
    pt.add_argument("--N", type=str, default="64")
    pt.add_argument("--q", type=str, default="2")
    pt.add_argument("--depth", type=int, default=30)
    pt.add_argument("--eps", type=float, default=1e-15)
    pt.add_argument("--chi-max", type=int, default=512)
    pt.add_argument("--out", type=str, default="runs/tn.csv")
    pt.add_argument("--purity", action="store_true")
    pt.add_argument("--cut", type=str, default="")
    pt.add_argument("--sum-bipartitions", action="store_true")
    pt.add_argument("--allow-large-q", action="store_true")
    pt.add_argument("--config", type=str, default=None)

    po = sub.add_parser("oracle", help="closed-form reference values (JSON)")
    osub = po.add_subparsers(dest="oracle_kind", required=True)
    ph = osub.add_parser("haar", help="stationary ensemble values")
    ph.add_argument("--d", type=int, default=2)
    ph.add_argument("--N", type=int, default=12)
    ph.add_argument("--q", type=int, default=2)
    pw = osub.add_parser("walk", help="absorbing-walk purity series")
    pw.add_argument("--d", type=int, default=2)
    pw.add_argument("--N", type=int, default=16)
    pw.add_argument("--cut", type=int, default=8)
    pw.add_argument("--depth", type=int, default=20)

    pf = sub.add_parser("fit", help="fit the exponential saturation law")
    pf.add_argument("--in", dest="input", type=str, required=True,
                    help="tn-engine CSV produced by `qdeloc tn`")
    pf.add_argument("--d", type=int, default=2)
    pf.add_argument("--q", type=int, default=2)
    pf.add_argument("--window", type=str, default="",
                    help="inclusive t_min,t_max override")
    pf.add_argument("--out", type=str, default="")

    pg = sub.add_parser("figure", help="reproduce a reference figure at desk scale")
    pg.add_argument("figure_id", choices=figures.FIGURE_IDS)
    pg.add_argument("--scale", type=str, default="desk")
    pg.add_argument("--out-dir", type=str, default="runs/figures")
    pg.add_argument("--seed", type=int, default=42)

    pc = sub.add_parser("crosscheck", help="cross-engine consistency report")
    pc.add_argument("--d", type=int, default=2)
    pc.add_argument("--N", type=int, default=8)
    pc.add_argument("--q", type=int, default=2)
    pc.add_argument("--depth", type=int, default=4)
    pc.add_argument("--realizations", type=int, default=20000)
    pc.add_argument("--seed", type=int, default=7)
    pc.add_argument("--negative-control", action="store_true",
                    help="corrupt the hop weight; the walk check must fail")
    pc.add_argument("--out", type=str, default="")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args, parser)
    except QdelocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.verb == "exact":
        _apply_config_defaults(args, parser)
        config = harness.ExperimentConfig(
            engine="exact", d=args.d,
            n_values=tuple(_parse_int_list(args.N)),
            q_values=tuple(_parse_num_list(args.q)),
            depth=args.depth, realizations=args.realizations, seed=args.seed,
            purity_cuts=tuple(_parse_int_list(args.purity_cut)),
            workers=args.workers, out=args.out)
        harness.run(config)
        print(f"wrote {args.out}")
        return 0

    if args.verb == "tn":
        _apply_config_defaults(args, parser)
        config = harness.ExperimentConfig(
            engine="tn", d=args.d,
            n_values=tuple(_parse_int_list(args.N)),
            q_values=tuple(int(q) for q in _parse_num_list(args.q)),
            depth=args.depth, eps=args.eps, chi_max=args.chi_max,
            purity_cuts=tuple(_parse_int_list(args.cut)) if args.purity else (),
            sum_bipartitions=args.sum_bipartitions,
            allow_large_q=args.allow_large_q,
            seed=0, out=args.out)
        harness.run(config)
        print(f"wrote {args.out}")
        return 0

    if args.verb == "oracle":
        if args.oracle_kind == "haar":
            h = oracles.HaarStationary(args.d, args.N, args.q)
            print(json.dumps({
                "d": h.d, "N": h.N, "q": h.q,
                "ipr": h.ipr, "ipr_log": h.ipr_log, "entropy": h.entropy,
                "ipr_second_moment": h.ipr_second_moment, "ipr_std": h.ipr_std,
            }, indent=2))
        else:
            sol = oracles.RandomWalkSolution(args.d, args.N, args.cut)
            series = [{"t": t, "purity": sol.purity(t)}
                      for t in range(args.depth + 1)]
            print(json.dumps({
                "d": args.d, "N": args.N, "cut": args.cut,
                "velocity": sol.velocity,
                "decay_base": oracles.decay_base(args.d),
                "series": series,
            }, indent=2))
        return 0

    if args.verb == "fit":
        series = _read_tn_csv(args.input)
        n_values = sorted({r.N for r in series.records
                           if r.d == args.d and r.q == args.q})
        window = None
        if args.window:
            lo, hi = _parse_int_list(args.window)
            window = (lo, hi)
        fit = harness.fit_from_series(series, args.d, args.q, n_values, window)
        payload = {
            "base": fit.base, "base_stderr": fit.base_stderr,
            "expected_base": oracles.decay_base(args.d),
            "alpha": fit.alpha, "alpha_stderr": fit.alpha_stderr,
            "prefactors": {str(k): v for k, v in fit.prefactors.items()},
            "per_n_bases": {str(k): v for k, v in fit.per_n_bases.items()},
            "r_squared": fit.r_squared,
            "windows": {str(k): list(v) for k, v in fit.windows.items()},
        }
        text = json.dumps(payload, indent=2)
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text)
            print(f"wrote {args.out}")
        else:
            print(text)
        return 0

    if args.verb == "figure":
        art = figures.reproduce_figure(args.figure_id, scale=args.scale,
                                       out_dir=args.out_dir, seed=args.seed)
        print(f"wrote {art.csv} {art.svg} {art.sidecar}")
        return 0

    if args.verb == "crosscheck":
        report = harness.crosscheck(d=args.d, N=args.N, q=args.q,
                                    depth=args.depth,
                                    realizations=args.realizations,
                                    seed=args.seed,
                                    corrupt_hop_weight=args.negative_control)
        text = json.dumps(report, indent=2)
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text)
        print(text)
        return 0 if report["all_pass"] else 1

    parser.error(f"unhandled verb {args.verb}")
    return 2


def _read_tn_csv(path: str) -> harness.ObservableSeries:
    import csv

    series = harness.ObservableSeries()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["value_kind"] != "ipr":
                continue
            value = float(row["value"])
            q = float(row["q"])
            log_value = (math.log(value) if not row.get("log_deficit")
                         else float(row["log_deficit"])
                         + oracles.haar_ipr_log(int(row["d"]), int(row["N"]), int(q)))
            series.append(harness.SeriesRecord(
                provenance="tn", d=int(row["d"]), N=int(row["N"]), q=q,
                t=int(row["t"]), value_kind="ipr", i_mean=value,
                log_value=log_value,
                s_annealed=log_value / (1.0 - q) if q != 1 else 0.0,
                eps=float(row["eps"]), chi_max_used=int(row["chi_max_used"])))
    return series


if __name__ == "__main__":
    raise SystemExit(main())
