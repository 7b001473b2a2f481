"""
Command-line front end.

    dcmicrogrid run <scenario-file> --out <csv>
    dcmicrogrid case <1..5> --out <csv>
    dcmicrogrid summary <csv> --window <s>
    dcmicrogrid audit <csv> [--rated-kw 165] [--bound 0.001]

Exit codes: 0 success, 2 usage error, 3 input error (missing or
unparsable file), 4 run fault, 5 audit failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import csvio
from .engine import NUMERIC_CHANNELS, run, summarize_columns
from .presets import CASES, case_preset
from .scenario_file import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_FAULT = 4
EXIT_AUDIT = 5

# channels shown by ``summary``
SUMMARY_CHANNELS = ("p_pv", "p_load", "p_grid", "p_bat", "soc", "v_dc", "q_grid", "balance_residual")
_UNITS = dict((attr, header) for header, attr in csvio.COLUMNS)


def _err(msg):
    print(f"dcmicrogrid: error: {msg}", file=sys.stderr)


def _simulate(scenario, out):
    result = run(scenario)
    csvio.write_csv(out, result.records)
    s = result.summary
    print(f"wrote {s.n_records} records to {out}")
    print(f"steps: {s.steps}  max |balance residual|: {s.max_abs_residual:.3g} kW")
    if s.load_shed_time > 0:
        print(f"load shed for {s.load_shed_time:.3f} s")
    if s.fault is not None:
        print(f"FAULT ({s.fault.kind}) at t={s.fault.time:.4f} s: {s.fault.message}")
        return EXIT_FAULT
    return EXIT_OK


def cmd_run(args):
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        _err(f"file not found: {args.scenario}")
        return EXIT_INPUT
    except OSError as exc:
        _err(f"cannot read {args.scenario}: {exc}")
        return EXIT_INPUT
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_INPUT
    return _simulate(scenario, args.out)


def cmd_case(args):
    return _simulate(case_preset(args.number), args.out)


def _load_csv(path):
    try:
        return csvio.read_csv(path)
    except FileNotFoundError:
        _err(f"file not found: {path}")
    except (OSError, ValueError) as exc:
        _err(str(exc))
    return None


def cmd_summary(args):
    data = _load_csv(args.csv)
    if data is None:
        return EXIT_INPUT
    try:
        stats = summarize_columns(data["t"], {c: data[c] for c in NUMERIC_CHANNELS}, args.window)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(f"steady state over the last {args.window:g} s")
    print(f"{'channel':<22}{'mean':>14}{'min':>14}{'max':>14}")
    for name in SUMMARY_CHANNELS:
        st = stats[name]
        print(f"{_UNITS[name]:<22}{st.mean:>14.6g}{st.min:>14.6g}{st.max:>14.6g}")
    return EXIT_OK


def cmd_audit(args):
    data = _load_csv(args.csv)
    if data is None:
        return EXIT_INPUT
    limit = args.bound * args.rated_kw
    residuals = data["balance_residual"]
    if not residuals:
        _err("no records to audit")
        return EXIT_INPUT
    worst = max(range(len(residuals)), key=lambda i: abs(residuals[i]))
    violations = sum(1 for r in residuals if abs(r) > limit)
    print(f"records: {len(residuals)}  bound: {limit:.6g} kW")
    print(f"max |residual|: {abs(residuals[worst]):.6g} kW at t={data['t'][worst]:g} s")
    if violations:
        print(f"FAIL: {violations} records exceed the bound")
        return EXIT_AUDIT
    print("PASS")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dcmicrogrid", description="PV-battery DC microgrid simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("case", help="simulate a built-in case study")
    p.add_argument("number", type=int, choices=CASES)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_case)

    p = sub.add_parser("summary", help="steady-state table of a CSV run")
    p.add_argument("csv")
    p.add_argument("--window", type=float, default=1.0, help="trailing window in s (default 1)")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("audit", help="check the power-balance residual column")
    p.add_argument("csv")
    p.add_argument("--rated-kw", type=float, default=165.0, help="rated PV power (default 165)")
    p.add_argument("--bound", type=float, default=1e-3, help="bound as a fraction of rated power")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
