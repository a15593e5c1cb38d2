"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 no valid estimate.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import ROUND_HALF_UP, Decimal

from . import __version__
from .datasets import DATASETS, resolve_table
from .estimators import (
    chao_bunge_estimate,
    chao_estimate,
    default_cutoff,
    hm_estimate,
    wlrm_estimate,
    ztnb_mle_estimate,
)
from .freq_model import FrequencyTableError, ratio_points
from .inference import gof_chisq, parametric_bootstrap
from .simulation import load_study_specs, reports_to_csv, run_study, truncation_sweep
from .wls import WeightScheme, wls_fit

EXIT_OK, EXIT_INPUT, EXIT_NO_ESTIMATE = 0, 1, 2
ALL_METHODS = ("wlrm", "hm", "chao", "chao-bunge", "ztnb-ml")


def round_half_away(value: float, digits: int = 0) -> float:
    """Round half away from zero (Python's round() is half-to-even)."""
    q = Decimal(1).scaleb(-digits)
    d = Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP)
    return float(d)


def _fmt(value, digits=0):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "*"
    r = round_half_away(value, digits)
    return f"{r:.{digits}f}"


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _m_for(method: str, t, m_arg):
    if m_arg != "auto":
        return int(m_arg)
    if method in ("wlrm", "hm"):
        return default_cutoff(t)
    if method == "chao-bunge":
        return 10
    if method == "chao":
        return 2
    return t.max_count


def _run_method(method, t, m, scheme):
    if method == "wlrm":
        return wlrm_estimate(t, m, scheme)
    if method == "hm":
        return hm_estimate(t, m, scheme)
    if method == "chao":
        return chao_estimate(t)
    if method == "chao-bunge":
        return chao_bunge_estimate(t, m)
    return ztnb_mle_estimate(t, m)


def _parse_m(text):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("m must be 'auto' or an integer") from None
    if value < 2:
        raise argparse.ArgumentTypeError("m must be >= 2")
    return value


def _load(spec):
    try:
        return resolve_table(spec)
    except KeyError as exc:
        raise _InputError(exc.args[0]) from None
    except (FrequencyTableError, OSError) as exc:
        raise _InputError(f"cannot read {spec!r}: {exc}") from None


class _InputError(Exception):
    pass


def cmd_estimate(args, out) -> int:
    t = _load(args.data)
    scheme = WeightScheme.parse(args.weights)
    methods = ALL_METHODS if args.method == "all" else (args.method,)
    if t.n < 100:
        _warn(f"n = {t.n:g} < 100: the variance approximation may be poor; consider --se bootstrap")
    records = []
    for method in methods:
        res = _run_method(method, t, _m_for(method, t, args.m), scheme)
        rec = res.to_dict()
        rec["gof"] = None
        if res.fit is not None and res.valid:
            g = gof_chisq(t, res.fit)
            rec["gof"] = {"chisq": g.chisq, "df": g.df, "p_value": g.p_value,
                          "gaps": list(g.gaps)}
            if res.extra.get("skipped"):
                _warn(f"{res.method}: ratio points skipped at x = {res.extra['skipped']}")
        if method == "wlrm" and args.se == "bootstrap" and res.valid:
            boot = parametric_bootstrap(t, res.m_used, scheme, B=args.B, seed=args.seed)
            rec["se_formula"] = rec["se"]
            rec["se"] = boot.se
            rec["bootstrap"] = {"B": boot.B, "seed": boot.seed, "failed": boot.n_failed,
                                "ci": list(boot.percentile_ci), "level": boot.level,
                                "flagged": boot.flagged}
        records.append(rec)

    if args.format == "json":
        doc = {"dataset": t.name, "n": t.n, "max_count": t.max_count,
               "weights": scheme.value, "se_method": args.se, "results": records}
        json.dump(doc, out, indent=2)
        out.write("\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["method", "N_hat", "f0_hat", "se", "m", "valid", "reason", "gof_p"])
        for r in records:
            w.writerow([r["method"], r["N_hat"], r["f0_hat"], r["se"], r["m_used"], r["valid"],
                        r["reason"] or "", (r["gof"] or {}).get("p_value", "")])
    else:
        out.write(f"dataset: {t.name}  n = {t.n:g}  max count = {t.max_count}\n")
        out.write(f"{'method':<10} {'N_hat':>10} {'SE':>10} {'p':>7} {'m':>4}  status\n")
        for r in records:
            p = (r["gof"] or {}).get("p_value")
            raw = r["N_hat"]
            status = "ok" if r["valid"] else f"* {r['reason']}"
            shown = _fmt(raw) if r["valid"] else ("*" if raw is None else f"({_fmt(raw)})")
            out.write(f"{r['method']:<10} {shown:>10} {_fmt(r['se'], 1):>10} "
                      f"{_fmt(p, 3):>7} {r['m_used']:>4}  {status}\n")
            if args.verbose and r.get("fit"):
                f = r["fit"]
                out.write(f"{'':<10} gamma={f['gamma_hat']:.6g} delta={f['delta_hat']:.6g} "
                          f"var_gamma={f['var_gamma']:.6g} (unscaled {f['var_gamma_unscaled']:.6g}) "
                          f"se_unscaled={_fmt(r['extra'].get('se_unscaled'), 1)}\n")
    return EXIT_OK if any(r["valid"] for r in records) else EXIT_NO_ESTIMATE


def cmd_ratio(args, out) -> int:
    t = _load(args.data)
    m = default_cutoff(t) if args.m == "auto" else args.m
    pts = ratio_points(t, m)
    if pts.skipped:
        _warn(f"no ratio at x = {list(pts.skipped)} (zero frequency)")
    fitted = None
    if args.with_fit:
        if len(pts) < 2:
            raise _InputError("fewer than 2 ratio points; cannot fit")
        fit = wls_fit(pts, t, WeightScheme.parse(args.weights))
        fitted = fit.predict(pts.x)
    w = csv.writer(out, lineterminator="\n")
    col = "log_ratio" if args.log else "ratio"
    w.writerow(["x", col] + (["fitted"] if fitted is not None else []))
    for i, x in enumerate(pts.x):
        val = pts.y[i] if args.log else math.exp(pts.y[i])
        row = [int(x), repr(float(val))]
        if fitted is not None:
            fv = fitted[i] if args.log else math.exp(fitted[i])
            row.append(repr(float(fv)))
        w.writerow(row)
    return EXIT_OK


def cmd_gof(args, out) -> int:
    t = _load(args.data)
    m = default_cutoff(t) if args.m == "auto" else args.m
    res = wlrm_estimate(t, m, WeightScheme.parse(args.weights))
    if not res.valid:
        print(f"error: WLRM fit failed ({res.reason})", file=sys.stderr)
        return EXIT_NO_ESTIMATE
    g = gof_chisq(t, res.fit, m)
    p = "NA" if g.p_value is None else f"{g.p_value:.6g}"
    out.write(f"# dataset={t.name} m={m} chisq={g.chisq:.6g} df={g.df} p={p}\n")
    if g.gaps:
        out.write(f"# zero cells inside 1..m: {list(g.gaps)}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["x", "observed", "fitted", "residual"])
    for x, obs, fit, r in g.residual_rows():
        w.writerow([x, f"{obs:g}", repr(float(fit)), repr(float(r))])
    return EXIT_OK


def _parse_range(text, t):
    if text is None:
        hi = t.tail[0] if t.tail else t.max_count
        return list(range(3, max(hi, 3) + 1))
    values = []
    for part in text.split(","):
        if ":" in part or "-" in part:
            lo, hi = part.replace("-", ":").split(":")
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values


def cmd_sensitivity(args, out) -> int:
    t = _load(args.data)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ALL_METHODS or m == "chao":
            raise _InputError(f"method {m!r} has no truncation point")
    try:
        m_values = _parse_range(args.m_range, t)
        rows = truncation_sweep(t, methods, m_values, args.weights)
    except ValueError as exc:
        raise _InputError(str(exc)) from None
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["m", "method", "N_hat", "N_rounded", "valid"])
    for m, method, N, valid in rows:
        w.writerow([m, method, repr(float(N)), _fmt(N), valid])
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    try:
        specs = load_study_specs(args.spec)
    except (OSError, ValueError, KeyError) as exc:
        raise _InputError(f"cannot load study config: {exc}") from None
    if args.replicates:
        from dataclasses import replace
        specs = [replace(s, replicates=args.replicates) for s in specs]
    text = reports_to_csv(run_study(s) for s in specs)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratiopop",
        description="Population size estimation from zero-truncated frequency counts.",
        epilog="Exit codes: 0 success, 1 input error, 2 no valid estimate.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    data_help = f"built-in dataset ({', '.join(DATASETS)}) or path to a table file"
    weights = dict(choices=["full", "diag", "identity"], default="diag")

    p = sub.add_parser("estimate", help="estimate the population size")
    p.add_argument("data", help=data_help)
    p.add_argument("--method", choices=ALL_METHODS + ("all",), default="wlrm")
    p.add_argument("--m", type=_parse_m, default="auto")
    p.add_argument("--weights", **weights)
    p.add_argument("--se", choices=["formula", "bootstrap"], default="formula")
    p.add_argument("--B", type=int, default=500, help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ratio", help="ratio-plot data as CSV")
    p.add_argument("data", help=data_help)
    p.add_argument("--m", type=_parse_m, default="auto")
    p.add_argument("--log", action="store_true", help="emit log ratios")
    p.add_argument("--with-fit", action="store_true", help="add the fitted regression line")
    p.add_argument("--weights", **weights)
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("gof", help="chi-square goodness of fit and residuals")
    p.add_argument("data", help=data_help)
    p.add_argument("--m", type=_parse_m, default="auto")
    p.add_argument("--weights", **weights)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("sensitivity", help="estimates across truncation points")
    p.add_argument("data", help=data_help)
    p.add_argument("--methods", default="wlrm,chao-bunge")
    p.add_argument("--m-range", default=None, help="e.g. 3:24 or 3,5,8 (default 3..max)")
    p.add_argument("--weights", **weights)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("simulate", help="run Monte Carlo studies from a config file")
    p.add_argument("spec", help="INI-style study config")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--replicates", type=int, help="override replicate count")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run(argv) -> tuple:
    """Run the CLI in-process; returns ``(exit_code, stdout_text)``."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()
