"""Command-line entry point: ``rabistark <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError, RabiStarkError
from .model import Branch, critical_coupling
from .oracle import analytic_observables, oracle_gap, oracle_level_data
from .runner import (
    CACHE_ENV,
    Cache,
    CachedEvaluator,
    SweepConfig,
    critical_coupling_of,
    fmt_float,
    load_config,
    read_series_csv,
    resolve_cache_dir,
    run_sweep,
    size_params,
    size_tag,
    sweep_peaks,
)
from .scaling import Ansatz, PeakResult, TableConfig, collapse, exponent_table, fit_power_law
from .spectra import ground_energy_derivatives

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("rabistark")


class UsageError(Exception):
    pass


def _window(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("window needs 0 < LO < HI")
    return lo, hi


def _load_sweep(args) -> SweepConfig:
    try:
        data = load_config(args.config, args.set or [])
        if getattr(args, "output_dir", None):
            data["output_dir"] = args.output_dir
        if getattr(args, "workers", None):
            data["workers"] = args.workers
        return SweepConfig.from_dict(data)
    except (ParameterError, ValueError, TypeError, KeyError, OSError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}") from None


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=lambda o: repr(o))
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_sweep(args) -> int:
    config = _load_sweep(args)
    result = run_sweep(config, cache_dir=args.cache_dir)
    for path in result.files:
        print(path)
    print(f"manifest: {result.manifest_path}")
    print(f"eigensolves={result.eigensolves} cache_hits={result.cache_hits} cache_misses={result.cache_misses}")
    for p in result.failures:
        print(f"FAILED {p.observable} size={p.size_label} index={p.index}: {p.error}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_NUMERICAL


def cmd_fit(args) -> int:
    series, _ = read_series_csv(args.input)
    if args.reflect:
        series = type(series)(series.size_label, series.size_kind, np.abs(series.abscissa), series.values,
                              series.abscissa_kind)
    fit = fit_power_law(series, args.window)
    _emit(fit.to_dict(), args.json)
    return EXIT_OK


def cmd_collapse(args) -> int:
    series_set, peaks = [], {}
    for path in args.inputs:
        s, meta = read_series_csv(path)
        series_set.append(s)
        if "g_m" in meta:
            peaks[s.size_label] = PeakResult(float(meta["g_m"]), float(meta["chi_max"]), s.size_label)
    res = collapse(series_set, args.beta, args.nu, Ansatz(args.ansatz), peaks, min_series=args.min_series)
    if args.master:
        Path(args.master).parent.mkdir(parents=True, exist_ok=True)
        with open(args.master, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# schema=1\nsize_label,x,y,side\n")
            for size, x, y, side in res.master:
                fh.write(f"{fmt_float(size)},{fmt_float(x)},{fmt_float(y)},{side}\n")
    _emit(res.to_dict(), args.json)
    return EXIT_OK


def cmd_peak(args) -> int:
    config = _load_sweep(args)
    ev = CachedEvaluator(Cache(resolve_cache_dir(config, args.cache_dir)), config.chi_method, config.solver_tol)
    peaks = sweep_peaks(config, ev)
    _emit([p.to_dict() for p in peaks.values()], args.json)
    return EXIT_OK


def cmd_derivatives(args) -> int:
    config = _load_sweep(args)
    ev = CachedEvaluator(Cache(resolve_cache_dir(config, args.cache_dir)), config.chi_method, config.solver_tol)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for size in config.sizes or [math.nan]:
        model, _ = size_params(config, size)
        if config.abscissa == "reduced_t":
            g_c = critical_coupling_of(model, config.branch)
            grid = [g_c * (1 - t) for t in config.grid]
        else:
            grid = list(config.grid)
        curve = ground_energy_derivatives(model, grid, config.convergence, evaluate=ev)
        path = out / f"derivatives{size_tag(config, size)}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# schema=1\n# size_label={fmt_float(size)}\n# step={fmt_float(curve.step)}\ng,e0,d1,d2\n")
            for row in zip(curve.grid, curve.e0, curve.d1, curve.d2):
                fh.write(",".join(fmt_float(v) for v in row) + "\n")
        lo, hi = curve.grid[2], curve.grid[-3]
        g_min, d2_min = curve.interior_min_d2(lo, hi)
        print(f"{path}  min d2={d2_min:.6g} at g={g_min:.6g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    branch = Branch(args.branch)
    g_c = critical_coupling(args.delta, branch)
    rows = []
    for n in range(args.levels):
        lv = oracle_level_data(args.delta, args.g, n, branch)
        rows.append({"n": n, "energy": lv.energy, "chi": lv.chi, "r": lv.r, "c_n": lv.c_n, "d_n": lv.d_n,
                     "norm": lv.norm})
    print(f"delta={args.delta} g={args.g} branch={branch.value} g_c={g_c:.12g} lambda={args.g / g_c:.12g}")
    print(f"{'n':>3} {'energy':>20} {'chi':>14} {'r':>14} {'c_n':>12} {'d_n':>12} {'norm':>12}")
    for r in rows:
        print(f"{r['n']:>3} {r['energy']:>20.14f} {r['chi']:>14.8g} {r['r']:>14.8g} {r['c_n']:>12.8g} "
              f"{r['d_n']:>12.8g} {r['norm']:>12.8g}")
    if args.levels >= 2:
        print(f"gap = {oracle_gap(args.delta, args.g, branch):.14g}")
    obs = analytic_observables(args.delta, args.g / g_c, 0, branch)
    print(f"closed forms (n=0): mean_photon={obs.mean_photon:.8g} delta_x={obs.delta_x:.8g} "
          f"chi_f_full={obs.chi_f_full:.8g} chi_f_asymptotic={obs.chi_f_asymptotic:.8g}")
    if args.json:
        _emit({"levels": rows, "closed_forms": obs.__dict__}, args.json)
    return EXIT_OK


def cmd_table1(args) -> int:
    data = {}
    if args.config:
        try:
            data = load_config(args.config, args.set or [])
            config = TableConfig(**{k: v for k, v in data.items() if k != "cache_dir"})
        except (ParameterError, ValueError, TypeError, OSError) as exc:
            raise UsageError(f"bad table config: {exc}") from None
    else:
        config = TableConfig()
    cache_dir = args.cache_dir or data.get("cache_dir") or os.environ.get(CACHE_ENV)
    ev = CachedEvaluator(Cache(cache_dir), config.chi_method) if cache_dir else None
    table = exponent_table(config, ev)
    print(f"{'observable':<26}{'column':<6}{'value':>10}{'target':>10}{'tol':>7}  result")
    for c in table.cells:
        status = "PASS" if c.passed else ("ERROR " + c.error if c.error else "FAIL")
        print(f"{c.observable:<26}{c.column:<6}{c.value:>10.4f}{c.target:>10.4f}{c.tolerance:>7.3f}  {status}")
    for name, r in table.ratios.items():
        print(f"{name:<26}y_L/y_N={r['y_L/y_N']:.4f} nu={r['nu']:.4f} "
              f"{'PASS' if r['ratio_passed'] else 'FAIL'}")
    if args.json:
        _emit(table.to_dict(), args.json)
    return EXIT_OK if table.all_passed else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rabistark", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def config_cmd(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="JSON config path or shipped recipe name (e.g. fig2a)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted config key")
        sp.add_argument("--cache-dir", help="cache directory (default $RABISTARK_CACHE_DIR or <output_dir>/cache)")
        sp.set_defaults(func=func)
        return sp

    sp = config_cmd("sweep", cmd_sweep, "run a sweep and write CSV series plus manifest")
    sp.add_argument("--output-dir")
    sp.add_argument("--workers", type=int)
    sp = config_cmd("peak", cmd_peak, "locate susceptibility peaks for every size of a config")
    sp.add_argument("--json", help="also write the result here")
    sp = config_cmd("derivatives", cmd_derivatives, "ground-energy derivative curves")
    sp.add_argument("--output-dir")

    sp = sub.add_parser("fit", help="power-law fit of one CSV series")
    sp.add_argument("--input", required=True)
    sp.add_argument("--window", type=_window, help="abscissa window LO:HI")
    sp.add_argument("--reflect", action="store_true", help="fit against |abscissa|")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("collapse", help="collapse residual of several CSV series")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--ansatz", choices=[a.value for a in Ansatz], required=True)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--nu", type=float, required=True)
    sp.add_argument("--min-series", type=int, default=3)
    sp.add_argument("--master", help="write master-curve CSV here")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_collapse)

    sp = sub.add_parser("oracle", help="closed-form levels and observables at |U| = 1")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--g", type=float, required=True)
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--branch", choices=[b.value for b in Branch], default="plus")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("table1", help="fit the full exponent table and check each cell")
    sp.add_argument("config", nargs="?", help="table config (e.g. table1)")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--cache-dir")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_table1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rabistark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RabiStarkError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
