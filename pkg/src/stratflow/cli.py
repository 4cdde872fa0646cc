"""Command-line driver.

Exit codes: 0 success, 1 configuration error, 2 run stopped by a guard,
3 an expected property or check failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, lemmas, manufactured, scenarios, snapshot
from .grid import Grid
from .profiles import Stratification
from .rearrangement import decompose_levels, energy_gap, vertical_rearrangement
from .transport import ConfigError, RunConfig, run

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_PROPERTY = 0, 1, 2, 3

log = logging.getLogger("stratflow")


def _fmt(x):
    return "%.17g" % (x + 0.0)  # folds -0.0 into 0


def _metadata(config, preset, seed):
    return {"code": f"stratflow {__version__}", "preset": preset, "seed": seed,
            "grid": {"n1": config.n1, "n2": config.n2, "fd_order": config.fd_order,
                     "quadrature": config.quadrature},
            "config": config.to_dict()}


def write_diagnostics(path, records, meta):
    """CSV with ``#`` metadata lines, a header row and 17-digit floats."""
    lines = ["# " + json.dumps(meta, sort_keys=True), ",".join(diagnostics.COLUMNS)]
    lines += [",".join(_fmt(v) for v in r.as_tuple()) for r in records]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def read_series_csv(path):
    """``{column: array}`` from a diagnostics or plain ``t,value`` CSV."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(line for line in fh if not line.startswith("#")) if row]
    header, body = rows[0], rows[1:]
    try:
        float(header[0])
        body, header = rows, ["t", "value"][: len(rows[0])]
    except ValueError:
        pass
    data = np.array([[float(v) for v in row] for row in body])
    return {name: data[:, i] for i, name in enumerate(header)}


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _resolve_config(args):
    preset = args.preset
    if preset:
        base = scenarios.get_preset(preset).config
        expected = scenarios.get_preset(preset).expected
    else:
        base, expected = RunConfig(), scenarios._BASE_TAGS
    if args.config:
        base = RunConfig.from_file(args.config, base)
    config = RunConfig.from_mapping(_overrides(args.set), base)
    return config, preset or "custom", expected


def _summary(result, expected, meta):
    recs = result.records
    props = scenarios.evaluate_properties(recs, expected) if len(recs) >= 3 else {}
    d = diagnostics.dissipation_series(recs) if len(recs) >= 3 else np.empty((0, 3))
    fits = {}
    t = np.array([r.t for r in recs])
    for name in ("E", "K"):
        try:
            fits[name] = lemmas.fit_power_law(
                lemmas.Trajectory.clipped(t, np.array([getattr(r, name) for r in recs])),
                *scenarios.FIT_WINDOW).exponent
        except ValueError:
            fits[name] = None
    return dict(meta, status=result.status, message=result.message, samples=len(recs),
                fitted_exponents=fits,
                identity_residual_max={"resid_E": float(d[:, 1].max()) if len(d) else 0.0,
                                       "resid_K": float(d[:, 2].max()) if len(d) else 0.0},
                drift=result.drift, properties=props)


def cmd_run(args):
    config, preset, expected = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _metadata(config, preset, args.seed)
    index = []
    snapdir = out / "snapshots"

    def on_snapshot(k, state):
        snapdir.mkdir(exist_ok=True)
        name = f"theta_{k:07d}.bin"
        snapshot.write(snapdir / name, state.theta)
        index.append({"sample": k, "t": state.t, "file": name})

    log.info("running %s: %s", preset, config)
    result = run(config, threads=args.threads, snapshots_every=args.snapshots_every,
                 on_snapshot=on_snapshot)
    write_diagnostics(out / "diagnostics.csv", result.records, meta)
    if index:
        (snapdir / "index.json").write_text(json.dumps(dict(meta, snapshots=index), indent=2) + "\n")
    summary = _summary(result, expected, meta)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if not result.ok:
        log.error("guard stop: %s", result.message)
        return EXIT_GUARD
    failed = [tag for tag, v in summary["properties"].items() if not v["pass"]]
    for tag in failed:
        log.warning("property %s failed: %s", tag, summary["properties"][tag])
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_presets(args):
    print(json.dumps([p.to_json() for p in scenarios.PRESETS.values()], indent=2))
    return EXIT_OK


def cmd_rearrange(args):
    field = snapshot.read(args.snapshot)
    grid = Grid(field.shape[0], field.shape[1], args.fd_order)
    strat = Stratification.parse(args.rho_s) if args.rho_s else None
    if strat is not None:
        field = field + strat(grid.x2)[None, :]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    star = vertical_rearrangement(grid, field)
    with open(out / "rearrangement.csv", "w", newline="\n") as fh:
        fh.write("x2,f_star\n")
        for x, v in zip(grid.x2, star):
            fh.write(f"{_fmt(x)},{_fmt(v)}\n")
    dec = decompose_levels(grid, field, strat)
    gap = energy_gap(grid, field, star=star)
    info = {"gap": gap, "levels_valid": dec.valid, "column": dec.column}
    if dec.valid:
        with open(out / "levels.csv", "w", newline="\n") as fh:
            fh.write("s,phi1," + ",".join(f"h_{i}" for i in range(grid.n1)) + "\n")
            for j, s in enumerate(dec.s_grid):
                vals = [s, dec.phi1[j], *dec.h[:, j]]
                fh.write(",".join(_fmt(v) for v in vals) + "\n")
        info["half_h2_integral"] = dec.half_h2_integral(grid)
        info["estimates"] = dec.estimates
    print(json.dumps(info, indent=2))
    return EXIT_OK


def _finite(x):
    return float(x) if np.isfinite(x) else None


def _verdict_json(v):
    return {"status": v.status, "margin": _finite(v.margin), "value": _finite(v.value),
            "bound": _finite(v.bound), "note": v.note}


def cmd_lemmas(args):
    data = read_series_csv(args.csv)
    t = data["t"]
    window = (args.t_min, args.t_max)
    report = {}
    if "E" in data and "K" in data:
        res = lemmas.cascade_suite(t, data["E"], data["K"], data["u2_l2sq"],
                                   a=data["theta_h3"] ** 2, window=window)
        report = {"exponent": res["fit"].exponent, "r2": res["fit"].r2, "n": res["n"]}
        if "C" in res:
            report["C"] = res["C"]
            report["lemma22_g"] = _verdict_json(res["lemma22"].g)
            report["lemma22_h"] = _verdict_json(res["lemma22"].h)
            if "lemma23" in res:
                report["lemma23"] = _verdict_json(res["lemma23"])
            report["lemma21"] = _verdict_json(res["lemma21"])
    else:
        col = args.column or [c for c in data if c != "t"][0]
        tr = lemmas.Trajectory.clipped(t, data[col])
        fit = lemmas.fit_power_law(tr, *window)
        report = {"column": col, "exponent": fit.exponent, "r2": fit.r2, "prefactor": fit.prefactor}
        if args.n is not None and args.E is not None:
            report["lemma23"] = _verdict_json(lemmas.lemma23_check(tr, args.n, args.E, args.alpha))
    print(json.dumps(report, indent=2))
    verdicts = [v for k, v in report.items() if k.startswith("lemma")]
    return EXIT_OK if all(v["status"] == lemmas.HOLDS for v in verdicts) else EXIT_PROPERTY


def cmd_manufactured(args):
    rows = manufactured.convergence_table(args.model, args.fd_order, args.levels)
    print(f"{'n2':>6} {'max_error':>12} {'pde_residual':>13} {'order':>7}")
    for r in rows:
        print(f"{r.n2:6d} {r.error:12.4e} {r.pde_residual:13.4e} {r.order:7.3f}")
    order = manufactured.observed_order(rows)
    floor = manufactured.ORDER_FLOOR[args.fd_order]
    print(f"observed order {order:.3f} (required >= {floor})")
    return EXIT_OK if order >= floor else EXIT_PROPERTY


def cmd_report(args):
    data = read_series_csv(Path(args.run) / "diagnostics.csv" if Path(args.run).is_dir() else args.run)
    t = data.pop("t")
    names = args.series or list(data)
    out = open(args.out, "w", newline="\n") if args.out else sys.stdout
    try:
        out.write("t,series_name,value\n")
        for i, ti in enumerate(t):
            for name in names:
                out.write(f"{_fmt(ti)},{name},{_fmt(data[name][i])}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="stratflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stratflow {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--seed", type=int, default=0, help="recorded in every output header")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a preset or config and write diagnostics")
    r.add_argument("--preset")
    r.add_argument("--config", help="flat key = value file of RunConfig fields")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    r.add_argument("--out", default="out")
    r.add_argument("--snapshots-every", type=int, default=None, metavar="N")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)

    sub.add_parser("presets", help="list presets as JSON").set_defaults(func=cmd_presets)

    a = sub.add_parser("rearrange", help="rearrangement and level decomposition of a snapshot")
    a.add_argument("snapshot")
    a.add_argument("--rho-s", help="add this background to the snapshot field first")
    a.add_argument("--fd-order", type=int, default=4, choices=(2, 4))
    a.add_argument("--out", default="rearranged")
    a.set_defaults(func=cmd_rearrange)

    lm = sub.add_parser("lemmas", help="decay lemmas on a diagnostics or t,value CSV")
    lm.add_argument("csv")
    lm.add_argument("--t-min", type=float, default=scenarios.FIT_WINDOW[0])
    lm.add_argument("--t-max", type=float, default=scenarios.FIT_WINDOW[1])
    lm.add_argument("--column")
    lm.add_argument("--n", type=float)
    lm.add_argument("--E", type=float)
    lm.add_argument("--alpha", type=float, default=1.0)
    lm.set_defaults(func=cmd_lemmas)

    m = sub.add_parser("manufactured", help="solver convergence against exact solutions")
    m.add_argument("--model", choices=("ipm", "stokes"), default="ipm")
    m.add_argument("--levels", type=int, default=3)
    m.add_argument("--fd-order", type=int, default=4, choices=(2, 4))
    m.set_defaults(func=cmd_manufactured)

    rp = sub.add_parser("report", help="long-format t,series_name,value CSV")
    rp.add_argument("run", help="run directory or diagnostics CSV")
    rp.add_argument("--series", action="append")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, snapshot.SnapshotError, FileNotFoundError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
