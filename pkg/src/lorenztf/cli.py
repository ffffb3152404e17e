"""Command-line front end.

Each subcommand writes one CSV (to ``--out DIR`` or stdout) whose first line
is a comment with the config digest and tool version, followed by a header
row.  ``--json`` adds a JSON mirror.  Exit codes: 0 success (or gap),
1 error, 2 no-gap, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib.metadata import PackageNotFoundError, version

from . import cylinders as cyl
from . import equilibrium as eq
from . import pressure as pr
from .config import RunConfig
from .errors import LorenzError
from .lorenz_map import boundary_periodic_point

EXIT_OK, EXIT_ERROR, EXIT_NO_GAP, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {"gap": EXIT_OK, "no-gap": EXIT_NO_GAP, "inconclusive": EXIT_INCONCLUSIVE}


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _header(cfg: RunConfig) -> str:
    return f"config_sha256={cfg.digest()} version={tool_version()}"


def _rows_csv(cfg, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {_header(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(cfg, name: str, text: str, payload, out_dir, as_json: bool):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
            fh.write(text)
        if as_json:
            with open(os.path.join(out_dir, f"{name}.json"), "w") as fh:
                json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
                fh.write("\n")
    else:
        sys.stdout.write(text)
        if as_json:
            sys.stdout.write(json.dumps(_jsonable(payload), sort_keys=True) + "\n")


# -- subcommands -------------------------------------------------------------------

def cmd_cylinders(cfg: RunConfig, args) -> int:
    lmap = cfg.build_map()
    n = cfg.num("run", "depth", kind=int)
    if n < 1:
        raise UsageError("depth must be >= 1")
    cyls = cyl.touching(lmap, n, cfg.subset(lmap))
    text = cyl.to_csv(cyls, _header(cfg))
    payload = {"header": _header(cfg), "rows": [
        {"depth": c.depth, "word": c.word_str, "lo": c.lo, "hi": c.hi} for c in cyls]}
    _emit(cfg, "cylinders", text, payload, args.out, args.json)
    return EXIT_OK


def cmd_pressure(cfg: RunConfig, args) -> int:
    lmap = cfg.build_map()
    phi = cfg.build_potential(lmap)
    n_max = cfg.num("run", "n_max", kind=int)
    n_min = cfg.num("run", "n_min", kind=int)
    g = pr.gap_check(lmap, phi, n_max, n_min=n_min, samples=cfg.num("run", "samples", kind=int),
                     threads=args.threads, method=cfg.get("run", "method"))
    pp = pr.prop_partial_check(lmap, phi, n_max, samples=cfg.num("run", "samples", kind=int),
                               threads=args.threads)
    rows = []
    for est in (g.total, g.boundary):
        for (n, a), c, lz in zip(est.sequence, est.cylinder_counts, est.log_z):
            rows.append([est.subset, n, c, repr(lz), repr(a)])
    text = _rows_csv(cfg, ["subset", "n", "cylinders_touching", "log_Zn", "avg"], rows)
    payload = {"header": _header(cfg), "total": g.total.to_dict(),
               "boundary": g.boundary.to_dict(), "margin": g.margin, "verdict": g.verdict,
               "M": pp.M, "C_bound": pp.C_bound, "C_series": pp.C_series,
               "C_nonincreasing": pp.holds}
    _emit(cfg, "pressure", text, payload, args.out, args.json)
    print(f"total={g.total.value:.4f} boundary={g.boundary.value:.4f} "
          f"margin={g.margin:.4f} M={pp.M:.4f} C={pp.C_bound:.3g} verdict={g.verdict}",
          file=sys.stderr if not args.out else sys.stdout)
    return VERDICT_EXIT[g.verdict]


def cmd_periodic(cfg: RunConfig, args) -> int:
    lmap = cfg.build_map()
    k_max = cfg.num("run", "k_max", kind=int)
    rows, payload = [], []
    for side in cfg.sides():
        for k in range(1, k_max + 1):
            o = boundary_periodic_point(lmap, k, side)
            rows.append([side, k, o.period, o.word_str, repr(o.point), repr(o.residual)])
            payload.append({"side": side, "k": k, "period": o.period, "word": o.word_str,
                            "point": o.point, "residual": o.residual, "orbit": list(o.orbit)})
    text = _rows_csv(cfg, ["side", "k", "period", "word", "point", "residual"], rows)
    _emit(cfg, "periodic", text, {"header": _header(cfg), "rows": payload}, args.out, args.json)
    return EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    lmap = cfg.build_map()
    if cfg.get("potential", "kind") != "phase_family":
        cfg.set("potential", "kind", "phase_family")
    scan = eq.phase_scan(lmap, cfg.t_grid(), n_max=cfg.num("run", "n_max", kind=int),
                         k_max=cfg.num("run", "k_max", kind=int),
                         depth_rule=cfg.get("potential", "depth_rule", "zero-chain"),
                         samples=cfg.num("run", "samples", kind=int), threads=args.threads)
    text = eq.scan_csv(scan, _header(cfg))
    payload = {"header": _header(cfg), "bracket": scan.bracket,
               "formula_range": list(scan.formula_range), "flips": scan.flips,
               "monotone": scan.monotone,
               "rows": [{"t": r.t, "verdict": r.variation_verdict,
                         "free_energy": r.orbit_free_energy, "pressure": r.pressure_estimate,
                         "gap": r.gap_verdict, "regime": r.regime, "error": r.error}
                        for r in scan.rows]}
    _emit(cfg, "scan", text, payload, args.out, args.json)
    return EXIT_OK


def cmd_battery(cfg: RunConfig, args) -> int:
    lmap = cfg.build_map()
    phi = cfg.build_potential(lmap)
    rep = eq.theorem_a_battery(lmap, phi, k_max=cfg.num("run", "k_max", kind=int),
                               n_max=cfg.num("run", "n_max", kind=int),
                               samples=cfg.num("run", "samples", kind=int), threads=args.threads)
    text = eq.battery_csv(rep, _header(cfg))
    payload = {"header": _header(cfg), "margin": rep.margin, "verdict": rep.gap_verdict,
               "a": rep.a, "b": rep.b, "c": rep.c, "d": rep.d,
               "rows": [r.__dict__ for r in rep.rows]}
    _emit(cfg, "battery", text, payload, args.out, args.json)
    return EXIT_OK if rep.passed else EXIT_ERROR


COMMANDS = {"cylinders": cmd_cylinders, "pressure": cmd_pressure, "periodic": cmd_periodic,
            "scan": cmd_scan, "battery": cmd_battery}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lorenztf", description="Pressure and equilibrium diagnostics "
                "for Lorenz-like expanding maps.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI file with [map], [potential], [run], [output]")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--json", action="store_true", help="also write a JSON mirror")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results unaffected)")
    p.add_argument("--depth", type=int, help="override [run] depth and n_max")
    p.add_argument("--seed", type=int, help="recorded in the config digest")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig.load(args.config)
        if args.depth is not None:
            if args.depth < 1:
                raise UsageError("--depth must be >= 1")
            cfg.set("run", "depth", args.depth)
            cfg.set("run", "n_max", args.depth)
        if args.seed is not None:
            cfg.set("run", "seed", args.seed)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        args.out = args.out or cfg.get("output", "dir") or None
        args.json = args.json or cfg.get("output", "json", "false").lower() in ("1", "true", "yes")
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lorenztf: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (LorenzError, ValueError, OSError) as exc:
        print(f"lorenztf: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
