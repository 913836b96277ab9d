"""Command line entry point: precompute, solve, oracle, render-line, selftest."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_mp(value):
    """A complex coefficient from text ('a+bi') or JSON ([re, im] or a number)."""
    from .numerics.precision import bigc, parse_complex

    if isinstance(value, bool):
        raise UsageError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return bigc(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float, str)) for v in value):
        return _parse_mp(f"{value[0]},{value[1]}")
    try:
        return parse_complex(str(value))
    except ValueError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------------
# tables


def default_table_path(digits: int = 115) -> Path:
    env = os.environ.get("VSEXTIC_TABLES")
    if env:
        return Path(env)
    base = Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "vsextic"
    return base / f"tables-{digits}.vsx"


def obtain_tables(path: str | None, log=_err):
    from .fit.tables import load_tables, save_tables
    from .pipeline import precompute

    if path:
        return load_tables(path)
    p = default_table_path()
    if p.exists():
        return load_tables(p)
    log(f"no tables at {p}; running precompute (about a minute)")
    t = precompute(115, log=log)
    p.parent.mkdir(parents=True, exist_ok=True)
    save_tables(t, p)
    return t


# ---------------------------------------------------------------------------
# subcommands


def cmd_precompute(args) -> int:
    from .fit.engine import HoldoutFailure
    from .fit.tables import save_tables
    from .pipeline import precompute

    if args.digits < 30:
        raise UsageError("--digits must be at least 30")
    try:
        t = precompute(args.digits, seed=args.seed, threads=args.threads, log=_err)
    except HoldoutFailure as e:
        _err(f"precompute failed: {e}")
        return EXIT_VERIFY
    save_tables(t, args.out)
    worst = max([t.FV.holdout, t.D.holdout] + [f.holdout for f in t.selectors.fits.values()])
    print(f"wrote {args.out}: {t.precision} bits, worst holdout {float(worst):.2e}, {t.meta['seconds']}s")
    return EXIT_OK


def _solve_options(args):
    from .solver import SolveOptions

    try:
        return SolveOptions(
            tol_line=args.tol_line,
            tol_point=args.tol_point,
            tol_residual=args.tol_residual,
            max_iter=args.max_iter,
            retries=args.retries,
            line_mode=args.line_mode,
            rescue=not args.no_rescue,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _read_sextic(path: str) -> list:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read sextic file: {e}") from None
    coeffs = doc.get("coeffs") if isinstance(doc, dict) else doc
    if not isinstance(coeffs, list) or len(coeffs) != 7:
        raise UsageError("sextic file needs seven coefficients (low order first) under 'coeffs'")
    if isinstance(doc, dict) and doc.get("order") == "high-first":
        coeffs = coeffs[::-1]
    return [_parse_mp(c) for c in coeffs]


def _print_report(rep, as_json: bool) -> None:
    if as_json:
        print(json.dumps(rep.to_json(), indent=1))
        return
    from .numerics.precision import cfmt

    print(f"status   {rep.status}")
    for r, res in zip(rep.roots, rep.residuals):
        print(f"root     {cfmt(r, 25)}   |P_V| = {float(res):.2e}")
    print(f"retries  {rep.retries}   iterations pre {rep.iterations['pre']} polish {rep.iterations['polish']}")
    print(f"time     {rep.wall_time:.2f}s")
    for w in rep.warnings:
        print(f"warning  {w}")


def cmd_solve(args) -> int:
    from .fit.tables import DegenerateV
    from .numerics.hpoly import RemainderTooLarge
    from .solver import Exhausted, NotInFamily, solve

    opts = _solve_options(args)
    if args.sextic_file:
        sextic = _read_sextic(args.sextic_file)
        v1 = v2 = None
    else:
        if args.v1 is None or args.v2 is None:
            raise UsageError("give --v1 and --v2, or --sextic-file")
        sextic = None
        v1, v2 = _parse_mp(args.v1), _parse_mp(args.v2)
    tables = obtain_tables(args.tables)
    try:
        rep = solve(tables, v1, v2, seed=args.seed, opts=opts, sextic=sextic)
    except NotInFamily as e:
        _err(f"not in the P_V family: {e}")
        return EXIT_VERIFY
    except (DegenerateV, RemainderTooLarge) as e:
        _err(f"degenerate parameters: {e}")
        return EXIT_VERIFY
    except Exhausted as e:
        _print_report(e.report, args.json)
        return EXIT_VERIFY
    _print_report(rep, args.json)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .numerics.precision import PRECOMPUTE_BITS, working_precision
    from .solver import Exhausted, ReferenceInvariants, match_error, oracle_instance, solve

    if args.count < 1:
        raise UsageError("--count must be positive")
    opts = _solve_options(args)
    tables = obtain_tables(args.tables)
    with working_precision(PRECOMPUTE_BITS):
        ref = ReferenceInvariants(tables)
    ok = 0
    rows = []
    for k in range(args.count):
        seed = args.seed + k
        with working_precision(PRECOMPUTE_BITS):
            inst = oracle_instance(ref, seed)
        try:
            rep = solve(tables, *inst.V, seed=seed, opts=opts)
            err = match_error(rep.roots, inst.roots)
            good = err < opts.tol_residual and max(rep.residuals) < opts.tol_residual
        except Exhausted as e:
            rep, err, good = e.report, float("nan"), False
        ok += good
        rows.append({"seed": seed, "ok": bool(good), "match_error": err, "retries": rep.retries,
                     "seconds": round(rep.wall_time, 2)})
        if not args.json:
            print(f"seed {seed:6d}  {'ok  ' if good else 'FAIL'}  match {err:.1e}  retries {rep.retries}  {rep.wall_time:.2f}s")
    need = math.ceil(0.96 * args.count)
    if args.json:
        print(json.dumps({"instances": rows, "succeeded": ok, "required": need}, indent=1))
    else:
        print(f"{ok}/{args.count} succeeded (required {need})")
    return EXIT_OK if ok >= need else EXIT_VERIFY


def cmd_render(args) -> int:
    from .render import RenderSpec, render_line_basins

    try:
        spec = RenderSpec(args.res, args.iters, args.radius, args.extent, args.source)
    except ValueError as e:
        raise UsageError(str(e)) from None
    img = render_line_basins(spec, out=args.out)
    s = img.stats
    if args.json:
        print(json.dumps(s, indent=1))
    else:
        print(f"wrote {args.out}: {s['resolution']}x{s['resolution']}, {s['labels_present']} labels, "
              f"resolved {100 * s['resolved_fraction']:.3f}%, mean iterations {s['mean_iterations']:.2f}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.level, tables_path=args.tables)
    failed = [r for r in results if r["status"] == "FAIL"]
    if args.json:
        print(json.dumps({"level": args.level, "results": results, "failed": len(failed)}, indent=1))
    else:
        for r in results:
            print(f"{r['status']:4s}  {r['name']}: {r['detail']}")
        checks = [r for r in results if r["status"] != "NOTE"]
        print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------


def _add_solver_opts(p) -> None:
    p.add_argument("--tables", help="table file from 'precompute' (default: cached tables, built on first use)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--tol-line", type=float, default=1e-6)
    p.add_argument("--tol-point", type=float, default=1e-30)
    p.add_argument("--tol-residual", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--retries", type=int, default=10)
    p.add_argument("--line-mode", choices=("latest", "project"), default="latest")
    p.add_argument("--no-rescue", action="store_true", help="retry instead of following mirrors out of 36/60 limit points")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vsextic", description="Sextic solver driven by a Valentiner-symmetric map")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("precompute", help="build solver tables")
    p.add_argument("--digits", type=int, default=115)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("solve", help="find a pair of roots of P_V")
    p.add_argument("--v1")
    p.add_argument("--v2")
    p.add_argument("--sextic-file")
    _add_solver_opts(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="solve seeded instances with known roots")
    p.add_argument("--count", type=int, default=50)
    _add_solver_opts(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("render-line", help="basins of the line model")
    p.add_argument("--out", required=True)
    p.add_argument("--res", type=int, default=1024)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--radius", type=float, default=1e-6)
    p.add_argument("--extent", type=float, default=2.0)
    p.add_argument("--source", choices=("printed", "derived"), default="printed")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("selftest", help="internal consistency checks")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--tables")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return ap


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Turn '--v1 -0.5+1i' into '--v1=-0.5+1i' so argparse does not read the value as an option."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in ("--v1", "--v2") and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1][1:2] in "0123456789.ij":
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as e:
        _err(f"vsextic: {e}")
        return EXIT_USAGE
    except FileNotFoundError as e:
        _err(f"vsextic: {e}")
        return EXIT_USAGE
    except ValueError as e:
        # table files that fail to parse, have the wrong version or a bad checksum
        from .fit.tables import ChecksumMismatch, ParseError, VersionMismatch

        if isinstance(e, (ChecksumMismatch, ParseError, VersionMismatch)):
            _err(f"vsextic: {e}")
            return EXIT_VERIFY
        raise


if __name__ == "__main__":
    sys.exit(main())
