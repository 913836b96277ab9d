"""Internal consistency checks behind `vsextic selftest`."""
from __future__ import annotations

import random
import time


class _Runner:
    def __init__(self):
        self.results = []

    def check(self, name: str, fn):
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
            status = "PASS" if ok else "FAIL"
        except Exception as e:  # a crashing check is a failed check
            status, detail = "FAIL", f"{type(e).__name__}: {e}"
        self.results.append({"name": name, "status": status, "detail": detail,
                             "seconds": round(time.perf_counter() - t0, 2)})

    def note(self, name: str, detail: str):
        self.results.append({"name": name, "status": "NOTE", "detail": detail, "seconds": 0.0})


def _numerics(r: _Runner):
    from .numerics.hpoly import HPoly, exact_divide, hessian_det, jacobian_det, bordered_hessian_det
    from .numerics.linalg import resultant_1d

    y1, y2, y3 = (HPoly.variable(i) for i in range(3))
    sq = y1 * y1 + y2 * y2 + y3 * y3
    r.check("hessian of the sum of squares", lambda: (abs(hessian_det(sq).coeffs()[0] - 8) < 1e-30, "8"))
    r.check("jacobian of coordinates", lambda: (abs(jacobian_det(y1, y2, y3).coeffs()[0] - 1) < 1e-30, "1"))
    bh = bordered_hessian_det(sq, y1).coeffs()[0]
    r.check("bordered hessian convention", lambda: (abs(bh + 4) < 1e-30, f"{complex(bh).real:g}"))

    def div():
        q, rem = exact_divide(y1 * y1 * y2, y1)
        return q.rel_diff(y1 * y2) < 1e-30 and rem < 1e-30, f"remainder {float(rem):.1e}"

    r.check("exact division", div)
    r.check("resultant of coprime linears", lambda: (abs(abs(resultant_1d([-1, 1], [-2, 1])) - 1) < 1e-30, "|res| = 1"))


def _line_model(r: _Runner):
    from .gmap import (
        DERIVED_CD_R2,
        PRINTED_CD_R2,
        FactorizationFailed,
        printed_p,
        printed_q,
        printed_resultant_nonzero,
        verify_critical_factorization,
    )
    from .render import LineModel, RenderSpec, disk_check, render_line_basins, symmetry_check

    r.check("printed p, q coprime", lambda: (printed_resultant_nonzero(), "gcd is constant"))

    def wr():
        rep = verify_critical_factorization(printed_p(), printed_q(), r2=DERIVED_CD_R2)
        return True, f"a^5 b^4 c^3 d^3 with r^2 = {DERIVED_CD_R2}, constant {rep.constant}"

    r.check("wronskian factorization (derived c, d)", wr)
    try:
        verify_critical_factorization(printed_p(), printed_q(), r2=PRINTED_CD_R2)
        r.note("printed c, d", "divide the Wronskian")
    except FactorizationFailed as e:
        r.note("printed c, d", f"do not divide the Wronskian ({e}); derived r^2 = {DERIVED_CD_R2} used")

    def render():
        img = render_line_basins(RenderSpec(128, 500))
        s = img.stats
        return s["labels_present"] == 16 and s["grid_symmetric"], f"{s['labels_present']} labels, resolved {s['resolved_fraction']:.4f}"

    r.check("basin render 128^2", render)
    m = LineModel.printed()
    r.check("negation symmetry", lambda: (lambda s: (s["mismatches"] == 0, f"{s['mismatches']} of {s['samples']}"))(symmetry_check(m, 2000)))
    r.check("immediate basins", lambda: (lambda s: (not s["failed"], f"failed {s['failed']}"))(disk_check(m, samples=64)))


def _group(r: _Runner, full: bool):
    from .numerics.precision import PRECOMPUTE_BITS, working_precision
    from .pipeline import build_context

    with working_precision(PRECOMPUTE_BITS):
        state = {}

        def ctx():
            c = build_context(equivariants=full)
            state["ctx"] = c
            t = c.table
            ok = t.order == 1080 and t.extended_order == 2160 and len(t.reflections) == 45 and len(c.conics.systems) == 2
            return ok, f"{t.order}/{t.extended_order} elements, {len(t.reflections)} reflections, {len(c.conics.systems)} conic systems"

        r.check("group and conics", ctx)
        c = state.get("ctx")
        if c is None:
            return
        want = {"36": 36, "45": 45, "60": 60, "60bar": 60}
        r.check("special points", lambda: (c.special.counts() == want, str(c.special.counts())))
        r.check("calibration", lambda: (c.inv.report["relation_error"] < 1e-50,
                                        f"system {c.inv.system}, relation error {float(c.inv.report['relation_error']):.1e}"))

        def resolvent():
            from .resolvent import coeffs_from_roots, pv_coeffs
            from .group.invariants import random_point

            x = random_point(random.Random(5))
            got = coeffs_from_roots(c.inv.s_values(x))
            want_ = pv_coeffs(*c.inv.V(x))
            err = max(abs(a - b) for a, b in zip(got, want_)) / max(abs(b) for b in want_)
            return err < 1e-50, f"relative {float(err):.1e}"

        r.check("resolvent at a random point", resolvent)
        if not full:
            return
        from .gmap import base_locus_check, build_g, critical_poly_check, restrict_to_line

        def g():
            gm = build_g(c.inv)
            state["gm"] = gm
            return gm.remainder < 1e-80, f"division remainder {float(gm.remainder):.1e}"

        r.check("X g divisible by X", g)
        gm = state.get("gm")
        if gm is None:
            return
        r.check("critical polynomial", lambda: (critical_poly_check(gm, c.inv.X) is not None, "C_g = beta X^2"))
        r.check("line restriction", lambda: (lambda lr: (lr.mismatch < 1e-40, f"mismatch {float(lr.mismatch):.1e}"))(
            restrict_to_line(gm, c.table, c.special)))
        r.check("base locus", lambda: (lambda b: (b.empty, f"min root separation {float(b.min_root_separation):.2e}"))(
            base_locus_check(gm, c.table, c.inv.X)))


def _solver(r: _Runner, tables_path):
    from .cli import obtain_tables
    from .numerics.precision import PRECOMPUTE_BITS, working_precision
    from .solver import Exhausted, ReferenceInvariants, match_error, oracle_instance, solve

    tables = obtain_tables(tables_path, log=lambda *_: None)
    with working_precision(PRECOMPUTE_BITS):
        ref = ReferenceInvariants(tables)
    for seed in range(3):
        def one(seed=seed):
            with working_precision(PRECOMPUTE_BITS):
                inst = oracle_instance(ref, seed)
            try:
                rep = solve(tables, *inst.V, seed=seed)
            except Exhausted:
                return False, "exhausted"
            err = match_error(rep.roots, inst.roots)
            return err < 1e-10, f"root match {err:.1e} in {rep.wall_time:.1f}s"

        r.check(f"oracle solve seed {seed}", one)


def run_selftest(level: str = "quick", tables_path=None) -> list[dict]:
    r = _Runner()
    _numerics(r)
    _line_model(r)
    _group(r, full=(level == "full"))
    if level == "full":
        _solver(r, tables_path)
    return r.results
