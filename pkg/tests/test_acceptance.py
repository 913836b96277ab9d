"""Acceptance criteria 1-7, one summary line each.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``); the
lines appear in the "acceptance criteria" section at the end of the pytest report.
"""
import random
import sys
import time
from collections import Counter

import pytest
from gmpy2 import mpfr

from conftest import ACCEPTANCE_LINES

from vsextic.fit.engine import Sampler, invariant_fit, t_map
from vsextic.fit.tables import intrinsic_invariants
from vsextic.gmap import (
    DERIVED_CD_R2,
    PRINTED_CD_R2,
    FactorizationFailed,
    NonConstantQuotient,
    base_locus_check,
    critical_poly_check,
    printed_p,
    printed_q,
    restrict_to_line,
    verify_critical_factorization,
)
from vsextic.group.invariants import random_point
from vsextic.group.valentiner import reynolds_invariant
from vsextic.render import LineModel, RenderSpec, disk_check, render_line_basins, symmetry_check
from vsextic.resolvent import alpha, coeffs_from_roots, eval_pv, pv_coeffs
from vsextic.solver import Exhausted, match_error, oracle_instance, solve


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def record_sub(n, part, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}{part} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def test_1_group(ctx):
    t = ctx.table
    t0 = time.perf_counter()
    f1 = reynolds_invariant(t, 6, seed=5)
    f2 = reynolds_invariant(t, 6, seed=9)
    _, resid = f1.proportionality(f2)
    seconds = ctx.timings["group"] + ctx.timings["conics"] + time.perf_counter() - t0
    systems = ctx.conics.systems
    checks = {
        "order 1080": t.order == 1080,
        "extended order 2160": t.extended_order == 2160,
        "45 reflections": len(t.reflections) == 45,
        "two 6-orbits of conics": len(systems) == 2 and all(len(s) == 6 for s in systems),
        "unique sextic invariant": resid < mpfr(10) ** -80,
        "runtime <= 120 s": seconds <= 120,
    }
    ok = all(checks.values())
    record(1, ok, f"|G| = {t.order}/{t.extended_order}, {len(t.reflections)} reflections, conic orbits "
                  f"{[len(s) for s in systems]}, sextic proportionality residual {float(resid):.1e}, {seconds:.1f}s")
    assert ok, [k for k, v in checks.items() if not v]


def test_2_special_points(ctx):
    sp = ctx.special
    counts = sp.counts()
    mult = {"36": 5, "45": 4, "60": 3, "60bar": 3}
    mult_ok = all(len(p.mirrors) == mult[p.kind] for p in sp.points)
    pairs = sum(len(p.mirrors) * (len(p.mirrors) - 1) // 2 for p in sp.points)
    patterns = set()
    for m in range(45):
        # cluster size on mirror m counts the other mirrors through the point
        c = Counter(len(p.mirrors) - 1 for p in sp.points if m in p.mirrors)
        patterns.add(tuple(sorted(c.items())))
    want = ((2, 8), (3, 4), (4, 4))  # 16 points per mirror
    ok = counts == {"36": 36, "45": 45, "60": 60, "60bar": 60} and mult_ok and pairs == 990 and patterns == {want}
    record(2, ok, f"points {counts}, multiplicities 5/4/3/3: {mult_ok}, pair count {pairs}, "
                  f"mirror patterns {sorted(patterns)} (cluster size: count)")
    assert ok


def test_3_calibration(ctx):
    inv = ctx.inv
    conics = ctx.conics.systems[inv.system]
    rng = random.Random(3003)
    a = alpha()
    mu3s = []
    for _ in range(20):
        x = random_point(rng)
        mu3s.append(inv.F(x) / (a * sum(c(x) ** 3 for c in conics)))
    spread = max(abs(m - mu3s[0]) for m in mu3s) / abs(mu3s[0])
    worst = mpfr(0)
    for _ in range(20):
        x = random_point(rng)
        want = pv_coeffs(*inv.V(x))
        got = coeffs_from_roots(inv.s_values(x))
        worst = max(worst, max(abs(g - w) / abs(w) for g, w in zip(got, want)))
    ok = spread < 1e-50 and worst < 1e-50
    record(3, ok, f"mu^3 spread over 20 x {float(spread):.1e}; worst relative P_V coefficient error over 20 x "
                  f"(7 coefficients) {float(worst):.1e}; conic system {inv.system}")
    assert ok


def test_4_g_map(ctx, gmap):
    t0 = time.perf_counter()
    results = {}
    results["a"] = (gmap.remainder < 1e-80, f"division remainder {float(gmap.remainder):.1e}")
    try:
        beta = critical_poly_check(gmap, ctx.inv.X, tol=mpfr(10) ** -80)
        results["b"] = (True, f"C_g / X^2 constant, beta = {complex(beta):.6g}")
    except NonConstantQuotient as e:
        results["b"] = (False, str(e))
    lr = restrict_to_line(gmap, ctx.table, ctx.special)
    results["c"] = (lr.mismatch < 1e-40, f"line restriction vs printed p, q: relative {float(lr.mismatch):.1e}")
    try:
        rep = verify_critical_factorization(printed_p(), printed_q(), r2=PRINTED_CD_R2)
        results["d"] = (True, f"Wronskian = const a^5 b^4 c^3 d^3 (printed c, d), constant {rep.constant}")
    except FactorizationFailed as e:
        results["d"] = (False, f"Wronskian with the printed c, d (r^2 = {PRINTED_CD_R2}): {e}")
    bl = base_locus_check(gmap, ctx.table, ctx.inv.X)
    results["e"] = (bl.empty, f"base locus empty: {bl.empty}, closest s/t roots on a mirror {float(bl.min_root_separation):.2e}")
    seconds = gmap.seconds + time.perf_counter() - t0
    for part, (ok, detail) in results.items():
        record_sub(4, part, ok, detail)
    # informational: the same factorization with the c, d that the printed p, q actually satisfy
    try:
        rep = verify_critical_factorization(printed_p(), printed_q(), r2=DERIVED_CD_R2)
        ACCEPTANCE_LINES.append(f"CRITERION 4d NOTE: with r^2 = {DERIVED_CD_R2} the factorization is exact, constant {rep.constant}")
    except FactorizationFailed as e:
        ACCEPTANCE_LINES.append(f"CRITERION 4d NOTE: derived c, d also fail: {e}")
    ok = all(v[0] for v in results.values()) and seconds <= 1800
    record(4, ok, f"parts {''.join(k for k, v in results.items() if v[0])} pass, "
                  f"{''.join(k for k, v in results.items() if not v[0]) or 'none'} fail; {seconds:.1f}s")
    assert ok


def test_5_fits(ctx, tables):
    inv, pc = ctx.inv, ctx.param
    core = max(tables.FV.holdout, tables.D.holdout)
    rng = random.Random(5005)
    worst_phi = worst_psi = mpfr(0)
    for _ in range(10):
        x, w = random_point(rng), random_point(rng)
        v1, v2 = pc.V(x)
        _, phi, psi, _ = intrinsic_invariants(tables, v1, v2)
        y, _ = t_map(pc, x, w)
        f = inv.F(x)
        worst_phi = max(worst_phi, abs(phi(w) * f**62 - inv.Phi(y)) / abs(inv.Phi(y)))
        worst_psi = max(worst_psi, abs(psi(w) * f**155 - inv.Psi(y)) / abs(inv.Psi(y)))
    x2 = invariant_fit("X2", lambda x: [inv.X(x) ** 2 / inv.F(x) ** 15], 15, Sampler(inv, 15), inv.V)
    hours = tables.meta["seconds"] / 3600
    ok = core < 1e-50 and worst_phi < 1e-40 and worst_psi < 1e-40 and len(x2.basis) == 18 and hours <= 4
    record(5, ok, f"holdout F_V {float(tables.FV.holdout):.1e}, D {float(tables.D.holdout):.1e}; round trip over 10 (x, w): "
                  f"Phi_V {float(worst_phi):.1e}, Psi_V {float(worst_psi):.1e}; X^2 fit {len(x2.basis)} terms, holdout "
                  f"{float(x2.holdout):.1e}; precompute {tables.meta['seconds']}s")
    assert ok


def test_6_solve(tables, ref):
    ok_count, worst_match, worst_res, worst_time = 0, 0.0, 0.0, 0.0
    failures = []
    reports = {}
    for seed in range(50):
        inst = oracle_instance(ref, seed)
        try:
            rep = solve(tables, *inst.V, seed=seed)
        except Exhausted as e:
            failures.append(seed)
            worst_time = max(worst_time, e.report.wall_time)
            continue
        err = match_error(rep.roots, inst.roots)
        res = max(float(abs(eval_pv(*inst.V, r))) for r in rep.roots)
        worst_time = max(worst_time, rep.wall_time)
        if err < 1e-10 and res < 1e-10:
            ok_count += 1
            worst_match = max(worst_match, err)
            worst_res = max(worst_res, res)
        else:
            failures.append(seed)
        if seed < 3:
            reports[seed] = rep.to_json()
    same = all(solve(tables, *oracle_instance(ref, s).V, seed=s).to_json() == reports[s] for s in reports)
    ok = ok_count >= 48 and worst_time <= 10 and same
    record(6, ok, f"{ok_count}/50 succeeded (failed seeds {failures}); worst root match {worst_match:.1e}, "
                  f"worst |P_V| {worst_res:.1e}; slowest {worst_time:.2f}s; repeat runs identical: {same}")
    assert ok


def test_7_render(tmp_path):
    model = LineModel.printed()
    t0 = time.perf_counter()
    img = render_line_basins(RenderSpec(1024, 500), out=tmp_path / "basins.ppm", model=model)
    seconds = time.perf_counter() - t0
    s = img.stats
    sym = symmetry_check(model, n=10_000)
    disks = disk_check(model, disk=1e-3)
    ok = (s["labels_present"] == 16 and s["resolved_fraction"] >= 0.99 and sym["mismatches"] == 0
          and s["grid_symmetric"] and not disks["failed"])
    record(7, ok, f"1024^2 in {seconds:.1f}s: {s['labels_present']} labels, resolved {100 * s['resolved_fraction']:.3f}%, "
                  f"z -> -z mismatches {sym['mismatches']}/{sym['samples']}, grid symmetric {s['grid_symmetric']}, "
                  f"non-monochromatic disks {disks['failed']}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
