import random

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpc, mpfr

from vsextic.fit.tables import DegenerateV, build_gV
from vsextic.numerics.hpoly import RemainderTooLarge
from vsextic.numerics.linalg import cross3, linear_solve
from vsextic.numerics.precision import digits
from vsextic.resolvent import eval_pv, pv_coeffs
from vsextic.solver import (
    Exhausted,
    NOISE_FACTOR,
    FastMap,
    NoLineConvergence,
    NotInFamily,
    SolveOptions,
    Trajectory,
    collapse_line,
    extract_roots,
    from_sextic,
    iterate_to_line,
    match_error,
    nearest_orbit,
    normalize,
    oracle_instance,
    polish,
    proj_dist,
    random_start,
    solve,
)


def proj_err(u, v):
    c = cross3(u, v)
    return max(abs(t) for t in c) / (max(abs(t) for t in u) * max(abs(t) for t in v))


@pytest.fixture(scope="module")
def inst(ref):
    return oracle_instance(ref, 0)


@pytest.fixture(scope="module")
def gv(tables, inst):
    return build_gV(tables, *inst.V)


@pytest.fixture(scope="module")
def conj(ctx, inst):
    """T_{x0} in the fixture context, for pulling special points back to w-space."""
    return ctx.param.t_matrix(inst.x0)


def pullback(t, y):
    w, res, _ = linear_solve(t, np.array(y, dtype=object))
    assert res < 1e-60
    return list(w)


# family membership


def test_from_sextic_recovers_V():
    rng = random.Random(3)
    for _ in range(5):
        v = (mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)), mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)))
        got = from_sextic(pv_coeffs(*v))
        assert max(abs(a - b) / abs(b) for a, b in zip(got, v)) < 1e-12


def test_from_sextic_z5_perturbed():
    c = pv_coeffs(mpc("0.3"), mpc("-0.2"))
    c[5] = c[5] * (1 + mpfr("1e-6"))
    with pytest.raises(NotInFamily) as e:
        from_sextic(c)
    assert e.value.index == 5


def test_from_sextic_z3_perturbed():
    c = pv_coeffs(mpc("0.3"), mpc("-0.2"))
    c[3] = c[3] * (1 + mpfr("1e-6"))
    with pytest.raises(NotInFamily) as e:
        from_sextic(c)
    assert e.value.index == 3


def test_V_zero_constant_term():
    i15 = mpc(0, 1) * gmpy2.sqrt(mpfr(15))
    want = (-3 * i15 - 5) / 2421378056250000
    assert abs(pv_coeffs(0, 0)[0] - want) / abs(want) < mpfr(10) ** -(digits() - 5)


# oracle


def test_oracle_sum_of_roots(inst):
    # sum of s_k equals minus the z^5 coefficient, -(1/90) i (5i + sqrt 15)
    want = -mpc(0, 1) * mpc(gmpy2.sqrt(mpfr(15)), 5) / 90
    assert abs(sum(inst.roots) - want) < mpfr(10) ** -(digits() - 20)


def test_oracle_matches_all_coefficients(inst):
    assert inst.coeff_error < mpfr(10) ** -(digits() - 25)
    for s in inst.roots:
        assert abs(eval_pv(*inst.V, s)) < mpfr(10) ** -(digits() - 30)


def test_oracle_rescaling_invariance(ref, inst):
    lam = mpc(1.7, -0.4)
    x = [lam * c for c in inst.x0]
    v = ref.V(x)
    assert max(abs(a - b) / abs(b) for a, b in zip(v, inst.V)) < mpfr(10) ** -(digits() - 20)
    s = ref.s_values(x)
    assert max(abs(a - b) for a, b in zip(s, inst.roots)) < mpfr(10) ** -(digits() - 20)


# iteration and collapse


def test_iteration_from_fixed_point(gv, conj, ctx):
    w = pullback(conj, ctx.special.orbit("36")[0].point)
    traj = iterate_to_line(FastMap(gv.g), np.array([complex(c) for c in w]))
    assert traj.point_step == 1 and traj.line_step is None


def test_iteration_cap_raises(gv):
    with pytest.raises(NoLineConvergence):
        iterate_to_line(FastMap(gv.g), random_start(random.Random(5)), max_iter=2)


def test_trajectory_iterates_normalized(gv):
    traj = iterate_to_line(FastMap(gv.g), random_start(random.Random(6)))
    for p in traj.points:
        assert abs(np.max(np.abs(p)) - 1) < 1e-12
    assert traj.converged


def test_line_flag_precedes_point_flag(gv):
    # 100 seeded runs; the line tolerance should be met strictly before the point tolerance in 90 of them
    g = FastMap(gv.g)
    opts = SolveOptions()
    rng = random.Random(1)
    line_first = 0
    for _ in range(100):
        p = normalize(random_start(rng))
        prev, lstep, pstep = None, None, None
        for k in range(1, opts.max_iter + 1):
            q, noise = g.with_noise(p)
            q = normalize(q)
            if proj_dist(p, q) < max(1e-9, NOISE_FACTOR * noise):
                pstep = k
            l = np.cross(p, q)
            if np.max(np.abs(l)) > 0:
                l = normalize(l)
                if lstep is None and prev is not None and proj_dist(prev, l) < opts.tol_line:
                    lstep = k
                prev = l
            p = q
            if pstep is not None:
                break
        line_first += lstep is not None and (pstep is None or lstep < pstep)
    assert line_first >= 90, f"line flag first in {line_first}/100 runs"


def test_collapse_exact_mirror(hi_ctx, tables, inst):
    # checked at table precision against the D = 115 digits the tables guarantee
    from vsextic.numerics.precision import working_precision

    with working_precision(tables.precision):
        gv = build_gV(tables, *hi_ctx.inv.V(inst.x0))
        t = hi_ctx.param.t_matrix(inst.x0)
        cov = list(np.array(hi_ctx.table.reflections[7].mirror, dtype=object).dot(t))
        rng = random.Random(2)
        imgs = [gv.psi(cross3(cov, [mpc(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)])) for _ in range(2)]
        err = proj_err(imgs[0], imgs[1])
    assert err < mpfr(10) ** -(tables.meta["digits"] - 15)


def test_collapse_near_mirror(ctx, gv, conj, tables):
    r = ctx.table.reflections[7]
    cov = list(np.array(r.mirror, dtype=object).dot(conj))
    rng = random.Random(3)
    w = cross3(cov, [mpc(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)])
    nrm = max(abs(c) for c in w)
    w = [c / nrm + mpc(1e-8 * rng.gauss(0, 1), 1e-8 * rng.gauss(0, 1)) for c in w]
    a = collapse_line(gv, Trajectory([np.array([complex(c) for c in w])], []))
    # the collapsed point lies near some conjugated 45-point
    targets = [pullback(conj, p.point) for p in ctx.special.orbit("45")]
    d = min(proj_dist(np.array([complex(c) for c in a]), np.array([complex(c) for c in t])) for t in targets)
    assert d < 10 * SolveOptions().tol_line


def test_collapse_generic_input_not_45(gv, tables):
    a = collapse_line(gv, Trajectory([random_start(random.Random(9))], []))
    kind, err = nearest_orbit(tables, gv, a)
    assert kind != "45" or err > 1e-3


def test_polish_exact_45_point(ctx, gv, conj):
    w = pullback(conj, ctx.special.orbit("45")[0].point)
    p, steps = polish(gv, w)
    assert steps == 1
    assert proj_err(p, w) < 1e-60


def test_polish_from_nearby(ctx, gv, conj):
    w = pullback(conj, ctx.special.orbit("45")[4].point)
    w = [c / max(abs(x) for x in w) for c in w]
    rng = random.Random(4)
    a = [c + mpc(1e-3 * rng.gauss(0, 1), 1e-3 * rng.gauss(0, 1)) for c in w]
    p, steps = polish(gv, a, tol_point=1e-30)
    assert steps <= 25
    assert proj_err(p, w) < 1e-25


def test_polish_near_36_point_rejected_by_selector(ctx, gv, conj, tables):
    from vsextic.solver import SelectorInsane

    w = pullback(conj, ctx.special.orbit("36")[0].point)
    a = [c * (1 + mpc(1e-4, 0) * k) for k, c in enumerate(w)]
    p, _ = polish(gv, a)
    assert nearest_orbit(tables, gv, p)[0] == "36"
    with pytest.raises(SelectorInsane):
        extract_roots(tables, gv, p)


def test_extract_roots_at_conjugated_45_point(ctx, gv, conj, tables, inst):
    w = pullback(conj, ctx.special.orbit("45")[11].point)
    r1, r2, _ = extract_roots(tables, gv, w)
    assert match_error([r1, r2], inst.roots) < 1e-50


def test_mirror_neighbourhood_contracts(ctx, gv, conj):
    # distance to an invariant conjugated mirror shrinks superlinearly below 1e-2
    r = ctx.table.reflections[2]
    cov = np.array([complex(c) for c in np.array(r.mirror, dtype=object).dot(conj)])
    rng = random.Random(7)
    base = np.cross(cov, np.array([complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)]))
    g = FastMap(gv.g)

    def dist(p):
        p = normalize(p)
        return abs(cov @ p) / np.linalg.norm(cov)

    p = normalize(base) + 5e-3 * normalize(np.conj(cov))
    d = [dist(p)]
    for _ in range(2):
        p = normalize(g(p))
        d.append(dist(p))
    assert d[1] < d[0] ** 1.5 and d[2] < d[1] ** 1.5


# end to end


def test_solve_oracle_instance(tables, inst):
    rep = solve(tables, *inst.V, seed=0)
    assert rep.status == "ok"
    assert match_error(rep.roots, inst.roots) < 1e-10
    assert max(rep.residuals) < 1e-10


def test_solve_deterministic(tables, inst):
    a = solve(tables, *inst.V, seed=3).to_json()
    b = solve(tables, *inst.V, seed=3).to_json()
    assert a == b


def test_solve_from_sextic(tables, inst):
    rep = solve(tables, sextic=pv_coeffs(*inst.V), seed=1)
    assert match_error(rep.roots, inst.roots) < 1e-10


@pytest.mark.parametrize(
    "kw",
    [dict(max_iter=0), dict(retries=-1), dict(tol_line=0.0), dict(tol_point=1.5), dict(line_mode="middle")],
)
def test_options_validated(kw):
    with pytest.raises(ValueError):
        SolveOptions(**kw)


def _on_discriminant_locus(ref, offset):
    """x with C_1(x) = C_2(x) (two equal roots), shifted by ``offset`` in the last coordinate."""
    rng = random.Random(2)
    d = ref.conics[0] - ref.conics[1]
    a, b = mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)), mpc(rng.uniform(-1, 1), rng.uniform(-1, 1))
    f0, f1, fm = d([a, b, mpc(0)]), d([a, b, mpc(1)]), d([a, b, mpc(-1)])
    qa, qb = (f1 + fm) / 2 - f0, (f1 - fm) / 2
    t = (-qb + gmpy2.sqrt(qb * qb - 4 * qa * f0)) / (2 * qa)
    return [a, b, t + offset]


def test_repeated_root_is_refused(tables, ref):
    x = _on_discriminant_locus(ref, 0)
    with pytest.raises((DegenerateV, RemainderTooLarge, Exhausted)):
        solve(tables, *ref.V(x), seed=0)


def test_near_repeated_root_never_silently_wrong(tables, ref):
    x = _on_discriminant_locus(ref, mpc("1e-4"))
    truth = ref.s_values(x)
    for seed in (1, 2):
        try:
            rep = solve(tables, *ref.V(x), seed=seed)
        except Exhausted:
            continue
        assert match_error(rep.roots, truth) < 1e-10
