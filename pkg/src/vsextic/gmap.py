"""The critically finite 31-map g and checks of its printed properties."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .group.invariants import CalibratedInvariants, random_point
from .group.valentiner import GroupTable, SpecialPoints
from .numerics.hpoly import (
    HPoly,
    PolyMap3,
    RemainderTooLarge,
    cross_grad,
    exact_divide,
    jacobian_det,
)
from .numerics.linalg import cross3, lstsq, maxabs, null_space, polyroots, polyval, resultant
from .numerics.precision import digits


class NonConstantQuotient(ArithmeticError):
    pass


class NotInvariant(RuntimeError):
    pass


class FactorizationFailed(ArithmeticError):
    def __init__(self, factor: str, multiplicity: int, remainder):
        super().__init__(f"division by {factor} failed at multiplicity {multiplicity} (remainder {float(remainder):.2e})")
        self.factor = factor
        self.multiplicity = multiplicity


# Invariant-coefficient blocks of the degree-76 map X.g, as {(a, b, c): n} for n F^a Phi^b Psi^c.
XG_F_BLOCK = {(6, 0, 0): -162 * 67, (4, 1, 0): -162 * 812, (2, 2, 0): -162 * 699, (1, 0, 1): 162 * 741, (0, 3, 0): 162 * 150}
XG_PHI_BLOCK = {
    (7, 0, 0): -18 * 19,
    (5, 1, 0): 18 * 1016,
    (3, 2, 0): 18 * 13457,
    (2, 0, 1): -18 * 18,
    (1, 3, 0): 18 * 11970,
    (0, 1, 1): -18 * 13500,
}
XG_PSI_BLOCK = {
    (10, 0, 0): -76,
    (8, 1, 0): -564,
    (6, 2, 0): 5244,
    (5, 0, 1): -48672,
    (4, 3, 0): 66028,
    (3, 1, 1): -591336,
    (2, 4, 0): 232848,
    (1, 2, 1): -517752,
    (0, 5, 0): 70200,
    (0, 0, 2): 577125,
}

# The line model: g restricted to a mirror in symmetric coordinates is p(z)/q(z).
P_LINE = [-3, -465, -5735, -220565, -2034375, 6315475, -105496875, -555500625, -14597849625,
          10578808125, -52377193125, 21618140625, -169714828125, 219610490625, -87218015625, 60381703125]
Q_LINE = [5301, 114855, 4337985, 50285875, 96080625, 3491812875, 10578808125, 218967744375,
          -124987640625, 356051953125, 319720921875, 1544853515625, -2512373203125, 979878515625,
          -1191744140625, 115330078125]


def printed_p() -> list[int]:
    """Coefficients of p(z), index = power of z."""
    out = [0] * 31
    for j, c in enumerate(P_LINE):
        out[2 * j] = -15 * c
    return out


def printed_q() -> list[int]:
    out = [0] * 32
    for j, c in enumerate(Q_LINE):
        out[2 * j + 1] = c
    return out


def block_polynomial(block: dict, F: HPoly, Phi: HPoly, Psi: HPoly) -> HPoly:
    cache: dict = {}

    def power(p, n, key):
        if (key, n) not in cache:
            cache[(key, n)] = p**n
        return cache[(key, n)]

    acc = None
    for (a, b, c), n in block.items():
        t = power(F, a, "F") * power(Phi, b, "P") * power(Psi, c, "S")
        t = t.scale(n)
        acc = t if acc is None else acc + t
    return acc


def xg_combination(F: HPoly, Phi: HPoly, Psi: HPoly) -> PolyMap3:
    """The degree-76 map X.g assembled from any (F, Phi, Psi) with the right weights."""
    psi = cross_grad(F, Phi)
    phi = cross_grad(F, Psi)
    f = cross_grad(Phi, Psi)
    return (
        f * block_polynomial(XG_F_BLOCK, F, Phi, Psi)
        + phi * block_polynomial(XG_PHI_BLOCK, F, Phi, Psi)
        + psi * block_polynomial(XG_PSI_BLOCK, F, Phi, Psi)
    )


@dataclass
class GMap:
    g: PolyMap3
    remainder: mpfr
    beta: mpc | None = None
    line: "LineRestriction | None" = None

    def __call__(self, y):
        return self.g(y)


def build_g(inv: CalibratedInvariants, tol=None) -> GMap:
    xg = xg_combination(inv.F, inv.Phi, inv.Psi)
    g, rem = exact_divide(xg, inv.X, tol)
    return GMap(g, rem)


def critical_poly_check(gm: GMap, X: HPoly, tol=None) -> mpc:
    """beta with det J(g) = beta X^2; the quotient must be constant."""
    cg = jacobian_det(*gm.g)
    if cg.degree != 90:
        raise AssertionError("critical polynomial degree")
    tol = mpfr(10) ** -(digits() - 20) if tol is None else tol
    try:
        q, rem = exact_divide(cg, X * X, tol)
    except RemainderTooLarge as e:
        raise NonConstantQuotient(f"C_g not divisible by X^2: {e}") from e
    beta = q.coeffs()[0]
    gm.beta = beta
    return beta


# ---------------------------------------------------------------------------
# restriction to a mirror


@dataclass
class LineRestriction:
    p: list  # numerator coefficients, index = power
    q: list
    mobius: tuple  # (a, b, c, d): w = (a z + b) / (c z + d) from the raw line coordinate
    points: list  # the four 45-point images in the symmetric coordinate
    mirror: int
    scale: mpc = mpc(1)
    mismatch: mpfr = mpfr(0)

    def __call__(self, z):
        return polyval(self.p[::-1], z) / polyval(self.q[::-1], z)


def _line_frame(mirror):
    u = cross3(mirror, [mpc(1), mpc(mpfr(3) / 10), mpc(mpfr(7) / 10, mpfr(1) / 5)])
    v = cross3(mirror, u)
    return u, v


def _dft_coeffs(vals):
    n = len(vals)
    two_pi = 2 * gmpy2.const_pi()
    roots = [mpc(gmpy2.cos(two_pi * k / n), gmpy2.sin(two_pi * k / n)) for k in range(n)]
    return [sum((vals[k] * roots[(-k * j) % n] for k in range(n)), mpc(0)) / n for j in range(n)]


def _binary_restriction(g: PolyMap3, mirror, tol):
    """Binary forms S, T with g(s u + t v) = S u + T v on the mirror (coefficients in z = t/s)."""
    u, v = _line_frame(mirror)
    frame = np.array([[u[i], v[i]] for i in range(3)], dtype=object)
    n = g.degree + 1
    two_pi = 2 * gmpy2.const_pi()
    svals, tvals = [], []
    worst = mpfr(0)
    for k in range(n):
        z = mpc(gmpy2.cos(two_pi * k / n), gmpy2.sin(two_pi * k / n))
        y = [u[i] + z * v[i] for i in range(3)]
        gy = np.array(g(y), dtype=object)
        c, res = lstsq(frame, gy)
        worst = max(worst, res)
        svals.append(c[0])
        tvals.append(c[1])
    if worst > tol:
        raise NotInvariant(f"g moves the mirror off itself (residual {float(worst):.2e})")
    return _dft_coeffs(svals), _dft_coeffs(tvals), (u, v, frame)


def _mobius_from(z3, w3):
    m = np.array([[z3[i], 1, -w3[i] * z3[i], -w3[i]] for i in range(3)], dtype=object)
    ns = null_space(m, mpfr(10) ** -(digits() // 2))
    return tuple(ns[:, 0])


def symmetric_targets() -> list[mpc]:
    r = mpfr(60) ** (-mpfr(1) / 4)
    return [mpc(r, r), mpc(-r, r), mpc(-r, -r), mpc(r, -r)]


def _compose_line(scoef, tcoef, mob, deg: int):
    """Coefficients of the conjugated map w -> (a T + b S)/(c T + d S) at z = m^{-1}(w)."""
    a, b, c, d = mob
    n = deg + 1
    two_pi = 2 * gmpy2.const_pi()
    nums, dens = [], []
    for k in range(n + 1):
        w = mpc(gmpy2.cos(two_pi * k / (n + 1)), gmpy2.sin(two_pi * k / (n + 1))) * mpfr("0.9")
        s_, t_ = -c * w + a, d * w - b
        sz = sum((scoef[j] * t_**j * s_ ** (deg - j) for j in range(n)), mpc(0))
        tz = sum((tcoef[j] * t_**j * s_ ** (deg - j) for j in range(n)), mpc(0))
        nums.append(a * tz + b * sz)
        dens.append(c * tz + d * sz)
    # interpolate on the circle of radius 0.9
    pc = _dft_coeffs(nums)
    qc = _dft_coeffs(dens)
    r = mpfr("0.9")
    pc = [pc[j] / r**j for j in range(n + 1)]
    qc = [qc[j] / r**j for j in range(n + 1)]
    return pc[:n], qc[:n]


def restrict_to_line(gm: GMap, table: GroupTable, sp: SpecialPoints, mirror_index: int = 0, tol=None) -> LineRestriction:
    """g on a mirror in coordinates that put its four 45-points at 60^{-1/4}(+-1 +- i)."""
    tol = mpfr(10) ** -(digits() // 2) if tol is None else tol
    mirror = table.reflections[mirror_index].mirror
    scoef, tcoef, (u, v, frame) = _binary_restriction(gm.g, mirror, tol)
    pts = [p.point for p in sp.orbit("45") if mirror_index in p.mirrors]
    if len(pts) != 4:
        raise NotInvariant(f"mirror carries {len(pts)} 45-points, expected 4")
    zs = []
    for p in pts:
        c, _ = lstsq(frame, np.array(p, dtype=object))
        zs.append(c[1] / c[0])
    targets = symmetric_targets()
    p_ref = [mpc(c) for c in printed_p()]
    q_ref = [mpc(c) for c in printed_q()]
    best = None
    deg = gm.g.degree
    for perm in itertools.permutations(range(4)):
        w3 = [targets[perm[i]] for i in range(4)]
        mob = _mobius_from(zs[:3], w3)
        a, b, c, d = mob
        w4 = (a * zs[3] + b) / (c * zs[3] + d)
        if abs(w4 - w3[3]) > tol:
            continue
        pc, qc = _compose_line(scoef, tcoef, mob, deg)
        # odd model: p even, q odd
        odd_err = max(
            max((abs(pc[j]) for j in range(1, deg + 1, 2)), default=mpfr(0)) / maxabs(pc),
            max((abs(qc[j]) for j in range(0, deg + 1, 2)), default=mpfr(0)) / maxabs(qc),
        )
        k = 31
        scale = q_ref[k] / qc[k]
        pn = [x * scale for x in pc]
        qn = [x * scale for x in qc]
        mism = max(
            max(abs(pn[j] - p_ref[j]) for j in range(31)) / maxabs(p_ref),
            max(abs(qn[j] - q_ref[j]) for j in range(32)) / maxabs(q_ref),
        )
        cand = (odd_err, mism, perm, mob, pn, qn, scale)
        if best is None or (cand[0], cand[1]) < (best[0], best[1]):
            best = cand
    if best is None:
        raise NotInvariant("no Mobius normalization matches the 45-point cross-ratio")
    odd_err, mism, perm, mob, pn, qn, scale = best
    lr = LineRestriction(pn, qn, mob, [targets[perm[i]] for i in range(4)], mirror_index, scale, mism)
    gm.line = lr
    return lr


# ---------------------------------------------------------------------------
# critical factorization (exact rational arithmetic where possible)


def _rpoly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _rpoly_divmod(num, den):
    num = list(num)
    q = [0] * max(len(num) - len(den) + 1, 1)
    for k in range(len(num) - len(den), -1, -1):
        c = num[k + len(den) - 1] / den[-1]
        q[k] = c
        for j, d in enumerate(den):
            num[k + j] -= c * d
    return q, num[: len(den) - 1]


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _deriv(p):
    return [j * p[j] for j in range(1, len(p))]


def wronskian(p, q):
    """p' q - p q' (index = power)."""
    a = _rpoly_mul(_deriv(p), q)
    b = _rpoly_mul(p, _deriv(q))
    n = max(len(a), len(b))
    a += [0] * (n - len(a))
    b += [0] * (n - len(b))
    return _trim([x - y for x, y in zip(a, b)])


QUARTIC_A = [Fraction(-1), 0, Fraction(30), 0, Fraction(15)]
QUARTIC_B = [Fraction(1), 0, 0, 0, Fraction(15)]

# c, d = 15 z^4 - (10 -+ i r) z^2 - 1. The listed value is r = 8 sqrt(8/3); the
# Wronskian of the listed p, q is instead divisible by the pair with r = 8 sqrt(5/3).
PRINTED_CD_R2 = Fraction(512, 3)
DERIVED_CD_R2 = Fraction(320, 3)


def quartic_cd(r2: Fraction = PRINTED_CD_R2) -> list:
    """c d = (15 z^4 - 10 z^2 - 1)^2 + r^2 z^4, rational even though c and d are not."""
    sq = _rpoly_mul([-1, 0, -10, 0, 15], [-1, 0, -10, 0, 15])
    sq[4] += Fraction(r2)
    return _trim([Fraction(x) for x in sq])


def quartic_c_d(r2: Fraction = PRINTED_CD_R2) -> tuple[list, list]:
    """c and d as mpc coefficient lists (index = power)."""
    r = gmpy2.sqrt(mpfr(r2.numerator) / r2.denominator)
    c = [mpc(-1), mpc(0), -mpc(10, -r), mpc(0), mpc(15)]
    d = [mpc(-1), mpc(0), -mpc(10, r), mpc(0), mpc(15)]
    return c, d


def quartic_roots(coeffs) -> list[mpc]:
    return polyroots([mpc(x) for x in coeffs][::-1])


def attractors(r2: Fraction = DERIVED_CD_R2) -> dict:
    """The 16 critical fixed points on the line model, grouped by type."""
    c, d = quartic_c_d(r2)
    return {
        "36": quartic_roots(QUARTIC_A),
        "45": quartic_roots(QUARTIC_B),
        "60": quartic_roots(c),
        "60bar": quartic_roots(d),
    }


@dataclass
class FactorizationReport:
    multiplicities: dict
    constant: object
    exact: bool
    residuals: dict = field(default_factory=dict)


def verify_critical_factorization(p, q, r2: Fraction = PRINTED_CD_R2, tol=None) -> FactorizationReport:
    """Divide the Wronskian by a^5 b^4 c^3 d^3; the quotient must be a constant.

    With integer or Fraction inputs the check is exact (c d is divided as one
    rational factor). Otherwise it runs in mpc with a relative remainder
    tolerance. ``r2`` is the squared imaginary coefficient in c and d.
    """
    exact = all(isinstance(x, (int, Fraction)) for x in list(p) + list(q))
    if exact:
        w = wronskian([Fraction(x) for x in p], [Fraction(x) for x in q])
        for name, fac, n in (("a", QUARTIC_A, 5), ("b", QUARTIC_B, 4), ("cd", quartic_cd(r2), 3)):
            for k in range(n):
                qq, rem = _rpoly_divmod(w, fac)
                if any(rem):
                    raise FactorizationFailed(name, k + 1, max(abs(x) for x in rem))
                w = _trim(qq)
        if len(w) != 1:
            raise FactorizationFailed("constant", 0, max(abs(x) for x in w[1:]))
        return FactorizationReport({"a": 5, "b": 4, "c": 3, "d": 3}, w[0], True)
    tol = mpfr(10) ** -(digits() // 2) if tol is None else mpfr(tol)
    w = wronskian([mpc(x) for x in p], [mpc(x) for x in q])
    c, d = quartic_c_d(r2)
    res = {}
    for name, fac, n in (("a", QUARTIC_A, 5), ("b", QUARTIC_B, 4), ("c", c, 3), ("d", d, 3)):
        fac = [mpc(x) for x in fac]
        for k in range(n):
            qq, rem = _rpoly_divmod(w, fac)
            r = maxabs(rem) / maxabs(w)
            res[f"{name}{k + 1}"] = r
            if r > tol:
                raise FactorizationFailed(name, k + 1, r)
            w = qq
    if len(w) > 1:
        r = max(abs(x) for x in w[1:]) / abs(w[0])
        res["constant"] = r
        if r > tol:
            raise FactorizationFailed("constant", 0, r)
    return FactorizationReport({"a": 5, "b": 4, "c": 3, "d": 3}, w[0], False, res)


# ---------------------------------------------------------------------------
# base locus


def _projective_roots(coeffs) -> list:
    """Roots of a binary form as points [1 : z] or [0 : 1] (index = power of z)."""
    scale = maxabs(coeffs)
    deg = len(coeffs) - 1
    lead = deg
    while lead > 0 and abs(coeffs[lead]) <= scale * mpfr(10) ** -(digits() // 2):
        lead -= 1
    out = [(mpc(1), z) for z in polyroots(coeffs[: lead + 1][::-1])]
    out += [(mpc(0), mpc(1))] * (deg - lead)
    return out


def _chordal(a, b) -> mpfr:
    """sin of the angle between two points of CP^1."""
    na = gmpy2.sqrt(abs(a[0]) ** 2 + abs(a[1]) ** 2)
    nb = gmpy2.sqrt(abs(b[0]) ** 2 + abs(b[1]) ** 2)
    return abs(a[0] * b[1] - a[1] * b[0]) / (na * nb)


@dataclass
class BaseLocusReport:
    empty: bool
    min_root_separation: mpfr
    euler_residual: mpfr
    violations: list = field(default_factory=list)
    method: str = "mirror-roots"


def base_locus_check(gm: GMap, table: GroupTable, X: HPoly, samples: int = 8, seed: int = 0) -> BaseLocusReport:
    """Common zeros of the three coordinates of g.

    At a base point a, Euler's identity gives J(a) a = 31 g(a) = 0, so the
    critical polynomial C_g = beta X^2 vanishes there: every base point lies
    on a mirror. On each mirror the restriction is a pair of binary forms
    (s, t); a base point there is a common root, so the chordal distance
    between the root sets of s and t is reported.
    The Euler identity itself is checked at random points.
    """
    rng = random.Random(seed)
    worst_euler = mpfr(0)
    g = gm.g
    grads = [c.grad() for c in g]
    for _ in range(samples):
        y = random_point(rng)
        gy = g(y)
        jy = [sum((grads[i][j](y) * y[j] for j in range(3)), mpc(0)) for i in range(3)]
        err = max(abs(jy[i] - 31 * gy[i]) for i in range(3)) / max(abs(v) for v in gy)
        worst_euler = max(worst_euler, err)
    tol = mpfr(10) ** -(digits() // 2)
    worst_res = None
    violations = []
    for r in table.reflections:
        s, t, _ = _binary_restriction(g, r.mirror, mpfr(10) ** -(digits() // 3))
        rs = _projective_roots(s)
        rt = _projective_roots(t)
        dmin = min(_chordal(a, b) for a in rs for b in rt)
        if worst_res is None or dmin < worst_res:
            worst_res = dmin
        if dmin < tol:
            violations.append((r.index, dmin))
    return BaseLocusReport(not violations, worst_res, worst_euler, violations)


def line_resultant(lr: LineRestriction) -> mpc:
    """Sylvester resultant of the line model numerator and denominator, each scaled to unit max-norm."""
    tiny = mpfr(10) ** -(digits() // 2)
    p = _trim_small([x / maxabs(lr.p) for x in lr.p], tiny)
    q = _trim_small([x / maxabs(lr.q) for x in lr.q], tiny)
    return resultant(p[::-1], q[::-1])


def _trim_small(c, tiny):
    """Drop leading coefficients that are zero up to rounding, so the formal degree is the true one."""
    n = len(c)
    while n > 1 and abs(c[n - 1]) <= tiny:
        n -= 1
    return c[:n]


def printed_resultant_nonzero() -> bool:
    """Resultant of the printed p, q is nonzero (exact integers via the Euclidean gcd)."""
    p = [Fraction(x) for x in printed_p()]
    q = [Fraction(x) for x in printed_q()]
    a, b = _trim(q), _trim(p)
    while len(b) > 1 or b[0] != 0:
        if len(b) == 1:
            return True
        _, r = _rpoly_divmod(a, b)
        a, b = b, _trim(r) if r else [Fraction(0)]
    return len(a) == 1
