"""Basic invariants F, Phi, Psi, X calibrated to the resolvent, and the equivariant basis."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from ..numerics.hpoly import (
    HPoly,
    PolyMap3,
    bordered_hessian_det,
    cross_grad,
    exact_divide,
    hessian_det,
    jacobian_det,
)
from ..numerics.linalg import cross3, lstsq, maxabs, norm2, null_space, zeros
from ..numerics.precision import digits
from ..resolvent import alpha, coeffs_from_roots, pv_coeffs, v1_from_e2, v2_from_e5, elementary
from .valentiner import ConicSystems, GroupTable, reynolds_invariant


class ConventionMismatch(RuntimeError):
    pass


class KernelDimensionUnexpected(RuntimeError):
    pass


def random_point(rng: random.Random) -> list[mpc]:
    """A point of the unit polydisk, drawn uniformly in each coordinate."""
    out = []
    for _ in range(3):
        r = mpfr(rng.random()) ** mpfr(0.5)
        t = 2 * gmpy2.const_pi() * mpfr(rng.random())
        out.append(mpc(r * gmpy2.cos(t), r * gmpy2.sin(t)))
    return out


@dataclass
class CalibratedInvariants:
    F: HPoly
    Phi: HPoly
    Psi: HPoly
    X: HPoly
    conics: list  # the six C_k of the resolvent system, scaled by mu
    other_conics: list
    alpha: mpc
    mu3: mpc
    kappa_phi: mpc
    kappa_psi: mpc
    system: int  # index of the resolvent system in the discovery order
    report: dict = field(default_factory=dict)

    def V(self, x) -> tuple[mpc, mpc]:
        f = self.F(x)
        return self.Phi(x) / f**2, self.Psi(x) / f**5

    def s_values(self, y) -> list[mpc]:
        f = self.F(y)
        return [c(y) ** 3 / f for c in self.conics]


def _cube_root(z: mpc) -> mpc:
    r = abs(z) ** (mpfr(1) / 3)
    t = gmpy2.atan2(z.imag, z.real) / 3
    return mpc(r * gmpy2.cos(t), r * gmpy2.sin(t))


def _try_system(F: HPoly, Phi0: HPoly, conics: list, rng: random.Random, nver: int):
    """Fit mu^3, kappa_Phi, kappa_Psi for one conic system; return the worst relation error."""
    a = alpha()
    tol = mpfr(10) ** -(digits() - 25)
    xs = [random_point(rng) for _ in range(3 + nver)]
    mu3s = []
    for x in xs[:3]:
        mu3s.append(F(x) / (a * sum(c(x) ** 3 for c in conics)))
    spread = max(abs(m - mu3s[0]) for m in mu3s) / abs(mu3s[0])
    if spread > tol:
        raise ConventionMismatch(f"F is not proportional to sum C^3 (spread {float(spread):.2e})")
    mu3 = mu3s[0]
    mu = _cube_root(mu3)
    scaled = [c.scale(mu) for c in conics]

    def svals(x):
        f = F(x)
        return [c(x) ** 3 / f for c in scaled]

    x0 = xs[0]
    e = elementary(svals(x0))
    v1 = v1_from_e2(e[2])
    kphi = v1 * F(x0) ** 2 / Phi0(x0)
    Phi = Phi0.scale(kphi)
    Psi0 = bordered_hessian_det(F, Phi)
    v2 = v2_from_e5(v1, e[5])
    kpsi = v2 * F(x0) ** 5 / Psi0(x0)
    Psi = Psi0.scale(kpsi)
    worst = mpfr(0)
    for x in xs[3:]:
        f = F(x)
        vv1, vv2 = Phi(x) / f**2, Psi(x) / f**5
        want = pv_coeffs(vv1, vv2)
        got = coeffs_from_roots(svals(x))
        for j in range(6):
            worst = max(worst, abs(want[j] - got[j]) / max(abs(want[j]), mpfr(10) ** -30))
    return worst, dict(mu3=mu3, mu=mu, conics=scaled, Phi=Phi, Psi=Psi, kphi=kphi, kpsi=kpsi)


def calibrate(table: GroupTable, conics: ConicSystems, seed: int = 1, nver: int = 20) -> CalibratedInvariants:
    """Tie F, Phi, Psi and the conic scale to the printed resolvent, trying both systems."""
    F = reynolds_invariant(table, 6, seed=seed)
    if F is None:
        raise ConventionMismatch("no degree-6 invariant found")
    F = F.normalized()
    Phi0 = hessian_det(F)
    tol = mpfr(10) ** -(digits() - 25)
    rng = random.Random(seed)
    results = []
    for k in (0, 1):
        worst, data = _try_system(F, Phi0, conics.systems[k], rng, nver)
        results.append((worst, k, data))
        if worst <= tol:
            X = jacobian_det(F, data["Phi"], data["Psi"])
            return CalibratedInvariants(
                F=F,
                Phi=data["Phi"],
                Psi=data["Psi"],
                X=X,
                conics=data["conics"],
                other_conics=conics.systems[1 - k],
                alpha=alpha(),
                mu3=data["mu3"],
                kappa_phi=data["kphi"],
                kappa_psi=data["kpsi"],
                system=k,
                report={"relation_error": worst, "rejected": [float(r[0]) for r in results[:-1]]},
            )
    raise ConventionMismatch(
        "resolvent relations fail for both conic systems: " + ", ".join(f"{float(r[0]):.2e}" for r in results)
    )


def build_X(inv: CalibratedInvariants) -> HPoly:
    return jacobian_det(inv.F, inv.Phi, inv.Psi)


# ---------------------------------------------------------------------------
# equivariants


def invariant_monomials(d: int) -> list[tuple[int, int, int]]:
    """Exponents (a, b, c) with 6a + 12b + 30c = d, as F^a Phi^b Psi^c."""
    out = []
    for c in range(d // 30 + 1):
        for b in range((d - 30 * c) // 12 + 1):
            rest = d - 30 * c - 12 * b
            if rest % 6 == 0:
                out.append((rest // 6, b, c))
    return out


def _inv_value(vals, e) -> mpc:
    f, p, s = vals
    return f ** e[0] * p ** e[1] * s ** e[2]


@dataclass
class EquivariantBasis:
    psi: PolyMap3
    phi: PolyMap3
    f: PolyMap3
    h: PolyMap3
    k: PolyMap3
    h64: PolyMap3
    k70: PolyMap3
    report: dict = field(default_factory=dict)


class _InvPowers:
    """Memoized products F^a Phi^b Psi^c as polynomials."""

    def __init__(self, inv: CalibratedInvariants):
        self.base = (inv.F, inv.Phi, inv.Psi)
        self.cache: dict = {(0, 0, 0): HPoly.constant(1)}

    def get(self, e) -> HPoly:
        e = tuple(e)
        if e in self.cache:
            return self.cache[e]
        for i in range(3):
            if e[i] > 0:
                prev = list(e)
                prev[i] -= 1
                p = self.get(tuple(prev)) * self.base[i]
                self.cache[e] = p
                return p
        raise AssertionError


def _mirror_points(mirror, n: int, rng: random.Random) -> list:
    u = cross3(mirror, [mpc(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)])
    v = cross3(mirror, u)
    pts = []
    for _ in range(n):
        t = mpc(rng.gauss(0, 1), rng.gauss(0, 1))
        pts.append([u[i] + t * v[i] for i in range(3)])
    return pts


def _candidate_terms(degree: int) -> list[tuple[str, tuple]]:
    terms = []
    for name, deg in (("psi", 16), ("phi", 34), ("f", 40)):
        for e in invariant_monomials(degree - deg):
            terms.append((name, e))
    return terms


def _eval_terms(terms, inv_vals, maps_vals) -> np.ndarray:
    """3 x len(terms) matrix of the candidate equivariants at one point."""
    out = zeros((3, len(terms)))
    for j, (name, e) in enumerate(terms):
        s = _inv_value(inv_vals, e)
        mv = maps_vals[name]
        for i in range(3):
            out[i, j] = s * mv[i]
    return out


def _divisible_combination(inv, maps, terms, trivial_fns, rng, label: str):
    """Kernel of the mirror-vanishing conditions modulo the trivial elements."""
    table_refl = maps["_mirror"]
    rows = []
    npts = max(len(terms) + 10, 80)
    for y in _mirror_points(table_refl, npts, rng):
        iv = (inv.F(y), inv.Phi(y), inv.Psi(y))
        mv = {k: maps[k](y) for k in ("psi", "phi", "f")}
        rows.append(_eval_terms(terms, iv, mv))
    a = np.vstack(rows)
    a = a / maxabs(a)
    rtol = mpfr(10) ** -(digits() // 2)
    kern = null_space(a, rtol)
    # express each trivial element in the candidate basis by fitting at generic points
    gen_rows, gen_rhs = [], []
    for _ in range(len(terms) + 10):
        y = random_point(rng)
        iv = (inv.F(y), inv.Phi(y), inv.Psi(y))
        mv = {k: maps[k](y) for k in ("psi", "phi", "f")}
        gen_rows.append(_eval_terms(terms, iv, mv))
        gen_rhs.append(np.array([[fn(y)[i] for fn in trivial_fns] for i in range(3)], dtype=object))
    trivial, res = lstsq(np.vstack(gen_rows), np.vstack(gen_rhs))
    if res > mpfr(10) ** -(digits() // 2):
        raise KernelDimensionUnexpected(f"{label}: trivial elements not in the candidate span (residual {float(res):.2e})")
    dim = kern.shape[1]
    if dim - len(trivial_fns) != 1:
        raise KernelDimensionUnexpected(f"{label}: kernel dimension {dim}, trivial part {len(trivial_fns)}")
    # component of the kernel orthogonal to the trivial span
    q = _orthonormal(trivial)
    best, bestn = None, mpfr(-1)
    for j in range(dim):
        v = kern[:, j].copy()
        for t in range(q.shape[1]):
            v = v - q[:, t] * np.conj(q[:, t]).dot(v)
        n = norm2(v)
        if n > bestn:
            best, bestn = v, n
    return best / bestn, {"kernel_dim": dim, "trivial_dim": len(trivial_fns)}


def _orthonormal(a: np.ndarray) -> np.ndarray:
    cols = []
    for j in range(a.shape[1]):
        v = a[:, j].copy()
        for q in cols:
            v = v - q * np.conj(q).dot(v)
        n = norm2(v)
        if n > 0:
            cols.append(v / n)
    out = zeros((a.shape[0], len(cols)))
    for j, c in enumerate(cols):
        out[:, j] = c
    return out


def _assemble(coeffs, terms, maps, powers: _InvPowers, degree: int) -> PolyMap3:
    acc = None
    for c, (name, e) in zip(coeffs, terms):
        if abs(c) == 0:
            continue
        term = maps[name] * powers.get(e).scale(c)
        acc = term if acc is None else acc + term
    return acc


def equivariant_generators(inv: CalibratedInvariants, table: GroupTable, seed: int = 3) -> EquivariantBasis:
    rng = random.Random(seed)
    psi = cross_grad(inv.F, inv.Phi)
    phi = cross_grad(inv.F, inv.Psi)
    f = cross_grad(inv.Phi, inv.Psi)
    maps = {"psi": psi, "phi": phi, "f": f, "_mirror": table.reflections[0].mirror}
    powers = _InvPowers(inv)
    report = {}

    def xy(e):
        return lambda y: [inv.X(y) * _inv_value((inv.F(y), inv.Phi(y), inv.Psi(y)), e) * yi for yi in y]

    terms_h = _candidate_terms(64)
    ch, report["h"] = _divisible_combination(inv, maps, terms_h, [xy(e) for e in invariant_monomials(18)], rng, "h64")
    h64 = _assemble(ch, terms_h, maps, powers, 64)
    h, rh = exact_divide(h64, inv.X)
    report["h"]["remainder"] = rh
    h = h.normalized()

    def xhf(y):
        fy = inv.F(y)
        xv = inv.X(y)
        return [xv * fy * c for c in h(y)]

    terms_k = _candidate_terms(70)
    trivial_k = [xy(e) for e in invariant_monomials(24)] + [xhf]
    ck, report["k"] = _divisible_combination(inv, maps, terms_k, trivial_k, rng, "k70")
    k70 = _assemble(ck, terms_k, maps, powers, 70)
    k, rk = exact_divide(k70, inv.X)
    report["k"]["remainder"] = rk
    k = k.normalized()
    return EquivariantBasis(psi, phi, f, h, k, h64, k70, report)


def equivariance_residual(m: PolyMap3, t, y) -> mpfr:
    """Projective mismatch between m(T y) and T m(y)."""
    ty = list(np.asarray(t, dtype=object).dot(np.array(y, dtype=object)))
    a = m(ty)
    b = list(np.asarray(t, dtype=object).dot(np.array(m(y), dtype=object)))
    k = max(range(3), key=lambda i: abs(b[i]))
    lam = a[k] / b[k]
    return max(abs(a[i] - lam * b[i]) for i in range(3)) / max(abs(v) for v in a)
