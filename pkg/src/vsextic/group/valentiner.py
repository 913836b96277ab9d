"""The Valentiner group in C^3: enumeration, reflections, conics, special orbits."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from ..numerics.hpoly import HPoly, monomial_values, monomials, n_terms
from ..numerics.linalg import cross3, eye, maxabs, normalize3
from ..numerics.precision import digits


class ClosureOverflow(RuntimeError):
    pass


class SystemNotFound(RuntimeError):
    pass


class ClusterAmbiguity(RuntimeError):
    pass


MAX_ORDER = 4096


def omega() -> mpc:
    s3 = gmpy2.sqrt(mpfr(3))
    return mpc(mpfr(-1) / 2, s3 / 2)


def valentiner_generators() -> list[np.ndarray]:
    """Four unimodular generators of the order-1080 lift."""
    w = omega()
    s5 = gmpy2.sqrt(mpfr(5))
    mu1 = (s5 - 1) / 2
    mu2 = (-s5 - 1) / 2
    a = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    b = [[1, 0, 0], [0, -1, 0], [0, 0, -1]]
    c = [[-1, 0, 0], [0, 0, -w], [0, -w * w, 0]]
    half = mpfr(1) / 2
    d = [[-half, mu2 * half, mu1 * half], [mu2 * half, mu1 * half, -half], [mu1 * half, -half, mu2 * half]]
    return [_mat(m) for m in (a, b, c, d)]


def _mat(rows) -> np.ndarray:
    m = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            m[i, j] = mpc(rows[i][j])
    return m


def dedup_tol() -> mpfr:
    return mpfr(10) ** (-(digits() // 2))


def _key(m: np.ndarray) -> tuple:
    return tuple(
        (round(float(v.real) * 1e6), round(float(v.imag) * 1e6)) for v in m.reshape(-1)
    )


def _near(a: np.ndarray, b: np.ndarray, tol) -> bool:
    return maxabs(a - b) <= tol


@dataclass
class Reflection:
    """A reflection -T of the extended group, its mirror covector and companion point."""

    index: int
    element: np.ndarray
    mirror: list
    point: list

    def mirror_value(self, y) -> mpc:
        return sum((m * v for m, v in zip(self.mirror, y)), mpc(0))


@dataclass
class GroupTable:
    elements: list
    reflections: list = field(default_factory=list)
    center: list = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def extended_order(self) -> int:
        return 2 * len(self.elements)

    def extended(self):
        """Iterate over the order-2160 group: each T and -T."""
        for t in self.elements:
            yield t
        for t in self.elements:
            yield -t

    def projective_reps(self) -> list:
        """One element per coset of the scalar subgroup (size |G| / #scalars)."""
        reps, seen = [], set()
        for t in self.elements:
            k = _projective_key(t)
            if k not in seen:
                seen.add(k)
                reps.append(t)
        return reps

    def find(self, m: np.ndarray, tol=None) -> int:
        tol = dedup_tol() if tol is None else tol
        idx = self._index().get(_key(m))
        if idx is not None and _near(self.elements[idx], m, tol):
            return idx
        for k, t in enumerate(self.elements):
            if _near(t, m, tol):
                return k
        return -1

    def _index(self) -> dict:
        if not hasattr(self, "_idx"):
            self._idx = {_key(t): k for k, t in enumerate(self.elements)}
        return self._idx


def _projective_key(m: np.ndarray) -> tuple:
    flat = m.reshape(-1)
    k = max(range(9), key=lambda i: (round(float(abs(flat[i])), 6), -i))
    s = flat[k]
    return tuple((round(float((v / s).real) * 1e6), round(float((v / s).imag) * 1e6)) for v in flat)


def generate_group(generators, tol=None, max_order: int = MAX_ORDER, find_reflections: bool = True) -> GroupTable:
    """Close a set of 3x3 unimodular matrices under multiplication."""
    tol = dedup_tol() if tol is None else tol
    gens = [np.asarray(g, dtype=object) for g in generators]
    for g in gens:
        det = (
            g[0, 0] * (g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1])
            - g[0, 1] * (g[1, 0] * g[2, 2] - g[1, 2] * g[2, 0])
            + g[0, 2] * (g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0])
        )
        if abs(det - 1) > tol:
            raise ValueError(f"generator determinant {complex(det)} is not 1")
    ident = eye(3)
    elements = [ident]
    index = {_key(ident): [0]}
    frontier = [ident]
    while frontier:
        nxt = []
        for t in frontier:
            for g in gens:
                p = g.dot(t)
                k = _key(p)
                hit = False
                for j in index.get(k, ()):
                    if _near(elements[j], p, tol):
                        hit = True
                        break
                if hit:
                    continue
                index.setdefault(k, []).append(len(elements))
                elements.append(p)
                nxt.append(p)
                if len(elements) > max_order:
                    raise ClosureOverflow(f"more than {max_order} elements")
        frontier = nxt
    table = GroupTable(elements)
    table._idx = {k: v[0] for k, v in index.items()}
    w = omega()
    for s in (w, w * w):
        scalar = ident * s
        if table.find(scalar, tol) >= 0:
            table.center.append(scalar)
    if find_reflections:
        table.reflections = find_reflections_in(table)
    return table


def find_reflections_in(table: GroupTable) -> list[Reflection]:
    """Reflections of the extended group are -T for the involutions T (trace -1)."""
    out = []
    ident = eye(3)
    tol = dedup_tol()
    for t in table.elements:
        tr = t[0, 0] + t[1, 1] + t[2, 2]
        if abs(tr + 1) > tol or not _near(t.dot(t), ident, tol):
            continue
        r = -t
        m = r - ident
        i = max(range(3), key=lambda k: float(sum(abs(v) for v in m[k, :])))
        j = max(range(3), key=lambda k: float(sum(abs(v) for v in m[:, k])))
        mirror = normalize3(list(m[i, :]))
        point = normalize3(list(m[:, j]))
        out.append(Reflection(len(out), r, mirror, point))
    return out


def valentiner_group() -> GroupTable:
    return generate_group(valentiner_generators())


# ---------------------------------------------------------------------------
# invariants by averaging


@lru_cache(maxsize=None)
def _multinomials(d: int) -> np.ndarray:
    out = np.empty(n_terms(d), dtype=object)
    for k, (a, b, c) in enumerate(monomials(d)):
        out[k] = mpc(math.factorial(d) // (math.factorial(a) * math.factorial(b) * math.factorial(c)))
    return out


def power_form_average(elements, covector, d: int) -> HPoly:
    """Average over the given matrices of (a . T y)^d, a = covector."""
    mult = _multinomials(d)
    acc = np.empty(n_terms(d), dtype=object)
    acc.fill(mpc(0))
    for t in elements:
        l = [sum((covector[i] * t[i, j] for i in range(3)), mpc(0)) for j in range(3)]
        acc = acc + monomial_values(l, d)
    acc = acc * mult / len(elements)
    return HPoly.from_coeffs(d, acc)


def random_covector(rng: random.Random) -> list:
    return [mpc(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)]


def reynolds_invariant(table: GroupTable, d: int, seed: int = 0, extended: bool = True, tol=None):
    """Group average of a random degree-d form; None when it vanishes.

    The seed form is a d-th power of a random linear form, which spans the
    degree-d forms, so a one-dimensional invariant space is always hit.
    """
    rng = random.Random(seed)
    a = random_covector(rng)
    elems = list(table.extended()) if extended else list(table.elements)
    p = power_form_average(elems, a, d)
    ref = power_form_average([eye(3)], a, d).norm()
    tol = mpfr(10) ** (-(digits() - 20)) if tol is None else tol
    if p.norm() <= tol * ref:
        return None
    return p


# ---------------------------------------------------------------------------
# icosahedral conics


@dataclass
class ConicSystems:
    """Two systems of six quadratic forms, each one projective orbit."""

    systems: list  # two lists of six HPoly
    subgroups: list  # per system, list of six lists of element indices (the A5 lifts)

    def system(self, k: int) -> list:
        return self.systems[k]


def _is_identity(m, tol) -> bool:
    return _near(m, eye(3), tol)


def _element_order(m, tol, cap: int = 30) -> int:
    p = m
    for k in range(1, cap + 1):
        if _is_identity(p, tol):
            return k
        p = p.dot(m)
    return -1


def _proj_class(c: HPoly) -> np.ndarray:
    v = np.array(c.to_c128())
    k = int(np.argmax(np.abs(v) + 1e-9 * np.arange(len(v))[::-1]))
    return v / v[k]


def _same_class(c1: np.ndarray, c2: np.ndarray, tol: float = 1e-8) -> bool:
    return float(np.max(np.abs(c1 - c2))) < tol


def _conic_orbit(c: HPoly, reps) -> tuple[list, list]:
    """Distinct projective images c o T (with exact transported scale) and one T per image."""
    images, classes, movers = [], [], []
    for t in reps:
        ct = c.compose_linear(t)
        cls = _proj_class(ct)
        if any(_same_class(cls, o) for o in classes):
            continue
        classes.append(cls)
        images.append(ct)
        movers.append(t)
        if len(images) > 6:
            break
    return images, movers


def _a5_candidates(table: GroupTable, tol):
    """Pairs (g, h) of an order-5 element and an involution with (gh)^3 = 1."""
    fives = [t for t in table.elements if _element_order(t, tol, 5) == 5]
    invol = [t for t in table.elements if _element_order(t, tol, 2) == 2]
    for g in fives:
        for h in invol:
            gh = g.dot(h)
            if _is_identity(gh.dot(gh).dot(gh), tol):
                yield g, h


def icosahedral_conics(table: GroupTable, seed: int = 0) -> ConicSystems:
    tol = dedup_tol()
    reps = table.projective_reps()
    rng = random.Random(seed)
    found: list[list[HPoly]] = []
    subgroups: list = []
    tried = 0
    for g, h in _a5_candidates(table, tol):
        tried += 1
        if tried > 20000:
            break
        try:
            sub = generate_group([g, h], tol, max_order=60, find_reflections=False)
        except ClosureOverflow:
            continue
        if sub.order != 60:
            continue
        c = power_form_average(sub.elements, random_covector(rng), 2)
        if c.norm() == 0:
            continue
        c = c.normalized()
        cls = _proj_class(c)
        if any(any(_same_class(cls, _proj_class(o)) for o in sys) for sys in found):
            continue
        images, _ = _conic_orbit(c, reps)
        if len(images) != 6:
            raise SystemNotFound(f"conic orbit has {len(images)} classes, expected 6")
        found.append(images)
        subgroups.append([_stabilizer(table, ci) for ci in images])
        if len(found) == 2:
            return ConicSystems(found, subgroups)
    raise SystemNotFound(f"found {len(found)} conic systems, expected 2")


def _stabilizer(table: GroupTable, c: HPoly) -> list[int]:
    cls = _proj_class(c)
    return [k for k, t in enumerate(table.elements) if _same_class(_proj_class(c.compose_linear(t)), cls)]


def conic_permutation(conics: list[HPoly], t) -> tuple[list[int], list[mpc]]:
    """tau and scalars lam with C_a o T = lam_a C_tau(a)."""
    classes = [_proj_class(c) for c in conics]
    perm, lam = [], []
    for c in conics:
        ct = c.compose_linear(t)
        cls = _proj_class(ct)
        j = next((k for k, o in enumerate(classes) if _same_class(cls, o)), -1)
        if j < 0:
            raise SystemNotFound("conic image outside the system")
        perm.append(j)
        lam.append(ct.proportionality(conics[j])[0])
    return perm, lam


# ---------------------------------------------------------------------------
# special points


@dataclass
class SpecialPoint:
    point: list
    mirrors: list  # indices of incident mirrors
    kind: str  # "36", "45", "60", "60bar"


@dataclass
class SpecialPoints:
    points: list

    def orbit(self, kind: str) -> list:
        return [p for p in self.points if p.kind == kind]

    def counts(self) -> dict:
        out: dict = {}
        for p in self.points:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out


def _unit(v) -> np.ndarray:
    a = np.array([complex(float(x.real), float(x.imag)) for x in v])
    a = a / np.linalg.norm(a)
    k = int(np.argmax(np.abs(a)))
    return a * (abs(a[k]) / a[k])


def _sin_angle(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt(max(0.0, 1 - abs(np.vdot(u, v)) ** 2)))


def special_points(table: GroupTable, conics: ConicSystems | None = None) -> SpecialPoints:
    refl = table.reflections
    if len(refl) != 45:
        raise ClusterAmbiguity(f"expected 45 mirrors, have {len(refl)}")
    raw = []
    for i, j in combinations(range(len(refl)), 2):
        p = cross3(refl[i].mirror, refl[j].mirror)
        raw.append((i, j, p))
    clusters: list[dict] = []
    for i, j, p in raw:
        u = _unit(p)
        hit = None
        for c in clusters:
            s = _sin_angle(u, c["u"])
            if s < 1e-7:
                hit = c
                break
            if s < 1e-3:
                raise ClusterAmbiguity(f"intersection points {s:.2e} apart")
        if hit is None:
            clusters.append({"u": u, "p": p, "pairs": 1, "mirrors": {i, j}})
        else:
            hit["pairs"] += 1
            hit["mirrors"].update((i, j))
    tol = dedup_tol()
    pts = []
    for c in clusters:
        q = normalize3(c["p"])
        for m in c["mirrors"]:
            v = refl[m].mirror_value(q) / max(abs(x) for x in refl[m].mirror)
            if abs(v) > tol:
                raise ClusterAmbiguity(f"cluster point off mirror {m} by {float(abs(v)):.2e}")
        n = len(c["mirrors"])
        if c["pairs"] != n * (n - 1) // 2:
            raise ClusterAmbiguity("pair count inconsistent with incidence")
        kind = {5: "36", 4: "45", 3: "60"}.get(n)
        if kind is None:
            raise ClusterAmbiguity(f"point on {n} mirrors")
        pts.append(SpecialPoint(q, sorted(c["mirrors"]), kind))
    sp = SpecialPoints(pts)
    _split_sixty(table, sp, conics)
    return sp


def _split_sixty(table: GroupTable, sp: SpecialPoints, conics: ConicSystems | None) -> None:
    triples = [p for p in sp.points if p.kind == "60"]
    units = [_unit(p.point) for p in triples]

    def locate(v) -> int:
        u = _unit(v)
        for k, w in enumerate(units):
            if _sin_angle(u, w) < 1e-7:
                return k
        raise ClusterAmbiguity("image of a 60-point is not a 60-point")

    gens = valentiner_generators()
    orbit = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for k in frontier:
            for g in gens:
                j = locate(list(g.dot(np.array(triples[k].point, dtype=object))))
                if j not in orbit:
                    orbit.add(j)
                    nxt.append(j)
        frontier = nxt
    if len(orbit) != 60:
        raise ClusterAmbiguity(f"60-point orbit has size {len(orbit)}")
    first_unbarred = True
    if conics is not None:
        first_unbarred = _stabilizer_in_unbarred(table, triples[0].point, conics)
    for k, p in enumerate(triples):
        in_first = k in orbit
        p.kind = "60" if in_first == first_unbarred else "60bar"


def point_stabilizer(table: GroupTable, y) -> list:
    u = _unit(y)
    yy = np.array(y, dtype=object)
    return [t for t in table.elements if _sin_angle(_unit(list(t.dot(yy))), u) < 1e-7]


def _stabilizer_in_unbarred(table: GroupTable, y, conics: ConicSystems) -> bool:
    """True when the order-3 part of the point stabilizer fixes three conics of system 0.

    The full stabilizer is S3; its rotation subgroup is the intersection of
    three icosahedral subgroups of one system, which decides the tag.
    """
    stab = point_stabilizer(table, y)

    def preserved(sys) -> int:
        n = 0
        for c in sys:
            cls = _proj_class(c)
            fixed = sum(1 for t in stab if _same_class(_proj_class(c.compose_linear(t)), cls))
            if 2 * fixed >= len(stab):
                n += 1
        return n

    n0, n1 = preserved(conics.systems[0]), preserved(conics.systems[1])
    if sorted((n0, n1)) != [0, 3]:
        raise ClusterAmbiguity(f"60-point rotation subgroup preserves {n0}/{n1} conics")
    return n0 == 3
