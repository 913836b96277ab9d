"""Dense homogeneous polynomials in three complex variables.

Coefficients are stored in block floating point: two lists of integer
mantissas (real and imaginary parts) sharing one binary exponent, so a
coefficient is ``(re[k] + i*im[k]) * 2**exp``. Accuracy is therefore relative
to the coefficient max-norm, which is the norm every tolerance in this package
is stated in.

Products go through Kronecker substitution: both factors are dehomogenized,
packed into single big integers with :func:`gmpy2.pack`, multiplied once (three
times for the complex Karatsuba split) and unpacked.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .precision import bigc, digits, mantissa_bits


class RemainderTooLarge(ArithmeticError):
    def __init__(self, remainder, tol):
        super().__init__(f"relative remainder {float(remainder):.3e} exceeds tolerance {float(tol):.3e}")
        self.remainder = remainder
        self.tol = tol


# ---------------------------------------------------------------------------
# monomial bookkeeping


@lru_cache(maxsize=None)
def monomials(d: int) -> tuple[tuple[int, int, int], ...]:
    """Exponent triples of degree ``d`` in descending lex order."""
    return tuple((a, b, d - a - b) for a in range(d, -1, -1) for b in range(d - a, -1, -1))


@lru_cache(maxsize=None)
def monomial_index(d: int) -> dict[tuple[int, int, int], int]:
    return {e: k for k, e in enumerate(monomials(d))}


@lru_cache(maxsize=None)
def _exponent_arrays(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    e = np.array(monomials(d), dtype=np.int64).reshape(-1, 3)
    return e[:, 0], e[:, 1], e[:, 2]


def n_terms(d: int) -> int:
    return (d + 1) * (d + 2) // 2


@lru_cache(maxsize=None)
def _kron_positions(d: int, stride: int) -> tuple[int, ...]:
    e1, e2, _ = _exponent_arrays(d)
    return tuple((e1 + stride * e2).tolist())


@lru_cache(maxsize=None)
def _diff_map(d: int, var: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """For d/dy_var of a degree-d form: source index and integer factor per target monomial."""
    idx = monomial_index(d)
    src, fac = [], []
    for f in monomials(d - 1):
        e = list(f)
        e[var] += 1
        src.append(idx[tuple(e)])
        fac.append(e[var])
    return tuple(src), tuple(fac)


# ---------------------------------------------------------------------------
# block floating point helpers


def _round_shift(vals: list, s: int) -> list:
    if s <= 0:
        return [v << -s for v in vals] if s < 0 else list(vals)
    half = 1 << (s - 1)
    return [(v + half) >> s for v in vals]


def _maxbits(*lists) -> int:
    m = 0
    for lst in lists:
        for v in lst:
            b = abs(v).bit_length()
            if b > m:
                m = b
    return m


def _split(x: mpfr) -> tuple[int, int]:
    if x == 0 or not gmpy2.is_finite(x):
        if not gmpy2.is_finite(x):
            raise ArithmeticError("non-finite coefficient")
        return 0, 0
    m, e = x.as_mantissa_exp()
    return int(m), int(e)


def _block_from_mpc(vals: Sequence[mpc], prec: int) -> tuple[list, list, int]:
    parts = [(_split(v.real), _split(v.imag)) for v in vals]
    top = None
    for (mr, er), (mi, ei) in parts:
        if mr:
            t = er + mr.bit_length()
            top = t if top is None or t > top else top
        if mi:
            t = ei + mi.bit_length()
            top = t if top is None or t > top else top
    if top is None:
        n = len(vals)
        return [0] * n, [0] * n, 0
    exp = top - prec
    re, im = [], []
    for (mr, er), (mi, ei) in parts:
        re.append(_shift_one(mr, er - exp))
        im.append(_shift_one(mi, ei - exp))
    return re, im, exp


def _shift_one(m: int, s: int) -> int:
    if m == 0:
        return 0
    if s >= 0:
        return m << s
    s = -s
    if s > m.bit_length() + 1:
        return 0
    return (m + (1 << (s - 1))) >> s


def _scalar_parts(c, prec: int) -> tuple[int, int, int]:
    re, im, e = _block_from_mpc([bigc(c)], prec)
    return re[0], im[0], e


# ---------------------------------------------------------------------------


class HPoly:
    """Homogeneous polynomial of fixed degree in (y1, y2, y3)."""

    __slots__ = ("degree", "re", "im", "exp", "_cache")

    def __init__(self, degree: int, re: list, im: list, exp: int = 0, *, renorm: bool = True):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        n = n_terms(degree)
        if len(re) != n or len(im) != n:
            raise ValueError(f"degree {degree} needs {n} coefficients, got {len(re)}")
        self.degree = degree
        self._cache: dict = {}
        if renorm:
            prec = mantissa_bits()
            s = _maxbits(re, im) - prec
            if s > 0:
                re, im, exp = _round_shift(re, s), _round_shift(im, s), exp + s
        self.re = re
        self.im = im
        self.exp = exp

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls, degree: int) -> HPoly:
        n = n_terms(degree)
        return cls(degree, [0] * n, [0] * n, 0, renorm=False)

    @classmethod
    def from_coeffs(cls, degree: int, coeffs: Iterable) -> HPoly:
        vals = [bigc(c) for c in coeffs]
        re, im, e = _block_from_mpc(vals, mantissa_bits())
        return cls(degree, re, im, e, renorm=False)

    @classmethod
    def from_dict(cls, degree: int, terms: dict) -> HPoly:
        idx = monomial_index(degree)
        vals = [mpc(0)] * n_terms(degree)
        for e, c in terms.items():
            if sum(e) != degree:
                raise ValueError(f"exponent {e} does not have degree {degree}")
            vals[idx[tuple(e)]] = bigc(c)
        return cls.from_coeffs(degree, vals)

    @classmethod
    def constant(cls, c) -> HPoly:
        return cls.from_coeffs(0, [c])

    @classmethod
    def variable(cls, i: int) -> HPoly:
        e = [0, 0, 0]
        e[i] = 1
        return cls.from_dict(1, {tuple(e): 1})

    @classmethod
    def linear(cls, covector: Sequence) -> HPoly:
        """The linear form sum_i c_i y_i."""
        return cls.from_dict(1, {(1, 0, 0): covector[0], (0, 1, 0): covector[1], (0, 0, 1): covector[2]})

    # -- inspection ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.re)

    def __repr__(self) -> str:
        return f"HPoly(degree={self.degree}, terms={len(self)}, norm={float(self.norm()):.3e})"

    def coeffs(self) -> list[mpc]:
        c = self._cache.get("mpc")
        if c is None:
            e = self.exp
            c = [
                mpc(gmpy2.mul_2exp(mpfr(r), e), gmpy2.mul_2exp(mpfr(i), e)) if (r or i) else mpc(0)
                for r, i in zip(self.re, self.im)
            ]
            self._cache["mpc"] = c
        return c

    def coeff_array(self) -> np.ndarray:
        a = self._cache.get("arr")
        if a is None:
            a = np.empty(len(self), dtype=object)
            a[:] = self.coeffs()
            self._cache["arr"] = a
        return a

    def coeff(self, e: tuple[int, int, int]) -> mpc:
        return self.coeffs()[monomial_index(self.degree)[tuple(e)]]

    def as_dict(self, tol: float = 0.0) -> dict:
        n = self.norm()
        return {e: c for e, c in zip(monomials(self.degree), self.coeffs()) if abs(c) > tol * n}

    def to_c128(self) -> np.ndarray:
        a = self._cache.get("c128")
        if a is None:
            a = np.array([complex(float(c.real), float(c.imag)) for c in self.coeffs()], dtype=np.complex128)
            self._cache["c128"] = a
        return a

    def norm(self) -> mpfr:
        """Coefficient max-norm."""
        if not any(self.re) and not any(self.im):
            return mpfr(0)
        return max(abs(c) for c in self.coeffs())

    def is_zero(self, tol=0) -> bool:
        return self.norm() <= tol

    def rel_diff(self, other: HPoly) -> mpfr:
        """max|self - other| / max(|self|, |other|)."""
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        den = max(self.norm(), other.norm())
        if den == 0:
            return mpfr(0)
        return (self - other).norm() / den

    def proportionality(self, other: HPoly) -> tuple[mpc, mpfr]:
        """Least-squares c with self ~ c*other and the relative residual."""
        a, b = self.coeff_array(), other.coeff_array()
        bb = sum((abs(x) ** 2 for x in b), mpfr(0))
        if bb == 0:
            return mpc(0), mpfr(1)
        ab = sum((x * y.conjugate() for x, y in zip(a, b)), mpc(0))
        c = ab / bb
        return c, (self - other * c).norm() / max(self.norm(), mpfr(1e-300))

    # -- arithmetic ---------------------------------------------------------

    def _aligned(self, other: HPoly) -> tuple[list, list, list, list, int]:
        if self.degree != other.degree:
            raise ValueError(f"degree mismatch {self.degree} vs {other.degree}")
        ea, eb = self.exp, other.exp
        ar, ai, br, bi = self.re, self.im, other.re, other.im
        limit = mantissa_bits() + 64
        if ea > eb:
            if ea - eb > limit + _maxbits(ar, ai):
                return ar, ai, [0] * len(br), [0] * len(bi), ea
            ar, ai = [v << (ea - eb) for v in ar], [v << (ea - eb) for v in ai]
            return ar, ai, br, bi, eb
        if eb > ea:
            if eb - ea > limit + _maxbits(br, bi):
                return [0] * len(ar), [0] * len(ai), br, bi, eb
            br, bi = [v << (eb - ea) for v in br], [v << (eb - ea) for v in bi]
        return ar, ai, br, bi, min(ea, eb)

    def __add__(self, other):
        if not isinstance(other, HPoly):
            return NotImplemented
        ar, ai, br, bi, e = self._aligned(other)
        return HPoly(self.degree, [x + y for x, y in zip(ar, br)], [x + y for x, y in zip(ai, bi)], e)

    def __sub__(self, other):
        if not isinstance(other, HPoly):
            return NotImplemented
        ar, ai, br, bi, e = self._aligned(other)
        return HPoly(self.degree, [x - y for x, y in zip(ar, br)], [x - y for x, y in zip(ai, bi)], e)

    def __neg__(self):
        return HPoly(self.degree, [-v for v in self.re], [-v for v in self.im], self.exp, renorm=False)

    def scale(self, c) -> HPoly:
        cr, ci, ce = _scalar_parts(c, mantissa_bits())
        re = [cr * r - ci * i for r, i in zip(self.re, self.im)]
        im = [cr * i + ci * r for r, i in zip(self.re, self.im)]
        return HPoly(self.degree, re, im, self.exp + ce)

    def int_scale(self, factors: Sequence[int]) -> HPoly:
        return HPoly(self.degree, [f * v for f, v in zip(factors, self.re)], [f * v for f, v in zip(factors, self.im)], self.exp)

    def __mul__(self, other):
        if isinstance(other, HPoly):
            return poly_mul(self, other)
        if isinstance(other, PolyMap3):
            return NotImplemented
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(1 / bigc(c))

    def __pow__(self, n: int) -> HPoly:
        if n < 0:
            raise ValueError("negative power")
        result = HPoly.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def normalized(self) -> HPoly:
        """Scaled so that the largest coefficient has modulus one."""
        n = self.norm()
        return self if n == 0 else self.scale(1 / n)

    # -- calculus -----------------------------------------------------------

    def diff(self, var: int) -> HPoly:
        if self.degree == 0:
            raise ValueError("cannot differentiate a degree-0 form")
        src, fac = _diff_map(self.degree, var)
        re = [f * self.re[s] for s, f in zip(src, fac)]
        im = [f * self.im[s] for s, f in zip(src, fac)]
        return HPoly(self.degree - 1, re, im, self.exp)

    def grad(self) -> tuple[HPoly, HPoly, HPoly]:
        g = self._cache.get("grad")
        if g is None:
            g = (self.diff(0), self.diff(1), self.diff(2))
            self._cache["grad"] = g
        return g

    # -- evaluation ---------------------------------------------------------

    def __call__(self, y: Sequence) -> mpc:
        mv = monomial_values(y, self.degree)
        return np.dot(self.coeff_array(), mv)

    def eval_c128(self, y: np.ndarray) -> np.ndarray:
        """Vectorized double-precision evaluation; ``y`` has shape (..., 3)."""
        return monomial_values_c128(y, self.degree) @ self.to_c128()

    def compose_linear(self, m) -> HPoly:
        """The form y -> p(M y)."""
        rows = [HPoly.linear([m[i][0], m[i][1], m[i][2]]) for i in range(3)]
        return compose_forms(self, rows)


def monomial_values(y: Sequence, d: int) -> np.ndarray:
    """Object array of y^e over the canonical monomial order of degree d."""
    e1, e2, e3 = _exponent_arrays(d)
    pw = []
    for yi in y:
        yi = bigc(yi)
        p = np.empty(d + 1, dtype=object)
        acc = mpc(1)
        for k in range(d + 1):
            p[k] = acc
            acc = acc * yi
        pw.append(p)
    return pw[0][e1] * pw[1][e2] * pw[2][e3]


def monomial_values_c128(y: np.ndarray, d: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.complex128)
    e1, e2, e3 = _exponent_arrays(d)
    k = np.arange(d + 1)
    p = y[..., :, None] ** k
    return p[..., 0, e1] * p[..., 1, e2] * p[..., 2, e3]


# ---------------------------------------------------------------------------
# Kronecker product


def _signed_pack(vals: Sequence[int], positions: Sequence[int], length: int, nbits: int, off: int, base):
    buf = [off] * length
    for p, v in zip(positions, vals):
        buf[p] = v + off
    return gmpy2.pack(buf, nbits) - base


def poly_mul(a: HPoly, b: HPoly) -> HPoly:
    d = a.degree + b.degree
    if not (any(a.re) or any(a.im)) or not (any(b.re) or any(b.im)):
        return HPoly.zero(d)
    if a.degree == 0 or b.degree == 0:
        if a.degree == 0:
            a, b = b, a
        return a.scale(b.coeffs()[0])
    stride = d + 1
    la = a.degree + stride * a.degree + 1
    lb = b.degree + stride * b.degree + 1
    lr = d + stride * d + 1
    pa = _maxbits(a.re, a.im) + 1
    pb = _maxbits(b.re, b.im) + 1
    nbits = pa + pb + min(len(a), len(b)).bit_length() + 4
    off = 1 << (nbits - 1)
    base_a = gmpy2.pack([off] * la, nbits)
    base_b = gmpy2.pack([off] * lb, nbits)
    pos_a = _kron_positions(a.degree, stride)
    pos_b = _kron_positions(b.degree, stride)
    ar = _signed_pack(a.re, pos_a, la, nbits, off, base_a)
    ai = _signed_pack(a.im, pos_a, la, nbits, off, base_a)
    br = _signed_pack(b.re, pos_b, lb, nbits, off, base_b)
    bi = _signed_pack(b.im, pos_b, lb, nbits, off, base_b)
    ac = ar * br
    bd = ai * bi
    s = (ar + ai) * (br + bi)
    real = ac - bd
    imag = s - ac - bd
    base_r = gmpy2.pack([off] * lr, nbits)
    ur = gmpy2.unpack(real + base_r, nbits)
    ui = gmpy2.unpack(imag + base_r, nbits)
    pos = _kron_positions(d, stride)
    re = [int(ur[p]) - off if p < len(ur) else -off for p in pos]
    im = [int(ui[p]) - off if p < len(ui) else -off for p in pos]
    return HPoly(d, re, im, a.exp + b.exp)


def compose_forms(p: HPoly, forms: Sequence[HPoly]) -> HPoly:
    """Substitute y_i -> forms[i] (three forms of a common degree) into p."""
    l1, l2, l3 = forms
    k = l1.degree
    d = p.degree
    idx = monomial_index(d)
    c = p.coeffs()
    pow3 = [HPoly.constant(1)]
    for _ in range(d):
        pow3.append(pow3[-1] * l3)
    acc_outer = None
    for e1 in range(d, -1, -1):
        m = d - e1
        acc = HPoly.constant(c[idx[(e1, m, 0)]])
        for e2 in range(m - 1, -1, -1):
            acc = acc * l2 + pow3[m - e2].scale(c[idx[(e1, e2, m - e2)]])
        acc_outer = acc if acc_outer is None else acc_outer * l1 + acc
    if acc_outer.degree != k * d:
        raise AssertionError("composition degree bookkeeping")
    return acc_outer


# ---------------------------------------------------------------------------


class PolyMap3:
    """A map C^3 -> C^3 given by three forms of equal degree."""

    __slots__ = ("coords",)

    def __init__(self, coords: Sequence[HPoly]):
        coords = tuple(coords)
        if len(coords) != 3:
            raise ValueError("PolyMap3 needs three coordinates")
        if len({c.degree for c in coords}) != 1:
            raise ValueError(f"coordinate degrees differ: {[c.degree for c in coords]}")
        self.coords = coords

    @property
    def degree(self) -> int:
        return self.coords[0].degree

    def __getitem__(self, i: int) -> HPoly:
        return self.coords[i]

    def __iter__(self):
        return iter(self.coords)

    def __repr__(self) -> str:
        return f"PolyMap3(degree={self.degree})"

    @classmethod
    def identity(cls) -> PolyMap3:
        return cls([HPoly.variable(i) for i in range(3)])

    def __add__(self, other: PolyMap3) -> PolyMap3:
        return PolyMap3([a + b for a, b in zip(self, other)])

    def __sub__(self, other: PolyMap3) -> PolyMap3:
        return PolyMap3([a - b for a, b in zip(self, other)])

    def __neg__(self) -> PolyMap3:
        return PolyMap3([-a for a in self])

    def __mul__(self, other) -> PolyMap3:
        if isinstance(other, HPoly):
            return PolyMap3([a * other for a in self])
        return PolyMap3([a.scale(other) for a in self])

    __rmul__ = __mul__

    def norm(self) -> mpfr:
        return max(c.norm() for c in self)

    def normalized(self) -> PolyMap3:
        n = self.norm()
        return self if n == 0 else self * (1 / n)

    def rel_diff(self, other: PolyMap3) -> mpfr:
        den = max(self.norm(), other.norm())
        return max((a - b).norm() for a, b in zip(self, other)) / den if den else mpfr(0)

    def __call__(self, y: Sequence) -> list[mpc]:
        mv = monomial_values(y, self.degree)
        return [np.dot(c.coeff_array(), mv) for c in self]

    def coeff_matrix_c128(self) -> np.ndarray:
        return np.stack([c.to_c128() for c in self])

    def eval_c128(self, y: np.ndarray) -> np.ndarray:
        mv = monomial_values_c128(y, self.degree)
        return mv @ self.coeff_matrix_c128().T

    def dot(self, other: PolyMap3) -> HPoly:
        return self[0] * other[0] + self[1] * other[1] + self[2] * other[2]

    def linear_image(self, m) -> PolyMap3:
        """y -> M g(y) for a constant 3x3 matrix M."""
        out = []
        for i in range(3):
            acc = None
            for j in range(3):
                if m[i][j] == 0:
                    continue
                t = self[j].scale(m[i][j])
                acc = t if acc is None else acc + t
            out.append(acc if acc is not None else HPoly.zero(self.degree))
        return PolyMap3(out)


# ---------------------------------------------------------------------------
# differential operators


def grad(p: HPoly) -> tuple[HPoly, HPoly, HPoly]:
    if p.degree < 1:
        raise ValueError("gradient of a degree-0 form")
    return p.grad()


def cross(a: Sequence[HPoly], b: Sequence[HPoly]) -> PolyMap3:
    return PolyMap3([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def cross_grad(a: HPoly, b: HPoly) -> PolyMap3:
    """The map grad(a) x grad(b), of degree deg a + deg b - 2."""
    return cross(grad(a), grad(b))


def _det3(m) -> HPoly:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def hessian(p: HPoly) -> list[list[HPoly]]:
    g = grad(p)
    h = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            h[i][j] = h[j][i] = g[i].diff(j)
    return h


def hessian_det(p: HPoly) -> HPoly:
    if p.degree < 2:
        raise ValueError("Hessian needs degree >= 2")
    return _det3(hessian(p))


def bordered_hessian_det(f: HPoly, g: HPoly) -> HPoly:
    """det [[H(f), grad g], [grad g^T, 0]] = -grad(g)^T adj(H(f)) grad(g)."""
    if f.degree < 2 or g.degree < 1:
        raise ValueError("bordered Hessian needs deg f >= 2 and deg g >= 1")
    h = hessian(f)
    b = grad(g)
    adj = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            r = [k for k in range(3) if k != j]
            c = [k for k in range(3) if k != i]
            minor = h[r[0]][c[0]] * h[r[1]][c[1]] - h[r[0]][c[1]] * h[r[1]][c[0]]
            adj[i][j] = adj[j][i] = minor if (i + j) % 2 == 0 else -minor
    quad = None
    for i in range(3):
        for j in range(i, 3):
            t = adj[i][j] * (b[i] * b[j])
            if i != j:
                t = t.scale(2)
            quad = t if quad is None else quad + t
    return -quad


def jacobian_det(a: HPoly, b: HPoly, c: HPoly) -> HPoly:
    for p in (a, b, c):
        if p.degree < 1:
            raise ValueError("Jacobian needs degree >= 1 forms")
    return cross_grad(b, c).dot(PolyMap3(grad(a)))


def euler_residual(p: HPoly) -> mpfr:
    """Relative size of y . grad(p) - deg(p) p."""
    g = grad(p)
    lhs = HPoly.variable(0) * g[0] + HPoly.variable(1) * g[1] + HPoly.variable(2) * g[2]
    return lhs.rel_diff(p.scale(p.degree))


# ---------------------------------------------------------------------------
# exact division by evaluation on a torus and discrete Fourier interpolation

_PHASES = ((0.1234, 0.5678), (0.3791, 0.8123), (0.6543, 0.2468), (0.9137, 0.4321))


class _TorusGrid:
    def __init__(self, n: int, theta1: float, theta2: float, maxdeg: int):
        two_pi = 2 * gmpy2.const_pi()
        self.n = n
        zeta = [mpc(gmpy2.cos(two_pi * k / n), gmpy2.sin(two_pi * k / n)) for k in range(n)]
        self.z = np.empty((n, n), dtype=object)
        self.zi = np.empty((n, n), dtype=object)
        for j in range(n):
            for a in range(n):
                self.z[j, a] = zeta[(j * a) % n]
                self.zi[j, a] = zeta[(-j * a) % n]
        u1 = mpc(gmpy2.cos(two_pi * theta1), gmpy2.sin(two_pi * theta1))
        u2 = mpc(gmpy2.cos(two_pi * theta2), gmpy2.sin(two_pi * theta2))
        self.ph1 = [mpc(1)]
        self.ph2 = [mpc(1)]
        for _ in range(maxdeg):
            self.ph1.append(self.ph1[-1] * u1)
            self.ph2.append(self.ph2[-1] * u2)

    def values(self, p: HPoly) -> np.ndarray:
        n = self.n
        g = np.empty((n, n), dtype=object)
        g.fill(mpc(0))
        for (e1, e2, _), c in zip(monomials(p.degree), p.coeffs()):
            if c != 0:
                g[e1 % n, e2 % n] += c * self.ph1[e1] * self.ph2[e2]
        return self.z.dot(g).dot(self.z.T)

    def interpolate(self, vals: np.ndarray, degree: int) -> tuple[HPoly, mpfr]:
        n = self.n
        c = self.zi.dot(vals).dot(self.zi.T)
        inv = mpfr(1) / (n * n)
        out = []
        for e1, e2, _ in monomials(degree):
            out.append(c[e1, e2] * inv / (self.ph1[e1] * self.ph2[e2]))
        q = HPoly.from_coeffs(degree, out)
        spill = mpfr(0)
        for a in range(n):
            for b in range(n):
                if a + b > degree:
                    spill = max(spill, abs(c[a, b]) * inv)
        return q, spill


class _Divider:
    def __init__(self, den: HPoly, qdeg: int):
        n = max(qdeg + 1, 4)
        best = None
        for th in _PHASES:
            grid = _TorusGrid(n, th[0], th[1], max(den.degree + qdeg, 1))
            dv = grid.values(den)
            mags = [abs(v) for v in dv.flat]
            score = min(mags) / max(mags)
            if best is None or score > best[0]:
                best = (score, grid, dv)
        self.grid, self.den_vals = best[1], best[2]
        self.qdeg = qdeg

    def quotient(self, num: HPoly) -> HPoly:
        nv = self.grid.values(num)
        return self.grid.interpolate(nv / self.den_vals, self.qdeg)[0]


def default_division_tol() -> mpfr:
    return mpfr(10) ** -(digits() - 20)


def exact_divide(num, den: HPoly, tol=None, *, refine: int = 4):
    """Quotient of an exactly divisible form (or PolyMap3) by ``den``.

    Returns ``(quotient, relative_remainder)``; raises RemainderTooLarge when
    ``max|num - q*den| / max|num|`` exceeds ``tol``.
    """
    if tol is None:
        tol = default_division_tol()
    tol = mpfr(tol)
    if isinstance(num, PolyMap3):
        qdeg = num.degree - den.degree
        if qdeg < 0:
            raise ValueError("numerator degree below denominator degree")
        div = _Divider(den, qdeg)
        qs, rems = [], []
        for c in num:
            q, r = _divide_one(c, den, div, tol, refine)
            qs.append(q)
            rems.append(r)
        worst = max(rems)
        if worst > tol:
            raise RemainderTooLarge(worst, tol)
        return PolyMap3(qs), worst
    qdeg = num.degree - den.degree
    if qdeg < 0:
        raise ValueError("numerator degree below denominator degree")
    q, r = _divide_one(num, den, _Divider(den, qdeg), tol, refine)
    if r > tol:
        raise RemainderTooLarge(r, tol)
    return q, r


def _divide_one(num: HPoly, den: HPoly, div: _Divider, tol, refine: int):
    nn = num.norm()
    if nn == 0:
        return HPoly.zero(div.qdeg), mpfr(0)
    q = div.quotient(num)
    rem = num - q * den
    r = rem.norm() / nn
    for _ in range(refine):
        if r <= tol / 1000:
            break
        dq = div.quotient(rem)
        q2 = q + dq
        rem2 = num - q2 * den
        r2 = rem2.norm() / nn
        if r2 >= r:
            break
        q, rem, r = q2, rem2, r2
    return q, r


def poly_eval(p: HPoly, y: Sequence) -> mpc:
    return p(y)
