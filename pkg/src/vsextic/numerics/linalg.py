"""Dense linear algebra over mpc held in numpy object arrays.

mpmath's matrix routines work but run several times slower than vectorized
object arrays of gmpy2 scalars, which matters for the fits, so the few
factorizations needed here live in this module.
"""
from __future__ import annotations

from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .precision import bigc, to_complex


class RankDeficient(ArithmeticError):
    pass


def as_object(a) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    flat = out.reshape(-1)
    for k, v in enumerate(a.reshape(-1)):
        flat[k] = bigc(v)
    return out


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(mpc(0))
    return out


def eye(n: int) -> np.ndarray:
    out = zeros((n, n))
    for i in range(n):
        out[i, i] = mpc(1)
    return out


def to_c128(a) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    return np.array([to_complex(v) for v in a.reshape(-1)], dtype=np.complex128).reshape(a.shape)


def norm2(v) -> mpfr:
    return gmpy2.sqrt(sum((abs(x) ** 2 for x in np.asarray(v).reshape(-1)), mpfr(0)))


def maxabs(v) -> mpfr:
    v = np.asarray(v).reshape(-1)
    return max((abs(x) for x in v), default=mpfr(0))


# ---------------------------------------------------------------------------
# pivoted Householder QR


class QR:
    """A[:, perm] = Q R with Householder reflectors, column pivoting optional."""

    def __init__(self, a, pivot: bool = True):
        r = np.array(a, dtype=object, copy=True)
        m, n = r.shape
        self.m, self.n = m, n
        self.perm = np.arange(n)
        self.vs: list[tuple[int, np.ndarray, mpfr]] = []
        colnorm = np.array([sum((abs(x) ** 2 for x in r[:, j]), mpfr(0)) for j in range(n)], dtype=object)
        for k in range(min(m, n)):
            if pivot:
                j = k + int(np.argmax([float(c) for c in colnorm[k:]]))
                if j != k:
                    r[:, [k, j]] = r[:, [j, k]]
                    self.perm[[k, j]] = self.perm[[j, k]]
                    colnorm[[k, j]] = colnorm[[j, k]]
            x = r[k:, k]
            alpha = norm2(x)
            if alpha == 0:
                continue
            x0 = x[0]
            phase = x0 / abs(x0) if x0 != 0 else mpc(1)
            v = x.copy()
            v[0] = v[0] + phase * alpha
            vn2 = sum((abs(t) ** 2 for t in v), mpfr(0))
            w = np.conj(v).dot(r[k:, k:]) * (2 / vn2)
            r[k:, k:] = r[k:, k:] - np.outer(v, w)
            self.vs.append((k, v, vn2))
            if pivot:
                # downdating loses accuracy; recompute the norms exactly
                for jj in range(k + 1, n):
                    colnorm[jj] = sum((abs(t) ** 2 for t in r[k + 1:, jj]), mpfr(0))
        self.r = r

    def diag(self) -> list[mpfr]:
        return [abs(self.r[i, i]) for i in range(min(self.m, self.n))]

    def rank(self, rtol) -> int:
        d = self.diag()
        if not d or d[0] == 0:
            return 0
        return sum(1 for x in d if x > rtol * d[0])

    def apply_qh(self, b: np.ndarray) -> np.ndarray:
        b = np.array(b, dtype=object, copy=True)
        for k, v, vn2 in self.vs:
            if b.ndim == 1:
                s = np.conj(v).dot(b[k:]) * (2 / vn2)
                b[k:] = b[k:] - v * s
            else:
                s = np.conj(v).dot(b[k:, :]) * (2 / vn2)
                b[k:, :] = b[k:, :] - np.outer(v, s)
        return b


def back_substitute(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = r.shape[1]
    x = zeros((n,) + b.shape[1:])
    for i in range(n - 1, -1, -1):
        acc = b[i] - (r[i, i + 1:n].dot(x[i + 1:n]) if i + 1 < n else 0)
        x[i] = acc / r[i, i]
    return x


def lstsq(a, b, rtol=None) -> tuple[np.ndarray, mpfr]:
    """Least-squares solution of A x = b and the relative residual.

    Raises RankDeficient when the pivoted R has a diagonal entry below
    ``rtol`` times the largest one.
    """
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    m, n = a.shape
    if m < n:
        raise RankDeficient(f"underdetermined system {m}x{n}")
    if rtol is None:
        rtol = mpfr(2) ** (-gmpy2.get_context().precision + 16)
    qr = QR(a)
    d = qr.diag()
    if d[0] == 0 or d[-1] <= rtol * d[0]:
        raise RankDeficient(f"numerical rank {qr.rank(rtol)} < {n}")
    qb = qr.apply_qh(b)
    y = back_substitute(qr.r[:n, :n], qb[:n])
    x = zeros(y.shape)
    x[qr.perm] = y
    res = a.dot(x) - b
    den = maxabs(b)
    return x, (maxabs(res) / den if den else maxabs(res))


def linear_solve(a, b, expected_kernel: int = 0, rtol=None) -> tuple[np.ndarray, mpfr, int]:
    """Least squares with a rank estimate: returns (x, relative residual, rank).

    A kernel of up to ``expected_kernel`` dimensions is tolerated (the basic solution on the
    pivot columns is returned); a larger one raises RankDeficient.
    """
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    m, n = a.shape
    if m < n:
        raise RankDeficient(f"underdetermined system {m}x{n}")
    if rtol is None:
        rtol = mpfr(2) ** (-gmpy2.get_context().precision + 16)
    qr = QR(a)
    rank = qr.rank(rtol)
    if n - rank > expected_kernel:
        raise RankDeficient(f"kernel dimension {n - rank} exceeds the expected {expected_kernel}")
    qb = qr.apply_qh(b)
    y = back_substitute(qr.r[:rank, :rank], qb[:rank])
    x = zeros((n,) + y.shape[1:])
    x[qr.perm[:rank]] = y
    res = a.dot(x) - b
    den = maxabs(b)
    return x, (maxabs(res) / den if den else maxabs(res)), rank


def solve(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    if a.shape[0] != a.shape[1]:
        raise ValueError("square system expected")
    x, _ = lstsq(a, b)
    return x


def null_space(a, rtol) -> np.ndarray:
    """Orthonormal-ish basis (columns) of the numerical kernel of A."""
    a = np.asarray(a, dtype=object)
    m, n = a.shape
    if m < n:
        a = np.vstack([a, zeros((n - m, n))])
        m = n
    qr = QR(a)
    r = qr.rank(rtol)
    if r == n:
        return zeros((n, 0))
    r11 = qr.r[:r, :r]
    r12 = qr.r[:r, r:n]
    k = n - r
    basis = zeros((n, k))
    if r:
        x = back_substitute(r11, -r12)
        basis[:r, :] = x
    for j in range(k):
        basis[r + j, j] = mpc(1)
    out = zeros((n, k))
    out[qr.perm, :] = basis
    for j in range(k):
        out[:, j] = out[:, j] / norm2(out[:, j])
    return out


def singular_gap(a) -> list[mpfr]:
    """Diagonal of pivoted R, normalized by its first entry (a cheap rank profile)."""
    d = QR(np.asarray(a, dtype=object)).diag()
    return [x / d[0] for x in d] if d and d[0] else d


# ---------------------------------------------------------------------------


def det(a) -> mpc:
    """Determinant by LU with partial pivoting."""
    m = np.array(a, dtype=object, copy=True)
    n = m.shape[0]
    if n == 0:
        return mpc(1)
    result = mpc(1)
    for k in range(n):
        p = k + int(np.argmax([float(abs(v)) for v in m[k:, k]]))
        if m[p, k] == 0:
            return mpc(0)
        if p != k:
            m[[k, p]] = m[[p, k]]
            result = -result
        piv = m[k, k]
        result = result * piv
        if k + 1 < n:
            f = m[k + 1:, k] / piv
            m[k + 1:, k + 1:] = m[k + 1:, k + 1:] - np.outer(f, m[k, k + 1:])
    return result


def det3(m) -> mpc:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def matmul3(a, b) -> list[list[mpc]]:
    return [[a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j] for j in range(3)] for i in range(3)]


def matvec3(a, v) -> list[mpc]:
    return [a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2] for i in range(3)]


def cross3(a, b) -> list[mpc]:
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def normalize3(v) -> list[mpc]:
    """Scale a projective point so its largest coordinate is 1."""
    k = max(range(len(v)), key=lambda i: abs(v[i]))
    return [x / v[k] for x in v]


def resultant(p: Sequence, q: Sequence) -> mpc:
    """Sylvester resultant of two univariate polynomials (coefficients high to low)."""
    p = [bigc(c) for c in p]
    q = [bigc(c) for c in q]
    m, n = len(p) - 1, len(q) - 1
    if m < 0 or n < 0:
        raise ValueError("empty polynomial")
    s = zeros((m + n, m + n))
    for i in range(n):
        s[i, i:i + m + 1] = p
    for i in range(m):
        s[n + i, i:i + n + 1] = q
    return det(s)


def resultant_1d(p: Sequence, q: Sequence) -> mpc:
    """Sylvester resultant with coefficients listed low order first (index = power)."""
    return resultant(list(p)[::-1], list(q)[::-1])


def polyval(coeffs: Sequence, z) -> mpc:
    acc = mpc(0)
    for c in coeffs:
        acc = acc * z + c
    return acc


def polyroots(coeffs: Sequence, polish_steps: int = 60) -> list[mpc]:
    """Roots of a univariate polynomial (coefficients high to low).

    Double-precision companion roots, then Newton at working precision.
    """
    coeffs = [bigc(c) for c in coeffs]
    while coeffs and coeffs[0] == 0:
        coeffs = coeffs[1:]
    if len(coeffs) < 2:
        return []
    scale = maxabs(coeffs)
    coeffs = [c / scale for c in coeffs]
    deriv = [c * (len(coeffs) - 1 - k) for k, c in enumerate(coeffs[:-1])]
    approx = np.roots(to_c128(coeffs))
    eps = mpfr(2) ** (-gmpy2.get_context().precision + 8)
    out = []
    for z0 in approx:
        z = mpc(z0)
        for _ in range(polish_steps):
            f = polyval(coeffs, z)
            df = polyval(deriv, z)
            if df == 0:
                break
            step = f / df
            z = z - step
            if abs(step) <= eps * max(abs(z), mpfr(1)):
                break
        out.append(z)
    return out
