"""The sextic resolvent family P_V and its elementary-symmetric bookkeeping."""
from __future__ import annotations

from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .numerics.precision import bigc


def _i15() -> mpc:
    return mpc(0, gmpy2.sqrt(mpfr(15)))


def alpha() -> mpc:
    """The constant with F = alpha * sum C_a^3, i.e. sum_k s_k = 1/alpha."""
    return mpc(mpfr(9) / 4) * (5 + _i15())


def pv_coeffs(v1, v2) -> list[mpc]:
    """Coefficients c_0..c_6 of P_V(z) = sum c_j z^j (monic, c_6 = 1)."""
    v1, v2 = bigc(v1), bigc(v2)
    i = mpc(0, 1)
    q = gmpy2.sqrt(mpfr(15))
    c6 = mpc(1)
    c5 = i * (5 * i + q) / 90
    c4 = ((-9 - 3 * i * q) * v1 - 11 * i * q + 11) / 24300
    c3 = (9 * (30 + i * q) * v1 + 57 * i * q + 100) / 12301875
    c2 = (9 * i * v1 * (3 * (4 * i + q) * v1 + 8 * q + 42 * i) - 17 * i * q - 152) / 2214337500
    c1 = (3 * v1 * (9 * (-25 + 33 * i * q) * v1 + 386 * i * q + 150) - 1944 * i * q * v2 + 103 * i * q + 425) / 14946778125000
    c0 = (9 * v1 * (9 * v1 * ((45 + 11 * i * q) * v1 - i * q + 25) - 7 * i * q + 15) - 3 * i * q - 5) / 2421378056250000
    return [c0, c1, c2, c3, c4, c5, c6]


def elementary(values: Sequence) -> list[mpc]:
    """e_0..e_n of the given values."""
    e = [mpc(1)] + [mpc(0)] * len(values)
    for v in values:
        for j in range(len(values), 0, -1):
            e[j] = e[j] + e[j - 1] * v
    return e


def coeffs_from_roots(values: Sequence) -> list[mpc]:
    """c_0..c_n of prod (z - v), low order first."""
    e = elementary(values)
    n = len(values)
    return [e[n - j] * (-1) ** (n - j) for j in range(n + 1)]


def v1_from_e2(e2) -> mpc:
    """Invert the z^4 relation of P_V for V_1."""
    r = _i15()
    return (24300 * e2 - 11 + 11 * r) / (-9 - 3 * r)


def v2_from_e5(v1, e5) -> mpc:
    """Invert the z^1 relation (c_1 = -e_5) for V_2."""
    r = _i15()
    rest = 3 * v1 * (9 * (-25 + 33 * r) * v1 + 386 * r + 150) + 103 * r + 425
    return (rest + e5 * 14946778125000) / (1944 * r)


def power_sums(coeffs: Sequence, count: int) -> list[mpc]:
    """Newton identities: p_1..p_count of the roots of sum c_j z^j (c_n = 1 after scaling)."""
    n = len(coeffs) - 1
    lead = coeffs[n]
    a = [c / lead for c in coeffs]
    # e_k = (-1)^k a_{n-k}
    e = [mpc(1)] + [a[n - k] * (-1) ** k for k in range(1, n + 1)]
    p = [mpc(0)] * (count + 1)
    for m in range(1, count + 1):
        acc = mpc(0)
        for k in range(1, min(m, n) + 1):
            term = e[k] * (p[m - k] if m - k > 0 else mpc(0))
            acc = acc + (-1) ** (k - 1) * term
        if m <= n:
            acc = acc + (-1) ** (m - 1) * m * e[m]
        p[m] = acc
    return p[1:]


def eval_pv(v1, v2, z) -> mpc:
    acc = mpc(0)
    for c in reversed(pv_coeffs(v1, v2)):
        acc = acc * z + c
    return acc
