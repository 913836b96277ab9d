"""Working-precision control and scalar helpers.

Scalars are ``gmpy2.mpc`` values; the gmpy2 context precision is the single
global knob. Pipeline stages switch it with :func:`working_precision`.
"""
from __future__ import annotations

import math
import re
from contextlib import contextmanager
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

BigC = mpc

RUNTIME_BITS = 128
PRECOMPUTE_BITS = 384
GUARD_BITS = 32


def bits() -> int:
    return gmpy2.get_context().precision


def digits() -> int:
    """Decimal digits carried at the current precision."""
    return int(bits() * math.log10(2))


def set_precision(nbits: int) -> None:
    gmpy2.get_context().precision = int(nbits)


def bits_for_digits(ndigits: int) -> int:
    return int(math.ceil(ndigits / math.log10(2)))


@contextmanager
def working_precision(nbits: int):
    old = bits()
    set_precision(nbits)
    try:
        yield
    finally:
        set_precision(old)


set_precision(PRECOMPUTE_BITS)


def mantissa_bits() -> int:
    return bits() + GUARD_BITS


def bigc(x) -> mpc:
    """Coerce ints, floats, complex, Fractions, strings or mpmath values to mpc."""
    if isinstance(x, mpc):
        return mpc(x)
    if isinstance(x, (int, mpfr, gmpy2.mpz)):
        return mpc(x)
    if isinstance(x, Fraction):
        return mpc(mpfr(x.numerator) / mpfr(x.denominator))
    if isinstance(x, str):
        return parse_cstr(x) if "," in x else mpc(mpfr(x))
    if hasattr(x, "_mpc_") or hasattr(x, "_mpf_"):
        import mpmath

        with mpmath.workprec(bits() + 10):
            z = mpmath.mpc(x)
            n = bits() // 3 + 8
            return mpc(mpfr(mpmath.nstr(z.real, n)), mpfr(mpmath.nstr(z.imag, n)))
    return mpc(complex(x))


def to_mpmath(z):
    import mpmath

    z = mpc(z)
    return mpmath.mpc(_dec(z.real), _dec(z.imag))


def sqrt15() -> mpfr:
    return gmpy2.sqrt(mpfr(15))


def to_complex(z) -> complex:
    z = mpc(z)
    return complex(float(z.real), float(z.imag))


def _dec(x: mpfr, ndig: int | None = None) -> str:
    if ndig is None:
        ndig = int(x.precision * math.log10(2)) + 3
    if x == 0:
        return "0"
    m, e, _ = x.digits(10, ndig)
    sign = ""
    if m.startswith("-"):
        sign, m = "-", m[1:]
    return f"{sign}0.{m}e{e}"


def cstr(z, ndig: int | None = None) -> str:
    """Decimal text ``re,im`` with enough digits to round-trip at the value's precision."""
    z = mpc(z)
    return f"{_dec(z.real, ndig)},{_dec(z.imag, ndig)}"


def parse_cstr(s: str) -> mpc:
    re_s, im_s = s.split(",")
    return mpc(mpfr(re_s), mpfr(im_s))


def _sci(x: mpfr, ndig: int) -> str:
    if x == 0:
        return "0"
    m, e, _ = x.digits(10, ndig)
    sign = ""
    if m.startswith("-"):
        sign, m = "-", m[1:]
    return f"{sign}{m[0]}.{m[1:]}e{e - 1:+03d}"


def cfmt(z, ndig: int = 25) -> str:
    """Human-readable ``a+bi`` text."""
    z = mpc(z)
    im = z.imag
    sign = "-" if im < 0 else "+"
    return f"{_sci(z.real, ndig)}{sign}{_sci(abs(im), ndig)}i"


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_IMAG = re.compile(rf"^(?P<im>[+-]?(?:{_NUM})?)[ij]$")
_COMPLEX = re.compile(rf"^(?P<re>[+-]?{_NUM})(?:(?P<im>[+-](?:{_NUM})?)[ij])?$")


def parse_complex(text: str) -> mpc:
    """Parse ``a+bi``, ``a-bj``, ``a``, ``bi`` or ``re,im`` at the working precision."""
    t = text.strip().replace(" ", "")
    if "," in t:
        return parse_cstr(t)
    m = _IMAG.match(t) or _COMPLEX.match(t)
    if m is None:
        raise ValueError(f"cannot parse complex number {text!r}")
    re_part = mpfr(m.groupdict().get("re") or 0)
    im_txt = m.group("im")
    if im_txt is None:
        im_part = mpfr(0)
    elif im_txt in ("", "+"):
        im_part = mpfr(1)
    elif im_txt == "-":
        im_part = mpfr(-1)
    else:
        im_part = mpfr(im_txt)
    return mpc(re_part, im_part)
