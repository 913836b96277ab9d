import random

import gmpy2
from gmpy2 import mpc, mpfr

from vsextic.resolvent import (
    alpha,
    coeffs_from_roots,
    elementary,
    power_sums,
    pv_coeffs,
    v1_from_e2,
    v2_from_e5,
)


def test_z5_coefficient():
    q = gmpy2.sqrt(mpfr(15))
    want = mpc(0, 1) * (5 * mpc(0, 1) + q) / 90
    assert abs(pv_coeffs(0.3, -1)[5] - want) < 1e-100


def test_constant_term_at_origin():
    q = gmpy2.sqrt(mpfr(15))
    want = (-3 * mpc(0, 1) * q - 5) / 2421378056250000
    assert abs(pv_coeffs(0, 0)[0] - want) < 1e-120


def test_alpha_matches_root_sum():
    # sum s_k = -c_5 = 1/alpha
    assert abs(-pv_coeffs(0, 0)[5] - 1 / alpha()) < 1e-100


def test_inversions():
    rng = random.Random(3)
    v1, v2 = mpc(rng.uniform(-2, 2), rng.uniform(-2, 2)), mpc(rng.uniform(-2, 2), rng.uniform(-2, 2))
    c = pv_coeffs(v1, v2)
    assert abs(v1_from_e2(c[4]) - v1) < 1e-100
    assert abs(v2_from_e5(v1, -c[1]) - v2) < 1e-90


def test_coeffs_from_roots_and_power_sums():
    roots = [mpc(1), mpc(2), mpc(0, 1)]
    c = coeffs_from_roots(roots)
    assert elementary(roots)[1] == sum(roots)
    ps = power_sums(c, 3)
    for m in range(1, 4):
        assert abs(ps[m - 1] - sum(r**m for r in roots)) < 1e-100
