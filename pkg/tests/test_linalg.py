import random

import numpy as np
import pytest
from gmpy2 import mpc, mpfr

from vsextic.gmap import printed_p, printed_q, printed_resultant_nonzero
from vsextic.numerics.linalg import RankDeficient, det, eye, linear_solve, lstsq, null_space, resultant_1d
from vsextic.numerics.precision import digits


def test_identity_system():
    b = np.array([mpc(1, 2), mpc(3), mpc(-1, 1)], dtype=object)
    x, res, rank = linear_solve(eye(3), b)
    assert rank == 3 and res == 0
    assert all(abs(x[i] - b[i]) == 0 for i in range(3))


def test_duplicated_rows():
    rng = random.Random(1)
    a = np.array([[mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(3)] for _ in range(3)], dtype=object)
    x0 = np.array([mpc(1), mpc(-2, 1), mpc(0.5)], dtype=object)
    a2 = np.vstack([a, a])
    x, res, _ = linear_solve(a2, a2.dot(x0))
    assert res < mpfr(10) ** -(digits() - 5)
    assert max(abs(x[i] - x0[i]) for i in range(3)) < mpfr(10) ** -(digits() - 10)


def test_vandermonde_cubic():
    coeffs = [mpc(2), mpc(-1, 3), mpc(0.25), mpc(-5, -1)]
    zs = [mpc(k / 10 - 0.45, 0.3 * (k % 3)) for k in range(10)]
    a = np.array([[z**j for j in range(4)] for z in zs], dtype=object)
    b = np.array([sum(c * z**j for j, c in enumerate(coeffs)) for z in zs], dtype=object)
    x, res = lstsq(a, b)
    assert max(abs(x[j] - coeffs[j]) for j in range(4)) < mpfr(10) ** -(digits() - 10)


def test_kernel_beyond_expected_raises():
    a = np.array([[mpc(1), mpc(1)], [mpc(2), mpc(2)], [mpc(3), mpc(3)]], dtype=object)
    b = np.array([mpc(1), mpc(2), mpc(3)], dtype=object)
    with pytest.raises(RankDeficient):
        linear_solve(a, b)
    x, res, rank = linear_solve(a, b, expected_kernel=1)
    assert rank == 1 and res < mpfr(10) ** -(digits() - 5)


def test_null_space():
    a = np.array([[mpc(1), mpc(2), mpc(3)], [mpc(2), mpc(4), mpc(6)]], dtype=object)
    ns = null_space(a, mpfr(10) ** -(digits() // 2))
    assert ns.shape[1] == 2
    assert max(abs(v) for v in a.dot(ns).ravel()) < mpfr(10) ** -(digits() - 5)


def test_det():
    a = np.array([[mpc(2), mpc(1)], [mpc(1), mpc(3)]], dtype=object)
    assert det(a) == 5


def test_resultant_examples():
    assert abs(abs(resultant_1d([-1, 1], [-2, 1])) - 1) < 1e-100
    assert abs(resultant_1d([-1, 1], [-1, 1])) < 1e-100


def test_printed_line_model_resultant_nonzero():
    assert printed_resultant_nonzero()
    # the same conclusion in floating arithmetic, after scaling to unit max-norm
    p = [mpc(c) / max(map(abs, printed_p())) for c in printed_p()]
    q = [mpc(c) / max(map(abs, printed_q())) for c in printed_q()]
    assert abs(resultant_1d(p, q)) > 0
