import random

import numpy as np
import pytest
from gmpy2 import mpc, mpfr

from vsextic.numerics.hpoly import (
    HPoly,
    PolyMap3,
    RemainderTooLarge,
    bordered_hessian_det,
    cross_grad,
    exact_divide,
    grad,
    hessian_det,
    jacobian_det,
    monomials,
    n_terms,
    poly_eval,
)
from vsextic.numerics.precision import digits

y1, y2, y3 = (HPoly.variable(i) for i in range(3))


def rand_poly(d, rng):
    return HPoly.from_coeffs(d, [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(n_terms(d))])


def rand_point(rng):
    return [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(3)]


def const(p):
    assert p.degree == 0
    return p.coeffs()[0]


def test_term_counts():
    assert n_terms(31) == 528
    assert n_terms(76) == 3003
    assert all(sum(e) == 6 for e in monomials(6))


def test_poly_eval_examples():
    assert poly_eval(y1 * y1, [2, 0, 0]) == 4
    assert poly_eval(HPoly.zero(4), [1, 2, 3]) == 0


def test_compose_linear_examples():
    eye = np.eye(3, dtype=object)
    assert y1.compose_linear(eye).rel_diff(y1) == 0
    d = np.diag([2, 1, 1]).astype(object)
    assert (y1 * y1).compose_linear(d).rel_diff((y1 * y1).scale(4)) < 1e-100


def test_compose_associative():
    rng = random.Random(2)
    p = rand_poly(5, rng)
    m = np.array([[mpc(rng.uniform(-1, 1)) for _ in range(3)] for _ in range(3)], dtype=object)
    n = np.array([[mpc(rng.uniform(-1, 1)) for _ in range(3)] for _ in range(3)], dtype=object)
    lhs = p.compose_linear(m).compose_linear(n)
    rhs = p.compose_linear(m.dot(n))
    assert lhs.rel_diff(rhs) < mpfr(10) ** -(digits() - 10)


def test_grad_examples():
    g = grad(y1 * y2 * y3)
    assert g[0].rel_diff(y2 * y3) == 0 and g[1].rel_diff(y1 * y3) == 0 and g[2].rel_diff(y1 * y2) == 0
    g = grad(y1 * y1 * y1)
    assert g[0].rel_diff((y1 * y1).scale(3)) == 0 and g[1].is_zero() and g[2].is_zero()
    with pytest.raises(ValueError):
        grad(HPoly.constant(3))


def test_euler_identity():
    rng = random.Random(4)
    p = rand_poly(7, rng)
    g = grad(p)
    lhs = y1 * g[0] + y2 * g[1] + y3 * g[2]
    assert lhs.rel_diff(p.scale(7)) < mpfr(10) ** -(digits() - 10)


def test_homogeneity():
    rng = random.Random(5)
    p = rand_poly(9, rng)
    y = rand_point(rng)
    lam = mpc(0.7, -1.3)
    got = p([lam * c for c in y])
    want = lam**9 * p(y)
    assert abs(got - want) / abs(want) < mpfr(10) ** -(digits() - 10)


def test_cross_grad_examples():
    m = cross_grad(y1, y2)
    assert [complex(const(c)) for c in m] == [0, 0, 1]
    q = y1 * y1 + y2 * y3
    m = cross_grad(q, q)
    assert all(c.is_zero() for c in m)


def test_hessian_examples():
    sq = y1 * y1 + y2 * y2 + y3 * y3
    assert const(hessian_det(sq)) == 8
    assert hessian_det(y1 * y1 * y1).is_zero()


def test_bordered_hessian_sum_of_squares():
    # det [[2I, e1], [e1^T, 0]] = -e1^T adj(2I) e1 = -4
    sq = y1 * y1 + y2 * y2 + y3 * y3
    assert const(bordered_hessian_det(sq, y1)) == -4


def test_bordered_hessian_degree():
    rng = random.Random(6)
    f = rand_poly(6, rng)
    assert bordered_hessian_det(f, hessian_det(f)).degree == 30


def test_jacobian_examples():
    assert const(jacobian_det(y1, y2, y3)) == 1
    assert jacobian_det(y1, y1, y2).is_zero()


def test_exact_divide_examples():
    q, rem = exact_divide(y1 * y1 * y2, y1)
    assert q.rel_diff(y1 * y2) < 1e-100 and rem < 1e-100
    with pytest.raises(RemainderTooLarge):
        exact_divide(y1 * y1 + y2 * y2, y1)


def test_exact_divide_random():
    rng = random.Random(7)
    q = rand_poly(12, rng)
    den = rand_poly(9, rng)
    got, rem = exact_divide(q * den, den)
    assert rem < mpfr(10) ** -(digits() - 20)
    assert got.rel_diff(q) < mpfr(10) ** -(digits() - 25)


def test_exact_divide_polymap():
    rng = random.Random(8)
    den = rand_poly(4, rng)
    m = PolyMap3([rand_poly(5, rng) for _ in range(3)])
    got, rem = exact_divide(m * den, den)
    assert got.rel_diff(m) < mpfr(10) ** -(digits() - 25)


def test_product_matches_pointwise():
    rng = random.Random(9)
    a, b = rand_poly(20, rng), rand_poly(31, rng)
    y = rand_point(rng)
    assert abs((a * b)(y) - a(y) * b(y)) / abs(a(y) * b(y)) < mpfr(10) ** -(digits() - 10)


def test_c128_eval_matches():
    rng = random.Random(10)
    p = rand_poly(8, rng)
    y = rand_point(rng)
    got = p.eval_c128(np.array([complex(c) for c in y]))
    assert abs(got - complex(p(y))) < 1e-12 * abs(complex(p(y)))
