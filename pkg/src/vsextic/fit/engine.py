"""The parametrizing map T_x and least-squares fits of invariants in (V1, V2)."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from gmpy2 import mpc, mpfr

from ..group.invariants import CalibratedInvariants, EquivariantBasis, random_point
from ..numerics.linalg import lstsq, maxabs
from ..numerics.precision import bits, digits


class HoldoutFailure(RuntimeError):
    def __init__(self, name: str, err, tol):
        super().__init__(f"{name}: holdout error {float(err):.3e} exceeds {float(tol):.3e}")
        self.name = name
        self.err = err
        self.tol = tol

    def __reduce__(self):
        return (HoldoutFailure, (self.name, self.err, self.tol))


class ParameterContext:
    """Everything needed to evaluate T_x: calibrated invariants plus h and k."""

    def __init__(self, inv: CalibratedInvariants, eq: EquivariantBasis):
        self.inv = inv
        self.h = eq.h
        self.k = eq.k
        self.eq = eq

    def V(self, x) -> tuple[mpc, mpc]:
        return self.inv.V(x)

    def t_matrix(self, x) -> np.ndarray:
        """Columns Psi(x) x, Phi(x) h(x), F(x) k(x)."""
        inv = self.inv
        cols = (
            [inv.Psi(x) * xi for xi in x],
            [inv.Phi(x) * v for v in self.h(x)],
            [inv.F(x) * v for v in self.k(x)],
        )
        m = np.empty((3, 3), dtype=object)
        for j in range(3):
            for i in range(3):
                m[i, j] = cols[j][i]
        return m


def t_map(ctx: ParameterContext, x, w) -> tuple[list, np.ndarray]:
    """y = T_x w; returns the image and the matrix T_x."""
    m = ctx.t_matrix(x)
    return list(m.dot(np.array(w, dtype=object))), m


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitBasis:
    """Monomials V1^b V2^c with 2b + 5c <= m."""

    m: int

    @property
    def exponents(self) -> list[tuple[int, int]]:
        return [(b, c) for c in range(self.m // 5 + 1) for b in range((self.m - 5 * c) // 2 + 1)]

    def __len__(self) -> int:
        return len(self.exponents)

    def values(self, v1, v2) -> np.ndarray:
        exps = self.exponents
        nb = max(b for b, _ in exps)
        nc = max(c for _, c in exps)
        p1 = [mpc(1)]
        for _ in range(nb):
            p1.append(p1[-1] * v1)
        p2 = [mpc(1)]
        for _ in range(nc):
            p2.append(p2[-1] * v2)
        out = np.empty(len(exps), dtype=object)
        for k, (b, c) in enumerate(exps):
            out[k] = p1[b] * p2[c]
        return out


@dataclass
class FitTable:
    name: str
    m: int
    coeffs: np.ndarray  # shape (len(basis), n_outputs)
    residual: mpfr = mpfr(0)
    holdout: mpfr = mpfr(0)
    samples: int = 0
    precision: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def basis(self) -> FitBasis:
        return FitBasis(self.m)

    def __call__(self, v1, v2) -> np.ndarray:
        return self.basis.values(v1, v2).dot(self.coeffs)


class Sampler:
    """Random x in the unit polydisk, rejecting points with tiny |F| or |X|."""

    def __init__(self, inv: CalibratedInvariants, seed: int, pool: int = 48):
        self.inv = inv
        self.rng = random.Random(seed)
        fs, xs = [], []
        for _ in range(pool):
            x = random_point(self.rng)
            fs.append(abs(inv.F(x)))
            xs.append(abs(inv.X(x)))
        self.fmin = sorted(fs)[pool // 2] / 1000
        self.xmin = sorted(xs)[pool // 2] / 1000

    def draw(self):
        while True:
            x = random_point(self.rng)
            if abs(self.inv.F(x)) >= self.fmin and abs(self.inv.X(x)) >= self.xmin:
                return x


def invariant_fit(
    name: str,
    evaluator: Callable,
    m,
    sampler: Sampler,
    v_of: Callable,
    n_samples: int | None = None,
    n_holdout: int = 10,
    holdout_tol=None,
) -> FitTable:
    """Fit evaluator(x) (already divided by F(x)^m) over the basis {V1^b V2^c}.

    ``v_of`` maps x to (V1, V2).
    """
    if isinstance(m, float) and not m.is_integer():
        raise ValueError(f"normalization power {m} is not an integer")
    if int(m) != m or m < 0:
        raise ValueError(f"normalization power {m} is not a non-negative integer")
    m = int(m)
    basis = FitBasis(m)
    n = len(basis)
    n_samples = n_samples or int(np.ceil(1.5 * n)) + 2
    if holdout_tol is None:
        holdout_tol = mpfr(10) ** -(digits() - 25)
    rows, rhs = [], []
    for _ in range(n_samples):
        x = sampler.draw()
        v1, v2 = v_of(x)
        rows.append(basis.values(v1, v2))
        rhs.append(np.asarray(evaluator(x), dtype=object))
    a = np.vstack(rows)
    b = np.vstack(rhs)
    # column equilibration keeps the pivoting meaningful when V spans many scales
    scale = np.array([maxabs(a[:, j]) for j in range(n)], dtype=object)
    coeffs_scaled, res = lstsq(a / scale, b)
    coeffs = coeffs_scaled / scale[:, None]
    table = FitTable(name, m, coeffs, residual=res, samples=n_samples, precision=bits())
    worst = mpfr(0)
    for _ in range(n_holdout):
        x = sampler.draw()
        v1, v2 = v_of(x)
        want = np.asarray(evaluator(x), dtype=object)
        got = table(v1, v2)
        worst = max(worst, maxabs(got - want) / maxabs(want))
    table.holdout = worst
    if worst > holdout_tol:
        raise HoldoutFailure(name, worst, holdout_tol)
    return table
