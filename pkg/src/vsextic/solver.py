"""Runtime solver: iterate g_V to a 45-line, collapse with psi_V, polish, and read off a root pair."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .fit.tables import GV, SolverTables, build_gV, selector_values
from .numerics.hpoly import bordered_hessian_det, hessian_det, monomial_values_c128
from .numerics.precision import PRECOMPUTE_BITS, bigc, cfmt, digits, working_precision
from .resolvent import coeffs_from_roots, eval_pv, pv_coeffs, v1_from_e2, v2_from_e5


class NotInFamily(ValueError):
    def __init__(self, index: int, err: float):
        super().__init__(f"coefficient of z^{index} is off the P_V family by {err:.3e}")
        self.index = index
        self.err = err

    def __reduce__(self):
        return (NotInFamily, (self.index, self.err))


class NoLineConvergence(RuntimeError):
    pass


class CollapseDegenerate(ArithmeticError):
    pass


class PolishDiverged(RuntimeError):
    pass


class SelectorInsane(RuntimeError):
    pass


class Exhausted(RuntimeError):
    def __init__(self, msg: str, report: "SolveReport"):
        super().__init__(msg)
        self.report = report


RETRYABLE = (NoLineConvergence, CollapseDegenerate, PolishDiverged, SelectorInsane)


@dataclass
class SolveOptions:
    tol_line: float = 1e-6
    tol_point: float = 1e-30
    tol_residual: float = 1e-10
    max_iter: int = 2000
    max_polish: int = 60
    retries: int = 10
    line_mode: str = "latest"  # or "project"
    rescue: bool = True  # recover from 36/60 limit points through their mirrors
    polish_bits: int = PRECOMPUTE_BITS

    def __post_init__(self):
        if self.max_iter < 1 or self.max_polish < 1 or self.retries < 0:
            raise ValueError("iteration caps must be positive")
        for t in (self.tol_line, self.tol_point, self.tol_residual):
            if not 0 < t < 1:
                raise ValueError("tolerances must lie in (0, 1)")
        if self.line_mode not in ("latest", "project"):
            raise ValueError(f"unknown line mode {self.line_mode!r}")


@dataclass
class Trajectory:
    points: list  # normalized iterates (complex128)
    lines: list  # normalized covectors
    line_step: int | None = None
    point_step: int | None = None

    @property
    def converged(self) -> bool:
        return self.line_step is not None or self.point_step is not None


@dataclass
class SolveReport:
    V: tuple
    roots: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    point: list = field(default_factory=list)
    iterations: dict = field(default_factory=lambda: {"pre": 0, "polish": 0})
    retries: int = 0
    seed: int = 0
    status: str = "failed"
    warnings: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json(self) -> dict:
        """Report dictionary; wall time is left out so equal seeds give equal reports."""
        return {
            "V": [cfmt(v, 30) for v in self.V],
            "roots": [cfmt(r, 30) for r in self.roots],
            "residuals": [float(r) for r in self.residuals],
            "point": [cfmt(c, 30) for c in self.point],
            "iterations": dict(self.iterations),
            "retries": self.retries,
            "seed": self.seed,
            "status": self.status,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# family membership


def from_sextic(coeffs, tol: float = 1e-12) -> tuple[mpc, mpc]:
    """(V1, V2) for a monic sextic given low order first; NotInFamily names the first bad coefficient."""
    c = [bigc(x) for x in coeffs]
    if len(c) != 7:
        raise ValueError("expected seven coefficients")
    if abs(c[6] - 1) > tol:
        raise ValueError("sextic is not monic")
    ref = pv_coeffs(0, 0)

    def rel(k, got, want):
        return float(abs(got - want) / max(abs(want), mpfr(10) ** -300))

    err = rel(5, c[5], ref[5])
    if err > tol:
        raise NotInFamily(5, err)
    # e_2 = c_4, e_5 = -c_1
    v1 = v1_from_e2(c[4])
    v2 = v2_from_e5(v1, -c[1])
    fam = pv_coeffs(v1, v2)
    for k in (3, 2, 0):
        err = rel(k, c[k], fam[k])
        if err > tol:
            raise NotInFamily(k, err)
    return v1, v2


# ---------------------------------------------------------------------------
# double-precision iteration


EPS64 = float(np.finfo(float).eps)
NOISE_FACTOR = 10.0


class FastMap:
    """Double-precision evaluator of a PolyMap3 with normalized output."""

    def __init__(self, m):
        self.degree = m.degree
        self.coeffs = m.coeff_matrix_c128().T  # (nmono, 3)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return monomial_values_c128(y, self.degree) @ self.coeffs

    def with_noise(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        """Value plus a relative rounding-error estimate from the condition number of the sum."""
        m = monomial_values_c128(y, self.degree)
        v = m @ self.coeffs
        top = np.max(np.abs(v))
        if top == 0:
            return v, float("inf")
        return v, float(EPS64 * np.max(np.abs(m) @ np.abs(self.coeffs)) / top)


def normalize(y: np.ndarray) -> np.ndarray:
    """Scale so the largest coordinate equals 1."""
    return y / y[np.argmax(np.abs(y))]


def proj_dist(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    i = int(np.argmax(np.abs(a)))
    if b[i] == 0:
        return float("inf")
    return float(np.max(np.abs(a / a[i] - b / b[i])))


def random_start(rng: random.Random) -> np.ndarray:
    """Uniform point on the unit sphere of C^3."""
    v = np.array([complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)])
    return v / np.linalg.norm(v)


def iterate_to_line(g: FastMap, p0: np.ndarray, tol_line: float = 1e-6, max_iter: int = 2000, tol_point: float = 1e-9) -> Trajectory:
    """Iterate in double precision until consecutive line covectors agree or the iterates stop moving.

    The point test is loose on purpose: double-precision noise in a degree-31 map sits near 1e-12
    for generic points and near 1e-8 at the 36- and 45-points, so the tolerance is also floored
    at a multiple of the per-step rounding estimate. The high-precision polish takes over from there.
    """
    p = normalize(np.asarray(p0, dtype=complex))
    traj = Trajectory([p], [])
    prev_line = None
    for k in range(1, max_iter + 1):
        q, noise = g.with_noise(p)
        if not np.all(np.isfinite(q)) or np.max(np.abs(q)) == 0:
            raise NoLineConvergence(f"iterate {k} degenerated")
        q = normalize(q)
        traj.points.append(q)
        tol_p = max(tol_point, NOISE_FACTOR * noise)
        if proj_dist(p, q) < tol_p:
            traj.point_step = k
            return traj
        line = np.cross(p, q)
        nrm = np.max(np.abs(line))
        if nrm < 1e-3 * tol_p:
            traj.point_step = k
            return traj
        line = normalize(line)
        traj.lines.append(line)
        if prev_line is not None and proj_dist(prev_line, line) < tol_line:
            traj.line_step = k
            return traj
        prev_line = line
        p = q
    raise NoLineConvergence(f"no line after {max_iter} iterations")


def collapse_line(gv: GV, traj: Trajectory, mode: str = "latest") -> list[mpc]:
    p = traj.points[-1]
    if mode == "project" and traj.lines:
        l = traj.lines[-1]
        p = p - (l @ p) * np.conj(l) / np.vdot(l, l)
    a = gv.psi([bigc(complex(c)) for c in p])
    scale = max(abs(c) for c in a)
    if scale == 0 or scale < gv.psi.norm() * mpfr(10) ** -(digits() // 2):
        raise CollapseDegenerate("psi_V vanishes on the detected line")
    return _normalize_mp(a)


def _normalize_mp(y) -> list[mpc]:
    i = max(range(3), key=lambda j: abs(y[j]))
    return [c / y[i] for c in y]


def _dist_mp(a, b) -> mpfr:
    i = max(range(3), key=lambda j: abs(a[j]))
    return max(abs(a[j] / a[i] - b[j] / b[i]) for j in range(3))


def polish(gv: GV, a, tol_point: float = 1e-30, max_steps: int = 60) -> tuple[list[mpc], int]:
    """Iterate g_V at high precision until consecutive iterates agree to ``tol_point``."""
    p = _normalize_mp(a)
    last = None
    growth = 0
    for step in range(1, max_steps + 1):
        q = gv.g(p)
        if max(abs(c) for c in q) == 0:
            raise PolishDiverged("g_V vanished")
        q = _normalize_mp(q)
        d = _dist_mp(p, q)
        if d < tol_point:
            return q, step
        if last is not None and d >= last:
            growth += 1
            if growth >= 10:
                raise PolishDiverged(f"distance grew for {growth} steps")
        else:
            growth = 0
        last = d
        p = q
    raise PolishDiverged(f"no convergence to {tol_point:g} in {max_steps} steps")


def point_signature(gv: GV, w) -> tuple[mpc, mpc]:
    f = gv.F(w)
    return gv.Phi(w) / f**2, gv.Psi(w) / f**5


MIRROR_COUNT = {"36": 5, "45": 4, "60": 3, "60bar": 3}


def nearest_orbit(tables: SolverTables, gv: GV, w) -> tuple[str, mpfr]:
    """Special orbit whose (V1, V2) signature is closest to that of w, with the relative mismatch."""
    sig = point_signature(gv, w)
    best, err = None, None
    for kind, want in tables.signatures.items():
        e = max(abs(sig[0] - want[0]) / abs(want[0]), abs(sig[1] - want[1]) / abs(want[1]))
        if err is None or e < err:
            best, err = kind, e
    return best, err


def mirror_directions(gv: GV, p, count: int, eps=None) -> list[np.ndarray]:
    """Directions of the mirrors through a special point p, read off the leading local term of X_V.

    X_V vanishes to order ``count`` at p; along p + eps (u + t v) the leading part is a
    degree-``count`` polynomial in t whose roots pick out the mirrors.
    """
    p64 = np.array([complex(c) for c in p])
    q, _ = np.linalg.qr(np.column_stack([p64, np.eye(3, dtype=complex)]))
    u, v = q[:, 1], q[:, 2]
    eps = eps or mpfr(10) ** -(digits() // (2 * count + 2))
    n = 2 * count + 2
    two_pi = 2 * gmpy2.const_pi()
    vals = []
    for k in range(n):
        t = mpc(gmpy2.cos(two_pi * k / n), gmpy2.sin(two_pi * k / n))
        y = [p[i] + eps * (bigc(u[i]) + t * bigc(v[i])) for i in range(3)]
        vals.append(gv.X(y))
    # discrete Fourier coefficients of the sampled circle give the t-polynomial
    coef = np.fft.fft(np.array([complex(x) for x in vals])) / n
    top = np.max(np.abs(coef[: count + 1]))
    if top == 0 or np.max(np.abs(coef[count + 1 :])) > 1e-6 * top:
        raise SelectorInsane(f"X_V does not vanish to order {count} at the limit point")
    roots = np.roots(coef[: count + 1][::-1])
    return [u + t * v for t in roots]


def rescue_from_point(tables: SolverTables, gv: GV, p, kind: str, opts: "SolveOptions"):
    """From a 36/60 limit point, collapse along one of its mirrors to a 45-point."""
    p64 = np.array([complex(c) for c in p])
    for d in mirror_directions(gv, p, MIRROR_COUNT[kind]):
        q = p64 + 0.25 * d / np.linalg.norm(d)
        try:
            a = collapse_line(gv, Trajectory([q], []))
            w, steps = polish(gv, a, opts.tol_point, opts.max_polish)
        except (CollapseDegenerate, PolishDiverged):
            continue
        if nearest_orbit(tables, gv, w)[0] == "45":
            return w, steps
    raise SelectorInsane(f"no mirror through the {kind}-point collapsed to a 45-point")


def extract_roots(tables: SolverTables, gv: GV, p45, tol: float = 1e-8) -> tuple[mpc, mpc, mpc]:
    """The root pair at a converged 45-point, plus the discriminant A^2 - 4B."""
    sig = point_signature(gv, p45)
    want = tables.signatures["45"]
    bad = max(abs(sig[0] - want[0]) / abs(want[0]), abs(sig[1] - want[1]) / abs(want[1]))
    if bad > tol:
        near = min(tables.signatures, key=lambda k: abs(sig[0] - tables.signatures[k][0]) + abs(sig[1] - tables.signatures[k][1]))
        raise SelectorInsane(f"converged point is not a 45-point (closest orbit: {near})")
    v1, v2 = gv.V
    A, At = selector_values(tables, v1, v2, gv.F(p45), p45)
    B = (A * A - At) / 2
    disc = A * A - 4 * B
    root = gmpy2.sqrt(disc)
    return (A + root) / 2, (A - root) / 2, disc


def solve(
    tables: SolverTables,
    v1=None,
    v2=None,
    seed: int = 0,
    opts: SolveOptions | None = None,
    sextic=None,
    gv: GV | None = None,
) -> SolveReport:
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    with working_precision(opts.polish_bits):
        if sextic is not None:
            v1, v2 = from_sextic(sextic)
        v1, v2 = bigc(v1), bigc(v2)
        report = SolveReport((v1, v2), seed=seed)
        if gv is None:
            gv = build_gV(tables, v1, v2)
        g64 = FastMap(gv.g)
        rng = random.Random(seed)
        errors = []
        for attempt in range(opts.retries + 1):
            report.retries = attempt
            try:
                traj = iterate_to_line(g64, random_start(rng), opts.tol_line, opts.max_iter)
                report.iterations["pre"] = len(traj.points) - 1
                if traj.line_step is not None:
                    a = collapse_line(gv, traj, opts.line_mode)
                else:
                    a = [bigc(complex(c)) for c in traj.points[-1]]
                p, steps = polish(gv, a, opts.tol_point, opts.max_polish)
                kind, _ = nearest_orbit(tables, gv, p)
                if kind != "45" and opts.rescue:
                    p, more = rescue_from_point(tables, gv, p, kind, opts)
                    steps += more
                report.iterations["polish"] = steps
                r1, r2, disc = extract_roots(tables, gv, p)
                res = [abs(eval_pv(v1, v2, r)) for r in (r1, r2)]
                if max(res) >= opts.tol_residual:
                    raise SelectorInsane(f"root residuals {[float(x) for x in res]}")
                # an absolute residual is weak for the tiny P_V coefficients; also bound the Newton step
                for r in (r1, r2):
                    if _newton_step(v1, v2, r) > opts.tol_residual * max(1, abs(r)):
                        if abs(disc) > mpfr(10) ** -20:
                            raise SelectorInsane("root fails the Newton-step check")
                if abs(disc) <= mpfr(10) ** -20 * max(1, abs(r1)) ** 2:
                    report.warnings.append("near-degenerate root pair (discriminant ~ 0)")
                report.roots = [r1, r2]
                report.residuals = res
                report.point = p
                report.status = "ok"
                report.wall_time = time.perf_counter() - t0
                return report
            except RETRYABLE as e:
                errors.append(f"{type(e).__name__}: {e}")
        report.status = "exhausted"
        report.warnings.extend(errors)
        report.wall_time = time.perf_counter() - t0
        raise Exhausted(f"no root pair after {opts.retries + 1} starts", report)


def _newton_step(v1, v2, r) -> mpfr:
    c = pv_coeffs(v1, v2)
    val = mpc(0)
    der = mpc(0)
    for k in range(6, -1, -1):
        der = der * r + val
        val = val * r + c[k]
    if der == 0:
        return mpfr("inf")
    return abs(val / der)


# ---------------------------------------------------------------------------
# oracle


class ReferenceInvariants:
    """y-space F, Phi, Psi and the resolvent conics rebuilt from stored tables."""

    def __init__(self, tables: SolverTables):
        self.F = tables.ref_F
        self.Phi = hessian_det(self.F).scale(tables.kappa_phi)
        self.Psi = bordered_hessian_det(self.F, self.Phi).scale(tables.kappa_psi)
        self.conics = tables.ref_conics

    def V(self, x):
        f = self.F(x)
        return self.Phi(x) / f**2, self.Psi(x) / f**5

    def s_values(self, x):
        f = self.F(x)
        return [c(x) ** 3 / f for c in self.conics]


@dataclass
class OracleInstance:
    seed: int
    x0: list
    V: tuple
    roots: list
    coeff_error: mpfr


def oracle_instance(ref: ReferenceInvariants, seed: int) -> OracleInstance:
    from .group.invariants import random_point

    x0 = random_point(random.Random(seed))
    v1, v2 = ref.V(x0)
    s = ref.s_values(x0)
    got = coeffs_from_roots(s)
    want = pv_coeffs(v1, v2)
    err = max(abs(a - b) for a, b in zip(got, want)) / max(abs(b) for b in want)
    tol = mpfr(10) ** -(digits() - 25)
    if err > tol:
        raise AssertionError(f"oracle roots disagree with P_V by {float(err):.3e}")
    return OracleInstance(seed, x0, (v1, v2), s, err)


def match_error(roots, truth) -> float:
    return max(float(min(abs(r - s) for s in truth)) for r in roots)
