"""V-parametrized solver tables: fits, selectors, persistence, and g_V."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpc, mpfr

from ..gmap import xg_combination
from ..group.invariants import CalibratedInvariants
from ..group.valentiner import SpecialPoints
from ..numerics.hpoly import (
    HPoly,
    PolyMap3,
    bordered_hessian_det,
    cross_grad,
    exact_divide,
    hessian_det,
    jacobian_det,
)
from ..numerics.linalg import det3
from ..numerics.precision import bits, cstr, digits, parse_cstr, working_precision
from ..resolvent import pv_coeffs, power_sums
from .engine import FitTable, ParameterContext, Sampler, invariant_fit

FORMAT_ID = "vsextic-tables"
FORMAT_VERSION = 1


class ClusterShapeUnexpected(RuntimeError):
    pass


class DegenerateV(ArithmeticError):
    pass


class VersionMismatch(ValueError):
    pass


class ChecksumMismatch(ValueError):
    pass


class ParseError(ValueError):
    pass


@dataclass
class SelectorTable:
    sigma: mpc
    values: list  # the distinct non-selected s-values v_j
    poly: list  # A_k = sum_i poly[i] s_k^i
    fits: dict  # "G{i}_{m}" -> FitTable


@dataclass
class SolverTables:
    precision: int
    system: int
    alpha: mpc
    mu3: mpc
    kappa_phi: mpc
    kappa_psi: mpc
    FV: FitTable
    D: FitTable
    selectors: SelectorTable
    signatures: dict  # orbit kind -> (V1, V2)
    ref_F: HPoly  # y-space sextic invariant, for oracle instances
    ref_conics: list  # scaled conics of the resolvent system
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# evaluators


def fv_evaluator(ctx: ParameterContext):
    inv = ctx.inv

    def ev(x):
        t = ctx.t_matrix(x)
        f31 = inv.F(x) ** 31
        return np.array(inv.F.compose_linear(t).coeffs(), dtype=object) / f31

    return ev


def d_evaluator(ctx: ParameterContext):
    inv = ctx.inv

    def ev(x):
        return [det3(ctx.t_matrix(x)) ** 2 / inv.F(x) ** 31]

    return ev


def selector_evaluator(ctx: ParameterContext, i: int, m: int):
    """Coefficients of sum_k C_k(T_x w)^{3i} C_k(x)^{3m} / F(x)^{31 i + m}."""
    inv = ctx.inv

    def ev(x):
        t = ctx.t_matrix(x)
        acc = None
        for c in inv.conics:
            ct = c.compose_linear(t) ** (3 * i)
            term = ct.scale(c(x) ** (3 * m))
            acc = term if acc is None else acc + term
        return np.array(acc.coeffs(), dtype=object) / inv.F(x) ** (31 * i + m)

    return ev


# ---------------------------------------------------------------------------


def _cluster(values, tol) -> list[list[int]]:
    groups: list[list[int]] = []
    for k, v in enumerate(values):
        for g in groups:
            if abs(values[g[0]] - v) <= tol:
                g.append(k)
                break
        else:
            groups.append([k])
    return groups


def selector_shape(inv: CalibratedInvariants, point) -> tuple[mpc, list]:
    """sigma (the unique doubled s-value) and the other distinct values at a 45-point."""
    s = inv.s_values(point)
    scale = max(abs(v) for v in s)
    groups = _cluster(s, scale * mpfr(10) ** -(digits() // 2))
    doubles = [g for g in groups if len(g) == 2]
    if len(doubles) != 1:
        sizes = sorted(len(g) for g in groups)
        raise ClusterShapeUnexpected(f"s-value multiplicities {sizes}: no unique doubled value")
    sigma = sum(s[k] for k in doubles[0]) / 2
    others = [sum(s[k] for k in g) / len(g) for g in groups if g is not doubles[0]]
    return sigma, others


def indicator_poly(sigma, values) -> list:
    """Coefficients (low first) of prod_j (s - v_j) / prod_j (sigma - v_j)."""
    poly = [mpc(1)]
    den = mpc(1)
    for v in values:
        nxt = [mpc(0)] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i + 1] = nxt[i + 1] + c
            nxt[i] = nxt[i] - c * v
        poly = nxt
        den = den * (sigma - v)
    return [c / den for c in poly]


def indicators(poly, s_values) -> list:
    out = []
    for s in s_values:
        acc = mpc(0)
        for c in reversed(poly):
            acc = acc * s + c
        out.append(acc)
    return out


def _evaluator(ctx: ParameterContext, kind: str, i: int, m: int):
    if kind == "FV":
        return fv_evaluator(ctx)
    if kind == "D":
        return d_evaluator(ctx)
    return selector_evaluator(ctx, i, m)


def _power(kind: str, i: int, m: int) -> int:
    """Normalization power of F(x) for each table kind."""
    return 31 if kind in ("FV", "D") else 31 * i + m


def _fit_job(job) -> FitTable:
    inv, eq, name, kind, i, m, seed, tol, nbits = job
    with working_precision(nbits):
        ctx = ParameterContext(inv, eq)
        ev = _evaluator(ctx, kind, i, m)
        return invariant_fit(name, ev, _power(kind, i, m), Sampler(inv, seed), ctx.V, holdout_tol=tol)


def run_fits(ctx: ParameterContext, specs, seed: int, holdout_tol=None, threads: int = 1, log=print) -> dict:
    """Run independent fits; ``specs`` holds (name, kind, i, m) with m the x-exponent of the selector. Each fit draws from its own seeded sampler."""
    jobs = [
        (ctx.inv, ctx.eq, name, kind, i, m, seed * 1000 + n, holdout_tol, bits())
        for n, (name, kind, i, m) in enumerate(specs)
    ]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_fit_job, jobs))
    else:
        results = [_fit_job(j) for j in jobs]
    out = {}
    for t in results:
        log(f"  fit {t.name}: basis {len(t.basis)}, holdout {float(t.holdout):.2e}")
        out[t.name] = t
    return out


def selector_specs(n_values: int) -> list:
    return [(f"G{i}_{m}", "G", i, m) for i in range(1, n_values + 1) for m in (1, 2)]


def derive_selectors(
    ctx: ParameterContext, sp: SpecialPoints, seed: int = 11, holdout_tol=None, threads: int = 1, log=print, fits=None
) -> SelectorTable:
    """Selector shape from the 45-orbit and the fitted numerators of A_V and its power-sum companion.

    ``fits`` may carry already computed selector fits (from a combined run).
    """
    inv = ctx.inv
    pts = sp.orbit("45")
    sigma, values = selector_shape(inv, pts[0].point)
    poly = indicator_poly(sigma, values)
    check = indicators(poly, inv.s_values(pts[17].point))
    tol = mpfr(10) ** -(digits() - 20)
    ones = sum(1 for a in check if abs(a - 1) <= tol)
    zeros_ = sum(1 for a in check if abs(a) <= tol)
    if ones != 2 or zeros_ != 4:
        raise ClusterShapeUnexpected(f"indicator values at a second 45-point: {[complex(a) for a in check]}")
    if fits is None:
        fits = run_fits(ctx, selector_specs(len(values)), seed, holdout_tol, threads, log)
    return SelectorTable(sigma, values, poly, {k: v for k, v in fits.items() if k.startswith("G")})


def orbit_signatures(inv: CalibratedInvariants, sp: SpecialPoints) -> dict:
    out = {}
    for kind in ("36", "45", "60", "60bar"):
        y = sp.orbit(kind)[0].point
        out[kind] = inv.V(y)
    return out


CORE_SPECS = [("FV", "FV", 0, 0), ("D", "D", 0, 0)]


def fit_core_tables(ctx: ParameterContext, seed: int = 7, holdout_tol=None, threads: int = 1, log=print):
    fits = run_fits(ctx, CORE_SPECS, seed, holdout_tol, threads, log)
    return fits["FV"], fits["D"]


# ---------------------------------------------------------------------------
# g_V


@dataclass
class GV:
    V: tuple
    F: HPoly
    Phi: HPoly
    Psi: HPoly
    X: HPoly
    g: PolyMap3
    psi: PolyMap3
    D: mpc
    remainder: mpfr

    def c128(self):
        """Coefficient matrices of g and psi in double precision."""
        return self.g.coeff_matrix_c128(), self.psi.coeff_matrix_c128()


def intrinsic_invariants(tables: SolverTables, v1, v2) -> tuple[HPoly, HPoly, HPoly, mpc]:
    fv = HPoly.from_coeffs(6, tables.FV(v1, v2))
    d = tables.D(v1, v2)[0]
    if abs(d) == 0:
        raise DegenerateV("D(V) vanishes")
    phi = hessian_det(fv).scale(tables.kappa_phi / d)
    psi = bordered_hessian_det(fv, phi).scale(tables.kappa_psi / d)
    return fv, phi, psi, d


def division_tol(tables: SolverTables):
    """Remainder tolerance for X_V division: limited by the fits as well as the precision."""
    worst_fit = max([tables.FV.holdout, tables.D.holdout] + [t.holdout for t in tables.selectors.fits.values()])
    return max(mpfr(10) ** -(digits() - 20), 1000 * mpfr(worst_fit))


def build_gV(tables: SolverTables, v1, v2) -> GV:
    fv, phi, psi, d = intrinsic_invariants(tables, v1, v2)
    xv = jacobian_det(fv, phi, psi)
    scale = fv.norm() * phi.norm() * psi.norm()
    if xv.norm() <= scale * mpfr(10) ** -(digits() // 2):
        raise DegenerateV("X_V vanishes identically at this V")
    xg = xg_combination(fv, phi, psi)
    g, rem = exact_divide(xg, xv, division_tol(tables))
    return GV((v1, v2), fv, phi, psi, xv, g.normalized(), cross_grad(fv, phi).normalized(), d, rem)


# ---------------------------------------------------------------------------
# persistence


def _fit_to_json(t: FitTable) -> dict:
    return {
        "name": t.name,
        "m": t.m,
        "shape": list(t.coeffs.shape),
        "coeffs": [cstr(v) for v in t.coeffs.reshape(-1)],
        "residual": cstr(mpc(t.residual), 8),
        "holdout": cstr(mpc(t.holdout), 8),
        "samples": t.samples,
        "precision": t.precision,
    }


def _fit_from_json(d: dict) -> FitTable:
    shape = tuple(d["shape"])
    vals = np.empty(len(d["coeffs"]), dtype=object)
    for k, s in enumerate(d["coeffs"]):
        vals[k] = parse_cstr(s)
    return FitTable(
        d["name"],
        int(d["m"]),
        vals.reshape(shape),
        residual=parse_cstr(d["residual"]).real,
        holdout=parse_cstr(d["holdout"]).real,
        samples=int(d["samples"]),
        precision=int(d["precision"]),
    )


def _payload(t: SolverTables) -> dict:
    sel = t.selectors
    return {
        "precision_bits": t.precision,
        "system": t.system,
        "constants": {
            "alpha": cstr(t.alpha),
            "mu3": cstr(t.mu3),
            "kappa_phi": cstr(t.kappa_phi),
            "kappa_psi": cstr(t.kappa_psi),
        },
        "tables": {"FV": _fit_to_json(t.FV), "D": _fit_to_json(t.D)},
        "selectors": {
            "sigma": cstr(sel.sigma),
            "values": [cstr(v) for v in sel.values],
            "poly": [cstr(v) for v in sel.poly],
            "fits": {k: _fit_to_json(v) for k, v in sel.fits.items()},
        },
        "signatures": {k: [cstr(a), cstr(b)] for k, (a, b) in t.signatures.items()},
        "reference": {
            "F": [cstr(c) for c in t.ref_F.coeffs()],
            "conics": [[cstr(c) for c in q.coeffs()] for q in t.ref_conics],
        },
        "meta": t.meta,
    }


def _checksum(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def save_tables(t: SolverTables, path) -> None:
    payload = _payload(t)
    doc = {"format": FORMAT_ID, "version": FORMAT_VERSION, "payload": payload, "sha256": _checksum(payload)}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)


def load_tables(path) -> SolverTables:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_ID:
        raise ParseError(f"{path}: not a table file")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: version {doc.get('version')}, expected {FORMAT_VERSION}")
    try:
        payload = doc["payload"]
        if _checksum(payload) != doc["sha256"]:
            raise ChecksumMismatch(f"{path}: checksum mismatch")
        prec = int(payload["precision_bits"])
        with working_precision(prec):
            c = payload["constants"]
            sel = payload["selectors"]
            t = SolverTables(
                precision=prec,
                system=int(payload["system"]),
                alpha=parse_cstr(c["alpha"]),
                mu3=parse_cstr(c["mu3"]),
                kappa_phi=parse_cstr(c["kappa_phi"]),
                kappa_psi=parse_cstr(c["kappa_psi"]),
                FV=_fit_from_json(payload["tables"]["FV"]),
                D=_fit_from_json(payload["tables"]["D"]),
                selectors=SelectorTable(
                    parse_cstr(sel["sigma"]),
                    [parse_cstr(v) for v in sel["values"]],
                    [parse_cstr(v) for v in sel["poly"]],
                    {k: _fit_from_json(v) for k, v in sel["fits"].items()},
                ),
                signatures={k: (parse_cstr(a), parse_cstr(b)) for k, (a, b) in payload["signatures"].items()},
                ref_F=HPoly.from_coeffs(6, [parse_cstr(c) for c in payload["reference"]["F"]]),
                ref_conics=[HPoly.from_coeffs(2, [parse_cstr(c) for c in q]) for q in payload["reference"]["conics"]],
                meta=payload.get("meta", {}),
            )
    except ChecksumMismatch:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{path}: malformed payload ({e})") from e
    return t


def selector_values(tables: SolverTables, v1, v2, fv_w, w) -> tuple[mpc, mpc]:
    """A = sum A_k(T_x w) s_k(x) and the squared-weight companion, at point w."""
    sel = tables.selectors
    coeffs = pv_coeffs(v1, v2)
    psums = power_sums(coeffs, 2)
    out = []
    for m in (1, 2):
        acc = sel.poly[0] * psums[m - 1]
        for i in range(1, len(sel.poly)):
            gi = HPoly.from_coeffs(6 * i, sel.fits[f"G{i}_{m}"](v1, v2))
            acc = acc + sel.poly[i] * gi(w) / fv_w**i
        out.append(acc)
    return out[0], out[1]
