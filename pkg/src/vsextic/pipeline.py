"""Shared construction chain: group, conics, special points, calibration, equivariants, tables."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .fit.engine import ParameterContext
from .fit.tables import (
    CORE_SPECS,
    SolverTables,
    derive_selectors,
    orbit_signatures,
    run_fits,
    selector_shape,
    selector_specs,
)
from .group.invariants import CalibratedInvariants, EquivariantBasis, calibrate, equivariant_generators
from .group.valentiner import ConicSystems, GroupTable, SpecialPoints, icosahedral_conics, special_points, valentiner_group
from .numerics.precision import bits_for_digits, working_precision

GUARD_BITS = 128


@dataclass
class GroupContext:
    table: GroupTable
    conics: ConicSystems
    special: SpecialPoints
    inv: CalibratedInvariants
    eq: EquivariantBasis | None = None
    timings: dict = field(default_factory=dict)

    @property
    def param(self) -> ParameterContext:
        if self.eq is None:
            raise RuntimeError("equivariant generators were not built")
        return ParameterContext(self.inv, self.eq)


def _quiet(*_a, **_k):
    pass


def build_context(seed: int = 0, equivariants: bool = True, log=_quiet) -> GroupContext:
    """Run the construction chain at the current working precision."""
    times = {}
    t0 = time.perf_counter()
    table = valentiner_group()
    times["group"] = time.perf_counter() - t0
    log(f"group: {table.order} elements, {len(table.reflections)} reflections ({times['group']:.1f}s)")
    t0 = time.perf_counter()
    conics = icosahedral_conics(table, seed=seed)
    times["conics"] = time.perf_counter() - t0
    log(f"conics: {len(conics.systems)} systems ({times['conics']:.1f}s)")
    t0 = time.perf_counter()
    sp = special_points(table, conics)
    times["special"] = time.perf_counter() - t0
    log(f"special points: {sp.counts()} ({times['special']:.1f}s)")
    t0 = time.perf_counter()
    inv = calibrate(table, conics, seed=seed + 1)
    times["calibrate"] = time.perf_counter() - t0
    log(f"calibration: conic system {inv.system} ({times['calibrate']:.1f}s)")
    eq = None
    if equivariants:
        t0 = time.perf_counter()
        eq = equivariant_generators(inv, table, seed=seed + 3)
        times["equivariants"] = time.perf_counter() - t0
        log(f"equivariant generators h, k ({times['equivariants']:.1f}s)")
    return GroupContext(table, conics, sp, inv, eq, times)


def precompute_bits(digits: int) -> int:
    return bits_for_digits(digits) + GUARD_BITS


def precompute(digits: int = 115, seed: int = 0, threads: int = 1, log=_quiet, ctx: GroupContext | None = None) -> SolverTables:
    """Build solver tables valid to about ``digits`` digits; the work runs with extra guard bits.

    A context already built at ``precompute_bits(digits)`` may be passed in to skip that stage.
    """
    nbits = precompute_bits(digits)
    holdout_tol = 10.0 ** -(digits - 25) if digits > 25 else None
    with working_precision(nbits):
        t0 = time.perf_counter()
        reused = 0.0
        if ctx is None:
            ctx = build_context(seed, log=log)
        else:
            reused = sum(ctx.timings.values())
        if ctx.inv.F.coeffs()[0].precision[0] < nbits:
            raise ValueError(f"context precision below the required {nbits} bits")
        pc = ctx.param
        _, values = selector_shape(ctx.inv, ctx.special.orbit("45")[0].point)
        fits = run_fits(pc, CORE_SPECS + selector_specs(len(values)), seed + 7, holdout_tol, threads, log)
        sel = derive_selectors(pc, ctx.special, log=log, fits=fits)
        inv = ctx.inv
        tables = SolverTables(
            precision=nbits,
            system=inv.system,
            alpha=inv.alpha,
            mu3=inv.mu3,
            kappa_phi=inv.kappa_phi,
            kappa_psi=inv.kappa_psi,
            FV=fits["FV"],
            D=fits["D"],
            selectors=sel,
            signatures=orbit_signatures(inv, ctx.special),
            ref_F=inv.F,
            ref_conics=list(inv.conics),
            meta={"digits": digits, "seed": seed, "seconds": round(time.perf_counter() - t0 + reused, 1)},
        )
    return tables
