import time

import pytest

from vsextic.numerics.precision import PRECOMPUTE_BITS, set_precision

set_precision(PRECOMPUTE_BITS)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ctx():
    from vsextic.pipeline import build_context

    return build_context(seed=0)


@pytest.fixture(scope="session")
def gmap(ctx):
    from vsextic.gmap import build_g

    t0 = time.perf_counter()
    gm = build_g(ctx.inv)
    gm.seconds = time.perf_counter() - t0
    return gm


TABLE_DIGITS = 115


@pytest.fixture(scope="session")
def hi_ctx():
    """The construction chain at table precision, shared by the precompute and by high-precision checks."""
    from vsextic.numerics.precision import working_precision
    from vsextic.pipeline import build_context, precompute_bits

    with working_precision(precompute_bits(TABLE_DIGITS)):
        return build_context(seed=0)


@pytest.fixture(scope="session")
def table_path(tmp_path_factory, hi_ctx):
    from vsextic.fit.tables import save_tables
    from vsextic.pipeline import precompute

    path = tmp_path_factory.mktemp("tables") / "tables.vsx"
    save_tables(precompute(TABLE_DIGITS, seed=0, ctx=hi_ctx), path)
    return path


@pytest.fixture(scope="session")
def tables(table_path):
    from vsextic.fit.tables import load_tables

    return load_tables(table_path)


@pytest.fixture(scope="session")
def ref(tables):
    from vsextic.solver import ReferenceInvariants

    return ReferenceInvariants(tables)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
