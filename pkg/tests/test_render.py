import numpy as np
import pytest

from vsextic.gmap import QUARTIC_B, quartic_roots
from vsextic.render import (
    LineModel,
    RenderSpec,
    attractor_table,
    classify,
    classify_point,
    disk_check,
    negation_pairing,
    pixel_grid,
    render_line_basins,
    symmetry_check,
)


@pytest.fixture(scope="module")
def model():
    return LineModel.printed()


def test_b_root_labelled_immediately(model):
    att, kinds = attractor_table()
    for r in quartic_roots(QUARTIC_B):
        z = complex(r)
        labels, iters = classify(model, np.array([z]), att, 500, 1e-6)
        assert iters[0] == 0
        assert kinds[labels[0] - 1] == "45"
        assert classify_point(z, model=model) == labels[0]


def test_sixteen_distinct_attractors():
    att, kinds = attractor_table()
    assert len(att) == 16
    d = np.abs(att[:, None] - att[None, :]) + np.eye(16)
    assert d.min() > 1e-3
    assert [kinds.count(k) for k in ("36", "45", "60", "60bar")] == [4, 4, 4, 4]


def test_attractors_are_fixed(model):
    att, _ = attractor_table()
    assert np.max(np.abs(model(att) - att)) < 1e-9


def test_negation_pairing_matches_attractors():
    att, _ = attractor_table()
    nu = negation_pairing()
    assert nu[0] == 0
    for k in range(1, 17):
        assert att[nu[k] - 1] == -att[k - 1]
        assert nu[nu[k]] == k


def test_model_odd_bit_for_bit(model):
    rng = np.random.default_rng(1)
    z = rng.uniform(-3, 3, 2000) + 1j * rng.uniform(-3, 3, 2000)
    assert np.array_equal(model(-z), -model(z))


def test_negated_points_get_paired_labels(model):
    s = symmetry_check(model, n=2000, seed=3)
    assert s["mismatches"] == 0


def test_unit_circle_resolves(model):
    rng = np.random.default_rng(2)
    z = np.exp(2j * np.pi * rng.uniform(0, 1, 2000))
    att, _ = attractor_table()
    labels, _ = classify(model, z, att, 500, 1e-6)
    assert np.mean(labels > 0) >= 0.99


def test_immediate_basins(model):
    assert disk_check(model, samples=64)["failed"] == []


def test_pixel_grid_symmetric():
    g = pixel_grid(64, 2.0)
    assert np.array_equal(g[::-1, ::-1], -g)
    assert abs(g.real.max() - (2.0 - 2.0 / 64)) < 1e-15


@pytest.mark.parametrize("kw", [dict(resolution=8), dict(iterations=0), dict(source="sketch")])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        RenderSpec(**kw)


def test_small_render(tmp_path, model):
    out = tmp_path / "b.ppm"
    img = render_line_basins(RenderSpec(96, 500), out=out, model=model)
    s = img.stats
    assert s["labels_present"] == 16
    assert s["grid_symmetric"]
    assert s["resolved_fraction"] >= 0.99
    data = out.read_bytes()
    assert data.startswith(b"P6\n96 96\n255\n")
    assert len(data) == len(b"P6\n96 96\n255\n") + 96 * 96 * 3


def test_render_deterministic(tmp_path, model):
    a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
    render_line_basins(RenderSpec(48, 200), out=a, model=model)
    render_line_basins(RenderSpec(48, 200), out=b, model=model)
    assert a.read_bytes() == b.read_bytes()


def test_derived_model_agrees_with_printed(ctx, gmap, model):
    from vsextic.gmap import restrict_to_line

    lr = restrict_to_line(gmap, ctx.table, ctx.special)
    derived, dropped = LineModel.from_coeffs(lr.p, lr.q)
    assert dropped < 1e-40
    rng = np.random.default_rng(4)
    z = rng.uniform(-2, 2, 500) + 1j * rng.uniform(-2, 2, 500)
    assert np.max(np.abs(derived(z) - model(z)) / np.abs(model(z))) < 1e-12
