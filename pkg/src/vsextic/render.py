"""Basins of attraction of the line model g_L(z) = p(z)/q(z) on a mirror."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gmap import DERIVED_CD_R2, attractors, printed_p, printed_q

KINDS = ("36", "45", "60", "60bar")

# base colours per attractor type, four shades each
_BASE = {
    "36": (220, 60, 50),
    "45": (40, 110, 220),
    "60": (40, 170, 80),
    "60bar": (235, 185, 40),
}


@dataclass
class RenderSpec:
    resolution: int = 1024
    iterations: int = 500
    radius: float = 1e-6
    extent: float = 2.0
    source: str = "printed"

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.source not in ("printed", "derived"):
            raise ValueError(f"unknown source {self.source!r}")


class LineModel:
    """Even numerator, odd denominator: both evaluated through z^2, so g(-z) = -g(z) bit for bit."""

    def __init__(self, p_even: np.ndarray, q_odd: np.ndarray):
        # p_even[j] multiplies z^(2j); q_odd[j] multiplies z^(2j+1)
        self.pe = np.asarray(p_even, dtype=complex)
        self.qo = np.asarray(q_odd, dtype=complex)
        scale = max(np.max(np.abs(self.pe)), np.max(np.abs(self.qo)))
        self.pe = self.pe / scale
        self.qo = self.qo / scale

    @classmethod
    def printed(cls) -> "LineModel":
        return cls(np.array(printed_p()[0::2], dtype=float), np.array(printed_q()[1::2], dtype=float))

    @classmethod
    def from_coeffs(cls, p, q, tol: float = 1e-30) -> tuple["LineModel", float]:
        """Keep the even part of p and odd part of q; return the discarded relative size."""
        p = np.array([complex(c) for c in p])
        q = np.array([complex(c) for c in q])
        big = max(np.max(np.abs(p)), np.max(np.abs(q)))
        dropped = max(np.max(np.abs(p[1::2]), initial=0), np.max(np.abs(q[0::2]), initial=0)) / big
        return cls(p[0::2], q[1::2]), float(dropped)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        inner = np.abs(z) <= 1
        if np.any(inner):
            zi = z[inner]
            s = zi * zi
            out[inner] = np.polyval(self.pe[::-1], s) / (zi * np.polyval(self.qo[::-1], s))
        outer = ~inner
        if np.any(outer):
            # w = 1/z: p(z)/q(z) = w P(w^2) / Q(w^2) with reversed coefficient lists
            w = 1 / z[outer]
            s = w * w
            out[outer] = w * np.polyval(self.pe, s) / np.polyval(self.qo, s)
        return out


def attractor_table(r2=DERIVED_CD_R2) -> tuple[np.ndarray, list[str]]:
    """The 16 attractors, paired so that entry k+2 is exactly the negative of entry k in each type."""
    pts, kinds = [], []
    for kind, roots in attractors(r2).items():
        rs = [complex(r) for r in roots]
        # keep one representative of each +- pair, then negate exactly
        reps = []
        for r in sorted(rs, key=lambda c: (round(c.real, 9), round(c.imag, 9)), reverse=True):
            if not any(abs(r + x) < 1e-9 for x in reps) and len(reps) < 2:
                reps.append(r)
        for r in reps + [-r for r in reps]:
            pts.append(r)
            kinds.append(kind)
    return np.array(pts), kinds


def negation_pairing(n: int = 16) -> np.ndarray:
    """nu[label] for labels 1..16 (0 = unresolved maps to itself)."""
    nu = np.zeros(n + 1, dtype=int)
    for base in range(0, n, 4):
        for k in range(4):
            nu[base + k + 1] = base + (k + 2) % 4 + 1
    return nu


def classify(model: LineModel, z: np.ndarray, att: np.ndarray, iterations: int, radius: float):
    """Labels (1..16, 0 unresolved) and iteration counts for an array of starting points."""
    z = np.array(z, dtype=complex).ravel()
    labels = np.zeros(z.shape, dtype=np.int16)
    iters = np.full(z.shape, iterations, dtype=np.int32)
    active = np.arange(z.size)
    cur = z.copy()
    for it in range(iterations + 1):
        d = np.abs(cur[:, None] - att[None, :])
        hit = d.min(axis=1) < radius
        if np.any(hit):
            idx = active[hit]
            labels[idx] = d[hit].argmin(axis=1) + 1
            iters[idx] = it
            keep = ~hit
            active = active[keep]
            cur = cur[keep]
        if it == iterations or active.size == 0:
            break
        with np.errstate(all="ignore"):
            cur = model(cur)
        bad = ~np.isfinite(cur)
        if np.any(bad):
            # z = 0 maps to infinity and back; park such points at a large finite value
            cur[bad] = 1e300
    return labels, iters


def classify_point(z: complex, spec: RenderSpec | None = None, model: LineModel | None = None) -> int:
    spec = spec or RenderSpec()
    model = model or LineModel.printed()
    att, _ = attractor_table()
    labels, _ = classify(model, np.array([z]), att, spec.iterations, spec.radius)
    return int(labels[0])


@dataclass
class BasinImage:
    labels: np.ndarray  # (res, res), row 0 at the top
    iterations: np.ndarray
    attractors: np.ndarray
    kinds: list
    stats: dict = field(default_factory=dict)

    def rgb(self) -> np.ndarray:
        palette = np.zeros((17, 3))
        for k, kind in enumerate(self.kinds):
            shade = 1.0 - 0.15 * (k % 4)
            palette[k + 1] = np.array(_BASE[kind]) * shade
        fade = 1.0 - 0.5 * np.minimum(self.iterations, 40) / 40.0
        img = palette[self.labels] * fade[..., None]
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)

    def write_ppm(self, path) -> None:
        img = self.rgb()
        h, w, _ = img.shape
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode())
            fh.write(img.tobytes())


def pixel_grid(res: int, extent: float) -> np.ndarray:
    """Pixel centres over [-extent, extent]^2; exactly symmetric under negation."""
    k = 2 * np.arange(res) + 1 - res
    step = extent / res
    xs = k * step
    ys = -k * step
    return xs[None, :] + 1j * ys[:, None]


def line_model(source: str) -> tuple[LineModel, dict]:
    if source == "printed":
        return LineModel.printed(), {}
    from .gmap import build_g, restrict_to_line
    from .numerics.precision import PRECOMPUTE_BITS, working_precision
    from .pipeline import build_context

    with working_precision(PRECOMPUTE_BITS):
        ctx = build_context(equivariants=False)
        lr = restrict_to_line(build_g(ctx.inv), ctx.table, ctx.special)
    model, dropped = LineModel.from_coeffs(lr.p, lr.q)
    return model, {"derived_mismatch": float(lr.mismatch), "dropped_parity": dropped}


def render_line_basins(spec: RenderSpec, out=None, model: LineModel | None = None) -> BasinImage:
    info = {}
    if model is None:
        model, info = line_model(spec.source)
    att, kinds = attractor_table()
    grid = pixel_grid(spec.resolution, spec.extent)
    labels, iters = classify(model, grid, att, spec.iterations, spec.radius)
    labels = labels.reshape(grid.shape)
    iters = iters.reshape(grid.shape)
    resolved = labels > 0
    counts = np.bincount(labels.ravel(), minlength=17)
    stats = {
        "resolution": spec.resolution,
        "iterations": spec.iterations,
        "source": spec.source,
        "resolved_fraction": float(resolved.mean()),
        "mean_iterations": float(iters[resolved].mean()) if resolved.any() else float("nan"),
        "labels_present": int(np.count_nonzero(counts[1:])),
        "label_counts": counts.tolist(),
        # the grid is symmetric, so negation is a 180-degree rotation of the label image
        "grid_symmetric": bool(np.array_equal(negation_pairing()[labels], labels[::-1, ::-1])),
        **info,
    }
    img = BasinImage(labels, iters, att, kinds, stats)
    if out is not None:
        img.write_ppm(out)
    return img


def symmetry_check(model: LineModel, n: int = 10_000, seed: int = 0, iterations: int = 500, radius: float = 1e-6) -> dict:
    rng = np.random.default_rng(seed)
    z = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
    att, _ = attractor_table()
    a, _ = classify(model, z, att, iterations, radius)
    b, _ = classify(model, -z, att, iterations, radius)
    nu = negation_pairing()
    return {"samples": n, "mismatches": int(np.count_nonzero(nu[a] != b))}


def disk_check(model: LineModel, disk: float = 1e-3, samples: int = 256, seed: int = 0, iterations: int = 500, radius: float = 1e-6) -> dict:
    """Label every sample in a small disk around each attractor; all should carry its own label."""
    rng = np.random.default_rng(seed)
    att, _ = attractor_table()
    bad = []
    for k, a in enumerate(att):
        r = disk * np.sqrt(rng.uniform(0, 1, samples))
        t = rng.uniform(0, 2 * np.pi, samples)
        z = a + r * np.exp(1j * t)
        labels, _ = classify(model, z, att, iterations, radius)
        if np.any(labels != k + 1):
            bad.append(k + 1)
    return {"attractors": len(att), "failed": bad}
