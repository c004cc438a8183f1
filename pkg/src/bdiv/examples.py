"""Generators for the concrete test data: the Nirenberg field whose
Helmholtz solution blows up logarithmically, the ball characteristic field,
the dyadic pair witnessing non-differentiability of the weak-Lp set norm,
and seeded random fields for the property suites.

All generators are pure functions of their arguments: same inputs, same
bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    divergence_array,
    gradient_array,
    mean_zero,
)


@dataclass(frozen=True)
class ExampleSpec:
    """Tagged description of one generated datum; generate() dispatches.

    kind is one of nirenberg, ball, tatar, random; only the parameters the
    kind consumes are read.
    """

    kind: str
    n: int = 0
    alpha: float = 1.0
    radius: float = 1.0
    half_width: float | None = None
    p: float = 2.0
    levels: int = 8
    seed: int = 0
    law: str = "gaussian"
    spikes: int = 8
    amplitude: float = 10.0
    d: int = 2
    periodic: bool = False

    def __post_init__(self):
        if self.kind not in ("nirenberg", "ball", "tatar", "random"):
            raise ValueError(f"unknown example kind {self.kind!r}")
        if self.n < 8:
            raise ValueError(f"need n >= 8, got {self.n}")
        if self.kind == "tatar" and self.levels < 4:
            raise ValueError(f"need levels >= 4, got {self.levels}")

    def generate(self):
        if self.kind == "nirenberg":
            return nirenberg_field(self.n)
        if self.kind == "ball":
            return ball_field(
                self.alpha, self.radius, self.n, half_width=self.half_width
            )
        if self.kind == "tatar":
            return tatar_pair(self.p, self.levels, self.n)
        return random_field(
            self.seed,
            self.n,
            law=self.law,
            d=self.d,
            spikes=self.spikes,
            amplitude=self.amplitude,
            periodic=self.periodic,
        )


def nirenberg_field(n: int) -> ScalarField:
    """Mean-zero data f on the periodic square [-1,1]^2 whose Helmholtz
    solution has fractional logarithmic growth at the origin.

    f is the discrete Laplacian (backward div of forward grad, matching the
    solver stencils) of v(x1,x2) = x1 |log|x||^(1/3) zeta(|x|) with the
    bump zeta(r) = exp(-1/(1-r^2)) for |r| < 1.
    """
    if n < 16:
        raise ValueError(f"need n >= 16, got {n}")
    grid = Grid((n, n), -1.0, 1.0, periodic=True)
    x1, x2 = grid.meshgrid()
    r2 = x1 * x1 + x2 * x2
    v = np.zeros_like(r2)
    interior = (r2 > 0.0) & (r2 < 1.0)
    ri2 = r2[interior]
    zeta = np.exp(-1.0 / (1.0 - ri2))
    logfac = np.abs(0.5 * np.log(ri2)) ** (1.0 / 3.0)
    v[interior] = x1[interior] * logfac * zeta
    lap = divergence_array(gradient_array(v, grid), grid)
    return mean_zero(ScalarField(grid, lap))


def nirenberg_potential(n: int) -> ScalarField:
    """The potential v itself (same sampling as nirenberg_field)."""
    if n < 16:
        raise ValueError(f"need n >= 16, got {n}")
    grid = Grid((n, n), -1.0, 1.0, periodic=True)
    x1, x2 = grid.meshgrid()
    r2 = x1 * x1 + x2 * x2
    v = np.zeros_like(r2)
    interior = (r2 > 0.0) & (r2 < 1.0)
    ri2 = r2[interior]
    v[interior] = (
        x1[interior]
        * np.abs(0.5 * np.log(ri2)) ** (1.0 / 3.0)
        * np.exp(-1.0 / (1.0 - ri2))
    )
    return ScalarField(grid, v)


def ball_field(
    alpha: float,
    radius: float,
    n: int,
    half_width: float | None = None,
    periodic: bool = False,
) -> ScalarField:
    """alpha times the characteristic function of the centered ball.

    A cell belongs to the ball iff its center does (distance <= radius),
    which keeps the discrete area within O(h) of pi R^2.
    """
    if n < 8:
        raise ValueError(f"need n >= 8, got {n}")
    if half_width is None:
        half_width = 2.0 * radius
    if not 0.0 < radius <= half_width:
        raise ValueError("need 0 < radius <= domain half-width")
    grid = Grid((n, n), -half_width, half_width, periodic=periodic)
    x1, x2 = grid.meshgrid()
    inside = x1 * x1 + x2 * x2 <= radius * radius
    return ScalarField(grid, np.where(inside, float(alpha), 0.0))


def tatar_pair(p: float, levels: int, n: int) -> tuple[ScalarField, ScalarField]:
    """The pair (f, g) on (0,1) along which the weak-Lp set norm has
    nonvanishing one-sided slopes of both signs.

    f(x) = x^(-1/p); g alternates between +-2^(k/p) on the dyadic intervals
    (2^-(k+1), 2^-k) for k < levels and vanishes below the finest one.
    Requires n >= 2^(levels+2) so the finest interval holds >= 4 cells.
    """
    if levels < 4:
        raise ValueError(f"need levels >= 4, got {levels}")
    if n < 2 ** (levels + 2):
        raise ValueError(
            f"n={n} cannot resolve {levels} dyadic levels; need n >= "
            f"{2 ** (levels + 2)}"
        )
    grid = Grid((n,), 0.0, 1.0, periodic=False)
    x = grid.axis_centers(0)
    f = x ** (-1.0 / p)
    # cell at x sits in the dyadic block k = floor(-log2 x) - adjusted so
    # that (2^-(k+1), 2^-k) maps to k; centers never hit dyadic endpoints
    # when n is a power of two.
    k = np.floor(-np.log2(x)).astype(np.int64)
    g = np.where(k < levels, (-1.0) ** k * 2.0 ** (k / p), 0.0)
    return ScalarField(grid, f), ScalarField(grid, g)


def random_field(
    seed: int,
    n: int | tuple[int, ...],
    law: str = "gaussian",
    d: int = 2,
    spikes: int = 8,
    amplitude: float = 10.0,
    periodic: bool = False,
) -> ScalarField:
    """Seeded random field on [-1,1]^d.

    law "gaussian": iid standard normals.  law "spikes": a small clipped
    gaussian background plus `spikes` distinct cells of magnitude between
    0.75 and 1.0 times `amplitude` with random signs; exactly those cells
    exceed amplitude/2 in magnitude.
    """
    shape = (n,) * d if np.isscalar(n) else tuple(n)
    grid = Grid(shape, -1.0, 1.0, periodic=periodic)
    rng = np.random.default_rng(seed)
    if law == "gaussian":
        values = rng.standard_normal(shape)
    elif law == "spikes":
        if spikes >= grid.size:
            raise ValueError("more spikes than cells")
        background = rng.normal(0.0, amplitude / 20.0, size=shape)
        values = np.clip(background, -amplitude / 4.0, amplitude / 4.0)
        idx = rng.choice(grid.size, size=spikes, replace=False)
        signs = rng.choice([-1.0, 1.0], size=spikes)
        mags = rng.uniform(0.75, 1.0, size=spikes) * amplitude
        values.ravel()[idx] = signs * mags
    else:
        raise ValueError(f"unknown law {law!r}")
    return ScalarField(grid, values)
