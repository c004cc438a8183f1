"""Norms and functionals: Lp, Lorentz, set-based weak-Lp, Morrey, discrete
total variation, and the derivative of the p-th power of the L2 norm.

Lorentz norms are evaluated exactly for grid step functions by closed-form
integration of the piecewise-constant decreasing rearrangement; no quadrature
error is introduced anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField, gradient_array


def lp_norm(f: ScalarField, p: float) -> float:
    """(sum |f|^p * cellvol)^(1/p); max |f| for p = inf."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    if p == 1:
        return float(np.sum(a)) * f.grid.cell_volume
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * f.grid.cell_volume))
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def sup_norm_vector(v: VectorField) -> float:
    """Max over cells of the pointwise l2 magnitude of the vector."""
    arr = v.as_array()
    return float(np.sqrt((arr * arr).sum(axis=0).max()))


def component_sup_norms(v: VectorField) -> tuple[float, ...]:
    """Per-component max |v_i|; the explicit constructions bound these."""
    return tuple(float(np.abs(c.values).max()) for c in v.components)


def _sorted_abs(f: ScalarField) -> np.ndarray:
    return np.sort(np.abs(f.values), axis=None)[::-1]


def lorentz_norm(f: ScalarField, p: float, q: float) -> float:
    """Rearrangement form of the L^{p,q} norm, exact for step functions.

    The decreasing rearrangement of a grid field is constant on intervals of
    length cellvol, so the defining integral
    ``(int_0^inf (t^{1/p} f*(t))^q dt/t)^{1/q}`` reduces to the telescoping
    sum ``(p/q) * sum_k a_k^q ((k v)^{q/p} - ((k-1) v)^{q/p})`` over the
    sorted magnitudes a_1 >= a_2 >= ...
    """
    if not (1 <= p < np.inf):
        raise ValueError(f"need 1 <= p < inf, got p={p}")
    if not (1 <= q < np.inf):
        raise ValueError("q = inf is not a Lorentz integral; use weak_lp_setnorm")
    a = _sorted_abs(f)
    v = f.grid.cell_volume
    k = np.arange(1, a.size + 1, dtype=np.float64)
    pieces = (k * v) ** (q / p) - ((k - 1) * v) ** (q / p)
    total = (p / q) * np.sum(a**q * pieces)
    return float(total ** (1.0 / q))


def weak_lp_setnorm(f: ScalarField, p: float) -> float:
    """sup_E |E|^{-(p-1)/p} int_E |f| over all cell sets E.

    Super-level sets dominate every set of equal measure because the
    integrand is |f|, so the supremum is the max over k of the k largest
    magnitudes; this is the equivalent weak-Lp norm the bounds use.
    """
    if p <= 1:
        raise ValueError(f"need p > 1, got {p}")
    a = _sorted_abs(f)
    if a.size == 0 or a[0] == 0.0:
        return 0.0
    v = f.grid.cell_volume
    k = np.arange(1, a.size + 1, dtype=np.float64)
    vals = (k * v) ** (-(p - 1) / p) * np.cumsum(a) * v
    return float(vals.max())


def morrey_norm(f: ScalarField, dim: int | None = None) -> float:
    """sup over discrete balls of R^(1-d) * int_{B cap Omega} |f|.

    Ball centers range over cell centers and radii over integer multiples of
    min(h); a cell belongs to the ball when its center does.  This bounded
    search is a lower bound of the continuum supremum.
    """
    grid = f.grid
    d = grid.d if dim is None else int(dim)
    if d != grid.d:
        raise ValueError(f"dim {d} does not match grid dimension {grid.d}")
    coords = np.stack([c.ravel() for c in grid.meshgrid()], axis=1)
    absf = np.abs(f.values).ravel()
    vol = grid.cell_volume
    rstep = min(grid.h)
    rmax = float(np.linalg.norm(np.asarray(grid.hi) - np.asarray(grid.lo)))
    radii = rstep * np.arange(1, int(np.ceil(rmax / rstep)) + 2)
    best = 0.0
    for c in coords:
        dist = np.linalg.norm(coords - c, axis=1)
        order = np.argsort(dist)
        csum = np.cumsum(absf[order])
        idx = np.searchsorted(dist[order], radii, side="right")
        vals = radii ** (1 - d) * csum[np.maximum(idx, 1) - 1] * vol
        vals[idx == 0] = 0.0
        best = max(best, float(vals.max()))
    return best


def tv_norm(g: ScalarField, variant: str = "isotropic") -> float:
    """Discrete total variation of the forward-difference gradient.

    isotropic: sum of pointwise l2 gradient magnitudes times cellvol (this is
    the TV appearing in the solver's dual constraint); anisotropic: sum of
    absolute per-axis differences times cellvol.
    """
    grad = gradient_array(g.values, g.grid)
    vol = g.grid.cell_volume
    if variant == "isotropic":
        return float(np.sum(np.sqrt((grad * grad).sum(axis=0)))) * vol
    if variant == "anisotropic":
        return float(np.sum(np.abs(grad))) * vol
    raise ValueError(f"unknown TV variant {variant!r}")


def frechet_derivative(v: ScalarField, p: float) -> ScalarField:
    """Derivative of w -> ||w||_2^p at v, i.e. p ||v||_2^(p-2) v."""
    nrm = lp_norm(v, 2)
    if nrm == 0.0:
        raise ValueError("derivative of the norm power is undefined at 0")
    return ScalarField(v.grid, p * nrm ** (p - 2) * v.values)


@dataclass(frozen=True)
class NormKind:
    """Tagged norm selector used by the CLI; see parse() for the syntax."""

    tag: str
    p: float = 0.0
    q: float = 0.0
    variant: str = ""

    _TAGS = ("lp", "lorentz", "weak", "morrey", "tv", "linf")

    @classmethod
    def parse(cls, text: str) -> "NormKind":
        """Parse specs like lp:2, lorentz:2:1, weak:2, morrey, tv:isotropic,
        linf."""
        parts = text.split(":")
        tag = parts[0]
        if tag not in cls._TAGS:
            raise ValueError(f"unknown norm kind {text!r}")
        if tag == "lp":
            return cls("lp", p=float(parts[1]))
        if tag == "lorentz":
            return cls("lorentz", p=float(parts[1]), q=float(parts[2]))
        if tag == "weak":
            return cls("weak", p=float(parts[1]))
        if tag == "tv":
            variant = parts[1] if len(parts) > 1 else "isotropic"
            return cls("tv", variant=variant)
        return cls(tag)

    def evaluate(self, f: ScalarField) -> float:
        if self.tag == "lp":
            return lp_norm(f, self.p)
        if self.tag == "lorentz":
            return lorentz_norm(f, self.p, self.q)
        if self.tag == "weak":
            return weak_lp_setnorm(f, self.p)
        if self.tag == "morrey":
            return morrey_norm(f)
        if self.tag == "tv":
            return tv_norm(f, self.variant)
        return lp_norm(f, np.inf)

    def label(self) -> str:
        if self.tag == "lp":
            return f"lp:{self.p:g}"
        if self.tag == "lorentz":
            return f"lorentz:{self.p:g}:{self.q:g}"
        if self.tag == "weak":
            return f"weak:{self.p:g}"
        if self.tag == "tv":
            return f"tv:{self.variant}"
        return self.tag
