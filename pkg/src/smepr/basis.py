"""Basis functions for the spatial random effects.

Gaussian radial bases on equally spaced 1-D knots and compactly supported
bisquare bases on rectangular 2-D knot lattices.  A block is either
individual to one response type or shared by all of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian_rbf", "bisquare")
EARTH_DEG = 180.0 / np.pi


@dataclass(frozen=True)
class BasisBlock:
    """One set of basis functions.

    ``scope`` is the 1-based type the block belongs to, or ``None`` for a
    block shared across all types.  ``bandwidth`` is the RBF length scale
    or the bisquare support radius.
    """

    kind: str
    knots: np.ndarray
    bandwidth: float
    scope: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim == 1:
            knots = knots[:, None]
        if knots.shape[0] == 0:
            raise ValueError("basis block needs at least one knot")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def width(self) -> int:
        return self.knots.shape[0]

    def evaluate(self, coords, distance="planar") -> np.ndarray:
        """Basis values at ``coords``, shape ``(n_points, width)``."""
        d = pairwise_distance(coords, self.knots, distance)
        if self.kind == "gaussian_rbf":
            return np.exp(-(d * d) / (2.0 * self.bandwidth ** 2))
        u = d / self.bandwidth
        return np.where(u <= 1.0, (1.0 - u * u) ** 2, 0.0)


def make_knots_1d(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` equally spaced knots on ``[lo, hi]``; the midpoint when ``count == 1``."""
    if count < 1:
        raise ValueError("knot count must be at least 1")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {lo}, {hi}")
    if count == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, count)


def knot_spacing(lo: float, hi: float, count: int) -> float:
    return (hi - lo) / (count - 1) if count > 1 else hi - lo


def make_knot_grid(lo, hi, shape) -> tuple[np.ndarray, float]:
    """Rectangular lattice over the box ``lo``..``hi``; returns ``(knots, spacing)``.

    ``spacing`` is the larger of the two lattice steps.
    """
    nx, ny = shape
    xs = make_knots_1d(lo[0], hi[0], nx)
    ys = make_knots_1d(lo[1], hi[1], ny)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    spacing = max(knot_spacing(lo[0], hi[0], nx), knot_spacing(lo[1], hi[1], ny))
    return np.column_stack([gx.ravel(), gy.ravel()]), spacing


def eval_gaussian_rbf(s, center, bandwidth):
    s, center = np.atleast_1d(np.asarray(s, float)), np.atleast_1d(np.asarray(center, float))
    d2 = np.sum((s - center) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * bandwidth ** 2))


def eval_bisquare(s, center, radius):
    s, center = np.atleast_1d(np.asarray(s, float)), np.atleast_1d(np.asarray(center, float))
    d = np.sqrt(np.sum((s - center) ** 2, axis=-1))
    u = d / radius
    return np.where(u <= 1.0, (1.0 - u * u) ** 2, 0.0)


def pairwise_distance(a, b, distance="planar") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if distance == "planar":
        if a.shape[1] == 1:
            return np.abs(a - b.T)
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if distance == "greatcircle":
        # (lon, lat) in degrees; result is central angle in degrees
        lon1, lat1 = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
        lon2, lat2 = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]
        h = (np.sin((lat2 - lat1) / 2) ** 2
             + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
        return 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))) * EARTH_DEG
    raise ValueError(f"unknown distance {distance!r}")


def build_basis_matrix(coords, blocks, K: int, distance="planar") -> np.ndarray:
    """G over every (type, site) pair in canonical order, shape ``(K*S, r)``.

    Individual blocks are zero on rows of other types; shared blocks take the
    same values on every type's row at a site.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    S = coords.shape[0]
    r = sum(b.width for b in blocks)
    G = np.zeros((K * S, r))
    col = 0
    for block in blocks:
        vals = block.evaluate(coords, distance)
        cols = slice(col, col + block.width)
        for k in range(K):
            if block.scope is None or block.scope == k + 1:
                G[k * S:(k + 1) * S, cols] = vals
        col += block.width
    return G


def rbf_block_1d(lo, hi, count, scope=None, bandwidth=None, name="") -> BasisBlock:
    """Gaussian RBF block on equally spaced knots; bandwidth defaults to the knot spacing."""
    knots = make_knots_1d(lo, hi, count)
    bw = knot_spacing(lo, hi, count) if bandwidth is None else bandwidth
    return BasisBlock("gaussian_rbf", knots, bw, scope, name)


def bisquare_block_2d(coords, shape, scope=None, radius=None, radius_factor=1.5,
                      name="") -> BasisBlock:
    """Bisquare block on a lattice over the bounding box of ``coords``."""
    coords = np.asarray(coords, dtype=float)
    knots, spacing = make_knot_grid(coords.min(axis=0), coords.max(axis=0), shape)
    rad = radius_factor * spacing if radius is None else radius
    return BasisBlock("bisquare", knots, rad, scope, name)
