"""Generators for connected images and for certified-far dot patterns.

The far family scatters isolated single-pixel dots: D isolated dots give D
connected components, a single pixel change can reduce the component count
by at most 3, so any such image is at least (D-1)/(3 n^2)-far from
connected.  Choosing the smallest D with (D-1)/3 >= eps * n^2 certifies
eps-farness by counting alone, which the generator re-checks with an exact
labeling of its output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import as_eps, lattice_pitch
from .image import Image, connected_components


class DensityInfeasible(ValueError):
    """The requested dot count does not fit the placement grid."""


def _rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def gen_connected(n: int, family: str = "blob", seed=0) -> Image:
    """A random connected image of side n from one of three shape families."""
    n = int(n)
    if n < 1:
        raise ValueError("side must be positive")
    rng = _rng(seed)
    if n <= 4 or family == "solid":
        bits = np.ones((n, n), dtype=bool)
    elif family == "blob":
        noise = rng.random((n, n)) < 0.55
        labeling = connected_components(Image(noise))
        if labeling.count == 0:
            bits = np.zeros((n, n), dtype=bool)
            bits[n // 2, n // 2] = True
        else:
            sizes = np.bincount(labeling.labels.ravel())[1:]
            keep = int(np.argmax(sizes)) + 1
            bits = labeling.labels == keep
    elif family == "rects":
        bits = np.zeros((n, n), dtype=bool)
        spine = n // 2
        bits[spine, :] = True
        lo = max(1, n // 16)
        hi = max(lo + 1, n // 4)
        for _ in range(40):
            w = int(rng.integers(lo, hi))
            h = int(rng.integers(lo, hi))
            x0 = int(rng.integers(0, n - w + 1))
            y0 = int(rng.integers(max(0, spine - h + 1), min(spine, n - h) + 1))
            bits[y0:y0 + h, x0:x0 + w] = True
    elif family == "serpentine":
        bits = np.zeros((n, n), dtype=bool)
        bits[::3, :] = True
        top = 3 * ((n - 1) // 3)
        for t in range(top // 3):
            x = n - 1 if t % 2 == 0 else 0
            bits[3 * t:3 * t + 4, x] = True
    else:
        raise ValueError(f"unknown family {family!r}")
    img = Image(bits)
    if connected_components(img).count > 1:
        raise AssertionError(f"family {family!r} produced a disconnected image")
    return img


@dataclass
class DotInstance:
    image: Image
    xs: np.ndarray
    ys: np.ndarray
    eps: Fraction
    spacing: int
    placement: str
    component_count: int
    distance_lower_bound: Fraction
    certified_far: bool

    @property
    def count(self) -> int:
        return len(self.xs)

    def meta(self) -> dict:
        return {
            "family": "dots",
            "side": self.image.side,
            "eps": str(self.eps),
            "spacing": self.spacing,
            "placement": self.placement,
            "dots": self.count,
            "componentCount": self.component_count,
            "distanceLowerBound": str(self.distance_lower_bound),
            "certifiedFar": self.certified_far,
        }


def min_far_dot_count(n: int, eps) -> int:
    """Smallest D with (D - 1) / 3 >= eps * n^2."""
    need = 3 * as_eps(eps) * n * n
    return math.ceil(need) + 1


def gen_dot_far(n: int, eps, seed=0, spacing: int = 3,
                placement: str = "lattice", count: int | None = None) -> DotInstance:
    """Scatter isolated dots to a count certified eps-far by components.

    placement "lattice" uses all coordinates divisible by spacing with
    clearance >= 2 from the image border; placement "blocks" puts at most
    one dot per 8x8 block at offsets 3..5, which keeps every dot at least 2
    away from every level's square boundary and pairwise Chebyshev distance
    >= 6 (the shape needed for analytic per-square costs).
    """
    n = int(n)
    eps = as_eps(eps)
    rng = _rng(seed)
    target = min_far_dot_count(n, eps) if count is None else int(count)

    if placement == "lattice":
        if spacing < 2:
            raise ValueError("spacing below 2 would let dots touch")
        coords = np.arange(spacing, n - 2, spacing)
        capacity = len(coords) ** 2
        if target > capacity:
            raise DensityInfeasible(
                f"need {target} dots but only {capacity} positions at "
                f"spacing {spacing} in side {n}"
            )
        chosen = rng.choice(capacity, size=target, replace=False)
        xs = coords[chosen % len(coords)]
        ys = coords[chosen // len(coords)]
    elif placement == "blocks":
        if n < 8:
            raise DensityInfeasible(f"side {n} too small for 8x8 blocks")
        blocks = (n - 8) // 8 + 1
        capacity = blocks * blocks
        if target > capacity:
            raise DensityInfeasible(
                f"need {target} dots but only {capacity} blocks in side {n}"
            )
        chosen = rng.choice(capacity, size=target, replace=False)
        offs = rng.integers(3, 6, size=(target, 2))
        xs = (chosen % blocks) * 8 + offs[:, 0]
        ys = (chosen // blocks) * 8 + offs[:, 1]
    else:
        raise ValueError(f"unknown placement {placement!r}")

    bits = np.zeros((n, n), dtype=bool)
    bits[ys, xs] = True
    image = Image(bits)
    components = connected_components(image).count
    bound = Fraction(max(components - 1, 0), 3)
    return DotInstance(
        image=image, xs=xs, ys=ys, eps=eps, spacing=spacing,
        placement=placement, component_count=components,
        distance_lower_bound=bound, certified_far=bound >= eps * n * n,
    )


def make_dot_square(k: int, count: int, seed=0,
                    avoid_lattice: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A k x k square's contents holding `count` isolated dots, one per 8x8
    block at offsets 3..5; with avoid_lattice the dots also miss the
    side-k diagonal lattice, so each sits strictly inside a diamond.

    Returns (bits, xs, ys) with 0-based array coordinates; bits[y, x].
    """
    if k < 8:
        raise DensityInfeasible(f"side {k} too small for 8x8 blocks")
    m = lattice_pitch(k)
    rng = _rng(seed)
    blocks = (k - 8) // 8 + 1
    capacity = blocks * blocks
    if count > capacity:
        raise DensityInfeasible(
            f"need {count} dots but only {capacity} blocks in side {k}"
        )
    chosen = rng.choice(capacity, size=count, replace=False)
    xs = np.empty(count, dtype=np.int64)
    ys = np.empty(count, dtype=np.int64)
    for j in range(count):
        bx = (int(chosen[j]) % blocks) * 8
        by = (int(chosen[j]) // blocks) * 8
        while True:
            ox = int(rng.integers(3, 6))
            oy = int(rng.integers(3, 6))
            if not avoid_lattice or m < 3:
                break
            lx, ly = bx + ox + 1, by + oy + 1
            if (lx + ly) % m and (lx - ly) % m:
                break
        xs[j] = bx + ox
        ys[j] = by + oy
    bits = np.zeros((k, k), dtype=bool)
    bits[ys, xs] = True
    return bits, xs, ys
