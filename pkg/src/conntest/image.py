"""Square binary images and their pixel-adjacency connectivity.

An image is an n x n grid of pixels, each black (1/True) or white (0/False).
Pixels are addressed as (x, y) = (column, row) with the origin at the top-left
corner.  Two black pixels are adjacent when they differ by exactly one step in
exactly one coordinate (4-neighborhood); the black pixels together with those
edges form the image graph.  All connectivity notions below refer to that
graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# 4-neighborhood structuring element (no diagonals).
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# Fixed neighbor offsets: up, down, left, right.
NEIGHBOR_OFFSETS = ((0, -1), (0, 1), (-1, 0), (1, 0))


class Image:
    """An immutable n x n binary image. bits[y, x] is True for black."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"image must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("image side must be at least 1")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.bits = arr

    @property
    def side(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def blank(cls, side: int) -> "Image":
        return cls(np.zeros((side, side), dtype=bool))

    @classmethod
    def full(cls, side: int) -> "Image":
        return cls(np.ones((side, side), dtype=bool))

    def get(self, x: int, y: int) -> bool:
        return bool(self.bits[y, x])

    def black_count(self) -> int:
        return int(self.bits.sum())

    def probe_many(self, xs, ys):
        """Vectorized pixel lookup; xs/ys are integer arrays."""
        return self.bits[ys, xs]

    def is_border(self, x: int, y: int) -> bool:
        n = self.side
        return x == 0 or y == 0 or x == n - 1 or y == n - 1

    def with_pixel(self, x: int, y: int, value: bool) -> "Image":
        out = self.bits.copy()
        out[y, x] = value
        return Image(out)

    def subimage(self, x0: int, y0: int, side: int) -> "Image":
        return Image(self.bits[y0 : y0 + side, x0 : x0 + side])

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.side, self.bits.tobytes()))

    def __repr__(self):
        return f"Image(side={self.side}, black={self.black_count()})"


@dataclass(frozen=True)
class ComponentLabeling:
    """Labeling of the black pixels into connected components.

    labels[y, x] is 0 for white pixels and the component id (1..count) for
    black pixels.  Ids follow first-visit order of a row-major scan, so the
    component whose topmost-leftmost pixel comes first gets id 1.
    touches_border[i] tells whether component id i+1 contains a pixel on the
    image border (outermost row/column ring).
    """

    labels: np.ndarray
    count: int
    touches_border: np.ndarray

    def component_pixels(self, component_id: int):
        """All (x, y) pixels of one component, row-major order."""
        ys, xs = np.nonzero(self.labels == component_id)
        return list(zip(xs.tolist(), ys.tolist()))


def connected_components(img: Image) -> ComponentLabeling:
    """Label the black pixels of img into 4-connected components."""
    raw, raw_count = ndimage.label(img.bits, structure=_CROSS)
    if raw_count == 0:
        return ComponentLabeling(
            labels=raw.astype(np.int32),
            count=0,
            touches_border=np.zeros(0, dtype=bool),
        )

    # Renumber so ids follow first occurrence in a row-major scan.
    flat = raw.ravel()
    black_positions = np.flatnonzero(flat)
    first_seen, order_index = np.unique(
        flat[black_positions], return_index=True
    )
    # first_seen is sorted by raw label; sort by position of first occurrence.
    scan_order = np.argsort(order_index, kind="stable")
    remap = np.zeros(raw_count + 1, dtype=np.int32)
    remap[first_seen[scan_order]] = np.arange(1, raw_count + 1, dtype=np.int32)
    labels = remap[raw]

    n = img.side
    border_labels = np.concatenate(
        [labels[0, :], labels[n - 1, :], labels[:, 0], labels[:, n - 1]]
    )
    touches = np.zeros(raw_count, dtype=bool)
    hit = np.unique(border_labels)
    hit = hit[hit > 0]
    touches[hit - 1] = True
    return ComponentLabeling(labels=labels, count=int(raw_count), touches_border=touches)


def is_connected(img: Image) -> bool:
    """True when the image graph has at most one connected component.

    An all-white image is connected (empty graph convention).
    """
    return connected_components(img).count <= 1


def is_border_connected(img: Image) -> bool:
    """True when every black pixel has a black path to the image border.

    Equivalently: every component of the image graph contains a border pixel.
    An all-white image qualifies vacuously.
    """
    labeling = connected_components(img)
    return bool(labeling.touches_border.all())
