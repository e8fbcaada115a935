"""Feature-map fragmentation under per-core memory budgets.

Fragments are axis-aligned boxes forming a full grid per feature map:
channel cuts come first (they partition weights), then Y, then X (which
duplicate weights).  X/Y cut boundaries sit on multiples of 8 so that every
fragment except the last toward the right/bottom is at least 8 wide/tall,
and the coarse hit-detection geometry stays exact away from the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Fragment:
    """A contiguous sub-box of a feature map assigned to one core."""

    fm: str
    c0: int
    x0: int
    y0: int
    d: int
    w: int
    h: int
    index: tuple  # (ci, xi, yi) grid coordinates

    @property
    def neurons(self):
        return self.d * self.w * self.h

    @property
    def box(self):
        return (self.c0, self.x0, self.y0, self.d, self.w, self.h)


@dataclass
class FragGrid:
    """All fragments of one feature map, as a dense cut grid."""

    fm: str
    c_bounds: list  # [(start, size), ...]
    x_bounds: list
    y_bounds: list
    fragments: list = field(default_factory=list)

    def __post_init__(self):
        if not self.fragments:
            for ci, (c0, d) in enumerate(self.c_bounds):
                for xi, (x0, w) in enumerate(self.x_bounds):
                    for yi, (y0, h) in enumerate(self.y_bounds):
                        self.fragments.append(Fragment(
                            self.fm, c0, x0, y0, d, w, h, (ci, xi, yi)))

    @property
    def shape(self):
        return (len(self.c_bounds), len(self.x_bounds), len(self.y_bounds))


def _segments(total, boundaries):
    cuts = sorted(set([0, total]) | {b for b in boundaries if 0 < b < total})
    return [(a, b - a) for a, b in zip(cuts, cuts[1:])]


def _equal_channel_bounds(depth, parts):
    sizes = [len(chunk) for chunk in np.array_split(np.arange(depth), parts)]
    out, pos = [], 0
    for s in sizes:
        if s:
            out.append(pos)
            pos += s
    return out


def _block8_bounds(length, parts, max_chunk):
    """Cut positions on multiples of 8, each chunk at most max_chunk long."""
    blocks = math.ceil(length / 8)
    parts = max(parts, math.ceil(length / max_chunk))
    parts = min(parts, blocks)
    sizes = [len(chunk) for chunk in np.array_split(np.arange(blocks), parts)]
    out, pos = [], 0
    for s in sizes:
        if s:
            out.append(pos * 8)
            pos += s
    # array_split makes near-equal chunks, but the max-chunk cap must hold
    # exactly, so rebalance greedily when a chunk is still too long
    bounds = out + [length]
    fixed = [0]
    for b in bounds[1:]:
        while b - fixed[-1] > max_chunk:
            fixed.append(fixed[-1] + (max_chunk // 8) * 8)
        if b > fixed[-1]:
            fixed.append(b)
    return fixed[:-1]


def make_grid(fm, counts, mandatory_c=(), sl_in=0):
    """Build the cut grid of one feature map.

    ``counts`` is (channel parts, x parts, y parts); mandatory channel
    boundaries (from split/concat/group windows) are always honored on top.
    The per-axis chunk cap keeps the stored, stride-shifted population
    width/height inside its 8-bit descriptor field.
    """
    nc, nx, ny = counts
    nc = max(nc, math.ceil(fm.depth / 1023))
    c_marks = set(mandatory_c) | set(_equal_channel_bounds(fm.depth, nc))
    c_bounds = _segments(fm.depth, c_marks)
    cap = max(8, ((255 >> sl_in) // 8) * 8)
    x_bounds = _segments(fm.width, _block8_bounds(fm.width, nx, cap))
    y_bounds = _segments(fm.height, _block8_bounds(fm.height, ny, cap))
    return FragGrid(fm.id, c_bounds, x_bounds, y_bounds)
