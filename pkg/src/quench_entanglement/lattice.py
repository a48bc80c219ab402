"""Finite boxes in Z^d, rectangular tilings, their dual graphs, and bipartitions.

Sites are always enumerated in lexicographic order of their coordinates. Every
matrix index used elsewhere in the package refers to this ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GeometryError,
    InvalidBipartitionError,
    PartitionGapError,
    PartitionOverlapError,
)

Interval = tuple[int, int]
Box = tuple[Interval, ...]


def _as_box(bounds, dimension=None) -> Box:
    try:
        box = tuple((int(a), int(b)) for a, b in bounds)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"bounds must be a list of [a, b] integer pairs, got {bounds!r}") from exc
    if dimension is not None and len(box) != dimension:
        raise GeometryError(f"expected {dimension} intervals, got {len(box)}")
    for axis, (a, b) in enumerate(box):
        if a > b:
            raise GeometryError(f"empty interval [{a}, {b}] on axis {axis}")
    return box


def _box_size(box: Box) -> int:
    return int(np.prod([b - a + 1 for a, b in box]))


@dataclass(frozen=True, eq=False)
class Lattice:
    """The integer points of a rectangular box ``[a_1,b_1] x ... x [a_d,b_d]``."""

    dimension: int
    bounds: Box
    sites: tuple[tuple[int, ...], ...]
    index_of: dict = field(repr=False)
    coords: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def __len__(self):
        return len(self.sites)

    def contains_box(self, box: Box) -> bool:
        return all(lo <= a and b <= hi for (a, b), (lo, hi) in zip(box, self.bounds))

    def box_indices(self, box) -> np.ndarray:
        """Indices (ascending) of the sites inside ``box``."""
        box = _as_box(box, self.dimension)
        if not self.contains_box(box):
            raise GeometryError(f"box {box} is not contained in {self.bounds}")
        ranges = [range(a, b + 1) for a, b in box]
        return np.array(sorted(self.index_of[s] for s in itertools.product(*ranges)), dtype=int)

    def distance_matrix(self) -> np.ndarray:
        """All pairwise 1-norm distances, shape ``(n, n)``."""
        return np.abs(self.coords[:, None, :] - self.coords[None, :, :]).sum(axis=2)

    def neighbor_pairs(self) -> np.ndarray:
        """Unordered nearest-neighbour pairs ``(i, j)`` with ``i < j``."""
        dist = self.distance_matrix()
        i, j = np.nonzero(np.triu(dist == 1))
        return np.stack([i, j], axis=1)


def build_box(d: int, bounds: Sequence[Sequence[int]]) -> Lattice:
    if int(d) < 1:
        raise GeometryError(f"dimension must be positive, got {d}")
    box = _as_box(bounds, int(d))
    ranges = [range(a, b + 1) for a, b in box]
    sites = tuple(itertools.product(*ranges))
    index_of = {s: i for i, s in enumerate(sites)}
    coords = np.array(sites, dtype=int).reshape(len(sites), int(d))
    return Lattice(int(d), box, sites, index_of, coords)


def l1_distance(x: Sequence[int], y: Sequence[int]) -> int:
    if len(x) != len(y):
        raise GeometryError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return int(sum(abs(int(a) - int(b)) for a, b in zip(x, y)))


@dataclass(frozen=True, eq=False)
class Tiling:
    """An exact partition of a lattice into rectangular tiles."""

    lattice: Lattice
    tiles: tuple[Box, ...]
    tile_sites: tuple[np.ndarray, ...] = field(repr=False)
    tile_of: np.ndarray = field(repr=False)
    name: str = "custom"

    @property
    def M(self) -> int:
        return len(self.tiles)

    def is_aligned(self, inside: Iterable[int]) -> bool:
        """True when ``inside`` is a union of whole tiles."""
        inside = np.asarray(sorted(inside), dtype=int)
        touched = np.unique(self.tile_of[inside])
        return sum(len(self.tile_sites[m]) for m in touched) == len(inside)


def build_tiling(lattice: Lattice, tile_boxes, name: str = "custom") -> Tiling:
    boxes = tuple(_as_box(b, lattice.dimension) for b in tile_boxes)
    if not boxes:
        raise PartitionGapError("a tiling needs at least one tile")
    tile_of = np.full(lattice.n_sites, -1, dtype=int)
    tile_sites = []
    for m, box in enumerate(boxes):
        idx = lattice.box_indices(box)
        clash = tile_of[idx] >= 0
        if clash.any():
            site = lattice.sites[idx[np.argmax(clash)]]
            raise PartitionOverlapError(
                f"tile {m} {box} overlaps tile {tile_of[idx[np.argmax(clash)]]} at site {site}"
            )
        tile_of[idx] = m
        tile_sites.append(idx)
    if (tile_of < 0).any():
        site = lattice.sites[int(np.argmax(tile_of < 0))]
        raise PartitionGapError(f"site {site} is not covered by any tile")
    return Tiling(lattice, boxes, tuple(tile_sites), tile_of, name)


def single_tile(lattice: Lattice) -> Tiling:
    return build_tiling(lattice, [lattice.bounds], name="single")


def singleton_tiling(lattice: Lattice) -> Tiling:
    return build_tiling(lattice, [tuple((c, c) for c in s) for s in lattice.sites], name="singletons")


def slab_tiling(lattice: Lattice, axis: int = 0, width: int = 1) -> Tiling:
    """Slice the box perpendicular to ``axis`` into slabs of ``width`` layers."""
    if not 0 <= axis < lattice.dimension or width < 1:
        raise GeometryError(f"invalid slab parameters axis={axis}, width={width}")
    lo, hi = lattice.bounds[axis]
    boxes = []
    for start in range(lo, hi + 1, width):
        box = list(lattice.bounds)
        box[axis] = (start, min(start + width - 1, hi))
        boxes.append(tuple(box))
    return build_tiling(lattice, boxes, name=f"slabs(axis={axis},width={width})")


def block_tiling(lattice: Lattice, widths: Sequence[int]) -> Tiling:
    """Regular grid of blocks with the given per-axis widths (edge blocks may be smaller)."""
    if len(widths) != lattice.dimension or min(widths) < 1:
        raise GeometryError(f"invalid block widths {widths!r}")
    axis_cuts = []
    for (lo, hi), w in zip(lattice.bounds, widths):
        axis_cuts.append([(s, min(s + w - 1, hi)) for s in range(lo, hi + 1, w)])
    boxes = [tuple(c) for c in itertools.product(*axis_cuts)]
    return build_tiling(lattice, boxes, name="blocks(" + ",".join(map(str, widths)) + ")")


def crafted_tiling(lattice: Lattice, box) -> Tiling:
    """One tile equal to ``box``; every other site is its own tile."""
    box = _as_box(box, lattice.dimension)
    inner = set(lattice.box_indices(box).tolist())
    boxes = [box] + [tuple((c, c) for c in lattice.sites[i]) for i in range(lattice.n_sites) if i not in inner]
    return build_tiling(lattice, boxes, name="crafted")


def random_box_tiling(lattice: Lattice, rng: np.random.Generator, n_cuts: int) -> Tiling:
    """Random guillotine tiling: repeatedly split a random tile along a random axis."""
    boxes = [lattice.bounds]
    for _ in range(n_cuts):
        splittable = [i for i, b in enumerate(boxes) if any(hi > lo for lo, hi in b)]
        if not splittable:
            break
        i = splittable[rng.integers(len(splittable))]
        box = boxes[i]
        axes = [a for a, (lo, hi) in enumerate(box) if hi > lo]
        axis = axes[rng.integers(len(axes))]
        lo, hi = box[axis]
        cut = int(rng.integers(lo, hi))
        left, right = list(box), list(box)
        left[axis], right[axis] = (lo, cut), (cut + 1, hi)
        boxes[i:i + 1] = [tuple(left), tuple(right)]
    return build_tiling(lattice, boxes, name=f"random({len(boxes)})")


def box_distance(u: Box, v: Box) -> int:
    """1-norm distance between two disjoint integer boxes."""
    return int(sum(max(0, a2 - b1, a1 - b2) for (a1, b1), (a2, b2) in zip(u, v)))


@dataclass(frozen=True, eq=False)
class DualGraph:
    vertex_count: int
    adjacency: np.ndarray = field(repr=False)
    max_degree: int = 0

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))


def dual_graph(tiling: Tiling) -> DualGraph:
    M = tiling.M
    adj = np.zeros((M, M), dtype=bool)
    for j in range(M):
        for k in range(j + 1, M):
            if box_distance(tiling.tiles[j], tiling.tiles[k]) == 1:
                adj[j, k] = adj[k, j] = True
    max_degree = int(adj.sum(axis=1).max()) if M else 0
    return DualGraph(M, adj, max_degree)


@dataclass(frozen=True, eq=False)
class Bipartition:
    lattice: Lattice
    inside: frozenset
    boundary_size: int

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.lattice.n_sites, dtype=bool)
        m[list(self.inside)] = True
        return m

    @property
    def inside_indices(self) -> np.ndarray:
        return np.array(sorted(self.inside), dtype=int)


def boundary(lattice: Lattice, inside) -> Bipartition:
    """Build a bipartition from site indices (ints) or coordinate tuples."""
    idx = set()
    for s in inside:
        if isinstance(s, (int, np.integer)):
            if not 0 <= int(s) < lattice.n_sites:
                raise InvalidBipartitionError(f"site index {s} out of range")
            idx.add(int(s))
        else:
            key = tuple(int(c) for c in s)
            if key not in lattice.index_of:
                raise InvalidBipartitionError(f"site {key} is not in the lattice")
            idx.add(lattice.index_of[key])
    if not idx:
        raise InvalidBipartitionError("inside region is empty")
    if len(idx) == lattice.n_sites:
        raise InvalidBipartitionError("inside region is the whole lattice")
    mask = np.zeros(lattice.n_sites, dtype=bool)
    mask[list(idx)] = True
    pairs = lattice.neighbor_pairs()
    cross = mask[pairs[:, 0]] != mask[pairs[:, 1]]
    cut = pairs[cross]
    on_boundary = {int(i) if mask[i] else int(j) for i, j in cut}
    return Bipartition(lattice, frozenset(idx), len(on_boundary))


def box_bipartition(lattice: Lattice, boxes) -> Bipartition:
    """Bipartition whose inside is the union of the given boxes."""
    idx = set()
    for b in boxes:
        idx.update(lattice.box_indices(b).tolist())
    return boundary(lattice, idx)
