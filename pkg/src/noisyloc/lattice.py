"""Qubit geometry: lattices, coarse-grained block grids, reverse lightcones."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from .circuit import Circuit


@dataclass(frozen=True)
class Lattice:
    """Hypercubic lattice with open boundaries and row-major qubit indexing."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) == 0:
            raise ValueError("lattice needs at least one dimension")
        if any(int(s) < 1 for s in self.dims):
            raise ValueError(f"side lengths must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(s) for s in self.dims))

    @property
    def D(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return math.prod(self.dims)

    def coord(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.n:
            raise IndexError(f"qubit {index} outside [0, {self.n})")
        out = []
        for s in reversed(self.dims):
            index, r = divmod(index, s)
            out.append(r)
        return tuple(reversed(out))

    def index(self, coord: Sequence[int]) -> int:
        if len(coord) != self.D:
            raise ValueError(f"coordinate {tuple(coord)} has wrong dimension")
        idx = 0
        for c, s in zip(coord, self.dims):
            if not 0 <= c < s:
                raise IndexError(f"coordinate {tuple(coord)} outside lattice {self.dims}")
            idx = idx * s + c
        return idx

    def are_neighbors(self, a: int, b: int) -> bool:
        ca, cb = self.coord(a), self.coord(b)
        return sum(abs(x - y) for x, y in zip(ca, cb)) == 1

    def neighbors(self, a: int) -> list[int]:
        ca = self.coord(a)
        out = []
        for axis in range(self.D):
            for step in (-1, 1):
                c = list(ca)
                c[axis] += step
                if 0 <= c[axis] < self.dims[axis]:
                    out.append(self.index(c))
        return sorted(out)


def build_lattice(dims: Sequence[int]) -> Lattice:
    return Lattice(tuple(dims))


@dataclass(frozen=True)
class SublatticeGrid:
    """Coarse-graining of a lattice into axis-aligned blocks of side ``width``.

    Blocks are indexed from 0 in row-major order over block coordinates.
    Blocks on the far side of an axis are truncated when ``width`` does not
    divide the side length. Two blocks are adjacent when their block
    coordinates differ by at most one along every axis (Moore neighborhood).
    """

    lattice: Lattice
    width: int
    block_dims: tuple[int, ...] = field(init=False)
    sublattices: tuple[tuple[int, ...], ...] = field(init=False)
    block_of: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"block width must be >= 1, got {self.width}")
        bdims = tuple(-(-s // self.width) for s in self.lattice.dims)
        block_of = []
        for q in range(self.lattice.n):
            bc = tuple(c // self.width for c in self.lattice.coord(q))
            block_of.append(_ravel(bc, bdims))
        blocks: list[list[int]] = [[] for _ in range(math.prod(bdims))]
        for q, b in enumerate(block_of):
            blocks[b].append(q)
        object.__setattr__(self, "block_dims", bdims)
        object.__setattr__(self, "block_of", tuple(block_of))
        object.__setattr__(self, "sublattices", tuple(tuple(b) for b in blocks))

    @property
    def m(self) -> int:
        return len(self.sublattices)

    def block_coord(self, b: int) -> tuple[int, ...]:
        self._check(b)
        return _unravel(b, self.block_dims)

    def _check(self, b: int) -> None:
        if not 0 <= b < self.m:
            raise IndexError(f"block {b} outside [0, {self.m})")

    def block_distance(self, a: int, b: int) -> int:
        """Graph distance between blocks under Moore adjacency (Chebyshev metric)."""
        ca, cb = self.block_coord(a), self.block_coord(b)
        return max(abs(x - y) for x, y in zip(ca, cb))

    def adjacent(self, a: int, b: int) -> bool:
        return a != b and self.block_distance(a, b) == 1

    def neighbors(self, b: int) -> list[int]:
        return [c for c in range(self.m) if self.adjacent(b, c)]

    def boundary(self, blocks: Iterable[int], ell: int = 1) -> frozenset[int]:
        """Blocks within distance ``ell`` of ``blocks``, excluding ``blocks`` itself."""
        blocks = frozenset(blocks)
        for b in blocks:
            self._check(b)
        if ell < 0:
            raise ValueError("ell must be >= 0")
        if not blocks or ell == 0:
            return frozenset()
        return frozenset(
            c for c in range(self.m)
            if c not in blocks and min(self.block_distance(c, b) for b in blocks) <= ell
        )

    def qubits(self, blocks: Iterable[int]) -> tuple[int, ...]:
        out: list[int] = []
        for b in sorted(set(blocks)):
            self._check(b)
            out.extend(self.sublattices[b])
        return tuple(sorted(out))

    def blocks_touching(self, qubits: Iterable[int]) -> frozenset[int]:
        return frozenset(self.block_of[q] for q in qubits)


def _ravel(coord: Sequence[int], dims: Sequence[int]) -> int:
    idx = 0
    for c, s in zip(coord, dims):
        idx = idx * s + c
    return idx


def _unravel(idx: int, dims: Sequence[int]) -> tuple[int, ...]:
    out = []
    for s in reversed(dims):
        idx, r = divmod(idx, s)
        out.append(r)
    return tuple(reversed(out))


def coarse_grain(lattice: Lattice, width: int) -> SublatticeGrid:
    return SublatticeGrid(lattice, int(width))


def default_width(depth: int) -> int:
    """Block side used by the bounds: twice the circuit depth (at least 1)."""
    return max(1, 2 * depth)


@dataclass(frozen=True)
class LightconeTrace:
    """Reverse lightcone layers; ``layers[i]`` is L_i(A) for i = 0..d."""

    layers: tuple[frozenset[int], ...]

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def region(self) -> frozenset[int]:
        return self.layers[-1]

    @property
    def cone(self) -> frozenset[int]:
        return self.layers[0]

    def __getitem__(self, i: int) -> frozenset[int]:
        return self.layers[i]


def reverse_lightcone(circuit: "Circuit", region: Iterable[int]) -> LightconeTrace:
    region = frozenset(int(q) for q in region)
    n = circuit.n
    for q in region:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} outside [0, {n})")
    cur = set(region)
    trace = [frozenset(cur)]
    for layer in reversed(circuit.layers):
        # gates within a layer are disjoint, so one pass reaches the fixed point
        for gate in layer:
            if len(gate.targets) == 2 and not cur.isdisjoint(gate.targets):
                cur.update(gate.targets)
        trace.append(frozenset(cur))
    return LightconeTrace(tuple(reversed(trace)))


def connected_components(grid: SublatticeGrid, subset: Iterable[int]) -> list[frozenset[int]]:
    """Split ``subset`` into maximal adjacency-connected groups, ordered by smallest block."""
    subset = set(subset)
    for b in subset:
        grid._check(b)
    seen: set[int] = set()
    comps = []
    for start in sorted(subset):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            b = queue.popleft()
            for c in subset:
                if c not in seen and grid.adjacent(b, c):
                    seen.add(c)
                    comp.add(c)
                    queue.append(c)
        comps.append(frozenset(comp))
    return comps


def largest_component(grid: SublatticeGrid, subset: Iterable[int]) -> int:
    comps = connected_components(grid, subset)
    return max((len(c) for c in comps), default=0)


def depth_factor(p: float, d: int, D: int) -> float:
    """(1-p)^d (4d)^D, the per-block relative entropy cap at depth d."""
    if d <= 0:
        return 0.0
    return (1.0 - p) ** d * float(4 * d) ** D


def critical_depth(p: float, D: int, c: float = 1.0) -> int:
    """Smallest depth d >= 1 with (1-p)^d (4d)^D < 1/c, by direct scan.

    Plain products rather than logs: the boundary case p=0.5, D=1, d=4 sits
    exactly on 1.0 and must not round below it.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise strength must lie in (0, 1), got {p}")
    if c < 1.0:
        raise ValueError(f"c must be >= 1, got {c}")
    if D < 1:
        raise ValueError(f"dimension must be >= 1, got {D}")
    target = 1.0 / c
    d = 1
    # while the factor is still rising it exceeds (4/e)^D > 1, so the first hit is final
    while not depth_factor(p, d, D) < target:
        d += 1
    return d
