"""Bipartite graph containers, biregular parameters and co-degree statistics.

Adjacency is a tuple of Python ints, one bitset row per ``V1`` vertex, so
co-degree style statistics reduce to ``(a & b).bit_count()``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .errors import InvalidParams, NotBiregular, SameVertex, SideMismatch

BLUE = "blue"
RED = "red"

Edge = tuple[int, int]
Rational = Union[Fraction, int, str]


def as_fraction(x) -> Fraction:
    """Exact conversion; floats are rejected unless they are integral."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if x.is_integer():
            return Fraction(int(x))
        raise InvalidParams(f"p must be an exact rational, got float {x!r}")
    raise InvalidParams(f"cannot interpret {x!r} as a rational")


@dataclass(frozen=True)
class BiregularParams:
    """An instance ``(n1, n2, p)`` of the biregular model.

    ``p`` is exact; ``p*n2`` and ``p*n1`` must be integers.
    """

    n1: int
    n2: int
    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        if not (isinstance(self.n1, int) and isinstance(self.n2, int)):
            raise InvalidParams("n1 and n2 must be integers")
        if self.n1 < 1 or self.n2 < 1:
            raise InvalidParams("n1 and n2 must be positive")
        if not 0 <= self.p <= 1:
            raise InvalidParams(f"p={self.p} outside [0, 1]")
        if (self.p * self.n2).denominator != 1 or (self.p * self.n1).denominator != 1:
            raise InvalidParams(
                f"p*n2 = {self.p * self.n2} and p*n1 = {self.p * self.n1} must be integers"
            )

    @classmethod
    def from_degree(cls, n1: int, n2: int, d1: int) -> "BiregularParams":
        return cls(n1, n2, Fraction(d1, n2))

    @property
    def d1(self) -> int:
        return int(self.p * self.n2)

    @property
    def d2(self) -> int:
        return int(self.p * self.n1)

    @property
    def N(self) -> int:
        return self.n1 * self.n2

    @property
    def M(self) -> int:
        return self.d1 * self.n1

    @property
    def q(self) -> Fraction:
        return 1 - self.p

    @property
    def p_hat(self) -> Fraction:
        return min(self.p, self.q)

    @property
    def n_hat(self) -> int:
        return min(self.n1, self.n2)

    def complement(self) -> "BiregularParams":
        return BiregularParams(self.n1, self.n2, self.q)

    def transpose(self) -> "BiregularParams":
        return BiregularParams(self.n2, self.n1, self.p)

    def __str__(self) -> str:
        return f"({self.n1},{self.n2},p={self.p})"


class Vertex(NamedTuple):
    side: int  # 1 or 2
    index: int

    def __repr__(self) -> str:
        return f"{'u' if self.side == 1 else 'w'}{self.index}"


def V1(i: int) -> Vertex:
    return Vertex(1, i)


def V2(j: int) -> Vertex:
    return Vertex(2, j)


def _popcount(x: int) -> int:
    return x.bit_count()


@dataclass(frozen=True)
class BipartiteGraph:
    """Immutable subgraph of ``K_{n1,n2}``; ``rows[i]`` has bit ``j`` set iff ij is an edge."""

    n1: int
    n2: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != self.n1:
            raise ValueError("need exactly n1 rows")
        full = (1 << self.n2) - 1
        for r in self.rows:
            if r < 0 or r & ~full:
                raise ValueError("row has bits outside V2")

    # construction ---------------------------------------------------------

    @classmethod
    def empty(cls, n1: int, n2: int) -> "BipartiteGraph":
        return cls(n1, n2, (0,) * n1)

    @classmethod
    def complete(cls, n1: int, n2: int) -> "BipartiteGraph":
        return cls(n1, n2, ((1 << n2) - 1,) * n1)

    @classmethod
    def from_edges(cls, n1: int, n2: int, edges: Iterable[Edge]) -> "BipartiteGraph":
        rows = [0] * n1
        for i, j in edges:
            if not (0 <= i < n1 and 0 <= j < n2):
                raise ValueError(f"edge ({i},{j}) outside K_{{{n1},{n2}}}")
            rows[i] |= 1 << j
        return cls(n1, n2, tuple(rows))

    @classmethod
    def from_mask(cls, n1: int, n2: int, mask: int) -> "BipartiteGraph":
        full = (1 << n2) - 1
        return cls(n1, n2, tuple((mask >> (i * n2)) & full for i in range(n1)))

    @classmethod
    def from_array(cls, a) -> "BipartiteGraph":
        a = np.asarray(a, dtype=bool)
        n1, n2 = a.shape
        rows = tuple(sum(1 << j for j in np.flatnonzero(a[i]).tolist()) for i in range(n1))
        return cls(n1, n2, rows)

    # views ----------------------------------------------------------------

    @cached_property
    def mask(self) -> int:
        """Flat bitset; edge ij is bit ``i*n2 + j``."""
        m = 0
        for i, r in enumerate(self.rows):
            m |= r << (i * self.n2)
        return m

    @cached_property
    def cols(self) -> tuple[int, ...]:
        cols = [0] * self.n2
        for i, r in enumerate(self.rows):
            while r:
                low = r & -r
                cols[low.bit_length() - 1] |= 1 << i
                r ^= low
        return tuple(cols)

    @property
    def num_edges(self) -> int:
        return sum(_popcount(r) for r in self.rows)

    def __len__(self) -> int:
        return self.num_edges

    def edges(self) -> list[Edge]:
        """Edges in row-major order."""
        out = []
        for i, r in enumerate(self.rows):
            j = 0
            while r:
                if r & 1:
                    out.append((i, j))
                r >>= 1
                j += 1
        return out

    def __iter__(self) -> Iterator[Edge]:
        return iter(self.edges())

    def has_edge(self, e: Edge) -> bool:
        i, j = e
        return bool(self.rows[i] >> j & 1)

    __contains__ = has_edge

    def neighbors(self, v: Vertex) -> int:
        """Neighbourhood bitset of ``v`` (over the opposite side)."""
        return self.rows[v.index] if v.side == 1 else self.cols[v.index]

    def degree(self, v: Vertex) -> int:
        return _popcount(self.neighbors(v))

    def row_degrees(self) -> list[int]:
        return [_popcount(r) for r in self.rows]

    def col_degrees(self) -> list[int]:
        return [_popcount(c) for c in self.cols]

    def codegree_rows(self, u: int, v: int) -> int:
        """Common neighbours of V1 vertices ``u`` and ``v``."""
        return _popcount(self.rows[u] & self.rows[v])

    def max_codegree_rows(self) -> int:
        """Largest co-degree over pairs of distinct V1 vertices (0 if ``n1 < 2``)."""
        rows = self.rows
        best = 0
        for a in range(len(rows)):
            for b in range(a + 1, len(rows)):
                c = _popcount(rows[a] & rows[b])
                if c > best:
                    best = c
        return best

    def is_biregular(self, d1: int, d2: int) -> bool:
        return all(x == d1 for x in self.row_degrees()) and all(
            x == d2 for x in self.col_degrees()
        )

    def is_biregular_for(self, params: BiregularParams) -> bool:
        return (self.n1, self.n2) == (params.n1, params.n2) and self.is_biregular(
            params.d1, params.d2
        )

    def to_array(self) -> np.ndarray:
        a = np.zeros((self.n1, self.n2), dtype=bool)
        for i, j in self.edges():
            a[i, j] = True
        return a

    # set algebra ----------------------------------------------------------

    def _check_shape(self, other: "BipartiteGraph"):
        if (self.n1, self.n2) != (other.n1, other.n2):
            raise ValueError("graphs live on different vertex sets")

    def __or__(self, other: "BipartiteGraph") -> "BipartiteGraph":
        self._check_shape(other)
        return BipartiteGraph(self.n1, self.n2, tuple(a | b for a, b in zip(self.rows, other.rows)))

    def __and__(self, other: "BipartiteGraph") -> "BipartiteGraph":
        self._check_shape(other)
        return BipartiteGraph(self.n1, self.n2, tuple(a & b for a, b in zip(self.rows, other.rows)))

    def __sub__(self, other: "BipartiteGraph") -> "BipartiteGraph":
        self._check_shape(other)
        return BipartiteGraph(self.n1, self.n2, tuple(a & ~b for a, b in zip(self.rows, other.rows)))

    def issubset(self, other: "BipartiteGraph") -> bool:
        self._check_shape(other)
        return all(a & ~b == 0 for a, b in zip(self.rows, other.rows))

    __le__ = issubset

    def with_edge(self, e: Edge) -> "BipartiteGraph":
        i, j = e
        rows = list(self.rows)
        rows[i] |= 1 << j
        return BipartiteGraph(self.n1, self.n2, tuple(rows))

    def without_edge(self, e: Edge) -> "BipartiteGraph":
        i, j = e
        rows = list(self.rows)
        rows[i] &= ~(1 << j)
        return BipartiteGraph(self.n1, self.n2, tuple(rows))

    def transpose(self) -> "BipartiteGraph":
        return BipartiteGraph(self.n2, self.n1, self.cols)

    def induced(self, A: Sequence[int], B: Sequence[int]) -> "BipartiteGraph":
        """Subgraph induced on ``A`` (V1 indices) and ``B`` (V2 indices), relabelled densely."""
        rows = []
        for i in A:
            r = 0
            for k, j in enumerate(B):
                if self.rows[i] >> j & 1:
                    r |= 1 << k
            rows.append(r)
        return BipartiteGraph(len(A), len(B), tuple(rows))

    # serialisation --------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.n1} {self.n2}"]
        lines.extend(f"{i} {j}" for i, j in self.edges())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BipartiteGraph":
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or len(lines[0]) != 2:
            raise ValueError("graph file must start with a header line 'n1 n2'")
        n1, n2 = int(lines[0][0]), int(lines[0][1])
        edges = []
        for parts in lines[1:]:
            if len(parts) != 2:
                raise ValueError(f"bad edge line: {' '.join(parts)!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return cls.from_edges(n1, n2, edges)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8", newline="\n")

    @classmethod
    def read(cls, path: Union[str, Path]) -> "BipartiteGraph":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def __repr__(self) -> str:
        return f"BipartiteGraph({self.n1}x{self.n2}, edges={self.edges()})"


def complement(G: BipartiteGraph) -> BipartiteGraph:
    full = (1 << G.n2) - 1
    return BipartiteGraph(G.n1, G.n2, tuple(full & ~r for r in G.rows))


def _same_side_pair(u: Vertex, v: Vertex) -> None:
    if u.side != v.side:
        raise SideMismatch(f"{u!r} and {v!r} lie on different sides")
    if u.index == v.index:
        raise SameVertex(f"co-degree needs distinct vertices, got {u!r} twice")


def codegree(F: BipartiteGraph, u: Vertex, v: Vertex) -> int:
    """Number of common neighbours of two distinct same-side vertices."""
    _same_side_pair(u, v)
    return _popcount(F.neighbors(u) & F.neighbors(v))


@dataclass(frozen=True)
class BlueRed:
    """An explicit blue/red edge colouring of a subgraph of ``K_{n1,n2}``."""

    blue: BipartiteGraph
    red: BipartiteGraph

    def __post_init__(self):
        self.blue._check_shape(self.red)
        if any(a & b for a, b in zip(self.blue.rows, self.red.rows)):
            raise ValueError("blue and red edge sets overlap")

    @property
    def n1(self) -> int:
        return self.blue.n1

    @property
    def n2(self) -> int:
        return self.blue.n2

    @property
    def union(self) -> BipartiteGraph:
        return self.blue | self.red

    def color_of(self, e: Edge):
        if self.blue.has_edge(e):
            return BLUE
        if self.red.has_edge(e):
            return RED
        return None


@dataclass(frozen=True)
class ColoredInstance:
    """A pair ``G ⊆ H`` with ``H`` biregular.

    Edges of ``H - G`` are blue, edges of ``K - H`` are red, ``G`` is uncoloured.
    """

    params: BiregularParams
    G: BipartiteGraph
    H: BipartiteGraph

    def __post_init__(self):
        if not self.G.issubset(self.H):
            raise ValueError("G must be a subgraph of H")
        if not self.H.is_biregular_for(self.params):
            raise NotBiregular(f"H is not biregular for {self.params}")

    @cached_property
    def blue(self) -> BipartiteGraph:
        return self.H - self.G

    @cached_property
    def red(self) -> BipartiteGraph:
        return complement(self.H)

    @property
    def n1(self) -> int:
        return self.params.n1

    @property
    def n2(self) -> int:
        return self.params.n2

    @property
    def union(self) -> BipartiteGraph:
        return complement(self.G)

    def color_of(self, e: Edge):
        if self.G.has_edge(e):
            return None
        return BLUE if self.H.has_edge(e) else RED

    def as_blue_red(self) -> BlueRed:
        return BlueRed(self.blue, self.red)


def theta(inst: ColoredInstance, u: Vertex, v: Vertex) -> int:
    """Number of middle vertices x with ux blue and xv red."""
    _same_side_pair(u, v)
    return _popcount(inst.blue.neighbors(u) & inst.red.neighbors(v))


@dataclass(frozen=True)
class AltWalk:
    """An alternating walk; ``colors[k]`` is the colour of the edge ``vertices[k]vertices[k+1]``."""

    vertices: tuple[Vertex, ...]
    colors: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def is_closed(self) -> bool:
        return len(self.vertices) > 1 and self.vertices[0] == self.vertices[-1]

    def edges(self) -> list[Edge]:
        out = []
        for a, b in zip(self.vertices, self.vertices[1:]):
            out.append((a.index, b.index) if a.side == 1 else (b.index, a.index))
        return out

    def validate(self, inst) -> None:
        """Raise ``ValueError`` unless this is an alternating walk in ``inst``."""
        if len(self.colors) != self.length:
            raise ValueError("need one colour per edge")
        for k, (a, b) in enumerate(zip(self.vertices, self.vertices[1:])):
            if a.side == b.side:
                raise ValueError(f"step {k} stays on side {a.side}")
            e = (a.index, b.index) if a.side == 1 else (b.index, a.index)
            if inst.color_of(e) != self.colors[k]:
                raise ValueError(f"edge {e} is not {self.colors[k]}")
        for c1, c2 in zip(self.colors, self.colors[1:]):
            if c1 == c2:
                raise ValueError("colours do not alternate")

