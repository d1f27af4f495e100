"""Pseudorandomness verifiers for bipartite and blue-red graphs.

Jumbledness checks enumerate ``A ⊆ V1`` and, for each ``A`` and each size
``|B|``, only look at the two extreme choices of ``B`` (heaviest and lightest
columns); the bound depends on ``|A|, |B|`` only, so this is exact.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    BLUE,
    RED,
    AltWalk,
    BipartiteGraph,
    BlueRed,
    ColoredInstance,
    Edge,
    Vertex,
    codegree,
)
from .errors import CapExceeded

Coloring = Union[ColoredInstance, BlueRed]

EXHAUSTIVE_SIDE_CAP = 12


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _subset_indices(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


@dataclass
class Worst:
    A: tuple[int, ...]
    B: tuple[int, ...]
    deviation: float
    bound: float


@dataclass
class JumbledCert:
    pi: float
    delta: float
    passed: bool
    worst: Optional[Worst]
    mode: str

    @property
    def pass_(self) -> bool:
        return self.passed


def _extreme_columns(F: BipartiteGraph, amask: int):
    """Columns sorted by edge count into ``A`` (descending) with prefix sums."""
    counts = [(c & amask).bit_count() for c in F.cols]
    order = sorted(range(F.n2), key=lambda j: (-counts[j], j))
    top = [0]
    for j in order:
        top.append(top[-1] + counts[j])
    return counts, order, top


def _scan_A(F: BipartiteGraph, amask: int, on_candidate) -> None:
    counts, order, top = _extreme_columns(F, amask)
    total = top[-1]
    n2 = F.n2
    for b in range(1, n2 + 1):
        e_max = top[b]
        # lightest b columns are the tail of the order
        e_min = total - top[n2 - b]
        on_candidate(amask, b, e_max, tuple(sorted(order[:b])))
        on_candidate(amask, b, e_min, tuple(sorted(order[n2 - b:])))


def jumbledness_check(F: BipartiteGraph, pi, delta, mode: str = "exhaustive",
                      cap_side: int = EXHAUSTIVE_SIDE_CAP, samples: int = 256,
                      rng=None) -> JumbledCert:
    """Check ``|e_F(A,B) - pi|A||B|| <= delta*sqrt(N|A||B|)`` over vertex sets.

    ``exhaustive`` covers every ``A`` (and hence every ``B``).  ``sampled``
    tries random and degree-extremal ``A`` and can only refute.
    """
    pi_q, delta_q = _exact(pi), _exact(delta)
    N = F.n1 * F.n2
    worst: list = [None, -math.inf]
    ok = [True]

    # integer form: (e*pd - pn*a*b)^2 * dd^2 <= dn^2 * pd^2 * N*a*b
    pn, pd = pi_q.numerator, pi_q.denominator
    dn, dd = delta_q.numerator, delta_q.denominator
    lhs_scale, rhs_scale = dd * dd, dn * dn * pd * pd * N
    pi_f, delta_f = float(pi_q), float(delta_q)

    def on_candidate(amask, b, e, B):
        a = amask.bit_count()
        diff = e * pd - pn * a * b
        if diff * diff * lhs_scale > rhs_scale * a * b:
            ok[0] = False
        dev = abs(e - pi_f * a * b)
        bound = delta_f * math.sqrt(N * a * b)
        if dev - bound > worst[1]:
            worst[0] = Worst(_subset_indices(amask), B, dev, bound)
            worst[1] = dev - bound

    if mode == "exhaustive":
        if F.n1 > cap_side or F.n2 > cap_side:
            raise CapExceeded(f"exhaustive jumbledness needs n1, n2 <= {cap_side}")
        for amask in range(1, 1 << F.n1):
            _scan_A(F, amask, on_candidate)
    elif mode == "sampled":
        for amask in _sample_sets(F, samples, rng):
            _scan_A(F, amask, on_candidate)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return JumbledCert(float(pi_q), float(delta_q), ok[0], worst[0], mode)


def _sample_sets(F: BipartiteGraph, samples: int, rng) -> list[int]:
    if rng is None:
        rng = np.random.default_rng(0)
    n1 = F.n1
    degs = F.row_degrees()
    order = sorted(range(n1), key=lambda i: (-degs[i], i))
    masks = set()
    for k in range(1, n1 + 1):
        masks.add(sum(1 << i for i in order[:k]))
        masks.add(sum(1 << i for i in order[n1 - k:]))
    for _ in range(samples):
        bits = rng.random(n1) < 0.5
        m = sum(1 << i for i in range(n1) if bits[i])
        if m:
            masks.add(m)
    return sorted(masks)


@dataclass
class ThomasonReport:
    rho: float
    mu: float
    hypothesis_holds: bool
    min_degree_ok: bool
    codegree_ok: bool
    conclusion_holds: Optional[bool]
    worst: Optional[Worst]
    failed_side: Optional[str]


def thomason_check(F: BipartiteGraph, rho, mu, cap_side: int = EXHAUSTIVE_SIDE_CAP) -> ThomasonReport:
    """Degree/co-degree hypothesis and the resulting discrepancy bound, exhaustively."""
    if F.n1 > cap_side or F.n2 > cap_side:
        raise CapExceeded(f"exhaustive check needs n1, n2 <= {cap_side}")
    rho_q, mu_q = _exact(rho), _exact(mu)
    n1, n2 = F.n1, F.n2
    min_deg_ok = all(d >= rho_q * n2 for d in F.row_degrees())
    cod_ok = True
    for u in range(n1):
        for v in range(u + 1, n1):
            if codegree(F, Vertex(1, u), Vertex(1, v)) > rho_q * rho_q * n2 + mu_q:
                cod_ok = False
    hyp = min_deg_ok and cod_ok
    if not hyp:
        side = "min_degree" if not min_deg_ok else "codegree"
        return ThomasonReport(float(rho_q), float(mu_q), False, min_deg_ok, cod_ok, None, None, side)

    worst: list = [None, -math.inf]
    ok = [True]

    def on_candidate(amask, b, e, B):
        a = amask.bit_count()
        dev = abs(e - rho_q * a * b)
        extra = b if a * rho_q < 1 else 0
        rad = (rho_q * n2 + mu_q * a) * a * b
        slack = dev - extra
        if slack > 0 and slack * slack > rad:
            ok[0] = False
        bound = math.sqrt(float(rad)) + extra
        if float(dev) - bound > worst[1]:
            worst[0] = Worst(_subset_indices(amask), B, float(dev), bound)
            worst[1] = float(dev) - bound

    for amask in range(1, 1 << n1):
        _scan_A(F, amask, on_candidate)
    return ThomasonReport(float(rho_q), float(mu_q), True, True, True, ok[0], worst[0],
                          None if ok[0] else "conclusion")


@dataclass
class RBRegularity:
    r: float
    b: float
    delta: float
    passed: bool
    worst_vertex: Optional[Vertex]
    worst_blue: Optional[Fraction]
    worst_red: Optional[Fraction]


def rb_regularity_check(coloring: Coloring, r, b, delta) -> RBRegularity:
    """Every relative blue degree within ``delta`` of ``b`` and red within ``delta`` of ``r``."""
    r_q, b_q, d_q = _exact(r), _exact(b), _exact(delta)
    blue, red = coloring.blue, coloring.red
    n1, n2 = blue.n1, blue.n2
    worst = (None, None, None)
    worst_gap = Fraction(-1)
    passed = True
    for side, size, other in ((1, n1, n2), (2, n2, n1)):
        for i in range(size):
            v = Vertex(side, i)
            db = Fraction(blue.degree(v), other)
            dr = Fraction(red.degree(v), other)
            gap = max(abs(db - b_q), abs(dr - r_q))
            if gap > d_q:
                passed = False
            if gap > worst_gap:
                worst_gap = gap
                worst = (v, db, dr)
    return RBRegularity(float(r_q), float(b_q), float(d_q), passed, *worst)


# alternating walks -------------------------------------------------------


class _Unified:
    """Blue/red adjacency over vertices ``0..n1-1`` (V1) and ``n1..n1+n2-1`` (V2)."""

    def __init__(self, coloring: Coloring):
        blue, red = coloring.blue, coloring.red
        self.n1, self.n2 = blue.n1, blue.n2
        n1 = self.n1
        self.adj = {
            BLUE: [r << n1 for r in blue.rows] + list(blue.cols),
            RED: [r << n1 for r in red.rows] + list(red.cols),
        }
        self.coloring = coloring

    def idx(self, v: Vertex) -> int:
        return v.index if v.side == 1 else self.n1 + v.index

    def vertex(self, k: int) -> Vertex:
        return Vertex(1, k) if k < self.n1 else Vertex(2, k - self.n1)

    def nbrs(self, color: str, S: int) -> int:
        adj = self.adj[color]
        out = 0
        while S:
            low = S & -S
            out |= adj[low.bit_length() - 1]
            S ^= low
        return out

    def to_set(self, S: int) -> frozenset:
        return frozenset(self.vertex(k) for k in _subset_indices(S))


def _walk_layers(U: _Unified, w: int, k: int) -> tuple[int, int]:
    """Bitsets (R_k, B_k) for target ``w``; stops early once the layers cycle."""
    prev = (0, 0)
    cur = (U.adj[RED][w], U.adj[BLUE][w])
    j = 1
    while j < k:
        nxt = (prev[0] | U.nbrs(RED, cur[1]), prev[1] | U.nbrs(BLUE, cur[0]))
        j += 1
        if nxt == prev:
            # stationary with period two from here on
            return nxt if (k - j) % 2 == 0 else cur
        prev, cur = cur, nxt
    return cur


def alternating_walk_sets(coloring: Coloring, w: Vertex, k: int) -> tuple[frozenset, frozenset]:
    """Vertices with an alternating walk to ``w`` of length ``<= k`` and parity ``k``.

    Returns ``(R_k, B_k)``: walks whose first edge (at the far end) is red,
    respectively blue.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    U = _Unified(coloring)
    R, B = _walk_layers(U, U.idx(w), k)
    return U.to_set(R), U.to_set(B)


def find_alternating_cycle(coloring: Coloring, e: Edge, max_len: int) -> Optional[AltWalk]:
    """A shortest alternating cycle through the coloured edge ``e``, or ``None``.

    Breadth-first search over (vertex, colour of last edge) from the V1 end of
    ``e`` to its V2 end, starting and finishing with the colour opposite to
    ``e``; the walk is loop-erased and closed with ``e``.
    """
    color = coloring.color_of(e)
    if color is None:
        raise ValueError(f"edge {e} is not coloured")
    U = _Unified(coloring)
    start, target = e[0], U.n1 + e[1]
    first = RED if color == BLUE else BLUE
    other = {BLUE: RED, RED: BLUE}
    max_walk = max_len - 1
    if max_walk < 1:
        return None

    parent: dict = {}
    frontier = deque()
    for x in _subset_indices(U.adj[first][start]):
        state = (x, first)
        if state not in parent:
            parent[state] = (start, None)
            frontier.append((state, 1))
    found = None
    while frontier:
        (v, c), depth = frontier.popleft()
        if v == target and c == first:
            found = (v, c)
            break
        if depth >= max_walk:
            continue
        nc = other[c]
        for x in _subset_indices(U.adj[nc][v]):
            st = (x, nc)
            if st not in parent:
                parent[st] = (v, c)
                frontier.append((st, depth + 1))
    if found is None:
        return None

    verts, cols = [found[0]], []
    state = found
    while True:
        prev_v, prev_c = parent[state]
        cols.append(state[1])
        verts.append(prev_v)
        if prev_c is None:
            break
        state = (prev_v, prev_c)
    verts.reverse()
    cols.reverse()
    verts, cols = _loop_erase(verts, cols)
    walk = AltWalk(tuple(U.vertex(k) for k in verts + [start]), tuple(cols + [color]))
    return walk


def _loop_erase(verts: list[int], cols: list[str]) -> tuple[list[int], list[str]]:
    """Cut the segment between the first two visits of any repeated vertex."""
    while True:
        seen: dict = {}
        for pos, v in enumerate(verts):
            if v in seen:
                a = seen[v]
                verts = verts[: a + 1] + verts[pos + 1:]
                cols = cols[:a] + cols[pos:]
                break
            seen[v] = pos
        else:
            return verts, cols


def check_cycle(coloring: Coloring, walk: AltWalk, e: Edge) -> None:
    """Raise ``ValueError`` unless ``walk`` is a simple closed alternating cycle through ``e``."""
    walk.validate(coloring)
    if not walk.is_closed:
        raise ValueError("cycle is not closed")
    inner = walk.vertices[:-1]
    if len(set(inner)) != len(inner):
        raise ValueError("cycle is not simple")
    if walk.colors[0] == walk.colors[-1]:
        raise ValueError("colours clash where the cycle closes")
    if e not in walk.edges():
        raise ValueError(f"cycle misses {e}")


def walk_length_bound(r, b) -> int:
    """``4*ceil(16/(rb)) + 1``."""
    return 4 * math.ceil(Fraction(16) / (_exact(r) * _exact(b))) + 1


def cycle_length_bound(r, b) -> int:
    """``2*(2*ceil(16/(rb)) + 1)``."""
    return 2 * (2 * math.ceil(Fraction(16) / (_exact(r) * _exact(b))) + 1)


@dataclass
class WalkCycleReport:
    L: int
    cycle_bound: int
    missing_walks: list = field(default_factory=list)
    missing_cycles: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.missing_walks and not self.missing_cycles


def walks_and_cycles(coloring: Coloring, r, b) -> WalkCycleReport:
    """Check walks of both starting colours for every cross pair and a short cycle for every edge."""
    L, D2 = walk_length_bound(r, b), cycle_length_bound(r, b)
    U = _Unified(coloring)
    rep = WalkCycleReport(L, D2)
    n1, n2 = U.n1, U.n2
    for y in range(n1, n1 + n2):
        R, B = _walk_layers(U, y, L)
        for x in range(n1):
            if not R >> x & 1:
                rep.missing_walks.append((U.vertex(x), U.vertex(y), RED))
            if not B >> x & 1:
                rep.missing_walks.append((U.vertex(x), U.vertex(y), BLUE))
    union = coloring.blue | coloring.red
    for e in union.edges():
        if find_alternating_cycle(coloring, e, D2) is None:
            rep.missing_cycles.append(e)
    return rep


def alternating_reach_batch(blue: np.ndarray, red: np.ndarray, max_k: int) -> tuple[np.ndarray, np.ndarray]:
    """Shortest alternating walk lengths for a stack of colourings.

    ``blue`` and ``red`` have shape ``(m, n1, n2)``.  Returns ``(first_red,
    first_blue)`` of shape ``(m, n, n)`` with ``n = n1 + n2``: entry
    ``[g, w, v]`` is the least ``k <= max_k`` with ``v`` in ``R_k`` (resp.
    ``B_k``) for target ``w``, or ``-1``.  Vertex ``v`` uses the unified
    numbering (V2 shifted by ``n1``).
    """
    blue = np.asarray(blue, dtype=bool)
    red = np.asarray(red, dtype=bool)
    m, n1, n2 = blue.shape
    n = n1 + n2

    def unify(a):
        u = np.zeros((m, n, n), dtype=np.float32)
        u[:, :n1, n1:] = a
        u[:, n1:, :n1] = np.transpose(a, (0, 2, 1))
        return u

    AB, AR = unify(blue), unify(red)
    # layer 1: row w holds the neighbours of w
    cur_R, cur_B = AR > 0, AB > 0
    prev_R = np.zeros_like(cur_R)
    prev_B = np.zeros_like(cur_B)
    first_R = np.where(cur_R, 1, -1).astype(np.int32)
    first_B = np.where(cur_B, 1, -1).astype(np.int32)
    k = 1
    while k < max_k:
        nxt_R = prev_R | (np.matmul(cur_B.astype(np.float32), AR) > 0)
        nxt_B = prev_B | (np.matmul(cur_R.astype(np.float32), AB) > 0)
        k += 1
        first_R[(first_R < 0) & nxt_R] = k
        first_B[(first_B < 0) & nxt_B] = k
        if np.array_equal(nxt_R, prev_R) and np.array_equal(nxt_B, prev_B):
            break
        prev_R, prev_B, cur_R, cur_B = cur_R, cur_B, nxt_R, nxt_B
    return first_R, first_B


@dataclass
class SparseCutReport:
    hypothesis_range_ok: bool
    regular: Optional[bool]
    jumbled: Optional[bool]
    cross: Fraction
    min_term: Fraction
    max_term: Fraction
    h: Fraction
    hypothesis_holds: bool
    conclusion_bound: Optional[Fraction]
    conclusion_holds: Optional[bool]

    @property
    def violated(self) -> bool:
        """True when every precondition and hypothesis holds but the conclusion fails."""
        return bool(self.hypothesis_range_ok and self.regular and self.jumbled
                    and self.hypothesis_holds and self.conclusion_holds is False)


def sparse_cut_check(coloring: Coloring, X: Iterable[int], Y: Iterable[int], r, b, delta, nu,
                  x_side: int = 1, preconditions: Optional[tuple[bool, bool]] = None) -> SparseCutReport:
    """Evaluate the blue-red set inequality for ``X ⊆ V_x_side`` and ``Y`` on the other side.

    ``preconditions`` may supply precomputed (regular, jumbled) flags; by
    default both are checked exhaustively.
    """
    r_q, b_q, d_q, nu_q = (_exact(z) for z in (r, b, delta, nu))
    alpha = min(r_q, b_q)
    range_ok = 0 < nu_q < alpha / 16 and 0 < d_q <= alpha / 16
    blue, red = coloring.blue, coloring.red
    n1, n2 = blue.n1, blue.n2
    N = n1 * n2
    if preconditions is None:
        regular = rb_regularity_check(coloring, r_q, b_q, d_q).passed
        jumbled = jumbledness_check(blue | red, r_q + b_q, d_q).passed
    else:
        regular, jumbled = preconditions

    X, Y = frozenset(X), frozenset(Y)
    nx, ny = (n1, n2) if x_side == 1 else (n2, n1)
    xm = sum(1 << i for i in X)
    ym = sum(1 << j for j in Y)
    xbar = ((1 << nx) - 1) & ~xm
    ybar = ((1 << ny) - 1) & ~ym

    def e_count(F: BipartiteGraph, xs: int, ys: int) -> int:
        rows = F.rows if x_side == 1 else F.cols
        return sum((rows[i] & ys).bit_count() for i in _subset_indices(xs))

    cross = Fraction(e_count(blue, xm, ybar) + e_count(red, xbar, ym), N)
    sx, sy = Fraction(len(X), nx), Fraction(len(Y), ny)
    h = r_q * b_q / (r_q + b_q)
    lo = min(b_q * sx, r_q * sy)
    hi = max(b_q * sx, r_q * sy)
    hyp = cross <= nu_q and lo <= h
    if alpha > 0 and 1 - 7 * d_q / alpha > 0:
        bound = nu_q / (1 - 7 * d_q / alpha)
        concl = hi <= bound
    else:
        bound, concl = None, None
    return SparseCutReport(range_ok, regular, jumbled, cross, lo, hi, h, hyp, bound, concl)
