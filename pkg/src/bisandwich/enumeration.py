"""Exact counting, listing and unranking of biregular graphs.

Rows are filled in index order; the state after ``i`` rows is the vector of
column residuals.  Once no constraint touches the remaining rows the columns
are exchangeable, so the memo key becomes the sorted residual multiset.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, Optional, Sequence

from .core import BiregularParams, BipartiteGraph, ColoredInstance, Edge, codegree, V1
from .errors import (
    DegreeSumMismatch,
    EdgeInG,
    Inadmissible,
    InconsistentConstraint,
    SameVertex,
    TooLarge,
)

DEFAULT_CAP = 36
LIST_CAP = 10**6


def enumeration_cap() -> int:
    """Cap on ``N`` for exact enumeration; ``BIREG_CAP`` overrides the default."""
    env = os.environ.get("BIREG_CAP")
    return int(env) if env else DEFAULT_CAP


def _check_cap(params: BiregularParams, cap: Optional[int]) -> None:
    cap = enumeration_cap() if cap is None else cap
    if params.N > cap:
        raise TooLarge(f"N={params.N} exceeds enumeration cap {cap}")


@dataclass(frozen=True)
class Constraint:
    """Edges that must lie in H and edges that must avoid H."""

    forced: frozenset = field(default_factory=frozenset)
    forbidden: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "forced", frozenset(map(tuple, self.forced)))
        object.__setattr__(self, "forbidden", frozenset(map(tuple, self.forbidden)))
        clash = self.forced & self.forbidden
        if clash:
            raise InconsistentConstraint(f"edges both forced and forbidden: {sorted(clash)}")

    @classmethod
    def containing(cls, G: BipartiteGraph, *extra: Edge) -> "Constraint":
        return cls(frozenset(G.edges()) | frozenset(extra))

    def rows(self, n1: int, n2: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        fr, fb = [0] * n1, [0] * n1
        for i, j in self.forced:
            if not (0 <= i < n1 and 0 <= j < n2):
                raise InconsistentConstraint(f"edge {(i, j)} outside K")
            fr[i] |= 1 << j
        for i, j in self.forbidden:
            if not (0 <= i < n1 and 0 <= j < n2):
                raise InconsistentConstraint(f"edge {(i, j)} outside K")
            fb[i] |= 1 << j
        return tuple(fr), tuple(fb)

    def to_dict(self) -> dict:
        return {"forced": sorted(list(e) for e in self.forced),
                "forbidden": sorted(list(e) for e in self.forbidden)}


@lru_cache(maxsize=None)
def _row_patterns(n2: int, d1: int) -> tuple[int, ...]:
    return tuple(sum(1 << j for j in c) for c in combinations(range(n2), d1))


class BiregularCounter:
    """Counting/unranking engine for one ``(params, constraint)`` pair."""

    def __init__(self, params: BiregularParams, constraint: Optional[Constraint] = None,
                 cap: Optional[int] = None):
        _check_cap(params, cap)
        self.params = params
        self.constraint = constraint or Constraint()
        n1, n2 = params.n1, params.n2
        self.forced, self.forbidden = self.constraint.rows(n1, n2)
        # first row index from which no row carries a constraint
        self._free_from = n1
        while self._free_from > 0 and not (self.forced[self._free_from - 1] or self.forbidden[self._free_from - 1]):
            self._free_from -= 1
        self._patterns = _row_patterns(n2, params.d1)
        self._memo: dict = {}
        self._root = (params.d2,) * n2

    def _candidates(self, i: int, res: tuple[int, ...]) -> Iterator[tuple[int, tuple[int, ...]]]:
        avail = 0
        for j, r in enumerate(res):
            if r:
                avail |= 1 << j
        f, b = self.forced[i], self.forbidden[i]
        rows_left = self.params.n1 - i - 1
        for pat in self._patterns:
            if pat & ~avail or pat & f != f or pat & b:
                continue
            new = tuple(r - (pat >> j & 1) for j, r in enumerate(res))
            # a column cannot need more edges than rows remain
            if max(new) > rows_left:
                continue
            yield pat, new

    def count_from(self, i: int, res: tuple[int, ...]) -> int:
        if i == self.params.n1:
            return 1 if not any(res) else 0
        key = (i, tuple(sorted(res))) if i >= self._free_from else (i, res)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        res_eval = key[1]
        total = 0
        for _, new in self._candidates(i, res_eval):
            total += self.count_from(i + 1, new)
        self._memo[key] = total
        return total

    def count(self) -> int:
        return self.count_from(0, self._root)

    def unrank(self, r: int) -> BipartiteGraph:
        """The ``r``-th graph in lexicographic pattern order, ``0 <= r < count()``."""
        total = self.count()
        if not 0 <= r < total:
            raise IndexError(f"rank {r} outside [0, {total})")
        rows = []
        res = self._root
        for i in range(self.params.n1):
            for pat, new in self._candidates(i, res):
                c = self.count_from(i + 1, new)
                if r < c:
                    rows.append(pat)
                    res = new
                    break
                r -= c
        return BipartiteGraph(self.params.n1, self.params.n2, tuple(rows))

    def sample(self, rng) -> BipartiteGraph:
        total = self.count()
        if total == 0:
            raise Inadmissible("no biregular graph satisfies the constraint")
        return self.unrank(_randbelow(rng, total))

    def __iter__(self) -> Iterator[BipartiteGraph]:
        n1, n2 = self.params.n1, self.params.n2

        def rec(i, res, rows):
            if i == n1:
                if not any(res):
                    yield BipartiteGraph(n1, n2, tuple(rows))
                return
            for pat, new in self._candidates(i, res):
                if self.count_from(i + 1, new) == 0:
                    continue
                rows.append(pat)
                yield from rec(i + 1, new, rows)
                rows.pop()

        yield from rec(0, self._root, [])


def _randbelow(rng, n: int) -> int:
    """Uniform integer in ``[0, n)`` for arbitrarily large ``n``."""
    if n < 2**62:
        return int(rng.integers(n))
    k = n.bit_length()
    while True:
        words = (k + 31) // 32
        x = 0
        for w in rng.integers(0, 2**32, size=words, dtype="uint64"):
            x = (x << 32) | int(w)
        x >>= words * 32 - k
        if x < n:
            return x


@lru_cache(maxsize=4096)
def _counter(params: BiregularParams, constraint: Constraint, cap: int) -> BiregularCounter:
    return BiregularCounter(params, constraint, cap)


def count_biregular(params: BiregularParams, constraint: Optional[Constraint] = None,
                    cap: Optional[int] = None) -> int:
    """Exact number of p-biregular graphs satisfying ``constraint``."""
    cap = enumeration_cap() if cap is None else cap
    _check_cap(params, cap)
    return _counter(params, constraint or Constraint(), cap).count()


def list_biregular(params: BiregularParams, constraint: Optional[Constraint] = None,
                   cap: Optional[int] = None, limit: int = LIST_CAP) -> list[BipartiteGraph]:
    """All biregular graphs satisfying ``constraint``, in lexicographic row order."""
    counter = BiregularCounter(params, constraint, cap)
    total = counter.count()
    if total > limit:
        raise TooLarge(f"{total} graphs exceed the listing cap {limit}")
    return list(counter)


def _count_containing(params: BiregularParams, G: BipartiteGraph, cap, *extra: Edge) -> int:
    return count_biregular(params, Constraint.containing(G, *extra), cap)


def conditional_edge_prob(params: BiregularParams, G: BipartiteGraph, e: Edge,
                          cap: Optional[int] = None) -> Fraction:
    """P(eta_{t+1} = e | R(t) = G), with ``t = |E(G)|``."""
    if G.has_edge(e):
        raise EdgeInG(f"edge {e} already in G")
    t = G.num_edges
    base = _count_containing(params, G, cap)
    if base == 0:
        raise Inadmissible("G extends to no biregular graph")
    if t >= params.M:
        raise Inadmissible("G already has M edges")
    return Fraction(_count_containing(params, G, cap, e), base * (params.M - t))


def edge_probabilities(params: BiregularParams, G: BipartiteGraph,
                       cap: Optional[int] = None) -> dict[Edge, Fraction]:
    """``conditional_edge_prob`` for every edge outside ``G``."""
    t = G.num_edges
    base = _count_containing(params, G, cap)
    if base == 0:
        raise Inadmissible("G extends to no biregular graph")
    if t >= params.M:
        raise Inadmissible("G already has M edges")
    denom = base * (params.M - t)
    out = {}
    for i in range(params.n1):
        for j in range(params.n2):
            if not G.rows[i] >> j & 1:
                out[(i, j)] = Fraction(_count_containing(params, G, cap, (i, j)), denom)
    return out


def is_admissible(params: BiregularParams, G: BipartiteGraph, cap: Optional[int] = None) -> bool:
    return _count_containing(params, G, cap) > 0


@dataclass(frozen=True)
class CountTable:
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def distribution(self) -> list[Fraction]:
        return [Fraction(c, self.total) for c in self.counts]

    def mean(self) -> Fraction:
        return Fraction(sum(k * c for k, c in enumerate(self.counts)), self.total)

    def ratios(self) -> list[Optional[Fraction]]:
        """``r_k / r_{k-1}`` for ``k = 1..d1`` (``None`` where undefined)."""
        out = []
        for k in range(1, len(self.counts)):
            prev = self.counts[k - 1]
            out.append(Fraction(self.counts[k], prev) if prev else None)
        return out

    def to_csv(self) -> str:
        return "k,r_k\n" + "".join(f"{k},{c}\n" for k, c in enumerate(self.counts))


def codegree_class_counts(params: BiregularParams, u: int = 0, v: int = 1,
                          cap: Optional[int] = None) -> CountTable:
    """``counts[k]`` = number of biregular H in which V1 vertices u, v have co-degree k.

    Rows u and v are placed first; for each choice of the two rows the rest
    is counted exactly.
    """
    if u == v:
        raise SameVertex("u and v must differ")
    if not (0 <= u < params.n1 and 0 <= v < params.n1):
        raise ValueError("u and v must be V1 vertices")
    _check_cap(params, cap)
    n1, n2, d1 = params.n1, params.n2, params.d1
    counts = [0] * (d1 + 1)
    patterns = _row_patterns(n2, d1)
    # relabel so u, v are rows 0 and 1; the class is invariant under row permutation
    for a in patterns:
        for b in patterns:
            res = tuple(params.d2 - (a >> j & 1) - (b >> j & 1) for j in range(n2))
            if min(res) < 0:
                continue
            ways = _count_with_column_sums(n1 - 2, n2, d1, res)
            counts[(a & b).bit_count()] += ways
    return CountTable(tuple(counts))


@lru_cache(maxsize=None)
def _count_with_column_sums(n_rows: int, n2: int, d1: int, colsums: tuple[int, ...]) -> int:
    """Number of 0/1 matrices with ``n_rows`` rows of sum ``d1`` and given column sums."""
    colsums = tuple(sorted(colsums))
    if n_rows == 0:
        return 1 if not any(colsums) else 0
    if max(colsums) > n_rows or sum(colsums) != n_rows * d1:
        return 0
    total = 0
    for pat in _row_patterns(n2, d1):
        new = []
        ok = True
        for j, c in enumerate(colsums):
            x = c - (pat >> j & 1)
            if x < 0:
                ok = False
                break
            new.append(x)
        if ok:
            total += _count_with_column_sums(n_rows - 1, n2, d1, tuple(new))
    return total


@dataclass(frozen=True)
class CGMEstimate:
    estimate: float
    log_estimate: float
    exponent_factor: float
    conditions: dict


def cgm_estimate(dd1: Sequence[int], dd2: Sequence[int], a: float = 0.2, b: float = 0.2,
                 C: float = 1.0, eps: float = 0.1) -> CGMEstimate:
    """Asymptotic count of bipartite graphs with degree sequences ``dd1``, ``dd2``.

    The error term is dropped.  ``conditions`` reports the three validity
    conditions for the supplied ``a, b, C, eps``.
    """
    n1, n2 = len(dd1), len(dd2)
    s = sum(dd1)
    if s != sum(dd2):
        raise DegreeSumMismatch(f"degree sums differ: {s} vs {sum(dd2)}")
    if any(not 0 <= d <= n2 for d in dd1) or any(not 0 <= d <= n1 for d in dd2):
        raise ValueError("degree out of range")
    N = n1 * n2
    dbar1, dbar2 = Fraction(s, n1), Fraction(s, n2)
    D1 = sum((d - dbar1) ** 2 for d in dd1)
    D2 = sum((d - dbar2) ** 2 for d in dd2)
    p = Fraction(s, N)
    q = 1 - p
    pqN = p * q * N

    def lcomb(n, k):
        return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)

    log_binoms = sum(lcomb(n2, d) for d in dd1) + sum(lcomb(n1, d) for d in dd2) - lcomb(N, s)
    f1 = 1 - (D1 / pqN if D1 else 0)
    f2 = 1 - (D2 / pqN if D2 else 0)
    exponent = -0.5 * float(f1 * f2)
    log_est = log_binoms + exponent

    pf, qf = float(p), float(q)
    nmax, nmin = max(n1, n2), min(n1, n2)
    cond_i = (max((abs(d - dbar1) for d in dd1), default=0) <= C * n2 ** (0.5 + eps)
              and max((abs(d - dbar2) for d in dd2), default=0) <= C * n1 ** (0.5 + eps))
    cond_ii = nmax <= C * (pf * qf) ** 2 * nmin ** (1 + eps)
    if pf * qf > 0:
        lhs3 = (1 - 2 * pf) ** 2 / (4 * pf * qf) * (1 + 5 * n1 / (6 * n2) + 5 * n2 / (6 * n1))
    else:
        lhs3 = math.inf
    cond_iii = lhs3 <= a * math.log(nmax) if nmax > 1 else False
    conditions = {
        "constants_valid": a > 0 and b > 0 and C > 0 and a + b < 0.5,
        "i_degree_spread": bool(cond_i),
        "ii_balance": bool(cond_ii),
        "iii_density": bool(cond_iii),
        "D1": float(D1), "D2": float(D2),
    }
    return CGMEstimate(math.exp(log_est), log_est, math.exp(exponent), conditions)


@dataclass
class SwitchingReport:
    n_with: int  # |R_{G,e}|
    n_without: int  # |R_{G,not e}|
    ratio: Optional[Fraction]
    lower: Fraction
    upper: int
    within_bounds: Optional[bool]
    both_nonempty: bool
    hypothesis_holds: bool
    hypothesis_failures: int
    message: str


def switching_ratio_check(params: BiregularParams, G: BipartiteGraph, e: Edge, D: int,
                          cap: Optional[int] = None) -> SwitchingReport:
    """Exact class sizes with and without ``e`` against the switching bounds.

    Also tests, for every H containing G, whether ``e`` lies on an alternating
    cycle of length at most ``2D``.
    """
    from .pseudo import find_alternating_cycle

    if G.has_edge(e):
        raise EdgeInG(f"edge {e} already in G")
    base = Constraint.containing(G)
    total = count_biregular(params, base, cap)
    if total == 0:
        raise Inadmissible("G extends to no biregular graph")
    n_with = count_biregular(params, Constraint.containing(G, e), cap)
    n_without = count_biregular(params, Constraint(base.forced, frozenset([e])), cap)
    N = params.N
    upper = N**D - 1
    lower = Fraction(1, upper) if upper else Fraction(0)
    both = n_with > 0 and n_without > 0
    ratio = Fraction(n_without, n_with) if n_with else None
    within = (lower <= ratio <= upper) if both else None

    failures = 0
    for H in list_biregular(params, base, cap):
        inst = ColoredInstance(params, G, H)
        if find_alternating_cycle(inst, e, 2 * D) is None:
            failures += 1
    if not both:
        empty = "R_{G,not e}" if n_without == 0 else "R_{G,e}"
        msg = f"{empty} empty, switching hypothesis cannot hold"
    elif failures:
        msg = f"hypothesis fails for {failures} of {total} graphs"
    else:
        msg = "hypothesis holds; ratio within bounds" if within else "ratio outside bounds"
    return SwitchingReport(n_with, n_without, ratio, lower, upper, within, both,
                           failures == 0 and both, failures, msg)


def ratio_bracketing_report(params: BiregularParams, cap: Optional[int] = None) -> list[dict]:
    """Class-size ratios ``r_k/r_{k-1}`` next to ``(d1-k+1)^2/(k(n2-2d1+k))``."""
    table = codegree_class_counts(params, 0, 1, cap)
    d1, n2 = params.d1, params.n2
    rows = []
    for k in range(1, d1 + 1):
        prev, cur = table.counts[k - 1], table.counts[k]
        denom = k * (n2 - 2 * d1 + k)
        ref = Fraction((d1 - k + 1) ** 2, denom) if denom > 0 else None
        rows.append({"k": k, "ratio": Fraction(cur, prev) if prev else None, "reference": ref})
    return rows
