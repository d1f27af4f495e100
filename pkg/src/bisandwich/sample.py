"""Samplers for biregular graphs, binomial random graphs and the edge-reveal process."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

from .core import BiregularParams, BipartiteGraph, Edge, as_fraction
from .enumeration import Constraint, _counter, _randbelow, enumeration_cap
from .errors import EmptyClass, Inadmissible, NotBiregular, OutOfRange, TooLarge

DEFAULT_SEED = 20240101

T = TypeVar("T")


def make_rng(seed: int = DEFAULT_SEED) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index`` under master ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def run_trials(fn: Callable[[np.random.Generator, int], T], trials: int, seed: int,
               threads: int = 1) -> list[T]:
    """Call ``fn(rng, i)`` for each trial; results keep trial order for any thread count."""
    def one(i: int) -> T:
        return fn(trial_rng(seed, i), i)

    if threads <= 1:
        return [one(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(trials)))


def _check_class(params: BiregularParams) -> None:
    if not (0 <= params.d1 <= params.n2 and 0 <= params.d2 <= params.n1):
        raise EmptyClass(f"no biregular graph for {params}")


def sample_biregular_exact(params: BiregularParams, rng, cap: Optional[int] = None) -> BipartiteGraph:
    """Exactly uniform p-biregular graph, by unranking a uniform rank."""
    _check_class(params)
    cap = enumeration_cap() if cap is None else cap
    if params.N > cap:
        raise TooLarge(f"N={params.N} exceeds enumeration cap {cap}")
    counter = _counter(params, Constraint(), cap)
    if counter.count() == 0:
        raise EmptyClass(f"no biregular graph for {params}")
    return counter.sample(rng)


def canonical_biregular(params: BiregularParams) -> BipartiteGraph:
    """A fixed biregular graph: row ``i`` takes the ``d1`` columns following ``i*d1`` cyclically.

    Consecutive rows use consecutive blocks, so after ``n1`` rows the
    ``n1*d1 = n2*d2`` entries wrap around the columns exactly ``d2`` times.
    """
    _check_class(params)
    n1, n2, d1 = params.n1, params.n2, params.d1
    rows = []
    for i in range(n1):
        r = 0
        for k in range(d1):
            r |= 1 << ((i * d1 + k) % n2)
        rows.append(r)
    G = BipartiteGraph(n1, n2, tuple(rows))
    assert G.is_biregular_for(params)
    return G


def _pick_pairs(rng, n: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    """``size`` uniformly random ordered pairs of distinct indices below ``n``."""
    a = rng.integers(n, size=size)
    b = rng.integers(n - 1, size=size)
    b = b + (b >= a)
    return a, b


def swap_attempts(rows: list[int], n1: int, n2: int, rng, count: int, chunk: int = 1 << 16) -> int:
    """Run ``count`` lazy swap attempts in place; returns the number of accepted swaps.

    Each attempt picks rows ``u != v`` and columns ``w != x`` uniformly and
    swaps the 4-cycle when ``uw, vx`` are edges and ``ux, vw`` are not.
    """
    if n1 < 2 or n2 < 2:
        return 0
    done = accepted = 0
    while done < count:
        size = min(chunk, count - done)
        us, vs = _pick_pairs(rng, n1, size)
        ws, xs = _pick_pairs(rng, n2, size)
        for u, v, w, x in zip(us.tolist(), vs.tolist(), ws.tolist(), xs.tolist()):
            ru, rv = rows[u], rows[v]
            if ru >> w & 1 and rv >> x & 1 and not ru >> x & 1 and not rv >> w & 1:
                flip = (1 << w) | (1 << x)
                rows[u] = ru ^ flip
                rows[v] = rv ^ flip
                accepted += 1
        done += size
    return accepted


def sample_biregular_mcmc(params: BiregularParams, rng, burn_in: int = 10_000,
                          start: Optional[BipartiteGraph] = None) -> BipartiteGraph:
    """State of the lazy switch chain after ``burn_in`` attempts from the canonical graph."""
    G = canonical_biregular(params) if start is None else start
    rows = list(G.rows)
    swap_attempts(rows, params.n1, params.n2, rng, burn_in)
    return BipartiteGraph(params.n1, params.n2, tuple(rows))


def mcmc_chain(params: BiregularParams, rng, burn_in: int, thin: int, samples: int) -> list[BipartiteGraph]:
    """``samples`` states of one chain, ``thin`` attempts apart after ``burn_in``."""
    if thin < 1:
        raise ValueError("thin must be at least 1")
    rows = list(canonical_biregular(params).rows)
    n1, n2 = params.n1, params.n2
    swap_attempts(rows, n1, n2, rng, burn_in)
    out = []
    for _ in range(samples):
        swap_attempts(rows, n1, n2, rng, thin)
        out.append(BipartiteGraph(n1, n2, tuple(rows)))
    return out


@dataclass
class EdgeProcess:
    """A biregular ``H`` with a uniformly random ordering of its edges."""

    H: BipartiteGraph
    order: tuple[Edge, ...]
    t: int = 0

    @property
    def M(self) -> int:
        return len(self.order)

    def prefix(self, t: int) -> BipartiteGraph:
        if not 0 <= t <= self.M:
            raise OutOfRange(f"t={t} outside [0, {self.M}]")
        return BipartiteGraph.from_edges(self.H.n1, self.H.n2, self.order[:t])

    def advance(self) -> Edge:
        if self.t >= self.M:
            raise OutOfRange("process already complete")
        e = self.order[self.t]
        self.t += 1
        return e

    @property
    def current(self) -> BipartiteGraph:
        return self.prefix(self.t)


def shuffle(items: Sequence, rng) -> list:
    """Fisher-Yates shuffle drawing one bounded integer per position."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def reveal_process(H: BipartiteGraph, rng, params: Optional[BiregularParams] = None) -> EdgeProcess:
    """Uniform random ordering of ``E(H)``."""
    if params is not None:
        if not H.is_biregular_for(params):
            raise NotBiregular(f"H is not biregular for {params}")
    else:
        rd, cd = H.row_degrees(), H.col_degrees()
        if len(set(rd)) > 1 or len(set(cd)) > 1:
            raise NotBiregular("H is not biregular")
    return EdgeProcess(H, tuple(shuffle(H.edges(), rng)))


def sample_gnm(n1: int, n2: int, m: int, rng) -> BipartiteGraph:
    """Uniform ``m``-edge subgraph of ``K_{n1,n2}``."""
    N = n1 * n2
    if not 0 <= m <= N:
        raise OutOfRange(f"m={m} outside [0, {N}]")
    # partial Fisher-Yates over edge indices
    idx = list(range(N))
    for i in range(m):
        j = i + int(rng.integers(N - i))
        idx[i], idx[j] = idx[j], idx[i]
    return BipartiteGraph.from_edges(n1, n2, [divmod(k, n2) for k in idx[:m]])


def sample_gnp(n1: int, n2: int, pprime, rng) -> BipartiteGraph:
    """Each edge of ``K_{n1,n2}`` independently with probability ``pprime``."""
    pf = float(pprime)
    if not 0 <= pf <= 1:
        raise OutOfRange(f"p'={pprime} outside [0, 1]")
    a = rng.random((n1, n2)) < pf
    return BipartiteGraph.from_array(a)


def bernoulli(prob: Fraction, rng) -> bool:
    """Exact Bernoulli draw for a rational probability."""
    prob = as_fraction(prob)
    if prob <= 0:
        return False
    if prob >= 1:
        return True
    return _randbelow(rng, prob.denominator) < prob.numerator


def draw_from(dist: dict, rng):
    """Exact draw from a finite law with rational weights summing to one."""
    keys = list(dist)
    if not keys:
        raise Inadmissible("empty distribution")
    denom = 1
    for k in keys:
        denom = math.lcm(denom, dist[k].denominator)
    u = _randbelow(rng, denom)
    acc = 0
    for k in keys:
        acc += dist[k].numerator * (denom // dist[k].denominator)
        if u < acc:
            return k
    raise ValueError("weights sum to less than one")
