"""Step-by-step coupling of the uniform edge-order process with the binomial
edge process, and the embeddings read off from it.

At each step an edge ``eps`` is drawn uniformly from the edges missing from
the binomial prefix ``G_t`` and a coin ``xi`` with heads probability
``1 - gamma_t`` is flipped.  The next edge of the biregular prefix ``R_t`` is
then chosen so that its conditional law is exactly ``p_{t+1}(., R_t)`` and,
whenever all those conditional probabilities are at least
``(1 - gamma_t)/(N - t)`` and the coin shows heads, ``eps`` ends up in
``R_{t+1}``.  All probabilities are exact rationals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import BiregularParams, BipartiteGraph, Edge, as_fraction, complement
from .enumeration import BiregularCounter, Constraint, _randbelow, enumeration_cap
from .errors import (
    BiregularError,
    Inadmissible,
    NumericalNegativity,
    OracleUnavailable,
    OutOfRange,
    TooLarge,
)
from .sample import bernoulli, draw_from, shuffle
from .schedule import Schedule

BRANCH_DIRECT = "direct"  # eps not in R_t, xi = 1
BRANCH_BIJECTION = "bijection"  # eps in R_t, xi = 1
BRANCH_RESIDUAL = "residual"  # xi = 0
BRANCH_FALLBACK = "fallback"  # the minimum-probability event failed

LISTING_LIMIT = 400_000


class ExactOracle:
    """Exact conditional edge probabilities for one parameter set.

    Small classes are listed once as a bit matrix so that the counts for a
    prefix are column sums over the graphs containing it; larger classes
    fall back to constrained counting.  Results are memoised per prefix.
    """

    def __init__(self, params: BiregularParams, cap: Optional[int] = None):
        cap = enumeration_cap() if cap is None else cap
        if params.N > cap:
            raise OracleUnavailable(f"N={params.N} exceeds enumeration cap {cap}")
        self.params = params
        self.cap = cap
        counter = BiregularCounter(params, Constraint(), cap)
        self.total = counter.count()
        self._bits: Optional[np.ndarray] = None
        self._masks: list[int] = []
        if self.total <= LISTING_LIMIT and params.N <= 64:
            graphs = list(counter)
            self._masks = [g.mask for g in graphs]
            N = params.N
            self._u64 = np.array(self._masks, dtype=np.uint64)
            shifts = np.arange(N, dtype=np.uint64)
            self._bits = ((self._u64[:, None] >> shifts) & np.uint64(1)).astype(bool)
        self._cache: dict[int, tuple[int, list[int]]] = {}

    def _containing(self, G: BipartiteGraph) -> np.ndarray:
        g = np.uint64(G.mask)
        return (self._u64 & g) == g

    def counts(self, G: BipartiteGraph) -> tuple[int, list[int]]:
        """``(|R_G|, [|R_{G,e}| for e in row-major order])``."""
        key = G.mask
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        N = self.params.N
        if self._bits is not None:
            sel = self._containing(G)
            base = int(sel.sum())
            per = self._bits[sel].sum(axis=0).tolist() if base else [0] * N
        else:
            try:
                c = BiregularCounter(self.params, Constraint.containing(G), self.cap)
                base = c.count()
                per = [BiregularCounter(self.params, Constraint.containing(G, divmod(k, self.params.n2)),
                                        self.cap).count() for k in range(N)]
            except TooLarge as exc:
                raise OracleUnavailable(str(exc)) from exc
        out = (base, per)
        self._cache[key] = out
        return out

    def edge_probabilities(self, G: BipartiteGraph) -> dict[Edge, Fraction]:
        """``p_{t+1}(e, G)`` for every ``e`` outside ``G``."""
        P = self.params
        t = G.num_edges
        base, per = self.counts(G)
        if base == 0:
            raise Inadmissible("G extends to no biregular graph")
        if t >= P.M:
            raise Inadmissible("G already has M edges")
        denom = base * (P.M - t)
        n2 = P.n2
        out = {}
        for k in range(P.N):
            e = divmod(k, n2)
            if not G.rows[e[0]] >> e[1] & 1:
                out[e] = Fraction(per[k], denom)
        return out

    def complete(self, G: BipartiteGraph, rng) -> BipartiteGraph:
        """Uniform member of the class among graphs containing ``G``."""
        if self._bits is not None:
            idx = np.flatnonzero(self._containing(G))
            if len(idx) == 0:
                raise Inadmissible("G extends to no biregular graph")
            m = self._masks[int(idx[_randbelow(rng, len(idx))])]
            return BipartiteGraph.from_mask(self.params.n1, self.params.n2, m)
        c = BiregularCounter(self.params, Constraint.containing(G), self.cap)
        return c.sample(rng)


_ORACLES: dict = {}


def get_oracle(params: BiregularParams, cap: Optional[int] = None) -> ExactOracle:
    cap = enumeration_cap() if cap is None else cap
    key = (params, cap)
    if key not in _ORACLES:
        _ORACLES[key] = ExactOracle(params, cap)
    return _ORACLES[key]


def _threshold(chi: Fraction, N: int, t: int) -> Fraction:
    return (1 - chi) / (N - t)


def event_holds(probs: dict[Edge, Fraction], chi: Fraction, N: int, t: int) -> bool:
    """Every conditional probability reaches ``(1 - chi)/(N - t)``."""
    thr = _threshold(chi, N, t)
    return all(v >= thr for v in probs.values())


def check_event_A(params: BiregularParams, G: BipartiteGraph, chi, cap: Optional[int] = None) -> bool:
    """Whether ``min_e p_{t+1}(e, G) >= (1 - chi)/(N - t)``, exactly."""
    chi = as_fraction(chi)
    try:
        oracle = get_oracle(params, cap)
    except OracleUnavailable as exc:
        raise TooLarge(str(exc)) from exc
    probs = oracle.edge_probabilities(G)
    return event_holds(probs, chi, params.N, G.num_edges)


def edge_bijection(R: BipartiteGraph, G: BipartiteGraph) -> dict[Edge, Edge]:
    """Pair ``R - G`` with ``G - R`` in row-major order."""
    src = (R - G).edges()
    dst = (G - R).edges()
    if len(src) != len(dst):
        raise ValueError("R and G must have the same number of edges")
    return dict(zip(src, dst))


def residual_law(probs: dict[Edge, Fraction], gamma: Fraction, N: int, t: int) -> dict[Edge, Fraction]:
    """``(p(e) - (1 - gamma)/(N - t)) / gamma`` over the support of ``probs``."""
    thr = _threshold(gamma, N, t)
    out = {}
    for e, v in probs.items():
        r = (v - thr) / gamma
        if r < 0:
            raise NumericalNegativity(f"residual mass {r} at {e}")
        out[e] = r
    total = sum(out.values(), Fraction(0))
    if total != 1:
        raise BiregularError(f"residual law sums to {total}")
    return out


def one_step_law(params: BiregularParams, R: BipartiteGraph, G: BipartiteGraph, gamma,
                 oracle: Optional[ExactOracle] = None) -> dict[Edge, Fraction]:
    """Exact law of the next biregular-process edge, summed over every coupling branch."""
    gamma = as_fraction(gamma)
    oracle = oracle or get_oracle(params)
    N, t = params.N, R.num_edges
    probs = oracle.edge_probabilities(R)
    law = {e: Fraction(0) for e in probs}
    if not event_holds(probs, gamma, N, t):
        for e, v in probs.items():
            law[e] += v
        return law
    f = edge_bijection(R, G)
    free = complement(G).edges()
    each = (1 - gamma) / len(free)
    for eps in free:
        law[f.get(eps, eps)] += each
    if gamma > 0:
        for e, v in residual_law(probs, gamma, N, t).items():
            law[e] += gamma * v
    return law


@dataclass
class StepRecord:
    t: int
    eps: Edge
    xi: int
    branch: str
    event_held: bool
    eta: Edge
    gamma_t: str

    def to_dict(self) -> dict:
        return {"t": self.t, "eps": list(self.eps), "xi": self.xi, "branch": self.branch,
                "event_held": self.event_held, "eta": list(self.eta), "gamma_t": self.gamma_t}


@dataclass
class CouplingState:
    params: BiregularParams
    schedule: Schedule
    t: int
    R: BipartiteGraph
    G: BipartiteGraph
    S: list[int] = field(default_factory=list)
    eps_seq: list[Edge] = field(default_factory=list)
    history: list[StepRecord] = field(default_factory=list)

    @classmethod
    def initial(cls, params: BiregularParams, schedule: Schedule) -> "CouplingState":
        E = BipartiteGraph.empty(params.n1, params.n2)
        return cls(params, schedule, 0, E, E)

    def implication_violations(self) -> int:
        """Steps where the event held and ``xi = 1`` yet ``eps`` is missing from ``R_{t+1}``."""
        bad = 0
        R = BipartiteGraph.empty(self.params.n1, self.params.n2)
        for rec in self.history:
            R = R.with_edge(rec.eta)
            if rec.event_held and rec.xi == 1 and not R.has_edge(rec.eps):
                bad += 1
        return bad


def couple_step(state: CouplingState, rng, oracle: Optional[ExactOracle] = None) -> CouplingState:
    """Advance the coupling by one step, in place, and return the state."""
    P = state.params
    t = state.t
    if t >= P.M:
        raise OutOfRange("biregular process already complete")
    oracle = oracle or get_oracle(P)
    N = P.N
    gamma = state.schedule.gamma_t(t)
    if not 0 <= gamma <= 1:
        raise OutOfRange(f"gamma_{t} = {float(gamma)} outside [0, 1]")
    free = complement(state.G).edges()
    eps = free[_randbelow(rng, len(free))]
    xi = 1 if bernoulli(1 - gamma, rng) else 0
    probs = oracle.edge_probabilities(state.R)
    held = event_holds(probs, gamma, N, t)
    if held:
        if xi == 1:
            if state.R.has_edge(eps):
                eta = edge_bijection(state.R, state.G)[eps]
                branch = BRANCH_BIJECTION
            else:
                eta = eps
                branch = BRANCH_DIRECT
        else:
            eta = draw_from(residual_law(probs, gamma, N, t), rng)
            branch = BRANCH_RESIDUAL
    else:
        eta = draw_from(probs, rng)
        branch = BRANCH_FALLBACK
    state.R = state.R.with_edge(eta)
    state.G = state.G.with_edge(eps)
    state.eps_seq.append(eps)
    state.t = t + 1
    if xi:
        state.S.append(t + 1)
    state.history.append(StepRecord(t, eps, xi, branch, held, eta, str(gamma)))
    return state


@dataclass
class SandwichOutcome:
    R: BipartiteGraph  # the completed biregular graph H
    R_t0: BipartiteGraph
    Gm: BipartiteGraph
    success: bool
    S_size: int
    A_failures: int
    fallback: bool
    m: int
    t0: int
    history: list[StepRecord]
    implication_violations: int

    def summary(self) -> dict:
        return {"success": self.success, "S_size": self.S_size, "A_failures": self.A_failures,
                "fallback": self.fallback, "m": self.m, "t0": self.t0,
                "implication_violations": self.implication_violations,
                "H": self.R.to_text(), "Gm": self.Gm.to_text()}


def extract_gm(eps_seq: list[Edge], S: list[int], m: int, n1: int, n2: int) -> tuple[BipartiteGraph, bool]:
    """``eps`` at the ``m`` smallest heads times, or the first ``m`` draws when too few."""
    if len(S) >= m:
        return BipartiteGraph.from_edges(n1, n2, [eps_seq[s - 1] for s in sorted(S)[:m]]), False
    return BipartiteGraph.from_edges(n1, n2, eps_seq[:m]), True


def run_sandwich(params: BiregularParams, schedule: Schedule, rng, m: Optional[int] = None,
                 oracle: Optional[ExactOracle] = None) -> SandwichOutcome:
    """One joint run; ``success`` means the extracted binomial graph lies inside ``H``."""
    m = schedule.m if m is None else m
    t0 = schedule.t0
    N = params.N
    if not 0 <= m <= N:
        raise OutOfRange(f"m={m} outside [0, {N}]")
    if not 0 <= t0 <= params.M:
        raise OutOfRange(f"t0={t0} outside [0, {params.M}]")
    oracle = oracle or get_oracle(params)
    state = CouplingState.initial(params, schedule)
    for _ in range(t0):
        couple_step(state, rng, oracle)
    H = oracle.complete(state.R, rng)
    # the remaining edges of H arrive in uniformly random order; H itself is all we need
    eps = list(state.eps_seq)
    if m > len(eps):
        rest = [e for e in complement(state.G).edges()]
        eps.extend(shuffle(rest, rng)[: m - len(eps)])
    Gm, fallback = extract_gm(eps, state.S, m, params.n1, params.n2)
    fails = sum(1 for rec in state.history if not rec.event_held)
    return SandwichOutcome(H, state.R, Gm, Gm.issubset(H), len(state.S), fails, fallback, m, t0,
                           state.history, state.implication_violations())


@dataclass
class UpperOutcome:
    R: BipartiteGraph
    G: BipartiteGraph
    success: bool
    inner: SandwichOutcome

    def summary(self) -> dict:
        return {"success": self.success, "m_bar": self.G.num_edges,
                "H": self.R.to_text(), "G": self.G.to_text()}


def run_upper_embedding(params: BiregularParams, schedule: Schedule, rng, m: Optional[int] = None,
                        oracle: Optional[ExactOracle] = None) -> UpperOutcome:
    """Lower run on the complementary parameters, then complement everything.

    ``schedule`` must be built for ``params.complement()``; its ``m`` is the
    number of edges of the complementary binomial graph.
    """
    Q = params.complement()
    if schedule.params != Q:
        raise ValueError("schedule must be built for the complementary parameters")
    inner = run_sandwich(Q, schedule, rng, m, oracle)
    R = complement(inner.R)
    G = complement(inner.Gm)
    return UpperOutcome(R, G, R.issubset(G), inner)


@dataclass
class GnpOutcome:
    X: int
    success: bool
    Gp: BipartiteGraph
    Gm: BipartiteGraph


def embed_gnp_into_gnm(n1: int, n2: int, pprime, m: int, rng) -> GnpOutcome:
    """Couple ``G(n1,n2,p')`` below ``G(n1,n2,m)`` whenever the binomial edge count allows."""
    pf = float(pprime)
    N = n1 * n2
    if not 0 <= pf <= 1:
        raise OutOfRange(f"p'={pprime} outside [0, 1]")
    if not 0 <= m <= N:
        raise OutOfRange(f"m={m} outside [0, {N}]")
    X = int(rng.binomial(N, pf))
    order = shuffle(range(N), rng)
    if X <= m:
        big = order[:m]
        small = [big[i] for i in shuffle(range(m), rng)[:X]]
        success = True
    else:
        small = order[:X]
        big = shuffle(range(N), rng)[:m]
        success = False
    edges = lambda idx: BipartiteGraph.from_edges(n1, n2, [divmod(k, n2) for k in idx])  # noqa: E731
    return GnpOutcome(X, success, edges(small), edges(big))


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ph = successes / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return (max(0.0, centre - half), min(1.0, centre + half))
