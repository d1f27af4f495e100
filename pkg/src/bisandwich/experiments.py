"""Monte-Carlo and exact harnesses for degree, co-degree, typicality and matching statistics.

Every experiment returns an :class:`ExperimentReport` whose rows carry the
columns ``t, tau, stat, observed, band, violated, trials``.  Rows that are
reports only (no band) leave ``band`` and ``violated`` empty.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import networkx as nx
import numpy as np

from .core import BiregularParams, BipartiteGraph, Edge, complement
from .couple import get_oracle
from .enumeration import codegree_class_counts, enumeration_cap
from .errors import OutOfRange, SizeMismatch, TooLarge
from .sample import (
    DEFAULT_SEED,
    reveal_process,
    run_trials,
    sample_biregular_exact,
    sample_biregular_mcmc,
    sample_gnp,
)
from .schedule import balance_indicator, tau

COLUMNS = ["t", "tau", "stat", "observed", "band", "violated", "trials"]


@dataclass
class ExperimentConfig:
    params: Optional[BiregularParams] = None
    trials: int = 1000
    seed: int = DEFAULT_SEED
    t_grid: Optional[Sequence[int]] = None
    lam: Optional[float] = None
    out: Optional[str] = None
    threads: int = 1
    burn_in: int = 10_000

    def __post_init__(self):
        if self.trials < 1:
            raise OutOfRange("trials must be at least 1")
        if self.t_grid is not None and self.params is not None:
            bad = [t for t in self.t_grid if not 0 <= t <= self.params.M]
            if bad:
                raise OutOfRange(f"t-grid values outside [0, {self.params.M}]: {bad}")

    def lam_for(self, params: BiregularParams) -> float:
        """Concentration parameter; defaults to ``log N``."""
        return math.log(params.N) if self.lam is None else float(self.lam)


@dataclass
class ExperimentReport:
    name: str
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, stat: str, observed, trials: int, t=None, tau_=None, band=None, violated=None):
        self.rows.append({
            "t": t, "tau": tau_, "stat": stat, "observed": observed,
            "band": band, "violated": violated, "trials": trials,
        })

    def row(self, stat: str, t=None) -> dict:
        for r in self.rows:
            if r["stat"] == stat and (t is None or r["t"] == t):
                return r
        raise KeyError(stat)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"experiment": self.name, "meta": _jsonable(self.meta),
                "rows": [{c: _jsonable(r[c]) for c in COLUMNS} for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return round(v, 12)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return round(float(v), 12)
    return v


def _sampler(params: BiregularParams, cfg: ExperimentConfig):
    if params.N <= enumeration_cap():
        return lambda rng: sample_biregular_exact(params, rng)
    return lambda rng: sample_biregular_mcmc(params, rng, cfg.burn_in)


def _grid(params: BiregularParams, cfg: ExperimentConfig) -> list[int]:
    if cfg.t_grid is not None:
        return sorted(set(int(t) for t in cfg.t_grid))
    M = params.M
    return sorted({0, M // 4, M // 2, (3 * M) // 4, M})


def _codegree_band_terms(params: BiregularParams, lam: float) -> tuple[float, float, float, float]:
    ph = float(params.p_hat)
    n2, nh = params.n2, params.n_hat
    ind = balance_indicator(params)
    t1 = 20 * ph**3 * n2 * ind
    t2 = 20 * ph * n2 / nh
    t3 = 20 * math.sqrt(lam * ph**2 * n2)
    return t1, t2, t3, lam


def exp_codegree(params: BiregularParams, cfg: ExperimentConfig, u: int = 0, v: int = 1) -> ExperimentReport:
    """Co-degree of two fixed V1 vertices in a uniform biregular graph."""
    lam = cfg.lam_for(params)
    sample = _sampler(params, cfg)
    cods = run_trials(lambda rng, i: sample(rng).codegree_rows(u, v), cfg.trials, cfg.seed, cfg.threads)
    centre = float(params.p) ** 2 * params.n2
    t1, t2, t3, t4 = _codegree_band_terms(params, lam)
    band = t1 + t2 + t3 + t4
    rep = ExperimentReport("codegree")
    M, n = params.M, cfg.trials
    arr = np.array(cods, dtype=float)
    rep.add("codegree_mean", float(arr.mean()), n, M, 0.0)
    rep.add("codegree_centre", centre, n, M, 0.0)
    frac = float(np.mean(np.abs(arr - centre) > band))
    rep.add("codegree_outside_band", frac, n, M, 0.0, band, frac > 0)
    for name, val in (("band_indicator_term", t1), ("band_ratio_term", t2),
                      ("band_sqrt_term", t3), ("band_lambda_term", t4)):
        rep.add(name, val, n, M, 0.0)
    counts = np.bincount(arr.astype(int), minlength=params.d1 + 1)
    for k, c in enumerate(counts.tolist()):
        rep.add(f"empirical_pmf_{k}", c / n, n, M, 0.0)
    rep.meta = {"params": str(params), "lambda": lam, "u": u, "v": v, "seed": cfg.seed}
    if params.N <= enumeration_cap():
        table = codegree_class_counts(params, u, v)
        for k, r in enumerate(table.distribution()):
            rep.add(f"exact_pmf_{k}", float(r), n, M, 0.0)
        rep.meta["exact_counts"] = list(table.counts)
        rep.meta["exact_mean"] = str(table.mean())
    return rep


def _hypergeom_moments(M: int, d: int, t: int) -> tuple[float, float]:
    """Mean and variance of the number of marked items among ``t`` of ``M`` with ``d`` marked."""
    mean = t * d / M
    var = t * (d / M) * (1 - d / M) * (M - t) / (M - 1) if M > 1 else 0.0
    return mean, var


def exp_degree_process(params: BiregularParams, cfg: ExperimentConfig) -> ExperimentReport:
    """Degrees in the revealed prefixes against ``(1 - tau) d_i`` and the ``3 sqrt(lambda tau d_i)`` band."""
    lam = cfg.lam_for(params)
    grid = _grid(params, cfg)
    sample = _sampler(params, cfg)
    n1, n2, M = params.n1, params.n2, params.M
    d = (params.d1, params.d2)

    def trial(rng, i):
        proc = reveal_process(sample(rng), rng, params)
        out = []
        for t in grid:
            R = proc.prefix(t)
            out.append((R.row_degrees(), R.col_degrees()))
        return out

    results = run_trials(trial, cfg.trials, cfg.seed, cfg.threads)
    rep = ExperimentReport("degree_process")
    n = cfg.trials
    for gi, t in enumerate(grid):
        tf = float(tau(t, M))
        rows = np.array([r[gi][0] for r in results], dtype=float)
        cols = np.array([r[gi][1] for r in results], dtype=float)
        expect = ((1 - tf) * d[0], (1 - tf) * d[1])
        bands = (3 * math.sqrt(lam * tf * d[0]), 3 * math.sqrt(lam * tf * d[1]))
        dev = np.maximum(np.abs(rows - expect[0]).max(axis=1) - bands[0],
                         np.abs(cols - expect[1]).max(axis=1) - bands[1])
        maxdev1 = np.abs(rows - expect[0]).max(axis=1)
        mean1, var1 = _hypergeom_moments(M, d[0], t)
        rep.add("deg_u0_mean", float(rows[:, 0].mean()), n, t, tf)
        rep.add("deg_v1_pooled_mean", float(rows.mean()), n, t, tf)
        rep.add("hypergeom_mean_v1", mean1, n, t, tf)
        rep.add("hypergeom_sd_v1", math.sqrt(var1), n, t, tf)
        rep.add("max_dev_v1_mean", float(maxdev1.mean()), n, t, tf, bands[0])
        frac = float(np.mean(dev > 0))
        rep.add("band_violation_frac", frac, n, t, tf, None, frac > 0)
    rep.meta = {"params": str(params), "lambda": lam, "grid": grid, "seed": cfg.seed}
    return rep


def exp_codegree_process(params: BiregularParams, cfg: ExperimentConfig) -> ExperimentReport:
    """Maximum V1 co-degree of the revealed prefixes against the co-degree band."""
    relabeled = params.n1 < params.n2
    P = params.transpose() if relabeled else params
    lam = cfg.lam_for(P)
    grid = _grid(P, cfg)
    sample = _sampler(P, cfg)
    M, n2 = P.M, P.n2
    p, q = float(P.p), float(P.q)
    ind = balance_indicator(P)

    def trial(rng, i):
        proc = reveal_process(sample(rng), rng, P)
        return [proc.prefix(t).max_codegree_rows() for t in grid]

    results = np.array(run_trials(trial, cfg.trials, cfg.seed, cfg.threads), dtype=float)
    rep = ExperimentReport("codegree_process")
    n = cfg.trials
    for gi, t in enumerate(grid):
        tf = float(tau(t, M))
        band = (1 - tf) ** 2 * p**2 * n2 + 20 * q**3 * n2 * ind + 15 * math.sqrt(lam * n2)
        col = results[:, gi]
        rep.add("max_codegree_mean", float(col.mean()), n, t, tf)
        rep.add("max_codegree_max", float(col.max()), n, t, tf, band, bool(col.max() > band))
        frac = float(np.mean(col > band))
        rep.add("band_violation_frac", frac, n, t, tf, band, frac > 0)
    rep.meta = {"params": str(P), "relabeled": relabeled, "lambda": lam, "grid": grid, "seed": cfg.seed}
    return rep


def edge_pair_probability(params: BiregularParams, G: BipartiteGraph, e: Edge, f: Edge) -> Fraction:
    """``P(e in R, f not in R | G ⊆ R)`` over the uniform biregular graph ``R``."""
    oracle = get_oracle(params)
    masks = _containing_masks(oracle, G)
    be, bf = _bit(params, e), _bit(params, f)
    hits = sum(1 for m in masks if m >> be & 1 and not m >> bf & 1)
    return Fraction(hits, len(masks))


def _bit(params: BiregularParams, e: Edge) -> int:
    return e[0] * params.n2 + e[1]


def _containing_masks(oracle, G: BipartiteGraph) -> list[int]:
    if oracle._bits is None:
        raise TooLarge("class too large to list")
    g = G.mask
    return [m for m in oracle._masks if m & g == g]


def typicality_profile(params: BiregularParams, G: BipartiteGraph, deltas: Sequence[float]) -> dict:
    """Exact typicality statistics of one admissible prefix ``G``.

    For each ordered pair of distinct edges ``e = u1u2`` and ``f = v1v2``
    outside ``G``, conditions on ``G ∪ {f} ⊆ H`` and ``e ∉ H`` and computes
    the probability that some ratio ``theta(u_i, v_i)/(tau q d_i)`` (over
    the sides with ``u_i != v_i``) is off from one by more than ``delta``.
    """
    P = params
    t = G.num_edges
    if t >= P.M:
        raise OutOfRange("t must be below M")
    tf = float(tau(t, P.M))
    q = float(P.q)
    n1, n2 = P.n1, P.n2
    masks = _containing_masks(get_oracle(P), G)
    K = len(masks)
    H = np.array([[m >> k & 1 for k in range(P.N)] for m in masks], dtype=np.int64).reshape(K, n1, n2)
    Gm = np.array(G.to_array(), dtype=np.int64)
    blue = H - Gm[None]
    red = 1 - H
    th1 = np.einsum("kuj,kvj->kuv", blue, red)  # V1 pairs
    th2 = np.einsum("kiu,kiv->kuv", blue, red)  # V2 pairs
    c1, c2 = tf * q * P.d1, tf * q * P.d2
    free = complement(G).edges()
    Hbit = H.reshape(K, -1).astype(bool)
    worst = {d: 0.0 for d in deltas}
    worst_pair = {d: None for d in deltas}
    min_pair_prob = None
    total = K
    for e in free:
        ine = Hbit[:, _bit(P, e)]
        for f in free:
            if e == f:
                continue
            inf = Hbit[:, _bit(P, f)]
            sel = inf & ~ine
            cnt = int(sel.sum())
            pp = Fraction(int((ine & ~inf).sum()), total)
            if min_pair_prob is None or pp < min_pair_prob:
                min_pair_prob = pp
            if cnt == 0 or c1 == 0 or c2 == 0:
                continue
            devs = np.zeros(cnt)
            if e[0] != f[0]:
                devs = np.maximum(devs, np.abs(th1[sel, e[0], f[0]] / c1 - 1))
            if e[1] != f[1]:
                devs = np.maximum(devs, np.abs(th2[sel, e[1], f[1]] / c2 - 1))
            for d in deltas:
                prob = float(np.mean(devs > d))
                if prob > worst[d]:
                    worst[d], worst_pair[d] = prob, (e, f)
    return {
        "t": t, "tau": tf, "class_size": K,
        "max_conditional": worst,
        "worst_pair": worst_pair,
        "typical": {d: worst[d] <= tf**2 * d for d in deltas},
        "min_pair_prob": min_pair_prob,
        "theta_pmf_u0_u1": np.bincount(th1[:, 0, 1], minlength=P.d1 + 1).tolist() if n1 > 1 else [],
        "theta_centre": c1,
    }


def exp_typicality(params: BiregularParams, t: int, cfg: ExperimentConfig,
                   deltas: Sequence[float] = (0.25, 0.5, 1.0), graphs: int = 5) -> ExperimentReport:
    """Exact typicality of ``graphs`` sampled prefixes with ``t`` edges."""
    if params.N > enumeration_cap():
        raise TooLarge(f"N={params.N} exceeds enumeration cap")
    if not 0 <= t < params.M:
        raise OutOfRange(f"t={t} outside [0, {params.M})")

    def prefix(rng, i):
        return reveal_process(sample_biregular_exact(params, rng), rng, params).prefix(t)

    prefixes = run_trials(prefix, graphs, cfg.seed, cfg.threads)
    rep = ExperimentReport("typicality")
    tf = float(tau(t, params.M))
    profiles = []
    for G in prefixes:
        prof = typicality_profile(params, G, deltas)
        profiles.append(prof)
    for d in deltas:
        worst = max(p["max_conditional"][d] for p in profiles)
        rep.add(f"max_conditional_delta_{d}", worst, graphs, t, tf, tf**2 * d, worst > tf**2 * d)
        frac = sum(1 for p in profiles if p["typical"][d]) / graphs
        rep.add(f"typical_fraction_delta_{d}", frac, graphs, t, tf)
    mins = [float(p["min_pair_prob"]) for p in profiles]
    rep.add("min_pair_prob", min(mins), graphs, t, tf)
    rep.meta = {"params": str(params), "profiles": [
        {k: v for k, v in p.items() if k != "worst_pair"} for p in profiles], "seed": cfg.seed}
    return rep


def _set_size(params: BiregularParams, rule: Union[str, int]) -> int:
    if rule == "pn2":
        return params.d1
    size = int(rule)
    if size < 0:
        raise SizeMismatch("set size must be non-negative")
    return size


def has_perfect_matching(F: BipartiteGraph, A: Sequence[int], B: Sequence[int]) -> bool:
    """Whether ``F[A, B]`` has a matching covering ``A`` and ``B``."""
    if len(A) != len(B):
        return False
    if not A:
        return True
    g = nx.Graph()
    left = [("a", i) for i in A]
    g.add_nodes_from(left)
    g.add_nodes_from(("b", j) for j in B)
    g.add_edges_from((("a", i), ("b", j)) for i in A for j in B if F.rows[i] >> j & 1)
    match = nx.bipartite.hopcroft_karp_matching(g, top_nodes=left)
    return len(match) // 2 == len(A)


def exp_matching(params: BiregularParams, setsize_rule: Union[str, int], cfg: ExperimentConfig) -> ExperimentReport:
    """Frequency of a perfect matching between the first ``s`` vertices of each side."""
    s = _set_size(params, setsize_rule)
    if s > params.n1 or s > params.n2:
        raise SizeMismatch(f"set size {s} exceeds a side ({params.n1}, {params.n2})")
    A, B = list(range(s)), list(range(s))
    sample = _sampler(params, cfg)
    hits = run_trials(lambda rng, i: has_perfect_matching(sample(rng), A, B), cfg.trials, cfg.seed, cfg.threads)
    n = cfg.trials
    freq = sum(hits) / n
    d1 = params.d1
    signal = float(params.p) ** 2 * params.n2 - math.log(d1) if d1 > 0 else -math.inf
    rep = ExperimentReport("matching")
    rep.add("perfect_matching_freq", freq, n, params.M, 0.0)
    rep.add("signal", signal, n, params.M, 0.0)
    rep.meta = {"params": str(params), "set_size": s, "seed": cfg.seed}
    if params.N <= enumeration_cap():
        exact = exact_matching_probability(params, A, B)
        sd = math.sqrt(float(exact) * (1 - float(exact)) / n)
        rep.add("exact_probability", float(exact), n, params.M, 0.0, 3 * sd,
                abs(freq - float(exact)) > 3 * sd)
        rep.meta["exact_probability"] = str(exact)
    return rep


def exact_matching_probability(params: BiregularParams, A: Sequence[int], B: Sequence[int]) -> Fraction:
    oracle = get_oracle(params)
    masks = _containing_masks(oracle, BipartiteGraph.empty(params.n1, params.n2))
    good = sum(1 for m in masks
               if has_perfect_matching(BipartiteGraph.from_mask(params.n1, params.n2, m), A, B))
    return Fraction(good, len(masks))


def exp_matching_grid(n1: int, n2: int, ps: Sequence[Fraction], cfg: ExperimentConfig,
                      setsize: int) -> ExperimentReport:
    """Matching frequency for a fixed set size across several densities."""
    rep = ExperimentReport("matching_grid")
    for p in ps:
        params = BiregularParams(n1, n2, Fraction(p))
        sub = exp_matching(params, setsize, cfg)
        r = sub.row("perfect_matching_freq")
        rep.add(f"perfect_matching_freq_p_{p}", r["observed"], cfg.trials, params.M, 0.0)
    rep.meta = {"n1": n1, "n2": n2, "ps": [str(p) for p in ps], "set_size": setsize, "seed": cfg.seed}
    return rep


def maxdegree_threshold(n1: int, n2: int, pprime) -> int:
    """``min(ceil(p' n2 + sqrt(p'(1 - p') n2 log n1)), n2)``."""
    pf = float(pprime)
    val = pf * n2 + math.sqrt(pf * (1 - pf) * n2 * math.log(n1))
    return min(math.ceil(val - 1e-12), n2)


def exp_maxdegree_gnp(n1: int, n2: int, pprime, cfg: ExperimentConfig, floor: float = 0.5) -> ExperimentReport:
    """How often the largest V1 degree of the binomial graph reaches the threshold."""
    kappa = maxdegree_threshold(n1, n2, pprime)
    hits = run_trials(lambda rng, i: max(sample_gnp(n1, n2, pprime, rng).row_degrees()) >= kappa,
                      cfg.trials, cfg.seed, cfg.threads)
    n = cfg.trials
    freq = sum(hits) / n
    rep = ExperimentReport("maxdegree_gnp")
    rep.add("kappa", kappa, n)
    rep.add("freq_maxdeg_ge_kappa", freq, n, None, None, floor, freq < floor)
    rep.meta = {"n1": n1, "n2": n2, "pprime": str(pprime), "floor": floor,
                "hypotheses_hold": float(pprime) <= 0.25 and n2 <= n1, "seed": cfg.seed}
    return rep
