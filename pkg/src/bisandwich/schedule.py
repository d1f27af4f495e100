"""Coupling schedule: balance indicator, time parametrisation, error budgets.

Exact quantities (tau, t0, m, m_bar) use ``Fraction``; everything involving a
log or a root is a float.  Every literal constant in the formulas for
``tau0``, ``gamma_t`` and ``delta(t)`` is a named field of :class:`Constants`
so the coupling can be exercised at desk scale, where the published constants
make every assumption fail.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Any, Optional

import mpmath

from .core import BiregularParams, as_fraction
from .errors import InfeasibleAssumptions, InvalidOverride, NegativeInput, OutOfRange

_LOG_DPS = 50


def _log(x: int) -> float:
    return math.log(x)


def balance_indicator(params: BiregularParams) -> int:
    """1 when the classes are unbalanced relative to ``p_hat``, else 0."""
    n1, n2, N = params.n1, params.n2, params.N
    if N == 1:
        return 1  # log N = 0: threshold is infinite
    with mpmath.workdps(_LOG_DPS):
        threshold = 2 * (mpmath.mpf(n1) / n2 + mpmath.mpf(n2) / n1) / mpmath.log(N)
        ph = params.p_hat
        return int(mpmath.mpf(ph.numerator) / ph.denominator < threshold)


def tau(t: int, M: int) -> Fraction:
    """Fraction of the biregular edges not yet revealed after ``t`` steps."""
    if M <= 0 or not 0 <= t <= M:
        raise OutOfRange(f"need 0 <= t <= M with M > 0, got t={t}, M={M}")
    return 1 - Fraction(t, M)


def chernoff_bounds(mu: float, t: float) -> tuple[float, float]:
    """Upper- and lower-tail exponential bounds for sums of Bernoullis.

    Returns ``(exp(-t^2/(2(mu+t/3))), exp(-t^2/(2mu)))``.
    """
    if mu < 0 or t < 0:
        raise NegativeInput(f"mu={mu}, t={t} must be non-negative")
    if t == 0:
        return 1.0, 1.0
    upper = math.exp(-t * t / (2 * (mu + t / 3)))
    lower = 0.0 if mu == 0 else math.exp(-t * t / (2 * mu))
    return upper, lower


def poisson_mode_floor(mu: float) -> float:
    """Lower bound ``(1/2)/ceil(sqrt(8 mu))`` on the mass of a Poisson mode."""
    if mu <= 0:
        raise NegativeInput("mu must be positive")
    return 0.5 / math.ceil(math.sqrt(8 * mu))


@dataclass(frozen=True)
class Constants:
    """Overridable numeric constants; defaults are the published values."""

    threshold: float = 0.49
    # final time tau0
    tau0_low: float = 3 * 3240**2
    tau0_high: float = 700.0
    # per-step error gamma_t
    gamma_t_indicator: float = 1080.0
    gamma_t_low: float = 3240.0
    gamma_t_high: float = 25000.0
    # typicality level delta(t) and lambda(t)
    delta_indicator: float = 120.0
    delta_sqrt: float = 360.0
    lambda_base: float = 6.0
    lambda_high: float = 64.0
    # theta of the |S| expectation bound
    theta_indicator: float = 1080.0
    theta_low: float = 6480.0
    theta_high: float = 6250.0
    # assumptions on p
    assume_phat: float = 3 * 3240**2
    assume_indicator: float = 49 / 51 / 340**2
    assume_q: float = 680.0


@dataclass(frozen=True)
class Overrides:
    """Desk-scale overrides.

    ``constants`` replaces named constants; ``tau0``, ``t0``, ``gamma`` and
    ``gamma_t`` pin the corresponding schedule values directly.
    """

    constants: dict = field(default_factory=dict)
    tau0: Optional[float] = None
    t0: Optional[int] = None
    gamma: Optional[Any] = None
    gamma_t: Optional[Any] = None

    @classmethod
    def from_dict(cls, d: dict) -> "Overrides":
        d = dict(d)
        known = {f.name for f in fields(Constants)}
        consts = dict(d.pop("constants", {}))
        for k in list(d):
            if k in known:
                consts[k] = d.pop(k)
        unknown = set(d) - {"tau0", "t0", "gamma", "gamma_t"}
        if unknown:
            raise InvalidOverride(f"unknown override keys: {sorted(unknown)}")
        bad = set(consts) - known
        if bad:
            raise InvalidOverride(f"unknown constants: {sorted(bad)}")
        for k, v in consts.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                raise InvalidOverride(f"constant {k} must be a non-negative number, got {v!r}")
        if "threshold" in consts and not 0 < consts["threshold"] < 0.5:
            raise InvalidOverride("threshold must lie in (0, 1/2)")
        gamma = d.get("gamma")
        gamma_t = d.get("gamma_t")
        if gamma is not None:
            gamma = _exact(gamma, "gamma")
        if gamma_t is not None:
            gamma_t = _exact(gamma_t, "gamma_t")
            if not 0 <= gamma_t <= 1:
                raise InvalidOverride("gamma_t must lie in [0, 1]")
        t0 = d.get("t0")
        if t0 is not None and (not isinstance(t0, int) or t0 < 0):
            raise InvalidOverride("t0 must be a non-negative integer")
        tau0 = d.get("tau0")
        if tau0 is not None and not 0 <= float(tau0) <= 1:
            raise InvalidOverride("tau0 must lie in [0, 1]")
        return cls(constants=consts, tau0=tau0, t0=t0, gamma=gamma, gamma_t=gamma_t)

    def to_dict(self) -> dict:
        out: dict = {"constants": dict(sorted(self.constants.items()))}
        for k in ("tau0", "t0", "gamma", "gamma_t"):
            v = getattr(self, k)
            if v is not None:
                out[k] = str(v) if isinstance(v, Fraction) else v
        return out

    def apply(self, base: Constants) -> Constants:
        return replace(base, **self.constants)


def _exact(x, name: str) -> Fraction:
    if isinstance(x, float):
        return Fraction(x)
    try:
        return as_fraction(x)
    except Exception as exc:  # noqa: BLE001
        raise InvalidOverride(f"{name}: {exc}") from exc


@dataclass
class Schedule:
    params: BiregularParams
    C: float
    Cstar: float
    constants: Constants
    overrides: Optional[Overrides]
    indicator: int
    log_N: float
    tau0: float
    t0: int
    gamma: Fraction
    m: int
    theta: float
    assumption_report: dict
    derived_checks: dict

    @property
    def high_regime(self) -> bool:
        return self.params.p > self.constants.threshold

    def tau(self, t: int) -> Fraction:
        return tau(t, self.params.M)

    def lam(self, t: int) -> float:
        """lambda(t)."""
        P = self.params
        c = self.constants
        value = c.lambda_base * self.log_N
        if self.high_regime:
            tf = float(self.tau(t))
            value += c.lambda_high * self.log_N / (tf * float(P.p) * float(P.q))
        return value

    def gamma_t(self, t: int) -> Fraction:
        """Per-step error probability gamma_t as an exact rational.

        Override values are exact; formula values are floats converted exactly.
        """
        if self.overrides is not None and self.overrides.gamma_t is not None:
            return Fraction(self.overrides.gamma_t)
        return Fraction(self._gamma_t_float(t))

    def _gamma_t_float(self, t: int) -> float:
        P, c = self.params, self.constants
        tf = float(self.tau(t))
        base = c.gamma_t_indicator * float(P.p_hat) ** 2 * self.indicator
        if tf == 0:
            return math.inf
        if self.high_regime:
            q = float(P.q)
            if c.gamma_t_high == 0:
                return base
            if q == 0:
                return math.inf
            return base + c.gamma_t_high * math.sqrt((self.C + 3) * self.log_N / (tf**2 * q**2 * P.n_hat))
        if c.gamma_t_low == 0:
            return base
        if P.p == 0:
            return math.inf
        return base + c.gamma_t_low * math.sqrt(2 * (self.C + 3) * self.log_N / (tf * float(P.p) * P.n_hat))

    def delta_t(self, t: int) -> float:
        """Typicality level delta(t)."""
        P, c = self.params, self.constants
        tf = float(self.tau(t))
        pq = float(P.p) * float(P.q)
        base = c.delta_indicator * float(P.p_hat) ** 2 * self.indicator
        if c.delta_sqrt == 0:
            return base
        if tf == 0 or pq == 0:
            return math.inf
        return base + c.delta_sqrt * math.sqrt((self.C + 3) * self.lam(t) / (6 * tf * pq * P.n_hat))

    def to_dict(self) -> dict:
        P = self.params
        return {
            "params": {"n1": P.n1, "n2": P.n2, "p": str(P.p), "d1": P.d1, "d2": P.d2,
                       "N": P.N, "M": P.M},
            "C": self.C,
            "Cstar": self.Cstar,
            "indicator": self.indicator,
            "tau0": self.tau0,
            "t0": self.t0,
            "gamma": str(self.gamma),
            "gamma_float": float(self.gamma),
            "m": self.m,
            "theta": self.theta,
            "gamma_t_first": float(self.gamma_t(0)) if P.M > 0 else None,
            "gamma_t_last": float(self.gamma_t(self.t0 - 1)) if self.t0 > 0 else None,
            "assumption_report": self.assumption_report,
            "derived_checks": self.derived_checks,
            "constants": asdict(self.constants),
            "overrides": None if self.overrides is None else self.overrides.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        pp = d["params"]
        params = BiregularParams(int(pp["n1"]), int(pp["n2"]), Fraction(pp["p"]))
        ov = d.get("overrides")
        return build_schedule(params, d["C"], d["Cstar"],
                              None if ov is None else Overrides.from_dict(ov))

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))

    def for_complement(self) -> "Schedule":
        return build_schedule(self.params.complement(), self.C, self.Cstar, self.overrides)


def _tau0_formula(P: BiregularParams, C: float, ind: int, logN: float, c: Constants) -> float:
    if P.p <= c.threshold:
        if c.tau0_low == 0:
            return 0.0
        if P.p == 0:
            return math.inf
        return c.tau0_low * (C + 4) * logN / (float(P.p) * P.n_hat)
    q = float(P.q)
    return c.tau0_high * (3 * (C + 4)) ** 0.25 * (q**1.5 * ind + (logN / P.n_hat) ** 0.25)


def _gamma_formula(P: BiregularParams, Cstar: float, ind: int, logN: float, threshold: float) -> float:
    p, q, n = float(P.p), float(P.q), P.n_hat
    if P.p <= threshold:
        if p == 0:
            return math.inf
        return Cstar * (p**2 * ind + math.sqrt(logN / (p * n)))
    if q == 0:
        return math.inf
    loglog = math.log(n / logN) if logN > 0 else math.inf
    return Cstar * (q**1.5 * ind + (logN / n) ** 0.25 + math.sqrt(logN / n) * loglog / q)


def _theta_formula(P: BiregularParams, C: float, ind: int, logN: float, c: Constants) -> float:
    p, q, n = float(P.p), float(P.q), P.n_hat
    base = c.theta_indicator * float(P.p_hat) ** 2 * ind
    if P.p <= c.threshold:
        if p == 0:
            return math.inf
        return base + c.theta_low * math.sqrt(2 * (C + 3) * logN / (p * n))
    if q == 0:
        return math.inf
    loglog = math.log(n / logN) if logN > 0 else math.inf
    return base + c.theta_high * math.sqrt((C + 3) * logN / (q**2 * n)) * loglog


def check_assumptions(P: BiregularParams, C: float, c: Constants, ind: int, logN: float) -> dict:
    """Pass/fail of the three assumptions on p, each with its two sides."""
    ph, q, n = float(P.p_hat), float(P.q), P.n_hat
    rhs_floor = c.assume_phat * (C + 4) * logN / n
    rhs_cap = c.assume_indicator / (C + 4) ** (1 / 6)
    rhs_sparse = c.assume_q * (3 * (C + 4) * logN / n) ** 0.25
    return {
        "density_floor": {"pass": ph >= rhs_floor, "lhs": ph, "rhs": rhs_floor},
        "balanced_density_cap": {"pass": ph * ind <= rhs_cap, "lhs": ph * ind, "rhs": rhs_cap},
        "sparsity_floor": {"pass": q >= rhs_sparse, "lhs": q, "rhs": rhs_sparse},
    }


def _m_from_gamma(gamma: Fraction, P: BiregularParams) -> int:
    value = (1 - gamma) * P.p * P.N
    return max(0, math.ceil(value))


def build_schedule(
    params: BiregularParams,
    C: float = 1.0,
    Cstar: float = 1.0,
    overrides: Optional[Overrides] = None,
) -> Schedule:
    """Evaluate every schedule parameter and the assumptions behind them.

    Without overrides, any failing assumption raises
    :class:`InfeasibleAssumptions`.  With overrides the failures are only
    recorded in ``assumption_report``.
    """
    if C <= 0 or Cstar < 0:
        raise InvalidOverride(f"C must be positive and Cstar non-negative (C={C}, Cstar={Cstar})")
    if isinstance(overrides, dict):
        overrides = Overrides.from_dict(overrides)
    P = params
    consts = Constants() if overrides is None else overrides.apply(Constants())
    ind = balance_indicator(P)
    logN = _log(P.N) if P.N > 1 else 0.0

    report = check_assumptions(P, C, consts, ind, logN)
    tau0 = _tau0_formula(P, C, ind, logN, consts)
    if overrides is not None and overrides.tau0 is not None:
        tau0 = float(overrides.tau0)
    report["tau0_le_1"] = {"pass": tau0 <= 1, "lhs": tau0, "rhs": 1.0}

    if overrides is not None and overrides.t0 is not None:
        t0 = overrides.t0
        if t0 > P.M:
            raise InvalidOverride(f"t0={t0} exceeds M={P.M}")
    elif math.isfinite(tau0) and tau0 <= 1:
        t0 = math.floor((1 - Fraction(tau0)) * P.M)
    else:
        t0 = 0

    gamma_f = _gamma_formula(P, Cstar, ind, logN, consts.threshold)
    if overrides is not None and overrides.gamma is not None:
        gamma = Fraction(overrides.gamma)
    elif math.isfinite(gamma_f):
        gamma = Fraction(gamma_f)
    else:
        gamma = Fraction(10**9)
    report["gamma_le_1"] = {"pass": gamma <= 1, "lhs": float(gamma), "rhs": 1.0}

    sched = Schedule(
        params=P, C=C, Cstar=Cstar, constants=consts, overrides=overrides,
        indicator=ind, log_N=logN, tau0=tau0, t0=t0, gamma=gamma,
        m=_m_from_gamma(gamma, P) if gamma <= 1 else 0,
        theta=_theta_formula(P, C, ind, logN, consts),
        assumption_report=report, derived_checks={},
    )
    if t0 > 0:
        last = float(sched.gamma_t(t0 - 1))
        report["gamma_t_le_1"] = {"pass": last <= 1, "lhs": last, "rhs": 1.0}
    else:
        report["gamma_t_le_1"] = {"pass": True, "lhs": None, "rhs": 1.0}

    core_failed = [k for k in ("density_floor", "balanced_density_cap", "sparsity_floor") if not report[k]["pass"]]
    if overrides is None:
        if core_failed:
            raise InfeasibleAssumptions(core_failed, _describe(report, core_failed))
        sched.derived_checks = _derived_checks(sched)
        bad = [k for k, v in sched.derived_checks.items() if not v["pass"]]
        if bad:
            raise AssertionError(f"derived schedule facts failed: {bad}")
    return sched


def _describe(report: dict, keys) -> str:
    return "; ".join(f"{k}: {report[k]['lhs']:.6g} vs {report[k]['rhs']:.6g}" for k in keys)


def _derived_checks(s: Schedule) -> dict:
    """Facts that must follow from the assumptions; evaluated at sample times."""
    P, C, logN = s.params, s.C, s.log_N
    out = {}
    out["tau0_le_1"] = {"pass": s.tau0 <= 1, "value": s.tau0}
    rhs_tpn = 3000**2 * (C + 4) * logN
    lhs_tpn = s.tau0 * float(P.p_hat) * P.n_hat
    out["tau0_phat_nhat_floor"] = {"pass": lhs_tpn >= rhs_tpn, "lhs": lhs_tpn, "rhs": rhs_tpn}
    if s.high_regime:
        rhs_tq = 700 * 680 * math.sqrt(3 * (C + 4) * logN / P.n_hat)
        out["tau0_q_floor"] = {"pass": s.tau0 * float(P.q) >= rhs_tq,
                              "lhs": s.tau0 * float(P.q), "rhs": rhs_tq}
    if s.t0 > 0:
        points = sorted({0, s.t0 // 2, s.t0 - 1})
        g = [s._gamma_t_float(t) for t in points]
        out["gamma_t_at_most_1"] = {"pass": all(x <= 1 for x in g), "points": points, "values": g}
        out["gamma_t_nondecreasing"] = {"pass": all(a <= b for a, b in zip(g, g[1:]))}
        ratios = [s.delta_t(t) - s._gamma_t_float(t) / 9 for t in points]
        out["delta_le_gamma_over_9"] = {"pass": all(r <= 1e-12 for r in ratios),
                                        "points": points,
                                        "delta": [s.delta_t(t) for t in points],
                                        "gamma_over_9": [x / 9 for x in g]}
    return out


@dataclass(frozen=True)
class UpperParams:
    gamma_bar: Fraction
    m_bar: int
    p_doubleprime: Fraction
    report: dict


def upper_params(
    params: BiregularParams,
    C: float = 1.0,
    Cstar: float = 1.0,
    gamma_bar=None,
    threshold: float = 0.49,
    check_assumptions: bool = True,
) -> UpperParams:
    """Parameters of the reverse embedding of R(n1,n2,p) into G(n1,n2,m_bar).

    ``gamma_bar`` may be passed directly (exact), in which case the formula
    is skipped.
    """
    P = params
    ind = balance_indicator(P)
    logN = _log(P.N) if P.N > 1 else 0.0
    rhs = 680 * (3 * (C + 4) * logN / P.n_hat) ** 0.25
    report = {"p_lower_bound": {"pass": float(P.p) >= rhs, "lhs": float(P.p), "rhs": rhs}}
    if check_assumptions and not report["p_lower_bound"]["pass"]:
        raise InfeasibleAssumptions(["p_lower_bound"], _describe(report, ["p_lower_bound"]))
    if gamma_bar is None:
        # the roles of p and q swap, so the split sits at 1 - threshold
        g = _gamma_formula(P.complement(), Cstar, ind, logN, threshold)
        gb = Fraction(g) if math.isfinite(g) else Fraction(10**9)
    else:
        gb = _exact(gamma_bar, "gamma_bar")
    q, N = P.q, P.N
    m_bar = math.floor((P.p + gb * q) * N)
    # m for the complementary instance with gamma = gamma_bar
    m_comp = math.ceil((1 - gb) * q * N)
    if m_comp != N - m_bar:
        raise AssertionError(f"complement identity failed: {m_comp} != {N} - {m_bar}")
    report["complement_identity"] = {"pass": True, "m_complement": m_comp}
    return UpperParams(gamma_bar=gb, m_bar=m_bar, p_doubleprime=P.p + 2 * gb * q, report=report)
