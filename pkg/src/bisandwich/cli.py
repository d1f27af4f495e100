"""Command-line entry point.

Exit codes: 0 on success, 1 on invalid input, 2 when the requested
parameters violate the assumptions of the embedding schedule.  Errors are
written to stderr as one line of JSON with keys ``error`` and ``detail``.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import re
import sys
import time
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .core import BiregularParams, BipartiteGraph, ColoredInstance
from .errors import BiregularError, InfeasibleAssumptions

RATIONAL_RE = re.compile(r"^\s*(\d+)\s*/\s*(\d+)\s*$|^\s*(\d+)\s*$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_rational(text: str) -> Fraction:
    """``"a/b"`` or an integer; decimals are refused to avoid silent rounding."""
    m = RATIONAL_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected a rational 'a/b', got {text!r}")
    if m.group(3) is not None:
        return Fraction(int(m.group(3)))
    den = int(m.group(2))
    if den == 0:
        raise argparse.ArgumentTypeError("zero denominator")
    return Fraction(int(m.group(1)), den)


def parse_edge(text: str) -> tuple[int, int]:
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an edge 'i,j', got {text!r}") from None
    return (i, j)


def parse_grid(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _params_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--n1", type=int, required=required)
    p.add_argument("--n2", type=int, required=required)
    p.add_argument("--p", type=parse_rational, required=required, help="density as 'a/b'")


def _common(p: argparse.ArgumentParser) -> None:
    from .sample import DEFAULT_SEED

    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=["json", "csv", "jsonl", "text"], default="json")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--cap", type=int, help="enumeration cap on N (overrides BIREG_CAP)")


def _schedule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--C", dest="C", type=float, default=1.0)
    p.add_argument("--Cstar", dest="Cstar", type=float, default=1.0)
    p.add_argument("--override-constants", type=Path, help="JSON file of overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bisandwich", description="Biregular random graph sandwiching toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enumerate", help="exact class size")
    _params_args(p)
    _common(p)
    p.add_argument("--timing", action="store_true", help="include wall-clock time (not reproducible)")
    p.add_argument("--forced", type=parse_edge, action="append", default=[], help="edge 'i,j' that must be present")
    p.add_argument("--forbidden", type=parse_edge, action="append", default=[], help="edge 'i,j' that must be absent")

    p = sub.add_parser("codegree-classes", help="class sizes by co-degree of two V1 vertices")
    _params_args(p)
    _common(p)
    p.add_argument("--u", type=int, default=0)
    p.add_argument("--v", type=int, default=1)
    p.set_defaults(format="csv")

    p = sub.add_parser("schedule", help="evaluate the embedding schedule")
    _params_args(p)
    _common(p)
    _schedule_args(p)

    p = sub.add_parser("sample", help="draw one random graph")
    _params_args(p, required=False)
    _common(p)
    p.add_argument("--model", choices=["biregular-exact", "biregular-mcmc", "gnm", "gnp"],
                   default="biregular-exact")
    p.add_argument("--m", type=int)
    p.add_argument("--pprime", type=parse_rational)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.set_defaults(format="text")

    p = sub.add_parser("couple", help="run the coupling")
    _params_args(p)
    _common(p)
    _schedule_args(p)
    p.add_argument("--m", type=int)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--trace", type=Path, help="JSONL file of per-step records")
    p.add_argument("--upper", action="store_true", help="embed into a larger binomial graph instead")

    p = sub.add_parser("verify", help="pseudorandomness and switching checks")
    p.add_argument("check", choices=["jumbled", "thomason", "rb-regular", "alt-cycle", "walks",
                                     "sparse-cut", "switching", "event"])
    _params_args(p, required=False)
    _common(p)
    p.add_argument("--graph", type=Path, help="edge-list file (jumbled, thomason)")
    p.add_argument("--G", dest="G", type=Path, help="edge-list file of the revealed graph")
    p.add_argument("--H", dest="H", type=Path, help="edge-list file of the biregular graph")
    p.add_argument("--pi", type=parse_rational)
    p.add_argument("--delta", type=parse_rational)
    p.add_argument("--rho", type=parse_rational)
    p.add_argument("--mu", type=parse_rational)
    p.add_argument("--r", type=parse_rational)
    p.add_argument("--b", type=parse_rational)
    p.add_argument("--chi", type=parse_rational)
    p.add_argument("--edge", type=parse_edge)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--D", dest="D", type=int, default=3)
    p.add_argument("--nu", type=parse_rational)
    p.add_argument("--X", dest="X", type=parse_grid, default=(), help="comma-separated indices")
    p.add_argument("--Y", dest="Y", type=parse_grid, default=(), help="comma-separated indices")
    p.add_argument("--x-side", type=int, choices=[1, 2], default=1)
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")

    p = sub.add_parser("experiment", help="Monte-Carlo and exact experiments")
    p.add_argument("name", choices=["codegree", "degree-process", "codegree-process", "typicality",
                                    "matching", "maxdegree"])
    _params_args(p, required=False)
    _common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--t-grid", type=parse_grid)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--t", type=int, default=0, help="prefix size (typicality)")
    p.add_argument("--setsize", default="pn2", help="matching set size or 'pn2'")
    p.add_argument("--pprime", type=parse_rational)
    p.add_argument("--floor", type=float, default=0.5)
    return parser


def _params(a) -> BiregularParams:
    if a.n1 is None or a.n2 is None or a.p is None:
        raise UsageError("--n1, --n2 and --p are required")
    return BiregularParams(a.n1, a.n2, a.p)


def _overrides(a):
    from .schedule import Overrides

    path = getattr(a, "override_constants", None)
    if path is None:
        return None
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read overrides: {exc}") from exc
    return Overrides.from_dict(data)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _read_graph(path: Optional[Path], what: str) -> BipartiteGraph:
    if path is None:
        raise UsageError(f"--{what} is required for this check")
    return BipartiteGraph.read(path)


def cmd_enumerate(a) -> str:
    from .enumeration import Constraint, count_biregular

    P = _params(a)
    constraint = Constraint(frozenset(a.forced), frozenset(a.forbidden))
    start = time.perf_counter()
    n = count_biregular(P, constraint)
    elapsed = time.perf_counter() - start
    return _dump({"params": {"n1": P.n1, "n2": P.n2, "p": str(P.p)}, "count": str(n),
                  "constraint": constraint.to_dict(),
                  "elapsed": round(elapsed, 6) if a.timing else None})


def cmd_codegree(a) -> str:
    from .enumeration import codegree_class_counts, ratio_bracketing_report

    P = _params(a)
    table = codegree_class_counts(P, a.u, a.v)
    if a.format == "csv":
        return table.to_csv()
    return _dump({"params": str(P), "counts": [str(c) for c in table.counts],
                  "distribution": [str(x) for x in table.distribution()],
                  "mean": str(table.mean()),
                  "ratios": [{"k": r["k"], "ratio": None if r["ratio"] is None else str(r["ratio"]),
                              "reference": None if r["reference"] is None else str(r["reference"])}
                             for r in ratio_bracketing_report(P)]})


def cmd_schedule(a) -> str:
    from .schedule import build_schedule

    s = build_schedule(_params(a), a.C, a.Cstar, _overrides(a))
    return s.to_json() + "\n"


def cmd_sample(a) -> str:
    from .sample import make_rng, sample_biregular_exact, sample_biregular_mcmc, sample_gnm, sample_gnp

    rng = make_rng(a.seed)
    if a.model in ("biregular-exact", "biregular-mcmc"):
        P = _params(a)
        G = sample_biregular_exact(P, rng) if a.model == "biregular-exact" else \
            sample_biregular_mcmc(P, rng, a.burn_in)
    else:
        if a.n1 is None or a.n2 is None:
            raise UsageError("--n1 and --n2 are required")
        if a.model == "gnm":
            if a.m is None:
                raise UsageError("--m is required for gnm")
            G = sample_gnm(a.n1, a.n2, a.m, rng)
        else:
            if a.pprime is None:
                raise UsageError("--pprime is required for gnp")
            G = sample_gnp(a.n1, a.n2, a.pprime, rng)
    if a.format == "json":
        return _dump({"n1": G.n1, "n2": G.n2, "edges": [list(e) for e in G.edges()]})
    return G.to_text()


def cmd_couple(a) -> str:
    from .couple import get_oracle, run_sandwich, run_upper_embedding, wilson_interval
    from .sample import run_trials
    from .schedule import build_schedule

    P = _params(a)
    target = P.complement() if a.upper else P
    sched = build_schedule(target, a.C, a.Cstar, _overrides(a))
    oracle = get_oracle(target)
    if a.runs < 1:
        raise UsageError("--runs must be at least 1")

    def one(rng, i):
        if a.upper:
            out = run_upper_embedding(P, sched, rng, a.m, oracle)
            return out.success, out.inner
        out = run_sandwich(P, sched, rng, a.m, oracle)
        return out.success, out

    results = run_trials(one, a.runs, a.seed, a.threads)
    succ = sum(1 for s, _ in results if s)
    lo, hi = wilson_interval(succ, a.runs)
    inner = [o for _, o in results]
    H_counts = Counter(o.R.mask for o in inner)
    summary = {
        "params": str(P), "mode": "upper" if a.upper else "lower", "runs": a.runs,
        "t0": sched.t0, "m": inner[0].m, "successes": succ,
        "success_rate": round(succ / a.runs, 12), "wilson_95": [round(lo, 12), round(hi, 12)],
        "A_failures": sum(o.A_failures for o in inner),
        "fallback_runs": sum(1 for o in inner if o.fallback),
        "implication_violations": sum(o.implication_violations for o in inner),
        "distinct_H": len(H_counts),
    }
    if a.trace is not None:
        with open(a.trace, "w", encoding="utf-8", newline="\n") as fh:
            for run, o in enumerate(inner):
                for rec in o.history:
                    fh.write(json.dumps({"run": run, **rec.to_dict()}, sort_keys=True) + "\n")
    if a.format == "jsonl":
        return "".join(_dump({"run": i, **o.summary()}) for i, o in enumerate(inner))
    return _dump(summary)


def cmd_verify(a) -> str:
    from . import pseudo
    from .couple import check_event_A
    from .enumeration import switching_ratio_check

    if a.check in ("jumbled", "thomason"):
        F = _read_graph(a.graph, "graph")
        if a.check == "jumbled":
            if a.pi is None or a.delta is None:
                raise UsageError("--pi and --delta are required")
            c = pseudo.jumbledness_check(F, a.pi, a.delta, a.mode)
            worst = None if c.worst is None else {"A": list(c.worst.A), "B": list(c.worst.B),
                                                  "deviation": c.worst.deviation, "bound": c.worst.bound}
            return _dump({"check": "jumbled", "pass": c.passed, "mode": c.mode, "worst": worst})
        if a.rho is None or a.mu is None:
            raise UsageError("--rho and --mu are required")
        t = pseudo.thomason_check(F, a.rho, a.mu)
        return _dump({"check": "thomason", "hypothesis_holds": t.hypothesis_holds,
                      "conclusion_holds": t.conclusion_holds, "failed_side": t.failed_side})

    P = _params(a)
    G = _read_graph(a.G, "G") if a.G is not None else BipartiteGraph.empty(P.n1, P.n2)
    if a.check == "event":
        if a.chi is None:
            raise UsageError("--chi is required")
        return _dump({"check": "event", "holds": check_event_A(P, G, a.chi)})
    if a.check == "switching":
        if a.edge is None:
            raise UsageError("--edge is required")
        s = switching_ratio_check(P, G, a.edge, a.D)
        return _dump({"check": "switching", "with_e": str(s.n_with), "without_e": str(s.n_without),
                      "ratio": None if s.ratio is None else str(s.ratio),
                      "within_bounds": s.within_bounds, "hypothesis_holds": s.hypothesis_holds,
                      "message": s.message})
    inst = ColoredInstance(P, G, _read_graph(a.H, "H"))
    if a.check == "rb-regular":
        if a.r is None or a.b is None or a.delta is None:
            raise UsageError("--r, --b and --delta are required")
        reg = pseudo.rb_regularity_check(inst, a.r, a.b, a.delta)
        return _dump({"check": "rb-regular", "pass": reg.passed, "worst_vertex": repr(reg.worst_vertex),
                      "blue": None if reg.worst_blue is None else str(reg.worst_blue),
                      "red": None if reg.worst_red is None else str(reg.worst_red)})
    if a.check == "alt-cycle":
        if a.edge is None:
            raise UsageError("--edge is required")
        w = pseudo.find_alternating_cycle(inst, a.edge, a.max_len)
        return _dump({"check": "alt-cycle", "found": w is not None,
                      "length": None if w is None else w.length,
                      "vertices": None if w is None else [repr(v) for v in w.vertices],
                      "colors": None if w is None else list(w.colors)})
    if a.check == "sparse-cut":
        if None in (a.r, a.b, a.delta, a.nu):
            raise UsageError("--r, --b, --delta and --nu are required")
        c = pseudo.sparse_cut_check(inst, a.X, a.Y, a.r, a.b, a.delta, a.nu, a.x_side)
        return _dump({"check": "sparse-cut", "range_ok": c.hypothesis_range_ok, "regular": c.regular,
                      "jumbled": c.jumbled, "cross": str(c.cross), "min_term": str(c.min_term),
                      "max_term": str(c.max_term), "hypothesis_holds": c.hypothesis_holds,
                      "conclusion_bound": None if c.conclusion_bound is None else str(c.conclusion_bound),
                      "conclusion_holds": c.conclusion_holds, "violated": c.violated})
    if a.r is None or a.b is None:
        raise UsageError("--r and --b are required")
    rep = pseudo.walks_and_cycles(inst, a.r, a.b)
    return _dump({"check": "walks", "L": rep.L, "cycle_bound": rep.cycle_bound, "ok": rep.ok,
                  "missing_walks": len(rep.missing_walks), "missing_cycles": len(rep.missing_cycles)})


def cmd_experiment(a) -> str:
    from . import experiments as ex

    name = a.name
    if name == "maxdegree":
        if a.n1 is None or a.n2 is None or a.pprime is None:
            raise UsageError("--n1, --n2 and --pprime are required")
        cfg = ex.ExperimentConfig(None, a.trials, a.seed, None, a.lam, None, a.threads)
        rep = ex.exp_maxdegree_gnp(a.n1, a.n2, a.pprime, cfg, a.floor)
    else:
        P = _params(a)
        cfg = ex.ExperimentConfig(P, a.trials, a.seed, a.t_grid, a.lam, None, a.threads)
        if name == "codegree":
            rep = ex.exp_codegree(P, cfg)
        elif name == "degree-process":
            rep = ex.exp_degree_process(P, cfg)
        elif name == "codegree-process":
            rep = ex.exp_codegree_process(P, cfg)
        elif name == "typicality":
            rep = ex.exp_typicality(P, a.t, cfg)
        else:
            rule = a.setsize if a.setsize == "pn2" else int(a.setsize)
            rep = ex.exp_matching(P, rule, cfg)
    if a.format == "csv":
        return rep.to_csv()
    if a.format == "jsonl":
        return "".join(_dump({"experiment": rep.name, **r}) for r in rep.to_dict()["rows"])
    return rep.to_json() + "\n"


COMMANDS = {
    "enumerate": cmd_enumerate,
    "codegree-classes": cmd_codegree,
    "schedule": cmd_schedule,
    "sample": cmd_sample,
    "couple": cmd_couple,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


@contextlib.contextmanager
def _cap_env(cap: Optional[int]):
    if cap is None:
        yield
        return
    old = os.environ.get("BIREG_CAP")
    os.environ["BIREG_CAP"] = str(cap)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("BIREG_CAP", None)
        else:
            os.environ["BIREG_CAP"] = old


def _fail(kind: str, detail: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        with _cap_env(a.cap):
            text = COMMANDS[a.command](a)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 1)
    except InfeasibleAssumptions as exc:
        return _fail("InfeasibleAssumptions", str(exc), 2)
    except (BiregularError, ValueError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    if a.out is not None:
        with open(a.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
