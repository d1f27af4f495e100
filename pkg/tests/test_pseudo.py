from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisandwich.core import BLUE, RED, V1, V2, BiregularParams, BipartiteGraph, BlueRed, ColoredInstance
from bisandwich.errors import CapExceeded
from bisandwich.pseudo import (
    alternating_reach_batch,
    alternating_walk_sets,
    check_cycle,
    cycle_length_bound,
    find_alternating_cycle,
    jumbledness_check,
    rb_regularity_check,
    sparse_cut_check,
    thomason_check,
    walk_length_bound,
    walks_and_cycles,
)
from bisandwich.sample import make_rng, sample_biregular_exact

from oracles import jumbled_brute, shortest_alternating_cycle, walk_sets

MATCHING3 = BipartiteGraph.from_edges(3, 3, [(0, 0), (1, 1), (2, 2)])


def _to_oracle(v):
    return ("u", v.index) if v.side == 1 else ("w", v.index)


def _colour_dict(col):
    out = {e: BLUE for e in col.blue.edges()}
    out.update({e: RED for e in col.red.edges()})
    return out


@st.composite
def colourings(draw, max_side=4):
    n1 = draw(st.integers(1, max_side))
    n2 = draw(st.integers(1, max_side))
    N = n1 * n2
    blue = draw(st.integers(0, (1 << N) - 1))
    red = draw(st.integers(0, (1 << N) - 1)) & ~blue
    return BlueRed(BipartiteGraph.from_mask(n1, n2, blue), BipartiteGraph.from_mask(n1, n2, red))


@st.composite
def small_graphs(draw):
    n1 = draw(st.integers(1, 4))
    n2 = draw(st.integers(1, 4))
    return BipartiteGraph.from_mask(n1, n2, draw(st.integers(0, (1 << (n1 * n2)) - 1)))


def k22():
    blue = BipartiteGraph.from_edges(2, 2, [(0, 0), (1, 1)])
    red = BipartiteGraph.from_edges(2, 2, [(0, 1), (1, 0)])
    return BlueRed(blue, red)


class TestJumbledness:
    def test_complete(self):
        c = jumbledness_check(BipartiteGraph.complete(4, 5), 1, Fraction(1, 100))
        assert c.passed and c.worst.deviation == 0

    def test_empty(self):
        assert jumbledness_check(BipartiteGraph.empty(3, 3), 0, Fraction(1, 100)).passed

    def test_matching_example(self):
        c = jumbledness_check(MATCHING3, Fraction(1, 3), Fraction(1, 2))
        assert c.passed
        assert len(c.worst.A) == len(c.worst.B) == 1 and c.worst.A == c.worst.B
        assert c.worst.deviation == pytest.approx(2 / 3) and c.worst.bound == pytest.approx(1.5)

    def test_matching_fails_small_delta(self):
        assert not jumbledness_check(MATCHING3, Fraction(1, 3), Fraction(1, 10)).passed

    @settings(max_examples=150, deadline=None)
    @given(small_graphs(), st.fractions(0, 1, max_denominator=6), st.fractions(0, 1, max_denominator=8))
    def test_matches_brute_force(self, F, pi, delta):
        assert jumbledness_check(F, pi, delta).passed == jumbled_brute(F.n1, F.n2, F.edges(), pi, delta)

    @settings(max_examples=40, deadline=None)
    @given(small_graphs(), st.fractions(0, 1, max_denominator=6), st.fractions(0, 1, max_denominator=8))
    def test_sampled_only_refutes(self, F, pi, delta):
        sampled = jumbledness_check(F, pi, delta, mode="sampled", samples=8, rng=make_rng(1))
        exhaustive = jumbledness_check(F, pi, delta)
        if not sampled.passed:
            assert not exhaustive.passed

    def test_cap(self):
        with pytest.raises(CapExceeded):
            jumbledness_check(BipartiteGraph.empty(13, 2), 0, 1)
        big = BipartiteGraph.complete(30, 30)
        assert jumbledness_check(big, 1, Fraction(1, 10), mode="sampled", rng=make_rng()).passed

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            jumbledness_check(MATCHING3, 0, 1, mode="nope")


class TestThomason:
    def test_complete(self):
        rep = thomason_check(BipartiteGraph.complete(3, 3), 1, 0)
        assert rep.hypothesis_holds and rep.conclusion_holds

    def test_matching(self):
        rep = thomason_check(MATCHING3, Fraction(1, 3), 0)
        assert rep.hypothesis_holds and rep.conclusion_holds and rep.failed_side is None

    def test_isolated_vertex(self):
        F = BipartiteGraph.from_edges(3, 3, [(0, 0), (1, 1)])
        rep = thomason_check(F, Fraction(1, 3), 0)
        assert not rep.hypothesis_holds and rep.failed_side == "min_degree"

    def test_codegree_failure(self):
        F = BipartiteGraph.from_edges(2, 3, [(0, 0), (0, 1), (1, 0), (1, 1)])
        rep = thomason_check(F, Fraction(1, 3), 0)
        assert rep.failed_side == "codegree"

    @settings(max_examples=60, deadline=None)
    @given(small_graphs(), st.fractions(0, 1, max_denominator=4), st.fractions(0, 3, max_denominator=2))
    def test_conclusion_follows_hypothesis(self, F, rho, mu):
        rep = thomason_check(F, rho, mu)
        if rep.hypothesis_holds:
            assert rep.conclusion_holds


class TestRegularity:
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_matching_and_rest(self, n):
        blue = BipartiteGraph.from_edges(n, n, [(i, i) for i in range(n)])
        col = BlueRed(blue, BipartiteGraph.complete(n, n) - blue)
        assert rb_regularity_check(col, Fraction(n - 1, n), Fraction(1, n), 0).passed

    @given(colourings())
    def test_delta_one_always_passes(self, col):
        assert rb_regularity_check(col, Fraction(1, 2), Fraction(1, 2), 1).passed

    def test_biregular_half(self, p442, graphs442, empty44):
        for H in graphs442:
            assert rb_regularity_check(ColoredInstance(p442, empty44, H), Fraction(1, 2), Fraction(1, 2), 0).passed

    def test_reports_worst(self):
        blue = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1)])
        rep = rb_regularity_check(BlueRed(blue, BipartiteGraph.empty(2, 2)), 0, Fraction(1, 2), 0)
        assert not rep.passed and rep.worst_blue in (0, 1)


class TestWalks:
    def test_k22(self):
        R, B = alternating_walk_sets(k22(), V1(0), 1)
        assert R == {V2(1)} and B == {V2(0)}

    def test_k_positive(self):
        with pytest.raises(ValueError):
            alternating_walk_sets(k22(), V1(0), 0)

    @settings(max_examples=120, deadline=None)
    @given(colourings(), st.data(), st.integers(1, 7))
    def test_matches_walk_enumeration(self, col, data, k):
        side = data.draw(st.sampled_from([1, 2]))
        size = col.blue.n1 if side == 1 else col.blue.n2
        w = (V1 if side == 1 else V2)(data.draw(st.integers(0, size - 1)))
        R, B = alternating_walk_sets(col, w, k)
        oR, oB = walk_sets(_colour_dict(col), _to_oracle(w), k)
        assert {_to_oracle(v) for v in R} == oR and {_to_oracle(v) for v in B} == oB

    @settings(max_examples=60, deadline=None)
    @given(colourings(), st.integers(3, 9))
    def test_monotone_and_closed(self, col, k):
        w = V1(0)
        R, B = alternating_walk_sets(col, w, k)
        R2, B2 = alternating_walk_sets(col, w, k - 2)
        assert R2 <= R and B2 <= B
        # no blue edge leaves R_{k-1} towards the complement of B_k
        Rp, _ = alternating_walk_sets(col, w, k - 1)
        for v in Rp:
            mask = col.blue.neighbors(v)
            other = V2 if v.side == 1 else V1
            for j in range(mask.bit_length()):
                if mask >> j & 1:
                    assert other(j) in B

    def test_batch_matches_single(self, p442, graphs442):
        rng = make_rng(3)
        inst = []
        for _ in range(12):
            H = graphs442[int(rng.integers(90))]
            G = BipartiteGraph.from_edges(4, 4, [e for e in H.edges() if rng.random() < 0.3])
            inst.append(ColoredInstance(p442, G, H))
        blue = np.stack([c.blue.to_array() for c in inst])
        red = np.stack([c.red.to_array() for c in inst])
        first_R, first_B = alternating_reach_batch(blue, red, 7)
        for g, c in enumerate(inst):
            for wi in range(8):
                w = V1(wi) if wi < 4 else V2(wi - 4)
                for k in range(1, 8):
                    R, B = alternating_walk_sets(c, w, k)
                    for vi in range(8):
                        v = V1(vi) if vi < 4 else V2(vi - 4)
                        for first, S in ((first_R, R), (first_B, B)):
                            f = first[g, wi, vi]
                            expect = f > 0 and f <= k and (k - f) % 2 == 0
                            assert (v in S) == expect


class TestCycles:
    def test_k22(self):
        w = find_alternating_cycle(k22(), (0, 0), 4)
        assert w.length == 4 and w.is_closed
        check_cycle(k22(), w, (0, 0))

    def test_all_blue(self):
        col = BlueRed(BipartiteGraph.complete(3, 3), BipartiteGraph.empty(3, 3))
        assert all(find_alternating_cycle(col, e, 18) is None for e in col.blue.edges())

    def test_uncoloured_edge(self, p442, graphs442):
        H = graphs442[0]
        G = BipartiteGraph.from_edges(4, 4, [(0, 0)])
        with pytest.raises(ValueError):
            find_alternating_cycle(ColoredInstance(p442, G, H), (0, 0), 6)

    def test_max_len_respected(self):
        assert find_alternating_cycle(k22(), (0, 0), 3) is None

    @settings(max_examples=150, deadline=None)
    @given(colourings(), st.data(), st.integers(2, 10))
    def test_matches_exhaustive_search(self, col, data, max_len):
        edges = col.blue.edges() + col.red.edges()
        if not edges:
            return
        e = data.draw(st.sampled_from(edges))
        w = find_alternating_cycle(col, e, max_len)
        expected = shortest_alternating_cycle(_colour_dict(col), e, max_len)
        assert (w is None) == (expected is None)
        if w is not None:
            assert w.length == expected
            check_cycle(col, w, e)

    def test_bounds(self):
        assert walk_length_bound(Fraction(1, 2), Fraction(1, 2)) == 257
        assert cycle_length_bound(Fraction(1, 2), Fraction(1, 2)) == 258

    def test_walks_and_cycles_on_biregular(self, p442, graphs442, empty44):
        for H in graphs442[:10]:
            rep = walks_and_cycles(ColoredInstance(p442, empty44, H), Fraction(1, 2), Fraction(1, 2))
            assert rep.ok


class TestSparseCut:
    def _inst(self, seed=0):
        P = BiregularParams(6, 6, Fraction(1, 2))
        H = sample_biregular_exact(P, make_rng(seed))
        return ColoredInstance(P, BipartiteGraph.empty(6, 6), H)

    def test_empty_sets(self):
        rep = sparse_cut_check(self._inst(), [], [], Fraction(1, 2), Fraction(1, 2), Fraction(1, 32), Fraction(1, 33))
        assert rep.hypothesis_holds and rep.conclusion_holds and rep.max_term == 0
        assert rep.regular and rep.jumbled and rep.hypothesis_range_ok

    def test_whole_sides_reported(self):
        rep = sparse_cut_check(self._inst(), range(6), range(6), Fraction(1, 2), Fraction(1, 2),
                               Fraction(1, 32), Fraction(1, 33))
        assert rep.cross == 0 and not rep.hypothesis_holds

    def test_range_violation(self):
        rep = sparse_cut_check(self._inst(), [], [], Fraction(1, 2), Fraction(1, 2), Fraction(1, 4), Fraction(1, 33))
        assert not rep.hypothesis_range_ok and not rep.violated

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("x_side", [1, 2])
    def test_never_violated_exhaustive(self, seed, x_side):
        inst = self._inst(seed)
        half = Fraction(1, 2)
        delta, nu = Fraction(1, 32), Fraction(1, 33)
        pre = (rb_regularity_check(inst, half, half, delta).passed,
               jumbledness_check(inst.blue | inst.red, 1, delta).passed)
        assert pre == (True, True)
        subsets = [s for k in range(7) for s in combinations(range(6), k)]
        for X in subsets:
            for Y in subsets:
                rep = sparse_cut_check(inst, X, Y, half, half, delta, nu, x_side, preconditions=pre)
                assert not rep.violated
