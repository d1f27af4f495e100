from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisandwich.core import (
    BLUE,
    RED,
    AltWalk,
    BiregularParams,
    BipartiteGraph,
    BlueRed,
    ColoredInstance,
    V1,
    V2,
    as_fraction,
    codegree,
    complement,
    theta,
)
from bisandwich.errors import InvalidParams, NotBiregular, SameVertex, SideMismatch


@st.composite
def graphs(draw, max_side=5):
    n1 = draw(st.integers(1, max_side))
    n2 = draw(st.integers(1, max_side))
    mask = draw(st.integers(0, (1 << (n1 * n2)) - 1))
    return BipartiteGraph.from_mask(n1, n2, mask)


class TestParams:
    def test_derived_fields(self):
        P = BiregularParams(4, 6, Fraction(1, 2))
        assert (P.d1, P.d2, P.N, P.M) == (3, 2, 24, 12)
        assert P.q == Fraction(1, 2) and P.p_hat == Fraction(1, 2) and P.n_hat == 4
        assert P.M == P.d1 * P.n1 == P.d2 * P.n2

    @pytest.mark.parametrize("n1,n2,p", [(3, 4, Fraction(1, 3)), (4, 4, Fraction(3, 2)), (0, 4, 0)])
    def test_rejects_bad(self, n1, n2, p):
        with pytest.raises(InvalidParams):
            BiregularParams(n1, n2, p)

    def test_rejects_decimal_float(self):
        with pytest.raises(InvalidParams):
            as_fraction(0.3)
        assert as_fraction(1.0) == 1

    def test_complement_and_transpose(self):
        P = BiregularParams(3, 6, Fraction(1, 3))
        assert P.complement().p == Fraction(2, 3)
        assert P.transpose() == BiregularParams(6, 3, Fraction(1, 3))


class TestGraph:
    def test_complement_of_empty_is_complete(self):
        assert complement(BipartiteGraph.empty(3, 3)) == BipartiteGraph.complete(3, 3)

    @given(graphs())
    def test_complement_involution(self, G):
        assert complement(complement(G)) == G
        assert (G | complement(G)) == BipartiteGraph.complete(G.n1, G.n2)
        assert (G & complement(G)).num_edges == 0

    @given(graphs())
    def test_degree_sums(self, G):
        assert sum(G.row_degrees()) == sum(G.col_degrees()) == G.num_edges == len(G.edges())

    @given(graphs())
    def test_text_roundtrip(self, G):
        assert BipartiteGraph.from_text(G.to_text()) == G
        assert BipartiteGraph.from_array(G.to_array()) == G
        assert BipartiteGraph.from_edges(G.n1, G.n2, G.edges()) == G

    def test_edges_row_major(self):
        G = BipartiteGraph.from_edges(2, 3, [(1, 0), (0, 2), (0, 1)])
        assert G.edges() == [(0, 1), (0, 2), (1, 0)]
        assert G.to_text() == "2 3\n0 1\n0 2\n1 0\n"

    def test_complement_of_biregular(self, p442, graphs442):
        for H in graphs442:
            assert complement(H).is_biregular_for(p442.complement())

    def test_file_io(self, tmp_path):
        G = BipartiteGraph.from_edges(3, 2, [(0, 0), (2, 1)])
        G.write(tmp_path / "g.txt")
        assert BipartiteGraph.read(tmp_path / "g.txt") == G


class TestCodegree:
    def test_complete_and_empty(self):
        K = BipartiteGraph.complete(3, 3)
        assert codegree(K, V1(0), V1(1)) == 3
        assert codegree(BipartiteGraph.empty(3, 3), V2(0), V2(2)) == 0

    def test_errors(self):
        K = BipartiteGraph.complete(3, 3)
        with pytest.raises(SameVertex):
            codegree(K, V1(1), V1(1))
        with pytest.raises(SideMismatch):
            codegree(K, V1(0), V2(0))

    def test_complement_duality_on_class(self, graphs442):
        for F in graphs442:
            for u in range(4):
                for v in range(u + 1, 4):
                    lhs = codegree(F, V1(u), V1(v))
                    rhs = F.degree(V1(u)) + F.degree(V1(v)) - (4 - codegree(complement(F), V1(u), V1(v)))
                    assert lhs == rhs

    @given(graphs(4), st.data())
    def test_complement_duality_any_graph(self, F, data):
        if F.n1 < 2:
            return
        u, v = data.draw(st.lists(st.integers(0, F.n1 - 1), min_size=2, max_size=2, unique=True))
        lhs = codegree(F, V1(u), V1(v))
        rhs = F.degree(V1(u)) + F.degree(V1(v)) - (F.n2 - codegree(complement(F), V1(u), V1(v)))
        assert lhs == rhs


class TestColoured:
    H_ROWS = [(0, 1), (2, 3), (0, 2), (1, 3)]

    def _H(self):
        return BipartiteGraph.from_edges(4, 4, [(i, j) for i, r in enumerate(self.H_ROWS) for j in r])

    def test_theta_example(self, p442, empty44):
        inst = ColoredInstance(p442, empty44, self._H())
        # blue nbrs of u0 = {w0, w1}; red nbrs of u1 = {w0, w1}
        assert theta(inst, V1(0), V1(1)) == 2

    def test_theta_vanishes(self, p442):
        H = self._H()
        inst = ColoredInstance(p442, H, H)
        assert all(theta(inst, V1(u), V1(v)) == 0 for u in range(4) for v in range(4) if u != v)

    def test_theta_no_red(self):
        P = BiregularParams(3, 3, 1)
        K = BipartiteGraph.complete(3, 3)
        inst = ColoredInstance(P, BipartiteGraph.empty(3, 3), K)
        assert theta(inst, V2(0), V2(1)) == 0

    def test_theta_matches_path_count(self, p442, graphs442):
        G = BipartiteGraph.from_edges(4, 4, [(0, 0)])
        for H in graphs442:
            if not G.issubset(H):
                continue
            inst = ColoredInstance(p442, G, H)
            for u in range(4):
                for v in range(4):
                    if u == v:
                        continue
                    naive = sum(1 for x in range(4)
                                if inst.color_of((u, x)) == BLUE and inst.color_of((v, x)) == RED)
                    assert theta(inst, V1(u), V1(v)) == naive

    def test_partition(self, p442, graphs442):
        H = graphs442[7]
        G = BipartiteGraph.from_edges(4, 4, H.edges()[:3])
        inst = ColoredInstance(p442, G, H)
        assert (inst.blue | inst.red | G) == BipartiteGraph.complete(4, 4)
        assert inst.blue.num_edges + inst.red.num_edges + G.num_edges == 16

    def test_validation(self, p442, graphs442):
        with pytest.raises(ValueError):
            ColoredInstance(p442, BipartiteGraph.complete(4, 4), graphs442[0])
        with pytest.raises(NotBiregular):
            ColoredInstance(p442, BipartiteGraph.empty(4, 4), BipartiteGraph.empty(4, 4))
        with pytest.raises(ValueError):
            BlueRed(graphs442[0], graphs442[0])

    def test_altwalk_validate(self, p442, empty44):
        inst = ColoredInstance(p442, empty44, self._H())
        ok = AltWalk((V1(0), V2(0), V1(1)), (BLUE, RED))
        ok.validate(inst)
        assert ok.length == 2 and not ok.is_closed
        with pytest.raises(ValueError):
            AltWalk((V1(0), V2(0), V1(2)), (BLUE, BLUE)).validate(inst)


@settings(max_examples=50)
@given(graphs(4))
def test_set_algebra(G):
    K = BipartiteGraph.complete(G.n1, G.n2)
    assert G.issubset(K) and (K - G) == complement(G)
    for e in G.edges():
        assert e in G and G.without_edge(e).num_edges == G.num_edges - 1
