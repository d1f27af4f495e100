import csv
import io
import math
from fractions import Fraction

import pytest

from bisandwich.core import BiregularParams, BipartiteGraph
from bisandwich.errors import OutOfRange, SizeMismatch, TooLarge
from bisandwich.experiments import (
    COLUMNS,
    ExperimentConfig,
    edge_pair_probability,
    exact_matching_probability,
    exp_codegree,
    exp_codegree_process,
    exp_degree_process,
    exp_matching,
    exp_matching_grid,
    exp_maxdegree_gnp,
    exp_typicality,
    has_perfect_matching,
    maxdegree_threshold,
    typicality_profile,
)

from oracles import all_biregular, has_perfect_matching_brute

P442 = BiregularParams(4, 4, Fraction(1, 2))
P663 = BiregularParams(6, 6, Fraction(1, 2))


@pytest.fixture(scope="module")
def brute442():
    return all_biregular(4, 4, 2, 2)


class TestConfig:
    def test_trials_positive(self):
        with pytest.raises(OutOfRange):
            ExperimentConfig(P442, trials=0)

    def test_grid_in_range(self):
        with pytest.raises(OutOfRange):
            ExperimentConfig(P442, t_grid=[0, 9])

    def test_lambda_default(self):
        assert ExperimentConfig(P442).lam_for(P442) == pytest.approx(math.log(16))
        assert ExperimentConfig(P442, lam=2.5).lam_for(P442) == 2.5


class TestCodegree:
    def test_exact_and_empirical(self):
        rep = exp_codegree(P442, ExperimentConfig(P442, trials=10_000, seed=1))
        n = 10_000
        for k, r in enumerate((36, 48, 6)):
            p = r / 90
            assert rep.row(f"exact_pmf_{k}")["observed"] == pytest.approx(p)
            assert abs(rep.row(f"empirical_pmf_{k}")["observed"] - p) <= 3 * math.sqrt(p * (1 - p) / n)
        assert rep.meta["exact_mean"] == "2/3"
        assert rep.row("codegree_centre")["observed"] == 1.0

    def test_point_mass(self):
        P = BiregularParams(2, 2, Fraction(1))
        rep = exp_codegree(P, ExperimentConfig(P, trials=20))
        assert rep.row("codegree_mean")["observed"] == 2.0
        assert rep.row("exact_pmf_2")["observed"] == 1.0

    def test_band_terms_reported_separately(self):
        rep = exp_codegree(P442, ExperimentConfig(P442, trials=10, lam=1.0))
        terms = [rep.row(s)["observed"] for s in
                 ("band_indicator_term", "band_ratio_term", "band_sqrt_term", "band_lambda_term")]
        # p_hat = 1/2, n2 = n_hat = 4, indicator = 1 for (4, 4, 1/2)
        assert terms == pytest.approx([20 * 0.125 * 4, 20 * 0.5, 20 * math.sqrt(0.25 * 4), 1.0])
        assert rep.row("codegree_outside_band")["band"] == pytest.approx(sum(terms))


class TestDegreeProcess:
    def test_endpoints_exact(self):
        rep = exp_degree_process(P442, ExperimentConfig(P442, trials=200, t_grid=[0, 8]))
        assert rep.row("max_dev_v1_mean", 0)["observed"] == 0.0
        assert rep.row("max_dev_v1_mean", 8)["observed"] == 0.0
        assert rep.row("band_violation_frac", 8)["observed"] == 0.0

    def test_half_way_mean(self):
        n = 4000
        rep = exp_degree_process(P663, ExperimentConfig(P663, trials=n, t_grid=[9], seed=4))
        mean = rep.row("hypergeom_mean_v1", 9)["observed"]
        sd = rep.row("hypergeom_sd_v1", 9)["observed"]
        assert mean == 1.5
        # hypergeometric sd with M=18, d=3, t=9
        assert sd == pytest.approx(math.sqrt(9 * (3 / 18) * (15 / 18) * 9 / 17))
        assert abs(rep.row("deg_u0_mean", 9)["observed"] - 1.5) <= 3 * sd / math.sqrt(n)


class TestCodegreeProcess:
    def test_endpoints(self):
        rep = exp_codegree_process(P442, ExperimentConfig(P442, trials=300, t_grid=[0, 8], lam=1.0))
        assert rep.row("max_codegree_max", 0)["observed"] == 0.0
        assert rep.row("max_codegree_max", 8)["observed"] == 2.0
        assert rep.row("band_violation_frac", 8)["observed"] == 0.0

    def test_relabels_wide_graphs(self):
        P = BiregularParams(2, 4, Fraction(1, 2))
        rep = exp_codegree_process(P, ExperimentConfig(None, trials=20))
        assert rep.meta["relabeled"]


class TestTypicality:
    def test_pair_probabilities(self, brute442):
        E = BipartiteGraph.empty(4, 4)
        for e, f, expected in (((0, 0), (1, 1), Fraction(2, 9)), ((0, 0), (0, 1), Fraction(1, 3))):
            assert edge_pair_probability(P442, E, e, f) == expected
            brute = Fraction(sum(1 for H in brute442 if e in H and f not in H), len(brute442))
            assert brute == expected

    def test_profile_at_empty_prefix(self, brute442):
        prof = typicality_profile(P442, BipartiteGraph.empty(4, 4), (0.5,))
        assert prof["min_pair_prob"] == Fraction(2, 9)
        # with G empty, theta(u0, u1) counts columns in row 0 but not row 1
        pmf = [0, 0, 0]
        for H in brute442:
            pmf[sum(1 for j in range(4) if (0, j) in H and (1, j) not in H)] += 1
        assert prof["theta_pmf_u0_u1"] == pmf
        assert prof["theta_centre"] == pytest.approx(1.0)

    def test_report(self):
        rep = exp_typicality(P442, 2, ExperimentConfig(P442, trials=1, seed=3), graphs=2)
        assert rep.row("typical_fraction_delta_0.5")["trials"] == 2
        assert 0 <= rep.row("min_pair_prob")["observed"] <= 1

    def test_too_large(self):
        with pytest.raises(TooLarge):
            exp_typicality(BiregularParams(8, 8, Fraction(1, 2)), 1, ExperimentConfig())

    def test_t_range(self):
        with pytest.raises(OutOfRange):
            exp_typicality(P442, 8, ExperimentConfig(P442))


class TestMatching:
    def test_exact_probability(self, brute442):
        assert exact_matching_probability(P442, [0, 1], [0, 1]) == Fraction(49, 90)
        hits = sum(1 for H in brute442 if has_perfect_matching_brute(H, [0, 1], [0, 1]))
        assert hits == 49

    def test_monte_carlo(self):
        n = 10_000
        rep = exp_matching(P442, 2, ExperimentConfig(P442, trials=n, seed=9))
        p = 49 / 90
        assert abs(rep.row("perfect_matching_freq")["observed"] - p) <= 3 * math.sqrt(p * (1 - p) / n)
        assert rep.row("exact_probability")["violated"] is False

    def test_complete_always_matches(self):
        P = BiregularParams(3, 3, Fraction(1))
        rep = exp_matching(P, "pn2", ExperimentConfig(P, trials=20))
        assert rep.row("perfect_matching_freq")["observed"] == 1.0

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            exp_matching(P442, 5, ExperimentConfig(P442, trials=5))

    @pytest.mark.parametrize("rows", [[(0, 0), (1, 1)], [(0, 0), (1, 0)], [(0, 1), (1, 0), (2, 2)]])
    def test_matching_against_brute(self, rows):
        F = BipartiteGraph.from_edges(3, 3, rows)
        for A, B in (([0, 1], [0, 1]), ([0, 1, 2], [0, 1, 2]), ([1, 2], [0, 2])):
            assert has_perfect_matching(F, A, B) == has_perfect_matching_brute(rows, A, B)

    def test_grid_trend(self):
        cfg = ExperimentConfig(None, trials=2000, seed=2)
        rep = exp_matching_grid(4, 4, [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)], cfg, 2)
        freqs = [r["observed"] for r in rep.rows]
        # isotonic within Monte-Carlo slack
        assert all(b >= a - 0.05 for a, b in zip(freqs, freqs[1:]))
        assert freqs[-1] == 1.0


class TestMaxDegree:
    def test_zero_density(self):
        rep = exp_maxdegree_gnp(8, 8, 0, ExperimentConfig(None, trials=20))
        assert rep.row("kappa")["observed"] == 0
        assert rep.row("freq_maxdeg_ge_kappa")["observed"] == 1.0

    def test_threshold_value(self):
        val = 0.25 * 64 + math.sqrt(0.25 * 0.75 * 64 * math.log(64))
        assert maxdegree_threshold(64, 64, Fraction(1, 4)) == math.ceil(val) == 24
        assert maxdegree_threshold(4, 3, 1) == 3

    def test_report(self):
        rep = exp_maxdegree_gnp(64, 64, Fraction(1, 4), ExperimentConfig(None, trials=200, seed=1))
        assert 0 <= rep.row("freq_maxdeg_ge_kappa")["observed"] <= 1
        assert rep.meta["hypotheses_hold"]


class TestReports:
    def test_csv_columns(self):
        rep = exp_degree_process(P442, ExperimentConfig(P442, trials=10))
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == COLUMNS and len(rows) == len(rep.rows) + 1

    def test_deterministic_and_thread_invariant(self):
        a = exp_codegree(P442, ExperimentConfig(P442, trials=300, seed=5, threads=1)).to_json()
        b = exp_codegree(P442, ExperimentConfig(P442, trials=300, seed=5, threads=4)).to_json()
        assert a == b
        c = exp_degree_process(P663, ExperimentConfig(P663, trials=100, seed=5, threads=1)).to_csv()
        d = exp_degree_process(P663, ExperimentConfig(P663, trials=100, seed=5, threads=3)).to_csv()
        assert c == d
