import itertools

import numpy as np
import pytest
from scipy import stats

import texplain as tx
from texplain.concepts import CONCEPT_TIE_ORDER, ConceptRanking, ConceptSignificance


def report_from(values_by_id):
    ids = tx.default_registry().ids
    values = np.array([values_by_id[i] for i in ids], dtype=np.float64)
    values = values / values.sum()
    return tx.ImportanceReport(tuple(values), ids, "lr", "absolute")


def uniform_report():
    return report_from({i: 1.0 for i in tx.default_registry().ids})


class TestConceptSignificance:
    def test_uniform(self):
        sig = tx.concept_significance(uniform_report())
        for name in CONCEPT_TIE_ORDER:
            assert getattr(sig, name) == pytest.approx(1 / 12)

    def test_groove_dominant(self):
        values = {i: 0.5 / 11 for i in tx.default_registry().ids}
        values["groove_remove"] = 0.5
        sig = tx.concept_significance(report_from(values))
        assert sig.rugged == pytest.approx(0.5)
        others = [sig.plated, sig.furrow, sig.vertical_stripped, sig.smooth]
        assert all(sig.rugged > o for o in others)

    def test_smooth_is_max(self):
        values = {i: 0.7 / 10 for i in tx.default_registry().ids}
        values["smooth_150"] = 0.2
        values["smooth_300"] = 0.1
        sig = tx.concept_significance(report_from(values))
        assert sig.smooth == pytest.approx(0.2)

    def test_formulas(self):
        ids = tx.default_registry().ids
        rng = np.random.default_rng(11)
        raw = dict(zip(ids, rng.random(12)))
        report = report_from(raw)
        fi = report.by_id
        sig = tx.concept_significance(report)
        assert sig.vertical_stripped == pytest.approx((fi["rotate_-30"] + fi["rotate_+30"]) / 2)
        assert sig.plated == pytest.approx(
            (fi["rotate_-30"] + fi["rotate_+30"] + fi["flip_h"] + fi["flip_v"]) / 4
        )
        assert sig.rugged == fi["groove_remove"]
        assert sig.furrow == pytest.approx((sig.rugged + sig.vertical_stripped) / 2)

    def test_registry_mismatch(self):
        report = tx.ImportanceReport((0.5, 0.5), ("a", "b"), "lr", "absolute")
        with pytest.raises(tx.RegistryMismatchError):
            tx.concept_significance(report)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(3)
        raw = dict(zip(tx.default_registry().ids, rng.random(12)))

        class Stub:  # duck-typed report carrying unnormalized values
            operator_ids = tuple(raw)
            by_id = dict(raw)

        class Scaled:
            operator_ids = tuple(raw)
            by_id = {k: 4.25 * v for k, v in raw.items()}

        sig = tx.concept_significance(Stub())
        scaled = tx.concept_significance(Scaled())
        for name in CONCEPT_TIE_ORDER:
            assert getattr(scaled, name) == pytest.approx(4.25 * getattr(sig, name))
        assert tx.rank_concepts(sig).order == tx.rank_concepts(scaled).order


class TestRankConcepts:
    def test_total_tie_canonical_order(self):
        sig = ConceptSignificance(rugged=0.2, plated=0.2, furrow=0.2, vertical_stripped=0.2, smooth=0.2)
        ranking = tx.rank_concepts(sig)
        assert ranking.order == CONCEPT_TIE_ORDER
        assert ranking.tie_groups == (CONCEPT_TIE_ORDER,)

    def test_dominant_first(self):
        sig = ConceptSignificance(rugged=0.5, plated=0.1, furrow=0.1, vertical_stripped=0.1, smooth=0.1)
        assert tx.rank_concepts(sig).order[0] == "rugged"

    def test_strict_order(self):
        sig = ConceptSignificance(rugged=0.1, plated=0.2, furrow=0.3, vertical_stripped=0.4, smooth=0.5)
        ranking = tx.rank_concepts(sig)
        assert ranking.order == ("smooth", "vertical_stripped", "furrow", "plated", "rugged")
        assert ranking.tie_groups == ()

    def test_partial_tie_recorded(self):
        sig = ConceptSignificance(rugged=0.3, plated=0.3, furrow=0.1, vertical_stripped=0.2, smooth=0.1)
        ranking = tx.rank_concepts(sig)
        assert ranking.groups[0] == ("rugged", "plated")
        assert ranking.tie_groups == (("rugged", "plated"), ("furrow", "smooth"))

    def test_ranking_validation(self):
        with pytest.raises(ValueError):
            ConceptRanking.from_order(("rugged", "rugged", "furrow", "plated", "smooth"))


def tau_oracle(a, b):
    """Brute-force concordant/discordant pair counting for permutations."""
    pos_a = {x: i for i, x in enumerate(a)}
    pos_b = {x: i for i, x in enumerate(b)}
    concordant = discordant = 0
    for x, y in itertools.combinations(sorted(a), 2):
        s = (pos_a[x] - pos_a[y]) * (pos_b[x] - pos_b[y])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    n = len(a)
    return (concordant - discordant) / (n * (n - 1) / 2)


class TestKendallTau:
    def test_identical(self):
        a = ConceptRanking.from_order(CONCEPT_TIE_ORDER)
        assert tx.kendall_tau(a, a) == 1.0

    def test_reversed(self):
        a = ConceptRanking.from_order(CONCEPT_TIE_ORDER)
        b = ConceptRanking.from_order(tuple(reversed(CONCEPT_TIE_ORDER)))
        assert tx.kendall_tau(a, b) == -1.0

    def test_adjacent_transposition(self):
        a = ConceptRanking.from_order(("rugged", "plated", "furrow", "vertical_stripped", "smooth"))
        b = ConceptRanking.from_order(("plated", "rugged", "furrow", "vertical_stripped", "smooth"))
        # 9 concordant pairs, 1 discordant -> (9 - 1) / 10
        assert tx.kendall_tau(a, b) == 0.8

    def test_matches_brute_force_on_sample(self):
        perms = list(itertools.permutations(CONCEPT_TIE_ORDER))
        rng = np.random.default_rng(5)
        for _ in range(400):
            a = perms[rng.integers(len(perms))]
            b = perms[rng.integers(len(perms))]
            got = tx.kendall_tau(ConceptRanking.from_order(a), ConceptRanking.from_order(b))
            assert got == tau_oracle(a, b)

    def test_tied_rankings_match_scipy_tau_b(self):
        rng = np.random.default_rng(8)
        names = sorted(CONCEPT_TIE_ORDER)
        for _ in range(200):
            ra = rng.integers(0, 3, size=5)
            rb = rng.integers(0, 3, size=5)

            def as_ranking(ranks):
                groups = []
                for level in sorted(set(ranks)):
                    groups.append(tuple(names[i] for i in range(5) if ranks[i] == level))
                return ConceptRanking(groups=tuple(groups))

            got = tx.kendall_tau(as_ranking(ra), as_ranking(rb))
            expected = stats.kendalltau(ra, rb, variant="b").statistic
            if np.isnan(expected):  # scipy returns nan when a side is fully tied
                assert got == 0.0
            else:
                assert got == pytest.approx(expected, abs=1e-12)

    def test_tau_symmetry_and_bounds(self):
        rng = np.random.default_rng(4)
        perms = list(itertools.permutations(CONCEPT_TIE_ORDER))
        for _ in range(100):
            a = ConceptRanking.from_order(perms[rng.integers(len(perms))])
            b = ConceptRanking.from_order(perms[rng.integers(len(perms))])
            t = tx.kendall_tau(a, b)
            assert -1.0 <= t <= 1.0
            assert t == tx.kendall_tau(b, a)
