import numpy as np
import pytest
from scipy.stats import chi2, norm

from crossrep import (
    ConfigError,
    DataError,
    HypothesisKind,
    PValueVector,
    bh_adjust,
    bh_procedure,
    concordant_meta_pvalue,
    concordant_meta_pvalues,
    fisher_combine,
    no_association_pvalue,
    no_association_pvalues,
    no_replicability_pvalue,
    no_replicability_pvalues,
)


class TestFisherCombine:
    def test_single_pvalue_is_identity(self):
        for p in (0.73, 0.05, 1e-8):
            assert fisher_combine([p]) == pytest.approx(p, rel=1e-10)

    def test_all_ones_combine_to_one(self):
        assert fisher_combine([1.0, 1.0, 1.0]) == 1.0

    def test_two_nominal_pvalues_oracle(self):
        # -2*(log .05 + log .05) = 11.9829...; chi-square(4) upper tail
        stat = -2.0 * (np.log(0.05) + np.log(0.05))
        oracle = chi2.sf(stat, 4)
        assert stat == pytest.approx(11.98293, abs=1e-5)
        assert oracle == pytest.approx(0.017498, abs=1e-4)
        assert fisher_combine([0.05, 0.05]) == pytest.approx(oracle, rel=1e-12)

    def test_zero_is_floored(self):
        assert fisher_combine([0.0, 0.5]) == fisher_combine([1e-300, 0.5])

    def test_contract_violations(self):
        with pytest.raises(ValueError):
            fisher_combine([])
        with pytest.raises(ValueError):
            fisher_combine([0.5, 1.2])
        with pytest.raises(ValueError):
            fisher_combine([-0.1])


class TestConcordantMeta:
    def test_two_positive_scores_oracle(self):
        # right tails 0.02275 each; Fisher ~4.44e-3; doubled ~8.88e-3
        right = norm.sf(2.0)
        combined = chi2.sf(-4.0 * np.log(right), 4)
        assert combined == pytest.approx(4.4395e-3, abs=1e-4)
        got = concordant_meta_pvalue([2.0, 2.0])
        assert got == pytest.approx(2 * combined, abs=1e-4)

    def test_strongly_negative_scores_use_left_side(self):
        z = np.array([-4.0, -3.5, -5.0])
        left = chi2.sf(-2.0 * norm.logcdf(z).sum(), 6)
        assert concordant_meta_pvalue(z) == pytest.approx(2 * left, rel=1e-10)

    def test_sign_symmetry_is_exact(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(4, 200))
        assert np.array_equal(
            concordant_meta_pvalues(z), concordant_meta_pvalues(-z)
        )

    def test_capped_at_one(self):
        assert concordant_meta_pvalue([0.0]) == 1.0


class TestNoReplicability:
    def test_single_strong_study_yields_large_pvalue(self):
        # the subset leaving out the only signal carries no evidence
        p = no_replicability_pvalue([8.0, 0.1, -0.2])
        assert p > 0.1

    def test_two_studies_reduce_to_max_of_singles(self):
        z = np.array([2.5, -1.0])
        singles = [concordant_meta_pvalue([z[1]]), concordant_meta_pvalue([z[0]])]
        assert no_replicability_pvalue(z) == pytest.approx(max(singles), rel=1e-12)

    def test_three_concordant_signals_are_tiny(self):
        assert no_replicability_pvalue([-5.0, -5.0, -5.0]) < 1e-6

    def test_study_permutation_invariance(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=5)
        p = no_replicability_pvalue(z)
        for _ in range(5):
            rng.shuffle(z)
            assert no_replicability_pvalue(z) == pytest.approx(p, rel=1e-12)

    def test_needs_two_studies(self):
        with pytest.raises(ValueError):
            no_replicability_pvalue([1.5])


class TestNoAssociation:
    def test_single_study_is_doubled_one_sided(self):
        for z in (1.7, -2.3, 0.4):
            expected = min(1.0, 2 * min(norm.cdf(z), norm.sf(z)))
            assert no_association_pvalue([z]) == pytest.approx(expected, rel=1e-9)

    def test_zero_vector_gives_one(self):
        assert no_association_pvalue([0.0, 0.0, 0.0]) == 1.0

    def test_three_negative_scores_oracle(self):
        # left-sided stat -2*3*log Phi(-3) = 39.646; chi-square(6) tail,
        # doubled: 1.069e-6 (recomputed from the contract's formula)
        stat = -6.0 * norm.logcdf(-3.0)
        assert stat == pytest.approx(39.6463, abs=1e-3)
        oracle = 2.0 * chi2.sf(stat, 6)
        assert oracle == pytest.approx(1.0690e-6, rel=1e-3)
        assert no_association_pvalue([-3.0, -3.0, -3.0]) == pytest.approx(
            oracle, rel=1e-10
        )

    def test_vector_form_matches_scalar(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(3, 40))
        vec = no_association_pvalues(z)
        for j in range(40):
            assert vec[j] == pytest.approx(no_association_pvalue(z[:, j]), rel=1e-12)
        vec_nr = no_replicability_pvalues(z)
        for j in range(40):
            assert vec_nr[j] == pytest.approx(
                no_replicability_pvalue(z[:, j]), rel=1e-12
            )


class TestBhProcedure:
    def test_worked_example(self):
        rejected = bh_procedure(np.array([0.001, 0.012, 0.9]), q=0.05)
        assert rejected.tolist() == [True, True, False]

    def test_all_ones_reject_nothing(self):
        assert bh_procedure(np.ones(5), q=0.05).sum() == 0

    def test_boundary_rejects_everything(self):
        m, q = 8, 0.05
        p = np.full(m, q / m)
        assert bh_procedure(p, q).sum() == m

    def test_adjusted_pvalues_agree_with_stepup(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = rng.uniform(size=rng.integers(1, 300))
            q = rng.uniform(0.01, 0.3)
            assert np.array_equal(bh_procedure(p, q), bh_adjust(p) <= q)

    def test_adjusted_pvalues_are_monotone_in_p(self):
        rng = np.random.default_rng(4)
        p = rng.uniform(size=100)
        adj = bh_adjust(p)
        order = np.argsort(p)
        assert np.all(np.diff(adj[order]) >= -1e-15)
        assert np.all(adj <= 1.0) and np.all(adj >= p - 1e-15)

    def test_accepts_pvalue_vector(self):
        vec = PValueVector(np.array([0.01, 0.2]), HypothesisKind.NO_ASSOCIATION)
        assert bh_procedure(vec, 0.05).tolist() == [True, False]

    def test_validation(self):
        with pytest.raises(ConfigError):
            bh_procedure(np.array([0.5]), q=1.5)
        with pytest.raises(DataError):
            bh_procedure(np.array([0.5, np.nan]), q=0.05)
