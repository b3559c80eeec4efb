import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergmbayes.adjust import AplSettings, build_apl
from ergmbayes.evidence import (EvidenceSettings, compare, evidence_cj,
                                evidence_pp)
from ergmbayes.exchange import GaussianPrior, summarize
from ergmbayes.graph import Graph
from ergmbayes.model import SpecError, parse_formula, validate
from ergmbayes.sampler import SamplerSettings, enumerate_exact, simulate

import oracles as O


@pytest.fixture(scope="module")
def instance():
    """edges+nodematch n=4 instance with its APL, prior and quadrature truth."""
    gt = Graph.empty(4, directed=False)
    gt.attributes = {"x": np.array(["a", "a", "b", "b"], dtype=object)}
    spec = validate(parse_formula('edges + nodematch("x")'), gt)
    tab = enumerate_exact(spec, gt)
    g = simulate(spec, np.array([-0.3, 0.8]), gt, SamplerSettings(600, seed=0))
    s_obs = tab.stats[tab.index_of(g)]
    assert 2 <= s_obs[0] <= 4 and 1 <= s_obs[1] < s_obs[0]
    prior = GaussianPrior(np.zeros(2), 4 * np.eye(2))
    grid = O.GridPosterior(tab.stats, s_obs, prior.mean, prior.sigma,
                           lo=(-12, -12), hi=(10, 12), m=501)
    apl = build_apl(spec, g, AplSettings(aux_iters=500, n_aux_draws=50,
                                         aux_thin=25, ladder=40,
                                         curvature_draws=4000), seed=1)
    return {"apl": apl, "prior": prior, "log_ev_exact": grid.log_evidence}


class TestChibJeliazkov:
    def test_matches_quadrature(self, instance):
        est = evidence_cj(instance["apl"], instance["prior"],
                          EvidenceSettings(burn_in=2000, main_iters=25000,
                                           num_samples=20000, seed=2))
        assert est.log_evidence == pytest.approx(instance["log_ev_exact"],
                                                 abs=0.1)
        assert est.method == "CJ"
        assert est.wall_time > 0

    def test_posterior_sample_summarizes(self, instance):
        est = evidence_cj(instance["apl"], instance["prior"],
                          EvidenceSettings(burn_in=500, main_iters=4000,
                                           num_samples=3000, seed=3))
        s = summarize(est.posterior_sample)
        assert len(s.coord_names) == 2
        assert np.all(s.sd > 0)
        assert 0 < est.details["acceptance_rate"] < 1

    def test_deterministic_given_seed(self, instance):
        st_ = EvidenceSettings(burn_in=200, main_iters=2000, num_samples=1500,
                               seed=7)
        a = evidence_cj(instance["apl"], instance["prior"], st_)
        b = evidence_cj(instance["apl"], instance["prior"], st_)
        assert a.log_evidence == b.log_evidence

    def test_prior_dimension_checked(self, instance):
        with pytest.raises(SpecError, match="dimension"):
            evidence_cj(instance["apl"], GaussianPrior(np.zeros(3), np.eye(3)),
                        EvidenceSettings(burn_in=10, main_iters=50,
                                         num_samples=50, seed=0))


class TestPowerPosterior:
    def test_matches_quadrature(self, instance):
        est = evidence_pp(instance["apl"], instance["prior"],
                          EvidenceSettings(rungs=20, rung_iters=3000, seed=4))
        assert est.log_evidence == pytest.approx(instance["log_ev_exact"],
                                                 abs=0.1)
        assert est.method == "PP"

    def test_coarse_ladder_within_loose_band(self, instance):
        est = evidence_pp(instance["apl"], instance["prior"],
                          EvidenceSettings(rungs=1, rung_iters=4000, seed=5))
        assert est.log_evidence == pytest.approx(instance["log_ev_exact"],
                                                 abs=0.3)

    def test_cross_method_agreement(self, instance):
        cj = evidence_cj(instance["apl"], instance["prior"],
                         EvidenceSettings(burn_in=2000, main_iters=25000,
                                          num_samples=20000, seed=6))
        pp = evidence_pp(instance["apl"], instance["prior"],
                         EvidenceSettings(rungs=20, rung_iters=3000, seed=7))
        assert cj.log_evidence == pytest.approx(pp.log_evidence, abs=0.1)

    def test_temperatures_follow_fifth_power_ladder(self, instance):
        est = evidence_pp(instance["apl"], instance["prior"],
                          EvidenceSettings(rungs=4, rung_iters=400, seed=8))
        ts = est.details["temperatures"]
        np.testing.assert_allclose(ts, (np.arange(5) / 4) ** 5)

    def test_deterministic_given_seed(self, instance):
        st_ = EvidenceSettings(rungs=3, rung_iters=500, seed=9)
        a = evidence_pp(instance["apl"], instance["prior"], st_)
        b = evidence_pp(instance["apl"], instance["prior"], st_)
        assert a.log_evidence == b.log_evidence


class TestCompare:
    def test_reported_bayes_factor_magnitude(self):
        # log BF of 134.85 corresponds to ~3.68e58
        result = compare([-38064.65, -38199.50])
        assert result.log_bayes_factors[0, 1] == pytest.approx(134.85)
        assert result.bayes_factors[0, 1] == pytest.approx(3.68e58, rel=0.01)
        assert result.posterior_model_probs[0] == pytest.approx(1.0)

    def test_identical_evidence_splits_evenly(self):
        result = compare([-10.0, -10.0])
        assert result.bayes_factors[0, 1] == pytest.approx(1.0)
        np.testing.assert_allclose(result.posterior_model_probs, [0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e5, 1e5), min_size=2, max_size=6),
           st.floats(-1e4, 1e4))
    def test_normalization_and_shift_invariance(self, logz, shift):
        base = compare(logz)
        assert base.posterior_model_probs.sum() == pytest.approx(1.0, abs=1e-12)
        shifted = compare([z + shift for z in logz])
        np.testing.assert_allclose(shifted.posterior_model_probs,
                                   base.posterior_model_probs, atol=1e-12)
        np.testing.assert_allclose(shifted.log_bayes_factors,
                                   base.log_bayes_factors, atol=1e-9)

    def test_prior_model_probabilities(self):
        r = compare([0.0, 0.0], [0.9, 0.1])
        np.testing.assert_allclose(r.posterior_model_probs, [0.9, 0.1])
        with pytest.raises(ValueError, match="sum to 1"):
            compare([0.0, 0.0], [0.9, 0.2])
        with pytest.raises(ValueError, match="sum to 1"):
            compare([0.0, 0.0], [1.0, 0.0])
