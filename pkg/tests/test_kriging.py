"""Tests for the stochastic-kriging surface model."""

import math

import numpy as np
import pytest

from evtkrig import kriging as kg


def sine_sites(k=20):
    x = np.linspace(0, 2 * np.pi, k)
    return [kg.DesignSite((float(xi),), float(np.sin(xi))) for xi in x], x


class TestKernel:
    def test_zero_distance(self):
        assert kg.kernel((1.0, 2.0), (1.0, 2.0), (3.0, 4.0)) == 1.0

    def test_unit_distance(self):
        assert kg.kernel((0.0,), (1.0,), (1.0,)) == pytest.approx(math.exp(-1))

    def test_additive_exponents(self):
        assert kg.kernel((0.0, 0.0), (1.0, 1.0), (2.0, 3.0)) == pytest.approx(
            math.exp(-5))

    def test_symmetry_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rng.normal(size=3), rng.normal(size=3)
            th = rng.uniform(0.1, 3.0, size=3)
            assert kg.kernel(a, b, th) == pytest.approx(kg.kernel(b, a, th), rel=1e-15)
            assert 0.0 < kg.kernel(a, b, th) <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kg.kernel((0.0,), (1.0, 2.0), (1.0, 1.0))


class TestFit:
    def test_noiseless_interpolation(self):
        sites, x = sine_sites(20)
        model = kg.fit(sites)
        assert model.nugget == 0.0
        for xi in x:
            assert model.predict((float(xi),))[0] == pytest.approx(
                np.sin(xi), abs=1e-8)

    def test_constant_responses(self):
        model = kg.fit([kg.DesignSite((0.0,), 2.5), kg.DesignSite((1.0,), 2.5)])
        assert model.beta0 == pytest.approx(2.5, rel=1e-9)
        for x0 in (0.2, 0.5, 0.9):
            assert model.predict((x0,))[0] == pytest.approx(2.5, rel=1e-9)

    def test_grf_hyperparameter_recovery(self):
        # Draw from the model itself (known tau2=1, theta=4) with a small
        # known observation noise; the likelihood surface is flat, so the
        # tolerance is deliberately loose.
        rng = np.random.default_rng(3)
        locs = np.sort(rng.random(50))
        corr = np.exp(-4.0 * (locs[:, None] - locs[None, :]) ** 2)
        draw = np.linalg.cholesky(corr + 1e-12 * np.eye(50)) @ rng.standard_normal(50)
        noise_sd = 0.05
        y = draw + noise_sd * rng.standard_normal(50)
        sites = [kg.DesignSite((float(l),), float(v), noise_sd**2)
                 for l, v in zip(locs, y)]
        model = kg.fit(sites)
        assert abs(math.log(model.tau2) - 0.0) < 0.5
        assert abs(math.log(model.theta[0]) - math.log(4.0)) < 0.5

    def test_duplicate_noiseless_sites_rejected(self):
        sites = [kg.DesignSite((1.0,), 2.0), kg.DesignSite((1.0,), 3.0),
                 kg.DesignSite((2.0,), 4.0)]
        with pytest.raises(kg.SingularDesignError):
            kg.fit(sites)

    def test_duplicate_sites_with_noise_allowed(self):
        sites = [kg.DesignSite((1.0,), 2.0, 0.5), kg.DesignSite((1.0,), 3.0, 0.5),
                 kg.DesignSite((2.0,), 4.0, 0.5)]
        kg.fit(sites)  # must not raise

    def test_single_site_rejected(self):
        with pytest.raises(ValueError):
            kg.fit([kg.DesignSite((0.0,), 1.0)])


class TestPredict:
    def test_two_site_closed_form(self):
        tau2, theta = 2.0, 1.0
        sites = [kg.DesignSite((0.0,), 1.0, 0.3), kg.DesignSite((1.0,), 3.0, 0.7)]
        model = kg.assemble(sites, tau2=tau2, theta=[theta])
        r = math.exp(-theta)
        sigma = tau2 * np.array([[1, r], [r, 1]]) + np.diag([0.3, 0.7])
        sig_inv = np.linalg.inv(sigma)
        ones, y = np.ones(2), np.array([1.0, 3.0])
        beta0 = (ones @ sig_inv @ y) / (ones @ sig_inv @ ones)
        for x0 in (0.0, 0.3, 0.75, 1.4):
            v = tau2 * np.array([math.exp(-theta * x0**2),
                                 math.exp(-theta * (x0 - 1) ** 2)])
            want = beta0 + v @ sig_inv @ (y - beta0)
            assert model.predict((x0,))[0] == pytest.approx(want, abs=1e-12)

    def test_noiseless_site_reproduced(self):
        sites = [kg.DesignSite((0.0,), 1.0), kg.DesignSite((1.0,), 3.0),
                 kg.DesignSite((2.0,), 2.0)]
        model = kg.assemble(sites, tau2=1.5, theta=[0.8])
        for s in sites:
            assert model.predict(s.location)[0] == pytest.approx(s.response, abs=1e-10)

    def test_regression_limit_far_from_design(self):
        # Huge kernel rate kills all correlation: prediction collapses to the
        # trend constant and the extrinsic sd to the process sd.
        sites = [kg.DesignSite((0.0,), 1.0, 0.1), kg.DesignSite((1.0,), 3.0, 0.1)]
        model = kg.assemble(sites, tau2=2.0, theta=[50.0])
        mean, sd = model.predict((40.0,))
        assert mean == pytest.approx(model.beta0, abs=1e-12)
        assert sd == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_shrinkage_toward_trend_with_noise(self):
        sites = [kg.DesignSite((0.0,), 1.0, 0.4), kg.DesignSite((1.0,), 3.0, 0.4)]
        model = kg.assemble(sites, tau2=1.0, theta=[1.0])
        for s in sites:
            pred = model.predict(s.location)[0]
            assert (pred - model.beta0) * (s.response - model.beta0) > 0
            assert abs(pred - model.beta0) < abs(s.response - model.beta0)

    def test_inflating_noise_moves_predictions_to_trend(self):
        base = [kg.DesignSite((0.0,), 1.0, 0.2), kg.DesignSite((1.0,), 3.0, 0.3)]
        inflated = [kg.DesignSite(s.location, s.response, 4.0 * s.intrinsic_variance)
                    for s in base]
        m_base = kg.assemble(base, tau2=1.0, theta=[1.0])
        m_more = kg.assemble(inflated, tau2=1.0, theta=[1.0])
        for x0 in (0.0, 0.25, 0.5, 1.0):
            lo = m_base.predict((x0,))[0]
            hi = m_more.predict((x0,))[0]
            assert abs(hi - m_more.beta0) <= abs(lo - m_more.beta0) + 1e-12

    def test_dimension_mismatch(self):
        sites, _ = sine_sites(5)
        model = kg.assemble(sites, tau2=1.0, theta=[1.0])
        with pytest.raises(ValueError):
            model.predict((0.0, 1.0))


class TestLikelihood:
    @staticmethod
    def _dense_loglik(sites, tau2, theta, beta0, nugget=0.0):
        locs = np.array([s.location for s in sites], dtype=float)
        y = np.array([s.response for s in sites])
        noise = np.array([s.intrinsic_variance for s in sites])
        diff = locs[:, None, :] - locs[None, :, :]
        corr = np.exp(-np.einsum("ijk,k->ij", diff**2, np.asarray(theta, float)))
        sigma = tau2 * (corr + nugget * np.eye(len(sites))) + np.diag(noise)
        resid = y - beta0
        sign, logdet = np.linalg.slogdet(sigma)
        assert sign > 0
        return (-0.5 * len(sites) * math.log(2 * math.pi) - 0.5 * logdet
                - 0.5 * resid @ np.linalg.inv(sigma) @ resid)

    def test_factorized_matches_dense(self):
        rng = np.random.default_rng(5)
        for k in (3, 6, 10):
            locs = rng.uniform(-1, 1, size=(k, 2))
            sites = [kg.DesignSite(tuple(l), float(rng.normal()),
                                   float(rng.uniform(0.05, 0.3))) for l in locs]
            tau2 = float(rng.uniform(0.5, 2.0))
            theta = rng.uniform(0.3, 2.0, size=2)
            beta0 = float(rng.normal())
            got = kg.log_likelihood(sites, tau2, theta, beta0=beta0)
            want = self._dense_loglik(sites, tau2, theta, beta0)
            assert got == pytest.approx(want, rel=1e-8)

    def test_profiled_trend_is_optimal(self):
        rng = np.random.default_rng(6)
        locs = rng.uniform(0, 1, size=(8, 1))
        sites = [kg.DesignSite(tuple(l), float(rng.normal()), 0.2) for l in locs]
        model = kg.assemble(sites, tau2=1.0, theta=[1.5])
        best = kg.log_likelihood(sites, 1.0, [1.5], beta0=model.beta0)
        for delta in (-1e-3, 1e-3):
            assert kg.log_likelihood(sites, 1.0, [1.5],
                                     beta0=model.beta0 + delta) <= best


class TestSerialization:
    def test_round_trip(self):
        sites = [kg.DesignSite((0.0, 1.0), 1.0, 0.1), kg.DesignSite((1.0, 0.5), 3.0, 0.2),
                 kg.DesignSite((0.4, 0.2), 2.0, 0.05)]
        model = kg.fit(sites)
        clone = kg.KrigingModel.from_json(model.to_json())
        assert clone.beta0 == pytest.approx(model.beta0, rel=1e-15)
        assert clone.tau2 == pytest.approx(model.tau2, rel=1e-15)
        for x0 in ((0.1, 0.1), (0.7, 0.9)):
            assert clone.predict(x0)[0] == pytest.approx(model.predict(x0)[0], rel=1e-12)
            assert clone.predict(x0)[1] == pytest.approx(model.predict(x0)[1], rel=1e-9)

    def test_version_checked(self):
        with pytest.raises(ValueError):
            kg.KrigingModel.from_json('{"format_version": 99, "sites": []}')
