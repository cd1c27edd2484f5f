import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from statuscount import (
    Dataset,
    KL_FLAG_THRESHOLD,
    MCMCConfig,
    Observation,
    ParamVector,
    compute_influence,
    cpo,
    dic,
    ess_and_acf,
    gelman_rubin,
    kl_influence,
    log_likelihood,
    lpml,
)
from statuscount.diagnostics import deviance
from statuscount.sampler import Chain


def fake_chain(draws, n_prime, p, q):
    draws = np.asarray(draws, dtype=float)
    cfg = MCMCConfig(iterations=100, burn_in=10, seed=0)
    return Chain(
        draws=draws,
        labels=ParamVector.labels(n_prime, p, q),
        acceptance_rate=0.3,
        map_point=ParamVector.from_flat(draws[0], n_prime, p, q),
        proposal_cov_final=np.eye(draws.shape[1]),
        config=cfg,
        n_prime=n_prime,
        p=p,
        q=q,
    )


def single_subject_data():
    """One censored subject with zero counts on a unit grid.

    With all working parameters at zero its likelihood is 1/3, and with
    the rate and jump parameters at log(2.5) it is 1/6, so a two-draw
    chain over those points has likelihood ratio exactly one half.
    """
    obs = Observation(1.0, 0, 0, np.zeros(0), np.zeros(0))
    return Dataset([obs], grid=[1.0])


TWO_DRAW_KL = math.log(3.0) - 1.5 * math.log(2.0)  # about 0.0589


class TestDic:
    def test_identity_holds_bitwise(self, tiny_chain, tiny_data):
        val, p_d, dev_bar, dev_at_mean = dic(tiny_chain, tiny_data)
        assert val == dev_at_mean + 2.0 * p_d
        assert p_d == dev_bar - dev_at_mean
        assert val == 2.0 * dev_bar - dev_at_mean

    def test_constant_chain_has_zero_complexity(self):
        data = single_subject_data()
        draws = np.tile([0.1, -0.3, 0.2], (4, 1))
        val, p_d, dev_bar, dev_at_mean = dic(fake_chain(draws, 1, 0, 0), data)
        assert p_d == 0.0
        assert val == dev_bar == dev_at_mean

    def test_deviance_is_minus_twice_loglik(self):
        data = single_subject_data()
        theta = ParamVector([0.0], [0.0], np.zeros(0), np.zeros(0), 0.0)
        assert deviance(theta, data) == -2.0 * log_likelihood(theta, data)
        assert_allclose(deviance(theta, data), 2.0 * math.log(3.0), rtol=1e-12)

    def test_negative_pd_warns(self):
        # likelihood of a zero-count censored subject rises with the
        # frailty variance, so the mean of two extreme draws beats the
        # midpoint and the effective parameter count goes negative
        data = single_subject_data()
        draws = np.array([[0.0, 0.0, -3.0], [0.0, 0.0, 3.0]])
        with pytest.warns(UserWarning, match="p_d"):
            _, p_d, _, _ = dic(fake_chain(draws, 1, 0, 0), data)
        assert p_d < 0.0

    def test_dimension_mismatch(self, tiny_chain):
        data = single_subject_data()
        with pytest.raises(ValueError):
            dic(tiny_chain, data)


class TestCpo:
    def test_two_draw_harmonic_mean(self):
        data = single_subject_data()
        r = math.log(2.5)
        draws = np.array([[0.0, 0.0, 0.0], [r, r, 0.0]])
        values = cpo(fake_chain(draws, 1, 0, 0), data)
        # harmonic mean of 1/3 and 1/6 is 2/9
        assert_allclose(values, [2.0 / 9.0], rtol=1e-12)

    def test_constant_chain_recovers_likelihood(self):
        data = single_subject_data()
        draws = np.tile([0.0, 0.0, 0.0], (8, 1))
        values = cpo(fake_chain(draws, 1, 0, 0), data)
        assert_allclose(values, [1.0 / 3.0], rtol=1e-15)

    def test_values_positive_and_bounded_for_small_counts(self, tiny_chain, tiny_data):
        values = cpo(tiny_chain, tiny_data)
        assert values.shape == (tiny_data.n,)
        assert np.all(values > 0.0)
        assert np.all(np.isfinite(values))
        # the likelihood term is a genuine outcome probability only when
        # the dropped count constant is one, i.e. for counts of 0 or 1
        small = np.array([o.n_count <= 1 for o in tiny_data.observations])
        assert np.all(values[small] <= 1.0)

    def test_lpml_sums_logs(self, tiny_chain, tiny_data):
        values = cpo(tiny_chain, tiny_data)
        assert_allclose(lpml(values), np.log(values).sum(), rtol=1e-15)

    def test_lpml_validation(self):
        with pytest.raises(ValueError):
            lpml([0.5, 0.0])
        with pytest.raises(ValueError):
            lpml([0.5, math.nan])


class TestKlInfluence:
    def test_two_draw_hand_value(self):
        data = single_subject_data()
        r = math.log(2.5)
        draws = np.array([[0.0, 0.0, 0.0], [r, r, 0.0]])
        chain = fake_chain(draws, 1, 0, 0)
        kl = kl_influence(chain, data, cpo(chain, data))
        assert_allclose(kl, [TWO_DRAW_KL], rtol=1e-12)

    def test_constant_chain_is_exactly_zero(self):
        data = single_subject_data()
        draws = np.tile([0.2, -0.1, 0.4], (4, 1))
        chain = fake_chain(draws, 1, 0, 0)
        kl = kl_influence(chain, data, cpo(chain, data))
        assert kl[0] == 0.0

    def test_nonnegative_on_real_fit(self, tiny_chain, tiny_data):
        kl = kl_influence(tiny_chain, tiny_data, cpo(tiny_chain, tiny_data))
        assert np.all(kl >= 0.0)

    def test_length_validated(self, tiny_chain, tiny_data):
        with pytest.raises(ValueError):
            kl_influence(tiny_chain, tiny_data, np.array([0.5]))


class TestComputeInfluence:
    def test_matches_componentwise_functions(self, tiny_chain, tiny_data):
        report = compute_influence(tiny_chain, tiny_data)
        values = cpo(tiny_chain, tiny_data)
        assert_allclose(report.cpo_values, values, rtol=1e-13)
        assert_allclose(report.kl, kl_influence(tiny_chain, tiny_data, values),
                        rtol=1e-12, atol=1e-13)
        assert_allclose(report.lpml, lpml(values), rtol=1e-13)
        val, p_d, dev_bar, dev_at_mean = dic(tiny_chain, tiny_data)
        assert_allclose(report.dic, val, rtol=1e-13)
        assert_allclose(report.p_d, p_d, rtol=1e-13, atol=1e-10)
        assert report.threshold == KL_FLAG_THRESHOLD

    def test_flagging(self):
        data = single_subject_data()
        r = math.log(2.5)
        draws = np.array([[0.0, 0.0, 0.0], [r, r, 0.0]])
        report = compute_influence(fake_chain(draws, 1, 0, 0), data,
                                   threshold=0.05)
        assert report.flagged[0]
        report = compute_influence(fake_chain(draws, 1, 0, 0), data,
                                   threshold=0.06)
        assert not report.flagged[0]

    def test_default_threshold_value(self):
        assert KL_FLAG_THRESHOLD == 0.223


class TestGelmanRubin:
    def make(self, rows, seed=0, shift=0.0):
        rng = np.random.default_rng(seed)
        draws = rng.normal(size=(rows, 3)) + shift
        return fake_chain(draws, 1, 0, 0)

    def test_direct_formula_oracle(self):
        chains = [self.make(200, seed=s) for s in range(3)]
        psrf = gelman_rubin(chains)
        stacked = np.stack([c.draws for c in chains])
        m, length, dim = stacked.shape
        for j in range(dim):
            w = stacked[:, :, j].var(axis=1, ddof=1).mean()
            b = length * stacked[:, :, j].mean(axis=1).var(ddof=1)
            v = (length - 1) / length * w + (m + 1) / (m * length) * b
            assert_allclose(psrf[j], math.sqrt(v / w), rtol=1e-12)

    def test_identical_chains_near_one(self):
        one = self.make(1000, seed=4)
        psrf = gelman_rubin([one, one, one])
        # zero between-chain variance: PSRF is sqrt((L-1)/L), just under 1
        assert_allclose(psrf, math.sqrt(999.0 / 1000.0), rtol=1e-12)

    def test_separated_chains_flagged(self):
        chains = [self.make(500, seed=s, shift=3.0 * s) for s in range(3)]
        assert np.all(gelman_rubin(chains) > 1.5)

    def test_constant_chains(self):
        same = fake_chain(np.ones((50, 3)), 1, 0, 0)
        assert_allclose(gelman_rubin([same, same]), 1.0)
        other = fake_chain(2.0 * np.ones((50, 3)), 1, 0, 0)
        assert np.all(np.isinf(gelman_rubin([same, other])))

    def test_validation(self):
        one = self.make(100)
        with pytest.raises(ValueError):
            gelman_rubin([one])
        short = self.make(50)
        with pytest.raises(ValueError):
            gelman_rubin([one, short])
        other_layout = fake_chain(np.zeros((100, 5)), 1, 1, 1)
        with pytest.raises(ValueError):
            gelman_rubin([one, other_layout])


class TestEssAndAcf:
    def test_iid_draws(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=4000)
        ess, acf = ess_and_acf(x, max_lag=100)
        assert acf[0] == 1.0
        assert abs(ess - 4000) < 0.15 * 4000
        assert acf.shape == (101,)

    def test_ar1_integrated_time(self):
        # AR(1) with coefficient r has integrated time (1 + r) / (1 - r)
        r = 0.6
        rng = np.random.default_rng(21)
        eps = rng.normal(size=30000)
        x = np.empty_like(eps)
        x[0] = eps[0]
        for t in range(1, eps.size):
            x[t] = r * x[t - 1] + eps[t]
        ess, acf = ess_and_acf(x, max_lag=200)
        tau_true = (1 + r) / (1 - r)
        assert abs(x.size / ess - tau_true) < 0.2 * tau_true
        assert_allclose(acf[1], r, atol=0.05)

    def test_constant_draws(self):
        with pytest.warns(UserWarning, match="constant"):
            ess, acf = ess_and_acf(np.full(60, 2.5), max_lag=10)
        assert ess == 60.0
        assert acf[0] == 1.0
        assert_allclose(acf[1:], 0.0, atol=1e-300)

    def test_antithetic_draws_floor_at_s0(self):
        # perfect alternation: every autocorrelation pair nets to 1/s0,
        # so the truncated sum never reaches one and the floor applies
        x = np.tile([1.0, -1.0], 50)
        with pytest.warns(UserWarning, match="independent"):
            ess, _ = ess_and_acf(x, max_lag=11)
        assert ess == 100.0

    def test_validation(self):
        x = np.arange(20.0)
        with pytest.raises(ValueError):
            ess_and_acf(x, max_lag=0)
        with pytest.raises(ValueError):
            ess_and_acf(x, max_lag=20)
