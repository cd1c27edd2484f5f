import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.stats import gamma as gamma_dist

from statuscount import (
    BaselineEstimates,
    Dataset,
    NumericError,
    Observation,
    ParamVector,
    delta_increments,
    eval_lambda10,
    eval_lambda20,
    log_likelihood,
    log_likelihood_term,
    log_likelihood_terms,
    marginal_mean,
    marginal_survival,
)

from conftest import make_dataset


def frailty_quadrature_term(theta, obs, grid):
    """Independent oracle: integrate the frailty out numerically.

    Uses the full Poisson mass (including the factorial), then adds the
    factorial back since the closed form drops it.
    """
    a = eval_lambda10(theta.phi_star, grid, obs.u) * math.exp(float(obs.x1 @ theta.beta1))
    b = eval_lambda20(theta.nu, grid, obs.u) * math.exp(float(obs.x2 @ theta.beta2))
    psi = math.exp(theta.psi_star)

    def integrand(w):
        pois = (w * a) ** obs.n_count * math.exp(-w * a) / math.factorial(obs.n_count)
        surv = math.exp(-w * b)
        status = (1.0 - surv) if obs.delta else surv
        return pois * status * gamma_dist.pdf(w, 1.0 / psi, scale=psi)

    val, _ = quad(integrand, 0.0, np.inf, limit=200)
    return math.log(val) + math.lgamma(obs.n_count + 1)


class TestParamVector:
    def test_flatten_roundtrip(self):
        theta = ParamVector([0.1, -0.2], [0.3, 0.4], [1.0], [-1.0, 2.0], 0.5)
        flat = theta.flatten()
        assert flat.shape == (8,)
        back = ParamVector.from_flat(flat, 2, 1, 2)
        assert_allclose(back.flatten(), flat)
        assert back.dim == 8

    def test_flat_layout_order(self):
        theta = ParamVector([1.0], [2.0], [3.0], [4.0], 5.0)
        assert_allclose(theta.flatten(), [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_labels(self):
        labels = ParamVector.labels(2, 1, 1)
        assert labels == ["phi_star_1", "phi_star_2", "nu_1", "nu_2",
                          "beta1_1", "beta2_1", "psi_star"]

    def test_empty_covariate_blocks(self):
        theta = ParamVector(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), 0.7)
        assert theta.dim == 1
        assert_allclose(theta.flatten(), [0.7])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            ParamVector([np.nan], [0.0], [0.0], [0.0], 0.0)
        with pytest.raises(ValueError):
            ParamVector([0.0], [0.0], [0.0], [0.0], math.inf)

    def test_wrong_flat_length(self):
        with pytest.raises(ValueError):
            ParamVector.from_flat(np.zeros(4), 1, 1, 1)


class TestDeltaIncrements:
    def test_at_grid_point(self):
        grid = np.array([0.5, 1.0, 2.0])
        assert_allclose(delta_increments(1.0, grid), [0.5, 0.5, 0.0])

    def test_beyond_grid(self):
        grid = np.array([0.5, 1.0, 2.0])
        assert_allclose(delta_increments(5.0, grid), [0.5, 0.5, 1.0])

    def test_between_points(self):
        grid = np.array([0.5, 1.0, 2.0])
        assert_allclose(delta_increments(0.75, grid), [0.5, 0.25, 0.0])

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            delta_increments(-0.1, np.array([1.0]))

    @settings(max_examples=40, deadline=None)
    @given(
        t=st.floats(0.0, 10.0),
        raw=st.lists(st.floats(0.01, 5.0), min_size=1, max_size=6),
    )
    def test_increment_properties(self, t, raw):
        grid = np.unique(np.cumsum(np.asarray(raw)))
        inc = delta_increments(t, grid)
        assert np.all(inc >= 0.0)
        assert math.isclose(inc.sum(), min(t, grid[-1]), abs_tol=1e-12)


class TestBaselineEvaluators:
    def test_lambda10_piecewise_linear(self):
        grid = np.array([1.0, 2.0])
        phi_star = np.log(np.array([2.0, 3.0]))
        assert_allclose(eval_lambda10(phi_star, grid, 0.5), 1.0)
        assert_allclose(eval_lambda10(phi_star, grid, 1.0), 2.0)
        assert_allclose(eval_lambda10(phi_star, grid, 1.5), 3.5)
        assert_allclose(eval_lambda10(phi_star, grid, 3.0), 5.0)

    def test_lambda20_step(self):
        grid = np.array([1.0, 2.0])
        nu = np.log(np.array([0.5, 0.25]))
        assert eval_lambda20(nu, grid, 0.99) == 0.0
        assert_allclose(eval_lambda20(nu, grid, 1.0), 0.5)
        assert_allclose(eval_lambda20(nu, grid, 1.99), 0.5)
        assert_allclose(eval_lambda20(nu, grid, 2.0), 0.75)

    def test_vectorized_time(self):
        grid = np.array([1.0, 2.0])
        out = eval_lambda10(np.zeros(2), grid, np.array([0.5, 1.5]))
        assert_allclose(out, [0.5, 1.5])

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            eval_lambda10(np.zeros(2), np.array([1.0, 1.0]), 0.5)
        with pytest.raises(ValueError):
            eval_lambda20(np.zeros(1), np.array([-1.0]), 0.5)


class TestDataset:
    def test_grid_inferred_sorted_distinct(self):
        data = Dataset.from_arrays(
            u=[1.0, 0.5, 1.0], delta=[0, 1, 0], n_count=[1, 0, 2],
            x1=np.zeros((3, 1)), x2=np.zeros((3, 1)),
        )
        assert_allclose(data.grid, [0.5, 1.0])
        assert data.n_prime == 2

    def test_off_grid_time_rejected(self):
        with pytest.raises(ValueError, match="grid point"):
            Dataset.from_arrays(
                u=[0.7], delta=[0], n_count=[0],
                x1=np.zeros((1, 1)), x2=np.zeros((1, 1)),
                grid=np.array([0.5, 1.0]),
            )

    def test_explicit_grid_kept_even_if_unused(self):
        data = Dataset.from_arrays(
            u=[0.5, 0.5], delta=[0, 1], n_count=[0, 1],
            x1=np.zeros((2, 1)), x2=np.zeros((2, 1)),
            grid=np.array([0.5, 1.0]),
        )
        assert data.n_prime == 2

    def test_bad_delta_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(u=[1.0], delta=[2], n_count=[0],
                                x1=np.zeros((1, 1)), x2=np.zeros((1, 1)))

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(u=[1.0], delta=[0], n_count=[-1],
                                x1=np.zeros((1, 1)), x2=np.zeros((1, 1)))

    def test_observation_records(self):
        data = make_dataset(n=5)
        obs = data.observations
        assert len(obs) == 5
        assert obs[0].x1.shape == (1,)


class TestLikelihood:
    """Closed-form frailty integral against its fixed points and oracle."""

    grid1 = np.array([1.0])
    zero = ParamVector([0.0], [0.0], [0.0], [0.0], 0.0)

    def test_survivor_no_counts(self):
        # unit rates, unit frailty variance: survival with no events is 1/3
        obs = Observation(1.0, 0, 0, [0.0], [0.0])
        got = log_likelihood_term(self.zero, obs, self.grid1)
        assert_allclose(math.exp(got), 1.0 / 3.0, rtol=1e-12)

    def test_event_no_counts(self):
        obs = Observation(1.0, 1, 0, [0.0], [0.0])
        got = log_likelihood_term(self.zero, obs, self.grid1)
        assert_allclose(math.exp(got), 1.0 / 6.0, rtol=1e-12)

    def test_survivor_one_count(self):
        obs = Observation(1.0, 0, 1, [0.0], [0.0])
        got = log_likelihood_term(self.zero, obs, self.grid1)
        assert_allclose(math.exp(got), 1.0 / 9.0, rtol=1e-12)

    def test_matches_frailty_quadrature(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n_prime = int(rng.integers(1, 4))
            grid = np.sort(rng.uniform(0.2, 2.0, n_prime))
            while np.any(np.diff(grid) < 1e-3):
                grid = np.sort(rng.uniform(0.2, 2.0, n_prime))
            theta = ParamVector(
                rng.uniform(-1, 1, n_prime), rng.uniform(-2, 0, n_prime),
                rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1),
                rng.uniform(-1, 1),
            )
            obs = Observation(
                float(grid[rng.integers(0, n_prime)]),
                int(rng.integers(0, 2)), int(rng.integers(0, 6)),
                rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1),
            )
            want = frailty_quadrature_term(theta, obs, grid)
            got = log_likelihood_term(theta, obs, grid)
            assert_allclose(got, want, rtol=1e-6)

    def test_normalizes_over_outcomes(self):
        # summing the likelihood over delta and enough counts reaches one
        rng = np.random.default_rng(3)
        grid = np.array([0.4, 0.9])
        theta = ParamVector(rng.normal(size=2) * 0.3, rng.normal(size=2) * 0.3 - 1.0,
                            [0.4], [-0.3], -0.2)
        x1 = np.array([1.0])
        x2 = np.array([0.0])
        total = 0.0
        for delta in (0, 1):
            for count in range(200):
                obs = Observation(0.9, delta, count, x1, x2)
                ll = log_likelihood_term(theta, obs, grid)
                total += math.exp(ll - math.lgamma(count + 1))
        assert_allclose(total, 1.0, rtol=1e-10)

    def test_terms_match_scalar_op(self, tiny_data):
        theta = ParamVector(np.full(3, -0.3), np.full(3, -1.0), [0.2], [0.1], 0.1)
        rows = log_likelihood_terms(theta, tiny_data)
        for i in (0, 7, 23):
            obs = tiny_data.observations[i]
            assert_allclose(rows[i], log_likelihood_term(theta, obs, tiny_data.grid),
                            rtol=1e-12)
        assert_allclose(log_likelihood(theta, tiny_data), rows.sum(), rtol=1e-12)

    def test_stable_at_extreme_magnitudes(self):
        # log-space evaluation survives parameters that would overflow exp
        grid = np.array([1.0])
        theta = ParamVector([50.0], [50.0], [10.0], [10.0], 2.0)
        obs = Observation(1.0, 1, 3, [1.0], [1.0])
        got = log_likelihood_term(theta, obs, grid)
        assert math.isfinite(got)
        theta2 = ParamVector([-50.0], [-50.0], [-10.0], [-10.0], -3.0)
        got2 = log_likelihood_term(theta2, obs, grid)
        assert math.isfinite(got2)

    def test_event_before_first_jump_impossible(self):
        # status event with zero cumulative hazard has probability zero
        grid = np.array([1.0])
        obs = Observation(0.5, 1, 0, [0.0], [0.0])
        got = log_likelihood_term(self.zero, obs, grid)
        assert got == -math.inf

    def test_overflow_names_block(self):
        grid = np.array([1.0])
        obs = Observation(1.0, 0, 0, [0.0], [0.0])
        theta = ParamVector([800.0], [0.0], [0.0], [0.0], 0.0)
        with pytest.raises(NumericError) as err:
            log_likelihood_term(theta, obs, grid)
        assert err.value.block == "phi_star"

    def test_dimension_mismatch(self, tiny_data):
        theta = ParamVector([0.0], [0.0], [0.0], [0.0], 0.0)
        with pytest.raises(ValueError):
            log_likelihood_terms(theta, tiny_data)


class TestMarginals:
    est = BaselineEstimates(
        grid=np.array([0.5, 1.0]),
        phi_hat=np.array([1.0, 2.0]),
        nu_hat=np.log(np.array([0.3, 0.4])),
    )

    def test_marginal_mean_scales_with_covariates(self):
        base = marginal_mean(1.0, [0.0], self.est, [0.7])
        lifted = marginal_mean(1.0, [1.0], self.est, [0.7])
        assert_allclose(lifted / base, math.exp(0.7), rtol=1e-12)

    def test_marginal_survival_bounds_and_monotone(self):
        times = np.linspace(0.0, 2.0, 50)
        surv = marginal_survival(times, [0.5], self.est, [0.3], 1.2)
        assert np.all(surv <= 1.0) and np.all(surv > 0.0)
        assert np.all(np.diff(surv) <= 1e-12)
        assert_allclose(surv[0], 1.0)

    def test_marginal_survival_closed_form(self):
        psi = 0.8
        t = 1.0
        haz = 0.7 * math.exp(0.3)
        want = (1.0 + psi * haz) ** (-1.0 / psi)
        got = marginal_survival(t, [1.0], self.est, [0.3], psi)
        assert_allclose(got, want, rtol=1e-12)

    def test_positive_psi_required(self):
        with pytest.raises(ValueError):
            marginal_survival(1.0, [0.0], self.est, [0.0], 0.0)
