"""Data model and frailty-integrated likelihood for joint count/status data.

Each subject is inspected exactly once, at a subject-specific monitoring
time.  The inspection yields the accumulated count of a recurring event
(current count) and an indicator of whether a terminal event has already
occurred (current status).  A shared multiplicative frailty with unit mean
and unknown variance links the two processes: given the frailty, the count
is Poisson with mean proportional to a baseline cumulative rate, and the
status indicator follows the survival function of a proportional-hazards
model.  Integrating the gamma frailty out in closed form gives the
per-subject likelihood implemented here.

The baseline cumulative rate of the count process is continuous and
piecewise linear between the distinct monitoring times; the baseline
cumulative hazard of the terminal event is a right-continuous step
function with one jump at each distinct monitoring time.  Both are
parameterized on the log scale so that every working parameter is
unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

__all__ = [
    "NumericError",
    "ParamVector",
    "Observation",
    "Dataset",
    "BaselineEstimates",
    "delta_increments",
    "eval_lambda10",
    "eval_lambda20",
    "log_likelihood_term",
    "log_likelihood_terms",
    "log_likelihood",
    "marginal_mean",
    "marginal_survival",
]

_LOG2 = math.log(2.0)


class NumericError(RuntimeError):
    """A numeric evaluation produced indeterminate values.

    Parameters
    ----------
    message : str
        Human-readable description.
    block : str, optional
        Name of the parameter block that triggered the failure, when it
        can be identified (``"phi_star"``, ``"nu"``, ``"beta1"``,
        ``"beta2"``, ``"psi_star"``).
    index : int or sequence of int, optional
        Offending observation index/indices, when applicable.
    """

    def __init__(self, message, block=None, index=None):
        detail = message
        if block is not None:
            detail += f" [block: {block}]"
        if index is not None:
            detail += f" [observation: {index}]"
        super().__init__(detail)
        self.block = block
        self.index = index


def _validate_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array of times")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid times must be finite")
    if grid[0] <= 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid times must be positive and strictly increasing")
    return grid


@dataclass(frozen=True)
class ParamVector:
    """Working-scale model parameters.

    Fields
    ------
    phi_star : array, length n'
        Log slopes of the piecewise-linear baseline cumulative rate.
    nu : array, length n'
        Log jump sizes of the baseline cumulative hazard.
    beta1 : array, length p
        Count-side regression coefficients.
    beta2 : array, length q
        Status-side regression coefficients.
    psi_star : float
        Log frailty variance.

    All blocks may be empty except ``psi_star``.  The flat layout is
    ``[phi_star, nu, beta1, beta2, psi_star]``.
    """

    phi_star: np.ndarray
    nu: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    psi_star: float

    def __post_init__(self):
        object.__setattr__(self, "phi_star", np.atleast_1d(np.asarray(self.phi_star, dtype=float)))
        object.__setattr__(self, "nu", np.atleast_1d(np.asarray(self.nu, dtype=float)))
        object.__setattr__(self, "beta1", np.atleast_1d(np.asarray(self.beta1, dtype=float)))
        object.__setattr__(self, "beta2", np.atleast_1d(np.asarray(self.beta2, dtype=float)))
        object.__setattr__(self, "psi_star", float(self.psi_star))
        if self.phi_star.shape != self.nu.shape:
            raise ValueError("phi_star and nu must have the same length")
        for name in ("phi_star", "nu", "beta1", "beta2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} entries must be finite")
        if not math.isfinite(self.psi_star):
            raise ValueError("psi_star must be finite")

    @property
    def n_prime(self):
        return self.phi_star.size

    @property
    def p(self):
        return self.beta1.size

    @property
    def q(self):
        return self.beta2.size

    @property
    def dim(self):
        return 2 * self.n_prime + self.p + self.q + 1

    def flatten(self):
        """Concatenate the blocks into one flat working vector."""
        return np.concatenate(
            [self.phi_star, self.nu, self.beta1, self.beta2, [self.psi_star]]
        )

    @classmethod
    def from_flat(cls, flat, n_prime, p, q):
        """Rebuild a :class:`ParamVector` from its flat layout."""
        flat = np.asarray(flat, dtype=float)
        expected = 2 * n_prime + p + q + 1
        if flat.shape != (expected,):
            raise ValueError(f"expected flat vector of length {expected}, got {flat.shape}")
        i = n_prime
        j = 2 * n_prime
        k = j + p
        m = k + q
        return cls(flat[:i], flat[i:j], flat[j:k], flat[k:m], flat[m])

    @staticmethod
    def labels(n_prime, p, q):
        """Column labels in flat order, e.g. ``phi_star_1 .. psi_star``."""
        out = [f"phi_star_{d}" for d in range(1, n_prime + 1)]
        out += [f"nu_{d}" for d in range(1, n_prime + 1)]
        out += [f"beta1_{j}" for j in range(1, p + 1)]
        out += [f"beta2_{j}" for j in range(1, q + 1)]
        out.append("psi_star")
        return out


@dataclass(frozen=True)
class Observation:
    """One subject: monitoring time, status, count, covariate rows."""

    u: float
    delta: int
    n_count: int
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "delta", int(self.delta))
        object.__setattr__(self, "n_count", int(self.n_count))
        object.__setattr__(self, "x1", np.atleast_1d(np.asarray(self.x1, dtype=float)))
        object.__setattr__(self, "x2", np.atleast_1d(np.asarray(self.x2, dtype=float)))
        if not (self.u > 0.0 and math.isfinite(self.u)):
            raise ValueError("monitoring time u must be positive and finite")
        if self.delta not in (0, 1):
            raise ValueError("delta must be 0 or 1")
        if self.n_count < 0:
            raise ValueError("n_count must be a nonnegative integer")


def _as_int_counts(values, what):
    arr = np.asarray(values)
    out = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{what} must be finite")
    rounded = np.rint(out)
    if np.any(np.abs(out - rounded) > 1e-9):
        raise ValueError(f"{what} must be integer-valued")
    return rounded.astype(np.int64)


class Dataset:
    """A cohort of single-inspection observations plus the time grid.

    The grid holds the distinct monitoring times that carry the baseline
    parameters.  Every observation's monitoring time must match a grid
    point (up to floating-point round-off of 1e-9 relative); times that
    match no grid point are rejected rather than moved.  Design matrices
    used by the likelihood are precomputed once here.
    """

    def __init__(self, observations, grid=None):
        obs = list(observations)
        if not obs:
            raise ValueError("dataset must contain at least one observation")
        u = np.array([o.u for o in obs], dtype=float)
        delta = np.array([o.delta for o in obs], dtype=np.int64)
        n_count = np.array([o.n_count for o in obs], dtype=np.int64)
        p = obs[0].x1.size
        q = obs[0].x2.size
        for i, o in enumerate(obs):
            if o.x1.size != p or o.x2.size != q:
                raise ValueError(f"observation {i} has inconsistent covariate dimensions")
        x1 = np.array([o.x1 for o in obs], dtype=float).reshape(len(obs), p)
        x2 = np.array([o.x2 for o in obs], dtype=float).reshape(len(obs), q)
        self._init_arrays(u, delta, n_count, x1, x2, grid)

    @classmethod
    def from_arrays(cls, u, delta, n_count, x1, x2, grid=None):
        """Build a dataset from column arrays without per-row objects."""
        self = cls.__new__(cls)
        u = np.asarray(u, dtype=float).ravel()
        n = u.size
        x1 = np.asarray(x1, dtype=float).reshape(n, -1)
        x2 = np.asarray(x2, dtype=float).reshape(n, -1)
        self._init_arrays(
            u,
            _as_int_counts(delta, "delta"),
            _as_int_counts(n_count, "n_count"),
            x1,
            x2,
            grid,
        )
        return self

    def _init_arrays(self, u, delta, n_count, x1, x2, grid):
        n = u.size
        if n == 0:
            raise ValueError("dataset must contain at least one observation")
        if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
            raise ValueError("monitoring times must be positive and finite")
        if np.any((delta != 0) & (delta != 1)):
            raise ValueError("delta entries must be 0 or 1")
        if np.any(n_count < 0):
            raise ValueError("n_count entries must be nonnegative")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise ValueError("covariates must be finite")

        if grid is None:
            grid = np.unique(u)
        grid = _validate_grid(grid)

        # every u must sit on a grid point; reject rather than snap
        gi = np.abs(u[:, None] - grid[None, :]).argmin(axis=1)
        tol = 1e-9 * np.maximum(1.0, np.abs(u))
        bad = np.abs(u - grid[gi]) > tol
        if np.any(bad):
            where = np.flatnonzero(bad)[:5].tolist()
            raise ValueError(
                f"monitoring times at rows {where} do not match any grid point"
            )
        u = grid[gi]

        self.u = u
        self.delta = delta.astype(np.int64)
        self.n_count = n_count.astype(np.int64)
        self.x1 = x1
        self.x2 = x2
        self.grid = grid
        self.n = n
        self.n_prime = grid.size
        self.p = x1.shape[1]
        self.q = x2.shape[1]

        prev = np.concatenate(([0.0], grid[:-1]))
        self._dmat = np.minimum(grid[None, :], u[:, None]) - np.minimum(prev[None, :], u[:, None])
        self._jmat = (grid[None, :] <= u[:, None]).astype(float)
        self._delta_bool = self.delta.astype(bool)
        uniq, inv = np.unique(self.n_count, return_inverse=True)
        self._uniq_counts = uniq
        self._count_inv = inv.reshape(-1)

    @cached_property
    def observations(self):
        return [
            Observation(self.u[i], self.delta[i], self.n_count[i], self.x1[i], self.x2[i])
            for i in range(self.n)
        ]

    def __len__(self):
        return self.n

    def __repr__(self):
        return (
            f"Dataset(n={self.n}, n_prime={self.n_prime}, p={self.p}, q={self.q}, "
            f"events={int(self.delta.sum())})"
        )


def delta_increments(t, grid):
    """Per-interval overlap of ``[0, t]`` with the grid partition.

    Entry ``d`` equals ``min(v_d, t) - min(v_{d-1}, t)`` with ``v_0 = 0``:
    the length of ``[0, t]`` falling in the ``d``-th interval.  Entries sum
    to ``min(t, v_max)`` and vanish for intervals entirely beyond ``t``.
    """
    grid = _validate_grid(grid)
    t = float(t)
    if t < 0.0 or not math.isfinite(t):
        raise ValueError("time t must be nonnegative and finite")
    prev = np.concatenate(([0.0], grid[:-1]))
    return np.minimum(grid, t) - np.minimum(prev, t)


def eval_lambda10(phi_star, grid, t):
    """Baseline cumulative rate of the count process at time ``t``.

    Piecewise linear: sum of ``exp(phi_star_d)`` times the interval
    overlaps from :func:`delta_increments`.  ``t`` may be a scalar or an
    array; the result matches its shape.
    """
    grid = _validate_grid(grid)
    phi_star = np.asarray(phi_star, dtype=float)
    if phi_star.shape != grid.shape:
        raise ValueError("phi_star must match the grid length")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("time t must be nonnegative and finite")
    prev = np.concatenate(([0.0], grid[:-1]))
    inc = np.minimum(grid, t_arr[..., None]) - np.minimum(prev, t_arr[..., None])
    out = inc @ np.exp(phi_star)
    return out if t_arr.ndim else float(out)


def eval_lambda20(nu, grid, t):
    """Baseline cumulative hazard of the terminal event at time ``t``.

    Right-continuous step function: sum of ``exp(nu_d)`` over grid points
    ``v_d <= t``.  ``t`` may be a scalar or an array.
    """
    grid = _validate_grid(grid)
    nu = np.asarray(nu, dtype=float)
    if nu.shape != grid.shape:
        raise ValueError("nu must match the grid length")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("time t must be nonnegative and finite")
    out = (grid <= t_arr[..., None]) @ np.exp(nu)
    return out if t_arr.ndim else float(out)


def _log1mexp(x):
    # log(1 - exp(-x)) for x >= 0, stable across both regimes
    with np.errstate(divide="ignore"):
        small = np.log(-np.expm1(-np.minimum(x, _LOG2)))
        large = np.log1p(-np.exp(-np.maximum(x, _LOG2)))
    return np.where(x < _LOG2, small, large)


def _check_block_finite(values, block):
    if not np.all(np.isfinite(values)):
        raise NumericError("overflow while exponentiating parameters", block=block)


def _loglik_rows(theta, dmat, jmat, x1, x2, delta_bool, n_count, uniq_counts, count_inv):
    """Per-observation log-likelihood terms; shared kernel."""
    eta1 = x1 @ theta.beta1 if theta.p else np.zeros(x1.shape[0])
    eta2 = x2 @ theta.beta2 if theta.q else np.zeros(x2.shape[0])
    with np.errstate(over="ignore"):
        phi = np.exp(theta.phi_star)
        enu = np.exp(theta.nu)
        e1 = np.exp(eta1)
        e2 = np.exp(eta2)
    _check_block_finite(phi, "phi_star")
    _check_block_finite(enu, "nu")
    _check_block_finite(e1, "beta1")
    _check_block_finite(e2, "beta2")
    psi = math.exp(theta.psi_star)
    inv_psi = math.exp(-theta.psi_star)
    if not (math.isfinite(psi) and math.isfinite(inv_psi)):
        raise NumericError("overflow while exponentiating parameters", block="psi_star")

    lam10 = dmat @ phi
    lam20 = jmat @ enu
    a = lam10 * e1
    b = lam20 * e2
    c = n_count + inv_psi

    # rising-factorial ratio Gamma(N + 1/psi) / Gamma(1/psi), via unique counts
    glr = (gammaln(uniq_counts + inv_psi) - gammaln(inv_psi))[count_inv]

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        count_term = n_count * (theta.psi_star + np.log(lam10) + eta1)
        log_one = np.log1p(psi * a)
        log_both = np.log1p(psi * (a + b))
        surv_term = -c * log_both
        gap = c * (log_both - log_one)
        event_term = -c * log_one + _log1mexp(gap)
        rows = glr + count_term + np.where(delta_bool, event_term, surv_term)

    if np.any(np.isnan(rows)):
        idx = np.flatnonzero(np.isnan(rows))[:5].tolist()
        raise NumericError("log-likelihood evaluated to NaN", index=idx)
    return rows


def log_likelihood_terms(theta, data):
    """Vector of per-observation log-likelihood terms for a dataset."""
    if theta.n_prime != data.n_prime or theta.p != data.p or theta.q != data.q:
        raise ValueError("parameter dimensions do not match the dataset")
    return _loglik_rows(
        theta,
        data._dmat,
        data._jmat,
        data.x1,
        data.x2,
        data._delta_bool,
        data.n_count,
        data._uniq_counts,
        data._count_inv,
    )


def log_likelihood(theta, data):
    """Total log-likelihood over the dataset.

    ``-inf`` is a legitimate value (a zero-probability configuration);
    NaN raises :class:`NumericError` with the offending rows attached.
    """
    return float(log_likelihood_terms(theta, data).sum())


def log_likelihood_term(theta, obs, grid):
    """Log-likelihood contribution of a single observation.

    The closed form integrates the unit-mean gamma frailty out of the
    Poisson count and the status survival probability.  Constant factors
    free of parameters (the count factorial) are dropped.  ``obs.u`` need
    not lie on the grid here; off-grid times simply use the baseline
    functions as defined.
    """
    grid = _validate_grid(grid)
    if theta.n_prime != grid.size:
        raise ValueError("parameter dimensions do not match the grid")
    if obs.x1.size != theta.p or obs.x2.size != theta.q:
        raise ValueError("observation covariates do not match the parameter dimensions")
    dmat = delta_increments(obs.u, grid)[None, :]
    jmat = (grid <= obs.u).astype(float)[None, :]
    rows = _loglik_rows(
        theta,
        dmat,
        jmat,
        obs.x1[None, :],
        obs.x2[None, :],
        np.array([bool(obs.delta)]),
        np.array([obs.n_count], dtype=np.int64),
        np.array([obs.n_count], dtype=np.int64),
        np.array([0]),
    )
    return float(rows[0])


@dataclass(frozen=True)
class BaselineEstimates:
    """Posterior point estimates of the two baseline functions.

    ``phi_hat`` holds positive per-interval rates (already back on the
    natural scale); ``nu_hat`` holds working-scale log jump sizes, so the
    hazard jumps are ``exp(nu_hat)``.
    """

    grid: np.ndarray
    phi_hat: np.ndarray
    nu_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _validate_grid(self.grid))
        object.__setattr__(self, "phi_hat", np.asarray(self.phi_hat, dtype=float))
        object.__setattr__(self, "nu_hat", np.asarray(self.nu_hat, dtype=float))
        if self.phi_hat.shape != self.grid.shape or self.nu_hat.shape != self.grid.shape:
            raise ValueError("estimate blocks must match the grid length")
        if np.any(self.phi_hat <= 0.0):
            raise ValueError("phi_hat rates must be positive")

    def cumulative_mean(self, t):
        """Estimated baseline cumulative rate at time(s) ``t``."""
        return eval_lambda10(np.log(self.phi_hat), self.grid, t)

    def cumulative_hazard(self, t):
        """Estimated baseline cumulative hazard at time(s) ``t``."""
        return eval_lambda20(self.nu_hat, self.grid, t)


def marginal_mean(t, x1, est, beta1_hat):
    """Marginal expected count at time ``t`` for covariates ``x1``."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    beta1_hat = np.atleast_1d(np.asarray(beta1_hat, dtype=float))
    if x1.shape != beta1_hat.shape:
        raise ValueError("x1 and beta1_hat must have the same length")
    return est.cumulative_mean(t) * math.exp(float(x1 @ beta1_hat))


def marginal_survival(t, x2, est, beta2_hat, psi_hat):
    """Marginal survival probability of the terminal event at time ``t``.

    Integrating the gamma frailty out of the conditional survival function
    gives ``(1 + psi * H(t))**(-1/psi)`` with ``H`` the covariate-scaled
    cumulative hazard; values live in ``(0, 1]`` and decrease in ``t``.
    """
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    beta2_hat = np.atleast_1d(np.asarray(beta2_hat, dtype=float))
    if x2.shape != beta2_hat.shape:
        raise ValueError("x2 and beta2_hat must have the same length")
    psi_hat = float(psi_hat)
    if psi_hat <= 0.0:
        raise ValueError("psi_hat must be positive")
    haz = est.cumulative_hazard(t) * math.exp(float(x2 @ beta2_hat))
    return np.exp(-np.log1p(psi_hat * haz) / psi_hat)
