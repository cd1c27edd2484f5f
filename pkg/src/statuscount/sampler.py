"""Posterior computation: MAP search and adaptive random-walk Metropolis.

The pipeline mirrors common practice for low-dimensional semiparametric
posteriors: find the posterior mode with a quasi-Newton search, seed a
Gaussian random-walk proposal with the inverse of the negated
finite-difference Hessian at the mode, then let the proposal covariance
adapt to the history of the chain at a fixed cadence.  All randomness
flows through one seeded generator, so a run is reproducible from its
configuration alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .model import NumericError, ParamVector
from .priors import log_posterior

__all__ = [
    "MCMCConfig",
    "Chain",
    "find_map",
    "observed_information",
    "run_adaptive_mh",
    "run_fit",
]

_PENALTY = 1e100
_HAARIO_FACTOR = 2.38 ** 2


@dataclass(frozen=True)
class MCMCConfig:
    """Settings for one sampler run.

    ``adapt_window`` of ``None`` means the proposal covariance is
    re-estimated from the full chain history; an integer keeps only that
    many most recent states.  ``proposal_scale`` multiplies the proposal
    covariance as a whole.  ``jitter`` both regularizes the adapted
    covariance and floors the eigenvalues of the mode-based covariance.
    """

    iterations: int
    burn_in: int
    thin: int = 1
    adapt_start: int = 1000
    adapt_interval: int = 500
    adapt_window: int | None = None
    proposal_scale: float = 1.0
    jitter: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if (self.iterations - self.burn_in) // self.thin < 10:
            raise ValueError("fewer than ten retained draws; lengthen the run or thin less")
        if self.adapt_start < 1 or self.adapt_interval < 1:
            raise ValueError("adapt_start and adapt_interval must be positive")
        if self.adapt_window is not None and self.adapt_window < 2:
            raise ValueError("adapt_window must be at least 2 when given")
        if not self.proposal_scale > 0.0:
            raise ValueError("proposal_scale must be positive")
        if not self.jitter > 0.0:
            raise ValueError("jitter must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class Chain:
    """Thinned post-burn-in draws plus run metadata.

    ``draws`` has one row per retained state and one column per working
    parameter in flat order.  ``proposal_cov_final`` is the proposal
    covariance in force when the run ended, before ``proposal_scale``.
    """

    draws: np.ndarray
    labels: list[str]
    acceptance_rate: float
    map_point: ParamVector
    proposal_cov_final: np.ndarray
    config: MCMCConfig
    n_prime: int
    p: int
    q: int
    warnings: list[str] = field(default_factory=list)

    @property
    def s0(self):
        return self.draws.shape[0]

    def column(self, label):
        """Draws of one working parameter, selected by its label."""
        try:
            idx = self.labels.index(label)
        except ValueError:
            raise KeyError(f"no parameter labelled {label!r}") from None
        return self.draws[:, idx]

    def block(self, name):
        """Draw matrix of one block: phi_star, nu, beta1, beta2, psi_star."""
        i, j = {
            "phi_star": (0, self.n_prime),
            "nu": (self.n_prime, 2 * self.n_prime),
            "beta1": (2 * self.n_prime, 2 * self.n_prime + self.p),
            "beta2": (2 * self.n_prime + self.p, 2 * self.n_prime + self.p + self.q),
            "psi_star": (2 * self.n_prime + self.p + self.q,
                         2 * self.n_prime + self.p + self.q + 1),
        }[name]
        return self.draws[:, i:j]

    def mean_vector(self):
        """Working-scale posterior means as a :class:`ParamVector`."""
        return ParamVector.from_flat(self.draws.mean(axis=0), self.n_prime, self.p, self.q)


def _flat_target(target, n_prime, p, q):
    def f(x):
        return target(ParamVector.from_flat(x, n_prime, p, q))

    return f


def _fd_gradient(f, x, rel_step=1e-5):
    """Central-difference gradient with per-coordinate steps.

    The step for coordinate k is ``max(rel_step, rel_step * |x_k|)``.
    """
    x = np.asarray(x, dtype=float)
    h = rel_step * np.maximum(1.0, np.abs(x))
    g = np.empty_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        g[k] = (f(xp) - f(xm)) / (2.0 * h[k])
    return g


def _fd_hessian(f, x, rel_step=1e-4):
    """Symmetric central-difference Hessian.

    A larger relative step than the gradient's is used: second differences
    lose roughly half the working precision to cancellation, and 1e-4
    balances that against truncation for smooth targets.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    hess = np.empty((d, d))
    f0 = f(x)
    for k in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        hess[k, k] = (f(xp) - 2.0 * f0 + f(xm)) / (h[k] * h[k])
    for k in range(d):
        for j in range(k + 1, d):
            pp = x.copy()
            pm = x.copy()
            mp = x.copy()
            mm = x.copy()
            pp[k] += h[k]
            pp[j] += h[j]
            pm[k] += h[k]
            pm[j] -= h[j]
            mp[k] -= h[k]
            mp[j] += h[j]
            mm[k] -= h[k]
            mm[j] -= h[j]
            val = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[k] * h[j])
            hess[k, j] = val
            hess[j, k] = val
    return hess


def find_map(target, init, extra_starts=(), *, max_iter=500):
    """Posterior mode by quasi-Newton search with finite-difference gradients.

    Runs one search per distinct starting point (``init`` plus
    ``extra_starts``) and keeps the best final value.  Non-finite target
    values during a search are replaced by a large penalty so the line
    search can back off; a non-finite value at a starting point itself is
    an error.  The returned point satisfies a scaled first-order condition
    or a warning is emitted.
    """
    dims = (init.n_prime, init.p, init.q)
    raw = _flat_target(target, *dims)

    def neg(x):
        try:
            v = raw(x)
        except NumericError:
            return _PENALTY
        if not math.isfinite(v):
            return _PENALTY
        return -v

    def neg_grad(x):
        return _fd_gradient(neg, x)

    starts = [init.flatten()]
    for s in extra_starts:
        if (s.n_prime, s.p, s.q) != dims:
            raise ValueError("extra starts must match the dimensions of init")
        fs = s.flatten()
        if not any(np.array_equal(fs, t) for t in starts):
            starts.append(fs)

    best_x = None
    best_f = math.inf
    for x0 in starts:
        f0 = neg(x0)
        if f0 >= _PENALTY:
            raise NumericError("target is not finite at a starting point")
        x = x0
        fx = f0
        for _ in range(3):
            res = minimize(
                neg, x, jac=neg_grad, method="BFGS",
                options={"gtol": 1e-6 * (1.0 + abs(fx)), "maxiter": max_iter},
            )
            x = res.x
            fx = res.fun
            gnorm = float(np.linalg.norm(_fd_gradient(neg, x)))
            if gnorm <= 1e-4 * (1.0 + abs(fx)):
                break
        if fx < best_f:
            best_x = x
            best_f = fx

    if best_x is None or best_f >= _PENALTY:
        raise NumericError("mode search failed to find a finite target value")
    gnorm = float(np.linalg.norm(_fd_gradient(neg, best_x)))
    if gnorm > 1e-4 * (1.0 + abs(best_f)):
        warnings.warn(
            f"mode search stopped with gradient norm {gnorm:.3e}; "
            "treat the mode as approximate",
            stacklevel=2,
        )
    return ParamVector.from_flat(best_x, *dims)


def observed_information(target, at, jitter=1e-6):
    """Covariance from the curvature of ``target`` at a point.

    Computes the finite-difference Hessian, symmetrizes and negates it,
    and inverts by eigendecomposition.  Directions with non-positive
    curvature, and any variance below ``jitter``, are floored at
    ``jitter``, so the result is always symmetric positive definite.
    """
    raw = _flat_target(target, at.n_prime, at.p, at.q)

    def f(x):
        v = raw(x)
        if not math.isfinite(v):
            raise NumericError("target not finite during Hessian evaluation")
        return v

    hess = _fd_hessian(f, at.flatten())
    if not np.all(np.isfinite(hess)):
        raise NumericError("finite-difference Hessian is not finite")
    info = -0.5 * (hess + hess.T)
    lam, vec = np.linalg.eigh(info)
    with np.errstate(divide="ignore"):
        var = np.where(lam > 0.0, 1.0 / np.maximum(lam, 1e-300), jitter)
    var = np.maximum(var, jitter)
    cov = (vec * var) @ vec.T
    return 0.5 * (cov + cov.T)


def run_adaptive_mh(target, config, init, proposal_cov=None):
    """Adaptive Gaussian random-walk Metropolis sampling.

    Starts at ``init`` (recorded as the chain's mode point) and proposes
    from a normal centred at the current state.  Every
    ``config.adapt_interval`` iterations from ``config.adapt_start`` on,
    the proposal covariance is re-estimated as the empirical covariance
    of the chain history (all of it, or the last ``adapt_window`` states)
    scaled by 2.38**2 / dim, plus ``jitter`` times the identity.
    Candidates whose target is NaN, -inf, or raises
    :class:`~statuscount.model.NumericError` are rejected.

    Returns a :class:`Chain` whose rows are the states at iterations
    ``burn_in + thin, burn_in + 2*thin, ...``; the acceptance rate is
    computed over post-burn-in proposals only.
    """
    dims = (init.n_prime, init.p, init.q)
    dim = init.dim
    if config.adapt_start < 2 * dim:
        raise ValueError("adapt_start must be at least twice the parameter dimension")
    raw = _flat_target(target, *dims)

    def logpost(x):
        try:
            v = raw(x)
        except NumericError:
            return -math.inf
        return v if not math.isnan(v) else -math.inf

    cur = init.flatten()
    lp_cur = logpost(cur)
    if not math.isfinite(lp_cur):
        raise NumericError("target is not finite at the chain start")

    if proposal_cov is None:
        base = np.eye(dim) * (_HAARIO_FACTOR / dim)
    else:
        base = np.asarray(proposal_cov, dtype=float)
        if base.shape != (dim, dim):
            raise ValueError("proposal_cov shape does not match the parameter dimension")
    try:
        chol = np.linalg.cholesky(base * config.proposal_scale)
    except np.linalg.LinAlgError as exc:
        raise NumericError("initial proposal covariance is not positive definite") from exc

    rng = np.random.default_rng(config.seed)
    factor = _HAARIO_FACTOR / dim
    jitter_eye = config.jitter * np.eye(dim)
    history = np.empty((config.iterations + 1, dim))
    history[0] = cur
    accepted_post = 0
    streak = 0
    notes = []

    for s in range(1, config.iterations + 1):
        cand = cur + chol @ rng.standard_normal(dim)
        lp_cand = logpost(cand)
        log_u = math.log(rng.random()) if lp_cand > -math.inf else 0.0
        if lp_cand > -math.inf and log_u <= lp_cand - lp_cur:
            cur = cand
            lp_cur = lp_cand
            if s > config.burn_in:
                accepted_post += 1
            streak = 0
        else:
            streak += 1
            if streak == config.adapt_interval:
                notes.append(
                    f"all proposals rejected for {streak} consecutive iterations "
                    f"(up to iteration {s})"
                )
        history[s] = cur
        if s >= config.adapt_start and (s - config.adapt_start) % config.adapt_interval == 0:
            lo = 0 if config.adapt_window is None else max(0, s + 1 - config.adapt_window)
            emp = np.cov(history[lo:s + 1], rowvar=False)
            base = factor * emp + jitter_eye
            chol = np.linalg.cholesky(base * config.proposal_scale)

    keep = np.arange(config.burn_in + config.thin, config.iterations + 1, config.thin)
    post_proposals = config.iterations - config.burn_in
    rate = accepted_post / post_proposals
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return Chain(
        draws=history[keep].copy(),
        labels=ParamVector.labels(*dims),
        acceptance_rate=rate,
        map_point=init,
        proposal_cov_final=base,
        config=config,
        n_prime=dims[0],
        p=dims[1],
        q=dims[2],
        warnings=notes,
    )


def run_fit(data, prior, config, init=None):
    """Full posterior pipeline for a dataset and prior.

    Mode search starts from ``init`` (defaulting to the prior means) with
    the prior means always included as an extra start; the mode-based
    covariance seeds the adaptive walk.
    """
    if (data.n_prime, data.p, data.q) != (prior.n_prime, prior.p, prior.q):
        raise ValueError("dataset and prior dimensions do not match")

    def target(theta):
        return log_posterior(theta, data, prior)

    mean = prior.mean_vector()
    if init is None:
        init = mean
    mode = find_map(target, init, extra_starts=(mean,))
    cov0 = observed_information(target, mode, jitter=config.jitter)
    return run_adaptive_mh(target, config, mode, proposal_cov=cov0)
