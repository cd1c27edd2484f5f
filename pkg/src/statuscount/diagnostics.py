"""Model comparison, case influence, and convergence diagnostics.

Model comparison uses the deviance information criterion with the
plug-in deviance evaluated at working-scale posterior means, and the log
pseudo marginal likelihood built from per-observation conditional
predictive ordinates.  Case influence is the Kullback-Leibler divergence
between the full posterior and the posterior with one observation
removed, computable from the same per-draw likelihood terms.  Convergence
checks are the potential scale reduction factor across parallel chains
and an autocorrelation-based effective sample size per parameter.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import NumericError, ParamVector, log_likelihood, log_likelihood_terms

__all__ = [
    "KL_FLAG_THRESHOLD",
    "InfluenceReport",
    "deviance",
    "dic",
    "cpo",
    "lpml",
    "kl_influence",
    "compute_influence",
    "gelman_rubin",
    "ess_and_acf",
]

# calibration point: an influence this large moves a symmetric-coin
# probability from 0.5 to about 0.814
KL_FLAG_THRESHOLD = 0.223


def _term_matrix(chain, data):
    """Per-draw, per-observation log-likelihood terms, shape (s0, n)."""
    if (chain.n_prime, chain.p, chain.q) != (data.n_prime, data.p, data.q):
        raise ValueError("chain and dataset dimensions do not match")
    out = np.empty((chain.s0, data.n))
    for s in range(chain.s0):
        theta = ParamVector.from_flat(chain.draws[s], chain.n_prime, chain.p, chain.q)
        out[s] = log_likelihood_terms(theta, data)
    return out


def deviance(theta, data):
    """Minus twice the total log-likelihood."""
    return -2.0 * log_likelihood(theta, data)


def dic(chain, data):
    """Deviance information criterion from a fitted chain.

    Returns ``(dic, p_d, dev_bar, dev_at_mean)`` where ``dev_bar`` is the
    posterior mean deviance, ``dev_at_mean`` the deviance at the
    working-scale posterior means, ``p_d`` their difference, and
    ``dic = dev_at_mean + 2 * p_d``.  A negative ``p_d`` (possible for
    badly mixed or multimodal chains) is reported as-is with a warning.
    """
    terms = _term_matrix(chain, data)
    dev_bar = float(-2.0 * terms.sum(axis=1).mean())
    dev_at_mean = deviance(chain.mean_vector(), data)
    p_d = dev_bar - dev_at_mean
    if p_d < 0.0:
        warnings.warn(
            f"effective parameter count p_d = {p_d:.4g} is negative; "
            "interpret the DIC with caution",
            stacklevel=2,
        )
    return dev_at_mean + 2.0 * p_d, p_d, dev_bar, dev_at_mean


def cpo(chain, data):
    """Conditional predictive ordinate per observation.

    The harmonic-mean identity is evaluated in log space (a shifted
    log-sum-exp over minus the per-draw log likelihood terms), so small
    likelihoods cannot underflow on the way in.  A subject whose
    likelihood vanishes in every draw still yields zero and is reported
    as a numeric error.
    """
    terms = _term_matrix(chain, data)
    neg = -terms
    shift = neg.max(axis=0)
    if not np.all(np.isfinite(shift)):
        bad = np.flatnonzero(~np.isfinite(shift))[:5].tolist()
        raise NumericError("likelihood vanished in some draw", index=bad)
    log_cpo = -(shift + np.log(np.mean(np.exp(neg - shift), axis=0)))
    values = np.exp(log_cpo)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        bad = np.flatnonzero((values <= 0.0) | ~np.isfinite(values))[:5].tolist()
        raise NumericError("conditional predictive ordinate underflowed", index=bad)
    return values


def lpml(cpo_values):
    """Log pseudo marginal likelihood: the sum of log ordinates."""
    cpo_values = np.asarray(cpo_values, dtype=float)
    if np.any(cpo_values <= 0.0) or not np.all(np.isfinite(cpo_values)):
        raise ValueError("cpo values must be positive and finite")
    return float(np.log(cpo_values).sum())


def kl_influence(chain, data, cpo_values):
    """Kullback-Leibler case-deletion influence per observation.

    Equals the posterior mean of each observation's log-likelihood term
    minus its log conditional predictive ordinate.  Tiny negative values
    (above -1e-10) from floating-point cancellation are clamped to zero;
    anything more negative is left alone, as it signals a real problem.
    """
    cpo_values = np.asarray(cpo_values, dtype=float)
    if cpo_values.shape != (data.n,):
        raise ValueError("cpo_values length does not match the dataset")
    terms = _term_matrix(chain, data)
    kl = terms.mean(axis=0) - np.log(cpo_values)
    kl = np.where((kl < 0.0) & (kl > -1e-10), 0.0, kl)
    return kl


@dataclass(frozen=True)
class InfluenceReport:
    """Case-influence and model-comparison numbers for one fit."""

    cpo_values: np.ndarray
    kl: np.ndarray
    flagged: np.ndarray
    lpml: float
    dic: float
    p_d: float
    dev_bar: float
    dev_at_mean: float
    threshold: float


def compute_influence(chain, data, threshold=KL_FLAG_THRESHOLD):
    """Assemble the full influence report with one likelihood sweep."""
    terms = _term_matrix(chain, data)
    neg = -terms
    shift = neg.max(axis=0)
    log_cpo = -(shift + np.log(np.mean(np.exp(neg - shift), axis=0)))
    values = np.exp(log_cpo)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        bad = np.flatnonzero((values <= 0.0) | ~np.isfinite(values))[:5].tolist()
        raise NumericError("conditional predictive ordinate underflowed", index=bad)
    kl = terms.mean(axis=0) - log_cpo
    kl = np.where((kl < 0.0) & (kl > -1e-10), 0.0, kl)
    dev_bar = float(-2.0 * terms.sum(axis=1).mean())
    dev_at_mean = deviance(chain.mean_vector(), data)
    p_d = dev_bar - dev_at_mean
    if p_d < 0.0:
        warnings.warn(
            f"effective parameter count p_d = {p_d:.4g} is negative; "
            "interpret the DIC with caution",
            stacklevel=2,
        )
    return InfluenceReport(
        cpo_values=values,
        kl=kl,
        flagged=kl > threshold,
        lpml=float(np.log(values).sum()),
        dic=dev_at_mean + 2.0 * p_d,
        p_d=p_d,
        dev_bar=dev_bar,
        dev_at_mean=dev_at_mean,
        threshold=threshold,
    )


def gelman_rubin(chains):
    """Potential scale reduction factor per parameter across chains.

    Implements the classic split between within-chain and between-chain
    variance with the (m + 1) / m correction; values near one indicate the
    chains are sampling the same distribution.
    """
    if len(chains) < 2:
        raise ValueError("need at least two chains")
    lengths = {c.s0 for c in chains}
    if len(lengths) != 1:
        raise ValueError("chains must have equal retained length")
    labels = chains[0].labels
    for c in chains[1:]:
        if c.labels != labels:
            raise ValueError("chains must share the same parameter layout")
    length = lengths.pop()
    if length < 2:
        raise ValueError("chains must retain at least two draws")
    m = len(chains)
    stacked = np.stack([c.draws for c in chains])  # (m, length, dim)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    means = stacked.mean(axis=1)
    between = length * means.var(axis=0, ddof=1)
    psrf = np.empty(len(labels))
    for j in range(len(labels)):
        if within[j] == 0.0:
            psrf[j] = 1.0 if between[j] == 0.0 else math.inf
            continue
        v_hat = (length - 1) / length * within[j] + (m + 1) / (m * length) * between[j]
        psrf[j] = math.sqrt(v_hat / within[j])
    return psrf


def ess_and_acf(draws, max_lag):
    """Effective sample size and autocorrelations for one parameter.

    The integrated autocorrelation time sums empirical autocorrelations
    pairwise and truncates at the first non-positive pair (an
    initial-positive-sequence rule).  A constant column gets ESS equal to
    the number of draws, a zero autocorrelation tail, and a warning.
    """
    x = np.asarray(draws, dtype=float).ravel()
    s0 = x.size
    max_lag = int(max_lag)
    if max_lag < 1:
        raise ValueError("max_lag must be at least 1")
    if max_lag >= s0:
        raise ValueError("max_lag must be smaller than the number of draws")
    acf = np.zeros(max_lag + 1)
    acf[0] = 1.0
    centred = x - x.mean()
    acv0 = float(centred @ centred) / s0
    if acv0 == 0.0:
        warnings.warn("draws are constant; effective sample size set to s0", stacklevel=2)
        return float(s0), acf
    full = np.correlate(centred, centred, mode="full")
    acv = full[s0 - 1 : s0 + max_lag] / s0
    acf = acv / acv[0]
    acf[0] = 1.0

    tau = -1.0
    m = 0
    while 2 * m + 1 <= max_lag:
        pair = acf[2 * m] + acf[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    if tau <= 0.0:
        warnings.warn(
            "initial-positive-sequence truncation left no mass; "
            "using the independent-draw value",
            stacklevel=2,
        )
        tau = 1.0
    return float(s0 / tau), acf
