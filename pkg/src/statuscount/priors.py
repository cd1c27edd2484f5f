"""Gaussian prior specification and posterior kernel assembly.

The five working-scale parameter blocks get independent multivariate
normal priors.  The log-rate, count-side, and status-side coefficient
blocks are restricted to diagonal covariances; the log hazard-jump block
may carry a dense covariance, typically an autoregressive correlation
structure that shrinks neighbouring jumps toward each other.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import toeplitz

from .model import NumericError, ParamVector, log_likelihood

__all__ = [
    "PriorSpec",
    "ar1_correlation",
    "log_prior",
    "log_posterior",
]

_LOG_2PI = math.log(2.0 * math.pi)


def ar1_correlation(n_prime, rho):
    """First-order autoregressive correlation matrix ``rho**|i-j|``."""
    if n_prime < 1:
        raise ValueError("n_prime must be at least 1")
    rho = float(rho)
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie strictly inside (0, 1)")
    return toeplitz(rho ** np.arange(n_prime))


class _NormalBlock:
    """Frozen multivariate normal with cached factorization."""

    __slots__ = ("mean", "cov", "chol", "precision", "log_norm", "dim")

    def __init__(self, mean, cov, name):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        k = mean.size
        if cov.shape != (k, k):
            raise ValueError(f"{name}: covariance shape {cov.shape} does not match mean length {k}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError(f"{name}: prior moments must be finite")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError(f"{name}: covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                f"{name}: prior covariance is not positive definite", block=name
            ) from exc
        self.mean = mean
        self.cov = cov
        self.chol = chol
        ident = np.eye(k)
        half = np.linalg.solve(chol, ident)
        self.precision = half.T @ half
        self.log_norm = -0.5 * k * _LOG_2PI - float(np.log(np.diag(chol)).sum())
        self.dim = k

    def logpdf(self, x):
        r = x - self.mean
        return self.log_norm - 0.5 * float(r @ (self.precision @ r))


def _diag_only(cov, name):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 2 and np.any(cov != np.diag(np.diag(cov))):
        raise ValueError(f"{name}: this block requires a diagonal covariance")
    return cov


class PriorSpec:
    """Independent normal priors for the five working-scale blocks.

    Parameters map one-to-one onto :class:`~statuscount.model.ParamVector`
    blocks.  Variance arguments for the diagonal blocks accept either a
    per-component variance vector or a diagonal matrix; the hazard-jump
    block additionally accepts a dense symmetric positive definite matrix.
    A singular covariance fails here, at construction, not at evaluation.
    """

    def __init__(self, phi_star_mean, phi_star_var, nu_mean, nu_cov,
                 beta1_mean, beta1_var, beta2_mean, beta2_var,
                 psi_star_mean, psi_star_var):
        self._phi = _NormalBlock(
            phi_star_mean, _diag_only(phi_star_var, "phi_star"), "phi_star")
        self._nu = _NormalBlock(nu_mean, nu_cov, "nu")
        self._b1 = _NormalBlock(
            np.zeros(0) if beta1_mean is None else beta1_mean,
            np.zeros(0) if beta1_var is None else _diag_only(beta1_var, "beta1"),
            "beta1")
        self._b2 = _NormalBlock(
            np.zeros(0) if beta2_mean is None else beta2_mean,
            np.zeros(0) if beta2_var is None else _diag_only(beta2_var, "beta2"),
            "beta2")
        self._psi = _NormalBlock([psi_star_mean], [float(psi_star_var)], "psi_star")
        if self._phi.dim != self._nu.dim:
            raise ValueError("phi_star and nu prior blocks must have the same length")

    def __repr__(self):
        return (
            f"PriorSpec(n_prime={self.n_prime}, p={self.p}, q={self.q})"
        )

    @classmethod
    def vague(cls, n_prime, p, q, scale=10.0):
        """Weakly informative default: independent N(0, scale**2) everywhere."""
        v = float(scale) ** 2
        return cls(
            np.zeros(n_prime), np.full(n_prime, v),
            np.zeros(n_prime), np.diag(np.full(n_prime, v)),
            np.zeros(p), np.full(p, v),
            np.zeros(q), np.full(q, v),
            0.0, v,
        )

    @property
    def n_prime(self):
        return self._phi.dim

    @property
    def p(self):
        return self._b1.dim

    @property
    def q(self):
        return self._b2.dim

    @property
    def phi_star_mean(self):
        return self._phi.mean

    @property
    def phi_star_cov(self):
        return self._phi.cov

    @property
    def nu_mean(self):
        return self._nu.mean

    @property
    def nu_cov(self):
        return self._nu.cov

    @property
    def beta1_mean(self):
        return self._b1.mean

    @property
    def beta1_cov(self):
        return self._b1.cov

    @property
    def beta2_mean(self):
        return self._b2.mean

    @property
    def beta2_cov(self):
        return self._b2.cov

    @property
    def psi_star_mean(self):
        return float(self._psi.mean[0])

    @property
    def psi_star_var(self):
        return float(self._psi.cov[0, 0])

    def mean_vector(self):
        """Prior means assembled as a :class:`ParamVector`."""
        return ParamVector(
            self._phi.mean, self._nu.mean, self._b1.mean, self._b2.mean,
            self.psi_star_mean,
        )


def log_prior(theta, spec):
    """Log prior density of ``theta``, normalization constants included."""
    if theta.n_prime != spec.n_prime or theta.p != spec.p or theta.q != spec.q:
        raise ValueError("parameter dimensions do not match the prior")
    total = spec._phi.logpdf(theta.phi_star)
    total += spec._nu.logpdf(theta.nu)
    if spec.p:
        total += spec._b1.logpdf(theta.beta1)
    if spec.q:
        total += spec._b2.logpdf(theta.beta2)
    total += spec._psi.logpdf(np.array([theta.psi_star]))
    return total


def log_posterior(theta, data, spec):
    """Unnormalized log posterior: log-likelihood plus log prior."""
    return log_likelihood(theta, data) + log_prior(theta, spec)
