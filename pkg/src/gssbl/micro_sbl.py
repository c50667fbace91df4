"""Single-candidate sparse Bayesian learning ("Micro-SBL").

Each candidate voxel is scored in isolation: a one-column SBL model is fit to
the current residual and the squared L2 misfit of its posterior mean is the
candidate's score.

With one column the posterior is scalar::

    sigma = 1 / (beta * |phi|^2 + alpha)
    mu    = beta * sigma * phi^T y

and the Gamma(a, b) hyperprior gives the EM updates::

    alpha <- (1 + 2a) / (mu^2 + sigma + 2b)
    beta  <- (M + 2a) / (|y - mu phi|^2 + sigma |phi|^2 + 2b)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateColumnError


@dataclass(frozen=True)
class SblPriors:
    a: float = 0.05
    b: float = 0.05
    beta_init: float = 1e3
    alpha_init: float = 0.0
    max_iters: int = 10
    tol: float = 1e-8

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0):
            raise ConfigurationError("Gamma hyperparameters a, b must be non-negative")
        if not self.beta_init > 0:
            raise ConfigurationError("beta_init must be positive")
        if not self.alpha_init >= 0:
            raise ConfigurationError("alpha_init must be non-negative")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError("max_iters must be a positive integer")
        if not self.tol >= 0:
            raise ConfigurationError("tol must be non-negative")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "beta_init": self.beta_init,
                "alpha_init": self.alpha_init, "max_iters": int(self.max_iters), "tol": self.tol}


DEFAULT_PRIORS = SblPriors()


@dataclass(frozen=True)
class MicroSblState:
    alpha: float
    beta: float
    mu: float
    sigma: float
    iters_run: int


def run_micro_sbl(column, target, priors: SblPriors = DEFAULT_PRIORS) -> MicroSblState:
    """Iterate the scalar posterior / EM updates for one candidate column.

    Each iteration computes the posterior from the current ``(alpha, beta)``
    and, unless it is the last one or ``mu`` has converged, re-estimates the
    hyperparameters. The returned ``(alpha, beta)`` are therefore exactly the
    ones that produced the returned ``(mu, sigma)``.
    """
    phi = np.asarray(column, dtype=float)
    y = np.asarray(target, dtype=float)
    m = phi.shape[0]
    pp = float(np.dot(phi, phi))
    if not pp > 0:
        raise DegenerateColumnError("candidate column has zero norm")
    py = float(np.dot(phi, y))
    a2, b2 = 2.0 * priors.a, 2.0 * priors.b

    alpha = float(priors.alpha_init)
    beta = float(priors.beta_init)
    mu_old = None
    for it in range(1, int(priors.max_iters) + 1):
        sigma = 1.0 / (beta * pp + alpha)
        mu = beta * sigma * py
        if it == priors.max_iters:
            break
        if mu_old is not None and abs(mu - mu_old) <= priors.tol * max(1.0, abs(mu_old)):
            break
        r = y - mu * phi
        alpha = (1.0 + a2) / (mu * mu + sigma + b2)
        beta = (m + a2) / (float(np.dot(r, r)) + sigma * pp + b2)
        mu_old = mu
    return MicroSblState(alpha=alpha, beta=beta, mu=mu, sigma=sigma, iters_run=it)


def score_candidate(column, target, priors: SblPriors = DEFAULT_PRIORS) -> tuple[float, float]:
    """Posterior mean power and squared residual for one candidate.

    A candidate whose posterior mean is not positive cannot explain a power
    and scores ``|target|^2`` (no improvement).
    """
    phi = np.asarray(column, dtype=float)
    y = np.asarray(target, dtype=float)
    mu = run_micro_sbl(phi, y, priors).mu
    if mu <= 0:
        return mu, float(np.dot(y, y))
    r = y - mu * phi
    return mu, float(np.dot(r, r))


def score_candidates(columns, target, priors: SblPriors = DEFAULT_PRIORS):
    """Vectorised :func:`score_candidate` over the columns of an ``(M, n)`` block.

    Every column runs its own Micro-SBL loop (including its own early exit);
    returns ``(mu, error, iters_run)`` arrays of length ``n``.
    """
    phi = np.asarray(columns, dtype=float)
    y = np.asarray(target, dtype=float)
    m, n = phi.shape
    pp = np.einsum("mn,mn->n", phi, phi)
    if np.any(~(pp > 0)):
        raise DegenerateColumnError("candidate block contains a zero-norm column")
    py = phi.T @ y
    a2, b2 = 2.0 * priors.a, 2.0 * priors.b

    alpha = np.full(n, float(priors.alpha_init))
    beta = np.full(n, float(priors.beta_init))
    mu = np.zeros(n)
    sigma = np.zeros(n)
    mu_old = np.zeros(n)
    iters = np.zeros(n, dtype=int)
    active = np.arange(n)
    for it in range(1, int(priors.max_iters) + 1):
        s = 1.0 / (beta[active] * pp[active] + alpha[active])
        mu[active] = beta[active] * s * py[active]
        sigma[active] = s
        iters[active] = it
        if it == priors.max_iters:
            break
        if it > 1:
            mo = mu_old[active]
            done = np.abs(mu[active] - mo) <= priors.tol * np.maximum(1.0, np.abs(mo))
            active = active[~done]
            if active.size == 0:
                break
        r = y[:, None] - phi[:, active] * mu[active]
        r2 = np.einsum("mn,mn->n", r, r)
        ma, sa = mu[active], sigma[active]
        alpha[active] = (1.0 + a2) / (ma * ma + sa + b2)
        beta[active] = (m + a2) / (r2 + sa * pp[active] + b2)
        mu_old[active] = ma

    r = y[:, None] - phi * mu
    err = np.einsum("mn,mn->n", r, r)
    err = np.where(mu > 0, err, float(np.dot(y, y)))
    return mu, err, iters
