"""Flat HMM parameters, log-space forward/backward and Baum-Welch training."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..errors import DataError, SingularModelError
from .gaussian import REG_FLOOR, GaussianState, mvn_logpdf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HmmParams:
    """lambda = {a_ij, pi_i, b_i}."""

    A: np.ndarray
    pi: np.ndarray
    states: tuple
    log_likelihoods: tuple = field(default=(), compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        n = len(self.states)
        if A.shape != (n, n) or pi.shape != (n,):
            raise DataError("transition/prior shapes do not match the state count")
        if np.any(A < 0) or np.any(pi < 0):
            raise DataError("probabilities must be non-negative")
        if not np.allclose(A.sum(axis=1), 1.0, atol=1e-12) or not abs(pi.sum() - 1.0) <= 1e-12:
            raise DataError("transition rows and prior must sum to 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def n_states(self) -> int:
        return len(self.states)

    def log_emissions(self, z: np.ndarray) -> np.ndarray:
        """(T, S) log b_i(z_t)."""
        return np.stack([s.log_pdf(z) for s in self.states], axis=1)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def _lse(x, axis):
    """log-sum-exp without scipy's argument checking (hot loop)."""
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(x - m), axis=axis))


def log_forward(log_A, log_pi, log_b):
    """Log forward variables (T, S) and total log-likelihood.

    alpha_1 = pi * b(y_1); alpha_{t+1}(i) = [sum_j alpha_t(j) a_ji] b_i(y_{t+1}).
    """
    T, S = log_b.shape
    alpha = np.empty((T, S))
    alpha[0] = log_pi + log_b[0]
    for t in range(1, T):
        alpha[t] = _lse(alpha[t - 1][:, None] + log_A, 0) + log_b[t]
    return alpha, float(logsumexp(alpha[-1]))


def log_backward(log_A, log_b):
    T, S = log_b.shape
    beta = np.zeros((T, S))
    for t in range(T - 2, -1, -1):
        beta[t] = _lse(log_A + (log_b[t + 1] + beta[t + 1])[None, :], 1)
    return beta


def forward_posteriors(params: HmmParams, z) -> np.ndarray:
    """Filtered state posteriors p(state_t | z_1..z_t), (T, S)."""
    alpha, _ = log_forward(_log(params.A), _log(params.pi), params.log_emissions(np.asarray(z, float)))
    return np.exp(alpha - logsumexp(alpha, axis=1, keepdims=True))


def _as_arrays(observations) -> list:
    out = []
    for seq in observations:
        if hasattr(seq, "z") and not callable(seq.z):
            arr = np.asarray(seq.z, dtype=float)
        else:
            rows = [o.z if hasattr(o, "z") else o for o in seq]
            arr = np.atleast_2d(np.asarray(rows, dtype=float))
        if arr.ndim != 2 or len(arr) == 0:
            raise DataError("each observation sequence must be a non-empty (T, d) array")
        if not np.all(np.isfinite(arr)):
            raise DataError("observations contain non-finite values")
        out.append(arr)
    if len({a.shape[1] for a in out}) != 1:
        raise DataError("observation sequences differ in dimension")
    return out


def _init_bins(seqs, n_states):
    """Assign every frame to the bin of its relative position inside its sequence."""
    labels = []
    for s in seqs:
        T = len(s)
        labels.append(np.minimum((np.arange(T) * n_states) // T, n_states - 1))
    return labels


def _cov(data, weights, mean):
    diff = data - mean
    return (weights[:, None] * diff).T @ diff / weights.sum()


def em_fit(observations: Sequence, n_states: int, max_iter: int = 200, tol: float = 1e-6,
           reg_floor: float = REG_FLOOR, seed: int = 0, d_x: int = 0) -> HmmParams:
    """Baum-Welch with full-covariance Gaussian emissions, in log space.

    Initial means/covariances come from splitting every sequence uniformly in
    time into ``n_states`` bins; transitions and prior start uniform. ``seed``
    only drives a 1e-9 mean jitter that breaks exact ties between bins.
    ``d_x`` marks the X/Y split of the returned GaussianStates.
    """
    if n_states < 1:
        raise DataError("n_states must be >= 1")
    seqs = _as_arrays(observations)
    data = np.concatenate(seqs)
    N, d = data.shape
    if N < n_states:
        raise DataError(f"{N} frames cannot support {n_states} states")
    eye = np.eye(d) * reg_floor

    if n_states == 1:
        mu = data.mean(axis=0)
        U = np.cov(data.T, bias=True).reshape(d, d) + eye
        state = GaussianState(mu, U, d_x)
        ll = float(np.sum(state.log_pdf(data)))
        return HmmParams(np.ones((1, 1)), np.ones(1), (state,), (ll,))

    rng = np.random.default_rng(seed)
    labels = np.concatenate(_init_bins(seqs, n_states))
    means, covs = [], []
    for i in range(n_states):
        block = data[labels == i]
        c = np.cov(block.T, bias=True).reshape(d, d) if len(block) > 1 else np.zeros((d, d))
        if len(block) == 0 or np.trace(c) <= 1e-12 * d:
            raise SingularModelError(f"state {i}: degenerate data (no variance in its frames)", state=i)
        means.append(block.mean(axis=0) + rng.standard_normal(d) * 1e-9)
        covs.append(c + eye)
    means = np.array(means)
    covs = np.array(covs)
    A = np.full((n_states, n_states), 1.0 / n_states)
    pi = np.full(n_states, 1.0 / n_states)

    history = []
    for it in range(max_iter):
        log_A, log_pi = _log(A), _log(pi)
        gamma_all, xi_sum, pi_acc, ll = [], np.zeros((n_states, n_states)), np.zeros(n_states), 0.0
        for s in seqs:
            log_b = np.stack([mvn_logpdf(s, means[i], covs[i]) for i in range(n_states)], axis=1)
            alpha, l = log_forward(log_A, log_pi, log_b)
            beta = log_backward(log_A, log_b)
            ll += l
            g = alpha + beta - l
            gamma_all.append(np.exp(g))
            pi_acc += np.exp(g[0])
            if len(s) > 1:
                x = (alpha[:-1, :, None] + log_A[None] + (log_b[1:] + beta[1:])[:, None, :]) - l
                xi_sum += np.exp(logsumexp(x, axis=0))
        history.append(ll)
        if it > 0 and history[-1] - history[-2] < tol:
            break
        gamma = np.concatenate(gamma_all)
        occ = gamma.sum(axis=0)
        for i in range(n_states):
            if occ[i] <= 1e-300:
                raise SingularModelError(f"state {i}: no frames assigned", state=i)
            means[i] = gamma[:, i] @ data / occ[i]
            covs[i] = _cov(data, gamma[:, i], means[i]) + eye
        pi = pi_acc / pi_acc.sum()
        rows = xi_sum.sum(axis=1, keepdims=True)
        A = np.where(rows > 0, xi_sum / np.where(rows > 0, rows, 1.0), 1.0 / n_states)
        A = A / A.sum(axis=1, keepdims=True)
    else:
        log.info("EM stopped at max_iter=%d", max_iter)
    states = tuple(GaussianState(means[i], covs[i], d_x) for i in range(n_states))
    return HmmParams(A, pi, states, tuple(history))
