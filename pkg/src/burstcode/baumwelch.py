"""Baum-Welch estimation of the two-state channel from a noise sequence.

The observation at position k is the noise bit emitted in the state entered at
k, so the model is an ordinary two-state HMM with Bernoulli emissions
``b_m(1) = q_m`` (destination convention) and a distribution over the first
state.  Forward and backward passes are scaled per step; the scaling
constants give the log-likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import B, G, ChannelParams, as_bits, stationary_distribution


class StateNotVisitedError(ValueError):
    """A state has zero expected occupancy, so its parameters are undefined."""


@dataclass
class HmmSufficientStats:
    upsilon: np.ndarray  # (K-1, 2, 2): Pr(S_k = m1, S_{k+1} = m2 | O)
    eta_state: np.ndarray  # (K, 2): Pr(S_k = m | O)
    log_likelihood: float


def _model(params: ChannelParams):
    if not params.is_destination_convention:
        raise ValueError("Baum-Welch estimation uses the destination convention (q_g, q_b)")
    return params.transition_matrix(), np.array([params.q_g, params.q_b])


def _initial(params: ChannelParams, initial) -> np.ndarray:
    if initial is None:
        return np.array(stationary_distribution(params))
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (2,) or abs(initial.sum() - 1.0) > 1e-12 or (initial < 0).any():
        raise ValueError("initial state distribution must be two probabilities summing to 1")
    return initial


@njit(cache=True)
def _scaled_forward(obs, trans, q1, init):
    n = obs.shape[0]
    alpha = np.zeros((n, 2))
    scale = np.zeros(n)
    for k in range(n):
        tot = 0.0
        for m in range(2):
            if k == 0:
                prior = init[m]
            else:
                prior = alpha[k - 1, 0] * trans[0, m] + alpha[k - 1, 1] * trans[1, m]
            b = q1[m] if obs[k] == 1 else 1.0 - q1[m]
            alpha[k, m] = prior * b
            tot += alpha[k, m]
        scale[k] = tot
        if not tot > 0.0:
            return alpha, scale, k
        alpha[k, 0] /= tot
        alpha[k, 1] /= tot
    return alpha, scale, -1


@njit(cache=True)
def _scaled_backward(obs, trans, q1, scale):
    # standard Rabiner scaling: reuse the forward constants
    n = obs.shape[0]
    beta = np.ones((n, 2))
    for k in range(n - 2, -1, -1):
        for m in range(2):
            acc = 0.0
            for m2 in range(2):
                b = q1[m2] if obs[k + 1] == 1 else 1.0 - q1[m2]
                acc += trans[m, m2] * b * beta[k + 1, m2]
            beta[k, m] = acc / scale[k + 1]
    return beta


@njit(cache=True)
def _self_scaled_backward_loglik(obs, trans, q1, init):
    n = obs.shape[0]
    beta = np.ones(2)
    logsum = 0.0
    for k in range(n - 2, -1, -1):
        nxt = np.zeros(2)
        for m in range(2):
            for m2 in range(2):
                b = q1[m2] if obs[k + 1] == 1 else 1.0 - q1[m2]
                nxt[m] += trans[m, m2] * b * beta[m2]
        tot = nxt[0] + nxt[1]
        if not tot > 0.0:
            return -np.inf
        beta = nxt / tot
        logsum += np.log(tot)
    last = 0.0
    for m in range(2):
        b = q1[m] if obs[0] == 1 else 1.0 - q1[m]
        last += init[m] * b * beta[m]
    if not last > 0.0:
        return -np.inf
    return logsum + np.log(last)


@njit(cache=True)
def _pair_marginals(obs, trans, q1, alpha, beta, scale):
    n = obs.shape[0]
    ups = np.zeros((max(n - 1, 0), 2, 2))
    for k in range(n - 1):
        for m1 in range(2):
            for m2 in range(2):
                b = q1[m2] if obs[k + 1] == 1 else 1.0 - q1[m2]
                ups[k, m1, m2] = alpha[k, m1] * trans[m1, m2] * b * beta[k + 1, m2] / scale[k + 1]
    return ups


def _obs(obs) -> np.ndarray:
    o = as_bits(obs, "obs")
    if o.size == 0:
        raise ValueError("observation sequence is empty")
    return o


def hmm_loglik(params: ChannelParams, obs, initial=None) -> float:
    """``log Pr(O | model)``; ``-inf`` when the observations are impossible."""
    o = _obs(obs)
    trans, q1 = _model(params)
    _, scale, bad = _scaled_forward(o, trans, q1, _initial(params, initial))
    if bad >= 0:
        return -math.inf
    return float(np.sum(np.log(scale)))


def hmm_loglik_backward(params: ChannelParams, obs, initial=None) -> float:
    """Log-likelihood from an independently scaled backward pass."""
    o = _obs(obs)
    trans, q1 = _model(params)
    return float(_self_scaled_backward_loglik(o, trans, q1, _initial(params, initial)))


def estep(params: ChannelParams, obs, initial=None) -> HmmSufficientStats:
    o = _obs(obs)
    trans, q1 = _model(params)
    alpha, scale, bad = _scaled_forward(o, trans, q1, _initial(params, initial))
    if bad >= 0:
        raise FloatingPointError(
            f"observations have zero probability under the model (step {bad + 1})"
        )
    beta = _scaled_backward(o, trans, q1, scale)
    ups = _pair_marginals(o, trans, q1, alpha, beta, scale)
    eta = alpha * beta
    eta /= eta.sum(axis=1, keepdims=True)
    return HmmSufficientStats(ups, eta, float(np.sum(np.log(scale))))


def reestimate(stats: HmmSufficientStats, obs, previous: ChannelParams | None = None) -> ChannelParams:
    """One M-step.

    A state with zero expected occupancy keeps its values from ``previous``
    when given; otherwise :class:`StateNotVisitedError` is raised.
    """
    o = _obs(obs)
    if stats.eta_state.shape[0] != o.size:
        raise ValueError("statistics and observations have different lengths")
    trans_num = stats.upsilon.sum(axis=0)
    trans_den = trans_num.sum(axis=1)
    occ = stats.eta_state.sum(axis=0)
    ones = stats.eta_state[o == 1].sum(axis=0)

    def pick(value_num, value_den, fallback, what):
        if value_den > 0.0:
            return min(max(value_num / value_den, 0.0), 1.0)
        if previous is None:
            raise StateNotVisitedError(
                f"state {what} is never visited in expectation; re-initialize the model"
            )
        return fallback

    prev = previous or ChannelParams.gec(0.0, 0.0, 0.0, 0.0)
    return ChannelParams.gec(
        pick(trans_num[G, B], trans_den[G], prev.p_g_to_b, "G"),
        pick(trans_num[B, G], trans_den[B], prev.p_b_to_g, "B"),
        pick(ones[G], occ[G], prev.q_g, "G"),
        pick(ones[B], occ[B], prev.q_b, "B"),
    )


@dataclass
class FitResult:
    params: ChannelParams
    loglik_trace: list[float]
    history: list[ChannelParams] = field(default_factory=list)
    converged: bool = False

    def __iter__(self):
        return iter((self.params, self.loglik_trace))


def fit(obs, init: ChannelParams, max_iters: int = 500, tol: float = 1e-6) -> FitResult:
    """Iterate E and M steps until the log-likelihood gain drops below ``tol``.

    The first-state distribution is the stationary distribution of ``init``
    and stays fixed for the whole fit, which keeps every M-step exact and the
    likelihood trace non-decreasing.
    """
    o = _obs(obs)
    initial = np.array(stationary_distribution(init))
    params = init
    stats = estep(params, o, initial)
    trace = [stats.log_likelihood]
    history = [params]
    converged = False
    for _ in range(max_iters):
        params = reestimate(stats, o, previous=params)
        stats = estep(params, o, initial)
        trace.append(stats.log_likelihood)
        history.append(params)
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    return FitResult(params, trace, history, converged)
