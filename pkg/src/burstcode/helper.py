"""Forward-backward helper for the Markov noise channel and the turbo loop.

The helper treats the transmitted bits ``d_k`` as independent with prior
``Pr(d_k = 1)`` (0.5 unless the decoder supplies beliefs) and computes

    zeta_k(i, m) = Pr(d_k = i, S_k = m | O)

from normalized forward tables ``alpha_k(i, m)`` and backward tables
``beta_k(m)``.  The chain starts in G.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .channel import G, ChannelParams, as_bits, average_inversion_probability
from .sumproduct import LLR_MAX, SumProductState, TannerGraph, channel_llrs, hard_decision


class TrellisError(FloatingPointError):
    """A recursion step lost all probability mass."""


def gamma(params: ChannelParams, obs: int, i: int, m1: int, m2: int, prior_one: float = 0.5) -> float:
    """``Pr(d_k = i, O_k, S_k = m2 | S_{k-1} = m1)``."""
    q = params.emission(m1, m2)
    p_bit = prior_one if i == 1 else 1.0 - prior_one
    p_obs = q if obs != i else 1.0 - q
    return p_bit * p_obs * params.transition(m1, m2)


@njit(cache=True)
def _forward(obs, prior_one, trans, emit, start):
    n = obs.shape[0]
    alpha = np.zeros((n, 2, 2))
    state = np.zeros(2)
    state[start] = 1.0
    for k in range(n):
        total = 0.0
        for i in range(2):
            p_bit = prior_one[k] if i == 1 else 1.0 - prior_one[k]
            for m2 in range(2):
                acc = 0.0
                for m1 in range(2):
                    q = emit[m1, m2]
                    p_obs = q if obs[k] != i else 1.0 - q
                    acc += p_bit * p_obs * trans[m1, m2] * state[m1]
                alpha[k, i, m2] = acc
                total += acc
        if not total > 0.0:
            return alpha, k
        for i in range(2):
            for m in range(2):
                alpha[k, i, m] /= total
        state[0] = alpha[k, 0, 0] + alpha[k, 1, 0]
        state[1] = alpha[k, 0, 1] + alpha[k, 1, 1]
    return alpha, -1


@njit(cache=True)
def _backward(obs, prior_one, trans, emit, alpha):
    n = obs.shape[0]
    beta = np.ones((n, 2))
    for k in range(n - 2, -1, -1):
        for m in range(2):
            acc = 0.0
            for m1 in range(2):
                q = emit[m, m1]
                for i in range(2):
                    p_bit = prior_one[k + 1] if i == 1 else 1.0 - prior_one[k + 1]
                    p_obs = q if obs[k + 1] != i else 1.0 - q
                    acc += p_bit * p_obs * trans[m, m1] * beta[k + 1, m1]
            beta[k, m] = acc
        norm = 0.0
        for m in range(2):
            norm += (alpha[k, 0, m] + alpha[k, 1, m]) * beta[k, m]
        if not norm > 0.0:
            return beta, k
        beta[k, 0] /= norm
        beta[k, 1] /= norm
    return beta, -1


def _prior_array(prior_one, n: int) -> np.ndarray:
    if prior_one is None:
        return np.full(n, 0.5)
    p = np.broadcast_to(np.asarray(prior_one, dtype=float), (n,)).copy()
    if np.any((p < 0) | (p > 1)):
        raise ValueError("bit priors must lie in [0, 1]")
    return p


def forward(params: ChannelParams, obs, prior_one=None, start: int = G) -> np.ndarray:
    """Normalized forward table, shape ``(K, 2, 2)`` indexed ``[k, bit, state]``."""
    o = as_bits(obs, "obs")
    if o.size == 0:
        raise ValueError("observation sequence is empty")
    alpha, bad = _forward(o, _prior_array(prior_one, o.size), params.transition_matrix(),
                          params.emission_matrix(), start)
    if bad >= 0:
        raise TrellisError(f"forward recursion has zero mass at step {bad + 1}")
    return alpha


def backward(params: ChannelParams, obs, alpha: np.ndarray, prior_one=None) -> np.ndarray:
    """Backward table, shape ``(K, 2)``; ``beta[K-1] = 1`` and each step is
    scaled so that ``sum_{i,m} alpha_k(i,m) beta_k(m) = 1``."""
    o = as_bits(obs, "obs")
    if alpha.shape != (o.size, 2, 2):
        raise ValueError("alpha does not match the observation length")
    beta, bad = _backward(o, _prior_array(prior_one, o.size), params.transition_matrix(),
                          params.emission_matrix(), alpha)
    if bad >= 0:
        raise TrellisError(f"backward recursion has zero mass at step {bad + 1}")
    return beta


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(num) - np.log(den)
    out = np.where(num <= 0, -LLR_MAX, out)
    out = np.where((den <= 0) & (num > 0), LLR_MAX, out)
    return np.clip(out, -LLR_MAX, LLR_MAX)


def posterior_llr(alpha: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``zeta = alpha * beta`` (renormalized per step) and the helper LLRs."""
    if alpha.shape[0] != beta.shape[0]:
        raise ValueError("alpha and beta lengths differ")
    zeta = alpha * beta[:, None, :]
    zeta /= zeta.sum(axis=(1, 2), keepdims=True)
    return zeta, _log_ratio(zeta[:, 1, :].sum(axis=1), zeta[:, 0, :].sum(axis=1))


@dataclass
class TrellisPosterior:
    alpha: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray
    helper_llrs: np.ndarray

    @property
    def state_probs(self) -> np.ndarray:
        """``Pr(S_k = m | O)``, shape ``(K, 2)``."""
        return self.zeta.sum(axis=1)


def run_helper(params: ChannelParams, obs, prior_one=None, start: int = G) -> TrellisPosterior:
    alpha = forward(params, obs, prior_one, start)
    beta = backward(params, obs, alpha, prior_one)
    zeta, llrs = posterior_llr(alpha, beta)
    return TrellisPosterior(alpha, beta, zeta, llrs)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def helper_extrinsic(params: ChannelParams, received, prior_llr=None) -> np.ndarray:
    """Helper LLRs with the caller's own prior on each bit removed.

    ``prior_llr`` carries the decoder's current belief about every bit; the
    result is what the channel and all *other* bits say about bit ``k``.
    """
    if prior_llr is None:
        return run_helper(params, received).helper_llrs
    prior_llr = np.clip(np.asarray(prior_llr, dtype=float), -LLR_MAX, LLR_MAX)
    post = run_helper(params, received, _sigmoid(prior_llr)).helper_llrs
    return np.clip(post - prior_llr, -LLR_MAX, LLR_MAX)


class TurboRound(NamedTuple):
    round: int
    unsatisfied_checks: int
    bit_flips: int


class TurboResult(NamedTuple):
    bits: np.ndarray
    converged: bool
    trace: list


@dataclass
class TurboDecoder:
    """Alternates ``inner_iters`` sum-product iterations and one helper pass.

    Round 1 starts from the memoryless eta-bar LLRs, so it is plain SP.
    After each SP sub-iteration the check evidence (sum of incoming check
    messages) becomes the helper's bit prior, and the helper's extrinsic
    output is the symbol intrinsic for the next round.  Check-to-symbol
    messages persist.  The trace and the result hold the SP word of each
    round.  ``coupling="hard"`` feeds back the hard SP word with a fixed
    reliability instead.
    """

    graph: TannerGraph
    params: ChannelParams
    outer_iters: int = 5
    inner_iters: int = 10
    coupling: str = "soft"
    hard_reliability: float = 0.9
    trace: list = field(default_factory=list)

    def decode(self, received) -> TurboResult:
        if self.coupling not in ("soft", "hard"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        y = as_bits(received, "received")
        if y.size != self.graph.n_vars:
            raise ValueError(f"received length {y.size} != N={self.graph.n_vars}")
        g = self.graph
        sp = SumProductState(g)
        intrinsic = channel_llrs(y, average_inversion_probability(self.params))
        hard_llr = np.log(self.hard_reliability / (1.0 - self.hard_reliability))
        trace = []
        bits, ok = y.copy(), False
        for rnd in range(1, self.outer_iters + 1):
            _, bits, _, ok = sp.run(intrinsic, self.inner_iters)
            trace.append(TurboRound(rnd, g.unsatisfied(bits), int(np.count_nonzero(bits ^ y))))
            if ok or rnd == self.outer_iters:
                break
            evidence = sp.extrinsic() if self.coupling == "soft" else np.where(bits == 1, hard_llr, -hard_llr)
            intrinsic = helper_extrinsic(self.params, y, evidence)
        self.trace = trace
        return TurboResult(bits, ok, trace)


def turbo_decode(graph: TannerGraph, params: ChannelParams, received, outer_iters: int = 5,
                 inner_iters: int = 10, **kwargs) -> TurboResult:
    return TurboDecoder(graph, params, outer_iters, inner_iters, **kwargs).decode(received)


def estimate_states(params: ChannelParams, received, tentative, reliability: float = 0.99) -> np.ndarray:
    """Per-position MAP channel state given a tentative codeword."""
    y = as_bits(received, "received")
    c = as_bits(tentative, "tentative")
    prior = np.where(c == 1, reliability, 1.0 - reliability)
    probs = run_helper(params, y, prior).state_probs
    return (probs[:, 1] > probs[:, 0]).astype(np.uint8)
