"""Gallager's probabilistic decoding driven by channel-state branches, and
hard-decision bit flipping.

Each digit is annotated with the trellis branch ``s_{k-1} -> s_k`` it was
sent on (``s_0 = G``).  The branch probability ``eta = q_{end<-start} *
p(end|start)`` plays the role of the digit's error probability, so the
prior probability of a transmitted 1 is ``eta`` when the received bit is 0
and ``1 - eta`` when it is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .channel import G, ChannelParams, as_bits, average_inversion_probability
from .sumproduct import TannerGraph, channel_llrs, decode_sp

EPS = 1e-12
LOG_RATIO_MAX = 30.0


class MissingStatesError(ValueError):
    """Genie decoding was requested without a state sequence."""


def even_parity_prob(probs: Sequence[float]) -> float:
    """Probability that independent bits with ``Pr(1) = probs[l]`` hold an even number of ones."""
    p = np.asarray(probs, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return float(min(max((1.0 + np.prod(1.0 - 2.0 * p)) / 2.0, 0.0), 1.0))


@dataclass(frozen=True)
class BranchInfo:
    start_state: int
    end_state: int
    eta: float


def branch_probability(params: ChannelParams, start: int, end: int) -> BranchInfo:
    return BranchInfo(start, end, params.emission(start, end) * params.transition(start, end))


def branch_eta_table(params: ChannelParams) -> np.ndarray:
    """``eta[start, end]`` for all four branches."""
    return params.emission_matrix() * params.transition_matrix()


def digit_ratio(eta_d: float, check_sets: Sequence[Sequence[float]]) -> float:
    """``Pr(x=0 | .) / Pr(x=1 | .)`` for a digit with ``Pr(x=1) = eta_d``.

    ``check_sets[i]`` holds the probabilities of a 1 for the other digits of
    the i-th parity check on this digit.
    """
    eta_d = min(max(float(eta_d), EPS), 1.0 - EPS)
    log_r = math.log1p(-eta_d) - math.log(eta_d)
    for others in check_sets:
        t = float(np.prod(1.0 - 2.0 * np.clip(np.asarray(others, dtype=float), EPS, 1.0 - EPS)))
        log_r += math.log1p(t) - math.log1p(-t)
    return math.exp(min(max(log_r, -LOG_RATIO_MAX), LOG_RATIO_MAX))


class GallagerResult(NamedTuple):
    bits: np.ndarray
    converged: bool
    iterations: int


def _check_log_factors(graph: TannerGraph, p_one_edges: np.ndarray) -> np.ndarray:
    # log((1+T)/(1-T)) per edge, T = prod over the *other* digits of (1-2p)
    t = 1.0 - 2.0 * np.clip(p_one_edges, EPS, 1.0 - EPS)
    zero = t == 0.0  # a digit at exactly 0.5 annihilates the product
    log_abs = np.log(np.where(zero, 1.0, np.abs(t)))
    neg = (t < 0).astype(float)
    tot_log = graph.check_sum(log_abs)[graph.edge_check] - log_abs
    tot_neg = graph.check_sum(neg)[graph.edge_check] - neg
    tot_zero = graph.check_sum(zero.astype(float))[graph.edge_check] - zero
    sign = 1.0 - 2.0 * (np.rint(tot_neg).astype(np.int64) & 1)
    others = np.where(tot_zero > 0.5, 0.0, np.clip(sign * np.exp(tot_log), -1.0 + EPS, 1.0 - EPS))
    return np.log1p(others) - np.log1p(-others)


def _p_one(log_ratio: np.ndarray) -> np.ndarray:
    # Pr(1) = 1 / (1 + ratio)
    return 0.5 * (1.0 - np.tanh(0.5 * log_ratio))


def _decide(log_ratio: np.ndarray, received: np.ndarray) -> np.ndarray:
    return np.where(log_ratio < 0, 1, np.where(log_ratio > 0, 0, received)).astype(np.uint8)


def decode_with_priors(graph: TannerGraph, received, prior_one, iters: int = 50) -> GallagerResult:
    """Iterate the leave-one-out probability exchange from per-digit priors.

    A digit whose final ratio is exactly 1 keeps its received value.
    """
    y = as_bits(received, "received")
    if y.size != graph.n_vars:
        raise ValueError(f"received length {y.size} != N={graph.n_vars}")
    p0 = np.clip(np.asarray(prior_one, dtype=float), EPS, 1.0 - EPS)
    prior_log = np.clip(np.log1p(-p0) - np.log(p0), -LOG_RATIO_MAX, LOG_RATIO_MAX)
    bits = _decide(prior_log, y)
    if not graph.syndrome(bits).any():
        return GallagerResult(bits, True, 0)
    msg = prior_log[graph.edge_var]  # digit -> check, as log ratio
    for it in range(1, iters + 1):
        factors = _check_log_factors(graph, _p_one(msg))
        total = np.clip(prior_log + graph.var_sum(factors), -LOG_RATIO_MAX, LOG_RATIO_MAX)
        bits = _decide(total, y)
        if not graph.syndrome(bits).any():
            return GallagerResult(bits, True, it)
        msg = np.clip(total[graph.edge_var] - factors, -LOG_RATIO_MAX, LOG_RATIO_MAX)
    return GallagerResult(bits, False, iters)


def branch_etas(params: ChannelParams, states) -> np.ndarray:
    """Per-digit branch probability for a state path (with ``s_0 = G``)."""
    s = np.asarray(states, dtype=np.int64)
    if s.ndim != 1 or np.any((s != 0) & (s != 1)):
        raise ValueError("states must be a 1-D sequence of 0 (G) / 1 (B)")
    start = np.concatenate(([G], s[:-1]))
    return branch_eta_table(params)[start, s]


def decode_probabilistic(graph: TannerGraph, params: ChannelParams, received, states=None,
                         mode: str = "genie", iters: int = 50) -> GallagerResult:
    """``mode="genie"`` uses the true state path; ``"estimated"`` infers one.

    The estimated path is the per-position MAP state of the forward-backward
    helper, given the sum-product decision as the tentative codeword.
    """
    y = as_bits(received, "received")
    if mode == "genie":
        if states is None:
            raise MissingStatesError("genie mode needs the channel state sequence")
    elif mode == "estimated":
        from .helper import estimate_states

        tentative = decode_sp(graph, channel_llrs(y, average_inversion_probability(params)), iters).bits
        states = estimate_states(params, y, tentative)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    states = np.asarray(states)
    if states.shape != y.shape:
        raise ValueError(f"state sequence length {states.size} != received length {y.size}")
    eta = branch_etas(params, states)
    prior_one = np.where(y == 1, 1.0 - eta, eta)
    return decode_with_priors(graph, y, prior_one, iters)


def flip_threshold(column_weight) -> np.ndarray:
    """Failing checks needed to flip: ``ceil((w+1)/2)``, i.e. 2 of 3 at w=3."""
    w = np.asarray(column_weight)
    return (w + 2) // 2


def decode_bitflip(graph: TannerGraph, received, iters: int = 50) -> GallagerResult:
    """Synchronous flipping of every digit with enough failing checks."""
    bits = as_bits(received, "received").copy()
    if bits.size != graph.n_vars:
        raise ValueError(f"received length {bits.size} != N={graph.n_vars}")
    need = flip_threshold(graph.var_degree)
    for it in range(iters + 1):
        synd = graph.syndrome(bits)
        if not synd.any():
            return GallagerResult(bits, True, it)
        if it == iters:
            break
        fails = graph.var_sum(synd[graph.edge_check].astype(float))
        flip = fails >= need
        if not flip.any():
            break
        bits ^= flip.astype(np.uint8)
    return GallagerResult(bits, False, it)
