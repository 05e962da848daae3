"""One-step prediction of burst errors from the past noise sequence.

For a channel whose error probability depends on the current state only
(``g`` in G, ``b`` in B) the predictive probability
``q_{l+1} = Pr(z_{l+1} = 1 | z_1..z_l)`` obeys

    q_{l+1} = g + p(B|G) (b - g) + mu (q_l - g) * {(1-b)/(1-q_l) if z_l = 0,
                                                   b/q_l          if z_l = 1}

with channel memory ``mu = 1 - p(G|B) - p(B|G)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, as_bits, average_inversion_probability
from .sumproduct import LLR_MAX

EPS = 1e-12


@dataclass(frozen=True)
class PredictorState:
    q_pred: float
    mu: float


def channel_memory(params: ChannelParams) -> float:
    return 1.0 - params.p_b_to_g - params.p_g_to_b


def _gb(params: ChannelParams) -> tuple[float, float]:
    if not params.is_destination_convention:
        raise ValueError("the predictor needs state-only error probabilities (destination convention)")
    return params.q_g, params.q_b


def xi_step(z: int, q: float, params: ChannelParams) -> float:
    g, b = _gb(params)
    mu = channel_memory(params)
    q = min(max(float(q), EPS), 1.0 - EPS)
    factor = b / q if z else (1.0 - b) / (1.0 - q)
    out = g + params.p_g_to_b * (b - g) + mu * (q - g) * factor
    return min(max(out, 0.0), 1.0)


def initial_state(params: ChannelParams) -> PredictorState:
    return PredictorState(average_inversion_probability(params), channel_memory(params))


def advance(state: PredictorState, z: int, params: ChannelParams) -> PredictorState:
    return PredictorState(xi_step(z, state.q_pred, params), state.mu)


def predict(params: ChannelParams, noise_history) -> np.ndarray:
    """``out[l] = Pr(z_{l+1} = 1 | z_1..z_l)`` for ``l = 0..L`` (length L+1)."""
    z = as_bits(noise_history, "noise_history")
    out = np.empty(z.size + 1)
    q = average_inversion_probability(params)
    _gb(params)
    out[0] = q
    for i, bit in enumerate(z):
        q = xi_step(int(bit), q, params)
        out[i + 1] = q
    return out


def llr_from_prob(p_error, received):
    """Bit LLR (positive favours 1) for error probability ``p_error`` and received bit."""
    p = np.clip(np.asarray(p_error, dtype=float), EPS, 1.0 - EPS)
    mag = np.clip(np.log1p(-p) - np.log(p), -LLR_MAX, LLR_MAX)
    return np.where(np.asarray(received) == 1, mag, -mag)


def predict_llrs(params: ChannelParams, noise_history, received_next: int) -> float:
    """LLR of the next transmitted bit given the past noise and its received value."""
    if received_next not in (0, 1):
        raise ValueError("received_next must be 0 or 1")
    q = predict(params, noise_history)[-1]
    return float(llr_from_prob(q, received_next))


def predictor_llrs(params: ChannelParams, received, decoded) -> np.ndarray:
    """Per-bit LLRs for a block, each predicted from the noise ``y xor c_hat`` before it."""
    y = as_bits(received, "received")
    c = as_bits(decoded, "decoded")
    if y.shape != c.shape:
        raise ValueError("received and decoded lengths differ")
    q = predict(params, y ^ c)[:-1]
    return llr_from_prob(q, y)


def prediction_csv(params: ChannelParams, noise) -> str:
    q = predict(params, noise)[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "q_pred", "llr_if_y0", "llr_if_y1"])
    l0 = llr_from_prob(q, 0)
    l1 = llr_from_prob(q, 1)
    for i in range(q.size):
        w.writerow([i, f"{q[i]:.12g}", f"{l0[i]:.12g}", f"{l1[i]:.12g}"])
    return buf.getvalue()
