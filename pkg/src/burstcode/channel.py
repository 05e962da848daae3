"""Two-state Markov (Gilbert-Elliott) bit-flipping channel.

States are encoded as integers, ``G = 0`` and ``B = 1``.  Emission
probabilities are labelled by transition: ``q_emit[i][j]`` is the probability
that the noise bit is 1 when the chain moves from state ``j`` into state ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
from numba import njit

G = 0
B = 1
STATE_LABELS = "GB"


class DegenerateChainError(ValueError):
    """Raised when the state chain has no unique stationary distribution."""


def derive_seed(seed: int, *counters: int) -> int:
    """Derive a 64-bit sub-seed from a root seed and a tuple of counters.

    ``derive_seed(s, a, b)`` hashes the entropy ``[s, a, b]`` through
    :class:`numpy.random.SeedSequence`, so trial ``b`` of sweep point ``a``
    always sees the same stream regardless of execution order.
    """
    ss = np.random.SeedSequence([int(seed), *(int(c) for c in counters)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelParams:
    p_g_to_b: float
    p_b_to_g: float
    q_emit: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        _check_prob("p_g_to_b", self.p_g_to_b)
        _check_prob("p_b_to_g", self.p_b_to_g)
        table = tuple(tuple(float(v) for v in row) for row in self.q_emit)
        if len(table) != 2 or any(len(row) != 2 for row in table):
            raise ValueError("q_emit must be a 2x2 table")
        for i in range(2):
            for j in range(2):
                _check_prob(f"q_emit[{i}][{j}]", table[i][j])
        object.__setattr__(self, "p_g_to_b", float(self.p_g_to_b))
        object.__setattr__(self, "p_b_to_g", float(self.p_b_to_g))
        object.__setattr__(self, "q_emit", table)

    @classmethod
    def gec(cls, p_g_to_b: float, p_b_to_g: float, q_g: float, q_b: float) -> "ChannelParams":
        """Destination-state convention: the flip probability depends only on
        the state being entered."""
        return cls(p_g_to_b, p_b_to_g, ((q_g, q_g), (q_b, q_b)))

    @property
    def is_destination_convention(self) -> bool:
        return self.q_emit[G][G] == self.q_emit[G][B] and self.q_emit[B][G] == self.q_emit[B][B]

    @property
    def q_g(self) -> float:
        """Flip probability on entering G (``q_{G<-B}``)."""
        return self.q_emit[G][B]

    @property
    def q_b(self) -> float:
        """Flip probability on entering B (``q_{B<-G}``)."""
        return self.q_emit[B][G]

    def transition_matrix(self) -> np.ndarray:
        """``P[j, i] = p(i | j)``; rows are the source state."""
        return np.array(
            [[1.0 - self.p_g_to_b, self.p_g_to_b], [self.p_b_to_g, 1.0 - self.p_b_to_g]]
        )

    def emission_matrix(self) -> np.ndarray:
        """``E[j, i] = q_{i<-j}``, indexed like :meth:`transition_matrix`."""
        return np.array(self.q_emit).T.copy()

    def transition(self, start: int, end: int) -> float:
        return float(self.transition_matrix()[start, end])

    def emission(self, start: int, end: int) -> float:
        return self.q_emit[end][start]

    def swapped(self) -> "ChannelParams":
        """Same channel with the G/B labels exchanged."""
        q = self.q_emit
        return ChannelParams(self.p_b_to_g, self.p_g_to_b, ((q[B][B], q[B][G]), (q[G][B], q[G][G])))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"p_g_to_b": self.p_g_to_b, "p_b_to_g": self.p_b_to_g}
        if self.is_destination_convention:
            out["q_g"] = self.q_g
            out["q_b"] = self.q_b
        else:
            out["q_emit"] = [list(row) for row in self.q_emit]
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChannelParams":
        try:
            p_gb, p_bg = data["p_g_to_b"], data["p_b_to_g"]
        except KeyError as exc:
            raise ValueError(f"channel description is missing {exc.args[0]!r}") from None
        if "q_emit" in data:
            if "q_g" in data or "q_b" in data:
                raise ValueError("give either q_emit or q_g/q_b, not both")
            return cls(p_gb, p_bg, tuple(tuple(row) for row in data["q_emit"]))
        if "q_g" not in data or "q_b" not in data:
            raise ValueError("channel description needs q_g and q_b (or q_emit)")
        return cls.gec(p_gb, p_bg, data["q_g"], data["q_b"])


def stationary_distribution(params: ChannelParams) -> tuple[float, float]:
    total = params.p_g_to_b + params.p_b_to_g
    if total <= 0.0:
        raise DegenerateChainError("both transition probabilities are zero; no unique stationary distribution")
    pi_g = params.p_b_to_g / total
    return pi_g, 1.0 - pi_g


def average_inversion_probability(params: ChannelParams) -> float:
    """Long-run fraction of flipped bits.

    Each transition ``j -> i`` is weighted by its stationary frequency
    ``pi_j p(i|j)``; under the destination convention this is
    ``pi_B q_B + pi_G q_G``.
    """
    pi = np.array(stationary_distribution(params))
    freq = pi[:, None] * params.transition_matrix()
    return float(np.sum(freq * params.emission_matrix()))


@njit(cache=True)
def _markov_noise(u, v, trans, emit, start):
    n = u.shape[0]
    noise = np.zeros(n, dtype=np.uint8)
    states = np.zeros(n, dtype=np.uint8)
    s = start
    for k in range(n):
        nxt = 1 if u[k] < trans[s, 1] else 0
        if v[k] < emit[s, nxt]:
            noise[k] = 1
        states[k] = nxt
        s = nxt
    return noise, states


def sample_noise(
    params: ChannelParams, length: int, seed: int, *, stationary_start: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a noise sequence and the state entered at each position.

    The chain starts in G (or in a stationary draw when ``stationary_start``);
    position ``k`` is produced by one transition followed by a flip drawn with
    the probability attached to that transition.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    rng = np.random.default_rng(seed)
    start = G
    if stationary_start:
        pi_g, _ = stationary_distribution(params)
        start = G if rng.random() < pi_g else B
    u = rng.random(length)
    v = rng.random(length)
    return _markov_noise(u, v, params.transition_matrix(), params.emission_matrix(), start)


def as_bits(values: Sequence[int] | np.ndarray, name: str = "bits") -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8, copy=False)


def apply_channel(codeword, noise) -> np.ndarray:
    x = as_bits(codeword, "codeword")
    z = as_bits(noise, "noise")
    if x.shape != z.shape:
        raise ValueError(f"length mismatch: codeword {x.size}, noise {z.size}")
    return x ^ z


def states_to_text(states: np.ndarray) -> str:
    return "".join(STATE_LABELS[int(s)] for s in states)


def states_from_text(text: str) -> np.ndarray:
    labels = [c for c in text if not c.isspace()]
    bad = set(labels) - set(STATE_LABELS)
    if bad:
        raise ValueError(f"unknown state labels: {sorted(bad)}")
    return np.array([STATE_LABELS.index(c) for c in labels], dtype=np.uint8)
