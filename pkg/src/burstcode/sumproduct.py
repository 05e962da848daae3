"""Tanner graph and the flooding sum-product decoder.

LLRs throughout the package are ``log Pr(bit=1) / Pr(bit=0)``: positive values
favour 1, and a zero LLR decides 0.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .channel import as_bits
from .codes import ParityCheckMatrix

LLR_MAX = 30.0
# smallest magnitude fed to phi; phi(_TINY) ~ 690 so a zero message contributes
# (numerically) nothing to the other edges of its check
_TINY = 1e-300


class TannerGraph:
    """Edge list of H, grouped by check node.

    Edge ``e`` joins check ``edge_check[e]`` and symbol ``edge_var[e]``; the
    two directed messages on it live in caller-owned arrays of length
    ``n_edges``.
    """

    def __init__(self, matrix: ParityCheckMatrix):
        self.matrix = matrix
        self.n_vars = matrix.n_cols
        self.n_checks = matrix.n_rows
        self.edge_check = np.repeat(np.arange(self.n_checks), matrix.row_weights)
        self.edge_var = np.fromiter(
            (c for row in matrix.rows for c in row), dtype=np.int64, count=int(matrix.row_weights.sum())
        )
        self.check_degree = matrix.row_weights
        self.var_degree = np.bincount(self.edge_var, minlength=self.n_vars)

    @property
    def n_edges(self) -> int:
        return self.edge_var.size

    def check_sum(self, edge_values: np.ndarray) -> np.ndarray:
        return np.bincount(self.edge_check, weights=edge_values, minlength=self.n_checks)

    def var_sum(self, edge_values: np.ndarray) -> np.ndarray:
        return np.bincount(self.edge_var, weights=edge_values, minlength=self.n_vars)

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        return self.check_sum(bits[self.edge_var]).astype(np.int64) & 1

    def unsatisfied(self, bits: np.ndarray) -> int:
        return int(self.syndrome(bits).sum())


def channel_llrs(received, flip_prob) -> np.ndarray:
    """Memoryless BSC LLRs; ``flip_prob`` may be a scalar or per-position array."""
    y = as_bits(received, "received")
    q = np.broadcast_to(np.asarray(flip_prob, dtype=float), y.shape)
    with np.errstate(divide="ignore"):
        mag = np.log1p(-q) - np.log(q)
    mag = np.clip(mag, -LLR_MAX, LLR_MAX)
    return np.where(y == 1, mag, -mag)


def hard_decision(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) > 0).astype(np.uint8)


def _phi(x: np.ndarray) -> np.ndarray:
    # phi(x) = -log tanh(x/2); an involution on (0, inf)
    return -np.log(np.tanh(0.5 * x))


def check_update(graph: TannerGraph, v2c: np.ndarray) -> np.ndarray:
    """Check-to-symbol messages from symbol-to-check messages.

    The outgoing message favours 1 iff an odd number of the other edges
    favour 1 (with LLRs oriented towards 1 this is the tanh rule applied to
    the negated messages); magnitudes combine as ``phi(sum phi(|m|))``.
    """
    pos = (v2c > 0).astype(float)
    ones = graph.check_sum(pos)[graph.edge_check] - pos
    sign = 2.0 * (np.rint(ones).astype(np.int64) & 1) - 1.0
    p = _phi(np.clip(np.abs(v2c), _TINY, None))
    others = graph.check_sum(p)[graph.edge_check] - p
    mag = _phi(np.clip(others, _TINY, None))
    return sign * np.minimum(mag, LLR_MAX)


class SumProductState:
    """Message buffers of one decode; lets a caller resume with new intrinsics."""

    def __init__(self, graph: TannerGraph):
        self.graph = graph
        self.c2v = np.zeros(graph.n_edges)

    def extrinsic(self) -> np.ndarray:
        """Per-symbol sum of incoming check messages."""
        return self.graph.var_sum(self.c2v)

    def run(self, intrinsic: np.ndarray, n_iters: int, early_stop: bool = True):
        """Run up to ``n_iters`` flooding iterations.

        Returns ``(posterior, bits, iterations, converged)``.  When
        ``early_stop`` is set the hard decision of the current posterior is
        checked before the first iteration and after each one.
        """
        g = self.graph
        intrinsic = np.asarray(intrinsic, dtype=float)
        posterior = intrinsic + self.extrinsic()
        bits = hard_decision(posterior)
        if early_stop and not g.syndrome(bits).any():
            return posterior, bits, 0, True
        for it in range(1, n_iters + 1):
            v2c = np.clip(posterior[g.edge_var] - self.c2v, -LLR_MAX, LLR_MAX)
            self.c2v = check_update(g, v2c)
            posterior = intrinsic + self.extrinsic()
            bits = hard_decision(posterior)
            if early_stop and not g.syndrome(bits).any():
                return posterior, bits, it, True
        return posterior, bits, n_iters, not g.syndrome(bits).any()


class DecodeResult(NamedTuple):
    bits: np.ndarray
    converged: bool
    iterations: int


def sum_product_posterior(graph: TannerGraph, llrs, n_iters: int) -> np.ndarray:
    """Posterior LLRs after exactly ``n_iters`` iterations (no early stop)."""
    posterior, _, _, _ = SumProductState(graph).run(llrs, n_iters, early_stop=False)
    return posterior


def decode_sp(graph: TannerGraph, llrs, max_iters: int = 50, early_stop: bool = True) -> DecodeResult:
    """Hard decisions after flooding; stops at the first zero syndrome unless
    ``early_stop`` is False."""
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (graph.n_vars,):
        raise ValueError(f"expected {graph.n_vars} LLRs, got shape {llrs.shape}")
    _, bits, its, ok = SumProductState(graph).run(llrs, max_iters, early_stop)
    return DecodeResult(bits, ok, its)
