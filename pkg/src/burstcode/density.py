"""Approximate density evolution for hard-decision decoding of (j, k) codes
on the two-state channel, and the decoding region over the state error
probabilities.

The recursion tracks the error probability ``x_i`` of a digit after ``i``
tiers of flipping, where a digit flips when all of its ``j - 1`` other checks
fail:

    x_{i+1} = e - e * ((1 + (1-2x_i)^(k-1)) / 2)^(j-1)
                + (1 - e) * ((1 - (1-2x_i)^(k-1)) / 2)^(j-1)

and ``e`` is the channel's average inversion probability.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import ChannelParams, average_inversion_probability


@dataclass(frozen=True)
class DeState:
    eta_bar: float
    eta_i: float
    j: int
    k: int

    @property
    def flagged(self) -> bool:
        """True when either probability exceeds 1/2 (outside the meaningful range)."""
        return self.eta_bar > 0.5 or self.eta_i > 0.5


def _check_degrees(j: int, k: int):
    if j < 2 or k < 2:
        raise ValueError(f"degrees must be >= 2 (got j={j}, k={k})")


def de_map(eta_bar, eta_i, j: int, k: int):
    """Vectorized recursion step; broadcasts over arrays."""
    t = (1.0 - 2.0 * np.asarray(eta_i, dtype=float)) ** (k - 1)
    keep = ((1.0 + t) / 2.0) ** (j - 1)
    gain = ((1.0 - t) / 2.0) ** (j - 1)
    e = np.asarray(eta_bar, dtype=float)
    return np.clip(e - e * keep + (1.0 - e) * gain, 0.0, 1.0)


def de_step(state: DeState) -> float:
    _check_degrees(state.j, state.k)
    return float(de_map(state.eta_bar, state.eta_i, state.j, state.k))


class DeOutcome(NamedTuple):
    converged: bool
    iters: int
    final: float


def run_de(eta_bar: float, j: int, k: int, max_iters: int = 200, eps: float = 1e-6) -> DeOutcome:
    """Iterate from ``x_0 = eta_bar``; converged once an iterate drops below ``eps``."""
    _check_degrees(j, k)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    x = float(eta_bar)
    for i in range(max_iters + 1):
        if x < eps:
            return DeOutcome(True, i, x)
        if i == max_iters:
            break
        x = float(de_map(eta_bar, x, j, k))
    return DeOutcome(False, max_iters, x)


def _run_de_grid(eta_bar: np.ndarray, j: int, k: int, max_iters: int, eps: float):
    # elementwise run_de over an array, same stopping rule
    x = eta_bar.astype(float).copy()
    iters = np.full(x.shape, max_iters, dtype=np.int64)
    done = x < eps
    iters[done] = 0
    for i in range(1, max_iters + 1):
        active = ~done
        if not active.any():
            break
        x[active] = de_map(eta_bar[active], x[active], j, k)
        hit = active & (x < eps)
        iters[hit] = i
        done |= hit
    return done, iters, x


def threshold(j: int, k: int, max_iters: int = 200, eps: float = 1e-6, tol: float = 1e-9) -> float:
    """Largest converging ``eta_bar`` in [0, 0.5], located by bisection."""
    lo, hi = 0.0, 0.5
    if run_de(hi, j, k, max_iters, eps).converged:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if run_de(mid, j, k, max_iters, eps).converged:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class RegionGrid:
    """Decodability raster; ``decodable[a, b]`` is at ``(q_bg_axis[a], q_gb_axis[b])``.

    ``q_bg`` is the bad-state error probability q_{B<-G}, ``q_gb`` the
    good-state one q_{G<-B}.
    """

    q_bg_axis: np.ndarray
    q_gb_axis: np.ndarray
    p_g_to_b: float
    p_b_to_g: float
    j: int
    k: int
    decodable: np.ndarray
    eta_bar: np.ndarray = field(repr=False, default=None)
    iters: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        shape = (self.q_bg_axis.size, self.q_gb_axis.size)
        if self.decodable.shape != shape:
            raise ValueError(f"raster shape {self.decodable.shape} does not match axes {shape}")

    def contains(self, q_bg: float, q_gb: float) -> bool:
        a = int(np.argmin(np.abs(self.q_bg_axis - q_bg)))
        b = int(np.argmin(np.abs(self.q_gb_axis - q_gb)))
        return bool(self.decodable[a, b])

    def is_downward_closed(self) -> bool:
        d = self.decodable
        # a decodable cell needs every cell with smaller coordinates decodable
        ok_a = not np.any(d[1:, :] & ~d[:-1, :])
        ok_b = not np.any(d[:, 1:] & ~d[:, :-1])
        return ok_a and ok_b

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# region j={self.j} k={self.k} p_gb={self.p_g_to_b!r} p_bg={self.p_b_to_g!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q_bg", "q_gb", "eta_bar", "decodable", "iters"])
        for a, qb in enumerate(self.q_bg_axis):
            for b, qg in enumerate(self.q_gb_axis):
                w.writerow([f"{qb:.6g}", f"{qg:.6g}", f"{self.eta_bar[a, b]:.12g}",
                            int(self.decodable[a, b]), int(self.iters[a, b])])
        return buf.getvalue()


def axis(lo: float = 0.0, hi: float = 0.5, steps: int = 101) -> np.ndarray:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("axis bounds must satisfy 0 <= lo <= hi <= 1")
    return np.linspace(lo, hi, steps)


def decoding_region(j: int, k: int, p_g_to_b: float, p_b_to_g: float, q_bg_axis=None, q_gb_axis=None,
                    max_iters: int = 200, eps: float = 1e-6) -> RegionGrid:
    _check_degrees(j, k)
    qa = axis() if q_bg_axis is None else np.asarray(q_bg_axis, dtype=float)
    qb = axis() if q_gb_axis is None else np.asarray(q_gb_axis, dtype=float)
    eta = np.empty((qa.size, qb.size))
    for a, q_bad in enumerate(qa):
        for b, q_good in enumerate(qb):
            eta[a, b] = average_inversion_probability(ChannelParams.gec(p_g_to_b, p_b_to_g, q_good, q_bad))
    ok, iters, _ = _run_de_grid(eta, j, k, max_iters, eps)
    return RegionGrid(qa, qb, p_g_to_b, p_b_to_g, j, k, ok, eta, iters)
