"""Regular LDPC parity-check matrices: construction, alist I/O and encoding."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .channel import as_bits, derive_seed


class ConstructionError(RuntimeError):
    """The matrix generator could not satisfy one of its structural rules."""


class AlistParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RankDeficientError(ValueError):
    def __init__(self, rank: int, n_rows: int):
        super().__init__(f"parity-check matrix has GF(2) rank {rank} < {n_rows} rows")
        self.rank = rank


class ParityCheckMatrix:
    """Sparse binary M x N matrix stored as sorted column indices per row."""

    def __init__(self, n_cols: int, rows: Iterable[Iterable[int]]):
        self.n_cols = int(n_cols)
        if self.n_cols <= 0:
            raise ValueError("matrix needs at least one column")
        rows = tuple(tuple(int(c) for c in row) for row in rows)
        for r, row in enumerate(rows):
            if any(b <= a for a, b in zip(row, row[1:])):
                raise ValueError(f"row {r} column indices are not strictly increasing")
            if row and (row[0] < 0 or row[-1] >= self.n_cols):
                raise ValueError(f"row {r} has a column index outside [0, {self.n_cols})")
        self.rows = rows

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def rate(self) -> float:
        """Nominal rate (N - M) / N."""
        return (self.n_cols - self.n_rows) / self.n_cols

    @cached_property
    def columns(self) -> tuple[tuple[int, ...], ...]:
        cols: list[list[int]] = [[] for _ in range(self.n_cols)]
        for r, row in enumerate(self.rows):
            for c in row:
                cols[c].append(r)
        return tuple(tuple(c) for c in cols)

    @property
    def row_weights(self) -> np.ndarray:
        return np.array([len(r) for r in self.rows], dtype=np.int64)

    @property
    def col_weights(self) -> np.ndarray:
        return np.array([len(c) for c in self.columns], dtype=np.int64)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        indptr = np.cumsum([0] + [len(r) for r in self.rows])
        indices = np.fromiter((c for row in self.rows for c in row), dtype=np.int64, count=indptr[-1])
        data = np.ones(indptr[-1], dtype=np.int32)
        return sp.csr_matrix((data, indices, indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.uint8)
        for r, row in enumerate(self.rows):
            out[r, list(row)] = 1
        return out

    @classmethod
    def from_dense(cls, dense) -> "ParityCheckMatrix":
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(dense.shape[1], [np.flatnonzero(row).tolist() for row in dense])

    def syndrome(self, word) -> np.ndarray:
        """``H x^T mod 2``; accepts a single word or a (trials, N) batch."""
        x = np.asarray(word)
        if x.shape[-1] != self.n_cols:
            raise ValueError(f"word length {x.shape[-1]} != N={self.n_cols}")
        s = self.csr @ x.astype(np.int32).T
        return (np.asarray(s).T % 2).astype(np.uint8)

    def is_codeword(self, word) -> bool:
        return not self.syndrome(word).any()

    def four_cycle_pairs(self) -> list[tuple[int, int]]:
        """Column pairs sharing two or more rows."""
        counts: Counter = Counter()
        for row in self.rows:
            for a in range(len(row)):
                for b in range(a + 1, len(row)):
                    counts[row[a], row[b]] += 1
        return sorted(pair for pair, n in counts.items() if n >= 2)

    def __eq__(self, other):
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.n_cols == other.n_cols and self.rows == other.rows

    def __hash__(self):
        return hash((self.n_cols, self.rows))

    def __repr__(self):
        return f"ParityCheckMatrix(M={self.n_rows}, N={self.n_cols})"


@dataclass(frozen=True)
class CodeSpec:
    n: int
    j: int
    k: int

    def __post_init__(self):
        if self.j < 2:
            raise ValueError("column weight j must be at least 2")
        if self.k <= self.j:
            raise ValueError("row weight k must exceed column weight j")
        if self.n <= 0 or (self.n * self.j) % self.k:
            raise ValueError(f"n*j = {self.n * self.j} is not divisible by k = {self.k}")
        if self.k > self.n:
            raise ValueError("row weight k cannot exceed the block length")

    @property
    def m(self) -> int:
        return self.n * self.j // self.k


# ---------------------------------------------------------------------------
# construction


class _Builder:
    """Mutable row/column incidence sets used while repairing a matrix."""

    def __init__(self, n_rows: int, n_cols: int, rng: np.random.Generator):
        self.rows = [set() for _ in range(n_rows)]
        self.cols = [set() for _ in range(n_cols)]
        self.rng = rng

    def add(self, r: int, c: int):
        self.rows[r].add(c)
        self.cols[c].add(r)

    def remove(self, r: int, c: int):
        self.rows[r].discard(c)
        self.cols[c].discard(r)

    def has(self, r: int, c: int) -> bool:
        return c in self.rows[r]

    def creates_cycle(self, r: int, c: int) -> bool:
        """Would setting (r, c) give column c two common rows with another column?"""
        others = self.cols[c]
        return any(others & self.cols[c2] for c2 in self.rows[r] if c2 != c)

    def four_cycles(self) -> list[tuple[int, int, tuple[int, ...]]]:
        shared: dict[tuple[int, int], list[int]] = {}
        for r, row in enumerate(self.rows):
            row = sorted(row)
            for a in range(len(row)):
                for b in range(a + 1, len(row)):
                    shared.setdefault((row[a], row[b]), []).append(r)
        return [(a, b, tuple(rs)) for (a, b), rs in shared.items() if len(rs) >= 2]

    def matrix(self) -> ParityCheckMatrix:
        return ParityCheckMatrix(len(self.cols), [sorted(r) for r in self.rows])


def _base_permutation(spec: CodeSpec, rng) -> _Builder:
    # one random matching of the n*j column sockets onto the m*k row sockets
    b = _Builder(spec.m, spec.n, rng)
    perm = rng.permutation(spec.n * spec.j)
    clashes = []
    for socket, slot in enumerate(perm):
        r, c = int(slot) // spec.k, socket // spec.j
        if b.has(r, c):
            clashes.append(c)
        else:
            b.add(r, c)
    for c in clashes:
        free = [r for r in range(spec.m) if not b.has(r, c)]
        b.add(int(rng.choice(free)), c)
    return b


def _base_gallager(spec: CodeSpec, rng) -> _Builder:
    b = _Builder(spec.m, spec.n, rng)
    band = spec.n // spec.k
    for layer in range(spec.j):
        order = np.arange(spec.n) if layer == 0 else rng.permutation(spec.n)
        for c_pos, c in enumerate(order):
            b.add(layer * band + c_pos // spec.k, int(c))
    return b


def _repair_short_rows(b: _Builder):
    rng = b.rng
    for r, row in enumerate(b.rows):
        while len(row) < 2:
            free = [c for c in range(len(b.cols)) if c not in row]
            b.add(r, int(rng.choice(free)))


def _repair_even_columns(b: _Builder):
    if any(len(col) % 2 for col in b.cols):
        return
    rng = b.rng
    n_rows, n_cols = len(b.rows), len(b.cols)
    used_cols: set[int] = set()
    added = 0
    while added < 2 and len(used_cols) < n_cols:
        r, c = int(rng.integers(n_rows)), int(rng.integers(n_cols))
        if c in used_cols or b.has(r, c):
            continue
        b.add(r, c)
        used_cols.add(c)
        added += 1


def _repair_four_cycles(b: _Builder, budget: int):
    rng = b.rng
    n_rows = len(b.rows)
    attempts = 0
    while True:
        cycles = b.four_cycles()
        if not cycles:
            return
        c1, c2, shared = cycles[int(rng.integers(len(cycles)))]
        r = int(rng.choice(shared[:2]))
        c = c1 if rng.random() < 0.5 else c2
        tries = 0 if len(b.rows[r]) > 2 else n_rows  # never thin a row below weight 2
        while tries < n_rows:
            tries += 1
            target = int(rng.integers(n_rows))
            if b.has(target, c):
                continue
            b.remove(r, c)
            if b.creates_cycle(target, c):
                b.add(r, c)
                continue
            b.add(target, c)
            break
        attempts += tries or 1
        if attempts > budget:
            raise ConstructionError(
                f"could not eliminate length-4 cycles within {budget} attempts "
                f"({len(b.four_cycles())} column pairs still share two rows)"
            )


def generate_parity_matrix(
    spec: CodeSpec, seed: int, *, method: str = "permutation", full_rank: bool = False,
    max_restarts: int = 64,
) -> ParityCheckMatrix:
    """Random regular (j, k) parity-check matrix with the three construction repairs.

    After the base placement: rows lighter than 2 receive random 1s; if every
    column weight is even, two extra 1s go to random cells in distinct
    columns; finally any column pair sharing two rows has one of the
    offending 1s moved within its column, for at most ``100 * n`` attempts.

    ``method`` picks the base placement: ``"permutation"`` matches the
    ``n*j`` column sockets to row sockets with a single random permutation;
    ``"gallager"`` stacks ``j`` column-permuted copies of an ``n/k``-row band.
    With ``full_rank`` the whole draw is repeated (on derived seeds) until the
    matrix has GF(2) rank M, as the encoder requires.
    """
    builders = {"permutation": _base_permutation, "gallager": _base_gallager}
    if method not in builders:
        raise ValueError(f"unknown construction method {method!r}")
    for attempt in range(max_restarts if full_rank else 1):
        rng = np.random.default_rng(derive_seed(seed, attempt))
        b = builders[method](spec, rng)
        _repair_short_rows(b)
        _repair_even_columns(b)
        _repair_four_cycles(b, budget=100 * spec.n)
        matrix = b.matrix()
        if not full_rank or gf2_rank(matrix) == matrix.n_rows:
            return matrix
    raise ConstructionError(f"no full-rank matrix found in {max_restarts} draws")


# ---------------------------------------------------------------------------
# alist


def save_alist(matrix: ParityCheckMatrix) -> str:
    cols = matrix.columns
    col_w = [len(c) for c in cols]
    row_w = [len(r) for r in matrix.rows]
    max_c, max_r = max(col_w), max(row_w)

    def line(values):
        return " ".join(str(v) for v in values)

    out = [
        line([matrix.n_cols, matrix.n_rows]),
        line([max_c, max_r]),
        line(col_w),
        line(row_w),
    ]
    out += [line([r + 1 for r in c] + [0] * (max_c - len(c))) for c in cols]
    out += [line([c + 1 for c in r] + [0] * (max_r - len(r))) for r in matrix.rows]
    return "\n".join(out) + "\n"


def load_alist(text: str) -> ParityCheckMatrix:
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, toks) for no, toks in lines if toks]

    def ints(no, toks):
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise AlistParseError(no, "non-integer entry") from None

    if not lines:
        raise AlistParseError(1, "empty file")
    no1, t1 = lines[0]
    header = ints(no1, t1)
    if len(header) != 2:
        raise AlistParseError(no1, "expected 'N M'")
    n, m = header
    if n <= 0 or m <= 0:
        raise AlistParseError(no1, f"column and row counts must be positive, got N={n} M={m}")
    if len(lines) < 4:
        raise AlistParseError(lines[-1][0] + 1, "truncated header")
    (no2, t2), (no3, t3), (no4, t4) = lines[1:4]
    maxes = ints(no2, t2)
    if len(maxes) != 2:
        raise AlistParseError(no2, "expected 'max_col_weight max_row_weight'")
    col_w, row_w = ints(no3, t3), ints(no4, t4)
    if len(col_w) != n:
        raise AlistParseError(no3, f"expected {n} column weights, got {len(col_w)}")
    if len(row_w) != m:
        raise AlistParseError(no4, f"expected {m} row weights, got {len(row_w)}")
    if max(col_w) != maxes[0] or max(row_w) != maxes[1]:
        raise AlistParseError(no2, "maximum weights disagree with the weight lists")
    body = lines[4:]
    if len(body) < n + m:
        raise AlistParseError(body[-1][0] + 1 if body else no4 + 1, "missing index lines")

    col_sets = []
    for c in range(n):
        no, toks = body[c]
        idx = [v for v in ints(no, toks) if v != 0]
        if len(idx) != col_w[c]:
            raise AlistParseError(no, f"column {c + 1} lists {len(idx)} rows, weight says {col_w[c]}")
        if any(v < 1 or v > m for v in idx):
            raise AlistParseError(no, f"row index out of range 1..{m}")
        col_sets.append(set(v - 1 for v in idx))
    rows = []
    for r in range(m):
        no, toks = body[n + r]
        idx = [v for v in ints(no, toks) if v != 0]
        if len(idx) != row_w[r]:
            raise AlistParseError(no, f"row {r + 1} lists {len(idx)} columns, weight says {row_w[r]}")
        if any(v < 1 or v > n for v in idx):
            raise AlistParseError(no, f"column index out of range 1..{n}")
        for v in idx:
            if r not in col_sets[v - 1]:
                raise AlistParseError(no, f"entry ({r + 1}, {v}) missing from the column section")
        rows.append(sorted(v - 1 for v in idx))
    if sum(row_w) != sum(col_w):
        raise AlistParseError(no3, "row and column weights count different numbers of 1s")
    return ParityCheckMatrix(n, rows)


# ---------------------------------------------------------------------------
# GF(2) elimination and encoding


def _packed(matrix: ParityCheckMatrix) -> np.ndarray:
    return np.packbits(matrix.to_dense().astype(bool), axis=1)


def _bit(packed: np.ndarray, col: int) -> np.ndarray:
    return (packed[:, col >> 3] >> (7 - (col & 7))) & 1


def _eliminate(matrix: ParityCheckMatrix) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2), pivoting on columns in index order."""
    work = _packed(matrix)
    m = matrix.n_rows
    pivots: list[int] = []
    row = 0
    for col in range(matrix.n_cols):
        if row == m:
            break
        column = _bit(work, col)
        hits = np.flatnonzero(column[row:]) + row
        if hits.size == 0:
            continue
        p = hits[0]
        if p != row:
            work[[row, p]] = work[[p, row]]
            column[[row, p]] = column[[p, row]]
        others = np.flatnonzero(column)
        others = others[others != row]
        work[others] ^= work[row]
        pivots.append(col)
        row += 1
    return work, pivots


def gf2_rank(matrix: ParityCheckMatrix) -> int:
    return len(_eliminate(matrix)[1])


class Encoder:
    """Systematic encoder ``u = [c | s]`` with ``c = A^{-1} B s``.

    ``column_permutation[t]`` is the codeword position that holds the t-th
    entry of ``[c | s]``; it is the identity when the first M columns of H are
    independent, otherwise later columns are swapped in greedily.
    """

    def __init__(self, matrix: ParityCheckMatrix, column_permutation: Sequence[int], solve_table: np.ndarray):
        self.matrix = matrix
        self.column_permutation = np.asarray(column_permutation, dtype=np.int64)
        self.solve_table = np.asarray(solve_table, dtype=np.uint8)
        self._table_f = self.solve_table.T.astype(np.float32)

    @property
    def n_message(self) -> int:
        return self.matrix.n_cols - self.matrix.n_rows

    @property
    def check_positions(self) -> np.ndarray:
        return self.column_permutation[: self.matrix.n_rows]

    @property
    def message_positions(self) -> np.ndarray:
        return self.column_permutation[self.matrix.n_rows:]

    def encode(self, message) -> np.ndarray:
        s = np.asarray(message)
        if s.shape[-1] != self.n_message:
            raise ValueError(f"message length {s.shape[-1]} != N - M = {self.n_message}")
        if s.size and not np.isin(s, (0, 1)).all():
            raise ValueError("message must contain only 0 and 1")
        s = s.astype(np.uint8)
        # float32 matmul is exact here: every partial sum stays below 2**24
        c = (s.astype(np.float32) @ self._table_f).astype(np.int64) & 1
        u = np.zeros(s.shape[:-1] + (self.matrix.n_cols,), dtype=np.uint8)
        u[..., self.check_positions] = c
        u[..., self.message_positions] = s
        return u

    def extract_message(self, codeword) -> np.ndarray:
        return np.asarray(codeword)[..., self.message_positions]

    def to_dict(self) -> dict:
        return {
            "n": self.matrix.n_cols,
            "m": self.matrix.n_rows,
            "column_permutation": self.column_permutation.tolist(),
        }


def build_encoder(matrix: ParityCheckMatrix) -> Encoder:
    work, pivots = _eliminate(matrix)
    m = matrix.n_rows
    if len(pivots) < m:
        raise RankDeficientError(len(pivots), m)
    rref = np.unpackbits(work, axis=1, count=matrix.n_cols)
    pivot_set = set(pivots)
    free = [c for c in range(matrix.n_cols) if c not in pivot_set]
    return Encoder(matrix, pivots + free, rref[:, free])


def encode(encoder: Encoder, message) -> np.ndarray:
    return encoder.encode(message)
