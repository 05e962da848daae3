import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstcode.codes import (
    AlistParseError,
    CodeSpec,
    ConstructionError,
    ParityCheckMatrix,
    RankDeficientError,
    build_encoder,
    encode,
    generate_parity_matrix,
    gf2_rank,
    load_alist,
    save_alist,
)
from oracles import all_patterns, four_cycle_free_dense

SMALL_H = ParityCheckMatrix(4, [[0, 1, 2], [1, 2, 3]])


def check_invariants(h: ParityCheckMatrix):
    assert all(len(r) >= 2 for r in h.rows)
    assert all(list(r) == sorted(set(r)) and r[-1] < h.n_cols for r in h.rows)
    assert four_cycle_free_dense(h.to_dense())


@pytest.mark.parametrize("n,j,k", [(16, 2, 4), (36, 3, 6), (96, 3, 6), (120, 4, 6), (200, 3, 6)])
def test_generated_matrix_invariants(n, j, k):
    h = generate_parity_matrix(CodeSpec(n, j, k), seed=5)
    assert h.shape == (n * j // k, n)
    check_invariants(h)
    # repairs add at most a handful of 1s per column
    assert h.col_weights.min() >= 1
    assert h.rate == pytest.approx(1 - j / k)


def test_small_two_four_code_cannot_avoid_four_cycles():
    # 8 columns of weight 2 over 4 rows need 8 distinct row pairs; only 6 exist
    with pytest.raises(ConstructionError, match="cycles"):
        generate_parity_matrix(CodeSpec(8, 2, 4), seed=1)


def test_generation_is_deterministic():
    spec = CodeSpec(96, 3, 6)
    assert generate_parity_matrix(spec, 11) == generate_parity_matrix(spec, 11)
    assert generate_parity_matrix(spec, 11) != generate_parity_matrix(spec, 12)


def test_bad_spec():
    with pytest.raises(ValueError):
        CodeSpec(10, 3, 4)  # 30 not divisible by 4
    with pytest.raises(ValueError):
        CodeSpec(12, 3, 3)
    with pytest.raises(ValueError):
        CodeSpec(12, 1, 4)


def test_gallager_band_method_also_repairs():
    h = generate_parity_matrix(CodeSpec(120, 3, 6), 3, method="gallager")
    check_invariants(h)
    with pytest.raises(ValueError):
        generate_parity_matrix(CodeSpec(120, 3, 6), 3, method="magic")


def test_full_rank_flag():
    h = generate_parity_matrix(CodeSpec(200, 3, 6), 9, full_rank=True)
    assert gf2_rank(h) == h.n_rows


def test_alist_hand_encoding():
    text = save_alist(SMALL_H)
    assert text.splitlines() == ["4 2", "2 3", "1 2 2 1", "3 3", "1 0", "1 2", "1 2", "2 0", "1 2 3", "2 3 4"]
    assert load_alist(text) == SMALL_H


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(3, 15), st.integers(0, 2**32))
def test_alist_round_trip(m, n, seed):
    rng = np.random.default_rng(seed)
    rows = [sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist()) for _ in range(m)]
    h = ParityCheckMatrix(n, rows)
    assert load_alist(save_alist(h)) == h


@pytest.mark.parametrize("text,line", [
    ("0 2\n", 1),
    ("4 2\n2 3\n1 2 2 1\n3 3\n1 0\n1 2\n1 2\n2 0\n1 2 3\n2 3 5\n", 10),
    ("4 2\n2 3\n1 2 2 1\n3 3\n1 0\n1 2\n1 2\n2 0\n1 2 3\n2 3\n", 10),
    ("4 x\n", 1),
])
def test_alist_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(AlistParseError) as err:
        load_alist(text)
    assert err.value.line == line


def test_encoder_hand_example():
    enc = build_encoder(SMALL_H)
    assert enc.column_permutation.tolist() == [0, 1, 2, 3]
    u = encode(enc, [1, 0])
    assert u.tolist() == [0, 1, 1, 0]
    assert not SMALL_H.syndrome(u).any()
    assert not encode(enc, [0, 0]).any()


def test_encoder_swaps_in_later_column_when_singular():
    h = ParityCheckMatrix(5, [[0, 1, 2], [0, 1, 3, 4]])  # columns 0 and 1 identical
    enc = build_encoder(h)
    assert sorted(enc.check_positions.tolist()) != [0, 1]
    for s in all_patterns(3):
        assert h.is_codeword(enc.encode(s))


def test_rank_deficient_errors():
    h = ParityCheckMatrix(4, [[0, 1], [2, 3], [0, 1, 2, 3]])
    with pytest.raises(RankDeficientError) as err:
        build_encoder(h)
    assert err.value.rank == 2
    with pytest.raises(RankDeficientError):
        build_encoder(ParityCheckMatrix(4, [[0, 1, 2], []]))


def test_wrong_message_length():
    with pytest.raises(ValueError):
        build_encoder(SMALL_H).encode([1, 0, 1])


@pytest.fixture(scope="module")
def code_2000():
    h = generate_parity_matrix(CodeSpec(2000, 3, 6), 1, full_rank=True)
    return h, build_encoder(h)


def test_random_messages_have_zero_syndrome(code_2000):
    h, enc = code_2000
    rng = np.random.default_rng(0)
    words = enc.encode(rng.integers(0, 2, (200, enc.n_message)))
    assert not h.syndrome(words).any()


def test_encoder_is_linear(code_2000):
    _, enc = code_2000
    rng = np.random.default_rng(1)
    s1, s2 = rng.integers(0, 2, (2, enc.n_message))
    assert np.array_equal(enc.encode(s1 ^ s2), enc.encode(s1) ^ enc.encode(s2))
    assert np.array_equal(enc.extract_message(enc.encode(s1)), s1)


def test_four_cycle_pair_scan_agrees_with_dense(code_2000):
    h, _ = code_2000
    assert h.four_cycle_pairs() == []
    bad = ParityCheckMatrix(4, [[0, 1, 2], [0, 1, 3]])
    assert bad.four_cycle_pairs() == [(0, 1)]
    assert not four_cycle_free_dense(bad.to_dense())
