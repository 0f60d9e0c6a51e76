from __future__ import annotations

import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbb84.gf2_linalg import (
    BitMatrix,
    BitString,
    all_bitstrings,
    extend_to_basis,
    hamming_distance,
    mat_vec,
    merge_bits,
    nullspace,
    random_stacked_full_rank,
    rank,
    solve,
    weight,
)


def bitstrings(length):
    return st.lists(st.integers(0, 1), min_size=length, max_size=length).map(BitString)


@st.composite
def same_length_triples(draw, max_len=16):
    n = draw(st.integers(0, max_len))
    return draw(bitstrings(n)), draw(bitstrings(n)), draw(bitstrings(n))


@st.composite
def matrices(draw, max_rows=6, max_cols=8):
    rows = draw(st.integers(0, max_rows))
    cols = draw(st.integers(1, max_cols))
    bits = draw(st.lists(st.integers(0, 1), min_size=rows * cols, max_size=rows * cols))
    return BitMatrix(np.array(bits, dtype=np.uint8).reshape(rows, cols), cols=cols)


# -- BitString ------------------------------------------------------------------------------


def test_bitstring_ascii_round_trip():
    s = BitString("01101")
    assert str(s) == "01101"
    assert s[0] == 0 and s[1] == 1
    assert len(s) == 5
    assert s.weight == 3


def test_bitstring_int_order_is_msb_first():
    assert BitString("01").to_int() == 1
    assert BitString("10").to_int() == 2
    assert BitString.from_int(5, 4) == BitString("0101")
    with pytest.raises(ValueError):
        BitString.from_int(4, 2)


def test_bitstring_rejects_non_bits():
    with pytest.raises(ValueError):
        BitString([0, 2])
    with pytest.raises(ValueError):
        BitString("01x")


def test_bitstring_xor_length_mismatch():
    with pytest.raises(ValueError):
        BitString("01") ^ BitString("011")


def test_bitstring_is_immutable():
    s = BitString("0110")
    with pytest.raises(ValueError):
        s.bits[0] = 1


def test_select_and_merge_are_inverse():
    mask = BitString("10110")
    full = BitString("11001")
    ones, zeros = full.select(mask), full.select(~mask)
    assert str(ones) == "100"
    assert str(zeros) == "11"
    assert merge_bits(mask, ones, zeros) == full


@given(same_length_triples())
def test_weight_of_xor_is_hamming_distance(abc):
    a, b, _ = abc
    assert weight(a ^ b) == hamming_distance(a, b)
    assert 0 <= weight(a) <= len(a)


@given(same_length_triples())
def test_hamming_distance_translation_invariant(abc):
    a, b, c = abc
    assert hamming_distance(a, b) == hamming_distance(c ^ a, c ^ b)


@given(st.integers(0, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
def test_int_round_trip(nv):
    n, v = nv
    assert BitString.from_int(v, n).to_int() == v


# -- BitMatrix ------------------------------------------------------------------------------


def test_mat_vec_examples():
    M = BitMatrix("110;101")
    assert str(mat_vec(M, BitString("101"))) == "10"
    assert str(mat_vec(BitMatrix.identity(3), BitString("011"))) == "011"
    assert str(mat_vec(M, BitString("000"))) == "00"


def test_mat_vec_dimension_mismatch():
    with pytest.raises(ValueError):
        mat_vec(BitMatrix("110;101"), BitString("10"))


def test_rank_examples():
    assert rank(BitMatrix("10;01")) == 2
    assert rank(BitMatrix("11;11")) == 1
    assert rank(BitMatrix("110;101")) == 2


def test_matrix_ascii_round_trip():
    M = BitMatrix.from_str("110;101")
    assert str(M) == "110;101"
    assert M.shape == (2, 3)


def test_empty_matrix_keeps_column_count():
    M = BitMatrix(np.zeros((0, 4), dtype=np.uint8))
    assert M.shape == (0, 4)
    assert len(mat_vec(M, BitString("1010"))) == 0


@given(matrices(), st.data())
def test_mat_vec_is_linear(M, data):
    x = data.draw(bitstrings(M.cols))
    y = data.draw(bitstrings(M.cols))
    assert mat_vec(M, x ^ y) == mat_vec(M, x) ^ mat_vec(M, y)


@given(matrices())
def test_rank_bounded_by_shape(M):
    assert 0 <= rank(M) <= min(M.rows, M.cols)


@given(matrices())
def test_nullspace_is_kernel_with_right_dimension(M):
    K = nullspace(M)
    assert K.rows == M.cols - rank(M)
    for row in K.row_list():
        assert mat_vec(M, row).weight == 0
    assert rank(K) == K.rows


@given(matrices(), st.data())
def test_solve_hits_reachable_targets(M, data):
    x = data.draw(bitstrings(M.cols))
    target = mat_vec(M, x)
    sol = solve(M, target)
    assert sol is not None
    assert mat_vec(M, sol) == target


def test_solve_reports_unreachable_target():
    assert solve(BitMatrix("11;11"), BitString("10")) is None


def test_extend_to_basis_spans_everything():
    rows = BitMatrix("110;011")
    full = extend_to_basis(rows)
    assert full.rows == 3 and rank(full) == 3
    assert full.row_list()[:2] == rows.row_list()
    with pytest.raises(ValueError):
        extend_to_basis(BitMatrix("11;11"))


def test_all_bitstrings_order():
    words = all_bitstrings(2)
    assert [''.join(map(str, w)) for w in words] == ["00", "01", "10", "11"]


# -- random full-rank pairs ---------------------------------------------------------------------


def test_full_rank_single_option():
    rng = np.random.default_rng(1)
    for _ in range(20):
        P_C, P_K = random_stacked_full_rank(1, 0, 1, rng)
        assert str(P_C) == "1"
        assert P_K.shape == (0, 1)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.data())
def test_stacked_rank_is_full(seed, n, data):
    r = data.draw(st.integers(0, n))
    m = data.draw(st.integers(0, n - r))
    P_C, P_K = random_stacked_full_rank(r, m, n, np.random.default_rng(seed))
    assert P_C.shape == (r, n) and P_K.shape == (m, n)
    assert rank(P_C.vstack(P_K)) == r + m


def test_full_rank_rejects_oversized_request():
    with pytest.raises(ValueError):
        random_stacked_full_rank(2, 2, 3, np.random.default_rng(0))


def _rank3_stacks_4():
    out = []
    for bits in itertools.product((0, 1), repeat=12):
        M = BitMatrix(np.array(bits, dtype=np.uint8).reshape(3, 4))
        if rank(M) == 3:
            out.append(str(M))
    return out


def test_full_rank_pairs_are_uniform():
    valid = _rank3_stacks_4()
    # ordered triples of independent rows in F2^4
    assert len(valid) == 15 * 14 * 12
    rng = np.random.default_rng(7)
    draws = 10_000
    counts = Counter()
    for _ in range(draws):
        P_C, P_K = random_stacked_full_rank(2, 1, 4, rng)
        counts[str(P_C.vstack(P_K))] += 1
    assert set(counts) <= set(valid)
    expected = draws / len(valid)
    sigma = np.sqrt(expected * (1 - 1 / len(valid)))
    assert max(abs(counts[v] - expected) for v in valid) <= 5 * sigma
    # Pearson statistic against its own mean and spread.
    chi2 = sum((counts[v] - expected) ** 2 / expected for v in valid)
    dof = len(valid) - 1
    assert abs(chi2 - dof) <= 5 * np.sqrt(2 * dof)
