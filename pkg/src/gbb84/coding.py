"""Binary linear codes, exhaustive decoders and Monte Carlo checks of random-code bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gf2_linalg import (
    BitMatrix,
    BitString,
    mat_vec,
    nullspace,
    pack_rows,
    random_stacked_full_rank,
    rank,
    solve,
    unpack_ints,
)
from .sampling_bounds import code_failure_bound, wilson_interval

MAX_EXHAUSTIVE_N = 14
MAX_DECODE_DIM = 22
CSV_HEADER = ("n", "k", "t", "trials", "failures", "estimate", "ci_low", "ci_high", "bound")


def popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(values, dtype=np.int64)).astype(np.int64)


class DecodeStatus(str, enum.Enum):
    DECODED = "Decoded"
    TIE_FAIL = "Tie-Fail"


@dataclass(frozen=True)
class DecodeOutcome:
    status: DecodeStatus
    word: BitString | None = None

    @property
    def ok(self) -> bool:
        return self.status is DecodeStatus.DECODED


class LinearCode:
    """[n, k] binary code given as the kernel of a full-rank parity-check matrix."""

    def __init__(self, parity_check: BitMatrix, generator: BitMatrix | None = None):
        if rank(parity_check) != parity_check.rows:
            raise ValueError("parity-check matrix must have full row rank")
        self.parity_check = parity_check
        self.n = parity_check.cols
        self.r = parity_check.rows
        self.k = self.n - self.r
        if generator is None:
            generator = nullspace(parity_check)
        if generator.shape != (self.k, self.n) or rank(generator) != self.k:
            raise ValueError("generator must be a full-rank k×n matrix")
        if self.k and self.r and generator.matmul(parity_check.T).entries.any():
            raise ValueError("generator rows must have zero syndrome")
        self.generator = generator

    @classmethod
    def from_parity_check(cls, parity_check: BitMatrix | str, n: int | None = None) -> LinearCode:
        if isinstance(parity_check, str):
            parity_check = BitMatrix.from_str(parity_check, cols=n)
        return cls(parity_check)

    @classmethod
    def from_generator(cls, generator: BitMatrix | str, n: int | None = None) -> LinearCode:
        if isinstance(generator, str):
            generator = BitMatrix.from_str(generator, cols=n)
        if rank(generator) != generator.rows:
            raise ValueError("generator must have full row rank")
        return cls(nullspace(generator), generator)

    @classmethod
    def repetition(cls, n: int) -> LinearCode:
        return cls.from_generator(BitMatrix(np.ones((1, n), dtype=np.uint8)))

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator) -> LinearCode:
        """Code whose parity-check matrix is uniform among full-rank (n-k)×n matrices."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        return cls(random_stacked_full_rank(n - k, 0, n, rng)[0])

    def __repr__(self) -> str:
        return f"LinearCode(n={self.n}, k={self.k}, parity_check='{self.parity_check}')"

    @cached_property
    def codeword_words(self) -> np.ndarray:
        """All 2^k codewords packed into uint64 words, shape (2^k, ceil(n/64))."""
        if self.k > MAX_DECODE_DIM:
            raise ValueError(f"dimension k = {self.k} is too large for exhaustive enumeration")
        return span_words(pack_words(self.generator.entries), self.n)

    @cached_property
    def codeword_ints(self) -> np.ndarray:
        """All 2^k codewords packed as integers (requires n <= 63)."""
        return span_ints(self.generator.row_ints().reshape(1, -1))[0] if self.k else np.zeros(1, dtype=np.int64)

    def codewords(self) -> list[BitString]:
        return [BitString(row) for row in unpack_ints(self.codeword_ints, self.n)]

    @property
    def dual_generator(self) -> BitMatrix:
        return self.parity_check

    def min_distance(self) -> int:
        if self.k == 0:
            return 0
        return int(popcount(self.codeword_ints[1:]).min())

    def contains(self, w: BitString) -> bool:
        return syndrome(self, w).weight == 0


def span_ints(rows: np.ndarray) -> np.ndarray:
    """All GF(2) combinations of packed rows, batched: (B, k) -> (B, 2^k).

    Column u holds the combination selected by the bits of u, with row 0 as
    the least significant selector bit.
    """
    rows = np.asarray(rows, dtype=np.int64)
    batch, k = rows.shape
    out = np.zeros((batch, 1 << k), dtype=np.int64)
    for j in range(k):
        half = 1 << j
        out[:, half:2 * half] = out[:, :half] ^ rows[:, j:j + 1]
    return out


def pack_words(bits: np.ndarray) -> np.ndarray:
    """Pack rows of a 0/1 array into uint64 words (bit order is irrelevant for distances)."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    pad = (-bits.shape[1]) % 64
    if pad:
        bits = np.hstack([bits, np.zeros((bits.shape[0], pad), dtype=np.uint8)])
    return np.packbits(bits, axis=1).view(np.uint64)


def span_words(rows: np.ndarray, n: int) -> np.ndarray:
    """All combinations of packed rows (k, W) -> (2^k, W)."""
    k = rows.shape[0]
    width = max(1, (n + 63) // 64)
    out = np.zeros((1 << k, width), dtype=np.uint64)
    for j in range(k):
        half = 1 << j
        out[half:2 * half] = out[:half] ^ rows[j]
    return out


def _nearest_words(received: np.ndarray, candidates: np.ndarray) -> tuple[int, bool]:
    dist = np.bitwise_count(candidates ^ received).sum(axis=1)
    best = dist.min()
    hits = np.flatnonzero(dist == best)
    return int(hits[0]), hits.size == 1


def _check_len(code: LinearCode, w: BitString, what: str = "word") -> None:
    if len(w) != code.n:
        raise ValueError(f"{what} length {len(w)} does not match code length {code.n}")


def syndrome(code: LinearCode, w: BitString) -> BitString:
    """w·P_C^T."""
    _check_len(code, w)
    return mat_vec(code.parity_check, w)


def _decode_among(code: LinearCode, shift: BitString | None, w: BitString) -> DecodeOutcome:
    cands = code.codeword_words
    if shift is not None:
        cands = cands ^ pack_words(shift.bits)[0]
    idx, unique = _nearest_words(pack_words(w.bits)[0], cands)
    if not unique:
        return DecodeOutcome(DecodeStatus.TIE_FAIL)
    word = np.unpackbits(cands[idx].view(np.uint8))[: code.n]
    return DecodeOutcome(DecodeStatus.DECODED, BitString(word))


def nearest_codeword_decode(code: LinearCode, w: BitString) -> DecodeOutcome:
    """Exhaustive nearest-codeword decoding; equidistant nearest codewords give Tie-Fail."""
    _check_len(code, w)
    return _decode_among(code, None, w)


def coset_leader(code: LinearCode, xi: BitString) -> BitString:
    """Some member of the coset {z : z·P_C^T = xi}."""
    if len(xi) != code.r:
        raise ValueError(f"syndrome length {len(xi)} does not match r = {code.r}")
    if code.r == 0:
        return BitString.zeros(code.n)
    z = solve(code.parity_check, xi)
    assert z is not None  # full row rank makes every syndrome reachable
    return z


def coset_decode(code: LinearCode, xi: BitString, w: BitString) -> DecodeOutcome:
    """Nearest member of the coset with syndrome xi; ties give Tie-Fail."""
    _check_len(code, w)
    return _decode_among(code, coset_leader(code, xi), w)


def zero_uniquely_nearest(code: LinearCode, e: BitString) -> bool:
    """True iff |e| < d(e, c) for every nonzero codeword c."""
    _check_len(code, e, "error")
    if code.k == 0:
        return True
    dist = np.bitwise_count(code.codeword_words[1:] ^ pack_words(e.bits)[0]).sum(axis=1)
    return bool((dist > e.weight).all())


def verify_decoder_equivalence(
    code: LinearCode,
    pairs: int = 4,
    rng: np.random.Generator | None = None,
    max_n: int = MAX_EXHAUSTIVE_N,
) -> bool:
    """Exhaustively compare the two decoders with the zero-uniquely-nearest criterion.

    For every error e and each sampled (codeword a, word w) pair, nearest-codeword
    decoding of a⊕e must return a, and coset decoding of w⊕e with the syndrome
    of w must return w, exactly when 0 is the unique codeword nearest to e.
    """
    n = code.n
    if n > max_n:
        raise ValueError(f"n = {n} exceeds the exhaustive limit {max_n}")
    rng = np.random.default_rng(0) if rng is None else rng
    errors = np.arange(1 << n, dtype=np.int64)
    cws = code.codeword_ints
    weights = popcount(errors)
    if code.k:
        expected = (popcount(errors[:, None] ^ cws[None, 1:]) > weights[:, None]).all(axis=1)
    else:
        expected = np.ones(errors.shape, dtype=bool)
    if code.r:
        synd_cols = code.parity_check.entries.astype(np.int64)
    for _ in range(pairs):
        a = int(cws[rng.integers(cws.size)])
        w = int(rng.integers(1 << n))
        got_a = _decode_success(errors ^ a, cws, a)
        if code.r:
            xi_bits = (unpack_ints(np.array([w]), n).astype(np.int64) @ synd_cols.T) & 1
            shift = coset_leader(code, BitString(xi_bits[0])).to_int()
        else:
            shift = 0
        got_w = _decode_success(errors ^ w, cws ^ shift, w)
        if not (np.array_equal(got_a, expected) and np.array_equal(got_w, expected)):
            return False
    return True


def _decode_success(received: np.ndarray, candidates: np.ndarray, target: int) -> np.ndarray:
    """Vectorized: does each received word decode uniquely to ``target``?"""
    dist = popcount(received[:, None] ^ candidates[None, :])
    best = dist.min(axis=1)
    unique = (dist == best[:, None]).sum(axis=1) == 1
    winner = candidates[dist.argmin(axis=1)]
    return unique & (winner == target)


# -- Monte Carlo estimators over random codes --------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    n: int
    k: int
    t: int
    trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    bound: float

    def csv_row(self) -> list:
        return [self.n, self.k, self.t, self.trials, self.failures, self.estimate, self.ci_low, self.ci_high, self.bound]


def random_generator_batch(n: int, k: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    """Packed codeword tables (batch, 2^k) of uniform full-rank k×n generators.

    Rank-deficient draws are redrawn; a draw is full rank iff every nonzero
    combination of its rows is nonzero.
    """
    if n > 62:
        raise ValueError("packed random codes support n <= 62")
    out = np.empty((batch, 1 << k), dtype=np.int64)
    todo = np.arange(batch)
    while todo.size:
        rows = pack_rows(rng.integers(0, 2, size=(todo.size, k, n), dtype=np.uint8)) if k else np.zeros((todo.size, 0), np.int64)
        table = span_ints(rows)
        good = (table[:, 1:] != 0).all(axis=1)
        out[todo[good]] = table[good]
        todo = todo[~good]
    return out


def random_weight_words(n: int, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Packed words of the given weights with uniformly random supports."""
    weights = np.asarray(weights)
    keys = rng.random((weights.size, n))
    order = np.argsort(keys, axis=1)
    ranks = np.argsort(order, axis=1)
    bits = (ranks < weights[:, None]).astype(np.uint8)
    return pack_rows(bits)


def _ball_weights(n: int, t: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Weights of words drawn uniformly from the Hamming ball of radius t."""
    sizes = np.array([math.comb(n, w) for w in range(t + 1)], dtype=float)
    return rng.choice(t + 1, size=size, p=sizes / sizes.sum())


def _check_mc_args(n: int, k: int, t: int, trials: int) -> None:
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if t < 0 or 2 * t > n:
        raise ValueError(f"t = {t} must satisfy 0 <= t <= n/2")
    if trials < 1:
        raise ValueError("trials must be positive")


def _finish(n: int, k: int, t: int, trials: int, failures: int) -> MCEstimate:
    lo, hi = wilson_interval(failures, trials)
    bound = code_failure_bound(n, t, n - k)
    return MCEstimate(n, k, t, trials, failures, failures / trials, lo, hi, bound)


def mc_decoding_failure_rate(
    n: int,
    k: int,
    t: int,
    trials: int,
    rng: np.random.Generator,
    weight_mode: str = "exact",
    chunk: int = 20000,
) -> MCEstimate:
    """Fraction of (random code, error) draws where 0 is not the unique nearest codeword.

    ``weight_mode="exact"`` draws |e| = t; ``"ball"`` draws e uniformly among
    words of weight at most t.
    """
    _check_mc_args(n, k, t, trials)
    if weight_mode not in ("exact", "ball"):
        raise ValueError("weight_mode must be 'exact' or 'ball'")
    failures = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        table = random_generator_batch(n, k, size, rng)
        w = np.full(size, t) if weight_mode == "exact" else _ball_weights(n, t, size, rng)
        e = random_weight_words(n, w, rng)
        if k:
            near = popcount(table[:, 1:] ^ e[:, None]) <= w[:, None]
            failures += int(near.any(axis=1).sum())
        done += size
    return _finish(n, k, t, trials, failures)


def mc_low_weight_coset_word(
    ell: BitString,
    n: int,
    k: int,
    t: int,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 20000,
) -> MCEstimate:
    """Estimate Pr_C[exists z in ell + C, z != ell, |z| <= t] over uniform random [n, k] codes."""
    _check_mc_args(n, k, t, trials)
    if len(ell) != n:
        raise ValueError("ell must have length n")
    val = ell.to_int()
    failures = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        table = random_generator_batch(n, k, size, rng)
        if k:
            failures += int((popcount(table[:, 1:] ^ val) <= t).any(axis=1).sum())
        done += size
    return _finish(n, k, t, trials, failures)


def exact_low_weight_probability(ell: BitString, k: int, t: int) -> float:
    """Exact Pr over uniform full-rank k×n generators that ell + C has a word z != ell with |z| <= t.

    Enumerates every k×n generator; only feasible for k·n up to about 20.
    """
    n = len(ell)
    if k * n > 22:
        raise ValueError("exhaustive enumeration too large")
    val = ell.to_int()
    total = 0
    hits = 0
    for mat in range(1 << (k * n)):
        rows = np.array([(mat >> (j * n)) & ((1 << n) - 1) for j in range(k)], dtype=np.int64).reshape(1, k)
        table = span_ints(rows)[0]
        if k and not (table[1:] != 0).all():
            continue
        total += 1
        if k and (popcount(table[1:] ^ val) <= t).any():
            hits += 1
    return hits / total
