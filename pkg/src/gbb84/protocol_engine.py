"""Classical end-to-end simulation of the four protocol variants.

The quantum channel is replaced by independent per-basis bit flips, which is
enough to exercise sifting, testing, syndrome reconciliation and privacy
amplification. Bob keeps his qubits until the bases are announced, so he always
measures in the basis Alice used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .coding import DecodeStatus, LinearCode, coset_decode
from .gf2_linalg import BitMatrix, BitString, mat_vec, random_stacked_full_rank
from .sampling_bounds import ProtocolParams, Variant, security_bound, wilson_interval

FLOAT_SLACK = 1e-9


class Mode(str, enum.Enum):
    REAL = "real"
    INVERTED_INFO_BASIS = "inverted-info-basis"

    @classmethod
    def parse(cls, value: str | Mode) -> Mode:
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown mode {value!r}")


@dataclass(frozen=True)
class BasisPartition:
    """Basis string b (1 = x basis) and INFO selector s (1 = INFO bit)."""

    b: BitString
    s: BitString

    @property
    def info(self) -> np.ndarray:
        return np.flatnonzero(self.s.bits)

    @property
    def test(self) -> np.ndarray:
        return np.flatnonzero(self.s.bits == 0)

    def _subset(self, info: bool, x_basis: bool) -> np.ndarray:
        return np.flatnonzero((self.s.bits == int(info)) & (self.b.bits == int(x_basis)))

    @property
    def info_z(self) -> np.ndarray:
        return self._subset(True, False)

    @property
    def info_x(self) -> np.ndarray:
        return self._subset(True, True)

    @property
    def test_z(self) -> np.ndarray:
        return self._subset(False, False)

    @property
    def test_x(self) -> np.ndarray:
        return self._subset(False, True)


def _choose(rng: np.random.Generator, pool: np.ndarray, count: int) -> np.ndarray:
    if count > pool.size:
        raise ValueError("cannot choose more positions than available")
    return rng.choice(pool, size=count, replace=False) if count else np.empty(0, dtype=np.int64)


def _mask(N: int, positions: np.ndarray) -> np.ndarray:
    out = np.zeros(N, dtype=np.uint8)
    out[positions] = 1
    return out


def sample_basis_partition(params: ProtocolParams, rng: np.random.Generator) -> BasisPartition:
    """Draw (b, s) from the variant's distribution."""
    N, n = params.N, params.n
    allpos = np.arange(N)
    v = params.variant
    if v is Variant.BB84:
        b = rng.integers(0, 2, size=N, dtype=np.uint8)
        s = _mask(N, _choose(rng, allpos, n))
    elif v is Variant.BB84_INFO_Z:
        b = _mask(N, _choose(rng, allpos, params.n_x))
        s = _mask(N, _choose(rng, np.flatnonzero(b == 0), n))
    elif v is Variant.EFFICIENT:
        while True:
            b = (rng.random(N) < 1.0 - params.p).astype(np.uint8)
            ones = int(b.sum())
            if ones >= params.n_x and N - ones >= params.n_z:
                break
        test_x = _choose(rng, np.flatnonzero(b == 1), params.n_x)
        test_z = _choose(rng, np.flatnonzero(b == 0), params.n_z)
        s = 1 - _mask(N, np.concatenate([test_x, test_z]))
    elif v is Variant.MODIFIED_EFFICIENT:
        b = _mask(N, _choose(rng, allpos, params.t_x + params.n_x))
        test_x = _choose(rng, np.flatnonzero(b == 1), params.n_x)
        test_z = _choose(rng, np.flatnonzero(b == 0), params.n_z)
        s = 1 - _mask(N, np.concatenate([test_x, test_z]))
    else:  # pragma: no cover
        raise ValueError(v)
    return BasisPartition(BitString(b), BitString(s))


def enumerate_partitions(params: ProtocolParams) -> list[tuple[BitString, BitString, float]]:
    """Exact distribution of (b, s) for the variant, as (b, s, probability) triples.

    Exhaustive over all 4^N pairs, so only usable for small N.
    """
    N, n = params.N, params.n
    if N > 12:
        raise ValueError("exact enumeration is limited to N <= 12")
    full = (1 << N) - 1
    s_choices = [w for w in range(1 << N) if w.bit_count() == n]
    v = params.variant
    pairs: list[tuple[int, int]] = []
    weights: list[float] = []
    for b in range(1 << N):
        ones = b.bit_count()
        if v is Variant.BB84:
            valid = s_choices
        elif v is Variant.BB84_INFO_Z:
            valid = [s for s in s_choices if not s & b] if ones == params.n_x else []
        elif v is Variant.EFFICIENT:
            valid = [s for s in s_choices if ((full ^ s) & b).bit_count() == params.n_x]
        elif ones == params.t_x + params.n_x:
            valid = [s for s in s_choices if ((full ^ s) & b).bit_count() == params.n_x]
        else:
            valid = []
        if not valid:
            continue
        # Uniform s given b. Pr(b) is uniform over valid pairs for the fixed-count
        # variants and proportional to Pr_0(b) for the Bernoulli ones.
        if v is Variant.BB84:
            w = 1.0 / len(valid)
        elif v is Variant.EFFICIENT:
            w = (1 - params.p) ** ones * params.p ** (N - ones) / len(valid)
        else:
            w = 1.0
        pairs.extend((b, s) for s in valid)
        weights.extend([w] * len(valid))
    total = math.fsum(weights)
    return [(BitString.from_int(b, N), BitString.from_int(s, N), w / total) for (b, s), w in zip(pairs, weights)]


def bob_decode(P_C: BitMatrix, P_K: BitMatrix, xi: BitString, j_I: BitString) -> tuple[BitString, DecodeStatus, BitString]:
    """Bob's reconciliation and key: returns (key, decoder status, word used).

    On a decoding tie Bob keeps his raw INFO string. The protocol leaves the
    output in that case unspecified, and any deterministic choice is allowed.
    """
    outcome = coset_decode(LinearCode(P_C), xi, j_I)
    word = outcome.word if outcome.ok else j_I
    return mat_vec(P_K, word), outcome.status, word


def testing_function(
    variant: Variant | str,
    c_T: BitString,
    b_T: BitString,
    s: BitString | None,
    params: ProtocolParams,
) -> int:
    """1 iff the TEST-bit error counts are within the variant's thresholds."""
    variant = Variant.parse(variant)
    if len(c_T) != len(b_T):
        raise ValueError("c_T and b_T lengths differ")
    if s is not None and len(s) - s.weight != len(c_T):
        raise ValueError("c_T length does not match the number of TEST positions in s")
    c = c_T.bits
    bt = b_T.bits
    if variant is Variant.BB84:
        return int(c.sum() <= params.n * params.p_a + FLOAT_SLACK)
    errs_z = int(c[bt == 0].sum())
    errs_x = int(c[bt == 1].sum())
    if variant is Variant.BB84_INFO_Z:
        pz, px = params.p_az, params.p_ax
    else:
        pz = px = params.p_a
    ok = errs_z <= params.n_z * pz + FLOAT_SLACK and errs_x <= params.n_x * px + FLOAT_SLACK
    return int(ok)


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "noiseless"
    flip_z: float = 0.0
    flip_x: float = 0.0

    def __post_init__(self):
        kind = self.kind.strip().lower().replace("_", "-")
        if kind not in ("noiseless", "independent-flip"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        for name in ("flip_z", "flip_x"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def noiseless(cls) -> ChannelModel:
        return cls("noiseless")

    @classmethod
    def independent_flip(cls, flip_z: float, flip_x: float | None = None) -> ChannelModel:
        return cls("independent-flip", flip_z, flip_z if flip_x is None else flip_x)

    def errors(self, basis: BitString, rng: np.random.Generator) -> BitString:
        N = len(basis)
        if self.kind == "noiseless":
            return BitString.zeros(N)
        probs = np.where(basis.bits == 1, self.flip_x, self.flip_z)
        return BitString((rng.random(N) < probs).astype(np.uint8))


@dataclass(frozen=True)
class ProtocolTranscript:
    params: ProtocolParams
    mode: Mode
    b: BitString
    s: BitString
    b_used: BitString
    i: BitString
    j: BitString
    P_C: BitMatrix
    P_K: BitMatrix
    test_passed: bool
    xi: BitString | None = None
    k: BitString | None = None
    k_B: BitString | None = None
    decode_status: DecodeStatus | None = None
    bob_word: BitString | None = None

    @property
    def aborted(self) -> bool:
        return not self.test_passed

    @property
    def c(self) -> BitString:
        return self.i ^ self.j

    @property
    def i_T(self) -> BitString:
        return self.i.select(~self.s)

    @property
    def j_T(self) -> BitString:
        return self.j.select(~self.s)

    @property
    def i_I(self) -> BitString:
        return self.i.select(self.s)

    @property
    def j_I(self) -> BitString:
        return self.j.select(self.s)

    @property
    def key_mismatch(self) -> bool:
        return self.test_passed and self.k != self.k_B

    def to_lines(self) -> list[str]:
        """Line-oriented record; see TRANSCRIPT_FIELDS for the order."""
        def fmt(x) -> str:
            if x is None:
                return "-"
            if isinstance(x, bool):
                return "1" if x else "0"
            if isinstance(x, enum.Enum):
                return x.value
            return str(x)

        values = {
            "variant": self.params.variant,
            "mode": self.mode,
            "N": self.params.N,
            "n": self.params.n,
            "r": self.params.r,
            "m": self.params.m,
            "b": self.b,
            "s": self.s,
            "b_used": self.b_used,
            "i": self.i,
            "j": self.j,
            "c": self.c,
            "i_T": self.i_T,
            "j_T": self.j_T,
            "test_passed": self.test_passed,
            "aborted": self.aborted,
            "P_C": self.P_C,
            "P_K": self.P_K,
            "xi": self.xi,
            "decode_status": self.decode_status,
            "k": self.k,
            "k_B": self.k_B,
        }
        return [f"{name}={fmt(values[name])}" for name in TRANSCRIPT_FIELDS]

    def serialize(self) -> str:
        return "\n".join(self.to_lines()) + "\n"


TRANSCRIPT_FIELDS = (
    "variant", "mode", "N", "n", "r", "m", "b", "s", "b_used", "i", "j", "c", "i_T", "j_T",
    "test_passed", "aborted", "P_C", "P_K", "xi", "decode_status", "k", "k_B",
)


def parse_transcript(text: str) -> dict[str, str]:
    """Read a serialized transcript back into a field -> raw string map."""
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, val = line.partition("=")
        out[key] = val
    missing = [f for f in TRANSCRIPT_FIELDS if f not in out]
    if missing:
        raise ValueError(f"transcript is missing fields {missing}")
    return out


def run_protocol(
    params: ProtocolParams,
    channel: ChannelModel,
    mode: Mode | str,
    rng: np.random.Generator,
) -> ProtocolTranscript:
    """One protocol run. Aborts are recorded in the transcript, never raised."""
    mode = Mode.parse(mode)
    N = params.N
    i = BitString(rng.integers(0, 2, size=N, dtype=np.uint8))
    part = sample_basis_partition(params, rng)
    b_used = part.b ^ part.s if mode is Mode.INVERTED_INFO_BASIS else part.b
    # The matrices are fixed now but only disclosed after the quantum stage.
    P_C, P_K = random_stacked_full_rank(params.r, params.m, params.n, rng)
    j = i ^ channel.errors(b_used, rng)

    test_mask = ~part.s
    c_T = (i ^ j).select(test_mask)
    passed = bool(testing_function(params.variant, c_T, b_used.select(test_mask), part.s, params))
    base = dict(params=params, mode=mode, b=part.b, s=part.s, b_used=b_used, i=i, j=j, P_C=P_C, P_K=P_K)
    if not passed:
        return ProtocolTranscript(test_passed=False, **base)

    i_I = i.select(part.s)
    j_I = j.select(part.s)
    xi = mat_vec(P_C, i_I)
    k = mat_vec(P_K, i_I)
    k_B, status, bob_word = bob_decode(P_C, P_K, xi, j_I)
    return ProtocolTranscript(
        test_passed=True, xi=xi, k=k, k_B=k_B, decode_status=status, bob_word=bob_word, **base
    )


@dataclass(frozen=True)
class ExperimentSummary:
    variant: Variant
    mode: Mode
    runs: int
    aborts: int
    key_failures: int
    error_counts: dict[str, int] = field(default_factory=dict)
    position_counts: dict[str, int] = field(default_factory=dict)
    reliability_bound: float | None = None

    @property
    def abort_rate(self) -> float:
        return self.aborts / self.runs

    @property
    def abort_ci(self) -> tuple[float, float]:
        return wilson_interval(self.aborts, self.runs)

    @property
    def failure_rate(self) -> float:
        """Empirical Pr[(k != k_B) and (T = 1)]."""
        return self.key_failures / self.runs

    @property
    def failure_ci(self) -> tuple[float, float]:
        return wilson_interval(self.key_failures, self.runs)

    def error_rate(self, population: str) -> float:
        total = self.position_counts.get(population, 0)
        return self.error_counts.get(population, 0) / total if total else math.nan

    def csv_row(self) -> list:
        a_lo, a_hi = self.abort_ci
        f_lo, f_hi = self.failure_ci
        rates = [self.error_rate(p) for p in POPULATIONS]
        return [self.variant.value, self.mode.value, self.runs, self.aborts, self.abort_rate, a_lo, a_hi,
                self.key_failures, self.failure_rate, f_lo, f_hi, *rates,
                math.nan if self.reliability_bound is None else self.reliability_bound]


POPULATIONS = ("info_z", "info_x", "test_z", "test_x")
SUMMARY_HEADER = (
    "variant", "mode", "runs", "aborts", "abort_rate", "abort_ci_low", "abort_ci_high",
    "key_failures", "failure_rate", "failure_ci_low", "failure_ci_high",
    "err_info_z", "err_info_x", "err_test_z", "err_test_x", "reliability_bound",
)


def keyrate_experiment(
    params: ProtocolParams,
    channel: ChannelModel,
    runs: int,
    rng: np.random.Generator,
    mode: Mode | str = Mode.REAL,
) -> ExperimentSummary:
    """Aggregate ``runs`` independent protocol runs.

    Key failures count the joint event (k != k_B and the test passed). Error
    rates are pooled per population, with populations defined by the basis
    actually used on each position.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    mode = Mode.parse(mode)
    aborts = failures = 0
    errs = dict.fromkeys(POPULATIONS, 0)
    sizes = dict.fromkeys(POPULATIONS, 0)
    for _ in range(runs):
        tr = run_protocol(params, channel, mode, rng)
        aborts += tr.aborted
        failures += tr.key_mismatch
        part = BasisPartition(tr.b_used, tr.s)
        c = tr.c.bits
        for name in POPULATIONS:
            idx = getattr(part, name)
            errs[name] += int(c[idx].sum())
            sizes[name] += int(idx.size)
    bound = security_bound(params).reliability
    return ExperimentSummary(params.variant, mode, runs, aborts, failures, errs, sizes, bound)
