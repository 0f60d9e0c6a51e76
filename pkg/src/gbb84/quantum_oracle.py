"""Dense-matrix laboratory for Eve's joint attack at a handful of qubits.

Register layout: Eve's probe comes first and the N protocol qubits second, so
a basis index is ``probe_index * 2**N + qubit_index``. Qubit strings map to
integers with bit 0 as the most significant bit. A symmetrized attack has
probe E ⊗ M with E major.

Classical registers (keys, announced strings, code matrices) are never
embedded as qudits. States carrying them are stored block-diagonally, keyed by
the classical label, and trace distances are summed block by block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.stats import unitary_group

from .gf2_linalg import BitMatrix, BitString, extend_to_basis, mat_vec, merge_bits, rank, row_echelon
from .protocol_engine import bob_decode, enumerate_partitions, testing_function
from .sampling_bounds import ProtocolParams, h2

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-9
MAX_TOTAL_DIM = 4096

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
_XZ = np.array([[0.0, -1.0], [1.0, 0.0]])


class ZeroProbabilityBranch(ValueError):
    """Raised when a conditioning event has probability 0."""


@dataclass(frozen=True)
class DenseState:
    dims: tuple[int, ...]
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DenseOperator:
    dims: tuple[int, ...]
    matrix: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0) <= tol)


def _kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def basis_change(b: BitString) -> np.ndarray:
    """Real orthogonal matrix whose column j is |j>_b."""
    return _kron_all(_H if bit else np.eye(2) for bit in b)


def encode_state(i: BitString, b: BitString) -> DenseState:
    """|i>_b as a 2^N amplitude vector."""
    if len(i) != len(b):
        raise ValueError("i and b lengths differ")
    return DenseState((2,) * len(i), basis_change(b)[:, i.to_int()].astype(complex))


@dataclass
class AttackSpec:
    """Unitary U on probe ⊗ N qubits; the probe starts in its basis state 0."""

    N: int
    probe_dim: int
    U: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        dim = self.probe_dim * (1 << self.N)
        self.U = np.asarray(self.U, dtype=complex)
        if self.U.shape != (dim, dim):
            raise ValueError(f"U must be {dim}x{dim}, got {self.U.shape}")
        err = np.abs(self.U.conj().T @ self.U - np.eye(dim)).max()
        if err > UNITARY_TOL:
            raise ValueError(f"attack is not unitary (deviation {err:.2e})")

    @property
    def dim(self) -> int:
        return self.probe_dim * (1 << self.N)

    def e_prime(self, b: BitString) -> np.ndarray:
        """Array E[i, j, :] = |E'_{i,j}>_b for all i, j (shape 2^N × 2^N × probe_dim)."""
        key = str(b)
        if key not in self._cache:
            Q = 1 << self.N
            Hb = basis_change(b)
            # Columns i of U (|0>_E ⊗ |i>_b), reshaped to (probe, qubit, i).
            out = (self.U[:, :Q] @ Hb).reshape(self.probe_dim, Q, Q)
            self._cache[key] = np.einsum("eqi,qj->ije", out, Hb)
        return self._cache[key]

    def transition(self, b: BitString) -> np.ndarray:
        """Pr(j | i, b) as a 2^N × 2^N array indexed [i, j]."""
        E = self.e_prime(b)
        return np.einsum("ije,ije->ij", E, E.conj()).real


def extract_E_prime(attack: AttackSpec, i: BitString, b: BitString) -> dict[BitString, DenseState]:
    """Probe components |E'_{i,j}>_b of U|0>_E|i>_b = sum_j |E'_{i,j}>_b |j>_b."""
    if len(i) != attack.N or len(b) != attack.N:
        raise ValueError("i and b must have length N")
    E = attack.e_prime(b)[i.to_int()]
    return {BitString.from_int(j, attack.N): DenseState((attack.probe_dim,), E[j].copy()) for j in range(1 << attack.N)}


# -- attack constructors ----------------------------------------------------------------


def identity_attack(N: int, probe_dim: int | None = None) -> AttackSpec:
    D = (1 << N) if probe_dim is None else probe_dim
    return AttackSpec(N, D, np.eye(D << N))


def random_attack(N: int, rng: np.random.Generator, probe_dim: int | None = None) -> AttackSpec:
    """Haar-random unitary on probe ⊗ qubits."""
    D = (1 << N) if probe_dim is None else probe_dim
    if D > (1 << (2 * N)):
        raise ValueError("probe dimension is capped at 2^(2N)")
    U = unitary_group.rvs(D << N, random_state=rng)
    return AttackSpec(N, D, U)


def z_copy_attack(N: int, probe_dim: int | None = None) -> AttackSpec:
    """Probe ⊕= qubit string in the z basis (a CNOT fan-out)."""
    Q = 1 << N
    D = Q if probe_dim is None else probe_dim
    if D < Q:
        raise ValueError("z-copy needs a probe of dimension at least 2^N")
    U = np.zeros((D * Q, D * Q))
    for e in range(D):
        for q in range(Q):
            target = e ^ q if e < Q else e
            U[target * Q + q, e * Q + q] = 1.0
    return AttackSpec(N, D, U)


def intercept_resend_z(N: int) -> AttackSpec:
    """Eve measures every qubit in z and resends her outcome.

    Coherently this is the z-basis copy into a fresh probe: tracing out the
    probe leaves the qubits in the resent mixture.
    """
    return z_copy_attack(N)


def controlled_probe_flip(N: int = 1) -> AttackSpec:
    """Flip a qubit-sized probe when the first qubit is 1 in the z basis."""
    Q = 1 << N
    U = np.zeros((2 * Q, 2 * Q))
    for e in range(2):
        for q in range(Q):
            first = (q >> (N - 1)) & 1
            U[((e ^ first) * Q) + q, e * Q + q] = 1.0
    return AttackSpec(N, 2, U)


def symmetrize(attack: AttackSpec, max_dim: int = MAX_TOTAL_DIM) -> AttackSpec:
    """U^sym = (I_E ⊗ S†)(U ⊗ I_M)(I_E ⊗ S) with M prepared in the uniform superposition.

    S acts as (XZ)^{m_q} on qubit q when M holds m, which reproduces
    S|i>_b|m> = (-1)^{(i⊕b)·m}|i⊕m>_b|m> for every basis string b. The
    preparation of M is folded into U^sym so the returned attack again starts
    from probe state 0.
    """
    N, D = attack.N, attack.probe_dim
    Q = 1 << N
    new_dim = D * Q * Q
    if new_dim > max_dim:
        raise ValueError(f"symmetrized dimension {new_dim} exceeds the limit {max_dim}")
    U = attack.U.reshape(D, Q, D, Q)
    Usym = np.zeros((D, Q, Q, D, Q, Q), dtype=complex)  # (e', m', q', e, m, q)
    for m in range(Q):
        P = _kron_all(_XZ if (m >> (N - 1 - k)) & 1 else np.eye(2) for k in range(N))
        block = np.einsum("ab,ebfc,cd->eafd", P.T, U, P)  # P† U P with P real
        Usym[:, m, :, :, m, :] = block
    Usym = Usym.reshape(new_dim, new_dim)
    prep = np.kron(np.kron(np.eye(D), _kron_all([_H] * N)), np.eye(Q))
    return AttackSpec(N, D * Q, Usym @ prep)


def basic_lemma_prediction(attack: AttackSpec, b: BitString) -> np.ndarray:
    """E'^sym predicted from E': 2^{-N/2} sum_m (-1)^{(i⊕j)·m} E'_{i⊕m, j⊕m} ⊗ |m>."""
    N, D = attack.N, attack.probe_dim
    Q = 1 << N
    E = attack.e_prime(b)
    out = np.zeros((Q, Q, D, Q), dtype=complex)
    idx = np.arange(Q)
    for m in range(Q):
        sign = (-1.0) ** _parity((idx[:, None] ^ idx[None, :]) & m)
        out[:, :, :, m] = sign[:, :, None] * E[np.ix_(idx ^ m, idx ^ m)]
    return out.reshape(Q, Q, D * Q) / math.sqrt(Q)


def _parity(x) -> np.ndarray:
    return np.bitwise_count(np.asarray(x, dtype=np.int64)) & 1


# -- conditioning on the announced TEST data ------------------------------------------


@dataclass(frozen=True)
class Conditioning:
    """Announced data (b, s, i_T, j_T) and the full-register indices it induces."""

    b: BitString
    s: BitString
    i_T: BitString
    j_T: BitString

    def __post_init__(self):
        if len(self.b) != len(self.s):
            raise ValueError("b and s lengths differ")
        tests = len(self.s) - self.s.weight
        if len(self.i_T) != tests or len(self.j_T) != tests:
            raise ValueError("i_T and j_T must cover exactly the TEST positions")

    @property
    def n(self) -> int:
        return self.s.weight

    @property
    def inverted_basis(self) -> BitString:
        return self.b ^ self.s

    def full_index(self, info: int, test: BitString) -> int:
        return merge_bits(self.s, BitString.from_int(info, self.n), test).to_int()

    def index_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(I[i_I], J[j_I]) full-register indices for every INFO value."""
        n = self.n
        I = np.array([self.full_index(v, self.i_T) for v in range(1 << n)])
        J = np.array([self.full_index(v, self.j_T) for v in range(1 << n)])
        return I, J


def conditional_info_components(attack: AttackSpec, cond: Conditioning, basis: BitString | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized E'[i_I, j_I, :] restricted to the announced TEST values, and Pr(j_T | i_I, i_T)."""
    basis = cond.b if basis is None else basis
    I, J = cond.index_table()
    E = attack.e_prime(basis)[np.ix_(I, J)]
    pjt = np.einsum("abe,abe->a", E, E.conj()).real
    return E, pjt


def normalized_components(attack: AttackSpec, cond: Conditioning) -> np.ndarray:
    """|E_{i_I, j_I}> = E'_{i,j} / sqrt(Pr(j_T | i_I, i_T, b, s)); raises on a zero-probability branch."""
    E, pjt = conditional_info_components(attack, cond)
    if (pjt <= 1e-14).any():
        raise ZeroProbabilityBranch("Pr(j_T | i_I, i_T, b, s) = 0 for some i_I")
    return E / np.sqrt(pjt)[:, None, None]


@dataclass(frozen=True)
class FourierData:
    phi: np.ndarray  # (2^n, probe_dim * 2^n)
    eta: np.ndarray  # (2^n, probe_dim * 2^n)
    d: np.ndarray  # (2^n,)

    def states(self) -> dict[BitString, tuple[DenseState, float]]:
        n = int(round(math.log2(self.d.size)))
        dim = self.eta.shape[1]
        return {
            BitString.from_int(l, n): (DenseState((dim // (1 << n), 1 << n), self.eta[l].copy()), float(self.d[l]))
            for l in range(self.d.size)
        }


def _hadamard_signs(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return (-1.0) ** _parity(idx[:, None] & idx[None, :])


def fourier_eta(attack: AttackSpec, b: BitString, s: BitString, i_T: BitString, j_T: BitString) -> FourierData:
    """Purified Eve states phi_{i_I} and their Fourier transforms eta_l with norms d_l."""
    cond = Conditioning(b, s, i_T, j_T)
    E = normalized_components(attack, cond)  # (iI, jI, e)
    n = cond.n
    Qn = 1 << n
    D = attack.probe_dim
    phi = np.zeros((Qn, D, Qn), dtype=complex)
    for iI in range(Qn):
        for jI in range(Qn):
            phi[iI, :, iI ^ jI] += E[iI, jI]
    phi = phi.reshape(Qn, D * Qn)
    eta = _hadamard_signs(n) @ phi / Qn
    d = np.linalg.norm(eta, axis=1)
    return FourierData(phi, eta, d)


def inverted_error_distribution(attack: AttackSpec, cond: Conditioning) -> np.ndarray:
    """Pr_inverted[C_I = c | i_T, j_T, b, s] for every c, with INFO bases flipped and i_I uniform."""
    E, pjt = conditional_info_components(attack, cond, cond.inverted_basis)
    total = pjt.sum()
    if total <= 1e-14:
        raise ZeroProbabilityBranch("Pr(j_T | i_T, b^0, s) = 0")
    probs = np.einsum("abe,abe->ab", E, E.conj()).real  # joint weight of (i_I, j_I)
    Qn = probs.shape[0]
    out = np.zeros(Qn)
    for iI in range(Qn):
        for jI in range(Qn):
            out[iI ^ jI] += probs[iI, jI]
    return out / total


# -- classical code pairs and Eve's key-conditioned states ---------------------------------


@dataclass(frozen=True)
class CodePair:
    P_C: BitMatrix
    P_K: BitMatrix
    weight: float


def all_code_pairs(r: int, m: int, n: int) -> list[CodePair]:
    """Every (P_C, P_K) with a full-rank stacked matrix, uniformly weighted."""
    if r + m > n:
        raise ValueError("r + m exceeds n")
    rows = r + m
    if rows * n > 16:
        raise ValueError("too many matrices to enumerate")
    mats = []
    for v in range(1 << (rows * n)):
        bits = np.array([(v >> (rows * n - 1 - k)) & 1 for k in range(rows * n)], dtype=np.uint8).reshape(rows, n)
        if rows == 0 or len(row_echelon(bits)[1]) == rows:
            mats.append(bits)
    w = 1.0 / len(mats)
    return [CodePair(BitMatrix(x[:r], cols=n), BitMatrix(x[r:], cols=n), w) for x in mats]


@dataclass(frozen=True)
class SpanBasis:
    """Rows of P_C then P_K extended to a basis v_1..v_n of F2^n."""

    vectors: BitMatrix
    r: int
    m: int

    @classmethod
    def from_pair(cls, P_C: BitMatrix, P_K: BitMatrix) -> SpanBasis:
        stacked = P_C.vstack(P_K)
        if rank(stacked) != stacked.rows:
            raise ValueError("stacked (P_C, P_K) must have full row rank")
        return cls(extend_to_basis(stacked), P_C.rows, P_K.rows)

    @property
    def n(self) -> int:
        return self.vectors.cols

    def span(self, count: int) -> np.ndarray:
        """Packed members of V_count = Span{v_1..v_count}."""
        out = np.zeros(1, dtype=np.int64)
        for row in self.vectors.row_ints()[:count]:
            out = np.concatenate([out, out ^ int(row)])
        return out

    def complement(self, count: int) -> np.ndarray:
        """Packed members of Span{v_(count+1)..v_n}, so F2^n = V^c ⊕ V."""
        out = np.zeros(1, dtype=np.int64)
        for row in self.vectors.row_ints()[count:]:
            out = np.concatenate([out, out ^ int(row)])
        return out


def _products(mat: BitMatrix, n: int) -> np.ndarray:
    """Packed value of v·mat^T for every v in F2^n."""
    if mat.rows == 0:
        return np.zeros(1 << n, dtype=np.int64)
    words = np.arange(1 << n, dtype=np.int64)
    bits = ((words[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)
    prod = (bits @ mat.entries.T.astype(np.int64)) & 1
    return (prod * (1 << np.arange(mat.rows - 1, -1, -1))).sum(axis=1)


@dataclass
class BlockOperator:
    """Block-diagonal operator keyed by classical labels."""

    blocks: dict = field(default_factory=dict)

    def add(self, label, mat: np.ndarray) -> None:
        if label in self.blocks:
            self.blocks[label] = self.blocks[label] + mat
        else:
            self.blocks[label] = np.array(mat, dtype=complex, copy=True)

    @property
    def trace(self) -> float:
        return float(sum(np.trace(m).real for m in self.blocks.values()))

    def scaled(self, factor: float) -> BlockOperator:
        return BlockOperator({k: factor * v for k, v in self.blocks.items()})


def rho_hat_keys(
    attack_sym: AttackSpec,
    b: BitString,
    s: BitString,
    i_T: BitString,
    j_T: BitString,
    xi: BitString,
    code_draws: list[CodePair],
    m: int | None = None,
) -> dict[BitString, BlockOperator]:
    """Eve's state for each final key k, with the (P_C, P_K) register as block label.

    rho_k = 2^{-(n-r-m)} sum over pairs and i_I with i_I P_C^T = xi, i_I P_K^T = k
    of Pr(P_C, P_K) rho^{i_I}_E, where rho^{i_I}_E = sum_{j_I} |E_{i_I,j_I}><E_{i_I,j_I}|.
    """
    cond = Conditioning(b, s, i_T, j_T)
    n = cond.n
    if n > 3:
        raise ValueError("rho_hat_keys supports n <= 3")
    r = len(xi)
    if not code_draws:
        raise ValueError("no code pairs given")
    m = code_draws[0].P_K.rows if m is None else m
    E = normalized_components(attack_sym, cond)
    rho_i = np.einsum("abe,abf->aef", E, E.conj())  # (iI, e, e')
    D = attack_sym.probe_dim
    xi_val = xi.to_int()
    norm = 2.0 ** (-(n - r - m))
    out = {BitString.from_int(k, m): BlockOperator() for k in range(1 << m)}
    for idx, pair in enumerate(code_draws):
        if pair.P_C.rows != r or pair.P_K.rows != m:
            raise ValueError("code pair dimensions do not match xi and m")
        synd = _products(pair.P_C, n)
        keys = _products(pair.P_K, n)
        for k in range(1 << m):
            sel = np.flatnonzero((synd == xi_val) & (keys == k))
            block = rho_i[sel].sum(axis=0) if sel.size else np.zeros((D, D), dtype=complex)
            out[BitString.from_int(k, m)].add(idx, norm * pair.weight * block)
    return out


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma; accepts arrays or BlockOperators (missing blocks are zero)."""
    if isinstance(rho, BlockOperator) or isinstance(sigma, BlockOperator):
        rb = rho.blocks if isinstance(rho, BlockOperator) else {None: rho}
        sb = sigma.blocks if isinstance(sigma, BlockOperator) else {None: sigma}
        # Ordered union plus fsum: string hashing varies per process, and the
        # result must not depend on block order.
        labels = list(rb) + [label for label in sb if label not in rb]
        parts = []
        for label in labels:
            a = rb.get(label)
            c = sb.get(label)
            if a is None:
                a = np.zeros_like(c)
            if c is None:
                c = np.zeros_like(a)
            parts.append(trace_distance(a, c))
        return math.fsum(parts)
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    if diff.shape[0] != diff.shape[1]:
        raise ValueError("operators must be square")
    if np.abs(diff - diff.conj().T).max(initial=0.0) > HERMITIAN_TOL:
        raise ValueError("trace_distance needs Hermitian inputs")
    herm = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(herm)).sum())


# -- verification of the information-versus-disturbance bound -----------------------------


def _code_term(n: int, t: int, r: int, m: int) -> float:
    return 2.0 ** (n * (h2(t / n) - (n - r - m) / n))


@dataclass(frozen=True)
class InfoDisturbanceResult:
    lhs: float
    rhs: float
    holds: bool
    t: int
    inverted_mass: float
    fourier_mass: float
    rhs_by_t: dict[int, float]

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def lemma_gap(self) -> float:
        """|sum of d_l^2 over |l| >= t minus the inverted-basis probability|."""
        return abs(self.fourier_mass - self.inverted_mass)


def verify_info_disturbance(
    attack: AttackSpec,
    b: BitString,
    s: BitString,
    i_T: BitString,
    j_T: BitString,
    xi: BitString,
    t: int | None = None,
    sym: AttackSpec | None = None,
) -> InfoDisturbanceResult:
    """Check trace distance of Eve's two key states against 2 sqrt(Pr_inv[|C_I| >= t] + 2^{n[H2(t/n) - (n-r-1)/n]}).

    The attack is symmetrized first (pass ``sym`` to reuse a symmetrized copy).
    With ``t=None`` every integer 0 <= t <= n/2 is checked and the tightest is
    reported; ``holds`` requires all of them to hold.
    """
    cond = Conditioning(b, s, i_T, j_T)
    n = cond.n
    r = len(xi)
    if r + 1 > n:
        raise ValueError("need r + 1 <= n")
    sym = symmetrize(attack) if sym is None else sym
    rho = rho_hat_keys(sym, b, s, i_T, j_T, xi, all_code_pairs(r, 1, n), m=1)
    lhs = trace_distance(rho[BitString("0")], rho[BitString("1")])
    inv = inverted_error_distribution(sym, cond)
    four = fourier_eta(sym, b, s, i_T, j_T)
    weights = np.bitwise_count(np.arange(1 << n, dtype=np.int64))
    ts = range(n // 2 + 1) if t is None else [t]
    rhs_by_t: dict[int, float] = {}
    masses = {}
    for tt in ts:
        if not 0 <= tt <= n / 2:
            raise ValueError("t must satisfy 0 <= t <= n/2")
        mass_inv = float(inv[weights >= tt].sum())
        mass_four = float((four.d[weights >= tt] ** 2).sum())
        masses[tt] = (mass_inv, mass_four)
        rhs_by_t[tt] = 2.0 * math.sqrt(mass_inv + _code_term(n, tt, r, 1))
    best = min(rhs_by_t, key=rhs_by_t.get)
    holds = all(lhs <= v + 1e-9 for v in rhs_by_t.values())
    return InfoDisturbanceResult(lhs, rhs_by_t[best], holds, best, masses[best][0], masses[best][1], rhs_by_t)


# -- symmetrization identities ------------------------------------------------------------


def symmetrization_identity_errors(
    attack: AttackSpec,
    sym: AttackSpec,
    b: BitString,
    s: BitString,
    code_pairs: list[CodePair] | None = None,
    r: int = 1,
) -> dict[str, float]:
    """Largest deviation of each identity the symmetrized attack must satisfy.

    Keys: basic_lemma, unitarity, completeness, error_distribution,
    test_error_invariance, info_uniform, syndrome_uniform, coset_uniform,
    eta_orthogonality, parseval, reconstruction, inverted_lemma.
    """
    N = attack.N
    Q = 1 << N
    n = s.weight
    T_len = N - n
    errs: dict[str, float] = {}
    errs["basic_lemma"] = float(np.abs(sym.e_prime(b) - basic_lemma_prediction(attack, b)).max())
    errs["unitarity"] = float(np.abs(sym.U.conj().T @ sym.U - np.eye(sym.dim)).max())
    Ts = sym.transition(b)
    errs["completeness"] = float(np.abs(Ts.sum(axis=1) - 1.0).max())
    # Pr(c | b) = 2^{-N} sum_i Pr(j = i ⊕ c | i, b); the split into (c_I, c_T) is a relabelling.
    T0 = attack.transition(b)
    idx = np.arange(Q)
    pc_sym = np.array([Ts[idx, idx ^ c].sum() for c in range(Q)]) / Q
    pc = np.array([T0[idx, idx ^ c].sum() for c in range(Q)]) / Q
    errs["error_distribution"] = float(np.abs(pc_sym - pc).max())

    b0 = b ^ s
    worst = dict.fromkeys(
        ["test_error_invariance", "info_uniform", "syndrome_uniform", "coset_uniform",
         "eta_orthogonality", "parseval", "reconstruction", "inverted_lemma"], 0.0)
    if code_pairs is None:
        code_pairs = all_code_pairs(min(r, n), 0, n) if n * min(r, n) <= 16 else []
    for iT_val in range(1 << T_len):
        i_T = BitString.from_int(iT_val, T_len)
        for jT_val in range(1 << T_len):
            j_T = BitString.from_int(jT_val, T_len)
            cond = Conditioning(b, s, i_T, j_T)
            _, pjt = conditional_info_components(sym, cond)
            _, pjt0 = conditional_info_components(sym, cond, b0)
            # Pr(j_T | i_T, b, s) with i_I uniform, in both basis choices.
            worst["test_error_invariance"] = max(worst["test_error_invariance"], abs(pjt.mean() - pjt0.mean()))
            if pjt.sum() <= 1e-12:
                continue
            post = pjt / pjt.sum()
            worst["info_uniform"] = max(worst["info_uniform"], float(np.abs(post - 1.0 / (1 << n)).max()))
            for pair in code_pairs:
                synd = _products(pair.P_C, n)
                rr = pair.P_C.rows
                for xi_val in range(1 << rr):
                    sel = synd == xi_val
                    p_xi = post[sel].sum()
                    worst["syndrome_uniform"] = max(worst["syndrome_uniform"], abs(p_xi - 2.0 ** (-rr)))
                    if p_xi > 0:
                        dev = np.abs(post[sel] / p_xi - 2.0 ** (-(n - rr))).max()
                        worst["coset_uniform"] = max(worst["coset_uniform"], float(dev))
            if (pjt <= 1e-14).any():
                continue
            four = fourier_eta(sym, b, s, i_T, j_T)
            gram = four.eta.conj() @ four.eta.T
            off = gram - np.diag(np.diag(gram))
            worst["eta_orthogonality"] = max(worst["eta_orthogonality"], float(np.abs(off).max(initial=0.0)))
            worst["parseval"] = max(worst["parseval"], abs(float((four.d ** 2).sum()) - 1.0))
            recon = _hadamard_signs(n) @ four.eta
            worst["reconstruction"] = max(worst["reconstruction"], float(np.abs(recon - four.phi).max()))
            inv = inverted_error_distribution(sym, cond)
            worst["inverted_lemma"] = max(worst["inverted_lemma"], float(np.abs(four.d ** 2 - inv).max()))
    errs.update(worst)
    return errs


# -- the composable bound ------------------------------------------------------------------


@dataclass(frozen=True)
class ComposableResult:
    lhs: float
    rhs: float
    holds: bool
    t: int
    failure_prob: float
    inverted_tail: float
    reliability_distance: float
    secrecy_distance: float
    secrecy_distance_sym: float
    secrecy_rhs: float
    rhs_by_t: dict[int, float]

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def chain_holds(self) -> bool:
        """Intermediate steps: reliability part, symmetrization monotonicity, secrecy part."""
        return (
            self.reliability_distance <= self.failure_prob + 1e-9
            and self.secrecy_distance <= self.secrecy_distance_sym + 1e-9
            and self.secrecy_distance_sym <= self.secrecy_rhs + 1e-9
        )


def _state_blocks(attack: AttackSpec, params: ProtocolParams, partitions, pairs: list[CodePair], bob_keys: bool) -> tuple[BlockOperator, float]:
    """rho_ABE (bob_keys=True) or sigma_ABE (Bob's key replaced by Alice's).

    Block labels are (i_T, j_T, b, s, xi, pair index, k_A, k_B); each block is
    the probe operator Pr(i, b, s, P_C, P_K) |E'_{i,j}><E'_{i,j}|. Returns the
    state and Pr[(k != k_B) and (T = 1)].
    """
    N, n, m = params.N, params.n, params.m
    Q = 1 << N
    out = BlockOperator()
    fail = 0.0
    key_cache: dict = {}
    for b, s, p_bs in partitions:
        E = attack.e_prime(b)
        test_mask = ~s
        b_T = b.select(test_mask)
        for i_val in range(Q):
            i = BitString.from_int(i_val, N)
            i_T, i_I = i.select(test_mask), i.select(s)
            for j_val in range(Q):
                vec = E[i_val, j_val]
                weight = float(np.vdot(vec, vec).real)
                if weight <= 1e-15:
                    continue
                j = BitString.from_int(j_val, N)
                j_T, j_I = j.select(test_mask), j.select(s)
                if not testing_function(params.variant, i_T ^ j_T, b_T, s, params):
                    continue
                proj = np.outer(vec, vec.conj())
                for idx, pair in enumerate(pairs):
                    xi = _mat_vec_cached(pair.P_C, i_I)
                    k = _mat_vec_cached(pair.P_K, i_I)
                    if bob_keys:
                        ck = (idx, str(xi), str(j_I))
                        if ck not in key_cache:
                            key_cache[ck] = bob_decode(pair.P_C, pair.P_K, xi, j_I)[0]
                        kB = key_cache[ck]
                    else:
                        kB = k
                    p = p_bs * pair.weight / Q
                    if kB != k:
                        fail += p * weight
                    out.add((str(i_T), str(j_T), str(b), str(s), str(xi), idx, str(k), str(kB)), p * proj)
    return out, fail


_MV_CACHE: dict = {}


def _mat_vec_cached(M: BitMatrix, x: BitString) -> BitString:
    key = (str(M), M.cols, str(x))
    if key not in _MV_CACHE:
        _MV_CACHE[key] = mat_vec(M, x) if M.rows else BitString()
    return _MV_CACHE[key]


def _ideal_state(state: BlockOperator, m: int) -> BlockOperator:
    """rho_U ⊗ tr_AB(state): uniform equal keys next to Eve's marginal."""
    marg: dict = {}
    for label, mat in state.blocks.items():
        base = label[:-2]
        marg[base] = marg.get(base, 0) + mat
    out = BlockOperator()
    for base, mat in marg.items():
        for k in range(1 << m):
            kk = str(BitString.from_int(k, m))
            out.add(base + (kk, kk), mat / (1 << m))
    return out


def _inverted_tail(attack: AttackSpec, params: ProtocolParams, partitions, t: int) -> float:
    """Pr_inverted[(|C_I| >= t) and (T = 1)] for the given attack."""
    N = params.N
    Q = 1 << N
    total = 0.0
    for b, s, p_bs in partitions:
        trans = attack.transition(b ^ s)
        test_mask = ~s
        b_T = b.select(test_mask)
        for i_val in range(Q):
            for j_val in range(Q):
                pr = trans[i_val, j_val]
                if pr <= 0:
                    continue
                c = BitString.from_int(i_val ^ j_val, N)
                if c.select(s).weight < t:
                    continue
                if testing_function(params.variant, c.select(test_mask), b_T, s, params):
                    total += p_bs * pr / Q
    return total


def verify_composable_bound(
    attack: AttackSpec,
    params: ProtocolParams,
    t: int | None = None,
    sym: AttackSpec | None = None,
) -> ComposableResult:
    """Exact check of ½ tr|rho_ABE - rho_U ⊗ rho_E| against the reliability-plus-secrecy bound.

    Enumerates i, j, every (b, s) with its protocol probability, and every
    full-rank (P_C, P_K). Failed tests contribute nothing. With ``t=None`` the
    bound is evaluated at every integer 0 <= t <= n/2 and the tightest is used.
    """
    N, n, r, m = params.N, params.n, params.r, params.m
    if N > 3 or n > 2 or m > 2:
        raise ValueError("exact composable check is limited to N <= 3, n <= 2, m <= 2")
    if attack.N != N:
        raise ValueError("attack qubit count differs from N")
    partitions = enumerate_partitions(params)
    pairs = all_code_pairs(r, m, n)
    rho, fail = _state_blocks(attack, params, partitions, pairs, bob_keys=True)
    sigma, _ = _state_blocks(attack, params, partitions, pairs, bob_keys=False)
    lhs = trace_distance(rho, _ideal_state(rho, m))
    rel = trace_distance(rho, sigma)
    sec = trace_distance(sigma, _ideal_state(sigma, m))
    sym = symmetrize(attack) if sym is None else sym
    sigma_sym, _ = _state_blocks(sym, params, partitions, pairs, bob_keys=False)
    sec_sym = trace_distance(sigma_sym, _ideal_state(sigma_sym, m))
    ts = range(n // 2 + 1) if t is None else [t]
    rhs_by_t: dict[int, float] = {}
    tails = {}
    for tt in ts:
        tails[tt] = _inverted_tail(attack, params, partitions, tt)
        rhs_by_t[tt] = fail + 2 * m * math.sqrt(tails[tt] + _code_term(n, tt, r, m))
    best = min(rhs_by_t, key=rhs_by_t.get)
    holds = all(lhs <= v + 1e-9 for v in rhs_by_t.values())
    return ComposableResult(
        lhs, rhs_by_t[best], holds, best, fail, float(tails[best]), rel, sec, sec_sym,
        rhs_by_t[best] - fail, rhs_by_t,
    )


# -- campaigns -------------------------------------------------------------------------------

REPORT_HEADER = ("case_id", "N", "n", "r", "m", "t", "lhs", "rhs", "margin", "holds")


@dataclass(frozen=True)
class CaseReport:
    case_id: int
    N: int
    n: int
    r: int
    m: int
    t: int
    lhs: float
    rhs: float
    holds: bool
    identity_error: float = 0.0

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def csv_row(self) -> list:
        return [self.case_id, self.N, self.n, self.r, self.m, self.t, self.lhs, self.rhs, self.margin,
                "true" if self.holds else "false"]


def _sample_announcement(sym: AttackSpec, b: BitString, s: BitString, rng: np.random.Generator) -> tuple[BitString, BitString]:
    """Draw (i_T, j_T) from the protocol's own distribution under the given attack."""
    N = sym.N
    T_len = N - s.weight
    trans = sym.transition(b)
    i_val = int(rng.integers(1 << N))
    probs = trans[i_val] / trans[i_val].sum()
    j_val = int(rng.choice(1 << N, p=probs))
    i = BitString.from_int(i_val, N)
    j = BitString.from_int(j_val, N)
    return i.select(~s), j.select(~s)


def info_disturbance_campaign(
    cases: int,
    rng: np.random.Generator,
    N: int = 3,
    n: int = 2,
    probe_dim: int | None = None,
    identity_tol: float = 1e-10,
) -> Iterator[CaseReport]:
    """Random attacks, bases, announcements and syndromes; r cycles through 0..n-1.

    A case holds when the inequality holds for every valid t and every
    symmetrization identity is met to ``identity_tol``.
    """
    for case_id in range(cases):
        attack = random_attack(N, rng, probe_dim)
        sym = symmetrize(attack)
        r = case_id % n
        b = BitString(rng.integers(0, 2, size=N))
        s_pos = rng.choice(N, size=n, replace=False)
        s = BitString(np.isin(np.arange(N), s_pos).astype(np.uint8))
        i_T, j_T = _sample_announcement(sym, b, s, rng)
        xi = BitString(rng.integers(0, 2, size=r))
        res = verify_info_disturbance(attack, b, s, i_T, j_T, xi, sym=sym)
        ident = symmetrization_identity_errors(attack, sym, b, s, r=max(r, 1))
        worst = max(max(ident.values()), res.lemma_gap)
        yield CaseReport(case_id, N, n, r, 1, res.t, res.lhs, res.rhs, res.holds and worst <= identity_tol, worst)


def composable_campaign(
    cases: int,
    rng: np.random.Generator,
    params: ProtocolParams,
    probe_dim: int | None = None,
) -> Iterator[tuple[CaseReport, ComposableResult]]:
    for case_id in range(cases):
        attack = random_attack(params.N, rng, probe_dim)
        res = verify_composable_bound(attack, params)
        yield (
            CaseReport(case_id, params.N, params.n, params.r, params.m, res.t, res.lhs, res.rhs,
                       res.holds and res.chain_holds),
            res,
        )
