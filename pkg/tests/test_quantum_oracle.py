from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbb84.gf2_linalg import BitMatrix, BitString
from gbb84.quantum_oracle import (
    REPORT_HEADER,
    AttackSpec,
    BlockOperator,
    Conditioning,
    SpanBasis,
    ZeroProbabilityBranch,
    all_code_pairs,
    composable_campaign,
    controlled_probe_flip,
    encode_state,
    extract_E_prime,
    fourier_eta,
    identity_attack,
    info_disturbance_campaign,
    intercept_resend_z,
    inverted_error_distribution,
    random_attack,
    rho_hat_keys,
    symmetrization_identity_errors,
    symmetrize,
    trace_distance,
    verify_composable_bound,
    verify_info_disturbance,
    z_copy_attack,
)
from gbb84.sampling_bounds import ProtocolParams

TOL = 1e-10
EMPTY = BitString("")
TINY_BB84 = ProtocolParams.bb84(1, 0, 1, 0.25, 0.25, 0.25, check_integrality=False)


def all_words(n):
    return [BitString.from_int(v, n) for v in range(1 << n)]


# -- states and attacks ----------------------------------------------------------------------


def test_encode_state_examples():
    assert np.allclose(encode_state(BitString("0"), BitString("0")).amplitudes, [1, 0])
    r = 1 / math.sqrt(2)
    assert np.allclose(encode_state(BitString("1"), BitString("1")).amplitudes, [r, -r])
    assert np.allclose(encode_state(BitString("01"), BitString("00")).amplitudes, [0, 1, 0, 0])
    with pytest.raises(ValueError):
        encode_state(BitString("01"), BitString("0"))


def test_encoded_bases_are_orthonormal():
    for b in all_words(2):
        vecs = np.array([encode_state(i, b).amplitudes for i in all_words(2)])
        assert np.allclose(vecs @ vecs.conj().T, np.eye(4), atol=1e-14)


def test_identity_attack_leaves_probe_untouched():
    attack = identity_attack(2)
    for b in all_words(2):
        for i in all_words(2):
            comps = extract_E_prime(attack, i, b)
            for j, state in comps.items():
                expected = np.zeros(attack.probe_dim)
                if j == i:
                    expected[0] = 1
                assert np.allclose(state.amplitudes, expected, atol=1e-14)


def test_controlled_probe_flip_component():
    comps = extract_E_prime(controlled_probe_flip(1), BitString("1"), BitString("0"))
    assert np.allclose(comps[BitString("1")].amplitudes, [0, 1])
    assert np.allclose(comps[BitString("0")].amplitudes, [0, 0])


def test_non_unitary_attack_rejected():
    with pytest.raises(ValueError, match="not unitary"):
        AttackSpec(1, 2, 1.01 * np.eye(4))
    with pytest.raises(ValueError):
        AttackSpec(1, 2, np.eye(3))


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_completeness_for_random_attacks(seed, N):
    attack = random_attack(N, np.random.default_rng(seed))
    for b in all_words(N):
        for i in all_words(N):
            total = sum(st_.norm ** 2 for st_ in extract_E_prime(attack, i, b).values())
            assert total == pytest.approx(1.0, abs=TOL)
        assert np.allclose(attack.transition(b).sum(axis=1), 1.0, atol=TOL)


def test_attack_size_guards():
    with pytest.raises(ValueError):
        random_attack(1, np.random.default_rng(0), probe_dim=5)
    with pytest.raises(ValueError):
        z_copy_attack(2, probe_dim=2)
    with pytest.raises(ValueError):
        symmetrize(random_attack(2, np.random.default_rng(0)), max_dim=32)


# -- symmetrization --------------------------------------------------------------------------


def test_symmetrized_identity_has_no_disturbance():
    sym = symmetrize(identity_attack(1))
    for b in all_words(1):
        assert np.allclose(sym.transition(b), np.eye(2), atol=TOL)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.data())
def test_symmetrization_identities_two_qubits(seed, data):
    attack = random_attack(2, np.random.default_rng(seed))
    sym = symmetrize(attack)
    b = data.draw(st.sampled_from(all_words(2)))
    s = data.draw(st.sampled_from([BitString("10"), BitString("01"), BitString("11")]))
    errs = symmetrization_identity_errors(attack, sym, b, s)
    bad = {k: v for k, v in errs.items() if v > TOL}
    assert not bad


def test_symmetrization_identities_three_qubits(rng):
    attack = random_attack(3, rng)
    sym = symmetrize(attack)
    errs = symmetrization_identity_errors(attack, sym, BitString("010"), BitString("101"))
    assert max(errs.values()) <= TOL


def test_symmetrization_changes_the_attack(rng):
    attack = random_attack(2, rng)
    sym = symmetrize(attack)
    assert sym.probe_dim == attack.probe_dim * 4
    # per-input statistics are averaged, so they generally differ from the original
    assert not np.allclose(sym.transition(BitString("00")), attack.transition(BitString("00")))


# -- Fourier data ----------------------------------------------------------------------------


def test_identity_attack_fourier_mass_is_at_zero():
    four = fourier_eta(identity_attack(2), BitString("00"), BitString("11"), EMPTY, EMPTY)
    assert four.d[0] == pytest.approx(1.0, abs=TOL)
    assert np.allclose(four.d[1:], 0.0, atol=TOL)
    states = four.states()
    assert states[BitString("00")][1] == pytest.approx(1.0)


def test_zero_probability_branch_is_reported():
    # the identity attack never changes a TEST bit
    with pytest.raises(ZeroProbabilityBranch):
        fourier_eta(identity_attack(2), BitString("00"), BitString("10"), BitString("0"), BitString("1"))
    with pytest.raises(ZeroProbabilityBranch):
        inverted_error_distribution(
            identity_attack(2), Conditioning(BitString("00"), BitString("10"), BitString("0"), BitString("1"))
        )


def test_conditioning_checks_lengths():
    with pytest.raises(ValueError):
        Conditioning(BitString("000"), BitString("110"), BitString("00"), BitString("0"))


def test_fourier_orthogonality_and_parseval(rng):
    sym = symmetrize(random_attack(2, rng))
    four = fourier_eta(sym, BitString("01"), BitString("11"), EMPTY, EMPTY)
    gram = four.eta.conj() @ four.eta.T
    assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=TOL)
    assert float((four.d ** 2).sum()) == pytest.approx(1.0, abs=TOL)


# -- trace distance and Eve's key states --------------------------------------------------------


def test_trace_distance_examples():
    zero = np.diag([1.0, 0.0])
    one = np.diag([0.0, 1.0])
    assert trace_distance(zero, zero) == pytest.approx(0.0, abs=1e-15)
    assert trace_distance(zero, one) == pytest.approx(1.0)
    assert trace_distance(zero, np.eye(2) / 2) == pytest.approx(0.5)
    plus = np.full((2, 2), 0.5)
    assert trace_distance(zero, plus) == pytest.approx(math.sqrt(0.5))


def test_trace_distance_errors():
    with pytest.raises(ValueError):
        trace_distance(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        trace_distance(np.zeros((2, 3)), np.zeros((2, 3)))


def test_trace_distance_on_blocks_adds_up():
    a = BlockOperator({"x": np.diag([0.5, 0.0]), "y": np.diag([0.5, 0.0])})
    b = BlockOperator({"x": np.diag([0.5, 0.0]), "z": np.diag([0.0, 0.5])})
    # the shared block cancels; each unmatched block of trace 1/2 adds 1/4
    assert trace_distance(a, b) == pytest.approx(0.5)
    assert a.trace == pytest.approx(1.0)
    assert a.scaled(2).trace == pytest.approx(2.0)


def test_block_trace_distance_ignores_block_order(rng):
    mats = {f"label{k}": np.diag(rng.random(2)) / 7 for k in range(40)}
    other = {label: 0.5 * m for label, m in mats.items()}
    forward = trace_distance(BlockOperator(dict(mats)), BlockOperator(dict(other)))
    backward = trace_distance(BlockOperator(dict(reversed(mats.items()))), BlockOperator(dict(other)))
    assert forward == backward


def test_rho_hat_identity_attack_hides_the_key():
    sym = symmetrize(identity_attack(2))
    rho = rho_hat_keys(sym, BitString("01"), BitString("11"), EMPTY, EMPTY, EMPTY, all_code_pairs(0, 1, 2))
    assert set(rho) == {BitString("0"), BitString("1")}
    for op in rho.values():
        assert op.trace == pytest.approx(1.0, abs=TOL)
    assert trace_distance(rho[BitString("0")], rho[BitString("1")]) == pytest.approx(0.0, abs=TOL)


@pytest.mark.parametrize("symmetrized", [False, True])
def test_rho_hat_z_copy_reveals_the_key(symmetrized):
    attack = z_copy_attack(2)
    if symmetrized:
        attack = symmetrize(attack)
    rho = rho_hat_keys(attack, BitString("00"), BitString("11"), EMPTY, EMPTY, EMPTY, all_code_pairs(0, 2, 2))
    keys = list(rho)
    assert len(keys) == 4
    for op in rho.values():
        assert op.trace == pytest.approx(1.0, abs=TOL)
    for a in keys:
        for b in keys:
            if a != b:
                assert trace_distance(rho[a], rho[b]) == pytest.approx(1.0, abs=TOL)


def test_rho_hat_guards():
    sym = symmetrize(identity_attack(2))
    with pytest.raises(ValueError):
        rho_hat_keys(sym, BitString("00"), BitString("11"), EMPTY, EMPTY, EMPTY, [])
    with pytest.raises(ValueError):
        rho_hat_keys(sym, BitString("00"), BitString("11"), EMPTY, EMPTY, BitString("0"), all_code_pairs(0, 1, 2))


def test_code_pair_enumeration():
    pairs = all_code_pairs(1, 1, 2)
    # ordered pairs of independent nonzero vectors in F2^2
    assert len(pairs) == 3 * 2
    assert sum(p.weight for p in pairs) == pytest.approx(1.0)
    assert all(p.P_C.shape == (1, 2) and p.P_K.shape == (1, 2) for p in pairs)
    assert len(all_code_pairs(0, 0, 3)) == 1
    with pytest.raises(ValueError):
        all_code_pairs(2, 2, 3)
    with pytest.raises(ValueError):
        all_code_pairs(2, 1, 6)


def test_span_basis_splits_the_space():
    basis = SpanBasis.from_pair(BitMatrix("110"), BitMatrix("011"))
    assert basis.n == 3 and basis.vectors.rows == 3
    V = basis.span(2)
    Vc = basis.complement(2)
    assert sorted(V.tolist()) == sorted([0, 0b110, 0b011, 0b101])
    assert len(Vc) == 2
    assert sorted((V[:, None] ^ Vc[None, :]).ravel().tolist()) == list(range(8))
    with pytest.raises(ValueError):
        SpanBasis.from_pair(BitMatrix("110"), BitMatrix("110"))


# -- the inequalities --------------------------------------------------------------------------


def test_info_disturbance_identity_attack():
    res = verify_info_disturbance(identity_attack(3), BitString("001"), BitString("110"),
                                  BitString("1"), BitString("1"), BitString("0"))
    assert res.lhs == pytest.approx(0.0, abs=TOL)
    assert res.holds
    assert res.lemma_gap <= TOL


def test_info_disturbance_z_copy_at_t0():
    n, r = 2, 0
    res = verify_info_disturbance(z_copy_attack(3), BitString("000"), BitString("110"),
                                  BitString("0"), BitString("0"), EMPTY, t=0)
    assert res.inverted_mass == pytest.approx(1.0, abs=TOL)
    assert res.rhs == pytest.approx(2 * math.sqrt(1 + 2.0 ** (-(n - r - 1))), rel=1e-12)
    assert res.holds
    # Eve copied every INFO bit, so she knows the key exactly
    assert res.lhs == pytest.approx(1.0, abs=TOL)


def test_info_disturbance_checks_t():
    with pytest.raises(ValueError):
        verify_info_disturbance(identity_attack(3), BitString("000"), BitString("110"),
                                BitString("0"), BitString("0"), EMPTY, t=2)
    with pytest.raises(ValueError):
        verify_info_disturbance(identity_attack(3), BitString("000"), BitString("110"),
                                BitString("0"), BitString("0"), BitString("01"))


def test_info_disturbance_random_cases(rng):
    for report in info_disturbance_campaign(4, rng):
        assert report.holds
        assert report.identity_error <= TOL
        assert len(report.csv_row()) == len(REPORT_HEADER)
        assert report.csv_row()[-1] == "true"


def test_composable_identity_attack_is_perfect():
    res = verify_composable_bound(identity_attack(2), TINY_BB84)
    assert res.lhs == pytest.approx(0.0, abs=TOL)
    assert res.failure_prob == pytest.approx(0.0, abs=TOL)
    assert res.holds and res.chain_holds


def test_composable_intercept_resend():
    res = verify_composable_bound(intercept_resend_z(2), TINY_BB84)
    assert res.lhs > 1e-3
    assert res.lhs <= res.rhs + 1e-9
    assert res.holds and res.chain_holds
    assert res.reliability_distance == pytest.approx(res.failure_prob, abs=1e-12)


def test_composable_random_cases(rng):
    for report, res in composable_campaign(3, rng, TINY_BB84):
        assert report.holds
        assert res.secrecy_distance <= res.secrecy_distance_sym + 1e-9


def test_composable_size_guard(rng):
    big = ProtocolParams.bb84(2, 0, 1, 0.25, 0.25, 0.25, check_integrality=False)
    with pytest.raises(ValueError):
        verify_composable_bound(random_attack(4, rng, probe_dim=2), big)
    with pytest.raises(ValueError):
        verify_composable_bound(identity_attack(3), TINY_BB84)
