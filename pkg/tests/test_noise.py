from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shallow_shadows.noise import (GUENoise, NoiseModel, PauliChannel, apply_noise_event,
                                   calibrate_gamma, depolarizing, gue_unitaries,
                                   incoherent_noise_unitary, infidelity_of_unitary, load_config,
                                   mean_infidelity, readout_flip, sample_gue)
from shallow_shadows.pauli import DenseState, PauliString, pauli_expectation


def test_gue_is_hermitian_and_zero_mean():
    H = sample_gue(4, 0, size=10_000)
    assert np.abs(H - np.conj(np.swapaxes(H, -1, -2))).max() == 0
    mean = H.mean(axis=0)
    assert np.abs(mean).max() < 5 * 1 / 100


def test_gue_second_moment_semicircle():
    H = sample_gue(256, 1)
    ev = np.linalg.eigvalsh(H) / np.sqrt(256)
    assert np.mean(ev**2) == pytest.approx(1.0, rel=0.05)


def test_incoherent_noise_unitary():
    np.testing.assert_allclose(incoherent_noise_unitary(0.0, 0), np.eye(4), atol=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(20):
        U = incoherent_noise_unitary(rng.uniform(0, 2), rng)
        assert np.abs(U.conj().T @ U - np.eye(4)).max() < 1e-12


def test_mean_infidelity_monotone_in_gamma():
    hs = sample_gue(4, 2, size=2000)
    r = [mean_infidelity(g, hs) for g in np.linspace(0, 2, 9)]
    assert np.all(np.diff(r) > 0)


def test_infidelity_examples():
    assert infidelity_of_unitary(np.eye(4)) == pytest.approx(0, abs=1e-15)
    Z = np.diag([1, -1]).astype(complex)
    assert infidelity_of_unitary(np.kron(Z, np.eye(2))) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        infidelity_of_unitary(2 * np.eye(4))


def test_calibrate_gamma():
    assert calibrate_gamma(0.0) == 0.0
    g3 = calibrate_gamma(1e-3, samples=5000)
    r = mean_infidelity(g3, sample_gue(4, 123, size=20_000))
    assert 0.95e-3 <= r <= 1.05e-3
    assert calibrate_gamma(1e-2, samples=5000) > g3
    with pytest.raises(ValueError):
        calibrate_gamma(0.9)


def test_pauli_channel_validation():
    with pytest.raises(ValueError):
        PauliChannel((0.5, 0.6, 0, 0))
    with pytest.raises(ValueError):
        PauliChannel((0.5, 0.5, 0))
    with pytest.raises(ValueError):
        NoiseModel(two_qubit=depolarizing(0.1, 1))
    with pytest.raises(ValueError):
        GUENoise(9.0)


@given(st.lists(st.floats(0, 1), min_size=16, max_size=16).filter(lambda v: sum(v) > 1e-3))
def test_transfer_diagonal_matches_superoperator(w):
    p = np.array(w) / sum(w)
    ch = PauliChannel(tuple(p))
    sup = ch.superoperator()
    for a in range(16):
        P = ch.operator(a)
        out = (sup @ P.reshape(-1)).reshape(4, 4)
        np.testing.assert_allclose(out, ch.transfer_diagonal()[a] * P, atol=1e-12)


def test_identity_channel_leaves_state_unchanged():
    s = DenseState.haar(2, 0)
    out = apply_noise_event(s, [0], PauliChannel((1, 0, 0, 0)), rng=1)
    np.testing.assert_allclose(out.amplitudes, s.amplitudes)
    with pytest.raises(ValueError):
        apply_noise_event(s, [2], PauliChannel((1, 0, 0, 0)))


def test_readout_flip_certain():
    noise = NoiseModel(readout=((1.0, 0.0),))
    bits = readout_flip(np.zeros((100, 1), dtype=np.uint8), noise, np.random.default_rng(0).random((100, 1)))
    assert bits.all()


def test_depolarizing_trajectories_match_transfer_diagonal():
    """Mean of all 16 two-qubit Pauli expectations over trajectories vs the exact channel."""
    ch = PauliChannel(tuple(np.r_[0.85, np.random.default_rng(5).dirichlet(np.ones(15)) * 0.15]))
    s = DenseState.haar(2, 3)
    rng = np.random.default_rng(9)
    labels = [a + b for a in "IXYZ" for b in "IXYZ"]
    T = 20_000
    vals = np.zeros((T, 16))
    for t in range(T):
        out = apply_noise_event(s, [0, 1], ch, rng)
        vals[t] = [pauli_expectation(out, PauliString.from_label(l)) for l in labels]
    mean, se = vals.mean(0), vals.std(0, ddof=1) / np.sqrt(T)
    exact = ch.transfer_diagonal() * [pauli_expectation(s, PauliString.from_label(l)) for l in labels]
    assert np.all(np.abs(mean - exact) <= 3 * se + 1e-12)


def test_gue_average_channel_is_unital_and_symmetric():
    U = gue_unitaries(1.0, sample_gue(4, 4, size=10_000))
    # Pauli transfer matrix of the average channel
    P = np.stack([np.kron(a, b) for a in _paulis() for b in _paulis()])
    R = np.einsum("aij,gjk,bkl,gil->ab", P, U, P, U.conj(), optimize=True).real / (4 * len(U))
    assert R[0, 0] == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(R[1:, 0], 0, atol=0.02)
    np.testing.assert_allclose(R, R.T, atol=0.02)


def _paulis():
    return [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]


def test_noise_config_round_trip(tmp_path):
    nm = NoiseModel(depolarizing(0.02, 2), (depolarizing(0.01), PauliChannel((0.9, 0.1, 0, 0))),
                    ((0.01, 0.05), (0.02, 0.03)))
    assert NoiseModel.from_dict(nm.to_dict()) == nm
    toml = tmp_path / "noise.toml"
    toml.write_text('readout = [[0.1, 0.2]]\n[two_qubit]\nkind = "gue"\ngamma = 0.5\n')
    loaded = NoiseModel.load(toml)
    assert loaded.two_qubit == GUENoise(0.5) and loaded.readout == ((0.1, 0.2),)
    assert load_config(toml)["two_qubit"]["kind"] == "gue"
    assert nm.digest() == NoiseModel.from_dict(nm.to_dict()).digest()
