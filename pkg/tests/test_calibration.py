from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shallow_shadows.calibration import (FrameSpectrum, bootstrap_floor, estimate_f, exact_f,
                                         exact_f_tt_pauli_noise, frame_structure, ideal_f,
                                         noiseless_f, noisy_frame_superoperator, phi_dense,
                                         phi_histograms, phi_tt)
from shallow_shadows.circuits import H_GATE, Circuit, Topology, brickwork, sample_circuit
from shallow_shadows.noise import GUENoise, NoiseModel, PauliChannel, depolarizing
from shallow_shadows.pauli import DenseState, PauliString, pauli_expectation
from shallow_shadows.simulator import AcquisitionSpec, ShadowRecord, acquire

GATE_DEP = NoiseModel(depolarizing(0.06, 2),
                      (PauliChannel((0.7, 0.3, 0, 0)), PauliChannel((0.8, 0, 0.05, 0.15)),
                       depolarizing(0.02)),
                      ((0.04, 0.08),) * 3)


def _record(n, D, seed, z=None):
    c = sample_circuit(n, D, "clifford1q", rng=seed)
    z = z if z is not None else format(seed % 2**n, f"0{n}b")
    return ShadowRecord(c, z, seed)


def test_phi_dense_examples():
    ident = Circuit(3, 0, np.broadcast_to(np.eye(2, dtype=complex), (1, 3, 2, 2)), brickwork(3), "haar")
    np.testing.assert_allclose(phi_dense(ShadowRecord(ident, "000")), 1.0)
    had = Circuit(1, 0, H_GATE[None, None], Topology(1, ()), "haar")
    np.testing.assert_allclose(phi_dense(ShadowRecord(had, "0")), [1, 0], atol=1e-15)


@given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_phi_dense_matches_direct_z_expectations(n, D, seed):
    rec = _record(n, D, seed)
    from shallow_shadows.circuits import circuit_unitary
    chi = DenseState(n, circuit_unitary(rec.circuit).conj().T @ DenseState.basis(rec.z).amplitudes)
    phi = phi_dense(rec)
    for k in range(2**n):
        label = "".join("Z" if (k >> (n - 1 - q)) & 1 else "I" for q in range(n))
        assert abs(phi[k] - pauli_expectation(chi, PauliString.from_label(label))) < 1e-12


@pytest.mark.parametrize("n,D,bound", [(4, 0, 1), (5, 1, 4), (6, 2, 16)])
def test_phi_tt_matches_dense_with_rank_bound(n, D, bound):
    for s in range(5):
        rec = _record(n, D, s)
        t = phi_tt(rec)
        assert t.max_rank <= bound
        np.testing.assert_allclose(t.to_dense(), phi_dense(rec), atol=1e-10)


def test_ideal_f_examples():
    np.testing.assert_allclose(ideal_f(2).values, [1, 1 / 3, 1 / 3, 1 / 9])
    np.testing.assert_allclose(ideal_f(2, "global_clifford").values, [1, 0.2, 0.2, 0.2])
    assert ideal_f(7).values[0] == 1 and ideal_f(7, "global_clifford").values[0] == 1
    with pytest.raises(ValueError):
        ideal_f(2, "haar_global")


def test_exact_f_single_qubit_enumeration():
    f = exact_f(1, 0)
    np.testing.assert_allclose(f.values, [1, 1 / 3], atol=1e-12)
    assert f.meta["enumerated"]


def test_exact_f_global_clifford_two_qubits():
    f = exact_f(2, ensemble="global_clifford", enumerate_all=True)
    np.testing.assert_allclose(f.values, [1, 0.2, 0.2, 0.2], atol=1e-12)


def test_exact_f_trace_preserving_noise_keeps_f0():
    f = exact_f(3, 1, noise=GATE_DEP, circuit_samples=200)
    assert f.values[0] == pytest.approx(1.0, abs=1e-12)


def test_tt_oracle_noiseless_depth_zero_is_product():
    t = exact_f_tt_pauli_noise(5, 0)
    assert t.ranks == (1,) * 4
    np.testing.assert_allclose(t.to_dense(), ideal_f(5).values, atol=1e-14)


def test_tt_oracle_matches_enumeration_with_readout_and_gate_noise():
    noise = NoiseModel(None, GATE_DEP.single_qubit_channels, ((0.04, 0.08), (0.01, 0.02)))
    np.testing.assert_allclose(exact_f_tt_pauli_noise(2, 0, noise).to_dense(), exact_f(2, 0, noise=noise).values,
                               atol=1e-12)
    noise1 = NoiseModel(None, GATE_DEP.single_qubit_channels, ((0.04, 0.08),))
    np.testing.assert_allclose(exact_f_tt_pauli_noise(1, 1, noise1, Topology(1, ((),))).to_dense(),
                               exact_f(1, 1, noise=noise1, topology=Topology(1, ((),))).values, atol=1e-12)


@pytest.mark.parametrize("D", [1, 2])
def test_tt_oracle_matches_sampled_oracle(D):
    tt = exact_f_tt_pauli_noise(3, D, GATE_DEP).to_dense()
    mc = exact_f(3, D, noise=GATE_DEP, circuit_samples=6000, rng=D)
    assert max(exact_f_tt_pauli_noise(3, D, GATE_DEP).ranks) <= 4**D
    assert np.all(np.abs(tt - mc.values) <= 4 * mc.stderr + 1e-12)


def test_tt_oracle_rejects_unsupported_noise():
    with pytest.raises(ValueError):
        exact_f_tt_pauli_noise(3, 1, NoiseModel(GUENoise(0.3)))
    with pytest.raises(ValueError):
        exact_f_tt_pauli_noise(4, 2, NoiseModel(depolarizing(0.1, 2)), brickwork(4, "periodic"))


def test_noiseless_f_depth_one_identity_channels_match_sampling():
    ident = NoiseModel(PauliChannel((1.0,) + (0.0,) * 15))
    mc = exact_f(4, 2, noise=ident, circuit_samples=4000, rng=1)
    f = noiseless_f(4, 2).values
    assert np.all(np.abs(f - mc.values) <= 4 * mc.stderr + 1e-12)


def test_estimate_f_basic_contract():
    recs = acquire(AcquisitionSpec(1, 0, master_seed=2, shots=20_000))
    f = estimate_f(recs)
    assert f.values[0] == 1.0 and f.stderr[0] == 0.0
    assert abs(f.values[1] - 1 / 3) <= 3 * f.stderr[1]
    with pytest.raises(ValueError):
        estimate_f(acquire(AcquisitionSpec(1, 0, input_state=DenseState.haar(1, 0), input_tag="haar",
                                           master_seed=0, shots=10)))
    with pytest.raises(ValueError):
        estimate_f(acquire(AcquisitionSpec(1, 0, master_seed=0, shots=0)))


def test_estimate_f_tt_and_streamed_modes():
    recs = acquire(AcquisitionSpec(4, 1, noise=NoiseModel(depolarizing(0.05, 2)), master_seed=4, shots=2000))
    dense = estimate_f(recs)
    tt = estimate_f(recs, mode="tt", chi=16)
    streamed = estimate_f(recs, mode="tt", chi=16, streamed=True)
    np.testing.assert_allclose(tt.dense(), dense.values, atol=1e-8)
    np.testing.assert_allclose(streamed.dense(), dense.values, atol=1e-8)
    small = estimate_f(recs, mode="tt", chi=2)
    assert small.tt.max_rank <= 2 and small.provenance == "tt_fit"


def test_bootstrap_floor_and_histograms():
    recs = acquire(AcquisitionSpec(3, 1, master_seed=6, shots=3000))
    f = estimate_f(recs, bootstrap=50, rng=1)
    assert f.bootstrap.shape == (50, 8)
    assert 0 < bootstrap_floor(f) < 1
    samples, edges, counts = phi_histograms(recs, [4, 6, 7])
    assert samples.shape == (3000, 3) and counts.sum(axis=1).tolist() == [3000] * 3
    np.testing.assert_allclose(samples.mean(axis=0), f.values[[4, 6, 7]], atol=1e-12)


def test_spectrum_files_round_trip(tmp_path):
    recs = acquire(AcquisitionSpec(3, 1, master_seed=6, shots=500))
    f = estimate_f(recs, mode="tt", chi=4)
    f.to_csv(tmp_path / "s.csv")
    f.to_tt_json(tmp_path / "s.json")
    back = FrameSpectrum.load(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, f.dense())
    np.testing.assert_allclose(FrameSpectrum.load(tmp_path / "s.json").dense(), f.dense(), atol=1e-14)


def test_marginal_and_kron():
    a, b = ideal_f(2), ideal_f(3, "global_clifford")
    ab = a.kron(b)
    np.testing.assert_allclose(ab.marginal([0, 1]).values, a.values)
    np.testing.assert_allclose(ab.marginal([2, 3, 4]).values, b.values)


@pytest.mark.parametrize("n,D", [(2, 1), (3, 1), (3, 2)])
def test_frame_is_pauli_diagonal_with_ideal_first_layer(n, D):
    S, se = noisy_frame_superoperator(n, D, GATE_DEP, samples=30, rng=n + D)
    info = frame_structure(S, n)
    se_diag = np.diag(se)
    assert info["offdiag"] < 1e-10
    for k in range(2**n):
        sel = info["labels"] == k
        assert info["spread"][k] <= 4 * np.sqrt(2) * se_diag[sel].max() + 1e-10
    tt = exact_f_tt_pauli_noise(n, D, GATE_DEP).to_dense()
    assert np.all(np.abs(info["f"] - tt) <= 4 * se_diag.max() + 1e-10)


def test_frame_structure_detects_noisy_first_layer():
    bad = NoiseModel(None, (PauliChannel((0.5, 0.5, 0, 0)), PauliChannel((0.6, 0, 0, 0.4)),
                            PauliChannel((0.9, 0, 0.1, 0))), None, first_layer_ideal=False)
    S, se = noisy_frame_superoperator(2, 0, bad)
    info = frame_structure(S, 2)
    assert max(info["spread"].max(), info["offdiag"]) > 0.05
