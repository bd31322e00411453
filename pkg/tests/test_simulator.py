from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shallow_shadows.circuits import H_GATE, Circuit, Topology, brickwork, circuit_unitary, sample_circuit
from shallow_shadows.noise import GUENoise, NoiseModel, PauliChannel, depolarizing
from shallow_shadows.pauli import DenseState
from shallow_shadows.simulator import (AcquisitionSpec, RecordSet, acquire, file_digest,
                                       outcome_distribution, random_stabilizer_state, run_shot,
                                       shot_seed)

PAULI_NOISE = NoiseModel(depolarizing(0.05, 2), (depolarizing(0.02), PauliChannel((0.9, 0.05, 0.0, 0.05))),
                         ((0.03, 0.06),) * 3)


def _identity_circuit(n, D):
    return Circuit(n, D, np.broadcast_to(np.eye(2, dtype=complex), (D + 1, n, 2, 2)), brickwork(n), "haar")


def test_identity_circuit_measures_zero():
    c = _identity_circuit(3, 0)
    for s in range(20):
        assert run_shot(DenseState.zero(3), c, rng=s).z == "000"
    np.testing.assert_array_equal(outcome_distribution(DenseState.zero(3), c), np.eye(8)[0])


def test_hadamard_gives_fair_coin():
    c = Circuit(1, 0, H_GATE[None, None], Topology(1, ()), "haar")
    z = np.array([run_shot(DenseState.zero(1), c, rng=s).z == "1" for s in range(10_000)])
    assert abs(z.mean() - 0.5) < 3 * 0.5 / 100


def test_run_shot_deterministic_and_checks_dimensions():
    c = sample_circuit(3, 2, "clifford1q", rng=1)
    a = run_shot(DenseState.haar(3, 0), c, PAULI_NOISE, rng=42)
    b = run_shot(DenseState.haar(3, 0), c, PAULI_NOISE, rng=42)
    assert a.z == b.z
    with pytest.raises(ValueError):
        run_shot(DenseState.zero(2), c)


@given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_outcome_distribution_normalized(n, D, seed):
    c = sample_circuit(n, D, "haar", rng=seed)
    noise = NoiseModel(depolarizing(0.1, 2), (), ((0.05, 0.1),) * n)
    p = outcome_distribution(DenseState.haar(n, seed), c, noise)
    assert p.min() >= -1e-15 and abs(p.sum() - 1) < 1e-12


def test_noiseless_distribution_matches_unitary():
    c = sample_circuit(4, 2, "haar", rng=5)
    s = DenseState.haar(4, 6)
    np.testing.assert_allclose(outcome_distribution(s, c), np.abs(circuit_unitary(c) @ s.amplitudes) ** 2,
                               atol=1e-12)


@pytest.mark.parametrize("D", [0, 1, 2])
def test_trajectories_match_exact_distribution(D):
    n, shots = 3, 20_000
    c = sample_circuit(n, D, "clifford1q", rng=D)
    s = DenseState.haar(n, 11)
    p = outcome_distribution(s, c, PAULI_NOISE)
    spec_rng = np.random.default_rng(3)
    counts = np.zeros(2**n)
    for _ in range(shots):
        counts[int(run_shot(s, c, PAULI_NOISE, rng=spec_rng).z, 2)] += 1
    freq = counts / shots
    se = np.sqrt(p * (1 - p) / shots)
    assert np.all(np.abs(freq - p) <= 4 * se + 1e-12)


def test_acquire_empty_and_deterministic(tmp_path):
    spec = AcquisitionSpec(3, 1, noise=PAULI_NOISE, master_seed=3, shots=0)
    rs = acquire(spec, path=tmp_path / "empty.jsonl")
    assert len(rs) == 0 and RecordSet.read_jsonl(tmp_path / "empty.jsonl").header["shots"] == 0
    spec = AcquisitionSpec(3, 2, noise=PAULI_NOISE, master_seed=3, shots=300)
    acquire(spec, path=tmp_path / "a.jsonl", chunk=64)
    acquire(spec, path=tmp_path / "b.jsonl", workers=3, chunk=50)
    assert file_digest(tmp_path / "a.jsonl") == file_digest(tmp_path / "b.jsonl")


def test_acquire_matches_run_shot_per_seed():
    spec = AcquisitionSpec(3, 1, ensemble="haar", noise=PAULI_NOISE, master_seed=8, shots=5)
    rs = acquire(spec)
    assert rs.shot_seeds[2] == shot_seed(8, 2)
    np.testing.assert_array_equal(rs.gate_array(), rs.gates)


def test_record_set_round_trip(tmp_path):
    spec = AcquisitionSpec(3, 2, noise=NoiseModel(GUENoise(0.5)), master_seed=1, shots=20)
    rs = acquire(spec)
    digest = rs.write_jsonl(tmp_path / "r.jsonl")
    back = RecordSet.read_jsonl(tmp_path / "r.jsonl")
    np.testing.assert_array_equal(back.outcomes, rs.outcomes)
    np.testing.assert_allclose(back.gate_array(), rs.gate_array(), atol=1e-15)
    assert back.write_jsonl(tmp_path / "r2.jsonl") == digest
    sub = rs.subset(slice(5, 10))
    assert len(sub) == 5 and sub[0].z == rs[5].z


def test_random_stabilizer_state_is_stabilizer_like():
    s = random_stabilizer_state(3, 0)
    assert abs(np.linalg.norm(s.amplitudes) - 1) < 1e-12
    nz = np.abs(s.amplitudes) > 1e-9
    assert np.count_nonzero(nz) in (1, 2, 4, 8)
    np.testing.assert_allclose(np.abs(s.amplitudes[nz]), 1 / np.sqrt(np.count_nonzero(nz)), atol=1e-12)


def test_readout_size_must_match():
    with pytest.raises(ValueError):
        AcquisitionSpec(3, 0, noise=NoiseModel(readout=((0.1, 0.1),) * 2))
