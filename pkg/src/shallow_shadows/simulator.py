"""Dense state-vector simulation of the randomized-measurement primitive.

Every shot owns the random stream ``default_rng(shot_seed)`` and consumes it in
a fixed order: circuit gates, noise realisation (GUE Hamiltonians or two-qubit
Pauli labels per CNOT, then one uniform per single-qubit gate), the outcome
uniform, and the readout uniforms. Shots are therefore independent of
batching and thread scheduling.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels as K
from .circuits import (Circuit, Topology, apply_adjoint_circuit, brickwork, sample_layers,
                       single_qubit_cliffords)
from .noise import NOISELESS, NoiseModel, _haar_key, gue_unitaries, readout_flip, sample_gue
from .pauli import PAULIS, DenseState

FORMAT = "shallow-shadows-records/1"
MAX_EXACT_QUBITS = 12
MAX_DENSITY_QUBITS = 8


@dataclass
class ShadowRecord:
    """One acquisition outcome: the noise-free circuit description and bitstring ``z``."""

    circuit: Circuit
    z: str
    shot_seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.circuit.n

    def to_dict(self) -> dict:
        return {"circuit": self.circuit.to_dict(), "z": self.z, "shot_seed": self.shot_seed}


def _draw_noise(circuit_depth: int, n: int, num_cnots: int, noise: NoiseModel, rng) -> dict:
    out = {}
    if noise.has_gue and num_cnots:
        out["gue_h"] = sample_gue(4, rng, size=num_cnots)
    if noise.has_two_qubit_pauli and num_cnots:
        out["two_qubit_u"] = rng.random(num_cnots)
    if noise.has_single_qubit:
        out["single_u"] = rng.random((circuit_depth + 1, n))
    return out


def _stack_draws(draws: list[dict]) -> dict:
    if not draws or not draws[0]:
        return {}
    return {k: np.stack([d[k] for d in draws]) for k in draws[0]}


def _channel_table(noise: NoiseModel, gates: np.ndarray, cliff_idx: Optional[np.ndarray]) -> np.ndarray:
    """Channel index per single-qubit gate, shape gates.shape[:-2]."""
    if cliff_idx is not None:
        table = np.array([noise.channel_index(i) for i in range(24)])
        return table[cliff_idx]
    flat = gates.reshape(-1, 2, 2)
    return np.array([noise.channel_index(_haar_key(g)) for g in flat]).reshape(gates.shape[:-2])


def _pauli_labels(u: np.ndarray, cdfs: np.ndarray, chan: np.ndarray) -> np.ndarray:
    labels = (cdfs[chan] <= u[..., None]).sum(axis=-1)
    return np.minimum(labels, cdfs.shape[-1] - 1)


def evolve_noisy(psi: np.ndarray, gates: np.ndarray, cliff_idx: Optional[np.ndarray],
                 topology: Topology, depth: int, n: int, noise: NoiseModel,
                 draws: dict) -> np.ndarray:
    """Apply a batch of sampled noisy circuits to states ``psi`` (B, 2**n)."""
    single = None
    if "single_u" in draws:
        cdfs = np.cumsum(np.array([c.probs for c in noise.single_qubit_channels]), axis=1)
        single = _pauli_labels(draws["single_u"], cdfs, _channel_table(noise, gates, cliff_idx))
    two = None
    if "two_qubit_u" in draws:
        cdf = np.cumsum(noise.two_qubit.probs)
        two = np.minimum((cdf[None, None, :] <= draws["two_qubit_u"][..., None]).sum(-1), 15)
    gue = None
    if "gue_h" in draws:
        gue = gue_unitaries(noise.two_qubit.gamma, draws["gue_h"])
    m = 0
    for j in range(depth + 1):
        if j > 0:
            for c, t in topology.sublayer_for(j):
                psi = K.apply_cnot(psi, c, t, n)
                if gue is not None:
                    psi = K.apply_op(psi, gue[:, m], (c, t), n)
                if two is not None:
                    psi = K.apply_1q(psi, PAULIS[two[:, m] >> 2], c, n)
                    psi = K.apply_1q(psi, PAULIS[two[:, m] & 3], t, n)
                m += 1
        psi = K.apply_1q_layer(psi, gates[:, j], n)
        if single is not None and not (j == 0 and noise.first_layer_ideal):
            for q in range(n):
                psi = K.apply_1q(psi, PAULIS[single[:, j, q]], q, n)
    return psi


def _measure(psi: np.ndarray, u: np.ndarray, readout_u: np.ndarray, noise: NoiseModel, n: int) -> np.ndarray:
    idx = K.sample_outcomes(K.probabilities(psi), u)
    bits = K.index_to_bits(idx, n)
    return readout_flip(bits, noise, readout_u)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def run_shot(input_state: DenseState, circuit: Circuit, noise: NoiseModel = NOISELESS, rng=None,
             shot_seed: Optional[int] = None) -> ShadowRecord:
    """Simulate one noisy shot of ``circuit``; ``rng`` supplies the noise and sampling draws."""
    if input_state.n != circuit.n:
        raise ValueError(f"state has {input_state.n} qubits, circuit has {circuit.n}")
    rng = np.random.default_rng(rng)
    n, D = circuit.n, circuit.depth
    draws = _draw_noise(D, n, circuit.num_cnots, noise, rng)
    u = rng.random()
    ro = rng.random(n)
    cidx = None if circuit.clifford_indices is None else circuit.clifford_indices[None]
    psi = evolve_noisy(input_state.amplitudes[None, :].copy(), circuit.single_qubit_layers[None],
                       cidx, circuit.topology, D, n, noise, _stack_draws([draws]))
    bits = _measure(psi, np.array([u]), ro[None, :], noise, n)[0]
    return ShadowRecord(circuit, bits_to_str(bits), shot_seed)


# --- exact distributions -----------------------------------------------------

def _apply_readout_to_probs(probs: np.ndarray, noise: NoiseModel, n: int) -> np.ndarray:
    if noise.readout is None:
        return probs
    for q in range(n):
        probs = K.apply_1q(probs, noise.readout_matrix(q), q, n)
    return probs


def exact_distributions(psi0: np.ndarray, gates: np.ndarray, cliff_idx: Optional[np.ndarray],
                        topology: Topology, depth: int, n: int, noise: NoiseModel,
                        gue_unitaries_: Optional[np.ndarray] = None,
                        rho0: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact noisy outcome distributions for a batch of circuits, shape (B, 2**n).

    Pauli channels are applied as channels (density-matrix path, n <= 8);
    GUE noise needs the fixed unitaries ``gue_unitaries_`` of shape (B, m, 4, 4).
    An input operator ``rho0`` ((d, d) or (B, d, d), not necessarily a state)
    replaces ``psi0`` and forces the density path; the result is then the
    linear extension of the outcome distribution.
    """
    B = gates.shape[0]
    d = 2**n
    if noise.has_gue and gue_unitaries_ is None:
        raise ValueError("GUE noise needs fixed noise unitaries for an exact distribution")
    use_density = noise.has_single_qubit or noise.has_two_qubit_pauli or rho0 is not None
    if not use_density:
        psi = np.broadcast_to(psi0, (B, d)).astype(complex)
        m = 0
        for j in range(depth + 1):
            if j > 0:
                for c, t in topology.sublayer_for(j):
                    psi = K.apply_cnot(psi, c, t, n)
                    if noise.has_gue:
                        psi = K.apply_op(psi, gue_unitaries_[:, m], (c, t), n)
                    m += 1
            psi = K.apply_1q_layer(psi, gates[:, j], n)
        return _apply_readout_to_probs(K.probabilities(psi), noise, n)

    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"density-matrix path limited to n <= {MAX_DENSITY_QUBITS}")
    N = 2 * n
    if rho0 is None:
        rho0 = np.outer(psi0, psi0.conj())
    rho = np.broadcast_to(np.asarray(rho0).reshape(-1, d * d), (B, d * d)).astype(complex)
    single_sup = None
    if noise.has_single_qubit:
        sups = np.stack([c.superoperator() for c in noise.single_qubit_channels])
        single_sup = sups[_channel_table(noise, gates, cliff_idx)]  # (B, D+1, n, 4, 4)
    two_sup = noise.two_qubit.superoperator() if noise.has_two_qubit_pauli else None
    m = 0
    for j in range(depth + 1):
        if j > 0:
            for c, t in topology.sublayer_for(j):
                rho = K.apply_cnot(rho, c, t, N)
                rho = K.apply_cnot(rho, n + c, n + t, N)
                if noise.has_gue:
                    U = gue_unitaries_[:, m]
                    rho = K.apply_op(rho, U, (c, t), N)
                    rho = K.apply_op(rho, U.conj(), (n + c, n + t), N)
                if two_sup is not None:
                    rho = K.apply_op(rho, two_sup, (c, t, n + c, n + t), N)
                m += 1
        for q in range(n):
            rho = K.apply_1q(rho, gates[:, j, q], q, N)
            rho = K.apply_1q(rho, gates[:, j, q].conj(), n + q, N)
            if single_sup is not None and not (j == 0 and noise.first_layer_ideal):
                rho = K.apply_op(rho, single_sup[:, j, q], (q, n + q), N)
    probs = np.diagonal(rho.reshape(B, d, d), axis1=1, axis2=2).real.copy()
    return _apply_readout_to_probs(probs, noise, n)


def outcome_distribution(input_state: DenseState, circuit: Circuit, noise: NoiseModel = NOISELESS,
                         fixed_noise_events: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact Born probabilities of the noisy circuit (shot-free oracle, n <= 12)."""
    if circuit.n > MAX_EXACT_QUBITS:
        raise ValueError(f"exact distribution limited to n <= {MAX_EXACT_QUBITS}")
    if input_state.n != circuit.n:
        raise ValueError("dimension mismatch")
    cidx = None if circuit.clifford_indices is None else circuit.clifford_indices[None]
    gue = None if fixed_noise_events is None else np.asarray(fixed_noise_events)[None]
    return exact_distributions(input_state.amplitudes, circuit.single_qubit_layers[None], cidx,
                               circuit.topology, circuit.depth, circuit.n, noise, gue)[0]


# --- record sets ------------------------------------------------------------

@dataclass
class RecordSet:
    """A sequence of shadow records sharing one header.

    Gates are held as a (S, D+1, n, 2, 2) array, or as Clifford indices for the
    clifford1q ensemble; outcomes as a (S, n) bit array.
    """

    header: dict
    outcomes: np.ndarray
    shot_seeds: np.ndarray
    gates: Optional[np.ndarray] = None
    clifford_indices: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.header["n"])

    @property
    def depth(self) -> int:
        return int(self.header["depth"])

    @property
    def topology(self) -> Topology:
        return Topology.from_dict(self.header["topology"])

    def __len__(self) -> int:
        return int(self.outcomes.shape[0])

    def gate_array(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        if self.clifford_indices is not None:
            return single_qubit_cliffords()[self.clifford_indices[start:stop]]
        return self.gates[start:stop]

    def chunks(self, size: int = 4096) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (gates, outcome bits) blocks in shot order."""
        for s in range(0, len(self), size):
            yield self.gate_array(s, s + size), self.outcomes[s : s + size]

    def __getitem__(self, i: int) -> ShadowRecord:
        gates = self.gate_array(i, i + 1)[0]
        cidx = None if self.clifford_indices is None else self.clifford_indices[i]
        c = Circuit(self.n, self.depth, gates, self.topology, self.header["ensemble"], None, cidx)
        return ShadowRecord(c, bits_to_str(self.outcomes[i]), int(self.shot_seeds[i]))

    def __iter__(self) -> Iterator[ShadowRecord]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, index) -> "RecordSet":
        index = np.arange(len(self))[index]
        hdr = dict(self.header, shots=int(len(index)))
        return RecordSet(hdr, self.outcomes[index], self.shot_seeds[index],
                         None if self.gates is None else self.gates[index],
                         None if self.clifford_indices is None else self.clifford_indices[index])

    @classmethod
    def from_records(cls, header: dict, records) -> "RecordSet":
        records = list(records)
        n, D = int(header["n"]), int(header["depth"])
        for r in records:
            if r.circuit.n != n or r.circuit.depth != D:
                raise ValueError("record does not match header n/depth")
        gates = np.stack([r.circuit.single_qubit_layers for r in records]) if records else \
            np.zeros((0, D + 1, n, 2, 2), dtype=complex)
        outcomes = np.array([[int(b) for b in r.z] for r in records], dtype=np.uint8).reshape(-1, n)
        seeds = np.array([r.shot_seed or 0 for r in records], dtype=np.uint64)
        return cls(dict(header, shots=len(records)), outcomes, seeds, gates)

    # -- JSONL persistence
    def write_jsonl(self, path) -> str:
        """Write header line plus one line per record; returns the sha256 digest."""
        with open(path, "w", encoding="utf-8") as fh:
            for line in self._lines():
                fh.write(line)
        return file_digest(path)

    def _lines(self) -> Iterator[str]:
        yield json.dumps({"header": self.header}, sort_keys=True) + "\n"
        for rec in self:
            yield json.dumps(rec.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def read_jsonl(cls, path) -> "RecordSet":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())["header"]
            topo = Topology.from_dict(header["topology"])
            records = []
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    c = Circuit.from_dict(d["circuit"], topo)
                    records.append(ShadowRecord(c, d["z"], d.get("shot_seed")))
        rs = cls.from_records(header, records)
        rs.header = header
        return rs


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- acquisition ------------------------------------------------------------

@dataclass
class AcquisitionSpec:
    """What to measure: circuit ensemble, input state, noise, seed and shot count."""

    n: int
    depth: int
    ensemble: str = "clifford1q"
    topology: Optional[Topology] = None
    input_state: Optional[DenseState] = None
    input_tag: str = "zero"
    noise: NoiseModel = NOISELESS
    master_seed: int = 0
    shots: int = 0

    def __post_init__(self):
        if self.topology is None:
            self.topology = brickwork(self.n)
        if self.input_state is None:
            self.input_state = DenseState.zero(self.n)
            self.input_tag = "zero"
        if self.input_state.n != self.n or self.topology.n != self.n:
            raise ValueError("input state / topology size does not match n")
        if self.noise.readout is not None and len(self.noise.readout) != self.n:
            raise ValueError(f"readout noise lists {len(self.noise.readout)} qubits, expected {self.n}")

    def header(self) -> dict:
        return {"format": FORMAT, "n": self.n, "depth": self.depth, "ensemble": self.ensemble,
                "topology": self.topology.to_dict(), "input_state": self.input_tag,
                "noise_digest": self.noise.digest(), "master_seed": int(self.master_seed),
                "shots": int(self.shots)}


def shot_seed(master_seed: int, index: int) -> int:
    """63-bit seed of shot ``index`` derived from the master seed."""
    words = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int((int(words[0]) << 31) ^ int(words[1]))


def _acquire_chunk(spec: AcquisitionSpec, start: int, stop: int):
    n, D = spec.n, spec.depth
    num_cnots = sum(len(spec.topology.sublayer_for(j)) for j in range(1, D + 1))
    seeds, gates, cidx, draws, us, ros = [], [], [], [], [], []
    for i in range(start, stop):
        s = shot_seed(spec.master_seed, i)
        rng = np.random.default_rng(s)
        g, idx = sample_layers(n, D, spec.ensemble, rng)
        draws.append(_draw_noise(D, n, num_cnots, spec.noise, rng))
        us.append(rng.random())
        ros.append(rng.random(n))
        seeds.append(s)
        gates.append(g)
        cidx.append(idx)
    B = stop - start
    gates_arr = np.stack(gates) if B else np.zeros((0, D + 1, n, 2, 2), dtype=complex)
    cidx_arr = np.stack(cidx) if (B and cidx[0] is not None) else None
    psi = np.broadcast_to(spec.input_state.amplitudes, (B, 2**n)).astype(complex)
    if B:
        psi = evolve_noisy(psi, gates_arr, cidx_arr, spec.topology, D, n, spec.noise,
                           _stack_draws(draws))
        bits = _measure(psi, np.array(us), np.stack(ros), spec.noise, n)
    else:
        bits = np.zeros((0, n), dtype=np.uint8)
    return np.array(seeds, dtype=np.uint64), gates_arr, cidx_arr, bits


def acquire(spec: AcquisitionSpec, workers: int = 1, chunk: int = 2048,
            path=None) -> RecordSet:
    """Run ``spec.shots`` shots; optionally stream the JSONL file to ``path``.

    Output is identical for any ``workers``: chunks are computed independently
    and merged in shot order.
    """
    bounds = [(s, min(s + chunk, spec.shots)) for s in range(0, spec.shots, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: _acquire_chunk(spec, *b), bounds))
    else:
        parts = [_acquire_chunk(spec, *b) for b in bounds]
    n, D = spec.n, spec.depth
    header = spec.header()
    if parts:
        seeds = np.concatenate([p[0] for p in parts])
        bits = np.concatenate([p[3] for p in parts])
        if spec.ensemble == "clifford1q":
            rs = RecordSet(header, bits, seeds, None, np.concatenate([p[2] for p in parts]).astype(np.int8))
        else:
            rs = RecordSet(header, bits, seeds, np.concatenate([p[1] for p in parts]))
    else:
        rs = RecordSet(header, np.zeros((0, n), dtype=np.uint8), np.zeros(0, dtype=np.uint64),
                       np.zeros((0, D + 1, n, 2, 2), dtype=complex))
    if path is not None:
        rs.write_jsonl(path)
    return rs


def snapshot_states(gates: np.ndarray, outcomes: np.ndarray, topology: Topology, depth: int,
                    n: int) -> np.ndarray:
    """``|chi> = g^dagger |z>`` for a batch of (gates, outcome bits)."""
    B = gates.shape[0]
    psi = np.zeros((B, 2**n), dtype=complex)
    psi[np.arange(B), K.bits_to_index(outcomes)] = 1
    return apply_adjoint_circuit(psi, gates, topology, depth, n)


def random_stabilizer_state(n: int, rng, depth: Optional[int] = None) -> DenseState:
    """Approximately uniform stabilizer state: random Clifford brickwork applied to |0^n>.

    Each layer applies random single-qubit Cliffords and CNOTs on a random
    brickwork pattern; the default depth is ``2n``.
    """
    rng = np.random.default_rng(rng)
    depth = 2 * n if depth is None else depth
    cl = single_qubit_cliffords()
    psi = DenseState.zero(n).amplitudes[None, :]
    for j in range(depth):
        psi = K.apply_1q_layer(psi, cl[rng.integers(0, 24, n)], n)
        for i in range(j % 2, n - 1, 2):
            c, t = (i, i + 1) if rng.random() < 0.5 else (i + 1, i)
            psi = K.apply_cnot(psi, c, t, n)
    psi = K.apply_1q_layer(psi, cl[rng.integers(0, 24, n)], n)
    return DenseState(n, psi[0])
