"""Hardware-efficient shallow measurement circuits.

A depth-``D`` circuit is a layer of n random single-qubit gates followed by
``D`` repetitions of (entangling CNOT sub-layer, single-qubit layer). The
entangling pattern of layer ``j = 1..D`` is ``topology.sublayers[(j-1) % m]``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K

ENSEMBLES = ("haar", "clifford1q")

H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.diag([1, 1j]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


# --- Clifford groups ---------------------------------------------------------

_EXACT_PARTS = np.array([0.0, 0.5, 1 / np.sqrt(2), 1.0, 1 / (2 * np.sqrt(2))])


def _phase_fixed(U: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first non-negligible entry is real positive."""
    flat = U.reshape(-1)
    i = int(np.argmax(np.abs(flat) > 1e-6))
    return U * (abs(flat[i]) / flat[i])


def _snap(x: np.ndarray) -> np.ndarray:
    """Replace entries within 1e-9 of a known Clifford matrix element by the exact value."""
    mag = np.abs(x)
    j = np.argmin(np.abs(mag[..., None] - _EXACT_PARTS), axis=-1)
    near = np.abs(mag - _EXACT_PARTS[j]) < 1e-9
    return np.where(near, np.sign(x) * _EXACT_PARTS[j], x) + 0.0


def _canonical(U: np.ndarray, decimals: int = 9) -> np.ndarray:
    """Phase-fixed matrix rounded for use as a dictionary key."""
    return np.round(_phase_fixed(U), decimals) + 0.0  # drop negative zeros


def _exact(U: np.ndarray) -> np.ndarray:
    V = _phase_fixed(U)
    return _snap(V.real) + 1j * _snap(V.imag)


def _key(U: np.ndarray) -> tuple:
    c = _canonical(U)
    return tuple(np.concatenate([c.real.reshape(-1), c.imag.reshape(-1)]).tolist())


def _generate_group(generators: Sequence[np.ndarray]) -> np.ndarray:
    dim = generators[0].shape[0]
    identity = np.eye(dim, dtype=complex)
    seen = {_key(identity): identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for U in frontier:
            for G in generators:
                V = G @ U
                k = _key(V)
                if k not in seen:
                    seen[k] = _exact(V)
                    nxt.append(seen[k])
        frontier = nxt
    keys = sorted(seen)
    return np.stack([seen[k] for k in keys])


@lru_cache(maxsize=None)
def single_qubit_cliffords() -> np.ndarray:
    """The 24 single-qubit Cliffords (mod phase), generated by H and S, in canonical order."""
    group = _generate_group([H_GATE, S_GATE])
    assert group.shape[0] == 24
    group.setflags(write=False)
    return group


@lru_cache(maxsize=None)
def clifford_group(n: int) -> np.ndarray:
    """Full n-qubit Clifford group mod phase, n <= 2 (24 or 11520 elements)."""
    if n == 1:
        return single_qubit_cliffords()
    if n != 2:
        raise ValueError("global Clifford enumeration is limited to n <= 2")
    gens = [np.kron(H_GATE, np.eye(2)), np.kron(np.eye(2), H_GATE),
            np.kron(S_GATE, np.eye(2)), np.kron(np.eye(2), S_GATE), CNOT]
    group = _generate_group(gens)
    assert group.shape[0] == 11520
    group.setflags(write=False)
    return group


def haar_unitaries(gaussians: np.ndarray) -> np.ndarray:
    """Map complex Gaussian 2x2 matrices to Haar-random unitaries (QR with phase fix)."""
    q, r = np.linalg.qr(gaussians)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


# --- topology ---------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    """Entangling sub-layer patterns as (control, target) pairs."""

    n: int
    sublayers: tuple[tuple[tuple[int, int], ...], ...]
    boundary: str = "open"
    name: str = "custom"

    def __post_init__(self):
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        for layer in self.sublayers:
            seen = set()
            for c, t in layer:
                if not (0 <= c < self.n and 0 <= t < self.n) or c == t:
                    raise ValueError(f"invalid pair {(c, t)} for n={self.n}")
                if c in seen or t in seen:
                    raise ValueError(f"qubit used twice in sub-layer {layer}")
                seen.update((c, t))

    @property
    def topology_id(self) -> str:
        if self.name != "custom":
            return self.name
        blob = json.dumps([self.n, self.boundary, self.sublayers]).encode()
        return "custom-" + hashlib.sha256(blob).hexdigest()[:12]

    def sublayer_for(self, layer: int) -> tuple[tuple[int, int], ...]:
        """Pairs of entangling layer ``layer`` (1-based)."""
        if not self.sublayers:
            return ()
        return self.sublayers[(layer - 1) % len(self.sublayers)]

    def to_dict(self) -> dict:
        return {"n": self.n, "boundary": self.boundary, "name": self.name,
                "sublayers": [[list(p) for p in layer] for layer in self.sublayers]}

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(int(d["n"]), tuple(tuple(tuple(p) for p in layer) for layer in d["sublayers"]),
                   d.get("boundary", "open"), d.get("name", "custom"))


def brickwork(n: int, boundary: str = "open") -> Topology:
    """Linear-chain brickwork: pairs (0,1),(2,3),... then (1,2),(3,4),...

    With periodic boundary and even n >= 4 the second pattern also contains
    the wrap-around pair (n-1, 0).
    """
    even = tuple((i, i + 1) for i in range(0, n - 1, 2))
    odd = [(i, i + 1) for i in range(1, n - 1, 2)]
    if boundary == "periodic":
        if n % 2 or n < 4:
            raise ValueError("periodic brickwork needs even n >= 4")
        odd.append((n - 1, 0))
    layers = tuple(l for l in (even, tuple(odd)) if l)
    return Topology(n, layers, boundary, f"brickwork-{boundary}-{n}")


def block_brickwork(n_blocks: int, block_size: int) -> Topology:
    """Disjoint copies of an open brickwork on consecutive blocks of qubits."""
    base = brickwork(block_size)
    layers = []
    for layer in base.sublayers:
        layers.append(tuple((b * block_size + c, b * block_size + t)
                            for b in range(n_blocks) for c, t in layer))
    return Topology(n_blocks * block_size, tuple(layers), "open",
                    f"blocks-{n_blocks}x{block_size}")


# --- circuits ---------------------------------------------------------------

@dataclass(frozen=True)
class Circuit:
    """A sampled measurement circuit; ``single_qubit_layers`` has shape (D+1, n, 2, 2)."""

    n: int
    depth: int
    single_qubit_layers: np.ndarray
    topology: Topology
    ensemble: str
    seed: Optional[int] = None
    clifford_indices: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        g = np.asarray(self.single_qubit_layers, dtype=complex)
        if g.shape != (self.depth + 1, self.n, 2, 2):
            raise ValueError(f"gate array has shape {g.shape}")
        object.__setattr__(self, "single_qubit_layers", g)

    def entangling_pairs(self, layer: int):
        return self.topology.sublayer_for(layer)

    @property
    def num_cnots(self) -> int:
        return sum(len(self.entangling_pairs(j)) for j in range(1, self.depth + 1))

    def __eq__(self, other):
        return (isinstance(other, Circuit) and self.n == other.n and self.depth == other.depth
                and self.topology == other.topology and self.ensemble == other.ensemble
                and np.array_equal(self.single_qubit_layers, other.single_qubit_layers))

    def to_dict(self) -> dict:
        g = self.single_qubit_layers
        gates = [[[[float(v.real), float(v.imag)] for v in g[j, q].reshape(-1)]
                  for q in range(self.n)] for j in range(self.depth + 1)]
        return {"n": self.n, "depth": self.depth, "ensemble": self.ensemble,
                "topology_id": self.topology.topology_id, "gates": gates}

    @classmethod
    def from_dict(cls, d: dict, topology: Topology) -> "Circuit":
        arr = np.asarray(d["gates"], dtype=float)
        g = (arr[..., 0] + 1j * arr[..., 1]).reshape(d["depth"] + 1, d["n"], 2, 2)
        if d.get("topology_id") not in (None, topology.topology_id):
            raise ValueError("record topology does not match header topology")
        return cls(d["n"], d["depth"], g, topology, d["ensemble"])


def sample_layers(n: int, depth: int, ensemble: str, rng) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Draw the (D+1, n, 2, 2) gate array, plus Clifford indices for clifford1q."""
    if ensemble == "haar":
        z = rng.standard_normal((depth + 1, n, 2, 2, 2))
        return haar_unitaries(z[..., 0] + 1j * z[..., 1]), None
    if ensemble == "clifford1q":
        idx = rng.integers(0, 24, size=(depth + 1, n))
        return single_qubit_cliffords()[idx], idx
    raise ValueError(f"unknown ensemble {ensemble!r}; expected one of {ENSEMBLES}")


def sample_circuit(n: int, depth: int, ensemble: str, topology: Optional[Topology] = None,
                   rng=None) -> Circuit:
    if depth < 0:
        raise ValueError("depth must be >= 0")
    topology = topology if topology is not None else brickwork(n)
    if topology.n != n:
        raise ValueError("topology size does not match n")
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    gates, idx = sample_layers(n, depth, ensemble, rng)
    return Circuit(n, depth, gates, topology, ensemble, seed, idx)


def apply_circuit(psi: np.ndarray, gates: np.ndarray, topology: Topology, depth: int,
                  n: int) -> np.ndarray:
    """Noiseless action of a batch of circuits (gates (B, D+1, n, 2, 2) or (D+1, n, 2, 2))."""
    batched = gates.ndim == 5
    for j in range(depth + 1):
        if j > 0:
            for c, t in topology.sublayer_for(j):
                psi = K.apply_cnot(psi, c, t, n)
        psi = K.apply_1q_layer(psi, gates[:, j] if batched else gates[j], n)
    return psi


def apply_adjoint_circuit(psi: np.ndarray, gates: np.ndarray, topology: Topology, depth: int,
                          n: int) -> np.ndarray:
    """Action of ``g^dagger`` for a batch of circuits."""
    batched = gates.ndim == 5
    adj = np.conj(np.swapaxes(gates, -1, -2))
    for j in range(depth, -1, -1):
        psi = K.apply_1q_layer(psi, adj[:, j] if batched else adj[j], n)
        if j > 0:
            for c, t in reversed(topology.sublayer_for(j)):
                psi = K.apply_cnot(psi, c, t, n)
    return psi


MAX_DENSE_QUBITS = 12


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense ``2**n x 2**n`` unitary of the circuit (n <= 12)."""
    if c.n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense unitary limited to n <= {MAX_DENSE_QUBITS}")
    d = 2**c.n
    cols = apply_circuit(np.eye(d, dtype=complex), c.single_qubit_layers, c.topology,
                         c.depth, c.n)
    return cols.T


def sublayer_unitary(topology: Topology, sublayer_index: int) -> np.ndarray:
    d = 2**topology.n
    psi = np.eye(d, dtype=complex)
    for c, t in topology.sublayers[sublayer_index]:
        psi = K.apply_cnot(psi, c, t, topology.n)
    return psi.T


# --- MPO of a CNOT sub-layer ------------------------------------------------

@dataclass
class MPO:
    """Cores of shape (bond_in, out, in, bond_out); ``periodic`` closes the chain by a trace."""

    cores: list
    periodic: bool = False

    @property
    def n(self) -> int:
        return len(self.cores)

    @property
    def bonds(self) -> list[int]:
        return [c.shape[3] for c in self.cores]

    @property
    def max_bond(self) -> int:
        return max([c.shape[0] for c in self.cores] + self.bonds)

    def to_dense(self) -> np.ndarray:
        t = self.cores[0]  # (a, o, i, b)
        a0 = t.shape[0]
        t = t.reshape(a0, 2, 2, -1)
        for core in self.cores[1:]:
            t = np.einsum("aOIb,boic->aOoIic", t, core)
            s = t.shape
            t = t.reshape(s[0], s[1] * s[2], s[3] * s[4], s[5])
        if self.periodic:
            return np.einsum("aOIa->OI", t)
        return t[0, :, :, 0]


def cnot_layer_mpo(topology: Topology, sublayer_index: int) -> MPO:
    """MPO of bond dimension <= 2 for one CNOT sub-layer.

    Each gate ``sum_i |i><i| (x) X^i`` shares its index ``i`` over the bond
    between its two (ring-adjacent) qubits; the wrap-around pair of a periodic
    topology uses the traced boundary bond.
    """
    n = topology.n
    pairs = topology.sublayers[sublayer_index] if topology.sublayers else ()
    proj = np.stack([np.diag([1, 0]), np.diag([0, 1])]).astype(complex)
    xpow = np.stack([np.eye(2), np.array([[0, 1], [1, 0]])]).astype(complex)
    # role[l] = (operator stack, side of the shared bond: "in" or "out")
    roles: dict[int, tuple[np.ndarray, str]] = {}
    wrap = False
    for c, t in pairs:
        lo, hi = min(c, t), max(c, t)
        if hi - lo == 1:
            roles[lo] = (proj if lo == c else xpow, "out")
            roles[hi] = (proj if hi == c else xpow, "in")
        elif topology.boundary == "periodic" and (lo, hi) == (0, n - 1):
            wrap = True
            roles[hi] = (proj if hi == c else xpow, "out")
            roles[lo] = (proj if lo == c else xpow, "in")
        else:
            raise ValueError(f"pair {(c, t)} is not nearest-neighbour")
    cores = []
    for l in range(n):
        if l not in roles:
            cores.append(np.eye(2, dtype=complex).reshape(1, 2, 2, 1))
            continue
        ops, side = roles[l]
        if side == "out":
            cores.append(np.transpose(ops, (1, 2, 0))[None, :, :, :])
        else:
            cores.append(ops[:, :, :, None])
    return MPO(cores, periodic=wrap)
