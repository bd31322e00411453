"""Noise models: incoherent GUE unitary noise, Pauli channels and readout confusion."""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import _kernels as K
from .pauli import PAULIS, DenseState

MAX_GAMMA = 8.0


def sample_gue(dim: int, rng, size: Optional[int] = None) -> np.ndarray:
    """GUE matrix: diagonal N(0,1), off-diagonal real and imaginary parts N(0,1/2)."""
    rng = np.random.default_rng(rng)
    shape = (dim, dim) if size is None else (size, dim, dim)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


def gue_unitaries(gamma: float, hamiltonians: np.ndarray) -> np.ndarray:
    """``exp(i gamma H / 8)`` for a stack of Hermitian matrices, via eigendecomposition."""
    w, v = np.linalg.eigh(hamiltonians)
    phase = np.exp(1j * gamma * w / 8)
    return (v * phase[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def incoherent_noise_unitary(gamma: float, rng) -> np.ndarray:
    """One draw of the incoherent two-qubit error ``exp(i gamma H / 8)``, H ~ GUE(4)."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return expm(1j * gamma * sample_gue(4, rng) / 8)


def infidelity_of_unitary(U: np.ndarray) -> float:
    """Average gate infidelity ``(d^2 - |Tr U|^2) / (d (d+1))`` of a unitary error."""
    U = np.asarray(U)
    d = U.shape[-1]
    if not np.allclose(np.conj(np.swapaxes(U, -1, -2)) @ U, np.eye(d), atol=1e-9):
        raise ValueError("input is not unitary")
    tr = np.trace(U, axis1=-2, axis2=-1)
    r = (d * d - np.abs(tr) ** 2) / (d * (d + 1))
    return float(r) if np.ndim(r) == 0 else r


def mean_infidelity(gamma: float, hamiltonians: np.ndarray) -> float:
    U = gue_unitaries(gamma, hamiltonians)
    tr = np.trace(U, axis1=-2, axis2=-1)
    return float(np.mean((16 - np.abs(tr) ** 2) / 20))


def calibrate_gamma(r_target: float, samples: int = 20000, rng=0, tol: float = 1e-10) -> float:
    """Strength ``gamma`` whose Monte-Carlo mean CNOT infidelity equals ``r_target``.

    Bisection on ``[0, 8]`` with one fixed set of GUE draws (common random numbers).
    """
    if not 0 <= r_target < 0.8:
        raise ValueError("r_target must lie in [0, 0.8)")
    if r_target == 0:
        return 0.0
    hs = sample_gue(4, rng, size=samples)
    lo, hi = 0.0, MAX_GAMMA
    if mean_infidelity(hi, hs) < r_target:
        raise ValueError(f"infidelity {r_target} unreachable for gamma <= {MAX_GAMMA}")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mean_infidelity(mid, hs) < r_target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# --- Pauli channels ---------------------------------------------------------

def _symplectic(label: int, arity: int) -> np.ndarray:
    """x and z bits of a Pauli label (per-qubit base-4 digits, I X Y Z)."""
    digits = [(label >> (2 * (arity - 1 - q))) & 3 for q in range(arity)]
    x = [1 if a in (1, 2) else 0 for a in digits]
    z = [1 if a in (2, 3) else 0 for a in digits]
    return np.array(x + z)


def _commutation_signs(arity: int) -> np.ndarray:
    m = 4**arity
    sym = np.array([_symplectic(a, arity) for a in range(m)])
    x, z = sym[:, :arity], sym[:, arity:]
    inner = (x @ z.T + z @ x.T) % 2
    return 1 - 2 * inner


@dataclass(frozen=True)
class PauliChannel:
    """Probabilities over Pauli errors; two-qubit labels are ``4*a + b`` (a on the first qubit)."""

    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape not in ((4,), (16,)):
            raise ValueError("Pauli channel needs 4 or 16 probabilities")
        if np.any(p < -1e-15) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("Pauli probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @property
    def arity(self) -> int:
        return 1 if len(self.probs) == 4 else 2

    def transfer_diagonal(self) -> np.ndarray:
        """Pauli-transfer eigenvalues ``lambda_Q = sum_P p_P (+-1)``."""
        return _commutation_signs(self.arity) @ np.asarray(self.probs)

    def is_identity(self) -> bool:
        return self.probs[0] == 1.0

    def operator(self, label: int) -> np.ndarray:
        if self.arity == 1:
            return PAULIS[label]
        return np.kron(PAULIS[label >> 2], PAULIS[label & 3])

    def superoperator(self) -> np.ndarray:
        """Superoperator on vec(rho) with row-major (row qubits, col qubits) ordering."""
        dim = 2**self.arity
        out = np.zeros((dim * dim, dim * dim), dtype=complex)
        for a, p in enumerate(self.probs):
            if p:
                P = self.operator(a)
                out += p * np.kron(P, P.conj())
        return out


def depolarizing(p: float, arity: int = 1) -> PauliChannel:
    m = 4**arity
    probs = np.full(m, p / (m - 1))
    probs[0] = 1 - p
    return PauliChannel(tuple(probs))


# --- noise model ------------------------------------------------------------

@dataclass(frozen=True)
class GUENoise:
    gamma: float

    def __post_init__(self):
        if not 0 <= self.gamma <= MAX_GAMMA:
            raise ValueError(f"gamma must lie in [0, {MAX_GAMMA}]")


@dataclass(frozen=True)
class NoiseModel:
    """Noise configuration.

    ``two_qubit`` acts right after every CNOT. ``single_qubit_channels`` is a
    list of one-qubit Pauli channels; gate ``g`` suffers channel
    ``crc32(key(g)) % len(channels)`` right after it, where ``key`` is the
    canonical Clifford index (or the rounded matrix for Haar gates).
    ``readout`` holds per-qubit ``(p10, p01)`` flip probabilities.
    """

    two_qubit: Optional[Union[GUENoise, PauliChannel]] = None
    single_qubit_channels: tuple[PauliChannel, ...] = ()
    readout: Optional[tuple[tuple[float, float], ...]] = None
    first_layer_ideal: bool = True

    def __post_init__(self):
        if self.readout is not None:
            ro = tuple((float(a), float(b)) for a, b in self.readout)
            for a, b in ro:
                if not (0 <= a <= 1 and 0 <= b <= 1):
                    raise ValueError("readout probabilities must lie in [0, 1]")
            object.__setattr__(self, "readout", ro)
        object.__setattr__(self, "single_qubit_channels", tuple(self.single_qubit_channels))
        if isinstance(self.two_qubit, PauliChannel) and self.two_qubit.arity != 2:
            raise ValueError("two-qubit Pauli noise needs 16 probabilities")

    @property
    def is_noiseless(self) -> bool:
        return (self.two_qubit is None or (isinstance(self.two_qubit, GUENoise) and self.two_qubit.gamma == 0)
                or (isinstance(self.two_qubit, PauliChannel) and self.two_qubit.is_identity())) \
            and all(c.is_identity() for c in self.single_qubit_channels) \
            and (self.readout is None or all(a == 0 and b == 0 for a, b in self.readout))

    @property
    def has_gue(self) -> bool:
        return isinstance(self.two_qubit, GUENoise) and self.two_qubit.gamma > 0

    @property
    def has_two_qubit_pauli(self) -> bool:
        return isinstance(self.two_qubit, PauliChannel) and not self.two_qubit.is_identity()

    @property
    def has_single_qubit(self) -> bool:
        return any(not c.is_identity() for c in self.single_qubit_channels)

    def channel_index(self, gate_key) -> int:
        return zlib.crc32(str(gate_key).encode()) % len(self.single_qubit_channels)

    def channel_for_gate(self, gate: np.ndarray, clifford_index: Optional[int] = None) -> PauliChannel:
        key = int(clifford_index) if clifford_index is not None else _haar_key(gate)
        return self.single_qubit_channels[self.channel_index(key)]

    def readout_matrix(self, q: int) -> np.ndarray:
        """Column-stochastic confusion ``M[read, true]`` for qubit ``q``."""
        if self.readout is None:
            return np.eye(2)
        p10, p01 = self.readout[q]
        return np.array([[1 - p10, p01], [p10, 1 - p01]])

    def to_dict(self) -> dict:
        d: dict = {"first_layer_ideal": self.first_layer_ideal}
        if isinstance(self.two_qubit, GUENoise):
            d["two_qubit"] = {"kind": "gue", "gamma": self.two_qubit.gamma}
        elif isinstance(self.two_qubit, PauliChannel):
            d["two_qubit"] = {"kind": "pauli", "probs": list(self.two_qubit.probs)}
        d["single_qubit_channels"] = [list(c.probs) for c in self.single_qubit_channels]
        d["readout"] = [list(r) for r in self.readout] if self.readout is not None else []
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        tq = d.get("two_qubit")
        two: Optional[Union[GUENoise, PauliChannel]] = None
        if tq:
            if tq["kind"] == "gue":
                two = GUENoise(float(tq["gamma"]))
            elif tq["kind"] == "pauli":
                two = PauliChannel(tuple(tq["probs"]))
            elif tq["kind"] == "depolarizing":
                two = depolarizing(float(tq["p"]), 2)
            else:
                raise ValueError(f"unknown two-qubit noise kind {tq['kind']!r}")
        chans = tuple(PauliChannel(tuple(p)) for p in d.get("single_qubit_channels", []))
        ro = d.get("readout") or None
        return cls(two, chans, tuple(tuple(r) for r in ro) if ro else None,
                   bool(d.get("first_layer_ideal", True)))

    @classmethod
    def load(cls, path) -> "NoiseModel":
        return cls.from_dict(load_config(path))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


NOISELESS = NoiseModel()


def load_config(path) -> dict:
    """Read a JSON or TOML file into a dict."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _haar_key(gate: np.ndarray) -> str:
    return np.round(np.asarray(gate), 12).tobytes().hex()[:32]


def sample_pauli(channel: PauliChannel, rng, size=None) -> np.ndarray:
    """Sample Pauli error labels by inverse CDF on uniforms."""
    cdf = np.cumsum(channel.probs)
    u = np.random.default_rng(rng).random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def apply_noise_event(state: DenseState, sites: Sequence[int], event, rng=None) -> DenseState:
    """Apply one noise event to a state.

    ``event`` is a unitary (2x2 or 4x4) or a :class:`PauliChannel`, realised by
    sampling one Pauli error from ``rng``.
    """
    sites = list(sites)
    if any(not 0 <= s < state.n for s in sites) or len(set(sites)) != len(sites):
        raise ValueError(f"invalid sites {sites} for n={state.n}")
    if isinstance(event, PauliChannel):
        if event.arity != len(sites):
            raise ValueError("channel arity does not match sites")
        op = event.operator(int(sample_pauli(event, rng)))
    else:
        op = np.asarray(event, dtype=complex)
        if op.shape != (2 ** len(sites),) * 2:
            raise ValueError("operator size does not match sites")
    psi = K.apply_op(state.amplitudes[None, :], op, sites, state.n)[0]
    return DenseState(state.n, psi)


def readout_flip(bits: np.ndarray, noise: NoiseModel, u: np.ndarray) -> np.ndarray:
    """Flip outcome bits independently per qubit; ``u`` are uniforms of the same shape."""
    bits = np.asarray(bits, dtype=np.uint8)
    if noise.readout is None:
        return bits.copy()
    ro = np.asarray(noise.readout)
    p_flip = np.where(bits == 0, ro[:, 0], ro[:, 1])
    return np.where(u < p_flip, 1 - bits, bits).astype(np.uint8)
