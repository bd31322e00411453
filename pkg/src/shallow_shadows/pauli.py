"""Pauli strings, irrep labels and the Walsh-Hadamard transform.

Bit convention used throughout the package: qubit 0 is the most significant
bit of a computational-basis index, i.e. ``x = sum_l x_l 2**(n-1-l)``, and the
leftmost character of a Pauli label acts on qubit 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

# label order I, X, Y, Z; index 0 is the identity
PAULIS = np.stack([I2, X, Y, Z])
PAULI_CHARS = "IXYZ"

# label (0..3) -> irrep bit, k_l = 0 iff identity
_LABEL_TO_BIT = np.array([0, 1, 1, 1])


@dataclass(frozen=True)
class PauliString:
    """A multi-qubit Pauli operator in symplectic form.

    ``xz`` holds the n x-bits followed by the n z-bits. Single-qubit labels map
    as I=(0,0), X=(1,0), Y=(1,1), Z=(0,1). With ``normalized=True`` the operator
    stands for the Frobenius-normalized ``w_a = P / sqrt(2**n)``; otherwise for
    the unit-operator-norm ``P``.
    """

    n: int
    xz: tuple[int, ...]
    normalized: bool = False

    def __post_init__(self):
        if len(self.xz) != 2 * self.n:
            raise ValueError(f"xz must have {2 * self.n} bits, got {len(self.xz)}")
        if any(b not in (0, 1) for b in self.xz):
            raise ValueError("xz entries must be bits")

    @classmethod
    def from_label(cls, label: str, normalized: bool = False) -> "PauliString":
        label = label.strip().upper()
        if not label or any(c not in PAULI_CHARS for c in label):
            raise ValueError(f"invalid Pauli label {label!r}")
        xs = [1 if c in "XY" else 0 for c in label]
        zs = [1 if c in "YZ" else 0 for c in label]
        return cls(len(label), tuple(xs + zs), normalized)

    @classmethod
    def from_indices(cls, labels: Sequence[int], normalized: bool = False) -> "PauliString":
        return cls.from_label("".join(PAULI_CHARS[int(a)] for a in labels), normalized)

    @property
    def label(self) -> str:
        return "".join(PAULI_CHARS[a] for a in self.indices)

    @property
    def indices(self) -> tuple[int, ...]:
        """Per-qubit labels in 0..3 (I, X, Y, Z)."""
        x, z = self.xz[: self.n], self.xz[self.n :]
        return tuple({(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(a, b)] for a, b in zip(x, z))

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for a in self.indices:
            out = np.kron(out, PAULIS[a])
        if self.normalized:
            out = out / np.sqrt(2**self.n)
        return out

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class IrrepLabel:
    """Support pattern ``k`` of a Pauli string; bit l is 1 iff qubit l is non-identity."""

    bits: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        """Integer index of the label with qubit 0 as most significant bit."""
        out = 0
        for b in self.bits:
            out = (out << 1) | b
        return out

    @classmethod
    def from_index(cls, k: int, n: int) -> "IrrepLabel":
        return cls(tuple((k >> (n - 1 - l)) & 1 for l in range(n)))

    @classmethod
    def from_string(cls, s: str) -> "IrrepLabel":
        return cls(tuple(int(c) for c in s))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def irrep_label(p: PauliString) -> IrrepLabel:
    return IrrepLabel(tuple(int(_LABEL_TO_BIT[a]) for a in p.indices))


def pauli_weight(k) -> int:
    """Hamming weight of an irrep label (``IrrepLabel``, bit string or bit sequence)."""
    if isinstance(k, IrrepLabel):
        return sum(k.bits)
    if isinstance(k, str):
        return k.count("1")
    if isinstance(k, (int, np.integer)):
        return int(bin(int(k)).count("1"))
    return int(sum(k))


def weights(n: int) -> np.ndarray:
    """Hamming weights of all labels ``k = 0..2**n-1``."""
    k = np.arange(2**n)
    w = np.zeros(2**n, dtype=int)
    for l in range(n):
        w += (k >> l) & 1
    return w


def bitstrings(n: int) -> list[str]:
    return [format(k, f"0{n}b") for k in range(2**n)] if n else [""]


def walsh_hadamard(p, axis: int = -1) -> np.ndarray:
    """Fast Walsh-Hadamard transform ``out_k = sum_x (-1)**(k.x) p_x``.

    Works along ``axis`` of length ``2**n``; other axes are batch axes.
    """
    v = np.moveaxis(np.array(p, dtype=float if np.isrealobj(p) else complex), axis, -1)
    size = v.shape[-1]
    n = size.bit_length() - 1
    if 2**n != size:
        raise ValueError(f"length {size} is not a power of two")
    batch = v.shape[:-1]
    v = v.reshape(-1, size)
    for l in range(n):
        v = v.reshape(v.shape[0], -1, 2, 2**l)
        a, b = v[:, :, 0, :], v[:, :, 1, :]
        v = np.stack([a + b, a - b], axis=2)
    return np.moveaxis(v.reshape(batch + (size,)), -1, axis)


@dataclass
class DenseState:
    """Pure state vector of ``n`` qubits."""

    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape[0] != 2**self.n:
            raise ValueError(f"expected {2**self.n} amplitudes, got {self.amplitudes.shape[0]}")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"state is not normalized (norm {norm})")

    @classmethod
    def zero(cls, n: int) -> "DenseState":
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1
        return cls(n, amps)

    @classmethod
    def basis(cls, bits: str) -> "DenseState":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2) if bits else 0] = 1
        return cls(len(bits), amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "DenseState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        n = amps.shape[0].bit_length() - 1
        return cls(n, amps)

    @classmethod
    def from_terms(cls, terms: dict[str, complex]) -> "DenseState":
        """Build a state from ``{bitstring: amplitude}``."""
        n = len(next(iter(terms)))
        amps = np.zeros(2**n, dtype=complex)
        for bits, a in terms.items():
            amps[int(bits, 2)] += a
        return cls(n, amps)

    @classmethod
    def haar(cls, n: int, rng) -> "DenseState":
        rng = np.random.default_rng(rng)
        v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
        return cls(n, v / np.linalg.norm(v))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def apply_pauli(psi: np.ndarray, labels: Sequence[int], n: int) -> np.ndarray:
    """Apply the unit-norm Pauli with per-qubit ``labels`` to a (batch of) state(s)."""
    psi = np.asarray(psi, dtype=complex)
    batch = psi.shape[:-1]
    out = psi.reshape(-1, 2**n)
    for q, a in enumerate(labels):
        if a == 0:
            continue
        P = PAULIS[a]
        v = out.reshape(out.shape[0], 2**q, 2, 2 ** (n - q - 1))
        v0, v1 = v[:, :, 0, :], v[:, :, 1, :]
        out = np.stack([P[0, 0] * v0 + P[0, 1] * v1, P[1, 0] * v0 + P[1, 1] * v1], axis=2)
        out = out.reshape(-1, 2**n)
    return out.reshape(batch + (2**n,))


def pauli_expectation(s: DenseState, p: PauliString) -> float:
    """``<s|P|s>`` for the unit-operator-norm Pauli ``P``."""
    if s.n != p.n:
        raise ValueError(f"state has {s.n} qubits but Pauli has {p.n}")
    val = np.vdot(s.amplitudes, apply_pauli(s.amplitudes, p.indices, s.n))
    return float(val.real)


def pauli_expectations_batch(psi: np.ndarray, p: PauliString) -> np.ndarray:
    """``<psi_b|P|psi_b>`` for every row of a batch of state vectors."""
    psi = np.atleast_2d(psi)
    return np.einsum("bi,bi->b", psi.conj(), apply_pauli(psi, p.indices, p.n)).real


def all_pauli_strings(n: int, normalized: bool = False) -> list[PauliString]:
    """All 4**n Pauli strings in label order (qubit 0 most significant)."""
    out = []
    for a in range(4**n):
        labels = [(a >> (2 * (n - 1 - l))) & 3 for l in range(n)]
        out.append(PauliString.from_indices(labels, normalized))
    return out


# --- Pauli-Liouville helpers -------------------------------------------------
# An operator A on n qubits is represented by coefficients c_a with
# A = sum_a c_a P_a (unit-norm Paulis), i.e. c_a = Tr(P_a A) / 2**n.


@lru_cache(maxsize=None)
def _to_pauli_local() -> np.ndarray:
    # B[a, i, j] = P_a[j, i] / 2 so that c_a = sum_ij B[a,i,j] A[i,j]
    return np.transpose(PAULIS, (0, 2, 1)) / 2


def pauli_coefficients(op: np.ndarray) -> np.ndarray:
    """Coefficient tensor of shape ``(4,)*n`` with ``op = sum_a c_a P_a``."""
    op = np.asarray(op, dtype=complex)
    d = op.shape[0]
    n = d.bit_length() - 1
    t = op.reshape((2,) * (2 * n))
    # interleave row/col indices per qubit: (i0, j0, i1, j1, ...)
    order = [ax for l in range(n) for ax in (l, n + l)]
    t = t.transpose(order).reshape((4,) * n) if n else t.reshape(())
    B = _to_pauli_local().reshape(4, 4)
    for l in range(n):
        t = np.moveaxis(np.tensordot(B, t, axes=([1], [l])), 0, l)
    return t


def from_pauli_coefficients(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pauli_coefficients`."""
    c = np.asarray(c, dtype=complex)
    n = c.ndim
    Binv = PAULIS.reshape(4, 4).T  # [(i,j), a]
    t = c
    for l in range(n):
        t = np.moveaxis(np.tensordot(Binv, t, axes=([1], [l])), 0, l)
    t = t.reshape((2, 2) * n)
    order = [2 * l for l in range(n)] + [2 * l + 1 for l in range(n)]
    return t.transpose(order).reshape(2**n, 2**n)


def expand_label_vector(g: np.ndarray, n: int) -> np.ndarray:
    """Broadcast a vector over irrep labels ``k`` to the ``(4,)*n`` Pauli grid."""
    g = np.asarray(g).reshape((2,) * n)
    return g[np.ix_(*([_LABEL_TO_BIT] * n))] if n else g


def apply_label_diagonal(op: np.ndarray, g) -> np.ndarray:
    """Apply ``sum_k g_k Phi_k`` to an operator, Phi_k the irrep projectors."""
    op = np.asarray(op, dtype=complex)
    n = op.shape[0].bit_length() - 1
    c = pauli_coefficients(op)
    return from_pauli_coefficients(c * expand_label_vector(g, n))


def label_weights(op: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of ``Phi_k(op)`` per label, scaled by ``2**n``."""
    op = np.asarray(op, dtype=complex)
    n = op.shape[0].bit_length() - 1
    c2 = np.abs(pauli_coefficients(op)) ** 2
    out = np.zeros(2**n)
    grid = np.indices((4,) * n).reshape(n, -1) if n else np.zeros((0, 1), dtype=int)
    k = np.zeros(grid.shape[1], dtype=int)
    for l in range(n):
        k = (k << 1) | _LABEL_TO_BIT[grid[l]]
    np.add.at(out, k, c2.reshape(-1))
    return out


def pauli_labels_grid(n: int) -> np.ndarray:
    """All n-qubit Pauli operators as a (4**n, 2**n, 2**n) stack in label order."""
    ops = np.ones((1, 1, 1), dtype=complex)
    for _ in range(n):
        ops = np.einsum("aij,bkl->abikjl", ops, PAULIS).reshape(
            ops.shape[0] * 4, ops.shape[1] * 2, ops.shape[2] * 2)
    return ops


def conjugation_action(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Signed permutation of Pauli labels induced by a Clifford ``U``.

    Returns ``(perm, signs)`` with ``U P_a U^dagger = signs[a] * P_{perm[a]}``;
    raises if ``U`` does not map Paulis to Paulis.
    """
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    n = d.bit_length() - 1
    P = pauli_labels_grid(n)
    perm = np.empty(4**n, dtype=int)
    signs = np.empty(4**n)
    for a in range(4**n):
        Q = U @ P[a] @ U.conj().T
        overlaps = np.einsum("bij,ji->b", P, Q).real / d
        b = int(np.argmax(np.abs(overlaps)))
        if abs(abs(overlaps[b]) - 1) > 1e-9:
            raise ValueError("operator is not a Clifford unitary")
        perm[a], signs[a] = b, np.sign(overlaps[b])
    return perm, signs


def sector_overlaps(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``Re Tr(Phi_k(A)^dagger B)`` for every label ``k``.

    For Hermitian ``A`` and any frame ``sum_k f_k Phi_k`` this gives
    ``Tr(A S^{-1}(B)) = sum_k m_k / f_k``.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0].bit_length() - 1
    prod = (np.conj(pauli_coefficients(A)) * pauli_coefficients(B)).real * 2**n
    out = np.zeros(2**n)
    grid = np.indices((4,) * n).reshape(n, -1) if n else np.zeros((0, 1), dtype=int)
    k = np.zeros(grid.shape[1], dtype=int)
    for l in range(n):
        k = (k << 1) | _LABEL_TO_BIT[grid[l]]
    np.add.at(out, k, prod.reshape(-1))
    return out
