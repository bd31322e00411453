"""Batched state-vector kernels.

States are arrays of shape ``(B, 2**n)``; qubit 0 is the most significant bit.
A density matrix on n qubits is handled as a vectorised state on 2n "qubits"
(row bits first, then column bits).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def apply_1q(psi: np.ndarray, gate: np.ndarray, q: int, n: int) -> np.ndarray:
    """Apply a single-qubit gate on qubit ``q``; ``gate`` is (2,2) or (B,2,2)."""
    B = psi.shape[0]
    v = psi.reshape(B, 2**q, 2, 2 ** (n - q - 1))
    v0, v1 = v[:, :, 0, :], v[:, :, 1, :]
    if gate.ndim == 2:
        g00, g01, g10, g11 = gate[0, 0], gate[0, 1], gate[1, 0], gate[1, 1]
    else:
        g = gate[:, :, :, None, None]
        g00, g01, g10, g11 = g[:, 0, 0], g[:, 0, 1], g[:, 1, 0], g[:, 1, 1]
    out = np.empty_like(v)
    out[:, :, 0, :] = g00 * v0 + g01 * v1
    out[:, :, 1, :] = g10 * v0 + g11 * v1
    return out.reshape(B, -1)


def apply_1q_layer(psi: np.ndarray, gates: np.ndarray, n: int) -> np.ndarray:
    """Apply n single-qubit gates; ``gates`` is (n,2,2) or (B,n,2,2)."""
    for q in range(n):
        psi = apply_1q(psi, gates[q] if gates.ndim == 3 else gates[:, q], q, n)
    return psi


@lru_cache(maxsize=256)
def cnot_permutation(control: int, target: int, n: int) -> np.ndarray:
    x = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(x & cbit, x ^ tbit, x)


def apply_cnot(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    return psi[:, cnot_permutation(control, target, n)]


def apply_op(psi: np.ndarray, op: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a k-qubit operator on ``qubits`` (first listed = most significant).

    ``op`` has shape (2**k, 2**k) or (B, 2**k, 2**k).
    """
    B = psi.shape[0]
    k = len(qubits)
    t = psi.reshape((B,) + (2,) * n)
    src = [1 + q for q in qubits]
    dst = list(range(n + 1 - k, n + 1))
    t = np.moveaxis(t, src, dst)
    shape = t.shape
    t = t.reshape(B, -1, 2**k)
    if op.ndim == 2:
        t = t @ op.T
    else:
        t = np.matmul(t, np.transpose(op, (0, 2, 1)))
    t = np.moveaxis(t.reshape(shape), dst, src)
    return np.ascontiguousarray(t).reshape(B, -1)


def probabilities(psi: np.ndarray) -> np.ndarray:
    return psi.real**2 + psi.imag**2


def sample_outcomes(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one index per row given uniforms ``u``."""
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def index_to_bits(idx: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1)
    return ((np.asarray(idx)[:, None] >> shifts) & 1).astype(np.uint8)


def bits_to_index(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.shape[-1]
    return (bits << np.arange(n - 1, -1, -1)).sum(axis=-1)
