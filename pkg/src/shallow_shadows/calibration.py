"""Frame spectra: calibration estimator, TT forms of phi, and exact oracles.

The locally invariant noisy frame is ``sum_k f_k Phi_k`` with ``k`` the
support pattern of a Pauli string. Calibration measures ``|0^n>`` with random
circuits and averages ``phi_k(z, g) = <chi|Z_k|chi>``, ``|chi> = g^dagger|z>``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels as K
from .circuits import (CNOT, Topology, apply_adjoint_circuit, brickwork, clifford_group,
                       cnot_layer_mpo, sample_layers, single_qubit_cliffords)
from .noise import NOISELESS, NoiseModel, PauliChannel, sample_gue, gue_unitaries
from .pauli import (DenseState, bitstrings, conjugation_action, pauli_labels_grid,
                    walsh_hadamard, weights)
from .simulator import RecordSet, ShadowRecord, exact_distributions, snapshot_states
from .tt import TensorTrain, mals_fit, product_tt, tt_mean, tt_svd

PROVENANCE = ("empirical", "exact_oracle", "analytic", "tt_fit")
MAX_EXACT_FRAME_QUBITS = 8
GUARD_FACTOR = 10.0


# --- spectrum container ------------------------------------------------------

@dataclass
class FrameSpectrum:
    """Coefficients ``f_k`` of a Pauli-diagonal frame, dense or as a tensor train.

    ``stderr`` holds per-entry standard errors (dense mode; zeros for exact
    oracles). ``bootstrap`` optionally holds resampled spectra, shape (R, 2**n).
    """

    n: int
    values: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    tt: Optional[TensorTrain] = None
    provenance: str = "empirical"
    shots: int = 0
    meta: dict = field(default_factory=dict)
    bootstrap: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.values is None and self.tt is None:
            raise ValueError("need dense values or a tensor train")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != (2**self.n,):
                raise ValueError("dense spectrum must have length 2**n")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def dense(self) -> np.ndarray:
        """Dense vector; the tensor train takes precedence when both are present."""
        if self.tt is not None:
            return self.tt.to_dense()
        return self.values

    def entry(self, k) -> float:
        if isinstance(k, str):
            k = int(k, 2)
        if self.tt is not None:
            return self.tt.entry(int(k))
        return float(self.values[int(k)])

    def errors(self) -> np.ndarray:
        return self.stderr if self.stderr is not None else np.zeros(2**self.n)

    def invertible_mask(self, factor: float = GUARD_FACTOR, guard: float = 1e-12) -> np.ndarray:
        """True where ``|f_k| >= factor * stderr_k`` (and above ``guard``)."""
        f = np.abs(self.dense())
        return (f >= factor * self.errors()) & (f > guard)

    @property
    def invertible(self) -> bool:
        return bool(self.invertible_mask().all())

    def by_support(self) -> dict[int, np.ndarray]:
        """Values grouped by Pauli weight of ``k``."""
        w = weights(self.n)
        f = self.dense()
        return {int(s): f[w == s] for s in range(self.n + 1)}

    def with_tt(self, tt: TensorTrain, **meta) -> "FrameSpectrum":
        m = dict(self.meta, **meta)
        return FrameSpectrum(self.n, self.values, self.stderr, tt, "tt_fit", self.shots, m,
                             self.bootstrap)

    def marginal(self, qubits: Sequence[int]) -> "FrameSpectrum":
        """Restriction to labels supported on ``qubits``: ``f_A(k_A) = f(k_A, 0)``."""
        qubits = list(qubits)
        m = len(qubits)
        idx = np.zeros(2**m, dtype=np.int64)
        for j, q in enumerate(qubits):
            bit = (np.arange(2**m) >> (m - 1 - j)) & 1
            idx |= bit << (self.n - 1 - q)
        f = self.dense()[idx]
        se = self.errors()[idx]
        boot = None if self.bootstrap is None else self.bootstrap[:, idx]
        return FrameSpectrum(m, f, se, None, self.provenance, self.shots, dict(self.meta), boot)

    def kron(self, other: "FrameSpectrum") -> "FrameSpectrum":
        """Spectrum of the tensor-product frame (self on the leading qubits)."""
        fa, fb = self.dense(), other.dense()
        sa, sb = self.errors(), other.errors()
        f = np.kron(fa, fb)
        se = np.sqrt(np.kron(sa**2, fb**2) + np.kron(fa**2, sb**2))
        prov = self.provenance if self.provenance == other.provenance else "empirical"
        boot = None
        if self.bootstrap is not None and other.bootstrap is not None:
            a, b = self.bootstrap, other.bootstrap
            R = min(len(a), len(b))
            boot = (a[:R, :, None] * b[:R, None, :]).reshape(R, -1)
        return FrameSpectrum(self.n + other.n, f, se, None, prov, min(self.shots, other.shots),
                             {}, boot)

    # -- persistence --

    def to_csv(self, path) -> None:
        f, se = self.dense(), self.errors()
        w = weights(self.n)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "f_hat", "stderr", "support"])
            for k, bits in enumerate(bitstrings(self.n)):
                wr.writerow([bits, repr(float(f[k])), repr(float(se[k])), int(w[k])])

    @classmethod
    def from_csv(cls, path, provenance: str = "empirical") -> "FrameSpectrum":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        n = len(rows[0]["k"])
        f = np.zeros(2**n)
        se = np.zeros(2**n)
        for r in rows:
            k = int(r["k"], 2)
            f[k], se[k] = float(r["f_hat"]), float(r["stderr"])
        return cls(n, f, se, None, provenance)

    def to_tt_json(self, path) -> None:
        """TT JSON plus a metadata header (provenance, shots, fit info)."""
        tt = self.tt if self.tt is not None else tt_svd(self.values)
        body = json.loads(tt.to_json())
        body["metadata"] = {"n": self.n, "provenance": self.provenance, "shots": self.shots,
                            **{k: v for k, v in self.meta.items() if _jsonable(v)}}
        Path(path).write_text(json.dumps(body), encoding="utf-8")

    @classmethod
    def from_tt_json(cls, path) -> "FrameSpectrum":
        text = Path(path).read_text(encoding="utf-8")
        meta = json.loads(text).get("metadata", {})
        tt = TensorTrain.from_json(text)
        return cls(tt.n, None, None, tt, meta.get("provenance", "tt_fit"), meta.get("shots", 0))

    @classmethod
    def load(cls, path) -> "FrameSpectrum":
        return cls.from_tt_json(path) if str(path).endswith(".json") else cls.from_csv(path)


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


# --- analytic spectra --------------------------------------------------------

def ideal_f(n: int, ensemble: str = "local_clifford_d0") -> FrameSpectrum:
    """Noiseless spectra: ``3**-|k|`` for local D=0, ``1/(2**n+1)`` off k=0 for global Cliffords."""
    if ensemble == "local_clifford_d0":
        f = 3.0 ** -weights(n).astype(float)
    elif ensemble == "global_clifford":
        f = np.full(2**n, 1.0 / (2**n + 1))
        f[0] = 1.0
    else:
        raise ValueError(f"unsupported ensemble {ensemble!r}")
    return FrameSpectrum(n, f, np.zeros(2**n), None, "analytic")


def ideal_local_tt(n: int) -> TensorTrain:
    """Rank-1 TT ``(1, 1/3)^{(x) n}``, the noiseless D=0 local-Clifford spectrum."""
    return product_tt([[1.0, 1.0 / 3.0]] * n)


# --- phi ---------------------------------------------------------------------

def phi_from_states(chi: np.ndarray) -> np.ndarray:
    """``phi_k = <chi|Z_k|chi>`` for a batch of states, by Walsh-Hadamard of ``|chi_x|^2``."""
    return walsh_hadamard(K.probabilities(chi))


def phi_batch(gates: np.ndarray, outcomes: np.ndarray, topology: Topology, depth: int,
              n: int) -> np.ndarray:
    return phi_from_states(snapshot_states(gates, outcomes, topology, depth, n))


def phi_dense(record: ShadowRecord) -> np.ndarray:
    """Dense vector ``(phi_k(z, g))_k`` of one record."""
    c = record.circuit
    bits = np.array([[int(b) for b in record.z]], dtype=np.uint8)
    return phi_batch(c.single_qubit_layers[None], bits, c.topology, c.depth, c.n)[0]


def _hermitian_basis(r: int) -> np.ndarray:
    """Orthonormal basis (trace inner product) of r x r Hermitian matrices."""
    basis = []
    for i in range(r):
        e = np.zeros((r, r), dtype=complex)
        e[i, i] = 1
        basis.append(e)
    s = 1 / np.sqrt(2)
    for i in range(r):
        for j in range(i + 1, r):
            e = np.zeros((r, r), dtype=complex)
            e[i, j] = e[j, i] = s
            basis.append(e)
            e = np.zeros((r, r), dtype=complex)
            e[i, j], e[j, i] = 1j * s, -1j * s
            basis.append(e)
    return np.stack(basis)


def snapshot_mps(record: ShadowRecord) -> list:
    """MPS cores (l, 2, r) of ``|chi> = g^dagger|z>`` built with the CNOT-layer MPOs."""
    c = record.circuit
    if c.topology.boundary != "open":
        raise ValueError("unsupported layer type: periodic entangling layers")
    adj = np.conj(np.swapaxes(c.single_qubit_layers, -1, -2))
    mps = []
    for q, b in enumerate(record.z):
        v = np.zeros(2, dtype=complex)
        v[int(b)] = 1
        mps.append(v.reshape(1, 2, 1))
    for j in range(c.depth, -1, -1):
        mps = [np.einsum("st,ltr->lsr", adj[j, q], a) for q, a in enumerate(mps)]
        if j > 0:
            sub = (j - 1) % len(c.topology.sublayers)
            mpo = cnot_layer_mpo(c.topology, sub)
            if mpo.periodic:
                raise ValueError("unsupported layer type: periodic entangling layers")
            new = []
            for a, w in zip(mps, mpo.cores):
                t = np.einsum("lsr,bost->lbotr", a, w)
                # indices: l, b (mpo in-bond), o (out), t (mpo out-bond), r
                l, bl, o, br, r = t.shape
                new.append(t.transpose(0, 1, 2, 4, 3).reshape(l * bl, o, r * br))
            mps = new
    return mps


def phi_tt(record: ShadowRecord) -> TensorTrain:
    """Real TT of ``phi(z, g)`` with ranks at most ``4**D``.

    ``|chi_x|^2`` is obtained from the MPS of ``chi`` by expressing the
    doubled bond space in an orthonormal basis of Hermitian matrices, which
    makes every core real; a per-site Walsh-Hadamard step then maps ``x`` to ``k``.
    """
    mps = snapshot_mps(record)
    cores = []
    for a in mps:
        rl, _, rr = a.shape
        El, Er = _hermitian_basis(rl), _hermitian_basis(rr)
        # T[alpha, x, beta] = tr(E_beta B^T E_alpha conj(B)) with B = a[:, x, :]
        T = np.einsum("bij,kxj,akl,lxi->axb", Er, a, El, a.conj()).real
        cores.append(np.stack([T[:, 0] + T[:, 1], T[:, 0] - T[:, 1]], axis=1))
    return TensorTrain(cores)


def _check_calibration_set(records: RecordSet) -> None:
    if records.header.get("input_state") != "zero":
        raise ValueError("calibration requires records taken on the |0^n> input state")
    if len(records) == 0:
        raise ValueError("empty record set")


def iter_phi(records: RecordSet, chunk: int = 4096) -> Iterator[np.ndarray]:
    """Per-record phi vectors in shot order, in chunks of shape (B, 2**n)."""
    for gates, bits in records.chunks(chunk):
        yield phi_batch(gates, bits, records.topology, records.depth, records.n)


def estimate_f(records: RecordSet, mode: str = "dense", chi: int = 8, streamed: bool = False,
               chunk: int = 4096, bootstrap: int = 0, rng=0, sweeps: int = 30,
               tol: float = 1e-10, noise_floor: bool = False) -> FrameSpectrum:
    """Empirical frame spectrum from calibration records.

    ``dense`` returns the mean and standard error of phi per ``k``. ``tt`` fits
    a TT of rank at most ``chi`` by MALS to the empirical mean (or, with
    ``streamed``, to the average of the per-record phi TTs), initialised with
    the ideal local spectrum. ``noise_floor`` lets MALS discard singular values
    whose tail is below the statistical error norm. ``bootstrap`` > 0 stores
    that many multinomial resamples of the mean.
    """
    _check_calibration_set(records)
    if mode not in ("dense", "tt"):
        raise ValueError(f"unknown mode {mode!r}")
    S, d = len(records), 2**records.n
    total = np.zeros(d)
    total_sq = np.zeros(d)
    boot = None
    if bootstrap:
        g = np.random.default_rng(rng)
        counts = np.stack([np.bincount(g.integers(0, S, S), minlength=S) for _ in range(bootstrap)])
        boot = np.zeros((bootstrap, d))
    start = 0
    for phi in iter_phi(records, chunk):
        total += phi.sum(axis=0)
        total_sq += (phi**2).sum(axis=0)
        if boot is not None:
            boot += counts[:, start:start + phi.shape[0]] @ phi
        start += phi.shape[0]
    mean = total / S
    var = np.maximum(total_sq / S - mean**2, 0.0)
    stderr = np.sqrt(var / max(S - 1, 1))
    mean[0], stderr[0] = 1.0, 0.0
    spec = FrameSpectrum(records.n, mean, stderr, None, "empirical", S,
                         {"depth": records.depth, "ensemble": records.header.get("ensemble")},
                         None if boot is None else boot / S)
    if mode == "dense":
        return spec
    sv_abs = float(np.linalg.norm(stderr)) if noise_floor else 0.0
    init = ideal_local_tt(records.n)
    if streamed:
        target = tt_mean([phi_tt(r) for r in records])
    else:
        target = mean
    fit = mals_fit(target, chi, init=init, sweeps=sweeps, tol=tol, sv_abs=sv_abs)
    return spec.with_tt(fit.tt, residual=fit.residual, sweeps=fit.sweeps,
                        converged=fit.converged, chi=chi)


def bootstrap_floor(spec: FrameSpectrum, quantile: float = 0.95,
                    mask: Optional[np.ndarray] = None) -> float:
    """Quantile over bootstrap replicates of ``max_k |f*_k - f_k| / |f_k|`` (k != 0)."""
    if spec.bootstrap is None:
        raise ValueError("spectrum carries no bootstrap replicates")
    f = spec.values
    sel = np.ones(f.size, dtype=bool) if mask is None else mask.copy()
    sel[0] = False
    dev = np.abs(spec.bootstrap[:, sel] - f[sel]) / np.abs(f[sel])
    return float(np.quantile(dev.max(axis=1), quantile))


def phi_histograms(records: RecordSet, ks: Sequence[int], bins: int = 41,
                   chunk: int = 4096) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw phi samples for labels ``ks`` (one row per record) and their histograms.

    Returns ``(samples (S, len(ks)), edges (bins+1,), counts (len(ks), bins))``.
    """
    ks = list(ks)
    samples = np.concatenate([phi[:, ks] for phi in iter_phi(records, chunk)])
    edges = np.linspace(-1, 1, bins + 1)
    counts = np.stack([np.histogram(np.clip(samples[:, j], -1, 1), edges)[0]
                       for j in range(len(ks))])
    return samples, edges, counts


# --- exact oracles -----------------------------------------------------------

def frames_of_unitaries(U: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-circuit spectra ``f_g = sum_z p(z|g) phi(z, g)`` from unitaries (B, d, d)."""
    chi = np.conj(U)  # chi_z = U^dagger |z>, i.e. column z of U^dagger = conj(row z of U)
    phi = walsh_hadamard(K.probabilities(chi))  # (B, z, k)
    return np.einsum("bz,bzk->bk", probs, phi)


def circuit_frames(gates: np.ndarray, cliff_idx: Optional[np.ndarray], topology: Topology,
                   depth: int, n: int, noise: NoiseModel = NOISELESS,
                   gue: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact per-circuit spectra, shape (B, 2**n), with shot-free noisy distributions."""
    B, d = gates.shape[0], 2**n
    zero = DenseState.zero(n).amplitudes
    p = exact_distributions(zero, gates, cliff_idx, topology, depth, n, noise, gue)
    basis = np.tile(np.eye(d, dtype=complex), (B, 1))
    chi = apply_adjoint_circuit(basis, np.repeat(gates, d, axis=0), topology, depth, n)
    phi = phi_from_states(chi).reshape(B, d, d)
    return np.einsum("bz,bzk->bk", p, phi)


def _enumerate_layers(n: int, depth: int) -> np.ndarray:
    total = 24 ** (n * (depth + 1))
    idx = np.indices((24,) * (n * (depth + 1))).reshape(n * (depth + 1), total).T
    return idx.reshape(total, depth + 1, n)


ENUMERATION_LIMIT = 20_000


def exact_f(n: int, depth: int = 0, ensemble: str = "clifford1q", noise: NoiseModel = NOISELESS,
            topology: Optional[Topology] = None, circuit_samples: Optional[int] = 10_000,
            rng=0, enumerate_all: Optional[bool] = None, chunk: Optional[int] = None) -> FrameSpectrum:
    """Shot-free frame spectrum ``E_g sum_z p~(z|g) phi(z, g)``.

    Averages over the full gate product when ``enumerate_all`` (default: when
    the clifford1q product has at most 20000 elements and the noise is not
    random), otherwise over ``circuit_samples`` sampled circuits, reporting
    the circuit-sampling standard error. ``ensemble="global_clifford"``
    (n <= 2) averages over the n-qubit Clifford group instead.
    """
    if n > MAX_EXACT_FRAME_QUBITS:
        raise ValueError(f"exact frame limited to n <= {MAX_EXACT_FRAME_QUBITS}")
    d = 2**n
    rng = np.random.default_rng(rng)
    if ensemble == "global_clifford":
        return _exact_f_global(n, noise, circuit_samples, rng, enumerate_all)
    topology = topology if topology is not None else brickwork(n)
    n_elems = 24 ** (n * (depth + 1))
    if enumerate_all is None:
        enumerate_all = (ensemble == "clifford1q" and n_elems <= ENUMERATION_LIMIT
                         and not noise.has_gue)
    if enumerate_all and (ensemble != "clifford1q" or noise.has_gue):
        raise ValueError("full enumeration needs the clifford1q ensemble and non-random noise")
    chunk = chunk or max(1, 2**15 // (d * max(depth, 1)))
    num_cnots = sum(len(topology.sublayer_for(j)) for j in range(1, depth + 1))
    total = np.zeros(d)
    total_sq = np.zeros(d)
    count = n_elems if enumerate_all else int(circuit_samples)
    cl = single_qubit_cliffords()
    all_idx = _enumerate_layers(n, depth) if enumerate_all else None
    for s in range(0, count, chunk):
        B = min(chunk, count - s)
        if enumerate_all:
            idx = all_idx[s:s + B]
            gates = cl[idx]
        else:
            gates, idx = sample_layers(n, depth, ensemble, _BatchRng(rng, B))
        gue = None
        if noise.has_gue and num_cnots:
            H = sample_gue(4, rng, size=B * num_cnots)
            gue = gue_unitaries(noise.two_qubit.gamma, H).reshape(B, num_cnots, 4, 4)
        fg = circuit_frames(gates, idx, topology, depth, n, noise, gue)
        total += fg.sum(axis=0)
        total_sq += (fg**2).sum(axis=0)
    mean = total / count
    se = np.zeros(d) if enumerate_all else np.sqrt(
        np.maximum(total_sq / count - mean**2, 0) / max(count - 1, 1))
    return FrameSpectrum(n, mean, se, None, "exact_oracle", 0,
                         {"depth": depth, "ensemble": ensemble, "circuits": count,
                          "enumerated": bool(enumerate_all)})


class _BatchRng:
    """Adapter drawing a batch of gate layers in one call through ``sample_layers``."""

    def __init__(self, rng, batch: int):
        self.rng, self.batch = rng, batch

    def standard_normal(self, shape):
        return self.rng.standard_normal((self.batch,) + tuple(shape))

    def integers(self, low, high, size):
        return self.rng.integers(low, high, size=(self.batch,) + tuple(size))


def _exact_f_global(n, noise, circuit_samples, rng, enumerate_all) -> FrameSpectrum:
    if n > 2:
        raise ValueError("global Clifford ensemble available for n <= 2")
    if noise.two_qubit is not None or noise.has_single_qubit:
        raise ValueError("global Clifford ensemble supports readout noise only")
    group = clifford_group(n)
    d = 2**n
    if enumerate_all is None:
        enumerate_all = circuit_samples is None
    count = len(group) if enumerate_all else int(circuit_samples)
    total, total_sq = np.zeros(d), np.zeros(d)
    for s in range(0, count, 8192):
        B = min(8192, count - s)
        U = group[s:s + B] if enumerate_all else group[rng.integers(0, len(group), B)]
        p = K.probabilities(U[:, :, 0])  # U|0> is column 0
        for q in range(n):
            p = K.apply_1q(p, noise.readout_matrix(q), q, n) if noise.readout else p
        fg = frames_of_unitaries(U, p)
        total += fg.sum(axis=0)
        total_sq += (fg**2).sum(axis=0)
    mean = total / count
    se = np.zeros(d) if enumerate_all else np.sqrt(
        np.maximum(total_sq / count - mean**2, 0) / max(count - 1, 1))
    return FrameSpectrum(n, mean, se, None, "exact_oracle", 0,
                         {"ensemble": "global_clifford", "circuits": count,
                          "enumerated": bool(enumerate_all)})


# --- channel-level TT for local Pauli noise -----------------------------------

@lru_cache(maxsize=None)
def _clifford_perms() -> np.ndarray:
    return np.stack([conjugation_action(V)[0] for V in single_qubit_cliffords()])


@lru_cache(maxsize=None)
def _cnot_perm() -> np.ndarray:
    return conjugation_action(CNOT)[0]


def _twirl_matrix(channel_diags: np.ndarray) -> np.ndarray:
    """``T[P, Q] = (1/24) sum_V [V P V^dag ~ Q] n_V[Q]`` for per-gate diagonals (24, 4)."""
    perms = _clifford_perms()
    T = np.zeros((4, 4))
    for v in range(24):
        for P in range(4):
            Q = perms[v, P]
            T[P, Q] += channel_diags[v, Q] / 24
    return T


def _apply_site(cores: list, l: int, M: np.ndarray) -> None:
    cores[l] = np.einsum("pq,aqb->apb", M, cores[l])


def _apply_pair(cores: list, l: int, G: np.ndarray, tol: float = 1e-13) -> None:
    """Apply a two-site map ``G[(p1,p2), (q1,q2)]`` to adjacent sites ``l, l+1``."""
    a, b = cores[l], cores[l + 1]
    p = a.shape[1]
    W = np.einsum("aqb,brc->aqrc", a, b)
    W = np.einsum("xy,ayc->axc", G, W.reshape(a.shape[0], p * p, -1))
    W = W.reshape(a.shape[0] * p, p * b.shape[2])
    u, s, vt = np.linalg.svd(W, full_matrices=False)
    r = max(1, int(np.sum(s > tol * max(s[0], 1e-300))))
    cores[l] = u[:, :r].reshape(a.shape[0], p, r)
    cores[l + 1] = (s[:r, None] * vt[:r]).reshape(r, p, b.shape[2])


def exact_f_tt_pauli_noise(n: int, depth: int, noise: NoiseModel = NOISELESS,
                           topology: Optional[Topology] = None,
                           ensemble: str = "clifford1q") -> TensorTrain:
    """Exact spectrum as a TT from the channel-level network, for local Pauli noise.

    The state of the backward contraction is the diagonal of a Pauli-diagonal
    superoperator, stored as a TT with one 4-dimensional index (I, X, Y, Z)
    per qubit. It starts at the readout-dephasing diagonal, is twirled by each
    single-qubit layer (with its gate-dependent Pauli channels), and is
    permuted and damped by each CNOT with its two-qubit Pauli channel. The
    ``k`` index finally reads the I or Z entry per qubit.
    """
    topology = topology if topology is not None else brickwork(n)
    if topology.n != n:
        raise ValueError("topology size does not match n")
    if noise.two_qubit is not None and not isinstance(noise.two_qubit, PauliChannel):
        raise ValueError("channel-level TT needs Pauli noise; incoherent unitary noise is not supported")
    if ensemble not in ("clifford1q", "haar"):
        raise ValueError(f"unknown ensemble {ensemble!r}")
    gate_dependent = len(noise.single_qubit_channels) > 1
    if ensemble == "haar" and gate_dependent:
        raise ValueError("gate-dependent channels with Haar gates are not supported")
    if not noise.first_layer_ideal and gate_dependent:
        raise ValueError("first-layer noise must be gate independent")
    for j in range(1, depth + 1):
        for c, t in topology.sublayer_for(j):
            if abs(c - t) != 1:
                raise ValueError("channel-level TT needs nearest-neighbour entangling gates")

    ones = np.ones((24, 4))
    if noise.single_qubit_channels:
        diags = np.stack([ch.transfer_diagonal() for ch in noise.single_qubit_channels])
        table = np.array([noise.channel_index(i) for i in range(24)])
        noisy = diags[table]
    else:
        noisy = ones
    T_noisy = _twirl_matrix(noisy)
    T_ideal = _twirl_matrix(ones)

    cores = []
    for q in range(n):
        lam = 1.0
        if noise.readout is not None:
            p10, p01 = noise.readout[q]
            lam = 1 - p10 - p01
        cores.append(np.array([1.0, 0.0, 0.0, lam]).reshape(1, 4, 1))

    perm = _cnot_perm()
    n_c = (noise.two_qubit.transfer_diagonal() if isinstance(noise.two_qubit, PauliChannel)
           else np.ones(16))
    for j in range(depth, -1, -1):
        T = T_ideal if (j == 0 and noise.first_layer_ideal) else T_noisy
        for q in range(n):
            _apply_site(cores, q, T)
        if j == 0:
            break
        for c, t in topology.sublayer_for(j):
            # y'[P] = (y * n_C)[pi_C(P)] on labels 4*P_c + P_t
            G = np.zeros((16, 16))
            G[np.arange(16), perm] = n_c[perm]
            if c > t:
                swap = np.arange(16).reshape(4, 4).T.reshape(-1)
                G = G[np.ix_(swap, swap)]
            _apply_pair(cores, min(c, t), G)
    out = [np.stack([core[:, 0, :], core[:, 3, :]], axis=1) for core in cores]
    return TensorTrain(out)


def noiseless_f(n: int, depth: int, topology: Optional[Topology] = None) -> FrameSpectrum:
    """Exact noiseless spectrum of the depth-D local-Clifford (or Haar) circuit ensemble."""
    tt = exact_f_tt_pauli_noise(n, depth, NOISELESS, topology)
    return FrameSpectrum(n, tt.to_dense(), np.zeros(2**n), None, "exact_oracle",
                         meta={"depth": depth})


# --- dense noisy frame superoperator (small n) ----------------------------------

@lru_cache(maxsize=None)
def _single_ptms() -> np.ndarray:
    """Pauli-transfer matrices ``R[b, a] = (w_b|V w_a V^dag)`` of the 24 Cliffords."""
    perms, signs = zip(*(conjugation_action(V) for V in single_qubit_cliffords()))
    R = np.zeros((24, 4, 4))
    for v in range(24):
        R[v, perms[v], np.arange(4)] = signs[v]
    return R


def _twirl_superop(A: np.ndarray, n: int, first_diags: Optional[np.ndarray]) -> np.ndarray:
    """``E_V R_V^T A N_V R_V`` over independent per-qubit Cliffords V (exact)."""
    R = _single_ptms()
    t = A.reshape((4,) * (2 * n))
    for q in range(n):
        acc = np.zeros_like(t)
        for v in range(24):
            right = R[v] if first_diags is None else first_diags[v][:, None] * R[v]
            x = np.moveaxis(np.tensordot(R[v].T, t, axes=([1], [q])), 0, q)
            x = np.moveaxis(np.tensordot(x, right, axes=([n + q], [0])), -1, n + q)
            acc += x
        t = acc / 24
    return t.reshape(4**n, 4**n)


def noisy_frame_superoperator(n: int, depth: int, noise: NoiseModel,
                              topology: Optional[Topology] = None, ensemble: str = "clifford1q",
                              samples: int = 50, rng=0) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``E_g sum_z |Pi_{z,g})(Pi~_{z,g}|`` in the normalized Pauli basis (n <= 3).

    Layers 1..D and the noise realizations are sampled ``samples`` times; the
    first single-qubit layer is averaged exactly over all local Cliffords,
    including its gate-dependent noise when ``first_layer_ideal`` is false.
    Returns the mean and its per-entry standard error over the samples.
    """
    if n > 3:
        raise ValueError("dense frame superoperator limited to n <= 3")
    topology = topology if topology is not None else brickwork(n)
    rng = np.random.default_rng(rng)
    d = 2**n
    P = pauli_labels_grid(n) / np.sqrt(d)  # Frobenius-normalized w_a
    rest_noise = NoiseModel(noise.two_qubit, noise.single_qubit_channels, noise.readout, True)
    first = None
    if not noise.first_layer_ideal and noise.single_qubit_channels:
        diags = np.stack([c.transfer_diagonal() for c in noise.single_qubit_channels])
        first = diags[np.array([noise.channel_index(i) for i in range(24)])]
    num_cnots = sum(len(topology.sublayer_for(j)) for j in range(1, depth + 1))
    draws = []
    for _ in range(samples if depth > 0 or noise.has_gue else 1):
        gates, idx = sample_layers(n, depth, ensemble, rng)
        gates = gates.copy()
        gates[0] = np.eye(2)
        if idx is not None:
            idx = idx.copy()
            idx[0] = 0
        gue = None
        if noise.has_gue and num_cnots:
            gue = gue_unitaries(noise.two_qubit.gamma, sample_gue(4, rng, size=num_cnots))[None]
        # right factor: (Pi~_z | w_b) = linear outcome distribution for input w_b
        G = np.repeat(gates[None], 4**n, axis=0)
        I = None if idx is None else np.repeat(idx[None], 4**n, axis=0)
        g = None if gue is None else np.repeat(gue, 4**n, axis=0)
        R = exact_distributions(None, G, I, topology, depth, n, rest_noise, g, rho0=P)  # (b, z)
        chi = apply_adjoint_circuit(np.eye(d, dtype=complex), np.repeat(gates[None], d, axis=0),
                                    topology, depth, n)  # (z, x)
        L = np.einsum("zi,aij,zj->za", chi.conj(), P, chi).real  # (w_a | Pi_z)
        A = L.T @ R.T
        draws.append(_twirl_superop(A, n, first))
    draws = np.stack(draws)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws)) if len(draws) > 1 else np.zeros_like(mean)
    return mean, se


def frame_structure(S: np.ndarray, n: int) -> dict:
    """Split a superoperator in the normalized Pauli basis into irrep diagnostics.

    Returns ``offdiag`` (max off-diagonal magnitude), ``spread`` (per label
    ``k``, max - min of diagonal entries over Paulis with that support) and
    ``f`` (mean diagonal per label).
    """
    diag = np.diag(S)
    off = S - np.diag(diag)
    labels = np.indices((4,) * n).reshape(n, -1)
    k = np.zeros(4**n, dtype=int)
    for l in range(n):
        k = (k << 1) | (labels[l] > 0)
    spread = np.zeros(2**n)
    f = np.zeros(2**n)
    for kk in range(2**n):
        vals = diag[k == kk]
        spread[kk] = vals.max() - vals.min()
        f[kk] = vals.mean()
    return {"offdiag": float(np.abs(off).max()), "offdiag_matrix": off, "spread": spread,
            "f": f, "labels": k}
