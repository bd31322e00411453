"""Real tensor trains over binary indices.

A :class:`TensorTrain` with cores ``G_l`` of shape ``(r_{l-1}, 2, r_l)``
represents the vector ``v_k = G_0[k_0] G_1[k_1] ... G_{n-1}[k_{n-1}]`` with
``k_0`` the most significant bit of ``k``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class TensorTrain:
    cores: list

    def __post_init__(self):
        self.cores = [np.asarray(c, dtype=float) for c in self.cores]
        if not self.cores:
            raise ValueError("a tensor train needs at least one core")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for a, b in zip(self.cores, self.cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError("inconsistent bond dimensions")

    @property
    def n(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def max_rank(self) -> int:
        return max(self.ranks, default=1)

    def copy(self) -> "TensorTrain":
        return TensorTrain([c.copy() for c in self.cores])

    def to_dense(self) -> np.ndarray:
        return tt_to_dense(self)

    def entry(self, k) -> float:
        return tt_entry(self, k)

    def to_json(self) -> str:
        """JSON with per-core shapes and row-major (left, bit, right) flattened data."""
        return json.dumps({"format": "tensor-train/1", "n": self.n, "ranks": list(self.ranks),
                           "shapes": [list(c.shape) for c in self.cores],
                           "cores": [c.reshape(-1).tolist() for c in self.cores]})

    @classmethod
    def from_json(cls, text: str) -> "TensorTrain":
        d = json.loads(text)
        return cls([np.asarray(data, dtype=float).reshape(shape)
                    for data, shape in zip(d["cores"], d["shapes"])])


def product_tt(factors: Sequence[Sequence[float]]) -> TensorTrain:
    """Rank-1 TT of ``(x) factors``."""
    return TensorTrain([np.asarray(f, dtype=float).reshape(1, 2, 1) for f in factors])


def tt_to_dense(t: TensorTrain) -> np.ndarray:
    v = t.cores[0].reshape(2, -1)
    for c in t.cores[1:]:
        v = (v @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
    return v.reshape(-1)


def tt_entry(t: TensorTrain, k) -> float:
    """Single entry; ``k`` is an integer index, a bit string or a bit sequence."""
    if isinstance(k, (int, np.integer)):
        bits = [(int(k) >> (t.n - 1 - l)) & 1 for l in range(t.n)]
    elif isinstance(k, str):
        bits = [int(c) for c in k]
    else:
        bits = [int(b) for b in k]
    if len(bits) != t.n:
        raise ValueError("index length does not match the tensor train")
    v = np.ones(1)
    for c, b in zip(t.cores, bits):
        v = v @ c[:, b, :]
    return float(v[0])


def tt_entries(t: TensorTrain, ks: np.ndarray) -> np.ndarray:
    """Vectorised entries for an array of integer indices."""
    ks = np.asarray(ks, dtype=np.int64)
    v = np.ones((ks.shape[0], 1))
    for l, c in enumerate(t.cores):
        b = (ks >> (t.n - 1 - l)) & 1
        v = np.einsum("sa,sab->sb", v, c[:, b, :].transpose(1, 0, 2))
    return v[:, 0]


def _truncation_rank(s: np.ndarray, max_rank: Optional[int], delta: float = 0.0,
                     rel: float = 0.0) -> int:
    """Smallest rank whose discarded tail norm is <= delta, capped by max_rank and rel cutoff."""
    if s.size == 0:
        return 1
    tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tail[i] = ||s[i:]||
    r = s.size
    if delta > 0:
        ok = np.nonzero(tail <= delta)[0]
        if ok.size:
            r = min(r, int(ok[0]))
    if rel > 0 and s[0] > 0:
        r = min(r, int(np.sum(s > rel * s[0])))
    if max_rank is not None:
        r = min(r, max_rank)
    return max(r, 1)


def tt_svd(v, max_rank: Optional[int] = None, tol: float = 0.0, return_info: bool = False):
    """Sequential reshape-and-SVD decomposition of a dense vector of length 2**n.

    ``tol`` is a relative accuracy: each step discards at most
    ``tol * ||v|| / sqrt(n-1)``. With ``return_info`` also returns the norms of
    the discarded singular values per bond; their root-sum-square bounds the
    error.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    n = v.size.bit_length() - 1
    if 2**n != v.size or n < 1:
        raise ValueError("length must be a power of two >= 2")
    norm = np.linalg.norm(v)
    delta = tol * norm / np.sqrt(max(n - 1, 1))
    cores, discarded = [], []
    r = 1
    rest = v.reshape(1, -1)
    for l in range(n - 1):
        mat = rest.reshape(r * 2, -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        rk = _truncation_rank(s, max_rank, delta)
        if norm == 0:
            rk = 1
        discarded.append(float(np.linalg.norm(s[rk:])))
        cores.append(u[:, :rk].reshape(r, 2, rk))
        rest = s[:rk, None] * vt[:rk]
        r = rk
    cores.append(rest.reshape(r, 2, 1))
    t = TensorTrain(cores)
    if return_info:
        return t, np.array(discarded)
    return t


def tt_add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Exact sum; ranks add."""
    if a.n != b.n:
        raise ValueError("length mismatch")
    if a.n == 1:
        return TensorTrain([a.cores[0] + b.cores[0]])
    cores = []
    for l, (x, y) in enumerate(zip(a.cores, b.cores)):
        if l == 0:
            cores.append(np.concatenate([x, y], axis=2))
        elif l == a.n - 1:
            cores.append(np.concatenate([x, y], axis=0))
        else:
            c = np.zeros((x.shape[0] + y.shape[0], 2, x.shape[2] + y.shape[2]))
            c[: x.shape[0], :, : x.shape[2]] = x
            c[x.shape[0]:, :, x.shape[2]:] = y
            cores.append(c)
    return TensorTrain(cores)


def tt_scale(a: TensorTrain, c: float) -> TensorTrain:
    cores = [x.copy() for x in a.cores]
    cores[0] = cores[0] * c
    return TensorTrain(cores)


def tt_inner(a: TensorTrain, b: TensorTrain) -> float:
    env = np.ones((1, 1))
    for x, y in zip(a.cores, b.cores):
        env = np.einsum("ab,asc,bsd->cd", env, x, y)
    return float(env[0, 0])


def tt_norm(a: TensorTrain) -> float:
    return float(np.sqrt(max(tt_inner(a, a), 0.0)))


def orthogonalize(t: TensorTrain, center: int) -> TensorTrain:
    """Return a copy with cores left of ``center`` left-orthonormal and right of it right-orthonormal."""
    cores = [c.copy() for c in t.cores]
    for l in range(center):
        r0, _, r1 = cores[l].shape
        q, r = np.linalg.qr(cores[l].reshape(r0 * 2, r1))
        cores[l] = q.reshape(r0, 2, -1)
        cores[l + 1] = np.einsum("ab,bsc->asc", r, cores[l + 1])
    for l in range(t.n - 1, center, -1):
        r0, _, r1 = cores[l].shape
        q, r = np.linalg.qr(cores[l].reshape(r0, 2 * r1).T)
        cores[l] = q.T.reshape(-1, 2, r1)
        cores[l - 1] = np.einsum("asb,cb->asc", cores[l - 1], r)
    return TensorTrain(cores)


def tt_round(a: TensorTrain, max_rank: Optional[int] = None, tol: float = 1e-12) -> TensorTrain:
    """Recompress by right-to-left orthogonalisation and a left-to-right SVD sweep.

    ``tol`` is relative to the norm of ``a``; singular values at the round-off
    level of the inputs are dropped as well, so exact cancellations give rank 1.
    """
    n = a.n
    if n == 1:
        return a.copy()
    # round-off floor: singular values below ~eps * (product of core norms) are noise
    scale = float(np.prod([np.linalg.norm(c) for c in a.cores]))
    t = orthogonalize(a, 0)
    norm = np.linalg.norm(t.cores[0])
    delta = max(tol * norm, 64 * np.finfo(float).eps * scale) / np.sqrt(n - 1)
    cores = t.cores
    for l in range(n - 1):
        r0, _, r1 = cores[l].shape
        u, s, vt = np.linalg.svd(cores[l].reshape(r0 * 2, r1), full_matrices=False)
        rk = _truncation_rank(s, max_rank, delta)
        cores[l] = u[:, :rk].reshape(r0, 2, rk)
        cores[l + 1] = np.einsum("ab,bsc->asc", s[:rk, None] * vt[:rk], cores[l + 1])
    return TensorTrain(cores)


def tt_mean(tts: Sequence[TensorTrain], batch: int = 64, tol: float = 1e-12,
            max_rank: Optional[int] = None) -> TensorTrain:
    """Average of many TTs by batched addition and rounding."""
    tts = list(tts)
    if not tts:
        raise ValueError("empty sequence")
    total = None
    for s in range(0, len(tts), batch):
        part = tts[s]
        for t in tts[s + 1 : s + batch]:
            part = tt_add(part, t)
        total = part if total is None else tt_add(total, part)
        total = tt_round(total, max_rank, tol)
    return tt_scale(total, 1.0 / len(tts))


# --- MALS -------------------------------------------------------------------

@dataclass
class FitResult:
    """Outcome of an alternating least-squares fit."""

    tt: TensorTrain
    residual: float
    relative_residual: float
    sweeps: int
    converged: bool
    history: list = field(default_factory=list)
    rank_history: list = field(default_factory=list)


class _DenseTarget:
    def __init__(self, v: np.ndarray):
        self.v = np.asarray(v, dtype=float).reshape(-1)
        self.n = self.v.size.bit_length() - 1
        self.norm2 = float(self.v @ self.v)

    def project(self, x: list, l: int) -> np.ndarray:
        left = np.ones((1, 1))
        for c in x[:l]:
            left = (left @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
        right = np.ones((1, 1))
        for c in reversed(x[l + 2:]):
            right = (c.reshape(-1, c.shape[2]) @ right).reshape(c.shape[0], -1)
        T = self.v.reshape(2**l, 4, -1)
        W = np.einsum("xa,xsy,by->asb", left, T, right)
        gl = left.T @ left
        gr = right @ right.T
        W = np.einsum("ab,bsc,dc->asd", np.linalg.pinv(gl, rcond=1e-10), W,
                      np.linalg.pinv(gr, rcond=1e-10))
        return W.reshape(left.shape[1], 2, 2, right.shape[0])

    def residual(self, x: list) -> float:
        return float(np.linalg.norm(self.v - tt_to_dense(TensorTrain(x))))


class _TTTarget:
    def __init__(self, t: TensorTrain):
        self.t = t
        self.n = t.n
        self.norm2 = tt_inner(t, t)

    def project(self, x: list, l: int) -> np.ndarray:
        tc = self.t.cores
        left = np.ones((1, 1))
        for a, b in zip(x[:l], tc[:l]):
            left = np.einsum("ab,asc,bsd->cd", left, a, b)
        right = np.ones((1, 1))
        for a, b in zip(reversed(x[l + 2:]), reversed(tc[l + 2:])):
            right = np.einsum("asc,bsd,cd->ab", a, b, right)
        W = np.einsum("ab,bsc,ctd,ed->aste", left, tc[l], tc[l + 1], right)
        # Gram matrices of the current interfaces
        gl = np.ones((1, 1))
        for a in x[:l]:
            gl = np.einsum("ab,asc,bsd->cd", gl, a, a)
        gr = np.ones((1, 1))
        for a in reversed(x[l + 2:]):
            gr = np.einsum("asc,bsd,cd->ab", a, a, gr)
        return np.einsum("ab,bstc,dc->astd", np.linalg.pinv(gl, rcond=1e-10), W,
                         np.linalg.pinv(gr, rcond=1e-10))

    def residual(self, x: list) -> float:
        xt = TensorTrain(x)
        r2 = self.norm2 - 2 * tt_inner(self.t, xt) + tt_inner(xt, xt)
        return float(np.sqrt(max(r2, 0.0)))


def mals_fit(target, max_rank: int, init: Optional[TensorTrain] = None, sweeps: int = 30,
             tol: float = 1e-10, sv_rel: float = 1e-8, sv_abs: float = 0.0) -> FitResult:
    """Two-site alternating least squares (MALS) fit of a TT to ``target``.

    ``target`` is a dense vector, a :class:`TensorTrain`, or a sequence of TTs
    whose mean is fitted (streamed through :func:`tt_mean`). Each merged
    two-site core is re-split by SVD keeping at most ``max_rank`` singular
    values above ``sv_rel * s_max``; ``sv_abs`` additionally discards a tail
    of norm up to that value. Stops when the relative residual improves by less
    than ``tol`` over a sweep in which no rank changed.
    """
    if isinstance(target, TensorTrain):
        tgt = _TTTarget(target)
    elif isinstance(target, np.ndarray) and target.dtype != object:
        tgt = _DenseTarget(target)
    else:
        tgt = _TTTarget(tt_mean(list(target)))
    n = tgt.n
    if init is None:
        init = product_tt([[1.0, 1.0 / 3.0]] * n)
    if init.n != n:
        raise ValueError("init has incompatible length")
    tnorm = np.sqrt(max(tgt.norm2, 0.0))
    scale = tnorm if tnorm > 0 else 1.0
    if n == 1:
        full = tgt.v if isinstance(tgt, _DenseTarget) else tt_to_dense(tgt.t)
        tt = TensorTrain([full.reshape(1, 2, 1)])
        return FitResult(tt, 0.0, 0.0, 0, True, [0.0], [()])

    x = orthogonalize(init, 0).cores
    res = tgt.residual(x)
    history, rank_history = [res], [TensorTrain(x).ranks]
    best = (res, [c.copy() for c in x])
    converged = False
    sweep = 0

    def split(W, l, to_right):
        a, _, _, b = W.shape
        u, s, vt = np.linalg.svd(W.reshape(a * 2, 2 * b), full_matrices=False)
        rk = _truncation_rank(s, max_rank, sv_abs, sv_rel)
        if to_right:
            x[l] = u[:, :rk].reshape(a, 2, rk)
            x[l + 1] = (s[:rk, None] * vt[:rk]).reshape(rk, 2, b)
        else:
            x[l] = (u[:, :rk] * s[:rk]).reshape(a, 2, rk)
            x[l + 1] = vt[:rk].reshape(rk, 2, b)

    for sweep in range(1, sweeps + 1):
        old_ranks = TensorTrain(x).ranks
        for l in range(n - 1):
            split(tgt.project(x, l), l, True)
        for l in range(n - 2, -1, -1):
            split(tgt.project(x, l), l, False)
        res_new = tgt.residual(x)
        history.append(res_new)
        rank_history.append(TensorTrain(x).ranks)
        if res_new < best[0]:
            best = (res_new, [c.copy() for c in x])
        improvement = (res - res_new) / scale
        res = res_new
        if improvement < tol and rank_history[-1] == old_ranks:
            converged = True
            break
    tt = TensorTrain(best[1])
    return FitResult(tt, best[0], best[0] / scale, sweep, converged, history, rank_history)


@dataclass
class InverseFit:
    tt: TensorTrain
    probe_error: float
    residual: float


def tt_elementwise_inverse_fit(f: TensorTrain, max_rank: int, guard: float = 1e-12,
                               probes: int = 10_000, rng=0) -> InverseFit:
    """Low-rank TT ``g`` with ``g_k ~ 1 / f_k``, fitted by MALS to the dense inverse.

    ``probe_error`` is ``max |g_k f_k - 1|`` over ``probes`` random indices
    (all indices when there are fewer).
    """
    dense = tt_to_dense(f)
    small = np.abs(dense) < guard
    if small.any():
        raise ValueError(f"{int(small.sum())} entries below guard {guard}")
    inv = 1.0 / dense
    init = tt_svd(inv, max_rank=max_rank)
    fit = mals_fit(inv, max_rank, init=init)
    size = dense.size
    if size <= probes:
        ks = np.arange(size)
    else:
        ks = np.random.default_rng(rng).integers(0, size, probes)
    err = float(np.max(np.abs(tt_entries(fit.tt, ks) * dense[ks] - 1)))
    return InverseFit(fit.tt, err, fit.residual)
