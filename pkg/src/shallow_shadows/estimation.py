"""Linear shadow estimation with a Pauli-diagonal dual frame, and bias measures."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .calibration import FrameSpectrum
from .pauli import (DenseState, PauliString, apply_label_diagonal, irrep_label, label_weights,
                    pauli_expectations_batch, sector_overlaps, weights)
from .simulator import RecordSet, ShadowRecord, snapshot_states
from .tt import tt_elementwise_inverse_fit, tt_svd


class FlaggedSectorError(ValueError):
    """Raised when an observable touches a frame entry flagged as non-invertible."""


@dataclass
class Observable:
    """Either a sum of unit-norm Pauli strings or a pure-state projector."""

    terms: tuple = ()
    target: Optional[DenseState] = None
    name: str = ""

    def __post_init__(self):
        if (self.target is None) == (not self.terms):
            raise ValueError("give either Pauli terms or a pure target")
        terms = []
        for c, p in self.terms:
            p = PauliString.from_label(p) if isinstance(p, str) else p
            if not np.isfinite(c):
                raise ValueError("coefficients must be finite")
            terms.append((float(c), p))
        self.terms = tuple(terms)
        if not self.name:
            self.name = ("fidelity" if self.target is not None else
                         "+".join(f"{c:g}*{p.label}" for c, p in self.terms))

    @classmethod
    def pauli(cls, label: str, coef: float = 1.0) -> "Observable":
        return cls(((coef, PauliString.from_label(label)),))

    @classmethod
    def pauli_sum(cls, terms: Sequence[tuple[float, Union[str, PauliString]]]) -> "Observable":
        return cls(tuple(terms))

    @classmethod
    def fidelity(cls, state: DenseState, name: str = "fidelity") -> "Observable":
        return cls(target=state, name=name)

    @classmethod
    def parse(cls, text: str) -> "Observable":
        """Parse ``"0.5*XZI + ZZI - YYY"`` into a Pauli sum."""
        terms = []
        for sign, body in re.findall(r"([+-]?)\s*([^+-]+)", text.replace(" ", "")):
            if "*" in body:
                c, label = body.split("*")
                coef = float(c)
            else:
                coef, label = 1.0, body
            terms.append((-coef if sign == "-" else coef, label))
        return cls.pauli_sum(terms)

    @property
    def n(self) -> int:
        return self.target.n if self.target is not None else self.terms[0][1].n

    def matrix(self) -> np.ndarray:
        if self.target is not None:
            return self.target.density_matrix()
        return sum(c * p.matrix() for c, p in self.terms)

    def sectors(self) -> np.ndarray:
        """Boolean mask over labels ``k`` on which the observable has weight."""
        if self.target is not None:
            w = label_weights(self.target.density_matrix())
            return w > 1e-14 * w.max()
        mask = np.zeros(2**self.n, dtype=bool)
        for c, p in self.terms:
            if c != 0:
                mask[irrep_label(p).index] = True
        return mask

    def exact_value(self, state: DenseState) -> float:
        """``Tr(O rho)`` for a pure state."""
        psi = state.amplitudes
        return float(np.real(np.vdot(psi, self.matrix() @ psi)))


@dataclass
class Estimate:
    value: float
    stderr: float
    shots: int
    frame: str
    observable: str = ""
    probe_error: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.observable, repr(self.value), repr(self.stderr), self.shots, self.frame]


def _inverse(f: FrameSpectrum, obs: Observable, allow_flagged: bool, inverse: str,
             chi: int) -> tuple[np.ndarray, Optional[float]]:
    flagged = ~f.invertible_mask() & obs.sectors()
    if flagged.any() and not allow_flagged:
        ks = np.nonzero(flagged)[0][:5]
        raise FlaggedSectorError(f"observable touches non-invertible frame entries k={ks.tolist()}")
    if inverse == "dense":
        return 1.0 / f.dense(), None
    if inverse == "tt":
        tt = f.tt if f.tt is not None else tt_svd(f.dense(), tol=1e-12)
        fit = tt_elementwise_inverse_fit(tt, chi)
        return fit.tt.to_dense(), fit.probe_error
    raise ValueError(f"unknown inverse {inverse!r}")


def dual_values(obs: Observable, chi: np.ndarray, finv: np.ndarray) -> np.ndarray:
    """``o~(z, g) = (O | S~^{-1} | Pi_{z,g})`` for snapshot states ``chi`` (B, 2**n).

    ``finv`` is the vector of inverse frame coefficients over labels ``k``.
    """
    if obs.target is not None:
        Obar = apply_label_diagonal(obs.target.density_matrix(), finv)
        return np.einsum("bj,bj->b", chi.conj() @ Obar, chi).real
    out = np.zeros(chi.shape[0])
    for c, p in obs.terms:
        out += c * finv[irrep_label(p).index] * pauli_expectations_batch(chi, p)
    return out


def dual_eval(obs: Observable, record: ShadowRecord, f: FrameSpectrum,
              allow_flagged: bool = False) -> float:
    """Dual-frame value of one record."""
    finv, _ = _inverse(f, obs, allow_flagged, "dense", 0)
    c = record.circuit
    bits = np.array([[int(b) for b in record.z]], dtype=np.uint8)
    chi = snapshot_states(c.single_qubit_layers[None], bits, c.topology, c.depth, c.n)
    return float(dual_values(obs, chi, finv)[0])


def record_dual_values(obs: Observable, records: RecordSet, finv: np.ndarray,
                       chunk: int = 4096) -> np.ndarray:
    out = []
    for gates, bits in records.chunks(chunk):
        chi = snapshot_states(gates, bits, records.topology, records.depth, records.n)
        out.append(dual_values(obs, chi, finv))
    return np.concatenate(out) if out else np.zeros(0)


def estimate(obs: Observable, records: RecordSet, f: FrameSpectrum, method: str = "mean",
             batches: int = 10, allow_flagged: bool = False, inverse: str = "dense",
             chi: int = 16, frame_tag: Optional[str] = None) -> Estimate:
    """Empirical mean of the dual values and its standard error.

    ``method="mom"`` returns a median of ``batches`` batch means instead
    (robust variant; its stderr is the mean-estimator stderr scaled by
    ``sqrt(pi/2)``). ``inverse="tt"`` uses a fitted TT of the inverse spectrum
    and reports its probe error.
    """
    if len(records) == 0:
        raise ValueError("empty record set")
    if obs.n != records.n or f.n != records.n:
        raise ValueError("observable, frame and records disagree on n")
    finv, probe = _inverse(f, obs, allow_flagged, inverse, chi)
    vals = record_dual_values(obs, records, finv)
    S = vals.size
    se = float(vals.std(ddof=1) / np.sqrt(S)) if S > 1 else 0.0
    if method == "mean":
        value = float(vals.mean())
    elif method == "mom":
        value = float(np.median([b.mean() for b in np.array_split(vals, batches)]))
        se *= np.sqrt(np.pi / 2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Estimate(value, se, S, frame_tag or f.provenance, obs.name, probe)


def mean_snapshot(records: RecordSet, chunk: int = 4096) -> np.ndarray:
    """Average snapshot projector ``(1/|S|) sum |chi><chi|`` as a dense matrix."""
    d = 2**records.n
    acc = np.zeros((d, d), dtype=complex)
    for gates, bits in records.chunks(chunk):
        chi = snapshot_states(gates, bits, records.topology, records.depth, records.n)
        acc += chi.T @ chi.conj()
    return acc / max(len(records), 1)


def sector_means(obs: Observable, records: RecordSet) -> np.ndarray:
    """Vector ``m`` with ``estimate(obs, records, f).value == sum_k m_k / f_k`` for any ``f``."""
    return sector_overlaps(obs.matrix(), mean_snapshot(records))


def frame_spread(obs: Observable, records: RecordSet, replicates: np.ndarray) -> float:
    """Standard deviation of the mean estimate over resampled spectra (R, 2**n)."""
    m = sector_means(obs, records)
    sel = m != 0
    vals = (m[sel] / replicates[:, sel]).sum(axis=1)
    return float(vals.std(ddof=1)) if len(vals) > 1 else 0.0


def write_estimates_csv(path, estimates: Sequence[Estimate]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "value", "stderr", "shots", "frame"])
        for e in estimates:
            w.writerow(e.row())


# --- bias measures -----------------------------------------------------------

def _as_vector(f) -> np.ndarray:
    return f.dense() if isinstance(f, FrameSpectrum) else np.asarray(f, dtype=float)


def _ratio(f_ideal, f_noisy) -> np.ndarray:
    fi, fn = _as_vector(f_ideal), _as_vector(f_noisy)
    if fi.shape != fn.shape:
        raise ValueError("spectra have different sizes")
    if np.any(np.abs(fi) < 1e-12):
        raise ValueError("ideal spectrum is not invertible")
    return fn / fi


def worst_case_bias(f_ideal, f_noisy) -> float:
    """``max_{k != 0} |1 - f_noisy(k) / f_ideal(k)|``."""
    r = _ratio(f_ideal, f_noisy)
    return float(np.max(np.abs(1 - r[1:]))) if r.size > 1 else 0.0


def worst_case_bias_by_support(f_ideal, f_noisy, support: int) -> float:
    """Worst-case bias restricted to labels of Pauli weight ``support``."""
    r = _ratio(f_ideal, f_noisy)
    n = r.size.bit_length() - 1
    sel = weights(n) == support
    if not sel.any():
        raise ValueError(f"no label of weight {support} for n={n}")
    return float(np.max(np.abs(1 - r[sel])))


def bias_of_estimation(obs: Observable, state: DenseState, f_ideal, f_noisy) -> float:
    """``|(O|rho) - (O|S^{-1} S~|rho)|`` for Pauli-diagonal frames, computed exactly."""
    r = _ratio(f_ideal, f_noisy)
    O = obs.matrix()
    rho = state.density_matrix()
    Or = apply_label_diagonal(O, r)
    return float(abs(np.trace(O @ rho) - np.trace(Or @ rho)))
