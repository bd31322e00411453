"""Scripted numerical studies: configuration, drivers and tidy CSV output.

Every driver is deterministic given its config: seeds for calibration,
estimation and target states are derived from the master seed and the grid
point, and tables are written in grid order with ``repr`` floats.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .calibration import (FrameSpectrum, bootstrap_floor, estimate_f, exact_f_tt_pauli_noise,
                          ideal_f, ideal_local_tt, noiseless_f, phi_histograms)
from .circuits import Topology, block_brickwork, brickwork
from .estimation import Observable, estimate, frame_spread, worst_case_bias, worst_case_bias_by_support
from .noise import (NOISELESS, GUENoise, NoiseModel, PauliChannel, calibrate_gamma, depolarizing,
                    load_config)
from .pauli import DenseState
from .simulator import AcquisitionSpec, RecordSet, acquire, random_stabilizer_state
from .tt import mals_fit, tt_svd

EXPERIMENTS = ("fig2_top", "fig2_bottom", "fig2_inset", "fig3", "fig4_overlap", "fig5_sim", "custom")

_DEFAULTS = {
    "fig2_top": dict(n=[4, 6, 8], depths=[0, 1, 2, 3], r=[1e-3, 1e-2, 1e-1]),
    "fig2_bottom": dict(n=[6], depths=[2], r=[1e-3], states="haar", trials=20),
    "fig2_inset": dict(n=[6], depths=[0, 2], r=[1e-3, 1e-1], states="stabilizer", trials=20),
    "fig3": dict(n=[8], depths=[1, 2], chi=[2, 4, 8, 16], bootstrap=200),
    "fig4_overlap": dict(n=[8], depths=[0, 1, 2], shots=100_000, bootstrap=200),
    "fig5_sim": dict(n=[5], depths=[0, 1, 2], cal_shots=100_000),
    "custom": dict(),
}


@dataclass
class ExperimentConfig:
    """One study: which driver, the grid, noise, shot counts and the master seed."""

    experiment: str
    seed: int
    n: list = field(default_factory=lambda: [6])
    depths: list = field(default_factory=lambda: [0, 1, 2])
    r: list = field(default_factory=list)
    noise: dict = field(default_factory=dict)
    shots: int = 10_000
    cal_shots: int = 100_000
    states: str = "haar"
    trials: int = 20
    out: str = "results"
    chi: list = field(default_factory=lambda: [4, 8])
    bootstrap: int = 0
    workers: int = 1
    empirical: bool = False
    theta: float = float(np.pi / np.sqrt(2))
    observable: str = ""
    shot_grid: list = field(default_factory=lambda: [100, 300, 1000, 3000, 10000])
    boundary: str = "open"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.seed is None:
            raise ValueError("a master seed is required")
        self.seed = int(self.seed)
        if self.states not in ("haar", "stabilizer"):
            raise ValueError(f"unknown state ensemble {self.states!r}")
        if min(self.shots, self.cal_shots, self.trials) < 0:
            raise ValueError("shot counts and trials must be non-negative")

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ExperimentConfig":
        d = dict(d)
        d.update({k: v for k, v in overrides.items() if v is not None})
        exp = d.get("experiment", d.get("id"))
        d.pop("id", None)
        if exp not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
        if d.get("seed") is None:
            raise ValueError("config must set a master seed")
        merged = dict(_DEFAULTS[exp], **d)
        merged["experiment"] = exp
        noise = merged.get("noise")
        if isinstance(noise, str):
            if not Path(noise).exists():
                raise FileNotFoundError(f"noise config {noise} does not exist")
            merged["noise"] = load_config(noise)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(merged) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        for key in ("n", "depths", "r", "chi", "shot_grid"):
            if key in merged and not isinstance(merged[key], (list, tuple)):
                merged[key] = [merged[key]]
        return cls(**merged)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_dict(load_config(path), **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects results (not the output path or worker count)."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("out", "workers")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# --- helpers -------------------------------------------------------------------

def sub_seed(master: int, tag: str, *keys: int) -> int:
    """Deterministic child seed for a named stage and grid point."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(tag.encode()), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@lru_cache(maxsize=None)
def gamma_for(r: float) -> float:
    return calibrate_gamma(float(r))


def gue_noise(r: Optional[float], base: NoiseModel = NOISELESS) -> NoiseModel:
    """``base`` with its two-qubit noise replaced by GUE noise of mean infidelity ``r``."""
    if r is None:
        return base
    return dataclasses.replace(base, two_qubit=GUENoise(gamma_for(r)))


def gue_equivalent(r: float, base: NoiseModel = NOISELESS) -> NoiseModel:
    """Pauli noise with the same shot-averaged channel as GUE noise of infidelity ``r``.

    GUE draws are unitarily invariant, so their average is two-qubit
    depolarizing with total error probability ``(d+1)/d * r = 5r/4``.
    """
    return dataclasses.replace(base, two_qubit=depolarizing(1.25 * float(r), 2))


def random_pauli_noise(p: float, seed: int) -> PauliChannel:
    """Non-uniform two-qubit Pauli channel with total error probability ``p``."""
    w = np.random.default_rng(seed).random(15)
    return PauliChannel((1 - p, *(p * w / w.sum())))


def placeholder_device_noise(n: int, seed: int, two_qubit_p: float = 0.01,
                             single: tuple = (5e-4, 1e-3, 2e-3, 4e-3),
                             readout: tuple = (0.01, 0.05)) -> NoiseModel:
    """Gate-dependent Pauli noise plus asymmetric readout flips (illustrative values)."""
    g = np.random.default_rng(seed)
    chans = []
    for p in single:
        w = g.random(3)
        chans.append(PauliChannel((1 - p, *(p * w / w.sum()))))
    ro = tuple((readout[0] * (0.5 + g.random()), readout[1] * (0.5 + g.random())) for _ in range(n))
    return NoiseModel(random_pauli_noise(two_qubit_p, seed + 1), tuple(chans), ro)


def base_noise(cfg: ExperimentConfig) -> NoiseModel:
    return NoiseModel.from_dict(cfg.noise) if cfg.noise else NOISELESS


def topology_for(cfg: ExperimentConfig, n: int) -> Topology:
    return brickwork(n, cfg.boundary)


def draw_state(kind: str, n: int, seed: int) -> DenseState:
    if kind == "haar":
        return DenseState.haar(n, seed)
    return random_stabilizer_state(n, seed)


def run_acquisition(n: int, depth: int, topology: Topology, noise: NoiseModel, seed: int,
                    shots: int, state: Optional[DenseState] = None, tag: str = "zero") -> RecordSet:
    spec = AcquisitionSpec(n, depth, "clifford1q", topology, state, tag if state is not None else "zero",
                           noise, seed, shots)
    return acquire(spec)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_table(path, rows: list[dict], cfg: ExperimentConfig) -> None:
    """Tidy CSV; every row carries the config digest and package version."""
    if not rows:
        cols = ["config_digest", "version"]
    else:
        cols = list(rows[0])
        for r in rows[1:]:
            cols += [c for c in r if c not in cols]
        cols += ["config_digest", "version"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            r = dict(r, config_digest=cfg.digest(), version=__version__)
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def summarize(rows: list[dict], keys: list[str], values: list[str]) -> list[dict]:
    """Mean and standard error of ``values`` per distinct ``keys`` tuple, in first-seen order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, rs in groups.items():
        row = dict(zip(keys, key))
        row["count"] = len(rs)
        for v in values:
            x = np.array([r[v] for r in rs], dtype=float)
            row[f"{v}_mean"] = float(x.mean())
            row[f"{v}_se"] = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
        out.append(row)
    return out


def _pool_map(fn: Callable, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


@dataclass
class ExperimentResult:
    rows: list
    summary: list
    extra: dict = field(default_factory=dict)
    seconds: float = 0.0


# --- fig2_top: worst-case bias of unmitigated estimation -----------------------

def run_fig2_top(cfg: ExperimentConfig) -> ExperimentResult:
    """Exact worst-case Pauli bias of the noiseless inverse under GUE noise.

    Uses the depolarizing equivalent of GUE noise so the noisy spectrum is
    exact; with ``empirical`` the GUE-noise spectrum is also calibrated from
    ``cal_shots`` shots.
    """
    base = base_noise(cfg)
    grid = [(n, D, ri, r) for n in cfg.n for D in cfg.depths for ri, r in enumerate(cfg.r)]

    def point(p):
        n, D, ri, r = p
        topo = topology_for(cfg, n)
        ideal = noiseless_f(n, D, topo).values
        noisy = exact_f_tt_pauli_noise(n, D, gue_equivalent(r, base), topo).to_dense()
        row = dict(n=n, depth=D, r=r, source="exact", worst_case_bias=worst_case_bias(ideal, noisy))
        for s in (1, 2):
            row[f"bias_ps{s}"] = worst_case_bias_by_support(ideal, noisy, s) if s <= n else 0.0
        rows = [row]
        if cfg.empirical and cfg.cal_shots:
            recs = run_acquisition(n, D, topo, gue_noise(r, base), sub_seed(cfg.seed, "cal", n, D, ri),
                                   cfg.cal_shots)
            fh = estimate_f(recs).values
            emp = dict(n=n, depth=D, r=r, source="empirical", worst_case_bias=worst_case_bias(ideal, fh))
            for s in (1, 2):
                emp[f"bias_ps{s}"] = worst_case_bias_by_support(ideal, fh, s) if s <= n else 0.0
            rows.append(emp)
        return rows

    rows = [r for rs in _pool_map(point, grid, cfg.workers) for r in rs]
    return ExperimentResult(rows, [dict(r) for r in rows if r["source"] == "exact"])


# --- fig2_bottom / fig2_inset / custom: estimation error on random targets -----

def _observable_for(cfg: ExperimentConfig, state: DenseState) -> Observable:
    if cfg.observable:
        return Observable.parse(cfg.observable)
    return Observable.fidelity(state)


def run_estimation_grid(cfg: ExperimentConfig) -> ExperimentResult:
    """Mitigated (calibrated) vs unmitigated (noiseless-frame) estimation errors.

    One calibration per grid point ``(n, D, r)``; ``trials`` random targets,
    each measured with ``shots`` fresh shots. Flagged frame entries are
    inverted anyway and counted in the ``flagged`` column.
    """
    base = base_noise(cfg)
    rs = list(enumerate(cfg.r)) if cfg.r else [(0, None)]
    grid = [(n, D, ri, r) for n in cfg.n for D in cfg.depths for ri, r in rs]

    def point(p):
        n, D, ri, r = p
        topo = topology_for(cfg, n)
        noise = gue_noise(r, base)
        cal = run_acquisition(n, D, topo, noise, sub_seed(cfg.seed, "cal", n, D, ri), cfg.cal_shots)
        fh = estimate_f(cal)
        f0 = noiseless_f(n, D, topo)
        rows = []
        for t in range(cfg.trials):
            state = draw_state(cfg.states, n, sub_seed(cfg.seed, "state", n, t))
            obs = _observable_for(cfg, state)
            exact = obs.exact_value(state)
            recs = run_acquisition(n, D, topo, noise, sub_seed(cfg.seed, "est", n, D, ri, t), cfg.shots,
                                   state, cfg.states)
            flagged = int((~fh.invertible_mask() & obs.sectors()).sum())
            em = estimate(obs, recs, fh, allow_flagged=True)
            eu = estimate(obs, recs, f0)
            rows.append(dict(n=n, depth=D, r=r if r is not None else "", trial=t, states=cfg.states,
                             observable=obs.name, exact=exact,
                             mitigated=em.value, mitigated_se=em.stderr,
                             unmitigated=eu.value, unmitigated_se=eu.stderr,
                             err_mitigated=abs(em.value - exact), err_unmitigated=abs(eu.value - exact),
                             flagged=flagged))
        return rows

    rows = [r for rs_ in _pool_map(point, grid, cfg.workers) for r in rs_]
    summary = summarize(rows, ["n", "depth", "r"], ["err_mitigated", "err_unmitigated"])
    return ExperimentResult(rows, summary)


# --- fig3: TT recovery of the frame spectrum -----------------------------------

def run_fig3(cfg: ExperimentConfig) -> ExperimentResult:
    """Bias of rank-chi TT approximations (TT-SVD and MALS) against the dense estimate.

    The statistical floor is the 95% bootstrap quantile of the same worst-case
    ratio between resampled and original dense estimates. Without a noise
    config a fixed non-uniform 2% two-qubit Pauli channel is used.
    """
    base = base_noise(cfg)
    source = "config"
    if base.is_noiseless:
        base = NoiseModel(random_pauli_noise(0.02, sub_seed(cfg.seed, "noise")))
        source = "placeholder"
    grid = [(n, D) for n in cfg.n for D in cfg.depths]

    def point(p):
        n, D = p
        topo = topology_for(cfg, n)
        recs = run_acquisition(n, D, topo, base, sub_seed(cfg.seed, "cal", n, D), cfg.cal_shots)
        fh = estimate_f(recs, bootstrap=cfg.bootstrap, rng=sub_seed(cfg.seed, "boot", n, D))
        floor = bootstrap_floor(fh) if cfg.bootstrap else float("nan")
        exact = exact_f_tt_pauli_noise(n, D, base, topo)
        rows = [dict(n=n, depth=D, chi=max(exact.ranks), method="exact", bias=worst_case_bias(fh.values, exact.to_dense()),
                     floor=floor, residual=float(np.linalg.norm(exact.to_dense() - fh.values)),
                     max_rank=exact.max_rank)]
        init = ideal_local_tt(n)
        for chi in cfg.chi:
            svd = tt_svd(fh.values, max_rank=chi)
            res_svd = float(np.linalg.norm(svd.to_dense() - fh.values))
            rows.append(dict(n=n, depth=D, chi=chi, method="tt_svd",
                             bias=worst_case_bias(fh.values, svd.to_dense()), floor=floor,
                             residual=res_svd, max_rank=svd.max_rank))
            fit = mals_fit(fh.values, chi, init=init)
            rows.append(dict(n=n, depth=D, chi=chi, method="mals",
                             bias=worst_case_bias(fh.values, fit.tt.to_dense()), floor=floor,
                             residual=fit.residual, max_rank=fit.tt.max_rank))
            nf = mals_fit(fh.values, chi, init=init, sv_abs=float(np.linalg.norm(fh.stderr)))
            rows.append(dict(n=n, depth=D, chi=chi, method="mals_noise_floor",
                             bias=worst_case_bias(fh.values, nf.tt.to_dense()), floor=floor,
                             residual=nf.residual, max_rank=nf.tt.max_rank))
        return [dict(r, noise_source=source) for r in rows]

    rows = [r for rs in _pool_map(point, grid, cfg.workers) for r in rs]
    return ExperimentResult(rows, [r for r in rows if r["method"] != "mals_noise_floor"])


# --- fig4_overlap: trial/walker overlaps on two 4-qubit blocks -----------------

OVERLAP_BASIS = ("11001100", "11000011", "00111100", "00110011")


def overlap_states(theta: float) -> dict[str, DenseState]:
    """Trial state and the two walker states on 8 qubits, from their amplitude lists."""
    c, s = np.cos(theta), np.sin(theta)
    amps = {
        "psi_T": (c**2, 0.5 * np.sin(2 * theta), 0.5 * np.sin(2 * theta), s**2),
        "phi_1": (0.5, 0.5, 0.5, 0.5),
        "phi_2": (1 / np.sqrt(2), 1 / np.sqrt(6), 1 / np.sqrt(6), 1 / np.sqrt(6)),
    }
    out = {}
    for name, a in amps.items():
        v = np.zeros(256, dtype=complex)
        for bits, x in zip(OVERLAP_BASIS, a):
            v[int(bits, 2)] = x
        out[name] = DenseState(8, v)
    return out


def exact_overlaps(theta: float) -> dict[str, float]:
    st = overlap_states(theta)
    psi = st["psi_T"].amplitudes
    return {name: float(abs(np.vdot(s.amplitudes, psi)) ** 2) for name, s in st.items()}


def block_frame(spec: FrameSpectrum, blocks=((0, 1, 2, 3), (4, 5, 6, 7))) -> FrameSpectrum:
    """Tensor product of the block marginals of an 8-qubit spectrum."""
    out = spec.marginal(blocks[0])
    for b in blocks[1:]:
        out = out.kron(spec.marginal(b))
    return out


def run_fig4_overlap(cfg: ExperimentConfig) -> ExperimentResult:
    """Overlap estimation with block-product frames under gate-dependent and readout noise.

    ``mitigated`` inverts the calibrated block frame (its stderr adds the
    bootstrap spread of the frame in quadrature); ``unmitigated`` inverts the
    noiseless block frame of the same depth; ``global_clifford`` inverts the
    product of 4-qubit global-Clifford frames. Extra rows give worst-case
    biases of the global-Clifford inverse per depth.
    """
    n = 8
    noise = base_noise(cfg)
    source = "config"
    if noise.is_noiseless:
        noise = placeholder_device_noise(n, sub_seed(cfg.seed, "noise"))
        source = "placeholder"
    topo = block_brickwork(2, 4)
    states = overlap_states(cfg.theta)
    exact = exact_overlaps(cfg.theta)
    gc = ideal_f(4, "global_clifford")
    gc = gc.kron(gc)
    rows, bias_rows = [], []
    for D in cfg.depths:
        cal = run_acquisition(n, D, topo, noise, sub_seed(cfg.seed, "cal", D), cfg.cal_shots)
        fh = estimate_f(cal, bootstrap=cfg.bootstrap, rng=sub_seed(cfg.seed, "boot", D))
        fb = block_frame(fh)
        f0 = noiseless_f(n, D, topo)
        fexact = FrameSpectrum(n, exact_f_tt_pauli_noise(n, D, noise, topo).to_dense(),
                               provenance="exact_oracle")
        for frame, f in (("noiseless", f0.values), ("noisy_exact", fexact.values),
                         ("noisy_calibrated", fb.values)):
            bias_rows.append(dict(depth=D, frame=frame, bias_vs_global_clifford=worst_case_bias(gc.values, f),
                                  noise_source=source))
        recs = run_acquisition(n, D, topo, noise, sub_seed(cfg.seed, "est", D), cfg.shots,
                               states["psi_T"], "psi_T")
        for name in ("psi_T", "phi_1", "phi_2"):
            obs = Observable.fidelity(states[name], name)
            for kind, f in (("mitigated", fb), ("unmitigated", f0), ("global_clifford", gc)):
                e = estimate(obs, recs, f, allow_flagged=True)
                se_frame = frame_spread(obs, recs, fb.bootstrap) if (kind == "mitigated" and fb.bootstrap is not None) else 0.0
                se = float(np.hypot(e.stderr, se_frame))
                rows.append(dict(depth=D, target=name, frame=kind, exact=exact[name], estimate=e.value,
                                 stderr_shots=e.stderr, stderr_frame=se_frame, stderr=se,
                                 error=abs(e.value - exact[name]),
                                 z=abs(e.value - exact[name]) / se if se > 0 else float("inf"),
                                 shots=e.shots, noise_source=source, theta=cfg.theta))
    return ExperimentResult(rows, bias_rows)


# --- fig5_sim: calibration + cross-validation split ----------------------------

def run_fig5_sim(cfg: ExperimentConfig) -> ExperimentResult:
    """Calibrate on the first 90% of one record set, estimate on the other 10%.

    Targets: the all-zero state fidelity and the single-qubit marginal
    ``|0><0|`` on qubit 0, with the calibrated and the noiseless inverse, for
    prefixes of the held-out shots given by ``shot_grid``. Extra tables hold
    one spectrum entry per Pauli support and raw histograms of those entries.
    """
    noise = base_noise(cfg)
    source = "config"
    rows, spectrum, hists = [], [], []
    for n in cfg.n:
        if noise.is_noiseless and not cfg.noise:
            noise_n = placeholder_device_noise(n, sub_seed(cfg.seed, "noise", n), two_qubit_p=0.02,
                                               readout=(0.02, 0.04))
            source = "placeholder"
        else:
            noise_n = noise
        topo = topology_for(cfg, n)
        obs_list = [Observable.fidelity(DenseState.zero(n), "zero_state_fidelity"),
                    Observable.pauli_sum([(0.5, "I" * n), (0.5, "Z" + "I" * (n - 1))])]
        obs_list[1].name = "qubit0_zero_projector"
        for D in cfg.depths:
            recs = run_acquisition(n, D, topo, noise_n, sub_seed(cfg.seed, "records", n, D), cfg.cal_shots)
            split = int(round(0.9 * len(recs)))
            cal, test = recs.subset(slice(0, split)), recs.subset(slice(split, None))
            fh = estimate_f(cal)
            f0 = noiseless_f(n, D, topo)
            fx = exact_f_tt_pauli_noise(n, D, noise_n, topo).to_dense()
            ks = [int("1" * s + "0" * (n - s), 2) for s in range(1, n + 1)]
            for s, k in enumerate(ks, start=1):
                spectrum.append(dict(n=n, depth=D, support=s, k=format(k, f"0{n}b"), f_hat=fh.values[k],
                                     stderr=fh.stderr[k], f_noiseless=f0.values[k], f_exact=fx[k],
                                     noise_source=source))
            samples, edges, counts = phi_histograms(cal, ks)
            for j, k in enumerate(ks):
                for b in range(counts.shape[1]):
                    hists.append(dict(n=n, depth=D, k=format(k, f"0{n}b"), bin_lo=edges[b],
                                      bin_hi=edges[b + 1], count=int(counts[j, b])))
            for m in cfg.shot_grid:
                if m > len(test):
                    continue
                part = test.subset(slice(0, m))
                for obs in obs_list:
                    ex = obs.exact_value(DenseState.zero(n))
                    em = estimate(obs, part, fh, allow_flagged=True)
                    eu = estimate(obs, part, f0)
                    rows.append(dict(n=n, depth=D, shots=m, observable=obs.name, exact=ex,
                                     mitigated=em.value, mitigated_se=em.stderr, unmitigated=eu.value,
                                     unmitigated_se=eu.stderr, err_mitigated=abs(em.value - ex),
                                     err_unmitigated=abs(eu.value - ex), noise_source=source))
    return ExperimentResult(rows, spectrum, {"histograms": hists})


DRIVERS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "fig2_top": run_fig2_top,
    "fig2_bottom": run_estimation_grid,
    "fig2_inset": run_estimation_grid,
    "fig3": run_fig3,
    "fig4_overlap": run_fig4_overlap,
    "fig5_sim": run_fig5_sim,
    "custom": run_estimation_grid,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run the driver for ``cfg.experiment``; write ``<id>.csv``, ``<id>_summary.csv`` and extras."""
    t0 = time.perf_counter()
    res = DRIVERS[cfg.experiment](cfg)
    res.seconds = time.perf_counter() - t0
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / f"{cfg.experiment}.csv", res.rows, cfg)
        write_table(out / f"{cfg.experiment}_summary.csv", res.summary, cfg)
        for name, rows in res.extra.items():
            write_table(out / f"{cfg.experiment}_{name}.csv", rows, cfg)
    return res
