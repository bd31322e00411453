"""Command-line entry point: ``shallow-shadows {acquire,calibrate,estimate,bias,experiment}``.

Configs are TOML or JSON; command-line flags override config values. Seeds
are mandatory and never taken from the clock.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .calibration import FrameSpectrum, estimate_f, noiseless_f, phi_histograms
from .circuits import Topology, block_brickwork, brickwork
from .estimation import FlaggedSectorError, Observable, estimate, worst_case_bias, worst_case_bias_by_support
from .experiments import ExperimentConfig, run_experiment
from .noise import NOISELESS, NoiseModel, load_config
from .pauli import DenseState
from .simulator import AcquisitionSpec, RecordSet, acquire, file_digest, random_stabilizer_state


def _config(args) -> dict:
    return load_config(args.config) if args.config else {}


def _topology(cfg: dict, n: int) -> Topology:
    topo = cfg.get("topology", "brickwork")
    if isinstance(topo, dict):
        if "sublayers" in topo:
            return Topology.from_dict(dict(topo, n=n))
        kind = topo.get("kind", "brickwork")
        if kind == "blocks":
            return block_brickwork(int(topo["blocks"]), int(topo["block_size"]))
        return brickwork(n, topo.get("boundary", "open"))
    return brickwork(n, cfg.get("boundary", "open"))


def _noise(value) -> NoiseModel:
    if not value:
        return NOISELESS
    if isinstance(value, str):
        if not Path(value).exists():
            raise FileNotFoundError(f"noise config {value} does not exist")
        return NoiseModel.load(value)
    return NoiseModel.from_dict(value)


def _state(spec, n: int, seed: int) -> tuple[Optional[DenseState], str]:
    """``zero``, ``haar``, ``stabilizer`` or ``{"amplitudes": {bitstring: amp}}``."""
    if spec in (None, "zero"):
        return None, "zero"
    if spec == "haar":
        return DenseState.haar(n, seed), "haar"
    if spec == "stabilizer":
        return random_stabilizer_state(n, seed), "stabilizer"
    if isinstance(spec, dict) and "amplitudes" in spec:
        v = np.zeros(2**n, dtype=complex)
        for bits, a in spec["amplitudes"].items():
            v[int(bits, 2)] = complex(*a) if isinstance(a, (list, tuple)) else a
        return DenseState(n, v / np.linalg.norm(v)), spec.get("name", "custom")
    raise ValueError(f"unknown input state {spec!r}")


def _require_seed(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise SystemExit("error: a seed is required (--seed or 'seed' in the config)")
    return int(seed)


def _out_dir(args, cfg: dict) -> Path:
    out = Path(args.out or cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands -----------------------------------------------------------------

def cmd_acquire(args) -> int:
    cfg = _config(args)
    seed = _require_seed(args, cfg)
    n, depth = int(cfg.get("n", 4)), int(cfg.get("depth", 0))
    shots = args.shots if args.shots is not None else int(cfg.get("shots", 0))
    state, tag = _state(cfg.get("input_state"), n, int(cfg.get("state_seed", seed)))
    spec = AcquisitionSpec(n, depth, cfg.get("ensemble", "clifford1q"), _topology(cfg, n), state, tag,
                           _noise(cfg.get("noise")), seed, shots)
    path = _out_dir(args, cfg) / cfg.get("records", "records.jsonl")
    acquire(spec, path=path)
    header = json.dumps(spec.header(), sort_keys=True).encode()
    print(f"records {path}")
    print(f"shots {shots}")
    print(f"header_digest {hashlib.sha256(header).hexdigest()}")
    print(f"file_digest {file_digest(path)}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    records = args.records or cfg.get("records")
    if not records:
        raise SystemExit("error: --records is required")
    rs = RecordSet.read_jsonl(records)
    mode = args.mode or cfg.get("mode", "dense")
    chi = args.chi if args.chi is not None else int(cfg.get("chi", 8))
    boot = int(cfg.get("bootstrap", 0))
    spec = estimate_f(rs, mode=mode, chi=chi, bootstrap=boot,
                      rng=_require_seed(args, cfg) if boot else 0)
    out = _out_dir(args, cfg)
    spec.to_csv(out / "spectrum.csv")
    print(f"spectrum {out / 'spectrum.csv'}")
    if mode == "tt":
        spec.to_tt_json(out / "spectrum_tt.json")
        print(f"spectrum_tt {out / 'spectrum_tt.json'} ranks {list(spec.tt.ranks)}")
    if args.histograms or cfg.get("histograms"):
        n = rs.n
        ks = [int("1" * s + "0" * (n - s), 2) for s in range(1, n + 1)]
        samples, edges, counts = phi_histograms(rs, ks)
        labels = [format(k, f"0{n}b") for k in ks]
        with open(out / "phi_samples.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["record"] + [f"phi_{b}" for b in labels])
            for i, row in enumerate(samples):
                w.writerow([i] + [repr(float(x)) for x in row])
        with open(out / "phi_histograms.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "bin_lo", "bin_hi", "count"])
            for j, b in enumerate(labels):
                for i in range(counts.shape[1]):
                    w.writerow([b, repr(float(edges[i])), repr(float(edges[i + 1])), int(counts[j, i])])
        print(f"histograms {out / 'phi_histograms.csv'}")
    return 0


def _observables(args, cfg: dict, n: int) -> list[Observable]:
    obs = []
    for text in (args.observable or cfg.get("observables", [])):
        obs.append(Observable.parse(text))
    target = args.target or cfg.get("target")
    if target:
        spec = load_config(target) if isinstance(target, str) and Path(target).exists() else target
        state, tag = _state(spec, n, int(cfg.get("state_seed", 0)))
        obs.append(Observable.fidelity(state if state is not None else DenseState.zero(n),
                                       f"fidelity_{tag}"))
    if not obs:
        raise SystemExit("error: give --observable and/or --target")
    return obs


def cmd_estimate(args) -> int:
    cfg = _config(args)
    records, frame = args.records or cfg.get("records"), args.frame or cfg.get("frame")
    if not records or not frame:
        raise SystemExit("error: --records and --frame are required")
    rs = RecordSet.read_jsonl(records)
    f = FrameSpectrum.load(frame)
    f0 = noiseless_f(rs.n, rs.depth, rs.topology)
    out = _out_dir(args, cfg)
    method = cfg.get("method", "mean")
    allow = bool(cfg.get("allow_flagged", args.allow_flagged))
    with open(out / "estimates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "mitigated", "mitigated_stderr", "unmitigated", "unmitigated_stderr",
                    "shots", "method"])
        for obs in _observables(args, cfg, rs.n):
            em = estimate(obs, rs, f, method=method, allow_flagged=allow)
            eu = estimate(obs, rs, f0, method=method)
            w.writerow([obs.name, repr(em.value), repr(em.stderr), repr(eu.value), repr(eu.stderr),
                        em.shots, method])
            print(f"{obs.name}: mitigated {em.value:.6f} +- {em.stderr:.6f}  "
                  f"unmitigated {eu.value:.6f} +- {eu.stderr:.6f}")
    print(f"estimates {out / 'estimates.csv'}")
    return 0


def cmd_bias(args) -> int:
    cfg = _config(args)
    frame = args.frame or cfg.get("frame")
    if not frame:
        raise SystemExit("error: --frame is required")
    f = FrameSpectrum.load(frame)
    ideal = args.ideal or cfg.get("ideal")
    if ideal:
        fi = FrameSpectrum.load(ideal)
    else:
        depth = args.depth if args.depth is not None else cfg.get("depth")
        if depth is None:
            raise SystemExit("error: give --ideal or --depth")
        fi = noiseless_f(f.n, int(depth), _topology(cfg, f.n))
    out = _out_dir(args, cfg)
    rows = [("worst_case", worst_case_bias(fi, f))]
    rows += [(f"support_{s}", worst_case_bias_by_support(fi, f, s)) for s in range(1, f.n + 1)]
    with open(out / "bias.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["measure", "bias"])
        for name, v in rows:
            w.writerow([name, repr(float(v))])
            print(f"{name} {v:.6g}")
    return 0


def cmd_experiment(args) -> int:
    if not args.config:
        raise SystemExit("error: --config is required")
    overrides = dict(seed=args.seed, out=args.out)
    if args.shots is not None:
        overrides["shots"] = args.shots
    if args.chi is not None:
        overrides["chi"] = [args.chi]
    cfg = ExperimentConfig.load(args.config, **overrides)
    print(f"experiment {cfg.experiment} config_digest {cfg.digest()} version {__version__}", flush=True)
    res = run_experiment(cfg)
    out = Path(cfg.out)
    for p in sorted(out.glob(f"{cfg.experiment}*.csv")):
        print(f"table {p} sha256 {file_digest(p)[:16]}")
    print(f"rows {len(res.rows)} seconds {res.seconds:.1f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shallow-shadows", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--shots", type=int, help="number of shots")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=("dense", "tt"), help="frame representation")
    common.add_argument("--chi", type=int, help="maximal TT rank")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("acquire", parents=[common], help="simulate shadow records")
    a.set_defaults(func=cmd_acquire)

    c = sub.add_parser("calibrate", parents=[common], help="estimate the frame spectrum")
    c.add_argument("--records", help="records JSONL file")
    c.add_argument("--histograms", action="store_true", help="also write per-record phi samples")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("estimate", parents=[common], help="mitigated and unmitigated estimates")
    e.add_argument("--records", help="records JSONL file")
    e.add_argument("--frame", help="spectrum CSV or TT JSON")
    e.add_argument("--observable", action="append", help="Pauli sum such as '0.5*XZI+ZZI'")
    e.add_argument("--target", help="'zero', or a JSON/TOML file with an amplitudes table")
    e.add_argument("--allow-flagged", action="store_true", help="invert flagged frame entries")
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bias", parents=[common], help="worst-case bias between two spectra")
    b.add_argument("--frame", help="noisy spectrum")
    b.add_argument("--ideal", help="ideal spectrum (default: exact noiseless spectrum)")
    b.add_argument("--depth", type=int, help="circuit depth for the default ideal spectrum")
    b.set_defaults(func=cmd_bias)

    x = sub.add_parser("experiment", parents=[common], help="run a scripted study")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (FlaggedSectorError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
