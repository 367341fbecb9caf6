"""Command-line driver for the batch studies.

Every subcommand reads an optional JSON config, applies flag overrides,
writes its outputs atomically (``<name>.partial`` then rename) and stamps
them with the package version, a config hash and the seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from math import pi
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .device import (PIPELINES, DeviceModel, build_pipeline, enumerate_chain_layouts,
                     estimate_duration, estimate_fidelity, score_layout)
from .errors import QsimError
from .evolution import LCUPlan, TrotterPlan, exact_evolve, lcu_decomposition, lcu_evolve, trotter_circuit
from .fermion import TightBindingSpec, number_operator, tight_binding_pauli, total_number
from .measurement import SpectroscopyPlan, fft_spectrum, spectroscopy
from .mitigation import calibrate, mitigate, postselect
from .pauli import PauliSum, parse_pauli_sum
from .prep import SlaterSpec, basis_excitation, ghz, slater_circuit, slater_state
from .state import QuantumState, counts_to_probabilities, expectation, run, sample, spawn_seeds

COMMANDS = ("trotter-sweep", "fidelity-report", "layout", "ghz-mitigate", "spectrum",
            "spectroscopy", "slater-prep", "lcu-evolve")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """All experiment settings; unused fields are ignored by a given command."""

    experiment: str = ""
    # model
    n_sites: int = 5
    tau: float = 1.0
    tau_d: float = 0.6
    defect_bond: list[int] = field(default_factory=lambda: [2, 3])
    initial: str = "00001"
    hamiltonian: str | None = None  # Pauli-sum text file overriding the lattice model
    # evolution
    t_min: float = 0.0
    t_max: float = 4 * pi
    n_times: int = 100
    steps: list[int] = field(default_factory=lambda: [5, 8])
    order: int = 1
    # execution
    shots: int = 10000
    seed: int = 1234
    workers: int = 1
    noise: bool = False
    confusion: bool = False
    postselection: bool = False
    calibration_shots: int = 10000
    device: str | None = None
    out: str = "results"
    # fidelity report / layout
    m_values: list[int] = field(default_factory=lambda: list(range(1, 11)))
    report_time: float = 1.0
    layout_steps: int = 1
    # GHZ
    ghz_qubits: int = 5
    n_particles: int = 1
    # spectra
    spectrum_t_max: float = 50.0
    spectrum_samples: int = 256
    spectrum_threshold: float = 0.02
    omega_min: float = -3.0
    omega_max: float = 3.0
    omega_points: int = 121
    probe_dt: float = 0.5
    probe_coupling: float = 0.0785
    probe_steps: int = 40
    probe_target: int = 0
    # state prep / LCU
    slater_file: str | None = None
    lcu_order: int = 6
    lcu_time: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if self.shots < 1:
            raise UsageError("shots must be >= 1")
        if self.n_times < 1 or not self.steps or not self.m_values:
            raise UsageError("time grid, steps and m_values must be nonempty")
        if any(m < 1 for m in self.steps) or any(m < 0 for m in self.m_values):
            raise UsageError("Trotter steps must be positive")
        if self.omega_points < 1:
            raise UsageError("omega grid is empty")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        for name in ("device", "hamiltonian", "slater_file"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise UsageError(f"{name} file {path!r} does not exist")

    def config_hash(self) -> str:
        # output location and pool size do not change results
        d = {k: v for k, v in asdict(self).items() if k not in ("out", "workers")}
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def meta(self) -> dict:
        return {"version": __version__, "config_hash": self.config_hash(), "seed": self.seed,
                "experiment": self.experiment}

    # model helpers
    def lattice(self) -> TightBindingSpec:
        bond = tuple(self.defect_bond) if self.defect_bond else None
        return TightBindingSpec(self.n_sites, self.tau, self.tau_d, bond)

    def hamiltonian_sum(self) -> PauliSum:
        if self.hamiltonian:
            return parse_pauli_sum(Path(self.hamiltonian).read_text())
        return tight_binding_pauli(self.lattice())

    def initial_state(self, n: int) -> QuantumState:
        bits = self.initial.strip()
        if len(bits) != n:
            raise UsageError(f"initial state {bits!r} does not have {n} bits")
        return run(basis_excitation(bits))

    def time_grid(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_times)


# ---------------------------------------------------------------- output helpers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path: Path, cfg: RunConfig, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    m = cfg.meta()
    buf.write(f"# qsimlab {m['version']} config_hash={m['config_hash']} seed={m['seed']} "
              f"experiment={m['experiment']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _atomic_write(path, buf.getvalue())


def write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    _atomic_write(path, json.dumps({"meta": cfg.meta(), **payload}, indent=2, sort_keys=True) + "\n")


def _pmap(fn: Callable, items: list, workers: int) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _device(cfg: RunConfig) -> DeviceModel:
    return DeviceModel.load(cfg.device)


def _best_layout(dev: DeviceModel, circuit) -> tuple[int, ...]:
    scores = [score_layout(dev, lay, circuit) for lay in enumerate_chain_layouts(dev, circuit.n_qubits)]
    if not scores:
        raise UsageError(f"device has no {circuit.n_qubits}-qubit chain")
    return min(scores, key=lambda s: (s.score, s.layout)).layout


# ---------------------------------------------------------------- trotter sweep


def _sweep_point(args) -> list[tuple]:
    cfg, m, t, seed = args
    h = cfg.hamiltonian_sum()
    n = h.n_qubits
    psi0 = cfg.initial_state(n)
    exact = exact_evolve(h, t, psi0)
    circ = trotter_circuit(h, TrotterPlan(cfg.order, m, t))
    exact_occ = [expectation(exact, number_operator(i, n)) for i in range(n)]
    if not cfg.noise:
        st = run(circ, psi0)
        occ = [expectation(st, number_operator(i, n)) for i in range(n)]
    else:
        dev = _device(cfg)
        lowered = build_pipeline(h, TrotterPlan(cfg.order, m, t), "rzx")
        prep = basis_excitation(cfg.initial).compose(lowered)
        noise = dev.noise_spec(_best_layout(dev, prep))
        s_run, s_cal = spawn_seeds(seed, 2)
        counts = sample(run(prep, noise=noise), cfg.shots, noise=noise, seed=s_run)
        if cfg.confusion:
            cm = calibrate(noise, n, cfg.calibration_shots, mode="tensor", seed=s_cal)
            probs = mitigate(cm, counts).renormalized
        else:
            probs = counts_to_probabilities(counts, n)
        idx = np.arange(1 << n)
        if cfg.postselection:
            # drop strings that changed the particle number, after undoing readout errors
            weight = np.array([bin(i).count("1") for i in idx])
            kept = np.where(weight == cfg.initial.count("1"), probs, 0.0)
            if kept.sum() > 0:
                probs = kept / kept.sum()
        occ = [float(probs[(idx >> i) & 1 == 1].sum()) for i in range(n)]
    return [(t, m, cfg.order, i, occ[i], exact_occ[i], abs(occ[i] - exact_occ[i])) for i in range(n)]


def cmd_trotter_sweep(cfg: RunConfig) -> list[Path]:
    grid = cfg.time_grid()
    seeds = spawn_seeds(cfg.seed, len(cfg.steps) * len(grid))
    jobs = [(cfg, m, float(t), seeds[k * len(grid) + j])
            for k, m in enumerate(cfg.steps) for j, t in enumerate(grid)]
    rows = [r for chunk in _pmap(_sweep_point, jobs, cfg.workers) for r in chunk]
    path = Path(cfg.out) / "trotter_sweep.csv"
    write_csv(path, cfg, ("t", "m", "order", "site", "value", "exact_value", "abs_error"), rows)
    return [path]


# ---------------------------------------------------------------- fidelity / layout


def cmd_fidelity_report(cfg: RunConfig) -> list[Path]:
    dev = _device(cfg)
    h = cfg.hamiltonian_sum()
    ref = build_pipeline(h, TrotterPlan(1, max(1, max(cfg.m_values)), cfg.report_time), "transpiled")
    layout = _best_layout(dev, ref)
    f1, f2 = dev.mean_fidelities(layout)
    rows = []
    for m in cfg.m_values:
        for kind in PIPELINES:
            if m == 0:
                rows.append((m, kind, 0, 0, 1.0, 0.0))
                continue
            c = build_pipeline(h, TrotterPlan(cfg.order, m, cfg.report_time), kind)
            n1, n2 = c.gate_counts()
            fid = estimate_fidelity(c, f1, f2, scale_rzx=(kind == "rzx"))
            rows.append((m, kind, n1, n2, fid, estimate_duration(c, dev, layout)))
    path = Path(cfg.out) / "fidelity_report.csv"
    write_csv(path, cfg, ("m", "pipeline", "N1Q", "N2Q", "est_fidelity", "est_duration_ns"), rows)
    return [path]


def cmd_layout(cfg: RunConfig) -> list[Path]:
    dev = _device(cfg)
    h = cfg.hamiltonian_sum()
    circ = build_pipeline(h, TrotterPlan(cfg.order, cfg.layout_steps, cfg.report_time), "transpiled")
    circ.measure()
    scores = [score_layout(dev, lay, circ) for lay in enumerate_chain_layouts(dev, h.n_qubits)]
    ranked = sorted(scores, key=lambda s: (s.score, s.layout))
    rows = [(rank, "-".join(map(str, s.layout)), s.score) for rank, s in enumerate(ranked, 1)]
    path = Path(cfg.out) / "layouts.csv"
    write_csv(path, cfg, ("rank", "layout", "score"), rows)
    return [path]


# ---------------------------------------------------------------- GHZ mitigation


def cmd_ghz_mitigate(cfg: RunConfig) -> list[Path]:
    n = cfg.ghz_qubits
    dev = _device(cfg)
    circ = ghz(n)
    layout = _best_layout(dev, circ) if n > 1 else (0,)
    noise = dev.noise_spec(layout) if cfg.noise else None
    s_run, s_cal = spawn_seeds(cfg.seed, 2)
    counts = sample(run(circ, noise=noise), cfg.shots, noise=noise, seed=s_run)
    zeros, ones = "0" * n, "1" * n
    raw = {k: counts.get(k, 0) / cfg.shots for k in (zeros, ones)}
    raw_err = {k: float(np.sqrt(p * (1 - p) / cfg.shots)) for k, p in raw.items()}
    report = {"layout": list(layout), "shots": cfg.shots, "raw": raw, "raw_stderr": raw_err}
    if cfg.confusion:
        cm = calibrate(noise, n, cfg.calibration_shots, mode="full" if n <= 8 else "tensor", seed=s_cal)
        res = mitigate(cm, counts)
        report["mitigated"] = {zeros: float(res.probabilities[0]), ones: float(res.probabilities[-1])}
        report["mitigated_stderr"] = {zeros: float(res.stderr[0]), ones: float(res.stderr[-1])}
        report["condition_number"] = res.condition_number
    if cfg.postselection:
        ps = postselect(counts, cfg.n_particles)
        report["postselection"] = {"n_particles": cfg.n_particles,
                                   "retained_fraction": ps.retained_fraction, "empty": ps.empty,
                                   "retained_shots": sum(ps.counts.values())}
    path = Path(cfg.out) / "ghz_report.json"
    write_json(path, cfg, report)
    return [path]


# ---------------------------------------------------------------- spectra


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    h = cfg.hamiltonian_sum()
    psi = cfg.initial_state(h.n_qubits)
    res = fft_spectrum(h, psi, cfg.spectrum_t_max, cfg.spectrum_samples, cfg.spectrum_threshold)
    out = Path(cfg.out)
    write_csv(out / "spectrum.csv", cfg, ("energy", "intensity"), list(zip(res.grid, res.intensity)))
    write_json(out / "peaks.json", cfg,
               {"peaks": [{"location": l, "weight": w} for l, w in res.peaks]})
    return [out / "spectrum.csv", out / "peaks.json"]


def _spectroscopy_chunk(args) -> list[float]:
    cfg, omegas = args
    h = cfg.hamiltonian_sum()
    plan = SpectroscopyPlan(omegas, cfg.probe_dt, cfg.probe_coupling, cfg.probe_steps, cfg.probe_target)
    return list(spectroscopy(h, plan, cfg.initial_state(h.n_qubits)))


def cmd_spectroscopy(cfg: RunConfig) -> list[Path]:
    grid = np.linspace(cfg.omega_min, cfg.omega_max, cfg.omega_points)
    chunks = [tuple(c) for c in np.array_split(grid, min(cfg.workers, grid.size)) if c.size]
    z = [v for part in _pmap(_spectroscopy_chunk, [(cfg, c) for c in chunks], cfg.workers) for v in part]
    path = Path(cfg.out) / "spectroscopy.csv"
    write_csv(path, cfg, ("omega", "probe_z"), list(zip(grid, z)))
    return [path]


# ---------------------------------------------------------------- state prep / LCU


def cmd_slater_prep(cfg: RunConfig) -> list[Path]:
    if cfg.slater_file:
        spec = SlaterSpec.load(cfg.slater_file)
    else:
        # lowest single-particle orbitals of the lattice model
        _, vecs = np.linalg.eigh(cfg.lattice().single_particle_matrix())
        spec = SlaterSpec(vecs[:, : cfg.n_particles].T)
    circ = slater_circuit(spec)
    st = run(circ)
    ref = slater_state(spec)
    ref = ref / np.linalg.norm(ref)
    n = spec.n_orbitals
    number = total_number(n)
    mean = expectation(st, number)
    var = expectation(st, (number * number).normalized()) - mean ** 2
    report = {
        "n_particles": spec.n_particles, "n_orbitals": n,
        "overlap": float(abs(np.vdot(ref, st.data)) ** 2),
        "givens_rotations": circ.count_ops().get("CU", 0),
        "gate_counts": circ.count_ops(),
        "particle_number": {"mean": mean, "variance": var},
    }
    path = Path(cfg.out) / "slater_prep.json"
    write_json(path, cfg, report)
    return [path]


def cmd_lcu_evolve(cfg: RunConfig) -> list[Path]:
    h = cfg.hamiltonian_sum()
    psi = cfg.initial_state(h.n_qubits)
    plan = LCUPlan(cfg.lcu_order, cfg.lcu_time)
    out, prob = lcu_evolve(h, plan, psi)
    dec = lcu_decomposition(h, plan)
    exact = exact_evolve(h, cfg.lcu_time, psi)
    report = {
        "order": plan.order, "time": plan.time, "s": dec.s, "n_ancilla": dec.n_ancilla,
        "n_unitaries": len(dec.alphas), "success_probability": prob,
        "inverse_s_squared": 1 / dec.s ** 2, "fidelity": out.fidelity(exact),
    }
    path = Path(cfg.out) / "lcu_evolve.json"
    write_json(path, cfg, report)
    return [path]


HANDLERS = {
    "trotter-sweep": cmd_trotter_sweep,
    "fidelity-report": cmd_fidelity_report,
    "layout": cmd_layout,
    "ghz-mitigate": cmd_ghz_mitigate,
    "spectrum": cmd_spectrum,
    "spectroscopy": cmd_spectroscopy,
    "slater-prep": cmd_slater_prep,
    "lcu-evolve": cmd_lcu_evolve,
}


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsimlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsimlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--shots", type=int)
        p.add_argument("--device", help="device calibration JSON (default: bundled model)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="override any config field, e.g. --set 'steps=[8]'")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {args.config!r} does not exist")
        data = json.loads(path.read_text())
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            data[key] = json.loads(val)
        except json.JSONDecodeError:
            data[key] = val
    for key in ("seed", "shots", "device", "out", "workers"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    data["experiment"] = args.command
    cfg = RunConfig.from_dict(data)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        paths = HANDLERS[args.command](cfg)
    except (QsimError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"qsimlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
