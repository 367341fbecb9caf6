"""Pauli expectation estimates, ancilla-based overlaps and spectral estimation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .circuit import Circuit, Gate
from .errors import ObservableError, PlanError, SpectralRangeError
from .evolution import exact_unitary
from .pauli import PauliSum, PauliTerm
from .state import NoiseSpec, QuantumState, expectation, run, sample, spawn_seeds


@dataclass(frozen=True)
class Estimate:
    """A value with its one-sigma shot-noise error.

    For complex values the real and imaginary errors are packed into the
    real and imaginary parts of ``stderr``.
    """

    value: float | complex
    stderr: float | complex = 0.0

    def within(self, target, n_sigma: float = 3.0, floor: float = 1e-12) -> bool:
        d = complex(self.value) - complex(target)
        e = complex(self.stderr)
        return abs(d.real) <= n_sigma * e.real + floor and abs(d.imag) <= n_sigma * e.imag + floor


def proportion_stderr(p: float, shots: int) -> float:
    """Binomial standard error ``sqrt(p (1 - p) / N)`` of a sampled proportion."""
    return sqrt(max(p * (1 - p), 0.0) / shots)


def basis_change(p: PauliTerm) -> Circuit:
    """Rotations mapping the eigenbasis of ``p`` onto the computational basis."""
    circ = Circuit(p.n_qubits)
    for q in p.support:
        letter = p.letter(q)
        if letter == "X":
            circ.h(q)
        elif letter == "Y":
            circ.add("SDG", q)
            circ.h(q)
    return circ


def measure_pauli(state: QuantumState, p: PauliTerm, shots: int, seed=None,
                  noise: NoiseSpec | None = None) -> Estimate:
    """Sampled ``<p>`` with error ``2 sqrt(q (1 - q) / N)``, q the even-parity fraction."""
    if p.phase_exp != 0:
        raise ObservableError("measure_pauli expects a unit-phase Pauli string")
    if p.n_qubits != state.n_qubits:
        raise ObservableError("observable and state sizes differ")
    if p.is_identity():
        return Estimate(1.0, 0.0)
    rotated = run(basis_change(p), state)
    counts = sample(rotated, shots, noise=noise, seed=seed, qubits=p.support)
    even = sum(c for k, c in counts.items() if k.count("1") % 2 == 0)
    q = even / shots
    return Estimate(2 * q - 1, 2 * proportion_stderr(q, shots))


def _circuit_unitary(c: Circuit) -> np.ndarray:
    return c.to_unitary()


def _ancilla_readout(circ: Circuit, start: QuantumState, shots: int | None, seed) -> Estimate | complex:
    """``<X> + i<Y>`` of the top qubit after running ``circ``."""
    out = run(circ, start)
    a = circ.n_qubits - 1
    n = circ.n_qubits
    px = PauliTerm.from_sparse({a: "X"}, n)
    py = PauliTerm.from_sparse({a: "Y"}, n)
    if shots is None:
        return complex(expectation(out, px), expectation(out, py))
    sx, sy = spawn_seeds(seed, 2)
    ex = measure_pauli(out, px, shots, seed=sx)
    ey = measure_pauli(out, py, shots, seed=sy)
    return Estimate(complex(ex.value, ey.value), complex(ex.stderr, ey.stderr))


def _with_ancilla(psi: QuantumState) -> QuantumState:
    """Append an ancilla in ``|0>`` above the system qubits."""
    if psi.is_pure:
        data = np.concatenate([psi.data, np.zeros_like(psi.data)])
        return QuantumState(data, check=False)
    dim = psi.data.shape[0]
    rho = np.zeros((2 * dim, 2 * dim), dtype=complex)
    rho[:dim, :dim] = psi.data
    return QuantumState(rho, mixed=True, check=False)


def aux_overlap(u: Circuit, v: Circuit, psi: QuantumState, shots: int | None = None,
                seed=None) -> complex | Estimate:
    """``<psi| U^dag V |psi>`` from an ancilla prepared in ``|+>``.

    ``U`` is applied when the ancilla is ``|0>`` and ``V`` when it is ``|1>``.
    With ``shots=None`` the ancilla expectations are exact; otherwise an
    :class:`Estimate` is returned.
    """
    n = psi.n_qubits
    if u.n_qubits != n or v.n_qubits != n:
        raise PlanError("U and V must act on the state's qubits")
    anc = n
    sys_q = tuple(range(n))
    circ = Circuit(n + 1)
    circ.h(anc)
    circ.append(Gate("CU", (anc,) + sys_q, payload=_circuit_unitary(u), ctrl_state=0))
    circ.append(Gate("CU", (anc,) + sys_q, payload=_circuit_unitary(v), ctrl_state=1))
    return _ancilla_readout(circ, _with_ancilla(psi), shots, seed)


def correlation(a: Circuit, b: Circuit, h: PauliSum, t: float, psi: QuantumState,
                shots: int | None = None, seed=None) -> complex | Estimate:
    """``C_AB(t) = <psi| e^{iHt} A^dag e^{-iHt} B |psi>``.

    Ancilla-controlled B, free evolution of the system, then anti-controlled A.
    """
    n = psi.n_qubits
    if a.n_qubits != n or b.n_qubits != n or h.n_qubits != n:
        raise PlanError("A, B and H must act on the state's qubits")
    anc = n
    sys_q = tuple(range(n))
    circ = Circuit(n + 1)
    circ.h(anc)
    circ.append(Gate("CU", (anc,) + sys_q, payload=_circuit_unitary(b), ctrl_state=1))
    circ.append(Gate("UNITARY", sys_q, payload=exact_unitary(h, t)))
    circ.append(Gate("CU", (anc,) + sys_q, payload=_circuit_unitary(a), ctrl_state=0))
    return _ancilla_readout(circ, _with_ancilla(psi), shots, seed)


# ---------------------------------------------------------------- spectra


@dataclass
class SpectrumResult:
    grid: np.ndarray
    intensity: np.ndarray
    peaks: list[tuple[float, float]] = field(default_factory=list)

    def total_weight(self) -> float:
        return float(sum(w for _, w in self.peaks))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["energy", "intensity"])
        for e, i in zip(self.grid, self.intensity):
            w.writerow([repr(float(e)), repr(float(i))])
        return buf.getvalue()

    def peaks_json(self) -> str:
        return json.dumps([{"location": float(l), "weight": float(w)} for l, w in self.peaks], indent=2)


def _fit_weights(times: np.ndarray, g: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    basis = np.exp(-1j * np.outer(times, freqs))
    amp, *_ = np.linalg.lstsq(basis, g, rcond=None)
    return amp.real


def _refine_frequencies(times: np.ndarray, g: np.ndarray, freqs: np.ndarray, width: float) -> np.ndarray:
    """Variable-projection least squares on the peak energies, each kept
    within ``width`` of its starting point."""

    def resid(f):
        basis = np.exp(-1j * np.outer(times, f))
        amp, *_ = np.linalg.lstsq(basis, g, rcond=None)
        r = g - basis @ amp
        return np.concatenate([r.real, r.imag])

    lo, hi = freqs - width, freqs + width
    sol = least_squares(resid, freqs, bounds=(lo, hi), x_scale=width)
    return sol.x


def fft_spectrum(p: PauliSum, psi: QuantumState, t_max: float, n_samples: int,
                 threshold: float = 0.02, padding: int = 4, refine: bool = True) -> SpectrumResult:
    """Eigenvalues of ``p`` and their weights in ``psi`` from ``<e^{-iPt}>``.

    The signal is sampled at ``t_k = k t_max / n_samples`` with the ancilla
    overlap protocol, zero-padded and transformed. Local maxima of the
    normalized intensity above ``threshold`` are located by quadratic
    interpolation; their weights come from a least-squares fit of the signal,
    dropping candidates that fall below ``threshold``. With ``refine`` the
    surviving energies are then polished by a bounded nonlinear fit.
    """
    if n_samples < 2 or n_samples & (n_samples - 1):
        raise PlanError("n_samples must be a power of two")
    if t_max <= 0:
        raise PlanError("t_max must be positive")
    dt = t_max / n_samples
    radius = float(np.max(np.abs(np.linalg.eigvalsh(p.to_matrix()))))
    nyquist = pi / dt
    if radius >= nyquist:
        raise SpectralRangeError(
            f"spectral radius {radius:.4g} aliases at the Nyquist energy {nyquist:.4g}; "
            f"use n_samples > {radius * t_max / pi:.4g} or a shorter t_max")
    n = p.n_qubits
    ident = Circuit(n)
    times = np.arange(n_samples) * dt
    g = np.empty(n_samples, dtype=complex)
    for k, t in enumerate(times):
        v = Circuit(n).unitary(exact_unitary(p, t), range(n))
        g[k] = aux_overlap(ident, v, psi)

    n_pad = padding * n_samples
    spec = np.fft.fft(g, n_pad) / n_samples
    energies = -2 * pi * np.fft.fftfreq(n_pad, dt)
    order = np.argsort(energies)
    grid, amp = energies[order], spec[order]
    intensity = np.abs(amp)

    step = grid[1] - grid[0]
    cands = []
    for i in range(1, len(grid) - 1):
        y0, y1, y2 = intensity[i - 1], intensity[i], intensity[i + 1]
        if y1 >= threshold and y1 >= y0 and y1 > y2:
            den = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den else 0.0
            cands.append(grid[i] + shift * step)
    freqs = np.array(cands)
    weights = np.zeros(0)
    while freqs.size:
        weights = _fit_weights(times, g, freqs)
        keep = weights >= threshold
        if keep.all():
            break
        freqs = freqs[keep]
    if freqs.size and refine:
        freqs = _refine_frequencies(times, g, freqs, step)
        weights = _fit_weights(times, g, freqs)
    peaks = [(float(f), float(w)) for f, w in zip(freqs, weights)] if freqs.size else []
    return SpectrumResult(grid, intensity, sorted(peaks))


@dataclass(frozen=True)
class SpectroscopyPlan:
    omega_grid: tuple[float, ...]
    dt: float
    c: float
    n_steps: int
    probe_target: int = 0

    def __post_init__(self):
        object.__setattr__(self, "omega_grid", tuple(float(w) for w in self.omega_grid))
        if not self.omega_grid:
            raise PlanError("omega grid is empty")
        if self.n_steps < 1:
            raise PlanError("n_steps must be >= 1")
        if self.dt <= 0:
            raise PlanError("dt must be positive")


def spectroscopy_circuit(h: PauliSum, plan: SpectroscopyPlan, omega: float) -> Circuit:
    """Probe on qubit 0, system qubit ``i`` on ``i + 1``."""
    n = h.n_qubits
    if not 0 <= plan.probe_target < n:
        raise PlanError(f"probe target {plan.probe_target} outside the {n}-qubit system")
    sys_q = tuple(range(1, n + 1))
    u_sys = exact_unitary(h, plan.dt)
    circ = Circuit(n + 1)
    for _ in range(plan.n_steps):
        circ.rz(-omega * plan.dt, 0)
        circ.unitary(u_sys, sys_q)
        circ.rxx(2 * plan.c * plan.dt, 0, plan.probe_target + 1)
    return circ


def spectroscopy(h: PauliSum, plan: SpectroscopyPlan, psi0: QuantumState) -> np.ndarray:
    """``<Z>`` of the probe after the drive sequence, one value per ``omega``."""
    if psi0.n_qubits != h.n_qubits:
        raise PlanError("initial state and Hamiltonian sizes differ")
    start = psi0 if not psi0.is_pure else QuantumState(np.kron(psi0.data, [1, 0]), check=False)
    if not psi0.is_pure:
        start = QuantumState(np.kron(psi0.data, np.diag([1.0, 0.0])), mixed=True, check=False)
    z0 = PauliTerm.from_sparse({0: "Z"}, h.n_qubits + 1)
    return np.array([expectation(run(spectroscopy_circuit(h, plan, w), start), z0)
                     for w in plan.omega_grid])


__all__ = [
    "Estimate", "SpectroscopyPlan", "SpectrumResult", "aux_overlap", "basis_change",
    "correlation", "fft_spectrum", "measure_pauli", "proportion_stderr", "spectroscopy",
    "spectroscopy_circuit",
]
