"""Statevector / density-matrix engine: circuits, noise channels, sampling.

Noise model: after every gate a depolarizing channel acts on that gate's
qubits with probability ``1 - f`` (``f`` the calibrated gate fidelity). When
T1/T2 are given, amplitude and phase damping for the gate duration follow on
the same qubits. Idle qubits do not decohere. Readout flips are classical and
only enter through :func:`sample`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._kernels import apply_gate, conjugate, conjugate_gate
from .circuit import Circuit, Gate, GateTimings, rzx_angle_fraction
from .errors import ChannelError, DimensionError, ObservableError, ResourceError
from .pauli import PauliSum, PauliTerm, apply_pauli

PURE_CAP = 20
MIXED_CAP = 10

Counts = dict[str, int]


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """Independent child streams, e.g. one per sweep point."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


class QuantumState:
    """Pure statevector or density matrix over ``n_qubits`` (little-endian)."""

    __slots__ = ("data", "mixed", "n_qubits")

    def __init__(self, data: np.ndarray, mixed: bool | None = None, check: bool = True):
        data = np.asarray(data, dtype=complex)
        if mixed is None:
            mixed = data.ndim == 2
        dim = data.shape[0]
        n = dim.bit_length() - 1
        if dim != 1 << n or (mixed and data.shape != (dim, dim)) or (not mixed and data.ndim != 1):
            raise DimensionError(f"bad state shape {data.shape}")
        if n > (MIXED_CAP if mixed else PURE_CAP):
            raise ResourceError(f"{'mixed' if mixed else 'pure'} states capped at "
                                f"{MIXED_CAP if mixed else PURE_CAP} qubits")
        self.data = data
        self.mixed = bool(mixed)
        self.n_qubits = n
        if check:
            if mixed:
                if abs(np.trace(data) - 1) > 1e-10:
                    raise ValueError("density matrix trace must be 1")
                if not np.allclose(data, data.conj().T, atol=1e-10):
                    raise ValueError("density matrix must be Hermitian")
            elif abs(np.vdot(data, data).real - 1) > 1e-10:
                raise ValueError("statevector must have unit norm")

    @classmethod
    def zero(cls, n: int, mixed: bool = False) -> "QuantumState":
        return cls.basis(0, n, mixed)

    @classmethod
    def basis(cls, index: int | str, n: int | None = None, mixed: bool = False) -> "QuantumState":
        """Basis state from an integer or a bitstring written MSB first."""
        if isinstance(index, str):
            n = len(index) if n is None else n
            index = int(index, 2) if index else 0
        if n is None:
            raise ValueError("n required for integer basis index")
        vec = np.zeros(1 << n, dtype=complex)
        vec[index] = 1
        st = cls(vec, check=False)
        return st.to_density() if mixed else st

    @property
    def is_pure(self) -> bool:
        return not self.mixed

    def to_density(self) -> "QuantumState":
        if self.mixed:
            return self
        return QuantumState(np.outer(self.data, self.data.conj()), mixed=True, check=False)

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.data) ** 2 if self.is_pure else np.real(np.diag(self.data)).copy()
        p = np.clip(p, 0, None)
        return p / p.sum()

    def norm(self) -> float:
        if self.is_pure:
            return float(np.linalg.norm(self.data))
        return float(np.real(np.trace(self.data)))

    def fidelity(self, other: "QuantumState") -> float:
        """``|<a|b>|^2`` for pure pairs, ``<a|rho|a>`` if one side is mixed."""
        if self.is_pure and other.is_pure:
            return float(abs(np.vdot(self.data, other.data)) ** 2)
        if self.is_pure:
            return float(np.real(self.data.conj() @ other.data @ self.data))
        if other.is_pure:
            return other.fidelity(self)
        raise NotImplementedError("mixed-mixed fidelity not needed")

    def validate(self, tol: float = 1e-9) -> None:
        if self.mixed:
            ev = np.linalg.eigvalsh((self.data + self.data.conj().T) / 2)
            if ev.min() < -tol:
                raise ValueError(f"density matrix has negative eigenvalue {ev.min():.3e}")

    def to_dict(self) -> dict:
        flat = self.data.reshape(-1)
        return {
            "endianness": "little",
            "n_qubits": self.n_qubits,
            "mode": "mixed" if self.mixed else "pure",
            "real": flat.real.tolist(),
            "imag": flat.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantumState":
        if d.get("endianness", "little") != "little":
            raise ValueError("only little-endian state exports are supported")
        flat = np.asarray(d["real"]) + 1j * np.asarray(d["imag"])
        if d["mode"] == "mixed":
            dim = 1 << d["n_qubits"]
            return cls(flat.reshape(dim, dim), mixed=True)
        return cls(flat)

    def __repr__(self) -> str:
        return f"QuantumState(n_qubits={self.n_qubits}, mode={'mixed' if self.mixed else 'pure'})"


def _per_qubit(value, q: int, default: float = 0.0) -> float:
    if value is None:
        return default
    if isinstance(value, Mapping):
        return float(value.get(q, default))
    if isinstance(value, (int, float)):
        return float(value)
    return float(value[q])


@dataclass
class NoiseSpec:
    """Calibration-style noise description for logical qubits.

    ``p1q`` / ``p2q`` are depolarizing probabilities (scalar or keyed by
    qubit / sorted qubit pair). ``readout[q] = (p(1|0), p(0|1))``. ``t1_us`` and
    ``t2_us`` enable amplitude and phase damping for each gate's duration.
    With ``scale_rzx`` an ``RZX(theta)`` gate carries error
    ``p2q * |theta| / (pi/2)``.
    """

    p1q: float | Mapping[int, float] = 0.0
    p2q: float | Mapping[tuple[int, int], float] = 0.0
    readout: Sequence[tuple[float, float]] | Mapping[int, tuple[float, float]] | None = None
    t1_us: float | Sequence[float] | Mapping[int, float] | None = None
    t2_us: float | Sequence[float] | Mapping[int, float] | None = None
    timings: GateTimings = field(default_factory=GateTimings)
    scale_rzx: bool = True

    def __post_init__(self):
        for name in ("p1q", "p2q"):
            v = getattr(self, name)
            vals = v.values() if isinstance(v, Mapping) else [v]
            for p in vals:
                if not 0 <= p <= 1:
                    raise ChannelError(f"{name} probability {p} outside [0, 1]")
        if self.readout is not None:
            items = self.readout.values() if isinstance(self.readout, Mapping) else self.readout
            for pair in items:
                if not all(0 <= p <= 1 for p in pair):
                    raise ChannelError(f"readout flip probabilities {pair} outside [0, 1]")

    def readout_flips(self, q: int) -> tuple[float, float]:
        if self.readout is None:
            return (0.0, 0.0)
        if isinstance(self.readout, Mapping):
            return tuple(self.readout.get(q, (0.0, 0.0)))
        return tuple(self.readout[q])

    def has_readout_error(self) -> bool:
        if self.readout is None:
            return False
        items = self.readout.values() if isinstance(self.readout, Mapping) else self.readout
        return any(p > 0 for pair in items for p in pair)

    def gate_error(self, gate: Gate) -> float:
        k = gate.num_qubits
        if k == 0:
            return 0.0
        if k == 1:
            return _per_qubit(self.p1q, gate.qubits[0])
        if isinstance(self.p2q, Mapping):
            key = tuple(sorted(gate.qubits[:2]))
            p = float(self.p2q.get(key, 0.0))
        else:
            p = float(self.p2q)
        if gate.name == "RZX" and self.scale_rzx:
            p = min(1.0, p * rzx_angle_fraction(gate.theta))
        return p

    def relaxation(self, q: int) -> tuple[float | None, float | None]:
        t1 = None if self.t1_us is None else _per_qubit(self.t1_us, q)
        t2 = None if self.t2_us is None else _per_qubit(self.t2_us, q)
        if t1 is not None and t2 is not None and t2 > 2 * t1 + 1e-12:
            raise ChannelError(f"qubit {q}: T2={t2} exceeds 2*T1={2 * t1}")
        return t1, t2


def damping_parameters(duration_ns: float, t1_us: float | None, t2_us: float | None) -> tuple[float, float]:
    """Amplitude-damping ``gamma`` and phase-damping ``lambda`` for one interval.

    ``gamma = 1 - exp(-d/T1)``; the pure-dephasing part makes the total
    coherence decay ``exp(-d/T2)``.
    """
    d = duration_ns * 1e-3
    gamma = 0.0 if not t1_us else 1 - np.exp(-d / t1_us)
    lam = 0.0
    if t2_us:
        rate = 1 / t2_us - (0.5 / t1_us if t1_us else 0.0)
        if rate > 0:
            lam = 1 - np.exp(-2 * d * rate)
    return float(gamma), float(lam)


_PAULI_1Q = ("I", "X", "Y", "Z")


def _depolarize(rho: np.ndarray, p: float, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    acc = np.zeros_like(rho)
    for idx in range(4 ** k):
        ops = {}
        for j, q in enumerate(qubits):
            letter = _PAULI_1Q[(idx >> (2 * j)) & 3]
            if letter != "I":
                ops[q] = letter
        if not ops:
            acc += rho
            continue
        pt = PauliTerm.from_sparse(ops, n)
        a = apply_pauli(pt, rho)
        acc += apply_pauli(pt, a.conj().T).conj().T
    return (1 - p) * rho + p * acc / 4 ** k


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)]


def phase_damping_kraus(lam: float) -> list[np.ndarray]:
    return [np.array([[1, 0], [0, np.sqrt(1 - lam)]], dtype=complex),
            np.array([[0, 0], [0, np.sqrt(lam)]], dtype=complex)]


def _kraus(rho: np.ndarray, ops: list[np.ndarray], q: int, n: int) -> np.ndarray:
    return sum(conjugate(rho, k, (q,), n) for k in ops)


def apply_channel(state: QuantumState, channel: str, param: float, qubits: Sequence[int]) -> QuantumState:
    """Apply ``depolarizing`` (jointly on ``qubits``), ``amplitude_damping`` or
    ``phase_damping`` (independently per qubit) to a state, promoting to mixed."""
    if not 0 <= param <= 1:
        raise ChannelError(f"channel parameter {param} outside [0, 1]")
    st = state.to_density()
    n = st.n_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise DimensionError(f"qubit {q} out of range")
    rho = st.data
    channel = channel.replace("-", "_").lower()
    if channel == "depolarizing":
        rho = _depolarize(rho, param, tuple(qubits), n)
    elif channel == "amplitude_damping":
        for q in qubits:
            rho = _kraus(rho, amplitude_damping_kraus(param), q, n)
    elif channel == "phase_damping":
        for q in qubits:
            rho = _kraus(rho, phase_damping_kraus(param), q, n)
    else:
        raise ChannelError(f"unknown channel {channel!r}")
    return QuantumState(rho, mixed=True, check=False)


def run(circuit: Circuit, initial: QuantumState | None = None, noise: NoiseSpec | None = None,
        seed: int | None = 0) -> QuantumState:
    """Execute ``circuit`` on ``initial`` (default ``|0...0>``).

    The density-matrix path is deterministic; ``seed`` is accepted so callers
    can treat every engine entry point uniformly.
    """
    n = circuit.n_qubits
    if initial is None:
        initial = QuantumState.zero(n)
    if initial.n_qubits != n:
        raise DimensionError(f"circuit has {n} qubits, state has {initial.n_qubits}")
    if noise is None:
        data = initial.data
        if initial.is_pure:
            for g in circuit.ops:
                data = apply_gate(data, g, n)
        else:
            for g in circuit.ops:
                data = conjugate_gate(data, g, n)
        return QuantumState(data, mixed=initial.mixed, check=False)

    rho = initial.to_density().data
    for g in circuit.ops:
        rho = conjugate_gate(rho, g, n)
        if not g.qubits:
            continue
        p = noise.gate_error(g)
        if p > 0:
            rho = _depolarize(rho, p, g.qubits, n)
        if noise.t1_us is not None or noise.t2_us is not None:
            dur = noise.timings.duration(g)
            for q in g.qubits:
                gamma, lam = damping_parameters(dur, *noise.relaxation(q))
                if gamma > 0:
                    rho = _kraus(rho, amplitude_damping_kraus(gamma), q, n)
                if lam > 0:
                    rho = _kraus(rho, phase_damping_kraus(lam), q, n)
    return QuantumState(rho, mixed=True, check=False)


def expectation(state: QuantumState, obs: PauliSum | PauliTerm) -> float:
    if isinstance(obs, PauliTerm):
        obs = PauliSum([(1.0, obs)], obs.n_qubits)
    if obs.n_qubits != state.n_qubits:
        raise DimensionError("observable and state sizes differ")
    obs = obs.normalized()
    if not obs.is_hermitian(1e-10):
        raise ObservableError("observable must be Hermitian")
    total = 0j
    for c, p in obs:
        if state.is_pure:
            total += c * np.vdot(state.data, apply_pauli(p, state.data))
        else:
            total += c * np.trace(apply_pauli(p, state.data))
    return float(total.real)


def format_bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n else ""


def sample(state: QuantumState, shots: int, noise: NoiseSpec | None = None, seed=None,
           qubits: Sequence[int] | None = None) -> Counts:
    """Draw measurement outcomes in the computational basis.

    Readout flips from ``noise`` are applied to each shot bit by bit.
    ``qubits`` restricts the readout; the returned bitstrings list the
    highest of those qubits first.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = make_rng(seed)
    n = state.n_qubits
    probs = state.probabilities()
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    if noise is not None and noise.has_readout_error():
        for q in range(n):
            p10, p01 = noise.readout_flips(q)
            if p10 == 0 and p01 == 0:
                continue
            bit = (outcomes >> q) & 1
            flip_p = np.where(bit == 1, p01, p10)
            flips = rng.random(shots) < flip_p
            outcomes = outcomes ^ (flips.astype(np.int64) << q)
    if qubits is not None:
        qs = sorted(qubits)
        compact = np.zeros_like(outcomes)
        for j, q in enumerate(qs):
            compact |= ((outcomes >> q) & 1) << j
        outcomes, n = compact, len(qs)
    vals, cnt = np.unique(outcomes, return_counts=True)
    return {format_bitstring(int(v), n): int(c) for v, c in zip(vals, cnt)}


def counts_to_probabilities(counts: Counts, n: int | None = None) -> np.ndarray:
    if n is None:
        n = len(next(iter(counts)))
    vec = np.zeros(1 << n)
    for k, v in counts.items():
        vec[int(k, 2)] += v
    total = vec.sum()
    return vec / total if total else vec


__all__ = [
    "Counts", "NoiseSpec", "QuantumState", "apply_channel", "counts_to_probabilities",
    "damping_parameters", "expectation", "make_rng", "run", "sample", "spawn_seeds",
]
