"""Gate and circuit containers plus dense gate matrices.

Gate matrices use the local little-endian convention: for a gate on
``qubits = (q0, q1, ...)`` the local basis index is ``b(q0) + 2 b(q1) + ...``.
Hence ``RZX`` on ``(a, b)`` is ``exp(-i theta/2 Z_a X_b)``: Z on the first
listed qubit, X on the second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import pi
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ResourceError
from .pauli import PauliTerm, dense_matrix

_SQ2 = 1 / np.sqrt(2)

FIXED_1Q = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "SX": np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2,
    "SXDG": np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]], dtype=complex) / 2,
}
PARAM_1Q = {"RX", "RY", "RZ", "U3"}
FIXED_2Q = {
    "CX": np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
# two-qubit Pauli rotations: label is MSB-first over (qubits[1], qubits[0])
ROTATION_2Q = {"RXX": "XX", "RYY": "YY", "RZZ": "ZZ", "RZX": "XZ"}
MULTI = {"PAULIROT", "UNITARY", "CU", "GPHASE"}

_SELF_INVERSE = {"I", "H", "X", "Y", "Z", "CX", "CZ"}
_INVERSE_NAME = {"S": "SDG", "SDG": "S", "SX": "SXDG", "SXDG": "SX"}


@lru_cache(maxsize=64)
def _pauli_dense(label: str) -> np.ndarray:
    return dense_matrix(PauliTerm.from_label(label))


def pauli_rotation(label: str, theta: float) -> np.ndarray:
    """``exp(-i theta/2 P)`` for a Pauli label (MSB first)."""
    p = _pauli_dense(label)
    return np.cos(theta / 2) * np.eye(p.shape[0]) - 1j * np.sin(theta / 2) * p


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    """ZYZ Euler rotation ``RZ(phi) RY(theta) RZ(lam)``."""
    return rz(phi) @ ry(theta) @ rz(lam)


def wrap_angle(theta: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    w = (theta + pi) % (2 * pi) - pi
    return pi if w == -pi else w


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    payload: np.ndarray | None = None
    label: str | None = None
    # CU only: value of the control register (controls[0] is its LSB)
    ctrl_state: int = 1

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.upper())
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(set(self.qubits)) != len(self.qubits):
            raise DimensionError(f"{self.name}: repeated qubit in {self.qubits}")
        name, k = self.name, len(self.qubits)
        expected = None
        if name in FIXED_1Q or name in PARAM_1Q:
            expected = 1
        elif name in FIXED_2Q or name in ROTATION_2Q:
            expected = 2
        elif name == "GPHASE":
            expected = 0
        elif name not in MULTI:
            raise ValueError(f"unknown gate {name!r}")
        if expected is not None and k != expected:
            raise DimensionError(f"{name} acts on {expected} qubit(s), got {k}")
        if name in ("UNITARY", "CU"):
            if self.payload is None:
                raise ValueError(f"{name} needs a matrix payload")
            m = np.asarray(self.payload, dtype=complex)
            object.__setattr__(self, "payload", m)
            nt = m.shape[0].bit_length() - 1
            if m.shape != (1 << nt, 1 << nt) or (name == "UNITARY" and nt != k) or (name == "CU" and not 0 < nt < k):
                raise DimensionError(f"{name} payload shape {m.shape} does not fit {nt} qubit(s)")
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
                raise ValueError(f"{name} payload is not unitary within 1e-10")
        if name == "PAULIROT" and (self.label is None or len(self.label) != k):
            raise ValueError("PAULIROT needs a label with one letter per qubit")

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def num_controls(self) -> int:
        """Control count of a ``CU`` gate: the qubits not covered by the payload."""
        if self.name != "CU":
            return 0
        return self.num_qubits - (self.payload.shape[0].bit_length() - 1)

    @property
    def controls(self) -> tuple[int, ...]:
        return self.qubits[: self.num_controls]

    @property
    def targets(self) -> tuple[int, ...]:
        return self.qubits[self.num_controls:]

    @property
    def theta(self) -> float:
        return self.params[0]

    def matrix(self) -> np.ndarray:
        name = self.name
        if name in FIXED_1Q:
            return FIXED_1Q[name]
        if name in FIXED_2Q:
            return FIXED_2Q[name]
        if name == "RX":
            return rx(self.params[0])
        if name == "RY":
            return ry(self.params[0])
        if name == "RZ":
            return rz(self.params[0])
        if name == "U3":
            return u3(*self.params)
        if name in ROTATION_2Q:
            return pauli_rotation(ROTATION_2Q[name], self.params[0])
        if name == "PAULIROT":
            return pauli_rotation(self.label, self.params[0])
        if name == "UNITARY":
            return self.payload
        if name == "CU":
            m = self.payload
            sel = np.zeros((1 << self.num_controls,) * 2)
            sel[self.ctrl_state, self.ctrl_state] = 1
            return np.kron(m, sel) + np.kron(np.eye(m.shape[0]), np.eye(sel.shape[0]) - sel)
        if name == "GPHASE":
            return np.array([[np.exp(1j * self.params[0])]])
        raise ValueError(name)

    def inverse(self) -> "Gate":
        n = self.name
        if n in _SELF_INVERSE:
            return self
        if n in _INVERSE_NAME:
            return Gate(_INVERSE_NAME[n], self.qubits)
        if n == "U3":
            t, p, l = self.params
            return Gate("U3", self.qubits, (-t, -l, -p))
        if n in ("UNITARY", "CU"):
            return Gate(n, self.qubits, payload=self.payload.conj().T, ctrl_state=self.ctrl_state)
        return Gate(n, self.qubits, tuple(-p for p in self.params), label=self.label)

    def remapped(self, mapping: Sequence[int] | dict[int, int]) -> "Gate":
        return Gate(self.name, tuple(mapping[q] for q in self.qubits), self.params,
                    self.payload, self.label, self.ctrl_state)

    def __repr__(self) -> str:
        ps = "(" + ", ".join(f"{p:.4g}" for p in self.params) + ")" if self.params else ""
        lab = f"[{self.label}]" if self.label else ""
        return f"{self.name}{lab}{ps}@{list(self.qubits)}"


@dataclass
class Circuit:
    n_qubits: int
    ops: list[Gate] = field(default_factory=list)
    measured_qubits: list[int] = field(default_factory=list)

    def append(self, gate: Gate) -> "Circuit":
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise DimensionError(f"{gate.name} qubit {q} out of range for {self.n_qubits} qubits")
        self.ops.append(gate)
        return self

    def add(self, name: str, *qubits: int, params: Iterable[float] = (), **kw) -> "Circuit":
        return self.append(Gate(name, tuple(qubits), tuple(params), **kw))

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    # builder shorthands used throughout the package
    def h(self, q): return self.add("H", q)
    def x(self, q): return self.add("X", q)
    def rz(self, theta, q): return self.add("RZ", q, params=(theta,))
    def ry(self, theta, q): return self.add("RY", q, params=(theta,))
    def rx(self, theta, q): return self.add("RX", q, params=(theta,))
    def cx(self, c, t): return self.add("CX", c, t)
    def rxx(self, theta, a, b): return self.add("RXX", a, b, params=(theta,))
    def ryy(self, theta, a, b): return self.add("RYY", a, b, params=(theta,))
    def rzz(self, theta, a, b): return self.add("RZZ", a, b, params=(theta,))
    def rzx(self, theta, a, b): return self.add("RZX", a, b, params=(theta,))

    def unitary(self, matrix: np.ndarray, qubits: Sequence[int]) -> "Circuit":
        return self.append(Gate("UNITARY", tuple(qubits), payload=matrix))

    def measure(self, *qubits: int) -> "Circuit":
        qs = qubits or tuple(range(self.n_qubits))
        for q in qs:
            if not 0 <= q < self.n_qubits:
                raise DimensionError(f"measured qubit {q} out of range")
            if q not in self.measured_qubits:
                self.measured_qubits.append(q)
        return self

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, list(self.ops), list(self.measured_qubits))

    def compose(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot compose circuits of different width")
        out = self.copy()
        out.ops.extend(other.ops)
        for q in other.measured_qubits:
            if q not in out.measured_qubits:
                out.measured_qubits.append(q)
        return out

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.ops)])

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def count_ops(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.ops:
            out[g.name] = out.get(g.name, 0) + 1
        return out

    def gate_counts(self) -> tuple[int, int]:
        """``(N1Q, N2Q)``: gates acting on one qubit and on two or more qubits."""
        n1 = sum(1 for g in self.ops if g.num_qubits == 1)
        n2 = sum(1 for g in self.ops if g.num_qubits >= 2)
        return n1, n2

    def to_unitary(self) -> np.ndarray:
        from ._kernels import apply_gate

        if self.n_qubits > 12:
            raise ResourceError("dense unitary capped at 12 qubits")
        u = np.eye(1 << self.n_qubits, dtype=complex)
        for g in self.ops:
            u = apply_gate(u, g, self.n_qubits)
        return u

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, ops={len(self.ops)}, measured={self.measured_qubits})"


@dataclass(frozen=True)
class GateTimings:
    """Gate durations in nanoseconds.

    Defaults are placeholders for a generic cross-resonance device; calibrated
    values from a :class:`~qsimlab.device.DeviceModel` override them.
    """

    one_qubit: float = 35.0
    cx: float = 300.0
    cr_full: float = 230.0
    rzx_overhead: float = 70.0

    def rzx(self, theta: float) -> float:
        return self.rzx_overhead + rzx_angle_fraction(theta) * self.cr_full

    def duration(self, gate: Gate) -> float:
        k = gate.num_qubits
        if k == 0:
            return 0.0
        if k == 1:
            return self.one_qubit
        if gate.name in ("CX", "CZ"):
            return self.cx
        if gate.name == "RZX":
            return self.rzx(gate.theta)
        # abstract multi-qubit gates: cost of their two-CX-per-link expansion
        return 2 * (k - 1) * self.cx + 3 * self.one_qubit


def rzx_angle_fraction(theta: float) -> float:
    """``|theta| / (pi/2)`` after wrapping theta into ``(-pi, pi]``."""
    return abs(wrap_angle(theta)) / (pi / 2)


def global_phase_equal(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    """True if ``a == exp(i phi) b`` for some phi, aligned on the largest entry of b."""
    if a.shape != b.shape:
        return False
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < 1e-15:
        return np.allclose(a, 0, atol=atol)
    ph = a[idx] / b[idx]
    if abs(abs(ph) - 1) > atol * 10:
        return False
    ph /= abs(ph)
    return bool(np.max(np.abs(a - ph * b)) <= atol)
