"""Device model, chain layouts, fidelity and duration estimates, and the
rewriting passes used to compare compilation pipelines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from math import pi
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, GateTimings, rzx_angle_fraction, wrap_angle
from .errors import DimensionError, RoutingError
from .evolution import TrotterPlan, trotter_circuit
from .pauli import PauliSum
from .state import NoiseSpec

BUNDLED_DEVICE = "h7_device.json"
PIPELINES = ("naive", "transpiled", "rzx")
_ANGLE_TOL = 1e-12


# ---------------------------------------------------------------- device model


@dataclass(frozen=True)
class QubitCalibration:
    id: int
    t1_us: float
    t2_us: float
    p10: float
    p01: float
    f1q: float
    duration_1q_ns: float = 35.0

    @property
    def mean_readout_error(self) -> float:
        return 0.5 * (self.p10 + self.p01)


@dataclass(frozen=True)
class EdgeCalibration:
    a: int
    b: int
    f2q: float
    cx_ns: float = 300.0
    cr_full_ns: float = 230.0

    @property
    def key(self) -> tuple[int, int]:
        return (min(self.a, self.b), max(self.a, self.b))


@dataclass(frozen=True)
class DeviceModel:
    qubits: tuple[QubitCalibration, ...]
    edges: tuple[EdgeCalibration, ...]
    name: str = "device"
    rzx_overhead_ns: float = 70.0
    _edge_index: dict = field(default_factory=dict, repr=False, compare=False)
    _qubit_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        qi = {q.id: q for q in self.qubits}
        if len(qi) != len(self.qubits):
            raise ValueError("duplicate qubit id")
        ei = {}
        for e in self.edges:
            if e.a == e.b:
                raise ValueError(f"self-loop on qubit {e.a}")
            if e.a not in qi or e.b not in qi:
                raise ValueError(f"edge {e.key} references an unknown qubit")
            if e.key in ei:
                raise ValueError(f"duplicate edge {e.key}")
            ei[e.key] = e
        for q in self.qubits:
            if not 0 < q.f1q <= 1 or q.duration_1q_ns <= 0:
                raise ValueError(f"qubit {q.id}: fidelity must be in (0, 1] and duration positive")
        for e in self.edges:
            if not 0 < e.f2q <= 1 or e.cx_ns <= 0 or e.cr_full_ns <= 0:
                raise ValueError(f"edge {e.key}: fidelity must be in (0, 1] and durations positive")
        object.__setattr__(self, "_qubit_index", qi)
        object.__setattr__(self, "_edge_index", ei)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceModel":
        return cls(
            tuple(QubitCalibration(**q) for q in d["qubits"]),
            tuple(EdgeCalibration(**e) for e in d["edges"]),
            d.get("name", "device"),
            float(d.get("rzx_overhead_ns", 70.0)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rzx_overhead_ns": self.rzx_overhead_ns,
            "qubits": [vars(q).copy() for q in self.qubits],
            "edges": [vars(e).copy() for e in self.edges],
        }

    @classmethod
    def load(cls, path: str | Path | None = None) -> "DeviceModel":
        if path is None:
            text = resources.files("qsimlab").joinpath("data", BUNDLED_DEVICE).read_text()
        else:
            text = Path(path).read_text()
        return cls.from_dict(json.loads(text))

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def qubit(self, q: int) -> QubitCalibration:
        return self._qubit_index[q]

    def edge(self, a: int, b: int) -> EdgeCalibration:
        try:
            return self._edge_index[(min(a, b), max(a, b))]
        except KeyError:
            raise RoutingError(f"no coupling between physical qubits {a} and {b}; "
                               "choose a layout whose chain follows the coupling graph") from None

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self._edge_index

    def neighbors(self, q: int) -> list[int]:
        return sorted({e.b if e.a == q else e.a for e in self.edges if q in (e.a, e.b)})

    def with_edge_fidelity(self, a: int, b: int, f2q: float) -> "DeviceModel":
        key = (min(a, b), max(a, b))
        edges = tuple(EdgeCalibration(e.a, e.b, f2q, e.cx_ns, e.cr_full_ns) if e.key == key else e
                      for e in self.edges)
        return DeviceModel(self.qubits, edges, self.name, self.rzx_overhead_ns)

    def _layout_edges(self, layout: Sequence[int]) -> list[EdgeCalibration]:
        return [self.edge(a, b) for a, b in zip(layout, layout[1:]) if self.has_edge(a, b)]

    def mean_fidelities(self, layout: Sequence[int] | None = None) -> tuple[float, float]:
        """Average 1q fidelity over ``layout`` and 2q fidelity over its chain edges."""
        qs = [self.qubit(q) for q in (layout if layout is not None else self._qubit_index)]
        es = self._layout_edges(layout) if layout is not None else list(self.edges)
        f2 = float(np.mean([e.f2q for e in es])) if es else 1.0
        return float(np.mean([q.f1q for q in qs])), f2

    def timings(self, layout: Sequence[int] | None = None) -> GateTimings:
        qs = [self.qubit(q) for q in (layout if layout is not None else self._qubit_index)]
        es = self._layout_edges(layout) if layout is not None else list(self.edges)
        d = GateTimings()
        return GateTimings(
            float(np.mean([q.duration_1q_ns for q in qs])),
            float(np.mean([e.cx_ns for e in es])) if es else d.cx,
            float(np.mean([e.cr_full_ns for e in es])) if es else d.cr_full,
            self.rzx_overhead_ns,
        )

    def noise_spec(self, layout: Sequence[int]) -> NoiseSpec:
        """Logical-qubit noise for a layout (logical ``i`` on ``layout[i]``)."""
        cal = [self.qubit(q) for q in layout]
        p2q = {}
        for i in range(len(layout)):
            for j in range(i + 1, len(layout)):
                if self.has_edge(layout[i], layout[j]):
                    p2q[(i, j)] = 1 - self.edge(layout[i], layout[j]).f2q
        return NoiseSpec(
            p1q={i: 1 - c.f1q for i, c in enumerate(cal)},
            p2q=p2q,
            readout=[(c.p10, c.p01) for c in cal],
            t1_us=[c.t1_us for c in cal],
            t2_us=[min(c.t2_us, 2 * c.t1_us) for c in cal],
            timings=self.timings(layout),
        )


# ---------------------------------------------------------------- layouts


def enumerate_chain_layouts(device: DeviceModel, k: int) -> list[tuple[int, ...]]:
    """All ``k``-vertex simple paths, one orientation each (first < last), sorted."""
    if not 1 <= k <= device.n_qubits:
        raise DimensionError(f"k must lie in [1, {device.n_qubits}]")
    ids = sorted(q.id for q in device.qubits)
    if k == 1:
        return [(q,) for q in ids]
    found = set()

    def extend(path: list[int]):
        if len(path) == k:
            if path[0] < path[-1]:
                found.add(tuple(path))
            return
        for nb in device.neighbors(path[-1]):
            if nb not in path:
                path.append(nb)
                extend(path)
                path.pop()

    for q in ids:
        extend([q])
    return sorted(found)


def scaled_rzx_error(theta: float, f2q_full: float) -> float:
    """Fidelity of ``RZX(theta)`` when the error grows linearly with angle:
    ``1 - (1 - f) |theta| / (pi/2)``."""
    return 1.0 - (1.0 - f2q_full) * rzx_angle_fraction(theta)


@dataclass(frozen=True)
class LayoutScore:
    layout: tuple[int, ...]
    score: float


def _gate_fidelity(device: DeviceModel, g: Gate, phys: Sequence[int]) -> float:
    k = g.num_qubits
    if k == 0:
        return 1.0
    if k == 1:
        return device.qubit(phys[0]).f1q
    if k > 2:
        raise RoutingError(f"{g.name} acts on {k} qubits; decompose to two-qubit gates first")
    f = device.edge(*phys).f2q
    if g.name in ("CX", "CZ"):
        return f
    if g.name == "RZX":
        return scaled_rzx_error(g.theta, f)
    # other two-qubit gates count as their two-CX expansion
    return f * f


def score_layout(device: DeviceModel, layout: Sequence[int], circuit: Circuit) -> LayoutScore:
    """``1 - prod(gate fidelities) * prod(1 - mean readout error)``; lower is better."""
    layout = tuple(layout)
    if len(layout) < circuit.n_qubits or len(set(layout)) != len(layout):
        raise RoutingError("layout must injectively cover every logical qubit")
    total = 1.0
    for g in circuit.ops:
        total *= _gate_fidelity(device, g, [layout[q] for q in g.qubits])
    for q in circuit.measured_qubits:
        total *= 1.0 - device.qubit(layout[q]).mean_readout_error
    return LayoutScore(layout, 1.0 - total)


# ---------------------------------------------------------------- estimates


def estimate_fidelity(circuit: Circuit, f1q: float, f2q: float, scale_rzx: bool = False) -> float:
    """``f1q^N1Q * f2q^N2Q``; with ``scale_rzx`` each RZX gate instead
    contributes its angle-scaled fidelity."""
    n1, n2 = circuit.gate_counts()
    if not scale_rzx:
        return f1q ** n1 * f2q ** n2
    out = f1q ** n1
    for g in circuit.ops:
        if g.num_qubits >= 2:
            out *= scaled_rzx_error(g.theta, f2q) if g.name == "RZX" else f2q
    return out


def two_qubit_error_term(circuit: Circuit, f2q: float) -> float:
    """Summed first-order two-qubit error; RZX gates count ``(1-f)|theta|/(pi/2)``."""
    total = 0.0
    for g in circuit.ops:
        if g.num_qubits >= 2:
            total += (1 - scaled_rzx_error(g.theta, f2q)) if g.name == "RZX" else (1 - f2q)
    return total


def gate_duration(g: Gate, device: DeviceModel | None = None, phys: Sequence[int] | None = None,
                  timings: GateTimings | None = None) -> float:
    if device is None or phys is None:
        return (timings or GateTimings()).duration(g)
    k = g.num_qubits
    if k == 0:
        return 0.0
    if k == 1:
        return device.qubit(phys[0]).duration_1q_ns
    if k > 2:
        raise RoutingError(f"{g.name} acts on {k} qubits; decompose to two-qubit gates first")
    e = device.edge(*phys)
    if g.name == "RZX":
        return device.rzx_overhead_ns + rzx_angle_fraction(g.theta) * e.cr_full_ns
    if g.name in ("CX", "CZ"):
        return e.cx_ns
    return 2 * e.cx_ns + 3 * device.qubit(phys[0]).duration_1q_ns


def estimate_duration(circuit: Circuit, device: DeviceModel | None = None,
                      layout: Sequence[int] | None = None, timings: GateTimings | None = None) -> float:
    """Critical-path duration in ns.

    Scheduling every gate as late as possible gives the same total as the
    longest dependency chain, which is what is computed here.
    """
    if device is not None and layout is None:
        layout = tuple(range(circuit.n_qubits))
    free = np.zeros(circuit.n_qubits)
    for g in circuit.ops:
        if not g.qubits:
            continue
        phys = [layout[q] for q in g.qubits] if device is not None else None
        start = max(free[q] for q in g.qubits)
        end = start + gate_duration(g, device, phys, timings)
        for q in g.qubits:
            free[q] = end
    return float(free.max()) if circuit.n_qubits else 0.0


# ---------------------------------------------------------------- rewriting passes


def _cx_template(theta: float, a: int, b: int, name: str) -> list[Gate]:
    """Two-CX expansion of RXX / RYY / RZZ on ``(a, b)``."""
    pre = {"RXX": [("H",)], "RYY": [("SDG",), ("H",)], "RZZ": []}[name]
    post = {"RXX": [("H",)], "RYY": [("H",), ("S",)], "RZZ": []}[name]
    out = [Gate(p[0], (q,)) for q in (a, b) for p in pre]
    out += [Gate("CX", (a, b)), Gate("RZ", (b,), (theta,)), Gate("CX", (a, b))]
    out += [Gate(p[0], (q,)) for q in (a, b) for p in post]
    return out


def expand_cx(circuit: Circuit) -> Circuit:
    """Replace each RXX/RYY/RZZ by the two-CX template (no other changes)."""
    out = Circuit(circuit.n_qubits, measured_qubits=list(circuit.measured_qubits))
    for g in circuit.ops:
        if g.name in ("RXX", "RYY", "RZZ"):
            out.extend(_cx_template(g.theta, *g.qubits, g.name))
        else:
            out.append(g)
    return out


def _rzx_rewrite(g: Gate) -> list[Gate]:
    a, b = g.qubits
    rzx = Gate("RZX", (a, b), (g.theta,))
    if g.name == "RXX":
        return [Gate("H", (a,)), rzx, Gate("H", (a,))]
    if g.name == "RZZ":
        return [Gate("H", (b,)), rzx, Gate("H", (b,))]
    # RYY: Y_a = (S H) Z (H S^dag), Y_b = S X S^dag
    return [Gate("SDG", (a,)), Gate("H", (a,)), Gate("SDG", (b,)), rzx,
            Gate("H", (a,)), Gate("S", (a,)), Gate("S", (b,))]


def rewrite_to_rzx(circuit: Circuit) -> Circuit:
    """Each RXX/RYY/RZZ becomes one RZX conjugated by single-qubit gates."""
    out = Circuit(circuit.n_qubits, measured_qubits=list(circuit.measured_qubits))
    for g in circuit.ops:
        out.extend(_rzx_rewrite(g) if g.name in ("RXX", "RYY", "RZZ") else [g])
    return out


def fuse_xx_yy(circuit: Circuit) -> Circuit:
    """Fuse adjacent ``RXX(a) RYY(b)`` on the same pair into one two-CX block;
    remaining rotations use the two-CX template."""
    out = Circuit(circuit.n_qubits, measured_qubits=list(circuit.measured_qubits))
    ops = circuit.ops
    i = 0
    while i < len(ops):
        g = ops[i]
        nxt = ops[i + 1] if i + 1 < len(ops) else None
        if (nxt is not None and {g.name, nxt.name} == {"RXX", "RYY"}
                and set(g.qubits) == set(nxt.qubits)):
            alpha = g.theta if g.name == "RXX" else nxt.theta
            beta = g.theta if g.name == "RYY" else nxt.theta
            a, b = g.qubits
            # exp(-i(a XX + b YY)/2): the pair becomes two independent Y rotations
            out.extend([Gate("SDG", (a,)), Gate("H", (a,)), Gate("CX", (a, b)),
                        Gate("RY", (a,), (alpha,)), Gate("RY", (b,), (beta,)),
                        Gate("CX", (a, b)), Gate("H", (a,)), Gate("S", (a,))])
            i += 2
            continue
        if g.name in ("RXX", "RYY", "RZZ"):
            out.extend(_cx_template(g.theta, *g.qubits, g.name))
        else:
            out.append(g)
        i += 1
    return out


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """``(theta, phi, lam)`` with ``u = e^{i a} RZ(phi) RY(theta) RZ(lam)``."""
    det = np.linalg.det(u)
    v = u / np.sqrt(det)
    a, b = v[0, 0], v[1, 0]
    theta = 2 * np.arctan2(abs(b), abs(a))
    if abs(b) < 1e-14:
        return 0.0, float(-2 * np.angle(a)), 0.0
    if abs(a) < 1e-14:
        return float(theta), float(2 * np.angle(b)), 0.0
    plus = -2 * np.angle(a)
    minus = 2 * np.angle(b)
    return float(theta), float((plus + minus) / 2), float((plus - minus) / 2)


def _fused(gates: list[Gate], q: int) -> list[Gate]:
    if len(gates) < 2:
        return gates
    u = np.eye(2, dtype=complex)
    for g in gates:
        u = g.matrix() @ u
    theta, phi, lam = zyz_angles(u)
    if abs(wrap_angle(theta)) < _ANGLE_TOL:
        rot = wrap_angle(phi + lam)
        return [] if abs(rot) < _ANGLE_TOL else [Gate("RZ", (q,), (rot,))]
    return [Gate("U3", (q,), (theta, phi, lam))]


def merge_1q(circuit: Circuit) -> Circuit:
    """Fuse every run of single-qubit gates on a wire into at most one gate.

    Runs that multiply to the identity (up to phase) disappear; runs of a
    single gate are left untouched.
    """
    out = Circuit(circuit.n_qubits, measured_qubits=list(circuit.measured_qubits))
    pending: dict[int, list[Gate]] = {}

    def flush(q: int):
        out.extend(_fused(pending.pop(q, []), q))

    for g in circuit.ops:
        if g.num_qubits == 1:
            pending.setdefault(g.qubits[0], []).append(g)
            continue
        for q in g.qubits:
            flush(q)
        out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def drop_trivial_rotations(circuit: Circuit, tol: float = _ANGLE_TOL) -> Circuit:
    """Remove parametrized rotations whose angle is zero modulo 2 pi."""
    out = Circuit(circuit.n_qubits, measured_qubits=list(circuit.measured_qubits))
    for g in circuit.ops:
        if g.name in ("RX", "RY", "RZ", "RXX", "RYY", "RZZ", "RZX") and abs(wrap_angle(g.theta)) < tol:
            continue
        out.append(g)
    return out


def build_pipeline(h: PauliSum, plan: TrotterPlan, kind: str) -> Circuit:
    """Trotter circuit lowered through one of :data:`PIPELINES`.

    ``naive``: two-CX template per rotation. ``transpiled``: fused XX+YY
    blocks with merged single-qubit gates. ``rzx``: one RZX per rotation
    with merged single-qubit gates.
    """
    base = trotter_circuit(h, plan)
    if kind == "naive":
        return expand_cx(base)
    if kind == "transpiled":
        return merge_1q(fuse_xx_yy(base))
    if kind == "rzx":
        return merge_1q(rewrite_to_rzx(drop_trivial_rotations(base)))
    raise ValueError(f"unknown pipeline {kind!r}; expected one of {PIPELINES}")


__all__ = [
    "BUNDLED_DEVICE", "DeviceModel", "EdgeCalibration", "LayoutScore", "PIPELINES",
    "QubitCalibration", "build_pipeline", "drop_trivial_rotations", "enumerate_chain_layouts",
    "estimate_duration", "estimate_fidelity", "expand_cx", "fuse_xx_yy", "gate_duration",
    "merge_1q", "rewrite_to_rzx", "score_layout", "scaled_rzx_error", "two_qubit_error_term",
    "zyz_angles",
]
