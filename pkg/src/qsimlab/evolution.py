"""Exact, product-formula and Taylor-series (LCU) time evolution.

Hamiltonians are :class:`~qsimlab.pauli.PauliSum` objects with real
coefficients; ``hbar = 1`` throughout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import ceil, factorial, log2
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .errors import InvalidGeneratorError, PlanError, ResourceError
from .pauli import DENSE_CAP, PauliSum, PauliTerm, dense_matrix, pauli_mul
from .state import PURE_CAP, QuantumState, expectation, run

# the multiplexed select gate is held as dense blocks of the system size
LCU_SYSTEM_CAP = 10
LCU_MAX_ANCILLA = 8

SWEEP_COLUMNS = ("t", "m", "order", "observable", "value", "exact_value", "abs_error")


def _hermitian_terms(h: PauliSum) -> list[tuple[float, PauliTerm]]:
    """Normalized ``(real coefficient, unit-phase term)`` pairs of ``h``."""
    out = []
    for c, p in h.normalized():
        if abs(c.imag) > 1e-12:
            raise InvalidGeneratorError(f"term {p.letters} has complex coefficient {c}")
        out.append((c.real, p))
    return out


def exact_unitary(h: PauliSum, t: float) -> np.ndarray:
    """Dense ``exp(-i t H)`` from the eigendecomposition of ``H``."""
    if h.n_qubits > DENSE_CAP:
        raise ResourceError(f"dense evolution capped at {DENSE_CAP} qubits")
    mat = dense_matrix(h)
    if not np.allclose(mat, mat.conj().T, atol=1e-12):
        raise InvalidGeneratorError("Hamiltonian is not Hermitian")
    evals, evecs = np.linalg.eigh(mat)
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T


def exact_evolve(h: PauliSum, t: float, state: QuantumState) -> QuantumState:
    if state.n_qubits != h.n_qubits:
        raise PlanError("state and Hamiltonian sizes differ")
    u = exact_unitary(h, t)
    if state.is_pure:
        return QuantumState(u @ state.data, check=False)
    return QuantumState(u @ state.data @ u.conj().T, mixed=True, check=False)


# ---------------------------------------------------------------- product formulas

def suzuki_p(k: int) -> float:
    """Recursion weight ``p_k = 1 / (4 - 4^(1/(2k-1)))`` of the order-2k formula."""
    if k < 2:
        raise PlanError("p_k is defined for k >= 2")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


@dataclass(frozen=True)
class TrotterPlan:
    order: int = 1
    steps: int = 1
    time: float = 1.0
    # permutation of the normalized Hamiltonian terms; None keeps their order
    term_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.order != 1 and (self.order < 2 or self.order % 2):
            raise PlanError(f"order must be 1 or an even positive integer, got {self.order}")
        if self.steps < 1:
            raise PlanError("steps must be >= 1")
        if self.term_order is not None:
            object.__setattr__(self, "term_order", tuple(int(i) for i in self.term_order))

    @property
    def dt(self) -> float:
        return self.time / self.steps

    def with_time(self, t: float) -> "TrotterPlan":
        return TrotterPlan(self.order, self.steps, t, self.term_order)


def _formula(order: int, n_terms: int) -> list[tuple[int, float]]:
    """One step of the product formula as (term, fraction of dt) pairs."""
    if order == 1:
        return [(i, 1.0) for i in range(n_terms)]
    if order == 2:
        fwd = [(i, 0.5) for i in range(n_terms)]
        return fwd + fwd[::-1]
    p = suzuki_p(order // 2)
    inner = _formula(order - 2, n_terms)
    out = []
    for w in (p, p, 1 - 4 * p, p, p):
        out.extend((i, w * f) for i, f in inner)
    return out


def _merge_adjacent(seq: list[tuple[int, float]]) -> list[tuple[int, float]]:
    out: list[tuple[int, float]] = []
    for i, f in seq:
        if out and out[-1][0] == i:
            out[-1] = (i, out[-1][1] + f)
        else:
            out.append((i, f))
    return out


def trotter_sequence(n_terms: int, plan: TrotterPlan) -> list[tuple[int, float]]:
    """Full schedule of (term index, evolution time) for ``plan``."""
    step = _formula(plan.order, n_terms)
    return _merge_adjacent([(i, f * plan.dt) for _ in range(plan.steps) for i, f in step])


def pauli_rotation_gate(p: PauliTerm, theta: float) -> Gate:
    """Gate for ``exp(-i theta/2 P)`` using the most specific native name."""
    sup = p.support
    if len(sup) == 1:
        return Gate("R" + p.letter(sup[0]), sup, (theta,))
    if len(sup) == 2:
        a, b = sup
        la, lb = p.letter(a), p.letter(b)
        if la == lb:
            return Gate("R" + la * 2, (a, b), (theta,))
        if (la, lb) == ("Z", "X"):
            return Gate("RZX", (a, b), (theta,))
        if (la, lb) == ("X", "Z"):
            return Gate("RZX", (b, a), (theta,))
    label = "".join(p.letter(q) for q in reversed(sup))
    return Gate("PAULIROT", sup, (theta,), label=label)


def trotter_circuit(h: PauliSum, plan: TrotterPlan) -> Circuit:
    terms = _hermitian_terms(h)
    n = h.n_qubits
    if plan.term_order is not None:
        if sorted(plan.term_order) != list(range(len(terms))):
            raise PlanError(f"term_order must permute 0..{len(terms) - 1}")
        terms = [terms[i] for i in plan.term_order]
    circ = Circuit(n)
    # identity terms commute with everything: one global phase for the whole run
    shift = sum(c for c, p in terms if p.is_identity())
    if shift:
        circ.append(Gate("GPHASE", (), (-shift * plan.time,)))
    active = [(c, p) for c, p in terms if not p.is_identity()]
    for i, tau in trotter_sequence(len(active), plan):
        c, p = active[i]
        circ.append(pauli_rotation_gate(p, 2 * c * tau))
    return circ


def operator_error(h: PauliSum, plan: TrotterPlan) -> float:
    """Spectral norm of ``U_trotter - exp(-i t H)``."""
    u = trotter_circuit(h, plan).to_unitary()
    return float(np.linalg.norm(u - exact_unitary(h, plan.time), 2))


@dataclass
class TrotterErrorCurve:
    times: np.ndarray
    approx: np.ndarray
    exact: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return self.approx - self.exact

    def l2(self) -> float:
        return float(np.linalg.norm(self.deviation))


def trotter_error(h: PauliSum, plan: TrotterPlan, state: QuantumState,
                  time_grid: Sequence[float], observable: PauliSum) -> TrotterErrorCurve:
    """Observable along ``time_grid`` from the product formula and exactly.

    ``plan.time`` is ignored; each grid point uses ``plan.steps`` steps.
    """
    times = np.asarray(time_grid, dtype=float)
    approx = np.empty(times.size)
    exact = np.empty(times.size)
    for j, t in enumerate(times):
        st = run(trotter_circuit(h, plan.with_time(t)), state)
        approx[j] = expectation(st, observable)
        exact[j] = expectation(exact_evolve(h, t, state), observable)
    return TrotterErrorCurve(times, approx, exact)


def sweep_rows(curve: TrotterErrorCurve, plan: TrotterPlan, observable_name: str) -> list[dict]:
    return [
        {"t": float(t), "m": plan.steps, "order": plan.order, "observable": observable_name,
         "value": float(a), "exact_value": float(e), "abs_error": float(abs(a - e))}
        for t, a, e in zip(curve.times, curve.approx, curve.exact)
    ]


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- LCU


@dataclass(frozen=True)
class LCUPlan:
    order: int = 4
    time: float = 0.1

    def __post_init__(self):
        if self.order < 0:
            raise PlanError("truncation order must be >= 0")


@dataclass
class LCUDecomposition:
    """Truncated Taylor series ``sum_j alpha_j V_j`` with Pauli unitaries ``V_j``.

    Products of Hamiltonian terms that land on the same signed Pauli string
    share one entry, so ``len(unitaries)`` is bounded by ``4 * 4**n``.
    """

    alphas: np.ndarray
    unitaries: list[PauliTerm]
    n_system: int
    order_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def s(self) -> float:
        return float(self.alphas.sum())

    @property
    def n_ancilla(self) -> int:
        return max(0, ceil(log2(len(self.alphas)))) if len(self.alphas) > 1 else 0

    def operator(self) -> np.ndarray:
        return sum(a * dense_matrix(v) for a, v in zip(self.alphas, self.unitaries))


def lcu_decomposition(h: PauliSum, plan: LCUPlan) -> LCUDecomposition:
    terms = _hermitian_terms(h)
    n = h.n_qubits
    # H = sum a_i H_i with a_i >= 0 and H_i = sign(c_i) P_i
    weights = [(abs(c), PauliTerm(p.x, p.z, n, 0 if c >= 0 else 2)) for c, p in terms]
    weights = [(a, u) for a, u in weights if a > 0]
    acc: dict[PauliTerm, float] = {}
    level = {PauliTerm.identity(n): 1.0}
    order_weights = [1.0]
    for k in range(plan.order + 1):
        if k > 0:
            nxt: dict[PauliTerm, float] = {}
            for v, w in level.items():
                for a, u in weights:
                    # (-i t)^k / k! H_{i1}...H_{ik}: each factor carries -i and t/k
                    prod = pauli_mul(v, u)
                    prod = PauliTerm(prod.x, prod.z, n, prod.phase_exp + 3)
                    nxt[prod] = nxt.get(prod, 0.0) + w * a * plan.time / k
            level = nxt
            order_weights.append(sum(level.values()))
        for v, w in level.items():
            acc[v] = acc.get(v, 0.0) + w
    items = [(w, v) for v, w in acc.items() if w > 0]
    if not items:
        raise PlanError("LCU normalization s is zero")
    return LCUDecomposition(np.array([w for w, _ in items]), [v for _, v in items], n,
                            np.array(order_weights))


def _prep_unitary(alphas: np.ndarray, n_anc: int) -> np.ndarray:
    """Unitary whose first column is ``sqrt(alpha / s)`` (zero padded)."""
    dim = 1 << n_anc
    col = np.zeros(dim, dtype=complex)
    col[: alphas.size] = np.sqrt(alphas / alphas.sum())
    # Householder reflection mapping e_0 onto col
    e0 = np.zeros(dim, dtype=complex)
    e0[0] = 1
    v = e0 - col
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.eye(dim, dtype=complex)
    v /= nv
    return np.eye(dim) - 2 * np.outer(v, v.conj())


def lcu_circuit(dec: LCUDecomposition) -> Circuit:
    """``W = (B^dag x 1) select (B x 1)``; ancillas sit above the system qubits."""
    n, na = dec.n_system, dec.n_ancilla
    anc = tuple(range(n, n + na))
    circ = Circuit(n + na)
    sys_q = tuple(range(n))
    if na == 0:
        circ.append(Gate("UNITARY", sys_q, payload=dense_matrix(dec.unitaries[0])))
        return circ
    b = _prep_unitary(dec.alphas, na)
    circ.append(Gate("UNITARY", anc, payload=b))
    for j, v in enumerate(dec.unitaries):
        circ.append(Gate("CU", anc + sys_q, payload=dense_matrix(v), ctrl_state=j))
    circ.append(Gate("UNITARY", anc, payload=b.conj().T))
    return circ


def lcu_evolve(h: PauliSum, plan: LCUPlan, state: QuantumState) -> tuple[QuantumState, float]:
    """Post-selected Taylor-series evolution and the probability of success.

    The ancilla register is projected onto all zeros; the returned state is
    the renormalized system state.
    """
    if not state.is_pure:
        raise PlanError("LCU evolution expects a pure input state")
    n = h.n_qubits
    if state.n_qubits != n:
        raise PlanError("state and Hamiltonian sizes differ")
    if n > LCU_SYSTEM_CAP:
        raise ResourceError(f"LCU select blocks are dense; system capped at {LCU_SYSTEM_CAP} qubits")
    dec = lcu_decomposition(h, plan)
    na = dec.n_ancilla
    if na > LCU_MAX_ANCILLA or n + na > PURE_CAP:
        raise ResourceError(f"LCU needs {na} ancillas on {n} system qubits; budget exceeded")
    full = np.zeros(1 << (n + na), dtype=complex)
    full[: 1 << n] = state.data  # ancillas are the high bits, all zero
    out = run(lcu_circuit(dec), QuantumState(full, check=False)).data
    kept = out[: 1 << n]
    prob = float(np.vdot(kept, kept).real)
    if prob < 1e-300:
        raise PlanError("post-selection probability vanished")
    return QuantumState(kept / np.sqrt(prob), check=False), prob


def taylor_tail_bound(h: PauliSum, plan: LCUPlan) -> float:
    """Bound on the truncated Taylor remainder with ``lambda = t * sum |c_i|``."""
    lam = plan.time * sum(abs(c) for c, _ in _hermitian_terms(h))
    k = plan.order + 1
    return lam ** k / factorial(k) * np.exp(lam)


__all__ = [
    "LCUDecomposition", "LCUPlan", "SWEEP_COLUMNS", "TrotterErrorCurve", "TrotterPlan",
    "exact_evolve", "exact_unitary", "lcu_circuit", "lcu_decomposition", "lcu_evolve",
    "operator_error", "pauli_rotation_gate", "rows_to_csv", "suzuki_p", "sweep_rows",
    "taylor_tail_bound", "trotter_circuit", "trotter_error", "trotter_sequence",
]
