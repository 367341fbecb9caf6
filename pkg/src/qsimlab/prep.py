"""Initial-state circuits: basis excitations, GHZ and Slater determinants."""

from __future__ import annotations

from dataclasses import dataclass
from math import atan2, pi
from pathlib import Path

import numpy as np

from .circuit import Circuit, Gate, ry
from .errors import DimensionError, EncodingError
from .fermion import FermionExpr, jordan_wigner
from .pauli import dense_matrix

SLATER_MAX_ORBITALS = 8


def basis_excitation(bits: str) -> Circuit:
    """X on every set bit of ``bits`` (written highest qubit first)."""
    bits = bits.strip()
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {bits!r}")
    n = len(bits)
    circ = Circuit(n)
    for q in range(n):
        if bits[n - 1 - q] == "1":
            circ.x(q)
    return circ


def ghz(n: int) -> Circuit:
    if n < 1:
        raise ValueError("n must be >= 1")
    circ = Circuit(n)
    circ.h(0)
    for q in range(n - 1):
        circ.cx(q, q + 1)
    return circ


def givens_matrix(theta: float, phi: float) -> np.ndarray:
    """Two-orbital rotation ``G(theta, phi)``."""
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    return np.array([[c, -e * s], [s, e * c]])


def givens_gates(theta: float, phi: float, j: int, k: int) -> list[Gate]:
    """Gates of the Givens rotation on adjacent orbitals ``j`` and ``k``.

    On the one-particle states ``(|j>, |k>)`` the circuit acts as
    ``G(theta, phi).T`` up to a global phase, so that creation operators
    transform with ``G`` itself.
    """
    return [
        Gate("CX", (k, j)),
        Gate("CU", (j, k), payload=ry(-2 * theta)),  # controlled exp(i theta Y)
        Gate("CX", (k, j)),
        Gate("RZ", (k,), (phi,)),
    ]


def givens_circuit(theta: float, phi: float, j: int, k: int, n_qubits: int | None = None) -> Circuit:
    if abs(j - k) != 1:
        raise EncodingError(f"Givens rotation needs adjacent orbitals, got ({j}, {k})")
    n = max(j, k) + 1 if n_qubits is None else n_qubits
    return Circuit(n).extend(givens_gates(theta, phi, j, k))


@dataclass(frozen=True, eq=False)
class SlaterSpec:
    """Occupied orbitals as the orthonormal rows of ``B`` (n x N)."""

    B: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.B, dtype=complex))
        object.__setattr__(self, "B", b)
        n, big_n = b.shape
        if n > big_n:
            raise DimensionError(f"{n} particles do not fit in {big_n} orbitals")
        if n and np.linalg.matrix_rank(b, tol=1e-10) < n:
            raise EncodingError("rank-deficient orbital matrix")
        if not np.allclose(b @ b.conj().T, np.eye(n), atol=1e-10):
            raise EncodingError("orbital rows must be orthonormal (B B^dag = 1)")

    @classmethod
    def from_rows(cls, rows) -> "SlaterSpec":
        """Orthonormalize full-rank rows first; the determinant state only
        changes by normalization and phase."""
        b = np.atleast_2d(np.asarray(rows, dtype=complex))
        if np.linalg.matrix_rank(b, tol=1e-10) < b.shape[0]:
            raise EncodingError("rank-deficient orbital matrix")
        q, _ = np.linalg.qr(b.T)
        return cls(q.T)

    @property
    def n_particles(self) -> int:
        return self.B.shape[0]

    @property
    def n_orbitals(self) -> int:
        return self.B.shape[1]

    def to_text(self) -> str:
        lines = [f"{self.n_particles} {self.n_orbitals}"]
        for row in self.B:
            lines.append(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SlaterSpec":
        rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows or len(rows[0]) != 2:
            raise ValueError("first line must be 'n N'")
        n, big_n = int(rows[0][0]), int(rows[0][1])
        if len(rows) - 1 != n:
            raise ValueError(f"expected {n} matrix rows, found {len(rows) - 1}")
        b = np.empty((n, big_n), dtype=complex)
        for i, r in enumerate(rows[1:]):
            if len(r) != 2 * big_n:
                raise ValueError(f"row {i}: expected {big_n} complex pairs")
            vals = np.array(r, dtype=float)
            b[i] = vals[0::2] + 1j * vals[1::2]
        return cls(b)

    @classmethod
    def load(cls, path: str | Path) -> "SlaterSpec":
        return cls.from_text(Path(path).read_text())


def givens_decomposition(b: np.ndarray) -> list[tuple[float, float, int, int]]:
    """Elimination sequence ``(theta, phi, j, j+1)`` reducing ``b`` to ``[D 0]``.

    Row by row, entries right of the diagonal are zeroed from the last column
    inwards by rotating column pairs ``(c-1, c)``.
    """
    b = np.array(b, dtype=complex)
    n, big_n = b.shape
    out = []
    for i in range(n):
        for c in range(big_n - 1, i, -1):
            a, z = b[i, c - 1], b[i, c]
            if abs(z) < 1e-15:
                continue
            if abs(a) < 1e-15:
                theta, phi = pi / 2, 0.0
            else:
                theta = atan2(abs(z), abs(a))
                phi = float(np.angle(-z) - np.angle(a))
            # right-multiplying by G^dag zeroes b[i, c]
            b[:, [c - 1, c]] = b[:, [c - 1, c]] @ givens_matrix(theta, phi).conj().T
            out.append((theta, phi, c - 1, c))
    return out


def slater_circuit(spec: SlaterSpec) -> Circuit:
    """Occupy the first ``n`` orbitals, then apply the rotations in reverse
    elimination order. The residual diagonal only contributes a global phase."""
    n, big_n = spec.n_particles, spec.n_orbitals
    if big_n > SLATER_MAX_ORBITALS:
        raise DimensionError(f"Slater preparation capped at {SLATER_MAX_ORBITALS} orbitals")
    circ = Circuit(big_n)
    for q in range(n):
        circ.x(q)
    for theta, phi, j, k in reversed(givens_decomposition(spec.B)):
        circ.extend(givens_gates(theta, phi, j, k))
    return circ


def slater_state(spec: SlaterSpec) -> np.ndarray:
    """Reference vector ``prod_i (sum_p B_ip c_p^dag) |0>`` from dense JW matrices."""
    big_n = spec.n_orbitals
    vec = np.zeros(1 << big_n, dtype=complex)
    vec[0] = 1
    for row in spec.B[::-1]:
        op = sum((FermionExpr([(v, [(p, "+")])], big_n) for p, v in enumerate(row)),
                 FermionExpr([], big_n))
        vec = dense_matrix(jordan_wigner(op, big_n)) @ vec
    return vec


__all__ = [
    "SLATER_MAX_ORBITALS", "SlaterSpec", "basis_excitation", "ghz", "givens_circuit",
    "givens_decomposition", "givens_gates", "givens_matrix", "slater_circuit", "slater_state",
]
