"""Phased Pauli strings, weighted Pauli sums and exact Pauli exponentials.

Basis convention (used everywhere in the package): qubit 0 is the least
significant bit of a computational-basis index, so ``|q_{n-1} ... q_1 q_0>``
has index ``sum(q_k << k)``. Pauli labels are written most-significant
qubit first, i.e. ``"IXZ"`` means Z on qubit 0 and X on qubit 1.

A term is stored symplectically as two bit masks ``x`` and ``z`` plus a
phase exponent ``e`` (phase ``i**e``). Letter ``Y`` means both bits are set,
and the operator is ``i**e * prod_k P_k`` with ``P_k`` the literal Pauli
matrix on qubit k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionError, InvalidGeneratorError, ResourceError

DENSE_CAP = 12
DROP_TOL = 1e-14

_PHASES = (1, 1j, -1, -1j)
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _parity_array(arr: np.ndarray) -> np.ndarray:
    """Bit parity of each element of a non-negative integer array."""
    return (np.bitwise_count(arr) & 1).astype(np.int8)


@dataclass(frozen=True)
class PauliTerm:
    x: int
    z: int
    n_qubits: int
    phase_exp: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise DimensionError("n_qubits must be positive")
        mask = (1 << self.n_qubits) - 1
        if self.x & ~mask or self.z & ~mask:
            raise DimensionError("Pauli bits exceed n_qubits")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    @classmethod
    def from_label(cls, label: str, phase: complex = 1) -> "PauliTerm":
        """Build from a label such as ``"XIZ"`` (leftmost = highest qubit)."""
        label = label.strip().upper()
        n = len(label)
        x = z = 0
        for pos, ch in enumerate(label):
            if ch not in _LETTER_BITS:
                raise ValueError(f"invalid Pauli letter {ch!r}")
            q = n - 1 - pos
            bx, bz = _LETTER_BITS[ch]
            x |= bx << q
            z |= bz << q
        return cls(x, z, n, _phase_to_exp(phase))

    @classmethod
    def from_sparse(cls, ops: dict[int, str], n_qubits: int, phase: complex = 1) -> "PauliTerm":
        x = z = 0
        for q, ch in ops.items():
            if not 0 <= q < n_qubits:
                raise DimensionError(f"qubit {q} out of range for {n_qubits} qubits")
            bx, bz = _LETTER_BITS[ch.upper()]
            x |= bx << q
            z |= bz << q
        return cls(x, z, n_qubits, _phase_to_exp(phase))

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliTerm":
        return cls(0, 0, n_qubits)

    @property
    def phase(self) -> complex:
        return _PHASES[self.phase_exp]

    @property
    def letters(self) -> str:
        return "".join(self.letter(q) for q in reversed(range(self.n_qubits)))

    def letter(self, q: int) -> str:
        return _BITS_LETTER[((self.x >> q) & 1, (self.z >> q) & 1)]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if (self.x | self.z) >> q & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def key(self) -> tuple[int, int]:
        return (self.x, self.z)

    def unphased(self) -> "PauliTerm":
        return PauliTerm(self.x, self.z, self.n_qubits, 0)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        return pauli_mul(self, other)

    def __str__(self) -> str:
        return f"{_PHASE_STR[self.phase_exp]}{self.letters}"

    def to_matrix(self) -> np.ndarray:
        return dense_matrix(PauliSum([(1.0, self)], self.n_qubits))


_PHASE_STR = ("+", "+i", "-", "-i")


def _phase_to_exp(phase: complex) -> int:
    for e, p in enumerate(_PHASES):
        if abs(complex(phase) - p) < 1e-12:
            return e
    raise ValueError(f"phase must be one of +1, -1, +i, -i, got {phase}")


def _check_same_size(a: PauliTerm, b: PauliTerm) -> None:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"Pauli length mismatch: {a.n_qubits} vs {b.n_qubits}")


def pauli_mul(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product ``a @ b`` with the phase tracked exactly.

    Using ``P = i**(e + |x&z|) X^x Z^z`` and ``Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1``.
    """
    _check_same_size(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    e = (
        a.phase_exp
        + b.phase_exp
        + _popcount(a.x & a.z)
        + _popcount(b.x & b.z)
        + 2 * _popcount(a.z & b.x)
        - _popcount(x & z)
    )
    return PauliTerm(x, z, a.n_qubits, e)


def commutes(a: PauliTerm, b: PauliTerm) -> bool:
    _check_same_size(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


class PauliSum:
    """Weighted sum of Pauli strings on a fixed number of qubits.

    Instances are treated as immutable; arithmetic returns new objects.
    Call :meth:`normalized` to merge duplicate strings and drop zeros.
    """

    __slots__ = ("_terms", "n_qubits")

    def __init__(self, terms: Iterable[tuple[complex, PauliTerm]] = (), n_qubits: int | None = None):
        terms = tuple((complex(c), p) for c, p in terms)
        if n_qubits is None:
            if not terms:
                raise DimensionError("n_qubits required for an empty PauliSum")
            n_qubits = terms[0][1].n_qubits
        for _, p in terms:
            if p.n_qubits != n_qubits:
                raise DimensionError("all terms must share n_qubits")
        self._terms = terms
        self.n_qubits = n_qubits

    @classmethod
    def from_labels(cls, items: Iterable[tuple[complex, str]], n_qubits: int | None = None) -> "PauliSum":
        return cls([(c, PauliTerm.from_label(s)) for c, s in items], n_qubits)

    @property
    def terms(self) -> tuple[tuple[complex, PauliTerm], ...]:
        return self._terms

    def __iter__(self) -> Iterator[tuple[complex, PauliTerm]]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{p}" for c, p in self._terms) or "0"
        return f"PauliSum[{self.n_qubits}]({body})"

    def normalized(self, tol: float = DROP_TOL) -> "PauliSum":
        """Fold phases into coefficients, merge equal strings, drop |c| < tol.

        First-appearance order of each string is preserved.
        """
        merged: dict[tuple[int, int], complex] = {}
        for c, p in self._terms:
            merged[p.key] = merged.get(p.key, 0j) + c * p.phase
        n = self.n_qubits
        return PauliSum(
            [(c, PauliTerm(x, z, n)) for (x, z), c in merged.items() if abs(c) >= tol], n
        )

    def as_dict(self) -> dict[str, complex]:
        return {p.letters: c for c, p in self.normalized()}

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise DimensionError("PauliSum size mismatch")
        return PauliSum(self._terms + other._terms, self.n_qubits)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1) * other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            if other.n_qubits != self.n_qubits:
                raise DimensionError("PauliSum size mismatch")
            return PauliSum(
                [(ca * cb, pauli_mul(pa, pb)) for ca, pa in self._terms for cb, pb in other._terms],
                self.n_qubits,
            ).normalized()
        if isinstance(other, (int, float, complex, np.number)):
            return PauliSum([(complex(other) * c, p) for c, p in self._terms], self.n_qubits)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.__mul__(other)
        return NotImplemented

    def adjoint(self) -> "PauliSum":
        # Pauli strings are Hermitian, so only the scalar part conjugates.
        return PauliSum([(np.conj(c * p.phase), p.unphased()) for c, p in self._terms], self.n_qubits)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c, _ in self.normalized())

    def equals(self, other: "PauliSum", tol: float = 1e-12) -> bool:
        a, b = self.normalized().as_dict(), other.normalized().as_dict()
        keys = set(a) | set(b)
        return self.n_qubits == other.n_qubits and all(abs(a.get(k, 0) - b.get(k, 0)) <= tol for k in keys)

    def to_matrix(self) -> np.ndarray:
        return dense_matrix(self)

    def to_text(self) -> str:
        return format_pauli_sum(self)


def dense_matrix(s: PauliSum | PauliTerm) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix in the little-endian basis."""
    if isinstance(s, PauliTerm):
        s = PauliSum([(1.0, s)], s.n_qubits)
    n = s.n_qubits
    if n > DENSE_CAP:
        raise ResourceError(f"dense matrix capped at {DENSE_CAP} qubits, got {n}")
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for c, p in s:
        vals = c * p.phase * (1j ** _popcount(p.x & p.z)) * (1 - 2 * _parity_array(cols & p.z))
        out[cols ^ p.x, cols] += vals
    return out


def apply_pauli(p: PauliTerm, vec: np.ndarray) -> np.ndarray:
    """Apply a Pauli string to the first axis of ``vec`` (vector or matrix)."""
    dim = vec.shape[0]
    if dim != 1 << p.n_qubits:
        raise DimensionError("state size does not match Pauli length")
    idx = np.arange(dim)
    factor = p.phase * (1j ** _popcount(p.x & p.z))
    sign = (1 - 2 * _parity_array(idx & p.z)).astype(complex) * factor
    out = np.empty_like(vec, dtype=complex)
    if vec.ndim == 1:
        out[idx ^ p.x] = sign * vec
    else:
        out[idx ^ p.x] = sign[:, None] * vec
    return out


def pauli_exp_apply(theta: float, p: PauliTerm, state):
    """Apply ``exp(i*theta*P) = cos(theta) I + i sin(theta) P`` to a state.

    ``state`` may be a :class:`~qsimlab.state.QuantumState` (pure or mixed) or a
    bare statevector array; the return type matches the input.
    """
    from .state import QuantumState

    if p.phase_exp != 0:
        raise InvalidGeneratorError("Pauli exponential needs a +1-phase generator")
    c, s = np.cos(theta), np.sin(theta)
    if isinstance(state, QuantumState):
        if state.n_qubits != p.n_qubits:
            raise DimensionError("state and Pauli sizes differ")
        if state.is_pure:
            return QuantumState(c * state.data + 1j * s * apply_pauli(p, state.data))
        rho = state.data
        p_rho = apply_pauli(p, rho)
        rho_p = p_rho.conj().T
        p_rho_p = apply_pauli(p, rho_p)
        new = c * c * rho + s * s * p_rho_p + 1j * c * s * (p_rho - rho_p)
        return QuantumState(new, mixed=True)
    vec = np.asarray(state, dtype=complex)
    return c * vec + 1j * s * apply_pauli(p, vec)


def format_pauli_sum(s: PauliSum) -> str:
    """One term per line: ``<re> <im> <letters>``; phases folded into coefficients."""
    lines = []
    for c, p in s:
        c = c * p.phase
        lines.append(f"{c.real!r} {c.imag!r} {p.letters}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_pauli_sum(text: str, n_qubits: int | None = None) -> PauliSum:
    terms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<re> <im> <letters>'")
        re_, im_, letters = parts
        terms.append((complex(float(re_.replace("−", "-")), float(im_.replace("−", "-"))),
                      PauliTerm.from_label(letters)))
    return PauliSum(terms, n_qubits)
