"""Second-quantized operators, the Jordan-Wigner map and tight-binding builders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EncodingError
from .pauli import PauliSum, PauliTerm

CREATE = "+"
ANNIHILATE = "-"

Ladder = tuple[int, str]


class FermionExpr:
    """Sum of products of ladder operators over ``n_modes`` fermionic modes.

    Each term is ``(coefficient, ((mode, kind), ...))`` with ``kind`` either
    ``"+"`` (creation) or ``"-"`` (annihilation). Products are kept in the
    order written; the empty product is the identity.
    """

    __slots__ = ("terms", "n_modes")

    def __init__(self, terms: Iterable[tuple[complex, Sequence[Ladder]]], n_modes: int):
        self.n_modes = int(n_modes)
        cleaned = []
        for c, prod in terms:
            prod = tuple((int(m), k) for m, k in prod)
            for m, k in prod:
                if k not in (CREATE, ANNIHILATE):
                    raise EncodingError(f"unknown ladder kind {k!r}")
                if not 0 <= m < self.n_modes:
                    raise EncodingError(f"mode {m} out of range for {self.n_modes} modes")
            cleaned.append((complex(c), prod))
        self.terms = tuple(cleaned)

    @classmethod
    def create(cls, i: int, n_modes: int) -> "FermionExpr":
        return cls([(1.0, [(i, CREATE)])], n_modes)

    @classmethod
    def annihilate(cls, i: int, n_modes: int) -> "FermionExpr":
        return cls([(1.0, [(i, ANNIHILATE)])], n_modes)

    @classmethod
    def number(cls, i: int, n_modes: int) -> "FermionExpr":
        return cls([(1.0, [(i, CREATE), (i, ANNIHILATE)])], n_modes)

    def __add__(self, other: "FermionExpr") -> "FermionExpr":
        return FermionExpr(self.terms + other.terms, max(self.n_modes, other.n_modes))

    def __mul__(self, other):
        if isinstance(other, FermionExpr):
            return FermionExpr(
                [(ca * cb, pa + pb) for ca, pa in self.terms for cb, pb in other.terms],
                max(self.n_modes, other.n_modes),
            )
        return FermionExpr([(other * c, p) for c, p in self.terms], self.n_modes)

    def __rmul__(self, other):
        return FermionExpr([(other * c, p) for c, p in self.terms], self.n_modes)

    def adjoint(self) -> "FermionExpr":
        flip = {CREATE: ANNIHILATE, ANNIHILATE: CREATE}
        return FermionExpr(
            [(np.conj(c), tuple((m, flip[k]) for m, k in reversed(p))) for c, p in self.terms],
            self.n_modes,
        )

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"FermionExpr({self.to_text().strip()!r}, n_modes={self.n_modes})"

    def to_text(self) -> str:
        return format_fermion_expr(self)


def format_fermion_expr(expr: FermionExpr) -> str:
    lines = []
    for c, prod in expr.terms:
        toks = [f"c+{m}" if k == CREATE else f"c{m}" for m, k in prod]
        lines.append(" ".join([repr(c.real), repr(c.imag), *toks]))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_fermion_expr(text: str, n_modes: int | None = None) -> FermionExpr:
    terms = []
    top = -1
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"line {lineno}: expected '<re> <im> <token...>'")
        c = complex(float(parts[0]), float(parts[1]))
        prod = []
        for tok in parts[2:]:
            if tok.startswith("c+"):
                prod.append((int(tok[2:]), CREATE))
            elif tok.startswith("c"):
                prod.append((int(tok[1:]), ANNIHILATE))
            else:
                raise ValueError(f"line {lineno}: bad token {tok!r}")
            top = max(top, prod[-1][0])
        terms.append((c, prod))
    return FermionExpr(terms, n_modes if n_modes is not None else top + 1)


def _ladder_image(mode: int, kind: str, n_qubits: int, qubit_of: Sequence[int]) -> PauliSum:
    zs = {qubit_of[j]: "Z" for j in range(mode)}
    q = qubit_of[mode]
    x_part = PauliTerm.from_sparse({**zs, q: "X"}, n_qubits)
    y_part = PauliTerm.from_sparse({**zs, q: "Y"}, n_qubits)
    # creation -> (X - iY)/2, annihilation -> (X + iY)/2
    sign = -1 if kind == CREATE else 1
    return PauliSum([(0.5, x_part), (0.5j * sign, y_part)], n_qubits)


def jordan_wigner(expr: FermionExpr, n_modes: int | None = None,
                  permutation: Sequence[int] | None = None) -> PauliSum:
    """Encode ``expr`` as a normalized :class:`PauliSum`.

    Mode ``i`` sits on qubit ``permutation[i]`` (identity by default); the
    parity string always runs over modes ``0..i-1`` in mode order.
    """
    n = expr.n_modes if n_modes is None else int(n_modes)
    if n < 1:
        raise EncodingError("need at least one mode")
    for _, prod in expr.terms:
        for m, _k in prod:
            if m >= n:
                raise EncodingError(f"mode {m} out of range for {n} modes")
    qubit_of = list(range(n)) if permutation is None else list(permutation)
    if sorted(qubit_of) != list(range(n)):
        raise EncodingError("permutation must be a bijection on 0..n-1")

    cache: dict[Ladder, PauliSum] = {}
    identity = PauliSum([(1.0, PauliTerm.identity(n))], n)
    out = PauliSum([], n)
    for c, prod in expr.terms:
        acc = identity
        for op in prod:
            if op not in cache:
                cache[op] = _ladder_image(op[0], op[1], n, qubit_of)
            acc = acc * cache[op]
        out = out + c * acc
    return out.normalized()


@dataclass(frozen=True)
class TightBindingSpec:
    """Open chain with uniform hopping ``tau`` and one defect bond ``tau_d``."""

    n_sites: int = 5
    tau: float = 1.0
    tau_d: float = 0.6
    defect_bond: tuple[int, int] | None = (2, 3)

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("n_sites must be >= 2")
        if self.defect_bond is not None:
            a, b = sorted(self.defect_bond)
            if b - a != 1 or a < 0 or b >= self.n_sites:
                raise ValueError(f"defect bond {self.defect_bond} is not an adjacent pair in the chain")
            object.__setattr__(self, "defect_bond", (a, b))

    def bond_hopping(self, i: int) -> float:
        return self.tau_d if self.defect_bond == (i, i + 1) else self.tau

    def single_particle_matrix(self) -> np.ndarray:
        """``n_sites x n_sites`` hopping matrix M with ``H = sum M_ij c_i^+ c_j``."""
        m = np.zeros((self.n_sites, self.n_sites))
        for i in range(self.n_sites - 1):
            m[i, i + 1] = m[i + 1, i] = -self.bond_hopping(i)
        return m


def tight_binding(spec: TightBindingSpec) -> FermionExpr:
    n = spec.n_sites
    terms = []
    for i in range(n - 1):
        t = spec.bond_hopping(i)
        terms.append((-t, [(i, CREATE), (i + 1, ANNIHILATE)]))
        terms.append((-t, [(i + 1, CREATE), (i, ANNIHILATE)]))
    return FermionExpr(terms, n)


def tight_binding_pauli(spec: TightBindingSpec) -> PauliSum:
    """Closed-form qubit Hamiltonian: ``-t/2 (X_i X_{i+1} + Y_i Y_{i+1})`` per bond."""
    n = spec.n_sites
    terms = []
    for i in range(n - 1):
        t = spec.bond_hopping(i)
        terms.append((-t / 2, PauliTerm.from_sparse({i: "X", i + 1: "X"}, n)))
        terms.append((-t / 2, PauliTerm.from_sparse({i: "Y", i + 1: "Y"}, n)))
    return PauliSum(terms, n).normalized()


def number_operator(i: int, n_qubits: int) -> PauliSum:
    """``n_i = (I - Z_i) / 2``."""
    return PauliSum(
        [(0.5, PauliTerm.identity(n_qubits)), (-0.5, PauliTerm.from_sparse({i: "Z"}, n_qubits))],
        n_qubits,
    )


def total_number(n_qubits: int) -> PauliSum:
    out = PauliSum([], n_qubits)
    for i in range(n_qubits):
        out = out + number_operator(i, n_qubits)
    return out.normalized()
