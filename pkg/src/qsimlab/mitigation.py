"""Readout-error calibration, confusion-matrix mitigation and post-selection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from ._kernels import apply_matrix
from .circuit import Circuit
from .errors import ConditioningError, ResourceError
from .prep import basis_excitation
from .state import Counts, NoiseSpec, counts_to_probabilities, run, sample, spawn_seeds

FULL_CAP = 8
CONDITION_WARN = 100.0
_SINGULAR = 1e12

Backend = Callable[[Circuit, int, object], Counts]


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Column-stochastic readout map: ``A[i, j] = P(read i | prepared j)``.

    ``mode="tensor"`` stores one 2x2 factor per qubit (``factors[q]`` for
    qubit ``q``); the dense matrix is their Kronecker product.
    """

    mode: str
    n_qubits: int
    shots: int
    matrix: np.ndarray | None = None
    factors: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.mode not in ("full", "tensor"):
            raise ValueError(f"unknown mode {self.mode!r}")
        mats = [self.matrix] if self.mode == "full" else list(self.factors)
        if self.mode == "full":
            if self.matrix is None or self.matrix.shape != (1 << self.n_qubits,) * 2:
                raise ValueError("full mode needs a 2^n x 2^n matrix")
        elif len(self.factors) != self.n_qubits or any(f.shape != (2, 2) for f in self.factors):
            raise ValueError("tensor mode needs one 2x2 factor per qubit")
        for m in mats:
            if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
                raise ValueError("confusion entries must lie in [0, 1]")
            if not np.allclose(m.sum(axis=0), 1, atol=1e-9):
                raise ValueError("confusion matrix columns must sum to 1")

    @classmethod
    def identity(cls, n: int, mode: str = "full") -> "ConfusionMatrix":
        if mode == "full":
            return cls("full", n, 0, matrix=np.eye(1 << n))
        return cls("tensor", n, 0, factors=tuple(np.eye(2) for _ in range(n)))

    @classmethod
    def from_flips(cls, flips: Sequence[tuple[float, float]], mode: str = "tensor") -> "ConfusionMatrix":
        """Exact matrix for independent flips ``(p(1|0), p(0|1))`` per qubit."""
        facs = tuple(np.array([[1 - a, b], [a, 1 - b]]) for a, b in flips)
        cm = cls("tensor", len(facs), 0, factors=facs)
        return cm if mode == "tensor" else cls("full", cm.n_qubits, 0, matrix=cm.A)

    @property
    def A(self) -> np.ndarray:
        if self.mode == "full":
            return self.matrix
        # qubit 0 is the least significant index bit, so it is the rightmost factor
        return reduce(np.kron, reversed(self.factors), np.ones((1, 1)))

    def condition_number(self) -> float:
        if self.mode == "full":
            return float(np.linalg.cond(self.matrix))
        return float(np.prod([np.linalg.cond(f) for f in self.factors]))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Noisy distribution ``A p``."""
        if self.mode == "full":
            return self.matrix @ p
        out = np.asarray(p, dtype=float)
        for q, f in enumerate(self.factors):
            out = apply_matrix(out, f, (q,), self.n_qubits)
        return out.real

    def solve(self, p: np.ndarray) -> np.ndarray:
        """``A^{-1} p``."""
        if self.mode == "full":
            return np.linalg.solve(self.matrix, p)
        out = np.asarray(p, dtype=float)
        for q, f in enumerate(self.factors):
            out = apply_matrix(out, np.linalg.inv(f), (q,), self.n_qubits)
        return out.real

    def inverse_matrix(self) -> np.ndarray:
        if self.mode == "full":
            return np.linalg.inv(self.matrix)
        return reduce(np.kron, (np.linalg.inv(f) for f in reversed(self.factors)), np.ones((1, 1)))

    def to_text(self) -> str:
        lines = [f"mode {self.mode}", f"n_qubits {self.n_qubits}", f"shots {self.shots}"]
        mats = [self.matrix] if self.mode == "full" else self.factors
        for k, m in enumerate(mats):
            lines.append(f"matrix {k} {m.shape[0]} {m.shape[1]}")
            lines.extend(" ".join(repr(float(v)) for v in row) for row in m)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConfusionMatrix":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = dict(ln.split(None, 1) for ln in lines[:3])
        mode, n, shots = head["mode"], int(head["n_qubits"]), int(head["shots"])
        mats, i = [], 3
        while i < len(lines):
            _, _, r, c = lines[i].split()
            r, c = int(r), int(c)
            mats.append(np.array([[float(v) for v in lines[i + 1 + k].split()] for k in range(r)]))
            if mats[-1].shape != (r, c):
                raise ValueError("matrix block has the wrong shape")
            i += 1 + r
        if mode == "full":
            return cls(mode, n, shots, matrix=mats[0])
        return cls(mode, n, shots, factors=tuple(mats))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "ConfusionMatrix":
        return cls.from_text(Path(path).read_text())


def _noise_backend(noise: NoiseSpec) -> Backend:
    def execute(circ: Circuit, shots: int, seed) -> Counts:
        return sample(run(circ, noise=noise), shots, noise=noise, seed=seed)
    return execute


def calibrate(backend: NoiseSpec | Backend | None, n: int, shots: int, mode: str = "full",
              seed=None) -> ConfusionMatrix:
    """Estimate the confusion matrix by preparing and reading basis states.

    ``backend`` is a :class:`NoiseSpec` (simulated here) or a callable
    ``(circuit, shots, seed) -> counts``. Full mode prepares all ``2^n``
    strings; tensor mode prepares only all-zeros and all-ones.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if backend is None:
        backend = NoiseSpec()
    execute = _noise_backend(backend) if isinstance(backend, NoiseSpec) else backend
    if mode == "full":
        if n > FULL_CAP:
            raise ResourceError(f"full calibration needs 2^{n} circuits; use mode='tensor' above {FULL_CAP} qubits")
        seeds = spawn_seeds(seed, 1 << n)
        a = np.empty((1 << n, 1 << n))
        for j in range(1 << n):
            counts = execute(basis_excitation(format(j, f"0{n}b")), shots, seeds[j])
            a[:, j] = counts_to_probabilities(counts, n)
        return ConfusionMatrix("full", n, shots, matrix=a)
    if mode != "tensor":
        raise ValueError(f"unknown mode {mode!r}")
    s0, s1 = spawn_seeds(seed, 2)
    p0 = counts_to_probabilities(execute(basis_excitation("0" * n), shots, s0), n)
    p1 = counts_to_probabilities(execute(basis_excitation("1" * n), shots, s1), n)
    idx = np.arange(1 << n)
    facs = []
    for q in range(n):
        bit = (idx >> q) & 1
        f10 = p0[bit == 1].sum()  # read 1 after preparing 0
        f01 = p1[bit == 0].sum()
        facs.append(np.array([[1 - f10, f01], [f10, 1 - f01]]))
    return ConfusionMatrix("tensor", n, shots, factors=tuple(facs))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    k = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0)


@dataclass
class MitigationResult:
    probabilities: np.ndarray
    stderr: np.ndarray
    condition_number: float
    method: str

    @property
    def renormalized(self) -> np.ndarray:
        """Negative entries clipped, then rescaled to sum to one."""
        p = np.clip(self.probabilities, 0, None)
        s = p.sum()
        return p / s if s > 0 else p


def mitigate(cm: ConfusionMatrix, counts: Counts | np.ndarray, method: str = "inverse",
             shots: int | None = None) -> MitigationResult:
    """Undo readout errors on ``counts`` (or an exact probability vector).

    ``inverse`` applies ``A^{-1}`` and may return small negatives;
    ``constrained`` solves least squares over the probability simplex.
    Errors propagate the multinomial covariance of the raw data through
    ``A^{-1}``; they are zero for exact probability input without ``shots``.
    """
    n = cm.n_qubits
    if isinstance(counts, dict):
        shots = sum(counts.values()) if shots is None else shots
        p = counts_to_probabilities(counts, n)
    else:
        p = np.asarray(counts, dtype=float)
    if p.shape != (1 << n,):
        raise ValueError(f"expected {1 << n} probabilities, got {p.shape}")
    cond = cm.condition_number()
    if not np.isfinite(cond) or cond > _SINGULAR:
        raise ConditioningError(f"confusion matrix is singular (condition number {cond:.3g})")
    if cond > CONDITION_WARN:
        warnings.warn(f"confusion matrix condition number {cond:.3g} exceeds {CONDITION_WARN:g}",
                      stacklevel=2)
    if method == "inverse":
        x = cm.solve(p)
    elif method == "constrained":
        a = cm.A
        start = project_to_simplex(cm.solve(p))
        res = minimize(lambda v: float(np.sum((a @ v - p) ** 2)), start,
                       jac=lambda v: 2 * a.T @ (a @ v - p), method="SLSQP",
                       bounds=[(0, 1)] * p.size,
                       constraints=[{"type": "eq", "fun": lambda v: v.sum() - 1,
                                     "jac": lambda v: np.ones_like(v)}],
                       options={"ftol": 1e-14, "maxiter": 500})
        x = project_to_simplex(res.x)
    else:
        raise ValueError(f"unknown method {method!r}")
    if shots:
        ainv = cm.inverse_matrix()
        cov = (np.diag(p) - np.outer(p, p)) / shots
        err = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", ainv, cov, ainv), 0, None))
    else:
        err = np.zeros_like(x)
    return MitigationResult(x, err, cond, method)


class PostSelection(NamedTuple):
    counts: Counts
    retained_fraction: float

    @property
    def empty(self) -> bool:
        return not self.counts


def postselect(counts: Counts, n_particles: int) -> PostSelection:
    """Keep the bitstrings with exactly ``n_particles`` ones."""
    if n_particles < 0:
        raise ValueError("n_particles must be >= 0")
    total = sum(counts.values())
    kept = {k: v for k, v in counts.items() if k.count("1") == n_particles and v > 0}
    frac = sum(kept.values()) / total if total else 0.0
    return PostSelection(kept, frac)


__all__ = [
    "CONDITION_WARN", "ConfusionMatrix", "FULL_CAP", "MitigationResult", "PostSelection",
    "calibrate", "mitigate", "postselect", "project_to_simplex",
]
