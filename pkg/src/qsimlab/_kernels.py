"""Tensor kernels: apply a k-qubit matrix to the leading axis of an array."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def apply_matrix(data: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Return ``mat`` acting on ``qubits`` of the first axis of ``data``.

    ``data`` has shape ``(2**n,)`` or ``(2**n, K)``. ``qubits[0]`` is the least
    significant bit of the local matrix index.
    """
    k = len(qubits)
    if k == 0:
        return data * mat[0, 0]
    vec = data.ndim == 1
    d = data.reshape((1 << n, -1))
    extra = d.shape[1]
    t = d.reshape([2] * n + [extra])
    # qubit q lives on axis n-1-q; local MSB is qubits[-1]
    axes = [n - 1 - q for q in reversed(qubits)]
    m = mat.reshape([2] * (2 * k))
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    out = out.reshape((1 << n, extra))
    return out.reshape(-1) if vec else out


def conjugate(rho: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """``M rho M^dagger`` for a density matrix."""
    a = apply_matrix(rho, mat, qubits, n)
    return apply_matrix(a.conj().T, mat, qubits, n).conj().T


def apply_gate(data: np.ndarray, gate, n: int) -> np.ndarray:
    """Apply a :class:`~qsimlab.circuit.Gate`; controlled gates touch only the
    slice where the control register matches."""
    if gate.name != "CU":
        return apply_matrix(data, gate.matrix(), gate.qubits, n)
    controls, targets = gate.controls, gate.targets
    dim = 1 << n
    idx = np.arange(dim)
    match = np.ones(dim, dtype=bool)
    for j, c in enumerate(controls):
        match &= ((idx >> c) & 1) == ((gate.ctrl_state >> j) & 1)
    sel = idx[match]  # ascending, so the free qubits keep their relative order
    free = [q for q in range(n) if q not in controls]
    local = [free.index(t) for t in targets]
    out = data.copy()
    out[sel] = apply_matrix(data[sel], gate.payload, local, len(free))
    return out


def conjugate_gate(rho: np.ndarray, gate, n: int) -> np.ndarray:
    a = apply_gate(rho, gate, n)
    return apply_gate(a.conj().T, gate, n).conj().T
