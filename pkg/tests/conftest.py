from functools import reduce

import numpy as np
import pytest
from hypothesis import settings

from qsimlab.pauli import PauliSum
from qsimlab.state import QuantumState

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# hand-written single-qubit matrices, kept independent of the package
PAULI_2X2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_label(label: str) -> np.ndarray:
    """Dense matrix of an MSB-first Pauli label via explicit Kronecker products."""
    return reduce(np.kron, [PAULI_2X2[c] for c in label], np.eye(1, dtype=complex))


def dense_sum(items) -> np.ndarray:
    return sum(c * kron_label(lab) for c, lab in items)


def random_state(n: int, rng) -> QuantumState:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return QuantumState(v / np.linalg.norm(v))


def random_pauli_items(n: int, k: int, rng):
    labels = ["".join(rng.choice(list("IXYZ"), n)) for _ in range(k)]
    return [(float(rng.normal()), lab) for lab in labels]


def random_hermitian_sum(n: int, k: int, rng) -> PauliSum:
    return PauliSum.from_labels(random_pauli_items(n, k, rng), n).normalized()


def phase_aligned_close(a, b, atol=1e-10) -> bool:
    i = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    ph = a[i] / b[i]
    return np.allclose(a, ph / abs(ph) * b, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def embed(m: np.ndarray, qubits, n: int) -> np.ndarray:
    """Full 2^n matrix of a local gate by explicit index bookkeeping.

    Local index bit j corresponds to global qubit ``qubits[j]``.
    """
    k = len(qubits)
    full = np.zeros((1 << n, 1 << n), dtype=complex)
    for col in range(1 << n):
        loc_in = sum(((col >> q) & 1) << j for j, q in enumerate(qubits))
        rest = col
        for q in qubits:
            rest &= ~(1 << q)
        for loc_out in range(1 << k):
            row = rest | sum(((loc_out >> j) & 1) << q for j, q in enumerate(qubits))
            full[row, col] += m[loc_out, loc_in]
    return full


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: list[tuple[str, str, float]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    num, title = marker.args
    _ACCEPTANCE.append((f"{num:2d}. {title}", "PASS" if rep.passed else "FAIL", rep.duration))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for title, status, dur in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split(".")[0])):
        terminalreporter.write_line(f"{status}  {title}  ({dur:.2f} s)")
