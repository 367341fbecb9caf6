import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qsimlab.circuit import Circuit
from qsimlab.errors import ObservableError, PlanError, SpectralRangeError
from qsimlab.fermion import TightBindingSpec, tight_binding_pauli
from qsimlab.measurement import (
    Estimate,
    SpectroscopyPlan,
    aux_overlap,
    basis_change,
    correlation,
    fft_spectrum,
    measure_pauli,
    proportion_stderr,
    spectroscopy,
)
from qsimlab.pauli import PauliSum, PauliTerm
from qsimlab.state import QuantumState, run

from conftest import kron_label, random_hermitian_sum, random_state

PLUS = QuantumState(np.array([1, 1]) / np.sqrt(2))
PLUS_2 = QuantumState(np.full(4, 0.5))


def random_unitary_circuit(n, rng):
    m = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    return Circuit(n).unitary(np.linalg.qr(m)[0], range(n))


class TestMeasurePauli:
    def test_z_on_zero(self):
        e = measure_pauli(QuantumState.zero(1), PauliTerm.from_label("Z"), 100, seed=0)
        assert e.value == 1 and e.stderr == 0

    def test_x_on_plus(self):
        e = measure_pauli(PLUS, PauliTerm.from_label("X"), 10_000, seed=0)
        assert e.value == 1 and e.stderr == 0

    def test_x_on_zero(self):
        e = measure_pauli(QuantumState.zero(1), PauliTerm.from_label("X"), 10_000, seed=5)
        assert e.stderr == pytest.approx(0.01, rel=0.01)
        assert abs(e.value) < 3 * 0.01

    def test_y_basis(self):
        # S H |0> is the +1 eigenstate of Y
        s = run(Circuit(1).h(0).add("S", 0))
        assert measure_pauli(s, PauliTerm.from_label("Y"), 1000, seed=0).value == 1

    def test_multi_qubit_parity(self, rng):
        s = random_state(3, rng)
        p = PauliTerm.from_label("XIY")
        exact = np.vdot(s.data, kron_label("XIY") @ s.data).real
        e = measure_pauli(s, p, 20_000, seed=11)
        assert e.within(exact, 4)

    def test_basis_change_diagonalizes(self):
        p = PauliTerm.from_label("YXZ")
        u = basis_change(p).to_unitary()
        assert np.allclose(u @ kron_label("YXZ") @ u.conj().T, kron_label("ZZZ"), atol=1e-12)

    def test_rejects_phase(self):
        with pytest.raises(ObservableError):
            measure_pauli(PLUS, PauliTerm.from_label("X", -1), 10)

    def test_stderr_formula(self):
        assert proportion_stderr(0.5, 10_000) == pytest.approx(0.005)
        assert Estimate(1.0, 0.1).within(1.25) and not Estimate(1.0, 0.1).within(1.35)


class TestOverlap:
    def test_same_unitary(self, rng):
        u = random_unitary_circuit(2, rng)
        assert aux_overlap(u, u, random_state(2, rng)) == pytest.approx(1)

    def test_identity_vs_z(self):
        z = Circuit(1).add("Z", 0)
        assert aux_overlap(Circuit(1), z, QuantumState.zero(1)) == pytest.approx(1)
        assert aux_overlap(Circuit(1), z, PLUS) == pytest.approx(0, abs=1e-12)

    def test_dense_oracle(self, rng):
        for _ in range(5):
            u, v = random_unitary_circuit(2, rng), random_unitary_circuit(2, rng)
            psi = random_state(2, rng)
            want = np.vdot(psi.data, u.to_unitary().conj().T @ v.to_unitary() @ psi.data)
            got = aux_overlap(u, v, psi)
            assert abs(got - want) < 1e-10
            assert abs(got) <= 1 + 1e-10

    def test_sampled_tracks_exact(self, rng):
        u, v = random_unitary_circuit(2, rng), random_unitary_circuit(2, rng)
        psi = random_state(2, rng)
        exact = aux_overlap(u, v, psi)
        est = aux_overlap(u, v, psi, shots=20_000, seed=3)
        assert isinstance(est, Estimate) and est.within(exact, 4)

    def test_mixed_input(self, rng):
        u, v = random_unitary_circuit(1, rng), random_unitary_circuit(1, rng)
        psi = random_state(1, rng)
        assert aux_overlap(u, v, psi.to_density()) == pytest.approx(aux_overlap(u, v, psi))

    def test_size_mismatch(self):
        with pytest.raises(PlanError):
            aux_overlap(Circuit(2), Circuit(1), PLUS)


class TestCorrelation:
    def dense(self, a, b, h, t, psi):
        u = expm(-1j * t * h.to_matrix())
        a, b = a.to_unitary(), b.to_unitary()
        return np.vdot(psi.data, u.conj().T @ a.conj().T @ u @ b @ psi.data)

    def test_identity_is_one(self, rng):
        h = random_hermitian_sum(2, 4, rng)
        for t in (0.0, 0.7, 3.1):
            assert correlation(Circuit(2), Circuit(2), h, t, random_state(2, rng)) == pytest.approx(1)

    def test_equal_at_zero_time(self, rng):
        a = random_unitary_circuit(2, rng)
        h = random_hermitian_sum(2, 3, rng)
        assert correlation(a, a, h, 0.0, random_state(2, rng)) == pytest.approx(1)

    def test_dense_oracle(self, rng):
        h = tight_binding_pauli(TightBindingSpec(3, 1.0, 0.6, (1, 2)))
        z0 = Circuit(3).add("Z", 0)
        psi = QuantumState.basis("001")
        for t in np.linspace(0, 3, 7):
            assert abs(correlation(z0, z0, h, t, psi) - self.dense(z0, z0, h, t, psi)) < 1e-10
        a, b = random_unitary_circuit(3, rng), random_unitary_circuit(3, rng)
        psi = random_state(3, rng)
        assert abs(correlation(a, b, h, 1.3, psi) - self.dense(a, b, h, 1.3, psi)) < 1e-10

    def test_commuting_is_constant(self):
        h = PauliSum.from_labels([(0.8, "ZI"), (0.3, "ZZ")])
        a = Circuit(2).add("Z", 1)
        b = Circuit(2).add("Z", 0)
        vals = [correlation(a, b, h, t, PLUS_2) for t in (0.0, 0.5, 2.0)]
        assert np.allclose(vals, vals[0])

    def test_sampled(self, rng):
        h = random_hermitian_sum(2, 3, rng)
        a, b = random_unitary_circuit(2, rng), random_unitary_circuit(2, rng)
        psi = random_state(2, rng)
        exact = correlation(a, b, h, 0.9, psi)
        assert correlation(a, b, h, 0.9, psi, shots=20_000, seed=8).within(exact, 4)


class TestFFTSpectrum:
    def test_z_on_plus(self):
        res = fft_spectrum(PauliSum.from_labels([(1, "Z")]), PLUS, 200.0, 1024)
        bin_ = 2 * np.pi / 200
        assert len(res.peaks) == 2
        (l0, w0), (l1, w1) = res.peaks
        assert abs(l0 + 1) < bin_ and abs(l1 - 1) < bin_
        assert abs(w0 - 0.5) < 0.05 and abs(w1 - 0.5) < 0.05
        assert np.all(res.intensity >= 0)

    def test_eigenstate_single_peak(self, rng):
        p = random_hermitian_sum(2, 4, rng)
        vals, vecs = np.linalg.eigh(p.to_matrix())
        res = fft_spectrum(p, QuantumState(vecs[:, 1]), 100.0, 512)
        assert len(res.peaks) == 1
        assert abs(res.peaks[0][0] - vals[1]) < 2 * np.pi / 100
        assert res.peaks[0][1] == pytest.approx(1, abs=0.02)

    def test_random_three_qubit(self, rng):
        p = random_hermitian_sum(3, 5, rng)
        psi = random_state(3, rng)
        res = fft_spectrum(p, psi, 200.0, 1024)
        vals, vecs = np.linalg.eigh(p.to_matrix())
        w = np.abs(vecs.conj().T @ psi.data) ** 2
        # degenerate eigenvalues share one peak
        levels = {}
        for e, wi in zip(np.round(vals, 9), w):
            levels[e] = levels.get(e, 0) + wi
        locs = np.array([l for l, _ in res.peaks])
        for e, wi in levels.items():
            if wi >= 0.05:
                assert np.min(np.abs(locs - e)) < 2 * np.pi / 200
        assert res.total_weight() <= 1 + 0.02

    def test_total_weight(self):
        p = PauliSum.from_labels([(0.7, "ZI"), (0.4, "IZ"), (0.3, "XX")])
        vecs = np.linalg.eigh(p.to_matrix())[1]
        psi = QuantumState(vecs @ np.array([0.5, 0.5, 0.5, 0.5]))
        res = fft_spectrum(p, psi, 200.0, 1024)
        assert abs(res.total_weight() - 1) < 0.02

    def test_aliasing(self):
        with pytest.raises(SpectralRangeError):
            fft_spectrum(PauliSum.from_labels([(20, "Z")]), PLUS, 100.0, 256)

    def test_power_of_two(self):
        with pytest.raises(PlanError):
            fft_spectrum(PauliSum.from_labels([(1, "Z")]), PLUS, 10.0, 100)

    def test_outputs(self):
        res = fft_spectrum(PauliSum.from_labels([(1, "Z")]), PLUS, 50.0, 128)
        lines = res.to_csv().splitlines()
        assert lines[0] == "energy,intensity" and len(lines) == 1 + 4 * 128
        peaks = json.loads(res.peaks_json())
        assert set(peaks[0]) == {"location", "weight"}


class TestSpectroscopy:
    def plan(self, grid, c=None, n=40, dt=0.5):
        return SpectroscopyPlan(grid, dt, np.pi / 2 / (n * dt) if c is None else c, n)

    def test_decoupled_probe(self):
        h = PauliSum.from_labels([(0.5, "Z")])
        z = spectroscopy(h, self.plan(np.linspace(-2, 2, 11), c=0.0), QuantumState.zero(1))
        assert np.allclose(z, 1)

    def test_single_qubit_gap(self):
        gap = 1.3
        h = PauliSum.from_labels([(gap / 2, "Z")])
        grid = np.linspace(0, 3, 121)
        z = spectroscopy(h, self.plan(grid), QuantumState.zero(1))
        assert abs(grid[np.argmin(z)] - gap) <= 2 * (grid[1] - grid[0])
        assert np.all(np.abs(z) <= 1 + 1e-12)

    def test_two_site_chain(self):
        h = tight_binding_pauli(TightBindingSpec(2, 1.0, 1.0, None))
        grid = np.linspace(-2, 2, 161)
        z = spectroscopy(h, self.plan(grid), QuantumState.basis("01"))
        # probe X on site 0 changes the particle number; sector energies are {-1, 1} and {0}
        pos = grid > 0
        assert abs(grid[pos][np.argmin(z[pos])] - 1.0) <= 2 * (grid[1] - grid[0])
        assert abs(grid[~pos][np.argmin(z[~pos])] + 1.0) <= 2 * (grid[1] - grid[0])

    def test_plan_validation(self):
        with pytest.raises(PlanError):
            SpectroscopyPlan((0.0,), 0.0, 1.0, 1)
        with pytest.raises(PlanError):
            SpectroscopyPlan((0.0,), 0.1, 1.0, 0)
        with pytest.raises(PlanError):
            spectroscopy(PauliSum.from_labels([(1, "Z")]), SpectroscopyPlan((0.0,), 0.1, 1.0, 1, probe_target=3),
                         QuantumState.zero(1))

    @given(st.floats(-3, 3), st.floats(0.01, 1.0))
    def test_probe_z_bounded(self, omega, c):
        h = PauliSum.from_labels([(0.4, "ZI"), (0.3, "XX")])
        z = spectroscopy(h, SpectroscopyPlan((omega,), 0.3, c, 5), PLUS_2)
        assert -1 - 1e-12 <= z[0] <= 1 + 1e-12
