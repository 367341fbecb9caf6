import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsimlab.circuit import Circuit
from qsimlab.errors import ChannelError, DimensionError, ObservableError, ResourceError
from qsimlab.evolution import TrotterPlan, trotter_circuit
from qsimlab.fermion import TightBindingSpec, number_operator, tight_binding_pauli
from qsimlab.pauli import PauliSum, PauliTerm
from qsimlab.state import (
    NoiseSpec,
    QuantumState,
    apply_channel,
    counts_to_probabilities,
    damping_parameters,
    expectation,
    run,
    sample,
)

from conftest import embed, random_state

Z1 = PauliTerm.from_label("Z")


def random_circuit(n, depth, rng):
    c = Circuit(n)
    for _ in range(depth):
        kind = rng.integers(4)
        a, b = (int(x) for x in rng.choice(n, 2, replace=False))
        th = float(rng.uniform(-np.pi, np.pi))
        if kind == 0:
            c.add(str(rng.choice(["H", "X", "S", "SX"])), a)
        elif kind == 1:
            c.add(str(rng.choice(["RX", "RY", "RZ"])), a, params=(th,))
        elif kind == 2:
            c.cx(a, b)
        else:
            c.add(str(rng.choice(["RXX", "RYY", "RZZ", "RZX"])), a, b, params=(th,))
    return c


class TestQuantumState:
    def test_basis_label_is_msb_first(self):
        st_ = QuantumState.basis("00001")
        assert st_.data[1] == 1 and st_.n_qubits == 5

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            QuantumState(np.array([1.0, 1.0]))

    def test_rejects_bad_shape(self):
        with pytest.raises(DimensionError):
            QuantumState(np.ones(3) / np.sqrt(3))

    def test_caps(self):
        with pytest.raises(ResourceError):
            QuantumState.zero(11, mixed=True)

    def test_dict_roundtrip(self, rng):
        s = random_state(3, rng)
        d = s.to_dict()
        assert d["endianness"] == "little"
        assert np.allclose(QuantumState.from_dict(d).data, s.data)


class TestRun:
    def test_empty_circuit(self, rng):
        s = random_state(2, rng)
        assert np.allclose(run(Circuit(2), s).data, s.data)

    def test_hadamard(self):
        out = run(Circuit(1).h(0))
        assert np.allclose(out.data, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_trotter_circuit_at_zero_time_is_identity(self, rng):
        h = tight_binding_pauli(TightBindingSpec())
        c = trotter_circuit(h, TrotterPlan(order=1, steps=1, time=0.0))
        s = random_state(5, rng)
        assert np.abs(run(c, s).data - s.data).max() < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            run(Circuit(2), QuantumState.zero(3))

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_matches_dense_product(self, n, rng):
        c = random_circuit(n, 25, rng)
        u = np.eye(1 << n, dtype=complex)
        for g in c:
            u = embed(g.matrix(), g.qubits, n) @ u
        s = random_state(n, rng)
        out = run(c, s)
        assert np.abs(out.data - u @ s.data).max() < 1e-9
        assert abs(out.norm() - 1) < 1e-10
        rho = run(c, s.to_density())
        assert np.abs(rho.data - np.outer(out.data, out.data.conj())).max() < 1e-9

    def test_noisy_run_keeps_trace(self, rng):
        noise = NoiseSpec(p1q=0.01, p2q=0.05, t1_us=50.0, t2_us=40.0)
        out = run(random_circuit(3, 15, rng), QuantumState.zero(3), noise=noise)
        assert out.mixed
        assert abs(out.norm() - 1) < 1e-10
        out.validate()

    def test_noisy_run_deterministic(self, rng):
        c = random_circuit(3, 10, rng)
        noise = NoiseSpec(p1q=0.02, p2q=0.03)
        assert np.array_equal(run(c, noise=noise, seed=1).data, run(c, noise=noise, seed=1).data)

    def test_depolarizing_after_gate_lowers_purity(self):
        out = run(Circuit(1).x(0), noise=NoiseSpec(p1q=0.3))
        # X then depolarizing: P(1) = 1 - p/2
        assert out.probabilities()[1] == pytest.approx(0.85)


class TestExpectation:
    def test_z_on_zero(self):
        assert expectation(QuantumState.zero(1), Z1) == 1

    def test_occupation(self):
        assert expectation(QuantumState.basis("00001"), number_operator(0, 5)) == pytest.approx(1)
        assert expectation(QuantumState.basis("00001"), number_operator(4, 5)) == pytest.approx(0)

    def test_non_hermitian(self):
        with pytest.raises(ObservableError):
            expectation(QuantumState.zero(1), PauliSum.from_labels([(1j, "Z")]))

    def test_pure_and_mixed_agree(self, rng):
        s = random_state(3, rng)
        obs = PauliSum.from_labels([(0.3, "XYZ"), (-1.0, "IZZ"), (0.5, "YII")])
        assert expectation(s, obs) == pytest.approx(expectation(s.to_density(), obs), abs=1e-12)


class TestSampling:
    def test_basis_state(self):
        assert sample(QuantumState.basis("1"), 100, seed=0) == {"1": 100}

    def test_reproducible(self, rng):
        s = random_state(3, rng)
        assert sample(s, 500, seed=42) == sample(s, 500, seed=42)

    def test_shots_validation(self):
        with pytest.raises(ValueError):
            sample(QuantumState.zero(1), 0)

    def test_keys_msb_first(self):
        counts = sample(QuantumState.basis("011"), 10, seed=0)
        assert counts == {"011": 10}
        assert sample(QuantumState.basis("011"), 10, seed=0, qubits=[0, 2]) == {"01": 10}

    def test_binomial_spread(self):
        plus = run(Circuit(1).h(0))
        props = [sample(plus, 10_000, seed=s).get("1", 0) / 10_000 for s in range(200)]
        sd = np.std(props, ddof=1)
        assert 0.8 * 0.005 <= sd <= 1.2 * 0.005

    def test_readout_flip_rate(self):
        counts = sample(QuantumState.zero(1), 100_000, noise=NoiseSpec(readout=[(0.05, 0.02)]), seed=3)
        f = counts.get("1", 0) / 100_000
        assert abs(f - 0.05) < 3 * np.sqrt(0.05 * 0.95 / 100_000)

    def test_counts_to_probabilities(self):
        p = counts_to_probabilities({"10": 3, "01": 1})
        assert np.allclose(p, [0, 0.25, 0.75, 0])


class TestChannels:
    def test_depolarizing_zero_is_identity(self, rng):
        s = random_state(2, rng).to_density()
        assert np.allclose(apply_channel(s, "depolarizing", 0.0, [0, 1]).data, s.data)

    def test_full_depolarizing(self, rng):
        s = random_state(2, rng)
        out = apply_channel(s, "depolarizing", 1.0, [1])
        reduced = out.data.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)  # trace out qubit 0
        assert np.allclose(reduced, np.eye(2) / 2)

    def test_amplitude_damping_from_t1(self):
        gamma, lam = damping_parameters(300.0, 50.0, None)
        assert gamma == pytest.approx(1 - np.exp(-0.3 / 50.0))
        assert lam == 0
        out = apply_channel(QuantumState.basis("1"), "amplitude_damping", gamma, [0])
        assert out.probabilities()[0] == pytest.approx(gamma)

    def test_t2_coherence_decay(self):
        d, t1, t2 = 500.0, 80.0, 60.0
        gamma, lam = damping_parameters(d, t1, t2)
        plus = run(Circuit(1).h(0)).to_density()
        out = apply_channel(apply_channel(plus, "amplitude_damping", gamma, [0]), "phase_damping", lam, [0])
        assert abs(out.data[0, 1]) == pytest.approx(0.5 * np.exp(-d * 1e-3 / t2))

    def test_parameter_range(self):
        with pytest.raises(ChannelError):
            apply_channel(QuantumState.zero(1), "depolarizing", 1.5, [0])
        with pytest.raises(ChannelError):
            NoiseSpec(p2q=-0.1)

    def test_t2_bound(self):
        with pytest.raises(ChannelError):
            NoiseSpec(t1_us=10.0, t2_us=30.0).relaxation(0)

    @given(st.lists(st.tuples(st.sampled_from(["depolarizing", "amplitude_damping", "phase_damping"]),
                              st.floats(0, 1), st.integers(0, 2)), min_size=1, max_size=6),
           st.integers(0, 2**32 - 1))
    def test_sequences_stay_physical(self, ops, seed):
        s = random_state(3, np.random.default_rng(seed)).to_density()
        for ch, p, q in ops:
            s = apply_channel(s, ch, p, [q])
        assert abs(np.trace(s.data) - 1) < 1e-10
        assert np.allclose(s.data, s.data.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(s.data).min() > -1e-9
