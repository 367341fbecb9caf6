import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsimlab.errors import EncodingError
from qsimlab.fermion import (
    FermionExpr,
    TightBindingSpec,
    format_fermion_expr,
    jordan_wigner,
    number_operator,
    parse_fermion_expr,
    tight_binding,
    tight_binding_pauli,
    total_number,
)
from qsimlab.pauli import dense_matrix


def fock_annihilator(i: int, n: int) -> np.ndarray:
    """Annihilator built directly on occupation-number states (bit j = mode j)."""
    a = np.zeros((1 << n, 1 << n))
    for s in range(1 << n):
        if s >> i & 1:
            sign = (-1) ** bin(s & ((1 << i) - 1)).count("1")
            a[s ^ (1 << i), s] = sign
    return a


def dense_jw(i, kind, n):
    e = FermionExpr.create(i, n) if kind == "+" else FermionExpr.annihilate(i, n)
    return dense_matrix(jordan_wigner(e))


class TestJordanWigner:
    def test_single_creation(self):
        assert jordan_wigner(FermionExpr.create(0, 1)).as_dict() == {"X": 0.5, "Y": -0.5j}

    def test_number_operator(self):
        got = jordan_wigner(FermionExpr.number(1, 3))
        assert got.as_dict() == {"III": 0.5, "IZI": -0.5}
        assert got.equals(number_operator(1, 3))

    def test_hopping_pair(self):
        e = parse_fermion_expr("1 0 c+0 c1\n1 0 c+1 c0\n")
        assert jordan_wigner(e).as_dict() == {"XX": 0.5, "YY": 0.5}

    def test_matches_fock_construction(self):
        for n in (1, 2, 3, 4):
            for i in range(n):
                assert np.allclose(dense_jw(i, "-", n), fock_annihilator(i, n), atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(EncodingError):
            FermionExpr.create(3, 2)
        with pytest.raises(EncodingError):
            jordan_wigner(FermionExpr.create(3, 4), n_modes=2)

    def test_identity_term(self):
        assert jordan_wigner(FermionExpr([(2.0, [])], 2)).as_dict() == {"II": 2}

    def test_permutation_moves_mode(self):
        e = FermionExpr.number(0, 3)
        assert jordan_wigner(e, permutation=[2, 0, 1]).as_dict() == {"III": 0.5, "ZII": -0.5}
        with pytest.raises(EncodingError):
            jordan_wigner(e, permutation=[0, 0, 1])


class TestAnticommutation:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_car(self, n):
        ann = [dense_jw(i, "-", n) for i in range(n)]
        cre = [dense_jw(i, "+", n) for i in range(n)]
        eye = np.eye(1 << n)
        for i in range(n):
            for j in range(n):
                assert np.abs(ann[i] @ cre[j] + cre[j] @ ann[i] - (i == j) * eye).max() < 1e-12
                assert np.abs(ann[i] @ ann[j] + ann[j] @ ann[i]).max() < 1e-12

    def test_number_operators(self):
        n = 4
        nums = [dense_matrix(jordan_wigner(FermionExpr.number(i, n))) for i in range(n)]
        for a in nums:
            assert set(np.round(np.linalg.eigvalsh(a), 12)) <= {0.0, 1.0}
            for b in nums:
                assert np.allclose(a @ b, b @ a)

    @given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2), st.integers(0, 2)),
                    min_size=1, max_size=4))
    def test_hermitian_input_gives_hermitian_output(self, items):
        e = FermionExpr([(complex(r, i), [(a, "+"), (b, "-")]) for r, i, a, b in items], 3)
        m = dense_matrix(jordan_wigner(e + e.adjoint()))
        assert np.abs(m - m.conj().T).max() < 1e-12


class TestTightBinding:
    def test_default_chain(self):
        spec = TightBindingSpec()
        h = tight_binding_pauli(spec)
        assert len(h) == 8
        d = h.as_dict()
        assert d["IIIXX"] == -0.5 and d["IXXII"] == -0.3 and d["IYYII"] == -0.3
        assert d["XXIII"] == -0.5
        assert len(tight_binding(spec)) == 8

    def test_composition_oracle(self):
        for spec in (TightBindingSpec(), TightBindingSpec(3, 0.7, 1.3, (0, 1)), TightBindingSpec(2, 1.0, 1.0, None)):
            a = dense_matrix(tight_binding_pauli(spec))
            b = dense_matrix(jordan_wigner(tight_binding(spec)))
            assert np.abs(a - b).max() < 1e-12

    def test_two_sites(self):
        h = tight_binding_pauli(TightBindingSpec(2, 2.0, 2.0, None))
        assert h.as_dict() == {"XX": -1.0, "YY": -1.0}

    def test_uniform_defect_indistinguishable(self):
        a = tight_binding_pauli(TightBindingSpec(4, 1.0, 1.0, (1, 2)))
        b = tight_binding_pauli(TightBindingSpec(4, 1.0, 1.0, None))
        assert a.equals(b)

    def test_zero_hopping(self):
        assert len(tight_binding_pauli(TightBindingSpec(5, 0.0, 0.0))) == 0

    def test_bad_defect(self):
        with pytest.raises(ValueError):
            TightBindingSpec(5, 1, 0.6, (1, 3))
        with pytest.raises(ValueError):
            TightBindingSpec(5, 1, 0.6, (4, 5))

    def test_single_particle_spectrum(self):
        # one-particle sector of the qubit Hamiltonian equals the hopping matrix
        spec = TightBindingSpec()
        h = dense_matrix(tight_binding_pauli(spec))
        idx = [1 << i for i in range(spec.n_sites)]
        assert np.allclose(h[np.ix_(idx, idx)], spec.single_particle_matrix())

    @given(st.integers(2, 5), st.floats(-2, 2), st.floats(-2, 2))
    def test_conserves_particle_number(self, n, tau, tau_d):
        h = dense_matrix(tight_binding_pauli(TightBindingSpec(n, tau, tau_d, (0, 1))))
        num = dense_matrix(total_number(n))
        assert np.abs(h @ num - num @ h).max() < 1e-12


class TestTextForm:
    def test_roundtrip(self):
        e = tight_binding(TightBindingSpec())
        back = parse_fermion_expr(format_fermion_expr(e))
        assert back.terms == e.terms and back.n_modes == 5

    def test_bad_token(self):
        with pytest.raises(ValueError):
            parse_fermion_expr("1 0 a0\n")
