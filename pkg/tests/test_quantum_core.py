import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qreach import quantum_core as qc
from qreach.errors import DimensionError

from conftest import random_density, random_hermitian, random_matrix

SPINS = [Fraction(k, 2) for k in range(1, 51)]


class TestDagger:
    def test_sigma_minus(self):
        np.testing.assert_array_equal(qc.dagger(qc.SIGMA_MINUS), qc.SIGMA_PLUS)
        np.testing.assert_array_equal(qc.SIGMA_PLUS, np.outer(qc.KET_E, qc.KET_G))

    def test_hermitian_fixed_point(self, rng):
        H = random_hermitian(rng, 5)
        np.testing.assert_allclose(qc.dagger(H), H, atol=0)

    def test_diagonal(self):
        np.testing.assert_array_equal(qc.dagger(np.diag([1j, -1j])), np.diag([-1j, 1j]))

    def test_involution_batched(self, rng):
        A = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
        np.testing.assert_array_equal(qc.dagger(qc.dagger(A)), A)


class TestExpectation:
    def test_eigenstate(self):
        assert qc.expectation(qc.SIGMA_Z, qc.KET_E) == pytest.approx(1.0)

    def test_equal_superposition(self):
        assert abs(qc.expectation(qc.SIGMA_Z, qc.qubit_target(math.pi / 4, 0))) < 1e-15

    def test_jz_squared_dicke(self):
        jz = qc.spin_operators(10).jz
        val = qc.expectation(jz @ jz, qc.dicke_state(10, 3))
        assert val == pytest.approx(9.0, abs=1e-12)

    def test_hermitian_gives_real(self, rng):
        H = random_hermitian(rng, 6)
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        assert abs(qc.expectation(H, psi).imag) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            qc.expectation(np.eye(3), qc.KET_E)


class TestDissipator:
    def test_decay_of_excited(self):
        out = qc.dissipator(qc.SIGMA_MINUS, qc.projector(qc.KET_E))
        np.testing.assert_allclose(out, qc.projector(qc.KET_G) - qc.projector(qc.KET_E), atol=1e-15)

    def test_dephasing_eigenstate(self):
        np.testing.assert_allclose(qc.dissipator(qc.SIGMA_Z, qc.projector(qc.KET_G)), 0, atol=1e-15)

    def test_truncated_mode(self):
        a = qc.annihilation(4)
        out = qc.dissipator(a, qc.projector(qc.fock_state(1, 4)))
        expected = qc.projector(qc.fock_state(0, 4)) - qc.projector(qc.fock_state(1, 4))
        np.testing.assert_allclose(out, expected, atol=1e-15)

    @pytest.mark.parametrize("seed", range(100))
    def test_trace_and_hermiticity(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 7))
        rho = random_density(rng, dim)
        A = random_matrix(rng, dim)
        D = qc.dissipator(A, rho)
        assert abs(np.trace(D)) < 1e-12
        np.testing.assert_allclose(D, D.conj().T, atol=1e-12)
        Hm = qc.h_superop(A, rho)
        assert abs(np.trace(Hm)) < 1e-12
        np.testing.assert_allclose(Hm, Hm.conj().T, atol=1e-12)


class TestHSuperop:
    def test_eigenstate(self):
        np.testing.assert_allclose(qc.h_superop(qc.SIGMA_Z, qc.projector(qc.KET_E)), 0, atol=1e-15)

    def test_maximally_mixed(self):
        np.testing.assert_allclose(qc.h_superop(qc.SIGMA_Z, qc.maximally_mixed(2)), qc.SIGMA_Z,
                                   atol=1e-15)

    def test_batched_matches_loop(self, rng):
        rhos = np.array([random_density(rng, 3) for _ in range(4)])
        M = random_hermitian(rng, 3)
        batched = qc.h_superop(M, rhos)
        for r, b in zip(rhos, batched):
            np.testing.assert_allclose(qc.h_superop(M, r), b, atol=1e-14)


class TestCommutator:
    def test_self(self):
        np.testing.assert_array_equal(qc.commutator(qc.SIGMA_Z, qc.SIGMA_Z), 0)

    def test_pauli(self):
        np.testing.assert_allclose(qc.commutator(qc.SIGMA_Y, qc.SIGMA_Z), 2j * qc.SIGMA_X)

    @pytest.mark.parametrize("l", SPINS, ids=str)
    def test_spin_algebra(self, l):
        J = qc.spin_operators(l)
        for a, b, c in ((J.jx, J.jy, J.jz), (J.jy, J.jz, J.jx), (J.jz, J.jx, J.jy)):
            np.testing.assert_allclose(qc.commutator(a, b), 1j * c, atol=1e-10)


class TestKron:
    def test_identity(self):
        np.testing.assert_array_equal(qc.kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_lowering_first_qubit(self):
        ee = qc.kron(qc.KET_E, qc.KET_E)
        out = qc.kron(qc.SIGMA_MINUS, np.eye(2)) @ ee
        np.testing.assert_array_equal(out, qc.kron(qc.KET_G, qc.KET_E))

    def test_collective_lowering_kills_singlet(self):
        L = qc.kron(qc.SIGMA_MINUS, np.eye(2)) + qc.kron(np.eye(2), qc.SIGMA_MINUS)
        np.testing.assert_allclose(L @ qc.bell_states()["psi_minus"], 0, atol=1e-15)

    def test_embed(self):
        op = qc.embed(qc.SIGMA_Z, 1, 3)
        np.testing.assert_array_equal(op, qc.kron(np.eye(2), qc.SIGMA_Z, np.eye(2)))


class TestSpinOperators:
    def test_spin_half(self):
        J = qc.spin_operators(0.5)
        for Ji, s in zip(J[:3], (qc.SIGMA_X, qc.SIGMA_Y, qc.SIGMA_Z)):
            np.testing.assert_allclose(Ji, s / 2)

    def test_spin_one_matches_qutrit_operators(self):
        J = qc.spin_operators(1)
        np.testing.assert_allclose(J.jz, np.diag([1, 0, -1]))
        ladder = np.zeros((3, 3))
        ladder[1, 0] = ladder[2, 1] = 1.0   # |S><E| + |G><S|
        np.testing.assert_allclose(J.jm, math.sqrt(2) * ladder, atol=1e-15)

    def test_ladder_identity_l10(self):
        J = qc.spin_operators(10)
        np.testing.assert_allclose(J.jp @ J.jm, J.j_squared - J.jz @ J.jz + J.jz, atol=1e-10)

    @pytest.mark.parametrize("l", SPINS, ids=str)
    def test_casimir_and_dicke_eigenstates(self, l):
        J = qc.spin_operators(l)
        lf = float(l)
        np.testing.assert_allclose(J.j_squared, lf * (lf + 1) * np.eye(J.jz.shape[0]), atol=1e-10)
        for m in qc.spin_m_values(l)[:: max(1, int(lf) // 3)]:
            v = qc.dicke_state(l, m)
            np.testing.assert_allclose(J.j_squared @ v, lf * (lf + 1) * v, atol=1e-10)
            np.testing.assert_allclose(J.jz @ v, m * v, atol=1e-10)

    @pytest.mark.parametrize("bad", [-1, 0.3, 1.25])
    def test_invalid_l(self, bad):
        with pytest.raises(ValueError):
            qc.spin_operators(bad)

    def test_read_only(self):
        with pytest.raises(ValueError):
            qc.spin_operators(1).jz[0, 0] = 5

    def test_collective_matches_irreducible_on_css(self):
        N = 4
        Jc = qc.collective_spin_operators(N)
        up = qc.kron(*[qc.KET_E] * N)
        np.testing.assert_allclose(Jc.jz @ up, N / 2 * up)
        np.testing.assert_allclose(qc.dicke_state_product(N, N / 2), up)


class TestBosonic:
    @pytest.mark.parametrize("dim", [2, 5, 12])
    def test_number_expectation(self, dim):
        a, ad = qc.annihilation(dim), qc.creation(dim)
        for n in range(dim - 1):
            psi = qc.fock_state(n, dim)
            assert qc.expectation(qc.number(dim), psi) == n
            # sqrt(n)**2 carries at most one ulp of rounding
            np.testing.assert_allclose(qc.expectation(ad @ a, psi).real, n, rtol=4e-16, atol=0)

    def test_number_operator(self):
        np.testing.assert_allclose(qc.creation(6) @ qc.annihilation(6), qc.number(6), atol=1e-14)


class TestStates:
    def test_qubit_target_excited(self):
        np.testing.assert_array_equal(qc.qubit_target(0, 1.3), [1, 0])

    @pytest.mark.parametrize("theta,phi", [(-0.1, 0), (math.pi / 2, 0), (0.1, 2 * math.pi)])
    def test_qubit_target_range(self, theta, phi):
        with pytest.raises(ValueError):
            qc.qubit_target(theta, phi)

    def test_qutrit_target_range(self):
        with pytest.raises(ValueError):
            qc.qutrit_target(3.5, 0)

    def test_css_is_all_up(self):
        for N in (1, 3, 6):
            css = qc.dicke_state(N / 2, N / 2)
            assert css[0] == 1  # |up...up> sits first in both bases
            np.testing.assert_array_equal(qc.dicke_state_product(N, N / 2),
                                          qc.kron(*[qc.KET_E] * N))

    def test_ghz_two_is_phi_plus(self):
        np.testing.assert_allclose(qc.ghz_state(2), qc.bell_states()["phi_plus"])

    @pytest.mark.parametrize("N", [1, 2, 5, 9])
    def test_plus_state_bases_agree(self, N):
        """The Dicke-basis |+>^N embeds into the product basis via symmetric Dicke states."""
        Jd = qc.dicke_state_product
        l = N / 2
        embedded = sum(qc.plus_product_state(N, "dicke")[k] * Jd(N, l - k) for k in range(N + 1))
        np.testing.assert_allclose(embedded, qc.plus_product_state(N), atol=1e-14)

    def test_fock_out_of_range(self):
        with pytest.raises(ValueError):
            qc.fock_state(4, 4)
        with pytest.raises(ValueError):
            qc.fock_state(-1, 4)

    def test_invalid_dicke(self):
        for l, m in ((1, 2), (1, 0.5), (0.5, 0)):
            with pytest.raises(ValueError):
                qc.dicke_state(l, m)

    def test_bell_orthonormal(self):
        B = np.array(list(qc.bell_states().values()))
        np.testing.assert_allclose(B.conj() @ B.T, np.eye(4), atol=1e-15)

    def test_as_state_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            qc.as_state([1.0, 1.0])


class TestPredicates:
    def test_density_checks(self, rng):
        assert qc.is_density_matrix(random_density(rng, 4))
        assert not qc.is_density_matrix(np.diag([1.5, -0.5]))
        assert not qc.is_density_matrix(np.diag([0.6, 0.6]))
        assert not qc.is_hermitian(qc.SIGMA_MINUS)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
    def test_random_density_valid(self, dim, seed):
        rho = random_density(np.random.default_rng(seed), dim)
        assert qc.is_density_matrix(rho)
        np.testing.assert_allclose(qc.as_density(rho), rho)
