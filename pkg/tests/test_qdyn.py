import numpy as np
import pytest

from polarisim.qdyn import (
    BRANCH,
    Boson,
    DensityMatrix,
    Operator,
    TwoLevel,
    build_space,
    expectation,
    factor_operator,
    liouvillian,
    propagate,
    unvectorize,
    vectorize,
)


def two_level_decay(gamma):
    """Amplitude-damped two-level system: H = diag(0, omega), jump sqrt(g) sigma-."""
    space = build_space([TwoLevel()])
    H = Operator(space, np.diag([0.0, 5.0]), hermitian=True)
    jump = np.sqrt(gamma) * factor_operator(space, 0, "sigma_minus")
    return space, liouvillian(H, [jump])


class TestBuildSpace:
    def test_dimensions(self):
        assert build_space([Boson(2), Boson(2), TwoLevel(), TwoLevel()]).dim == 36
        assert build_space([TwoLevel()]).dim == 2
        assert build_space([Boson(1), Boson(1), TwoLevel(), TwoLevel()]).dim == 16

    def test_empty_factor_list_rejected(self):
        with pytest.raises(ValueError):
            build_space([])

    def test_cutoff_below_one_rejected(self):
        with pytest.raises(ValueError):
            build_space([Boson(0)])

    def test_basis_index_orders_first_factor_most_significant(self):
        space = build_space([Boson(2), TwoLevel()])
        assert space.basis_index((0, 0)) == 0
        assert space.basis_index((0, 1)) == 1
        assert space.basis_index((1, 0)) == 2
        assert space.basis_index((2, 1)) == 5


class TestFactorOperator:
    def test_boson_lowering_matrix(self):
        space = build_space([Boson(2)])
        a = factor_operator(space, 0, "lower").matrix
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 1] = 1.0
        expected[1, 2] = np.sqrt(2.0)
        assert np.array_equal(a, expected)

    def test_sigma_minus_matrix(self):
        space = build_space([TwoLevel()])
        sm = factor_operator(space, 0, "sigma_minus").matrix
        assert np.array_equal(sm, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_kronecker_embedding_by_hand(self):
        # a (x) I2 on [Boson(1), TwoLevel], written out explicitly.
        space = build_space([Boson(1), TwoLevel()])
        a = factor_operator(space, 0, "lower").matrix
        expected = np.array(
            [
                [0, 0, 1, 0],
                [0, 0, 0, 1],
                [0, 0, 0, 0],
                [0, 0, 0, 0],
            ],
            dtype=complex,
        )
        assert np.array_equal(a, expected)
        number = a.conj().T @ a
        evals = np.sort(np.linalg.eigvalsh(number))
        assert np.allclose(evals, [0, 0, 1, 1], atol=1e-14)

    def test_kind_factor_mismatch(self):
        space = build_space([Boson(1), TwoLevel()])
        with pytest.raises(ValueError):
            factor_operator(space, 0, "sigma_minus")
        with pytest.raises(ValueError):
            factor_operator(space, 1, "lower")

    def test_index_out_of_range(self):
        space = build_space([TwoLevel()])
        with pytest.raises(ValueError):
            factor_operator(space, 1, "sigma_minus")

    def test_disjoint_factor_operators_commute_exactly(self):
        space = build_space([Boson(2), Boson(2), TwoLevel(), TwoLevel()])
        a = factor_operator(space, 0, "lower")
        b = factor_operator(space, 1, "raise")
        s = factor_operator(space, 3, "sigma_minus")
        assert np.array_equal((a @ b).matrix, (b @ a).matrix)
        assert np.array_equal((a @ s).matrix, (s @ a).matrix)


class TestOperator:
    def test_hermitian_flag_verified(self):
        space = build_space([TwoLevel()])
        with pytest.raises(ValueError):
            Operator(space, np.array([[0, 1], [0, 0]]), hermitian=True)
        Operator(space, np.array([[0, 1], [1, 0]]), hermitian=True)

    def test_space_mismatch_rejected(self):
        s1 = build_space([TwoLevel()])
        s2 = build_space([Boson(1)])
        with pytest.raises(ValueError):
            _ = factor_operator(s1, 0, "sigma_minus") @ Operator(s2, np.eye(2))


class TestVectorization:
    def test_column_stacking_convention(self):
        # vec(A rho B) = (B^T kron A) vec(rho) on random matrices.
        rng = np.random.default_rng(7)
        d = 4
        a, b, rho = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3))
        lhs = vectorize(a @ rho @ b)
        rhs = np.kron(b.T, a) @ vectorize(rho)
        assert np.allclose(lhs, rhs, atol=1e-12)
        assert np.allclose(unvectorize(vectorize(rho), d), rho)


class TestLiouvillian:
    def test_two_level_amplitude_damping_closed_form(self):
        gamma = 0.8
        space, L = two_level_decay(gamma)
        rho0 = np.array([[0.3, 0.4], [0.4, 0.7]], dtype=complex)
        rho = DensityMatrix(space, rho0)
        for t in (0.5, 1.7):
            out = propagate(L, rho, t).matrix
            assert abs(out[1, 1] - 0.7 * np.exp(-gamma * t)) < 1e-10
            # H = diag(0, omega) phase-rotates the coherence on top of decay
            assert abs(abs(out[0, 1]) - 0.4 * np.exp(-gamma * t / 2)) < 1e-10

    def test_no_jumps_preserves_purity(self):
        space = build_space([Boson(2), TwoLevel()])
        rng = np.random.default_rng(3)
        h = rng.normal(size=(6, 6))
        H = Operator(space, h + h.T, hermitian=True)
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        rho = DensityMatrix(space, np.outer(psi, psi.conj()))
        out = propagate(L := liouvillian(H, []), rho, 10.0)
        assert abs(out.purity() - 1.0) < 1e-10
        ev0 = np.sort(np.linalg.eigvalsh(rho.matrix))
        ev1 = np.sort(np.linalg.eigvalsh(out.matrix))
        assert np.abs(ev0 - ev1).max() < 1e-8

    def test_trace_left_null_vector(self):
        # Full 36-dim two-cavity model with every decay channel active.
        from polarisim.model import ModelParams, build_hamiltonian, jump_operators

        p = ModelParams()
        L = liouvillian(build_hamiltonian(p), jump_operators(p))
        d = L.space.dim
        tr_vec = vectorize(np.eye(d, dtype=complex))
        resid = np.abs(tr_vec @ L.matrix).max()
        assert resid <= 1e-12 * max(np.abs(L.matrix).max(), 1.0)

    def test_non_hermitian_hamiltonian_rejected(self):
        space = build_space([TwoLevel()])
        H = Operator(space, np.array([[0, 1], [0, 0]]))
        with pytest.raises(ValueError):
            liouvillian(H, [])

    def test_jump_space_mismatch_rejected(self):
        s1 = build_space([TwoLevel()])
        s2 = build_space([TwoLevel(), TwoLevel()])
        H = Operator(s1, np.zeros((2, 2)), hermitian=True)
        with pytest.raises(ValueError):
            liouvillian(H, [factor_operator(s2, 0, "sigma_minus")])


class TestPropagate:
    def test_zero_time_is_identity(self):
        space, L = two_level_decay(1.0)
        rho = DensityMatrix(space, np.array([[0.5, 0.1], [0.1, 0.5]], dtype=complex))
        out = propagate(L, rho, 0.0)
        assert np.array_equal(out.matrix, rho.matrix)

    def test_two_level_decay_value(self):
        space, L = two_level_decay(1.0)
        rho = DensityMatrix(space, np.diag([0.0, 1.0]).astype(complex))
        out = propagate(L, rho, 2.0)
        assert abs(out.matrix[1, 1].real - np.exp(-2.0)) < 1e-8

    def test_exact_vs_rk4_full_model(self):
        from polarisim.model import ModelParams, build_hamiltonian, jump_operators

        p = ModelParams()
        L = liouvillian(build_hamiltonian(p), jump_operators(p))
        rho = L.space.vacuum()
        rho.matrix[0, 0] = 0.4
        idx = L.space.basis_index((1, 0, 0, 0))
        rho.matrix[idx, idx] = 0.6
        exact = propagate(L, rho, 1.0, method="exact")
        rk4 = propagate(L, rho, 1.0, method="rk4", dt=0.001)
        assert np.abs(exact.matrix - rk4.matrix).max() <= 1e-8

    def test_rk4_is_fourth_order(self):
        space, L = two_level_decay(1.0)
        rho = DensityMatrix(space, np.diag([0.2, 0.8]).astype(complex))
        exact = propagate(L, rho, 1.0).matrix
        err = []
        for dt in (0.05, 0.025):
            approx = propagate(L, rho, 1.0, method="rk4", dt=dt).matrix
            err.append(np.abs(approx - exact).max())
        ratio = err[0] / err[1]
        assert 12.0 < ratio < 20.0

    def test_semigroup_property(self):
        space, L = two_level_decay(0.6)
        rho = DensityMatrix(space, np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex))
        once = propagate(L, rho, 1.3)
        split = propagate(L, propagate(L, rho, 0.5), 0.8)
        assert np.abs(once.matrix - split.matrix).max() <= 1e-10

    def test_kind_preserved(self):
        space, L = two_level_decay(1.0)
        branch = DensityMatrix(space, np.array([[0, 1j], [0, 0]]), kind=BRANCH)
        assert propagate(L, branch, 0.3).kind == BRANCH

    def test_rk4_requires_valid_dt(self):
        space, L = two_level_decay(1.0)
        rho = space.vacuum()
        with pytest.raises(ValueError):
            propagate(L, rho, 1.0, method="rk4")
        with pytest.raises(ValueError):
            propagate(L, rho, 1.0, method="rk4", dt=2.0)

    def test_negative_time_rejected(self):
        space, L = two_level_decay(1.0)
        with pytest.raises(ValueError):
            propagate(L, space.vacuum(), -1.0)


@pytest.fixture(scope="module")
def model_liouvillian():
    from polarisim.model import ModelParams, build_hamiltonian, jump_operators

    p = ModelParams()
    L = liouvillian(build_hamiltonian(p), jump_operators(p))
    rho = L.space.vacuum()
    idx = L.space.basis_index((1, 0, 0, 0))
    rho.matrix[0, 0] = 0.3
    rho.matrix[idx, idx] = 0.7
    rho.matrix[0, idx] = rho.matrix[idx, 0] = 0.25
    return L, rho


class TestPhysicalInvariants:
    """Trace, positivity and purity preservation on the full model."""

    def test_trace_preserved_to_20ps(self, model_liouvillian):
        L, rho = model_liouvillian
        for t in (1.0, 5.0, 20.0):
            out = propagate(L, rho, t)
            assert abs(out.trace() - 1.0) <= 1e-8

    def test_positivity_preserved(self, model_liouvillian):
        L, rho = model_liouvillian
        for t in (0.5, 3.0, 12.0):
            out = propagate(L, rho, t)
            assert np.linalg.eigvalsh(out.matrix).min() >= -1e-8

    def test_hermitian_limit_conserves_spectrum(self):
        from polarisim.model import ModelParams, build_hamiltonian, jump_operators

        p = ModelParams(gamma=(0.0, 0.0, 0.0, 0.0, 0.0))
        L = liouvillian(build_hamiltonian(p), jump_operators(p))
        rho = L.space.vacuum()
        idx = L.space.basis_index((1, 0, 0, 0))
        rho.matrix[0, 0] = 0.3
        rho.matrix[idx, idx] = 0.7
        out = propagate(L, rho, 10.0)
        assert abs(out.purity() - rho.purity()) <= 1e-8
        ev0 = np.sort(np.linalg.eigvalsh(rho.matrix))
        ev1 = np.sort(np.linalg.eigvalsh(out.matrix))
        assert np.abs(ev0 - ev1).max() <= 1e-8


class TestExpectation:
    def test_identity_on_physical_state(self):
        space = build_space([Boson(2)])
        rho = space.vacuum()
        ident = factor_operator(space, 0, "identity")
        assert abs(expectation(ident, rho) - 1.0) <= 1e-10

    def test_sigma_z_on_first_basis_state(self):
        space = build_space([TwoLevel()])
        sz = Operator(space, np.diag([1.0, -1.0]), hermitian=True)
        rho = DensityMatrix(space, np.diag([1.0, 0.0]).astype(complex))
        assert expectation(sz, rho) == pytest.approx(1.0)

    def test_quadrature_on_coherence_branch(self):
        # Tr((a + a^+) |1><0|) = <0| a |1> = 1, direct 3x3 trace.
        space = build_space([Boson(2)])
        x = factor_operator(space, 0, "lower") + factor_operator(space, 0, "raise")
        rho = np.zeros((3, 3), dtype=complex)
        rho[1, 0] = 1.0
        branch = DensityMatrix(space, rho, kind=BRANCH)
        assert expectation(x, branch) == pytest.approx(1.0)

    def test_space_mismatch_rejected(self):
        s1 = build_space([TwoLevel()])
        s2 = build_space([Boson(1)])
        with pytest.raises(ValueError):
            expectation(factor_operator(s1, 0, "sigma_minus"), s2.vacuum())
