import numpy as np
import pytest

from qumimo import cloner
from qumimo.errors import DimensionLimitError, SimplexError
from qumimo.tensor import (
    I2,
    PHI_UNNORM,
    ModeSpace,
    dagger,
    haar_qubit,
    partial_trace,
    partial_transpose,
    projector,
)

UNIT3 = 1.0 / np.sqrt(3.0)


def clone_fidelity_from_choi(j, m, k, psi):
    """Fidelity of clone k for input psi, straight from the Choi."""
    space = ModeSpace.qubits(range(1, m + 2))
    marg = partial_trace(j, space, (1, k + 1))
    rho_in = projector(psi)
    out = np.einsum("iokp,ik->op", marg.reshape(2, 2, 2, 2), rho_in)
    return float(np.real(psi.conj() @ out @ psi))


class TestWeightMatrix:
    def test_symmetric_two(self):
        a = cloner.weight_matrix((0.5, 0.5))
        assert np.allclose(a, [[1.0, 0.5], [0.5, 1.0]])

    def test_vertex(self):
        a = cloner.weight_matrix((1.0, 0.0))
        assert np.allclose(a, [[2.0, 1.0], [0.0, 0.0]])

    def test_rank_one_plus_diagonal_structure(self):
        rng = np.random.default_rng(0)
        g = rng.dirichlet(np.ones(4))
        a = cloner.weight_matrix(tuple(g))
        columns = a - np.diag(g)
        for j in range(4):
            assert np.allclose(columns[:, j], g)

    def test_simplex_violation(self):
        with pytest.raises(SimplexError):
            cloner.weight_matrix((0.5, 0.2))
        with pytest.raises(SimplexError):
            cloner.weight_matrix((1.2, -0.2))


class TestCloneAmplitudes:
    def test_symmetric_two(self):
        # power iteration on [[1,.5],[.5,1]] gives u = (1,1)/sqrt(2);
        # scale sqrt(2/((sqrt2)^2+1)) = sqrt(2/3)
        amp = cloner.clone_amplitudes((0.5, 0.5))
        assert np.allclose(amp.beta, [UNIT3, UNIT3], atol=1e-10)

    def test_vertex(self):
        amp = cloner.clone_amplitudes((1.0, 0.0))
        assert np.allclose(amp.beta, [1.0, 0.0], atol=1e-12)

    def test_symmetric_three(self):
        amp = cloner.clone_amplitudes((1 / 3, 1 / 3, 1 / 3))
        assert np.allclose(amp.beta, [1 / np.sqrt(6)] * 3, atol=1e-10)

    def test_normalization_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            m = int(rng.integers(2, 6))
            beta = np.asarray(cloner.clone_amplitudes(tuple(rng.dirichlet(np.ones(m)))).beta)
            assert abs(beta @ beta + beta.sum() ** 2 - 2.0) < 1e-9


class TestCloneFidelities:
    def test_symmetric_two(self):
        f = cloner.clone_fidelities((0.5, 0.5)).fidelities
        assert np.allclose(f, [5 / 6, 5 / 6], atol=1e-10)

    def test_vertex(self):
        f = cloner.clone_fidelities((1.0, 0.0)).fidelities
        assert np.allclose(f, [1.0, 0.5], atol=1e-10)

    def test_symmetric_three(self):
        f = cloner.clone_fidelities((1 / 3, 1 / 3, 1 / 3)).fidelities
        assert np.allclose(f, [7 / 9] * 3, atol=1e-10)

    def test_symmetric_closed_form(self):
        for m in (2, 3, 4):
            f = cloner.clone_fidelities(tuple([1 / m] * m)).fidelities
            assert np.allclose(f, (2 * m + 1) / (3 * m), atol=1e-6)

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            m = int(rng.integers(2, 6))
            f = np.asarray(cloner.clone_fidelities(tuple(rng.dirichlet(np.ones(m)))).fidelities)
            assert np.all(f >= 0.5 - 1e-12) and np.all(f <= 1.0 + 1e-12)

    def test_monotone_in_own_weight(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m = int(rng.integers(2, 5))
            g = rng.dirichlet(np.ones(m))
            k = int(rng.integers(m))
            bump = np.array(g)
            bump[k] += 0.05
            bump /= bump.sum()
            f0 = cloner.clone_fidelities(tuple(g)).fidelities[k]
            f1 = cloner.clone_fidelities(tuple(bump)).fidelities[k]
            assert f1 >= f0 - 1e-8


class TestClonerChoi:
    def test_single_clone_is_identity_channel(self):
        ch = cloner.cloner_choi((1.0,))
        assert np.max(np.abs(ch.choi - PHI_UNNORM)) < 1e-6

    def test_symmetric_two_fidelity(self):
        ch = cloner.cloner_choi((0.5, 0.5))
        assert np.allclose(ch.fidelities, [5 / 6, 5 / 6], atol=1e-4)

    def test_asymmetric_two_against_analytic(self):
        # analytic M=2 cloner oracle: alpha^2 + beta^2 + alpha beta = 1,
        # F_A = 1 - beta^2/2, F_B = 1 - alpha^2/2
        gamma = (0.8, 0.2)
        beta = np.asarray(cloner.clone_amplitudes(gamma).beta)
        assert abs(beta[0] ** 2 + beta[1] ** 2 + beta[0] * beta[1] - 1.0) < 1e-9
        ch = cloner.cloner_choi(gamma)
        assert abs(ch.fidelities[0] - (1 - beta[1] ** 2 / 2)) < 1e-4
        assert abs(ch.fidelities[1] - (1 - beta[0] ** 2 / 2)) < 1e-4

    def test_symmetric_two_against_stinespring_state(self):
        """Independent oracle: the explicit symmetric Stinespring state
        |Psi> = a |psi>_A |Phi+>_BE + a |psi>_B |Phi+>_AE, a = 1/sqrt(3),
        reproduces the 5/6 marginals for Haar inputs."""
        rng = np.random.default_rng(4)
        a = UNIT3
        for _ in range(20):
            psi = haar_qubit(rng)
            phi_plus = np.array([1, 0, 0, 1]) / np.sqrt(2)
            # qubit order (A, B, E)
            term_a = np.einsum("a,be->abe", psi, phi_plus.reshape(2, 2))
            term_b = np.einsum("b,ae->abe", psi, phi_plus.reshape(2, 2))
            state = (a * term_a + a * term_b).reshape(-1)
            rho = projector(state)
            space = ModeSpace.qubits("ABE")
            for label in "AB":
                marg = partial_trace(rho, space, (label,))
                fid = float(np.real(psi.conj() @ marg @ psi))
                assert abs(fid - 5 / 6) < 1e-12

    def test_choi_matches_closed_form_sweep(self):
        rng = np.random.default_rng(5)
        for trial in range(50):
            m = 2 if trial % 2 == 0 else 3
            g = tuple(rng.dirichlet(np.ones(m)))
            ch = cloner.cloner_choi(g)
            cf = cloner.clone_fidelities(g).fidelities
            assert np.max(np.abs(np.asarray(ch.fidelities) - np.asarray(cf))) < 1e-4

    def test_invariants(self):
        ch = cloner.cloner_choi((0.6, 0.3, 0.1))
        space = ModeSpace.qubits(range(1, 5))
        assert np.linalg.eigvalsh(ch.choi)[0] >= -1e-9
        assert np.max(np.abs(partial_trace(ch.choi, space, (1,)) - I2)) < 1e-8

    def test_universality_constant_fidelity(self):
        ch = cloner.cloner_choi((0.7, 0.3))
        rng = np.random.default_rng(6)
        for k in (1, 2):
            fids = [
                clone_fidelity_from_choi(ch.choi, 2, k, haar_qubit(rng))
                for _ in range(100)
            ]
            assert max(fids) - min(fids) < 1e-6
            assert abs(np.mean(fids) - ch.fidelities[k - 1]) < 1e-6


class TestTwirl:
    def test_projection_idempotent(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        h = (a + dagger(a)) / 2
        once = cloner.twirl_permutation_algebra(h, 3)
        twice = cloner.twirl_permutation_algebra(once, 3)
        assert np.max(np.abs(twice - once)) < 1e-10

    def test_fixed_point_in_span(self):
        # an element already in span{P_sigma} is untouched
        from qumimo.tensor import perm_basis_map

        dim = 8
        el = np.zeros((dim, dim), dtype=complex)
        for perm, w in [((1, 2, 3), 0.5), ((2, 1, 3), 0.3), ((3, 2, 1), 0.2)]:
            qmap = perm_basis_map(perm, 3)
            el[qmap, np.arange(dim)] += w
        out = cloner.twirl_permutation_algebra(el, 3)
        assert np.max(np.abs(out - el)) < 1e-10

    def test_trace_preserved(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        h = (a + dagger(a)) / 2
        out = cloner.twirl_permutation_algebra(h, 4)
        assert abs(np.trace(out) - np.trace(h)) < 1e-9

    def test_output_commutes_with_tensor_unitaries(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        out = cloner.twirl_permutation_algebra((a + dagger(a)) / 2, 3)
        for _ in range(20):
            z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            u, _ = np.linalg.qr(z)
            u3 = np.kron(np.kron(u, u), u)
            comm = out @ u3 - u3 @ out
            assert np.max(np.abs(comm)) < 1e-8

    def test_objective_values_preserved(self):
        gamma = (0.5, 0.3, 0.2)
        g_ops = cloner.fidelity_functionals(3)
        ch = cloner.cloner_choi(gamma)
        space = ModeSpace.qubits(range(1, 5))
        k_op = partial_transpose(ch.choi, space, (1,))
        k_tw = cloner.twirl_permutation_algebra(k_op, 4)
        j_again = partial_transpose(k_tw, space, (1,))
        for g_k, f in zip(g_ops, ch.fidelities):
            assert abs(np.real(np.trace(j_again @ g_k)) - f) < 1e-9

    def test_dimension_cap(self):
        with pytest.raises(DimensionLimitError):
            cloner.twirl_permutation_algebra(np.eye(2 ** 7, dtype=complex), 7)


class TestFeasibleBoundary:
    def test_contains_vertices_and_symmetric_point(self):
        pts = cloner.feasible_boundary(2, 0.05)
        fids = {tuple(np.round(p.fidelities, 9)) for p in pts}
        assert (1.0, 0.5) in fids and (0.5, 1.0) in fids
        sym = tuple(np.round([5 / 6, 5 / 6], 9))
        assert sym in fids

    def test_baseline_bound(self):
        for m in (2, 3):
            for p in cloner.feasible_boundary(m, 0.25):
                assert min(p.fidelities) >= 0.5 - 1e-12

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            cloner.feasible_boundary(4, 0.05)
        with pytest.raises(ValueError):
            cloner.feasible_boundary(2, 0.5)
