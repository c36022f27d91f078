import numpy as np
import pytest

from qumimo import sdp
from qumimo.errors import DimensionLimitError, NotHermitianError
from qumimo.tensor import SIGMA_X, SIGMA_Y, dagger


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + dagger(a)) / 2


def lambda_max_problem(c):
    n = c.shape[0]
    return sdp.SdpProblem(
        block_dims=[n], objective=[c], equalities=[({0: np.eye(n, dtype=complex)}, 1.0)]
    )


class TestRealify:
    def test_identity(self):
        assert np.array_equal(sdp.realify(np.eye(2, dtype=complex)), np.eye(4))

    def test_sigma_y_eigenvalues(self):
        r = sdp.realify(SIGMA_Y)
        # eigen-oracle on the embedding: doubled multiplicities
        assert np.allclose(np.linalg.eigvalsh(r), [-1, -1, 1, 1])

    def test_trace_doubles(self):
        rng = np.random.default_rng(0)
        h = random_hermitian(rng, 5)
        assert abs(np.trace(sdp.realify(h)) - 2 * np.trace(h).real) < 1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            sdp.realify(np.array([[0, 1], [0, 0]], dtype=complex))


class TestSolve:
    def test_diagonal_objective(self):
        sol = sdp.solve(lambda_max_problem(np.diag([1.0, 2.0]).astype(complex)))
        assert sol.status == sdp.OPTIMAL
        assert abs(sol.value - 2.0) < 1e-7
        x = sol.X_blocks[0]
        assert abs(x[1, 1] - 1.0) < 1e-6 and abs(x[0, 0]) < 1e-6

    def test_sigma_x_objective(self):
        sol = sdp.solve(lambda_max_problem(SIGMA_X))
        assert sol.status == sdp.OPTIMAL
        assert abs(sol.value - 1.0) < 1e-7

    def test_eigenvalue_oracle_sweep(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(4, 33))
            c = random_hermitian(rng, n)
            sol = sdp.solve(lambda_max_problem(c))
            lam = np.linalg.eigvalsh(c)[-1]  # independent eigen-oracle
            assert sol.status == sdp.OPTIMAL
            assert abs(sol.value - lam) < 1e-7

    def test_infeasible(self):
        prob = sdp.SdpProblem(
            [3], [np.zeros((3, 3), dtype=complex)],
            [({0: np.eye(3, dtype=complex)}, -1.0)],
        )
        assert sdp.solve(prob).status == sdp.INFEASIBLE

    def test_unbounded(self):
        prob = sdp.SdpProblem(
            [2], [np.eye(2, dtype=complex)],
            [({0: np.diag([1.0, -1.0]).astype(complex)}, 0.0)],
        )
        assert sdp.solve(prob).status == sdp.UNBOUNDED

    def test_multiblock_coupling(self):
        # maximize Tr[C X] s.t. Tr[X] + Tr[S] = 1 with both PSD:
        # optimum puts all mass on the larger top-eigenvalue block.
        c = np.diag([1.0, 3.0]).astype(complex)
        prob = sdp.SdpProblem(
            [2, 2],
            [c, np.zeros((2, 2), dtype=complex)],
            [({0: np.eye(2, dtype=complex), 1: np.eye(2, dtype=complex)}, 1.0)],
        )
        sol = sdp.solve(prob)
        assert sol.status == sdp.OPTIMAL
        assert abs(sol.value - 3.0) < 1e-7

    def test_scaling_invariance_of_argmax(self):
        rng = np.random.default_rng(2)
        c = random_hermitian(rng, 6)
        sol1 = sdp.solve(lambda_max_problem(c))
        sol5 = sdp.solve(lambda_max_problem(5.0 * c))
        assert abs(sol5.value - 5.0 * sol1.value) < 1e-6
        assert np.max(np.abs(sol5.X_blocks[0] - sol1.X_blocks[0])) < 1e-6

    def test_weak_duality_each_iteration(self):
        # internal min form: dual <= primal; reported gap covers the gap,
        # so (max convention) dual >= primal - gap at every logged step.
        rng = np.random.default_rng(3)
        sol = sdp.solve(lambda_max_problem(random_hermitian(rng, 8)))
        for pobj, dobj, relgap, _, _, _ in sol.iteration_log:
            primal_ext, dual_ext = -pobj / 2, -dobj / 2
            gap = abs(primal_ext - dual_ext)
            assert dual_ext >= primal_ext - gap - 1e-15

    def test_dimension_cap(self):
        n = 300  # realified 600 > 512
        with pytest.raises(DimensionLimitError):
            sdp.solve(lambda_max_problem(np.eye(n, dtype=complex)))


class TestVerify:
    def test_reports_clean_solution(self):
        rng = np.random.default_rng(4)
        c = random_hermitian(rng, 8)
        prob = lambda_max_problem(c)
        sol = sdp.solve(prob)
        report = sdp.verify(prob, sol)
        assert report.feasible
        assert report.gap <= 1e-6
        assert len(report.constraint_residuals) == 1
        assert report.psd_floor >= -1e-8

    def test_flags_constructed_violation(self):
        rng = np.random.default_rng(5)
        c = random_hermitian(rng, 4)
        prob = lambda_max_problem(c)
        sol = sdp.solve(prob)
        bad = sdp.SdpSolution(
            X_blocks=[sol.X_blocks[0] + 0.1 * np.eye(4)],
            y=sol.y, status=sdp.OPTIMAL, gap=sol.gap,
            iterations=sol.iterations, value=sol.value, dual_value=sol.dual_value,
        )
        assert not sdp.verify(prob, bad).feasible


class TestDump:
    def test_round_trip_parse(self, tmp_path):
        rng = np.random.default_rng(6)
        prob = lambda_max_problem(random_hermitian(rng, 3))
        path = tmp_path / "problem.txt"
        sdp.dump_problem(prob, path)
        lines = path.read_text().strip().splitlines()
        assert lines[1].startswith("blocks 3")
        kinds = {line.split()[0] for line in lines[1:]}
        assert {"blocks", "obj", "con", "rhs"} <= kinds
