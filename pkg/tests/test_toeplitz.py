import numpy as np
import pytest

from conftest import random_cost_spec, random_folti
from foctl.dynamics import propagators
from foctl.errors import IterativeSolveError, SingularSystemError
from foctl.lqr import build_lagrange
from foctl.toeplitz import BlockToeplitz, LastRowCorrected, matvec, solve


def random_operator(rng, num_blocks, block_size, diag_boost=0.0):
    col = rng.standard_normal((num_blocks, block_size, block_size))
    row = rng.standard_normal((num_blocks, block_size, block_size))
    col[0] += diag_boost * np.eye(block_size)
    row[0] = col[0]
    return BlockToeplitz(first_block_col=col, first_block_row=row)


class TestBlockToeplitz:
    def test_generator_validation(self):
        col = np.zeros((2, 2, 2))
        row = np.zeros((2, 2, 2))
        row[0, 0, 0] = 1.0
        with pytest.raises(ValueError, match="shared"):
            BlockToeplitz(first_block_col=col, first_block_row=row)

    def test_identity_matvec(self, rng):
        op = BlockToeplitz.identity(4, 3)
        v = rng.standard_normal(12)
        assert np.allclose(matvec(op, v), v)

    def test_zero_generators(self, rng):
        op = BlockToeplitz(first_block_col=np.zeros((3, 2, 2)), first_block_row=np.zeros((3, 2, 2)))
        assert np.allclose(matvec(op, rng.standard_normal(6)), 0.0)

    def test_matvec_matches_dense(self, rng):
        for _ in range(20):
            t = int(rng.integers(1, 33))
            n = int(rng.integers(1, 5))
            op = random_operator(rng, t, n)
            v = rng.standard_normal(t * n)
            dense = op.to_dense() @ v
            out = matvec(op, v)
            assert np.allclose(out, dense, rtol=1e-12, atol=1e-12 * max(1, np.abs(dense).max()))

    def test_from_dense_round_trip(self, rng):
        op = random_operator(rng, 4, 2)
        rebuilt = BlockToeplitz.from_dense(op.to_dense(), 2)
        assert np.array_equal(rebuilt.to_dense(), op.to_dense())

    def test_from_dense_rejects_non_toeplitz(self, rng):
        dense = rng.standard_normal((6, 6))
        with pytest.raises(ValueError, match="not block Toeplitz"):
            BlockToeplitz.from_dense(dense, 2)

    def test_dimension_mismatch(self, rng):
        op = random_operator(rng, 3, 2)
        with pytest.raises(ValueError):
            matvec(op, np.zeros(5))


class TestSolve:
    def test_identity_returns_rhs(self, rng):
        op = BlockToeplitz.identity(3, 2)
        rhs = rng.standard_normal(6)
        assert np.allclose(solve(op, rhs, method="dense"), rhs)
        assert np.allclose(solve(op, rhs, method="iterative"), rhs)

    def test_cross_method_agreement(self, rng):
        for _ in range(10):
            op = random_operator(rng, 4, 2, diag_boost=6.0)
            rhs = rng.standard_normal(8)
            xd = solve(op, rhs, method="dense")
            xi = solve(op, rhs, method="iterative", tol=1e-12)
            assert np.linalg.norm(xd - xi) <= 1e-8 * np.linalg.norm(xd)

    def test_residuals_within_tolerance(self, rng):
        tol = 1e-10
        for _ in range(5):
            op = random_operator(rng, 5, 2, diag_boost=8.0)
            rhs = rng.standard_normal(10)
            for method in ("dense", "iterative"):
                x = solve(op, rhs, method=method, tol=tol)
                res = np.linalg.norm(matvec(op, x) - rhs) / np.linalg.norm(rhs)
                assert res <= 10 * tol

    def test_singular_dense_raises(self, rng):
        op = BlockToeplitz(first_block_col=np.zeros((2, 2, 2)), first_block_row=np.zeros((2, 2, 2)))
        with pytest.raises(SingularSystemError) as info:
            solve(op, rng.standard_normal(4), method="dense")
        assert not np.isfinite(info.value.cond_estimate)

    def test_singular_iterative_raises_with_residual(self, rng):
        op = BlockToeplitz(first_block_col=np.zeros((2, 2, 2)), first_block_row=np.zeros((2, 2, 2)))
        with pytest.raises(IterativeSolveError) as info:
            solve(op, rng.standard_normal(4), method="iterative")
        assert info.value.residual > 0

    def test_unknown_method(self, rng):
        op = BlockToeplitz.identity(2, 2)
        with pytest.raises(ValueError):
            solve(op, np.zeros(4), method="lu")


class TestLagrangeStructure:
    def test_multiplier_system_is_block_toeplitz_when_weights_match(self, rng):
        model = random_folti(rng, n=2, m=2)
        props = propagators(model, 6)
        cost = random_cost_spec(rng, 2, 2, qf_equals_q=True)
        lsys = build_lagrange(model, props, cost, 6)
        assert isinstance(lsys.system, BlockToeplitz)
        dense = np.eye(12) - lsys.coupling
        # exact structural check: generators reproduce the assembled matrix
        rebuilt = BlockToeplitz.from_dense(dense, 2, atol=0.0)
        assert np.array_equal(rebuilt.to_dense(), lsys.system.to_dense())

    def test_distinct_terminal_weight_uses_row_correction(self, rng):
        model = random_folti(rng, n=2, m=1)
        props = propagators(model, 5)
        cost = random_cost_spec(rng, 2, 1, qf_equals_q=False)
        lsys = build_lagrange(model, props, cost, 5)
        assert isinstance(lsys.system, LastRowCorrected)
        dense = np.eye(10) - lsys.coupling
        assert np.allclose(lsys.system.to_dense(), dense, atol=1e-12)
        v = rng.standard_normal(10)
        assert np.allclose(lsys.system.matvec(v), dense @ v, atol=1e-10)

    def test_corrected_solve_matches_dense_assembly(self, rng):
        model = random_folti(rng, n=2, m=1)
        props = propagators(model, 5)
        cost = random_cost_spec(rng, 2, 1, qf_equals_q=False)
        lsys = build_lagrange(model, props, cost, 5)
        rhs = rng.standard_normal(10)
        x_dense = solve(lsys.system, rhs, method="dense")
        x_iter = solve(lsys.system, rhs, method="iterative", tol=1e-12)
        ref = np.linalg.solve(np.eye(10) - lsys.coupling, rhs)
        assert np.allclose(x_dense, ref, atol=1e-9)
        assert np.allclose(x_iter, ref, atol=1e-8)
