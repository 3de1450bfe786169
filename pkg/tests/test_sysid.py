import numpy as np
import pytest

from conftest import random_folti
from foctl.dynamics import Convention, effective_transition, simulate
from foctl.errors import IdentifiabilityError
from foctl.sysid import (
    RegressionData,
    alpha_from_coupled_diag,
    build_regression,
    estimate,
    estimator_covariance,
)


def protocol_samples(rng, a_alpha, b, p, sigma=0.0):
    """Draw one-step samples from x1 = A_alpha x0 + B u0 + w."""
    n, m = b.shape
    x0 = rng.standard_normal((p, n))
    u0 = rng.standard_normal((p, m))
    w = sigma * rng.standard_normal((p, n))
    x1 = x0 @ a_alpha.T + u0 @ b.T + w
    return x0, u0, x1


class TestBuildRegression:
    def test_scalar_layout(self):
        data = RegressionData(x0=[[2.0]], u0=[[3.0]], x1=[[1.0]], known_diag_a=[0.0])
        xi, target = build_regression(data)
        assert np.array_equal(xi, [[2.0, 3.0]])
        assert np.array_equal(target, [1.0])

    def test_two_sample_stacking(self):
        data = RegressionData(
            x0=[[1.0], [2.0]], u0=[[1.0], [-1.0]], x1=[[0.0], [0.0]], known_diag_a=[0.0]
        )
        xi, _ = build_regression(data)
        assert np.array_equal(xi, [[1.0, 1.0], [2.0, -1.0]])

    def test_block_diagonal_layout(self):
        data = RegressionData(
            x0=[[1.0, 2.0]], u0=[[3.0]], x1=[[0.0, 0.0]], known_diag_a=[0.0, 0.0]
        )
        xi, _ = build_regression(data)
        assert xi.shape == (2, 6)
        assert np.array_equal(xi[0], [1.0, 2.0, 0.0, 0.0, 3.0, 0.0])
        assert np.array_equal(xi[1], [0.0, 0.0, 1.0, 2.0, 0.0, 3.0])


class TestEstimate:
    def test_scalar_worked_example(self):
        data = RegressionData(
            x0=[[1.0], [2.0]],
            u0=[[1.0], [-1.0]],
            x1=[[1.8], [0.6]],
            known_diag_a=[0.3],
        )
        est = estimate(data)
        assert est.a_alpha_hat[0, 0] == pytest.approx(0.8, abs=1e-12)
        assert est.b_hat[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert est.alpha_hat[0] == pytest.approx(0.5, abs=1e-12)

    def test_underdetermined_raises(self):
        data = RegressionData(x0=[[1.0]], u0=[[1.0]], x1=[[1.0]], known_diag_a=[0.0])
        with pytest.raises(IdentifiabilityError) as info:
            estimate(data)
        assert info.value.null_space_dim >= 1

    def test_noiseless_exact_recovery(self, rng):
        for _ in range(10):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            a_alpha = rng.uniform(-1, 1, (n, n))
            b = rng.uniform(-1, 1, (n, m))
            x0, u0, x1 = protocol_samples(rng, a_alpha, b, p=2 * (n + m))
            diag_a = np.diag(a_alpha) - 0.4
            est = estimate(RegressionData(x0, u0, x1, diag_a))
            assert np.allclose(est.a_alpha_hat, a_alpha, atol=1e-10)
            assert np.allclose(est.b_hat, b, atol=1e-10)
            assert np.allclose(est.alpha_hat, 0.4, atol=1e-10)
            assert est.residual_norm <= 1e-10

    def test_matches_full_design_solve(self, rng):
        n, m, p = 2, 2, 12
        a_alpha = rng.uniform(-1, 1, (n, n))
        b = rng.uniform(-1, 1, (n, m))
        x0, u0, x1 = protocol_samples(rng, a_alpha, b, p, sigma=0.1)
        data = RegressionData(x0, u0, x1, np.zeros(n))
        est = estimate(data)
        xi, target = build_regression(data)
        theta, *_ = np.linalg.lstsq(xi, target, rcond=None)
        assert np.allclose(est.a_alpha_hat.reshape(-1), theta[: n * n], atol=1e-10)
        assert np.allclose(est.b_hat.reshape(-1), theta[n * n :], atol=1e-10)

    def test_convention_aware_extraction_from_trajectories(self, rng):
        # toolkit trajectories carry the A - diag(alpha) one-step map
        model = random_folti(rng, n=2, m=1)
        samples = [
            simulate(model, rng.standard_normal(2), rng.uniform(-1, 1, (1, 1)))
            for _ in range(12)
        ]
        data = RegressionData(
            x0=np.array([t.states[0] for t in samples]),
            u0=np.array([t.inputs[0] for t in samples]),
            x1=np.array([t.states[1] for t in samples]),
            known_diag_a=np.diag(model.a),
        )
        est = estimate(data, convention=Convention.A_MINUS_DIAG)
        assert np.allclose(est.a_alpha_hat, effective_transition(model), atol=1e-9)
        assert np.allclose(est.alpha_hat, model.order.alpha, atol=1e-9)

    def test_extraction_helper_signs(self):
        diag = np.array([0.8])
        known = np.array([0.3])
        assert alpha_from_coupled_diag(diag, known, Convention.A_PLUS_DIAG)[0] == pytest.approx(0.5)
        assert alpha_from_coupled_diag(known - 0.5, known, Convention.A_MINUS_DIAG)[0] == pytest.approx(0.5)

    def test_unbiasedness(self, rng):
        n, m, p, reps = 1, 1, 20, 3000
        a_alpha = np.array([[0.6]])
        b = np.array([[0.9]])
        sigma = 0.2
        estimates = np.empty((reps, 2))
        for r in range(reps):
            x0, u0, x1 = protocol_samples(rng, a_alpha, b, p, sigma=sigma)
            est = estimate(RegressionData(x0, u0, x1, [0.0]))
            estimates[r] = [est.a_alpha_hat[0, 0], est.b_hat[0, 0]]
        mean = estimates.mean(axis=0)
        se = estimates.std(axis=0, ddof=1) / np.sqrt(reps)
        assert abs(mean[0] - 0.6) <= 3 * se[0]
        assert abs(mean[1] - 0.9) <= 3 * se[1]


class TestEstimatorCovariance:
    def test_attached_to_estimate_when_noise_known(self, rng):
        n, m, p = 2, 1, 10
        a_alpha = rng.uniform(-1, 1, (n, n))
        b = rng.uniform(-1, 1, (n, m))
        x0, u0, x1 = protocol_samples(rng, a_alpha, b, p, sigma=0.1)
        est = estimate(RegressionData(x0, u0, x1, np.zeros(n)), noise_cov=0.01 * np.eye(n))
        assert est.theta_cov is not None
        assert est.theta_cov.shape == (n * n + n * m, n * n + n * m)
        assert np.allclose(est.theta_cov, est.theta_cov.T)
        assert np.linalg.eigvalsh(est.theta_cov)[0] >= -1e-12

    def test_zero_noise(self, rng):
        xi = rng.standard_normal((12, 4))
        cov = estimator_covariance(xi, np.zeros((2, 2)))
        assert np.allclose(cov, 0.0)

    def test_orthonormal_design_collapses(self):
        xi = np.eye(6)[:, :3]
        cov = estimator_covariance(xi, 0.25 * np.eye(2))
        assert np.allclose(cov, 0.25 * np.eye(3))

    def test_symmetric_psd(self, rng):
        n, m, p = 2, 1, 10
        a_alpha = rng.uniform(-1, 1, (n, n))
        b = rng.uniform(-1, 1, (n, m))
        x0, u0, x1 = protocol_samples(rng, a_alpha, b, p)
        xi, _ = build_regression(RegressionData(x0, u0, x1, np.zeros(n)))
        cov = estimator_covariance(xi, 0.3 * np.eye(n) + 0.1, n_repeats=4)
        assert np.allclose(cov, cov.T, atol=1e-12)
        assert np.linalg.eigvalsh(cov)[0] >= -1e-12

    def test_monte_carlo_oracle(self, rng):
        # fixed design, many noise redraws: empirical covariance trace matches
        n, m, p = 2, 1, 15
        a_alpha = rng.uniform(-1, 1, (n, n))
        b = rng.uniform(-1, 1, (n, m))
        x0 = rng.standard_normal((p, n))
        u0 = rng.standard_normal((p, m))
        sigma = 0.3
        data0 = RegressionData(x0, u0, x0 @ a_alpha.T + u0 @ b.T, np.zeros(n))
        xi, _ = build_regression(data0)
        predicted = estimator_covariance(xi, sigma**2 * np.eye(n))

        reps = 100_000
        proj = np.linalg.solve(xi.T @ xi, xi.T)  # maps stacked noise to estimate error
        noise = sigma * rng.standard_normal((reps, p * n))
        errors = noise @ proj.T
        empirical_trace = float(np.einsum("ri,ri->", errors, errors) / reps)
        assert empirical_trace == pytest.approx(np.trace(predicted), rel=0.05)
