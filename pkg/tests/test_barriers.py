import math

import numpy as np
import pytest

from dikin.barriers import (
    LOG,
    LS,
    MetricKind,
    constant_metric,
    ellipsoid_norm,
    evaluate_metric,
    hessian_directional_derivative,
    leverage_scores,
    log_barrier_hessian,
    logdet_metric,
    ls_exponent,
    ls_matrix,
    ls_weight_iterates,
    ls_weights,
)
from dikin.exceptions import NoConvergence, NotInterior, StepOutOfDomain
from dikin.polytope import cube, make_polytope, random_polytope


def ls_derivative_oracle(ev, h):
    """Exact ``DH[h]`` of the LS matrix by implicit differentiation.

    At the fixed point ``sigma(w) = w`` the log-weights move by
    ``du = -2 (I - beta L)^-1 L g`` where ``g = A h / s`` and
    ``L = I - Sigma^-1 P2`` is the Jacobian of log leverage scores with
    respect to log row weights.
    """
    P = ev.polytope
    q = ev.kind.q
    beta = 1.0 - 2.0 / q
    s, w = ev.slacks, ev.weights
    As = P.A / s[:, None]
    B = As * np.sqrt(w ** beta)[:, None]
    proj = B @ np.linalg.solve(B.T @ B, B.T)
    sigma = np.diag(proj)
    L = np.eye(P.m) - (proj * proj) / sigma[:, None]
    g = (P.A @ h) / s
    du = -2.0 * np.linalg.solve(np.eye(P.m) - beta * L, L @ g)
    v = w ** beta / s ** 2
    dv = v * (beta * du - 2.0 * g)
    return ev.kind.scale * (P.A.T * dv) @ P.A


class TestMetricKind:
    @pytest.mark.parametrize("m", [2, 10, 1000])
    def test_q_above_two(self, m):
        assert ls_exponent(m) > 2

    def test_q_single_constraint(self):
        assert ls_exponent(1) == 2.0

    def test_unknown(self, square):
        with pytest.raises(ValueError):
            MetricKind.for_polytope("volumetric", square)


class TestLogBarrier:
    def test_cube_center(self, square):
        ev = log_barrier_hessian(square, [0.5, 0.5])
        np.testing.assert_allclose(ev.slacks, 0.5)
        np.testing.assert_allclose(ev.H, 8 * np.eye(2))

    def test_halfspace(self):
        P = make_polytope([[1.0]], [0.0])
        np.testing.assert_allclose(log_barrier_hessian(P, [2.0]).H, [[0.25]])

    def test_brute_force(self, random_body, rng, interior_point):
        P = random_body
        x = interior_point(P, rng)
        want = sum(np.outer(a, a) / (a @ x - bi) ** 2 for a, bi in zip(P.A, P.b))
        ev = log_barrier_hessian(P, x)
        np.testing.assert_allclose(ev.H, want, rtol=1e-10)
        assert np.linalg.norm(ev.chol @ ev.chol.T - ev.H) <= 1e-8 * np.linalg.norm(ev.H)
        np.testing.assert_allclose(logdet_metric(ev),
                                   np.log(np.linalg.eigvalsh(ev.H)).sum(),
                                   rtol=1e-8)

    def test_exterior(self, square):
        with pytest.raises(NotInterior):
            log_barrier_hessian(square, [1.0, 0.5])


class TestLSWeights:
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_cube_center(self, n):
        st = ls_weights(cube(n), np.full(n, 0.5))
        np.testing.assert_allclose(st.w, 0.5, atol=1e-9)

    def test_square_system(self, rng):
        A = rng.standard_normal((3, 3))
        P = make_polytope(A, A @ np.zeros(3) - 1.0)
        st = ls_weights(P, np.zeros(3))
        np.testing.assert_allclose(st.w, 1.0, atol=1e-9)

    def test_fixed_point(self, random_body, rng, interior_point):
        P = random_body
        x = interior_point(P, rng)
        st = ls_weights(P, x)
        assert st.residual <= 1e-10
        assert np.all(st.w > 0) and np.all(st.w <= 1 + 1e-12)
        assert st.w.sum() == pytest.approx(P.n, abs=1e-6)
        # independent leverage-score evaluation at the returned weights
        q = ls_exponent(P.m)
        B = (P.A / P.slack(x)[:, None]) * (st.w ** (0.5 - 1.0 / q))[:, None]
        sigma = np.diag(B @ np.linalg.pinv(B))
        np.testing.assert_allclose(sigma, st.w, atol=1e-9)

    def test_warm_matches_cold(self, random_body, rng, interior_point):
        P = random_body
        x = interior_point(P, rng)
        cold = ls_weights(P, x)
        warm = ls_weights(P, x + 1e-3 * P.slack(x).min() * rng.standard_normal(P.n),
                          w0=cold.w)
        rerun = ls_weights(P, x, w0=warm.w)
        np.testing.assert_allclose(rerun.w, cold.w, atol=1e-6)
        assert warm.iterations < cold.iterations

    @pytest.mark.parametrize("method", ["newton", "fixed_point"])
    def test_trace_identity_every_iterate(self, method, rng):
        P = random_polytope(20, 4, seed=3)
        for k, st in enumerate(ls_weight_iterates(P, np.zeros(4), method=method)):
            assert st.sigma.sum() == pytest.approx(4.0, abs=1e-8)
            assert np.all(st.sigma >= -1e-12) and np.all(st.sigma <= 1 + 1e-12)
            if k == 30:
                break

    def test_methods_agree(self):
        P = random_polytope(15, 3, seed=4)
        a = ls_weights(P, np.zeros(3))
        b = ls_weights(P, np.zeros(3), method="fixed_point")
        np.testing.assert_allclose(a.w, b.w, atol=1e-8)

    def test_no_convergence(self):
        P = random_polytope(15, 3, seed=4)
        with pytest.raises(NoConvergence):
            ls_weights(P, np.zeros(3), max_iter=1, method="fixed_point")

    def test_leverage_scores(self, rng):
        B = rng.standard_normal((7, 3))
        sigma, Z = leverage_scores(B)
        proj = B @ np.linalg.solve(B.T @ B, B.T)
        np.testing.assert_allclose(sigma, np.diag(proj), atol=1e-12)
        np.testing.assert_allclose(Z.T @ Z, proj, atol=1e-12)


class TestLSMatrix:
    def test_square_center(self, square):
        q = 2 * (1 + math.log(4))
        want = (1 + q ** 2) * (1 + q) * 0.5 ** (1 - 2 / q) * 8
        ev = ls_matrix(square, [0.5, 0.5])
        np.testing.assert_allclose(ev.H, want * np.eye(2), rtol=1e-9)
        assert ev.kind.q == pytest.approx(q)

    def test_square_system_is_scaled_log_barrier(self, rng):
        A = rng.standard_normal((3, 3))
        P = make_polytope(A, -np.ones(3))
        x = np.zeros(3)
        ev = ls_matrix(P, x)
        np.testing.assert_allclose(
            ev.H, ev.kind.scale * log_barrier_hessian(P, x).H, rtol=1e-9)

    def test_random_spd(self, random_body, rng, interior_point):
        P = random_body
        ev = ls_matrix(P, interior_point(P, rng))
        assert np.all(np.linalg.eigvalsh(ev.H) > 0)
        assert ev.weights.sum() == pytest.approx(P.n, abs=1e-6)
        np.testing.assert_allclose(ev.chol @ ev.chol.T, ev.H, rtol=1e-8)

    def test_dispatch(self, square):
        assert evaluate_metric(square, [0.5, 0.5], LS).kind.tag == LS
        assert evaluate_metric(square, [0.5, 0.5], LOG).kind.tag == LOG
        with pytest.raises(ValueError):
            evaluate_metric(square, [0.5, 0.5], "other")


class TestDirectionalDerivative:
    def test_log_center_vanishes(self, interval):
        ev = log_barrier_hessian(interval, [0.5])
        np.testing.assert_allclose(hessian_directional_derivative(ev, [1.0]),
                                   [[0.0]], atol=1e-12)

    def test_log_against_finite_difference(self, random_body, rng, interior_point):
        P = random_body
        x = interior_point(P, rng)
        h = rng.standard_normal(P.n)
        ev = log_barrier_hessian(P, x)
        eps = 1e-5 * P.slack(x).min() / np.abs(P.A @ h).max()
        fd = (log_barrier_hessian(P, x + eps * h).H
              - log_barrier_hessian(P, x - eps * h).H) / (2 * eps)
        exact = hessian_directional_derivative(ev, h)
        assert np.linalg.norm(exact - fd) <= 1e-5 * np.linalg.norm(exact)

    def test_ls_symmetric(self, random_body, rng, interior_point):
        P = random_body
        ev = ls_matrix(P, interior_point(P, rng))
        D = hessian_directional_derivative(ev, rng.standard_normal(P.n))
        np.testing.assert_array_equal(D, D.T)

    def test_ls_against_implicit_oracle(self, random_body, rng, interior_point):
        P = random_body
        for _ in range(3):
            ev = ls_matrix(P, interior_point(P, rng))
            h = rng.standard_normal(P.n)
            exact = ls_derivative_oracle(ev, h)
            fd = hessian_directional_derivative(ev, h)
            assert np.linalg.norm(fd - exact) <= 1e-5 * np.linalg.norm(exact)

    def test_step_out_of_domain(self, square):
        ev = ls_matrix(square, [0.5, 0.5])
        with pytest.raises(StepOutOfDomain):
            hessian_directional_derivative(ev, [1.0, 0.0], fd_step=1.0)

    def test_constant_metric(self):
        ev = constant_metric(np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(
            hessian_directional_derivative(ev, np.ones(3)), np.zeros((3, 3)))


class TestLogdetAndNorm:
    def test_logdet_diagonal(self, square):
        ev = log_barrier_hessian(square, [0.5, 0.5])
        assert logdet_metric(ev) == pytest.approx(math.log(64))

    def test_identity(self):
        assert logdet_metric(constant_metric(np.eye(4), np.zeros(4))) == 0.0

    def test_norm_values(self, square):
        ev = log_barrier_hessian(square, [0.5, 0.5])
        assert ellipsoid_norm(ev, [0.0, 0.0]) == 0.0
        assert ellipsoid_norm(ev, [1.0, 0.0]) == pytest.approx(math.sqrt(8))

    def test_norm_random(self, random_body, rng, interior_point):
        P = random_body
        ev = log_barrier_hessian(P, interior_point(P, rng))
        v = rng.standard_normal(P.n)
        assert ellipsoid_norm(ev, v) == pytest.approx(math.sqrt(v @ ev.H @ v),
                                                      rel=1e-10)
