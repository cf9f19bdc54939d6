import numpy as np
import pytest

from gflasso.errors import NumericError
from gflasso.graph import TaskGraph
from gflasso.smoothing import FusionOperator
from gflasso.solver import (
    SolverConfig,
    iteration_bound,
    largest_eigenvalue,
    lipschitz_upper,
    prox_grad_fit,
    smooth_objective_gradient,
    subgradient_fit,
    write_trace_csv,
)

from oracles import dense_fusion_matrix, ista_lasso, objective_dense, subgradient_dense


def centered_problem(seed, n=20, j=4, k=2, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, j))
    B_true = rng.standard_normal((j, k))
    Y = X @ B_true + noise * rng.standard_normal((n, k))
    return X - X.mean(axis=0), Y - Y.mean(axis=0)


def empty_operator(j, k, lam=0.0):
    return FusionOperator.from_graph(TaskGraph(k), lam=lam, gamma=0.0, n_inputs=j)


class TestLargestEigenvalue:
    def test_identity(self):
        assert largest_eigenvalue(np.eye(3)) == pytest.approx(1.0, rel=1e-10)

    def test_diagonal(self):
        assert largest_eigenvalue(np.diag([1.0, 2.0, 5.0])) == pytest.approx(5.0, rel=1e-8)

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((30, 8))
        M = X.T @ X
        assert largest_eigenvalue(M) == pytest.approx(float(np.linalg.eigvalsh(M).max()), rel=1e-7)

    def test_zero_matrix(self):
        assert largest_eigenvalue(np.zeros((4, 4))) == 0.0

    def test_non_finite_rejected(self):
        M = np.eye(3)
        M[0, 0] = np.nan
        with pytest.raises(NumericError):
            largest_eigenvalue(M)


class TestLipschitzUpper:
    def test_no_penalty_reduces_to_eigenvalue(self):
        X, _ = centered_problem(1)
        op = empty_operator(4, 2)
        lm = largest_eigenvalue(X.T @ X)
        assert lipschitz_upper(X, op, mu=0.5) == pytest.approx(lm, rel=1e-8)

    def test_arithmetic(self):
        # lam=1, gamma=2, max degree 0.5, mu=0.1, lam_max=3 -> 3 + 5/0.1 = 53
        g = TaskGraph(3, ((1, 2, 0.5), (2, 3, -0.5)))
        op = FusionOperator.from_graph(g, lam=1.0, gamma=2.0, n_inputs=2)
        assert lipschitz_upper(None, op, mu=0.1, lam_max=3.0) == pytest.approx(53.0)

    def test_gradient_lipschitz_inequality(self):
        rng = np.random.default_rng(2)
        X, Y = centered_problem(3, n=15, j=5, k=3)
        g = TaskGraph(3, ((1, 2, 0.8), (2, 3, -0.5)))
        op = FusionOperator.from_graph(g, lam=0.4, gamma=0.7, n_inputs=5)
        mu = 0.05
        XtX, XtY = X.T @ X, X.T @ Y
        L = lipschitz_upper(X, op, mu=mu)
        for _ in range(100):
            B1 = rng.standard_normal((5, 3))
            B2 = rng.standard_normal((5, 3))
            g1 = smooth_objective_gradient(X, Y, op, B1, mu, XtX, XtY)
            g2 = smooth_objective_gradient(X, Y, op, B2, mu, XtX, XtY)
            assert np.linalg.norm(g1 - g2) <= L * np.linalg.norm(B1 - B2) + 1e-9


class TestSmoothObjectiveGradient:
    def test_stationary_at_least_squares(self):
        X, Y = centered_problem(4)
        B_ls = np.linalg.solve(X.T @ X, X.T @ Y)
        op = empty_operator(4, 2)
        G = smooth_objective_gradient(X, Y, op, B_ls, mu=0.1)
        assert np.abs(G).max() < 1e-10

    def test_zero_point_no_penalty(self):
        X, Y = centered_problem(5)
        op = empty_operator(4, 2)
        G = smooth_objective_gradient(X, Y, op, np.zeros((4, 2)), mu=0.1)
        assert np.allclose(G, -X.T @ Y, atol=1e-12)

    def test_finite_differences_on_full_objective(self):
        rng = np.random.default_rng(6)
        X, Y = centered_problem(7, n=12, j=3, k=2)
        g = TaskGraph(2, ((1, 2, 0.9),))
        op = FusionOperator.from_graph(g, lam=0.3, gamma=0.5, n_inputs=3)
        mu = 0.01
        B = rng.standard_normal((3, 2))
        G = smooth_objective_gradient(X, Y, op, B, mu)

        def f_tilde(Bx):
            resid = Y - X @ Bx
            return 0.5 * float(np.vdot(resid, resid)) + op.smoothed_penalty(Bx, mu)

        h = 1e-5
        for idx in np.ndindex(B.shape):
            E = np.zeros_like(B)
            E[idx] = h
            fd = (f_tilde(B + E) - f_tilde(B - E)) / (2 * h)
            assert G[idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)


class TestProxGradFit:
    def test_unpenalized_matches_normal_equations(self):
        X, Y = centered_problem(8)
        op = empty_operator(4, 2)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-4, rel_obj_tol=1e-12, max_iters=50000))
        B_ls = np.linalg.solve(X.T @ X, X.T @ Y)
        assert np.linalg.norm(sol.B_hat - B_ls) < 1e-5

    def test_agrees_with_dense_subgradient_reference(self):
        X, Y = centered_problem(9, n=10, j=3, k=2)
        g = TaskGraph(2, ((1, 2, 0.9),))
        op = FusionOperator.from_graph(g, lam=0.5, gamma=0.5, n_inputs=3)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-5, rel_obj_tol=1e-11, max_iters=300000))
        C = dense_fusion_matrix(2, g.edges, 0.5, 0.5)
        ref, _ = subgradient_dense(X, Y, C, 200000)
        assert sol.objective_exact == pytest.approx(ref, rel=5e-3)
        # never worse than the reference by more than the smoothing gap
        assert sol.objective_exact <= ref + sol.mu_used * op.gap_constant() + 1e-6

    def test_fusion_limit_two_tasks(self):
        X, Y = centered_problem(10, n=12, j=3, k=2, noise=0.2)
        g = TaskGraph(2, ((1, 2, 0.9),))
        op = FusionOperator.from_graph(g, lam=0.3, gamma=1000.0, n_inputs=3)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-4, rel_obj_tol=1e-6, max_iters=20000))
        assert np.abs(sol.B_hat[:, 0] - sol.B_hat[:, 1]).max() <= 1e-3

    def test_fusion_limit_matches_pooled_lasso(self):
        # dominant (but tractable) gamma: both columns approach the lasso fit
        # on the stacked responses with doubled l1 weight
        X, Y = centered_problem(11, n=12, j=3, k=2, noise=0.2)
        g = TaskGraph(2, ((1, 2, 1.0),))
        lam = 0.4
        op = FusionOperator.from_graph(g, lam=lam, gamma=10.0, n_inputs=3)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=2e-4, rel_obj_tol=1e-13, max_iters=400000))
        X_stack = np.vstack([X, X])
        y_stack = np.concatenate([Y[:, 0], Y[:, 1]])[:, None]
        pooled = ista_lasso(X_stack, y_stack, 2.0 * lam)[:, 0]
        assert np.abs(sol.B_hat[:, 0] - sol.B_hat[:, 1]).max() <= 1e-3
        assert np.abs(sol.B_hat[:, 0] - pooled).max() <= 1e-3

    def test_sandwich_along_trace(self):
        X, Y = centered_problem(12, n=15, j=4, k=3)
        g = TaskGraph(3, ((1, 2, 0.7), (1, 3, -0.6)))
        op = FusionOperator.from_graph(g, lam=0.2, gamma=0.4, n_inputs=4)
        config = SolverConfig(mu=1e-3, rel_obj_tol=1e-8, max_iters=2000, record_trace=True)
        sol = prox_grad_fit(X, Y, op, config)
        mu_d = sol.mu_used * op.gap_constant()
        for f_exact, f_smooth, _ in sol.trace:
            assert f_smooth <= f_exact + 1e-9
            assert f_exact <= f_smooth + mu_d + 1e-9
        assert sol.objective_smooth <= sol.objective_exact <= sol.objective_smooth + mu_d + 1e-9

    def test_bitwise_determinism(self):
        X, Y = centered_problem(13, n=18, j=5, k=3)
        g = TaskGraph(3, ((1, 2, 0.5), (2, 3, 0.5)))
        op = FusionOperator.from_graph(g, lam=0.3, gamma=0.3, n_inputs=5)
        config = SolverConfig(mu=1e-3, rel_obj_tol=1e-8, max_iters=3000)
        a = prox_grad_fit(X, Y, op, config)
        b = prox_grad_fit(X, Y, op, config)
        assert np.array_equal(a.B_hat, b.B_hat)
        assert a.objective_exact == b.objective_exact
        assert a.iterations == b.iterations

    def test_max_iters_flags_not_converged(self):
        X, Y = centered_problem(14)
        op = empty_operator(4, 2, lam=0.1)
        sol = prox_grad_fit(X, Y, op, SolverConfig(rel_obj_tol=1e-14, max_iters=5))
        assert not sol.converged
        assert sol.iterations == 5

    def test_column_separable_when_no_edges(self):
        # with an empty graph the updates decouple per task: stacking
        # single-task runs over the same iteration budget reproduces the
        # joint trajectory
        X, Y = centered_problem(15, n=25, j=6, k=3)
        op = empty_operator(6, 3, lam=0.3)
        config = SolverConfig(mu=1e-4, rel_obj_tol=1e-16, max_iters=3000)
        joint = prox_grad_fit(X, Y, op, config)
        cols = []
        for k in range(3):
            opk = empty_operator(6, 1, lam=0.3)
            cols.append(prox_grad_fit(X, Y[:, [k]], opk, config).B_hat[:, 0])
        assert np.linalg.norm(joint.B_hat - np.column_stack(cols)) < 1e-5

    def test_matches_soft_threshold_closed_form_on_orthonormal_design(self):
        # with X^T X = I the exact solution is the entrywise soft threshold
        # of X^T Y; the smoothed solution deviates by at most mu |c| / lam^2
        # per zeroed entry, so the comparison tolerance follows mu
        rng = np.random.default_rng(16)
        Q, _ = np.linalg.qr(rng.standard_normal((30, 5)))
        X = Q  # orthonormal columns
        Y = rng.standard_normal((30, 2))
        Y = Y - Y.mean(axis=0)
        lam = 0.6
        op = empty_operator(5, 2, lam=lam)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-4, rel_obj_tol=1e-13, max_iters=200000))
        XtY = X.T @ Y
        ref = np.sign(XtY) * np.maximum(np.abs(XtY) - lam, 0.0)
        assert np.abs(sol.B_hat - ref).max() < 2e-3
        # and the exact objective is within the smoothing gap of the optimum
        def f(B):
            r = Y - X @ B
            return 0.5 * float(np.vdot(r, r)) + lam * float(np.abs(B).sum())

        assert f(sol.B_hat) <= f(ref) + sol.mu_used * op.gap_constant() + 1e-8

    def test_zero_solution_above_kkt_threshold(self):
        X, Y = centered_problem(23, n=25, j=4, k=2, noise=0.5)
        lam = float(np.abs(X.T @ Y).max()) * 1.5
        op = empty_operator(4, 2, lam=lam)
        sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-4, rel_obj_tol=1e-10, max_iters=50000))
        # smoothed stationary point sits within mu ||XtY|| / lam^2 of zero
        assert np.abs(sol.B_hat).max() <= sol.mu_used * float(np.abs(X.T @ Y).max()) / lam**2 + 1e-9

    def test_shape_validation(self):
        X, Y = centered_problem(17)
        op = empty_operator(3, 2)
        with pytest.raises(ValueError):
            prox_grad_fit(X, Y, op)


class TestSubgradientFit:
    def test_quadratic_best_so_far_montone_toward_least_squares(self):
        X, Y = centered_problem(18)
        op = empty_operator(4, 2)
        sol = subgradient_fit(X, Y, op, max_iters=3000, record_trace=True)
        best = [row[0] for row in sol.trace]
        assert all(a >= b - 1e-12 for a, b in zip(best, best[1:]))
        B_ls = np.linalg.solve(X.T @ X, X.T @ Y)
        resid = Y - X @ B_ls
        f_star = 0.5 * float(np.vdot(resid, resid))
        assert sol.objective_exact <= f_star * 1.001 + 1e-3

    def test_cross_solver_agreement(self):
        X, Y = centered_problem(19, n=10, j=3, k=2)
        g = TaskGraph(2, ((1, 2, 0.9),))
        op = FusionOperator.from_graph(g, lam=0.5, gamma=0.5, n_inputs=3)
        pg = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-5, rel_obj_tol=1e-11, max_iters=300000))
        sg = subgradient_fit(X, Y, op, max_iters=1000000)
        assert sg.objective_exact == pytest.approx(pg.objective_exact, rel=1e-3)

    def test_solution_is_best_iterate_on_exact_objective(self):
        X, Y = centered_problem(20, n=10, j=3, k=2)
        g = TaskGraph(2, ((1, 2, -0.8),))
        op = FusionOperator.from_graph(g, lam=0.2, gamma=0.3, n_inputs=3)
        sol = subgradient_fit(X, Y, op, max_iters=2000, record_trace=True)
        assert sol.objective_exact == pytest.approx(sol.trace[-1][0], abs=1e-12)
        C = dense_fusion_matrix(2, g.edges, 0.2, 0.3)
        assert sol.objective_exact == pytest.approx(objective_dense(X, Y, sol.B_hat, C), abs=1e-10)


class TestIterationBound:
    def test_doubling_gap_constant(self):
        lo = iteration_bound(1.0, 0.1, 10.0, 0.5, 3.0)
        hi = iteration_bound(1.0, 0.1, 20.0, 0.5, 3.0)
        # doubling D doubles the second addend inside the sqrt
        assert hi**2 - lo**2 == pytest.approx((4.0 / 0.1) * (2 * 20.0 - 2 * 10.0) * 0.25 / 0.1)

    def test_one_over_eps_regime(self):
        # when the D term dominates, shrinking eps by 4 scales the bound ~4x
        b1 = iteration_bound(1.0, 1e-3, 100.0, 1.0, 1e-6)
        b2 = iteration_bound(1.0, 2.5e-4, 100.0, 1.0, 1e-6)
        assert b2 / b1 == pytest.approx(4.0, rel=1e-3)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            iteration_bound(1.0, 0.0, 1.0, 1.0, 1.0)


def test_trace_csv_dump(tmp_path):
    X, Y = centered_problem(21, n=10, j=3, k=2)
    op = empty_operator(3, 2, lam=0.2)
    sol = prox_grad_fit(X, Y, op, SolverConfig(mu=1e-3, rel_obj_tol=1e-8, max_iters=50, record_trace=True))
    path = tmp_path / "trace.csv"
    write_trace_csv(sol, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,f_exact,f_smooth,grad_norm"
    assert len(lines) == 1 + sol.iterations
    first = lines[1].split(",")
    assert int(first[0]) == 0 and float(first[1]) == sol.trace[0][0]


def test_trace_requires_recording():
    X, Y = centered_problem(22, n=10, j=3, k=2)
    op = empty_operator(3, 2)
    sol = prox_grad_fit(X, Y, op, SolverConfig(max_iters=5, rel_obj_tol=1e-8))
    with pytest.raises(ValueError):
        write_trace_csv(sol, "/tmp/never.csv")
