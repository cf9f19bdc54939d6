"""Estimator front-ends: graph-fused, lasso, row-group l1/l2, univariate fused.

Every fit entry point centers X and Y internally (column means removed) and
stores the means on the result, so predictions for new data can be formed as
(X_new - x_mean) @ B_hat + y_mean. Models carry no intercept.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
import numpy as np

from .errors import NumericError
from .graph import EdgeWeightFn, TaskGraph, sign
from .smoothing import FusionOperator
from .solver import (
    Solution,
    SolverConfig,
    largest_eigenvalue,
    lipschitz_upper,
    prox_grad_fit,
    three_sequence_minimize,
    _quadratic_loss_fn,
)

VALID_MODEL_KINDS = ("gflasso", "lasso", "group_l1l2", "fused_univariate")


@dataclass(frozen=True)
class PenaltySpec:
    """Regularization weights; gamma is ignored by the lasso and l1/l2 models."""

    lam: float
    gamma: float = 0.0
    tau: EdgeWeightFn = abs

    def __post_init__(self) -> None:
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lam and gamma must be non-negative")


@dataclass(frozen=True)
class FitResult:
    solution: Solution
    model_kind: str
    penalty: PenaltySpec
    graph_summary: tuple[int, int, float | None]  # (nodes, edges, construction threshold)
    x_mean: np.ndarray
    y_mean: np.ndarray
    runtime_s: float = 0.0

    def predict(self, X_new: np.ndarray) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.ndim != 2 or X_new.shape[1] != self.x_mean.shape[0]:
            raise ValueError(f"X_new must have {self.x_mean.shape[0]} columns, got shape {X_new.shape}")
        return (X_new - self.x_mean) @ self.solution.B_hat + self.y_mean

    def to_json_dict(self) -> dict:
        """Metadata for serialization. Wall-clock fields are deliberately
        excluded so artifacts are byte-identical across reruns."""
        s = self.solution
        nodes, edges, rho = self.graph_summary
        return {
            "model": self.model_kind,
            "lambda": self.penalty.lam,
            "gamma": self.penalty.gamma,
            "rho": rho,
            "graph_nodes": nodes,
            "graph_edges": edges,
            "iterations": s.iterations,
            "converged": s.converged,
            "objective": s.objective_exact,
            "objective_smooth": s.objective_smooth,
            "mu": s.mu_used,
            "lipschitz_bound": s.lipschitz_used,
        }


def center_columns(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (column-centered copy, column means)."""
    M = np.asarray(M, dtype=float)
    mean = M.mean(axis=0)
    return M - mean, mean


def objective_gflasso(X: np.ndarray, Y: np.ndarray, B: np.ndarray, graph: TaskGraph, spec: PenaltySpec) -> float:
    """Exact objective value, summed straight from the edge list.

    This path is independent of the fusion-operator machinery and exists so
    the two can be cross-checked.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B, dtype=float)
    if X.shape[0] != Y.shape[0] or B.shape != (X.shape[1], Y.shape[1]):
        raise ValueError(f"incompatible shapes X {X.shape}, Y {Y.shape}, B {B.shape}")
    resid = Y - X @ B
    total = 0.5 * float(np.vdot(resid, resid)) + spec.lam * float(np.abs(B).sum())
    for m, l, r in graph.edges:
        total += spec.gamma * spec.tau(r) * float(np.abs(B[:, m - 1] - sign(r) * B[:, l - 1]).sum())
    return total


def fit_gflasso(
    X: np.ndarray,
    Y: np.ndarray,
    graph: TaskGraph,
    spec: PenaltySpec,
    config: SolverConfig | None = None,
) -> FitResult:
    """Fit the graph-fused multi-task model over the given task graph."""
    t0 = time.perf_counter()
    Xc, x_mean = center_columns(X)
    Yc, y_mean = center_columns(Y)
    if graph.node_count != Yc.shape[1]:
        raise ValueError(f"graph has {graph.node_count} nodes but Y has {Yc.shape[1]} columns")
    op = FusionOperator.from_graph(graph, lam=spec.lam, gamma=spec.gamma, n_inputs=Xc.shape[1], tau=spec.tau)
    solution = prox_grad_fit(Xc, Yc, op, config)
    return FitResult(
        solution=solution,
        model_kind="gflasso",
        penalty=spec,
        graph_summary=(graph.node_count, graph.n_edges, graph.threshold),
        x_mean=x_mean,
        y_mean=y_mean,
        runtime_s=time.perf_counter() - t0,
    )


def fit_lasso(X: np.ndarray, Y: np.ndarray, spec: PenaltySpec, config: SolverConfig | None = None) -> FitResult:
    """Entrywise-l1 multi-task fit; the edgeless special case of the fused model."""
    t0 = time.perf_counter()
    Xc, x_mean = center_columns(X)
    Yc, y_mean = center_columns(Y)
    empty = TaskGraph(node_count=Yc.shape[1])
    op = FusionOperator.from_graph(empty, lam=spec.lam, gamma=0.0, n_inputs=Xc.shape[1], tau=spec.tau)
    solution = prox_grad_fit(Xc, Yc, op, config)
    return FitResult(
        solution=solution,
        model_kind="lasso",
        penalty=PenaltySpec(lam=spec.lam, gamma=0.0, tau=spec.tau),
        graph_summary=(empty.node_count, 0, None),
        x_mean=x_mean,
        y_mean=y_mean,
        runtime_s=time.perf_counter() - t0,
    )


def _group_row_prox(V: np.ndarray, threshold: float) -> np.ndarray:
    # rowwise shrink: row <- max(0, 1 - threshold/||row||) * row
    norms = np.linalg.norm(V, axis=1)
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = np.maximum(0.0, 1.0 - threshold / norms[nz])
    return V * scale[:, None]


def fit_group_l1l2(X: np.ndarray, Y: np.ndarray, lam: float, config: SolverConfig | None = None) -> FitResult:
    """Row-grouped l1/l2 multi-task fit via an accelerated proximal iteration.

    The penalty lam * sum_j ||beta_row_j||_2 has an exact proximal step, so no
    smoothing is involved; momentum follows the usual FISTA recursion.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    config = config or SolverConfig()
    t0 = time.perf_counter()
    Xc, x_mean = center_columns(X)
    Yc, y_mean = center_columns(Y)
    j, k = Xc.shape[1], Yc.shape[1]
    XtX = Xc.T @ Xc
    XtY = Xc.T @ Yc
    loss = _quadratic_loss_fn(XtX, XtY, float(np.vdot(Yc, Yc)))
    L = largest_eigenvalue(XtX)
    if L <= 0:
        raise ValueError("X^T X has no positive eigenvalue; nothing to fit")

    def objective(B: np.ndarray) -> float:
        return loss(B) + lam * float(np.linalg.norm(B, axis=1).sum())

    B = np.zeros((j, k))
    V = B
    t_mom = 1.0
    f_prev: float | None = None
    iters = config.max_iters
    converged = False
    trace: list[tuple[float, float, float]] | None = [] if config.record_trace else None
    for t in range(config.max_iters):
        G = XtX @ V - XtY
        B_next = _group_row_prox(V - G / L, lam / L)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
        V = B_next + ((t_mom - 1.0) / t_next) * (B_next - B)
        B, t_mom = B_next, t_next
        f_t = objective(B)
        if not np.isfinite(f_t):
            raise NumericError(f"objective became non-finite at iteration {t}")
        if trace is not None:
            trace.append((f_t, f_t, float(np.linalg.norm(G))))
        if f_prev is not None and abs(f_t - f_prev) < config.rel_obj_tol * max(abs(f_prev), 1e-12):
            iters = t + 1
            converged = True
            break
        f_prev = f_t

    resid = Yc - Xc @ B
    exact = 0.5 * float(np.vdot(resid, resid)) + lam * float(np.linalg.norm(B, axis=1).sum())
    solution = Solution(
        B_hat=B,
        objective_exact=exact,
        objective_smooth=exact,
        iterations=iters,
        converged=converged,
        lipschitz_used=L,
        mu_used=0.0,
        trace=tuple(trace) if trace is not None else None,
        runtime_total_s=time.perf_counter() - t0,
        runtime_periter_s=(time.perf_counter() - t0) / max(iters, 1),
    )
    return FitResult(
        solution=solution,
        model_kind="group_l1l2",
        penalty=PenaltySpec(lam=lam, gamma=0.0),
        graph_summary=(k, 0, None),
        x_mean=x_mean,
        y_mean=y_mean,
        runtime_s=time.perf_counter() - t0,
    )


def fit_fused_univariate(
    X: np.ndarray,
    y: np.ndarray,
    input_graph: TaskGraph,
    lam: float,
    gamma: float,
    config: SolverConfig | None = None,
    tau: EdgeWeightFn = abs,
) -> FitResult:
    """Univariate-response fused fit with the fusion graph over the covariates.

    The coefficient vector is handled as a single-row matrix so the same
    operator and loop drive this model; a chain graph with unit weights
    reproduces the classic adjacent-difference fused penalty.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"sample counts differ: X has {X.shape[0]}, y has {y.shape[0]}")
    if input_graph.node_count != X.shape[1]:
        raise ValueError(f"input graph has {input_graph.node_count} nodes but X has {X.shape[1]} columns")
    Xc, x_mean = center_columns(X)
    y_mean = float(y.mean())
    yc = y - y_mean

    op = FusionOperator.from_graph(input_graph, lam=lam, gamma=gamma, n_inputs=1, tau=tau)
    XtX = Xc.T @ Xc
    Xty_row = (Xc.T @ yc)[None, :]
    ynorm2 = float(np.vdot(yc, yc))
    lam_max = largest_eigenvalue(XtX)
    mu = config.resolve_mu(op.gap_constant())
    L = lipschitz_upper(Xc, op, mu, degrees=op.degrees(), lam_max=lam_max)

    def loss(W: np.ndarray) -> float:
        return 0.5 * (ynorm2 - 2.0 * float(np.vdot(W, Xty_row)) + float(np.vdot(W, W @ XtX)))

    def grad(W: np.ndarray) -> np.ndarray:
        return W @ XtX - Xty_row + op.smoothed_penalty_gradient(W, mu)

    def f_exact(W: np.ndarray) -> float:
        return loss(W) + op.penalty_exact(W)

    def f_smooth(W: np.ndarray) -> float:
        return loss(W) + op.smoothed_penalty(W, mu)

    W, iters, converged, trace = three_sequence_minimize(
        grad, f_exact, f_smooth, (1, X.shape[1]), L, config.rel_obj_tol, config.max_iters, config.record_trace
    )
    beta = W.ravel()
    resid = yc - Xc @ beta
    exact = 0.5 * float(np.vdot(resid, resid)) + op.penalty_exact(W)
    smooth = 0.5 * float(np.vdot(resid, resid)) + op.smoothed_penalty(W, mu)
    solution = Solution(
        B_hat=beta[:, None],
        objective_exact=exact,
        objective_smooth=smooth,
        iterations=iters,
        converged=converged,
        lipschitz_used=L,
        mu_used=mu,
        trace=tuple(trace) if trace is not None else None,
        runtime_total_s=time.perf_counter() - t0,
        runtime_periter_s=(time.perf_counter() - t0) / max(iters, 1),
    )
    return FitResult(
        solution=solution,
        model_kind="fused_univariate",
        penalty=PenaltySpec(lam=lam, gamma=gamma, tau=tau),
        graph_summary=(input_graph.node_count, input_graph.n_edges, input_graph.threshold),
        x_mean=x_mean,
        y_mean=np.array([y_mean]),
        runtime_s=time.perf_counter() - t0,
    )
