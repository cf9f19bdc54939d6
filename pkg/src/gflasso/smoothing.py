"""Smooth approximation of the combined l1 + graph-fusion penalty.

The penalty lam * ||B||_1 + gam * sum_e tau(r_e) * sum_j |b_jm - sign(r_e) b_jl|
equals ||B C||_1 for the block operator C = (lam * I, gam * H), with H the
signed incidence matrix of the task graph. Writing the l1 norm through its
dual gives a max over auxiliary matrices A with ||A||_inf <= 1; subtracting
(mu/2) * ||A||_F^2 from the max yields a smooth lower bound whose gap is at
most mu * D with D = J * (K + |E|) / 2. The maximizing A has the closed form
clamp(B C / mu), which makes both the smoothed value and its gradient cheap.

Nothing here materializes C densely except :meth:`FusionOperator.dense_matrix`,
which exists for test oracles; the hot path works on the edge arrays, keeping
the per-application cost at O(J*K + J*|E|).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import EdgeWeightFn, TaskGraph, sign


def shrink(x):
    """Entrywise clamp to [-1, 1]; boundary inputs map to the boundary value."""
    return np.clip(x, -1.0, 1.0)


def gap_constant(n_inputs: int, n_tasks: int, n_edges: int) -> float:
    """Smoothing gap constant D = J * (K + |E|) / 2.

    This is the maximum of (1/2) * ||A||_F^2 over ||A||_inf <= 1, attained by
    the all-ones matrix of shape (J, K + |E|).
    """
    if min(n_inputs, n_tasks, n_edges) < 0:
        raise ValueError("dimensions must be non-negative")
    return 0.5 * n_inputs * (n_tasks + n_edges)


def operator_norm_bound(lam: float, gamma: float, degrees: np.ndarray) -> float:
    """Upper bound sqrt(lam^2 + 2 * gamma^2 * max_k d_k) on the operator norm of B -> B C.

    ``degrees`` is the weighted-degree vector from :func:`graph.weighted_degrees`;
    with no edges the bound reduces to lam.
    """
    if lam < 0 or gamma < 0:
        raise ValueError("lam and gamma must be non-negative")
    degrees = np.asarray(degrees, dtype=float)
    max_d = float(degrees.max()) if degrees.size else 0.0
    return float(np.sqrt(lam**2 + 2.0 * gamma**2 * max_d))


def _check_mu(mu: float) -> float:
    if not mu > 0:
        raise ValueError(f"smoothness parameter mu must be positive, got {mu}")
    return float(mu)


@dataclass(frozen=True)
class FusionOperator:
    """The linear map B -> B C with C = (lam * I, gam * H), plus its adjoint.

    Maps (J, K) coefficient matrices to (J, K + |E|); the first K columns are
    lam * B and column K + e is gam * tau_e * (B[:, m_e] - sign_e * B[:, l_e]).
    Edge structure is stored as flat arrays so applications cost O(J * |E|).
    """

    lam: float
    gamma: float
    n_inputs: int
    n_tasks: int
    edge_m: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    edge_l: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    edge_weight: np.ndarray = field(default_factory=lambda: np.empty(0))
    edge_sign: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lam and gamma must be non-negative")
        if self.n_inputs < 1 or self.n_tasks < 1:
            raise ValueError("n_inputs and n_tasks must be >= 1")

    @classmethod
    def from_graph(
        cls,
        graph: TaskGraph,
        lam: float,
        gamma: float,
        n_inputs: int,
        tau: EdgeWeightFn = abs,
    ) -> "FusionOperator":
        m = np.array([e[0] - 1 for e in graph.edges], dtype=np.intp)
        l = np.array([e[1] - 1 for e in graph.edges], dtype=np.intp)
        w = np.array([tau(e[2]) for e in graph.edges], dtype=float)
        s = np.array([sign(e[2]) for e in graph.edges], dtype=float)
        if np.any(w < 0):
            raise ValueError("tau must be non-negative")
        return cls(
            lam=float(lam),
            gamma=float(gamma),
            n_inputs=int(n_inputs),
            n_tasks=graph.node_count,
            edge_m=m,
            edge_l=l,
            edge_weight=w,
            edge_sign=s,
        )

    @property
    def n_edges(self) -> int:
        return self.edge_m.shape[0]

    @property
    def width(self) -> int:
        """Number of columns of C, i.e. K + |E|."""
        return self.n_tasks + self.n_edges

    def _check_coef(self, B: np.ndarray) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if B.shape != (self.n_inputs, self.n_tasks):
            raise ValueError(f"coefficient matrix must have shape {(self.n_inputs, self.n_tasks)}, got {B.shape}")
        return B

    def apply(self, B: np.ndarray) -> np.ndarray:
        """Gamma(B) = B C, shape (J, K + |E|)."""
        B = self._check_coef(B)
        out = np.empty((B.shape[0], self.width))
        out[:, : self.n_tasks] = self.lam * B
        if self.n_edges:
            out[:, self.n_tasks :] = (B[:, self.edge_m] - self.edge_sign * B[:, self.edge_l]) * (
                self.gamma * self.edge_weight
            )
        return out

    def adjoint(self, A: np.ndarray) -> np.ndarray:
        """Gamma*(A) = A C^T, mapping (J, K + |E|) back to (J, K)."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[1] != self.width:
            raise ValueError(f"auxiliary matrix must have {self.width} columns, got shape {A.shape}")
        out = self.lam * A[:, : self.n_tasks]
        if self.n_edges:
            scaled = (self.gamma * self.edge_weight) * A[:, self.n_tasks :]
            np.add.at(out, (slice(None), self.edge_m), scaled)
            np.subtract.at(out, (slice(None), self.edge_l), self.edge_sign * scaled)
        return out

    def aux_optimum(self, B: np.ndarray, mu: float) -> np.ndarray:
        """Maximizer A* = clamp(B C / mu) of <A, B C> - (mu/2) ||A||_F^2 over ||A||_inf <= 1."""
        mu = _check_mu(mu)
        return shrink(self.apply(B) / mu)

    def penalty_exact(self, B: np.ndarray) -> float:
        """The non-smooth penalty value ||B C||_1, summed directly from the edge list."""
        B = self._check_coef(B)
        total = self.lam * float(np.abs(B).sum())
        if self.n_edges:
            diffs = B[:, self.edge_m] - self.edge_sign * B[:, self.edge_l]
            total += self.gamma * float((np.abs(diffs) * self.edge_weight).sum())
        return total

    def smoothed_penalty(self, B: np.ndarray, mu: float) -> float:
        """Smooth lower bound f_mu(B) = <A*, B C> - (mu/2) ||A*||_F^2."""
        mu = _check_mu(mu)
        G = self.apply(B)
        A = shrink(G / mu)
        return float(np.vdot(A, G) - 0.5 * mu * np.vdot(A, A))

    def smoothed_penalty_gradient(self, B: np.ndarray, mu: float) -> np.ndarray:
        """Gradient of f_mu at B, equal to Gamma*(A*)."""
        return self.adjoint(self.aux_optimum(B, mu))

    def degrees(self) -> np.ndarray:
        """Weighted degree vector d_k = sum of squared edge weights incident on k."""
        d = np.zeros(self.n_tasks)
        if self.n_edges:
            np.add.at(d, self.edge_m, self.edge_weight**2)
            np.add.at(d, self.edge_l, self.edge_weight**2)
        return d

    def norm_bound(self) -> float:
        """sqrt(lam^2 + 2 gamma^2 max_k d_k), an upper bound on sigma_max(C)."""
        return operator_norm_bound(self.lam, self.gamma, self.degrees())

    def gap_constant(self) -> float:
        """D = J (K + |E|) / 2 for this operator's shape."""
        return gap_constant(self.n_inputs, self.n_tasks, self.n_edges)

    def dense_matrix(self) -> np.ndarray:
        """Materialize C = (lam * I, gam * H) densely. Test-oracle path only."""
        C = np.zeros((self.n_tasks, self.width))
        C[:, : self.n_tasks] = self.lam * np.eye(self.n_tasks)
        for e in range(self.n_edges):
            w = self.gamma * self.edge_weight[e]
            C[self.edge_m[e], self.n_tasks + e] = w
            C[self.edge_l[e], self.n_tasks + e] = -self.edge_sign[e] * w
        return C
