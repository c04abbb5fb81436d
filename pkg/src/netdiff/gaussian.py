"""Closed-form analytics for linear-drift, unit-diffusion network systems.

The model is dX(t) = L X(t) dt + dW(t) started from X(0) = 0 (or a
supplied initial covariance), where L couples each vertex to its graph
neighbors.  Everything here is exact linear algebra: covariance and
precision matrices at a fixed time, Gaussian conditioning, and the
covariance/precision of the discretized path vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .graphs import Graph, adjacency_matrix

__all__ = [
    "GaussianSystem",
    "CovarianceResult",
    "PrecisionResult",
    "StackedCovariance",
    "BlockNorm",
    "build_linear_system",
    "covariance_at",
    "precision_at",
    "conditional_covariance",
    "path_covariance",
    "path_precision_blocks",
    "matrix_csv",
    "precision_edges_json",
]


@dataclass(frozen=True)
class GaussianSystem:
    """Linear drift matrix together with the vertex labels it indexes."""

    L: np.ndarray
    labels: tuple
    variant: str = "custom"

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("drift matrix must be square")
        if L.shape[0] != len(self.labels):
            raise ValueError("label count does not match matrix size")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.L, self.L.T, atol=1e-12, rtol=0.0))


@dataclass(frozen=True)
class CovarianceResult:
    sigma: np.ndarray
    t: float
    method: str
    labels: tuple


@dataclass(frozen=True)
class PrecisionResult:
    q: np.ndarray
    t: float
    ci_edges: frozenset
    labels: tuple


def build_linear_system(g: Graph, diag_shift: float) -> GaussianSystem:
    """Drift matrix L = adjacency(g) + diag_shift*I in vertex order."""
    a = adjacency_matrix(g)
    L = a + diag_shift * np.eye(len(g.vertices))
    if diag_shift == -2.0:
        variant = "standard"
    elif diag_shift == 0.0:
        variant = "zero_diagonal"
    else:
        variant = "custom"
    return GaussianSystem(L, g.vertices, variant)


def _phi(lam: np.ndarray, t: float) -> np.ndarray:
    """Eigenvalue map for int_0^t e^{2*lam*s} ds, continuous through lam=0."""
    lam = np.asarray(lam, dtype=float)
    out = np.full(lam.shape, float(t))
    nz = np.abs(lam) > 1e-13
    out[nz] = np.expm1(2.0 * lam[nz] * t) / (2.0 * lam[nz])
    return out


def _vanloan_cov(L: np.ndarray, t: float) -> np.ndarray:
    # block-exponential identity for int_0^t e^{Ls} e^{L^T s} ds
    n = L.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = L
    m[:n, n:] = np.eye(n)
    m[n:, n:] = -L.T
    e = expm(m * t)
    sigma = e[:n, n:] @ e[:n, :n].T
    return 0.5 * (sigma + sigma.T)


def covariance_at(sys: GaussianSystem, t: float, method: str = "auto") -> CovarianceResult:
    """Covariance of X(t) from X(0)=0, computed in closed form or by quadrature."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if method not in ("auto", "closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "closed_form"
    n = sys.n
    if t == 0:
        return CovarianceResult(np.zeros((n, n)), 0.0, method, sys.labels)
    if method == "quadrature":
        def integrand(s):
            e = expm(sys.L * s)
            return e @ e.T
        sigma, _ = quad_vec(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-13)
        sigma = 0.5 * (sigma + sigma.T)
    elif sys.is_symmetric:
        lam, u = np.linalg.eigh(sys.L)
        sigma = (u * _phi(lam, t)) @ u.T
        sigma = 0.5 * (sigma + sigma.T)
    else:
        sigma = _vanloan_cov(sys.L, t)
    return CovarianceResult(sigma, float(t), method, sys.labels)


def precision_at(sys: GaussianSystem, t: float, tol: float = 1e-6) -> PrecisionResult:
    """Precision matrix Q(t) = Sigma(t)^{-1} and its conditional-independence edges."""
    if t <= 0:
        raise ValueError("precision requires t > 0")
    if sys.is_symmetric:
        # invert on the eigenbasis: much better conditioned than inv(Sigma)
        lam, u = np.linalg.eigh(sys.L)
        phi = _phi(lam, t)
        if np.min(phi) <= 0:
            raise np.linalg.LinAlgError("covariance is singular")
        q = (u / phi) @ u.T
        q = 0.5 * (q + q.T)
    else:
        sigma = covariance_at(sys, t).sigma
        ev = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
        if ev[0] <= ev[-1] * 1e-14:
            raise np.linalg.LinAlgError("covariance is singular")
        q = np.linalg.inv(sigma)
    edges = set()
    for i in range(sys.n):
        for j in range(i + 1, sys.n):
            if abs(q[i, j]) > tol:
                edges.add((sys.labels[i], sys.labels[j]))
    return PrecisionResult(q, float(t), frozenset(edges), sys.labels)


def conditional_covariance(cov: CovarianceResult, target: Sequence, given: Sequence) -> np.ndarray:
    """Schur complement Cov(X_T | X_G) for label sets T and G."""
    pos = {lab: i for i, lab in enumerate(cov.labels)}
    try:
        ti = [pos[v] for v in target]
        gi = [pos[v] for v in given]
    except KeyError as bad:
        raise ValueError(f"unknown label {bad.args[0]!r}") from None
    if not ti:
        raise ValueError("target set is empty")
    if set(ti) & set(gi):
        raise ValueError("target and given sets overlap")
    s = cov.sigma
    s_tt = s[np.ix_(ti, ti)]
    if not gi:
        return s_tt.copy()
    s_tg = s[np.ix_(ti, gi)]
    s_gg = s[np.ix_(gi, gi)]
    sol = np.linalg.solve(s_gg, s_tg.T)
    out = s_tt - s_tg @ sol
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class StackedCovariance:
    """Covariance of the path vector (X_v(t_k))_{v,k}, vertex-major.

    The initial grid point carries no randomness when started from a point
    mass, so `times` holds the grid without its first entry and the matrix
    indexes only those stored times.
    """

    matrix: np.ndarray
    labels: tuple
    times: tuple
    scheme: str

    @property
    def n_vertices(self) -> int:
        return len(self.labels)

    @property
    def n_times(self) -> int:
        return len(self.times)

    def vertex_slice(self, label) -> slice:
        i = self.labels.index(label)
        m = self.n_times
        return slice(i * m, (i + 1) * m)


def _step_matrices(L: np.ndarray, dt: float, scheme: str, symmetric: bool):
    """One-step transition matrix and noise covariance for the chain."""
    n = L.shape[0]
    if scheme == "euler":
        return np.eye(n) + L * dt, dt * np.eye(n)
    if symmetric:
        lam, u = np.linalg.eigh(L)
        f = (u * np.exp(lam * dt)) @ u.T
        q = (u * _phi(lam, dt)) @ u.T
    else:
        f = expm(L * dt)
        q = _vanloan_cov(L, dt)
    return f, 0.5 * (q + q.T)


def path_covariance(
    sys: GaussianSystem,
    grid: Sequence[float],
    scheme: str = "euler",
    initial_cov: np.ndarray | None = None,
) -> StackedCovariance:
    """Exact covariance of the discretized path under the chosen stepping scheme.

    The chain is X_{k+1} = F_k X_k + xi_k with F_k = I + L*dt (euler) or
    e^{L*dt} (exact) and Cov(xi_k) = dt*I (euler) or the integrated noise
    covariance (exact).  Under euler stepping the path density factorizes
    over two-slice neighborhoods, so stacked-precision blocks vanish for
    vertex pairs at graph distance three or more; the exact scheme has a
    dense transition matrix and no such sparsity.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if scheme not in ("euler", "exact"):
        raise ValueError(f"unknown scheme {scheme!r}")
    n = sys.n
    m = grid.size - 1
    if initial_cov is None:
        v0 = np.zeros((n, n))
    else:
        v0 = np.asarray(initial_cov, dtype=float)
        if v0.shape != (n, n):
            raise ValueError("initial covariance has wrong shape")

    # forward recursion for all second moments of the stored points
    var = []            # var[k] = Cov(X_{k+1})
    cross = {}          # cross[(k, l)] = Cov(X_{k+1}, X_{l+1}), k < l
    v_prev = v0
    fs = []
    for k in range(m):
        f, q = _step_matrices(sys.L, grid[k + 1] - grid[k], scheme, sys.is_symmetric)
        fs.append(f)
        v_next = f @ v_prev @ f.T + q
        var.append(0.5 * (v_next + v_next.T))
        v_prev = v_next
    for k in range(m):
        c = var[k]
        for l in range(k + 1, m):
            c = c @ fs[l].T
            cross[(k, l)] = c

    big = np.zeros((n * m, n * m))
    for k in range(m):
        big[k * n:(k + 1) * n, k * n:(k + 1) * n] = var[k]
        for l in range(k + 1, m):
            big[k * n:(k + 1) * n, l * n:(l + 1) * n] = cross[(k, l)]
            big[l * n:(l + 1) * n, k * n:(k + 1) * n] = cross[(k, l)].T

    # reorder from time-major to vertex-major
    perm = np.empty(n * m, dtype=int)
    for v in range(n):
        for k in range(m):
            perm[v * m + k] = k * n + v
    big = big[np.ix_(perm, perm)]
    return StackedCovariance(big, sys.labels, tuple(grid[1:]), scheme)


@dataclass(frozen=True)
class BlockNorm:
    u: object
    v: object
    max_abs: float
    relative: float


def path_precision_blocks(stacked: StackedCovariance, labels: Sequence | None = None) -> list[BlockNorm]:
    """Max-abs entry of every off-diagonal vertex block of the stacked precision.

    `relative` rescales by the geometric mean of the two diagonal-block
    scales so thresholds are meaningful across systems.
    """
    if labels is None:
        labels = stacked.labels
    s = stacked.matrix
    ev = np.linalg.eigvalsh(s)
    if ev[0] <= max(ev[-1], 0.0) * 1e-13:
        raise np.linalg.LinAlgError("stacked covariance is numerically singular")
    p = np.linalg.inv(s)
    p = 0.5 * (p + p.T)
    m = stacked.n_times
    idx = {lab: i for i, lab in enumerate(stacked.labels)}
    scale = {}
    for lab in labels:
        i = idx[lab]
        scale[lab] = np.abs(p[i * m:(i + 1) * m, i * m:(i + 1) * m]).max()
    rows = []
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            u, v = labels[a], labels[b]
            i, j = idx[u], idx[v]
            block = p[i * m:(i + 1) * m, j * m:(j + 1) * m]
            top = float(np.abs(block).max())
            rel = top / np.sqrt(scale[u] * scale[v])
            rows.append(BlockNorm(u, v, top, float(rel)))
    return rows


def matrix_csv(matrix: np.ndarray, labels: Sequence) -> str:
    """CSV text with a header row of labels."""
    matrix = np.asarray(matrix)
    lines = [",".join(str(lab) for lab in labels)]
    for row in matrix:
        lines.append(",".join(format(x, ".17g") for x in row))
    return "\n".join(lines) + "\n"


def precision_edges_json(result: PrecisionResult) -> str:
    """Conditional-independence edge set as a JSON array of pairs."""
    order = {lab: i for i, lab in enumerate(result.labels)}
    pairs = sorted(result.ci_edges, key=lambda e: (order[e[0]], order[e[1]]))
    return json.dumps([[u, v] for u, v in pairs])
