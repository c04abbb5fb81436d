"""Euler-Maruyama simulation of interacting diffusions on finite graphs.

Each vertex carries its own counter-based noise stream keyed by
(seed, step, vertex label), so ensembles are bit-reproducible and two
graphs sharing a vertex see identical noise on it: truncation levels can
be compared with common random numbers.

Girsanov reweighting turns driftless reference ensembles into samples of
the interacting law; the per-vertex log factors depend only on the vertex
and its neighbors, and that locality is preserved exactly (bitwise) under
restriction of the ensemble.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import ks_2samp

from .coefficients import (
    DiffusionTable,
    DriftSpec,
    DriftTable,
    EvalContext,
    evaluate_vectorized,
    truncated_drift_family,
)
from .graphs import Graph, InfiniteGraph, augmented_truncation

__all__ = [
    "PathEnsemble",
    "GirsanovWeights",
    "SimulationError",
    "TruncationRow",
    "TruncationTable",
    "simulate",
    "simulate_driftless",
    "simulate_truncated",
    "girsanov_weights",
    "truncation_convergence",
    "entropy_bound_estimate",
    "energy_distance",
    "save_ensemble",
    "load_ensemble",
    "ensemble_summary_csv",
]

# stream kinds (highest counter word): dynamics noise, per-vertex initials,
# joint initial draws
_KIND_NOISE = 0
_KIND_INITIAL = 1
_KIND_JOINT = 2


class SimulationError(RuntimeError):
    """Non-finite state encountered; carries the first offending location."""

    def __init__(self, replica, vertex, time):
        self.replica = replica
        self.vertex = vertex
        self.time = time
        super().__init__(
            f"non-finite state at replica {replica}, vertex {vertex!r}, t={time:g}"
        )


def _vertex_tag(label) -> int:
    h = hashlib.blake2b(repr(label).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _stream(seed: int, step: int, tag: int, kind: int) -> np.random.Generator:
    bg = np.random.Philox(key=seed, counter=[0, step, tag, kind])
    return np.random.Generator(bg)


def noise_stream(seed, step, vertex) -> np.random.Generator:
    return _stream(seed, step, _vertex_tag(vertex), _KIND_NOISE)


def vertex_stream(seed, vertex) -> np.random.Generator:
    return _stream(seed, 0, _vertex_tag(vertex), _KIND_INITIAL)


def joint_stream(seed) -> np.random.Generator:
    return _stream(seed, 0, 0, _KIND_JOINT)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Simulated trajectories indexed (replica, vertex, time index, component)."""

    graph: Graph
    grid: np.ndarray
    values: np.ndarray
    seed: int
    scheme: dict
    measure: str

    @property
    def labels(self) -> tuple:
        return self.graph.vertices

    @property
    def n_replicas(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[3]

    def time_index(self, t: float) -> int:
        hits = np.flatnonzero(np.abs(self.grid - t) <= 1e-9)
        if hits.size == 0:
            raise ValueError(f"time {t!r} is not on the grid")
        return int(hits[0])

    def at_time(self, t: float) -> np.ndarray:
        """States at a grid time, shape (replica, vertex, component)."""
        return self.values[:, :, self.time_index(t), :]

    def path(self, replica: int, vertex) -> np.ndarray:
        return self.values[replica, self.graph.index(vertex), :, :]

    def restrict(self, vertices) -> "PathEnsemble":
        """Ensemble of the induced subgraph; trajectories copied verbatim."""
        sub = self.graph.subgraph(vertices)
        idx = [self.graph.index(v) for v in sub.vertices]
        return PathEnsemble(sub, self.grid, self.values[:, idx], self.seed, self.scheme, self.measure)


@dataclass(frozen=True, eq=False)
class GirsanovWeights:
    """Per-replica change-of-measure weights with per-vertex diagnostics."""

    weights: np.ndarray
    m: dict
    quadratic_variation: dict
    t: float

    def log_factor(self, vertex) -> np.ndarray:
        return self.m[vertex] - 0.5 * self.quadratic_variation[vertex]


def _as_drift_table(drift) -> DriftTable:
    if drift is None:
        return DriftTable()
    if isinstance(drift, DriftTable):
        return drift
    if isinstance(drift, DriftSpec):
        return DriftTable.uniform(drift)
    raise TypeError("drift must be a DriftSpec, DriftTable, or None")


def _as_diffusion_table(diffusion) -> DiffusionTable:
    if isinstance(diffusion, DiffusionTable):
        return diffusion
    return DiffusionTable.uniform(diffusion)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _first_bad(cur, labels, t):
    bad = ~np.isfinite(cur)
    r, vi = np.argwhere(bad)[0][:2]
    return SimulationError(int(r), labels[int(vi)], float(t))


def _run(g, drift, diffusion, mu0, grid, n_replicas, seed, substeps, measure):
    grid = _check_grid(grid)
    if n_replicas < 1:
        raise ValueError("need at least one replica")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    drift = _as_drift_table(drift)
    diffusion = _as_diffusion_table(diffusion)
    labels = g.vertices
    nv = len(labels)
    specs = [drift.for_vertex(v) for v in labels]
    if substeps > 1 and any(s is not None and s.uses_history for s in specs):
        raise ValueError("history-dependent drifts require substeps=1")
    sigmas = [diffusion.for_vertex(v) for v in labels]
    d = sigmas[0].d
    if any(s.d != d for s in sigmas):
        raise ValueError("all vertices must share one state dimension")
    nbr_idx = [tuple(g.index(u) for u in g.neighbors(v)) for v in labels]

    nt = grid.size
    values = np.empty((n_replicas, nv, nt, d))
    values[:, :, 0, :] = mu0.sample(n_replicas, g, seed, d)
    if not np.all(np.isfinite(values[:, :, 0, :])):
        raise _first_bad(values[:, :, 0, :], labels, 0.0)

    cur = values[:, :, 0, :].copy()
    # overflow during stepping is handled by the non-finite check below,
    # reported as a SimulationError rather than a warning
    with np.errstate(over="ignore", invalid="ignore"):
        return _step_all(g, grid, values, cur, specs, sigmas, nbr_idx, n_replicas, d, substeps, seed, measure)


def _step_all(g, grid, values, cur, specs, sigmas, nbr_idx, n_replicas, d, substeps, seed, measure):
    labels = g.vertices
    nt = grid.size
    for k in range(nt - 1):
        h = (grid[k + 1] - grid[k]) / substeps
        sqrt_h = np.sqrt(h)
        for j in range(substeps):
            t_sub = grid[k] + j * h
            step = k * substeps + j
            new = np.empty_like(cur)
            for vi, v in enumerate(labels):
                x = cur[:, vi, :]
                z = noise_stream(seed, step, v).standard_normal((n_replicas, d))
                dx = sigmas[vi].noise_increment(x, z * sqrt_h)
                spec = specs[vi]
                if spec is not None and not spec.is_zero:
                    ctx = EvalContext(
                        t_sub,
                        x,
                        [cur[:, ui, :] for ui in nbr_idx[vi]],
                        times=grid[: k + 1],
                        own_hist=values[:, vi, : k + 1, :],
                    )
                    dx = dx + evaluate_vectorized(spec, ctx, d) * h
                new[:, vi, :] = x + dx
            cur = new
        if not np.all(np.isfinite(cur)):
            raise _first_bad(cur, labels, grid[k + 1])
        values[:, :, k + 1, :] = cur

    scheme = {"kind": "euler_maruyama", "substeps": int(substeps)}
    return PathEnsemble(g, grid, values, int(seed), scheme, measure)


def simulate(g, drift, diffusion, mu0, grid, n_replicas, seed, substeps=1) -> PathEnsemble:
    """Simulate the interacting system dX_v = b_v dt + sigma_v dW_v.

    `substeps` integrates each grid interval with that many internal Euler
    steps while storing only the grid points; allowed only for drifts with
    no path-history terms.
    """
    return _run(g, drift, diffusion, mu0, grid, n_replicas, seed, substeps, "P")


def simulate_driftless(g, diffusion, mu0, grid, n_replicas, seed, substeps=1) -> PathEnsemble:
    """Reference dynamics dX_v = sigma_v dW_v; with a product initial law the
    vertices are independent."""
    return _run(g, None, diffusion, mu0, grid, n_replicas, seed, substeps, "P_star")


def simulate_truncated(g_infinite, root, n, drift, diffusion, mu0, grid, n_replicas, seed, substeps=1) -> PathEnsemble:
    """Simulate the level-n augmented truncation around the root.

    Vertices within distance n-2 of the root keep their drift; the outer
    shell evolves driftless.  Noise streams are keyed by vertex label, so
    levels sharing a vertex share its noise.
    """
    if isinstance(g_infinite, InfiniteGraph):
        base = g_infinite if root is None or root == g_infinite.root else InfiniteGraph(g_infinite.neighbor_fn, root)
        trunc = base.truncation(n)
    elif isinstance(g_infinite, Graph):
        base = g_infinite if root is None else g_infinite.with_root(root)
        trunc = augmented_truncation(base, n)
    else:
        raise TypeError("expected a Graph or InfiniteGraph")
    family = truncated_drift_family(drift, base, n)
    return _run(trunc, family, diffusion, mu0, grid, n_replicas, seed, substeps, f"P_n({n})")


def girsanov_weights(ens: PathEnsemble, drift, diffusion) -> GirsanovWeights:
    """Change-of-measure weights dP/dP_star at the grid horizon.

    Per vertex v, M_v = sum_k (sigma sigma^T)^{-1} b_v(t_k) . dX_v(k) and
    [M_v] = sum_k |sigma^{-1} b_v(t_k)|^2 dt_k, with the drift evaluated at
    left endpoints; the weight is exp(sum_v (M_v - [M_v]/2)).  Each vertex
    factor reads only the trajectories of v and its neighbors.
    """
    if ens.measure != "P_star":
        raise ValueError(f"expected a P_star ensemble, got measure {ens.measure!r}")
    if ens.scheme.get("substeps", 1) != 1:
        raise ValueError("weights need the full path: simulate with substeps=1")
    drift = _as_drift_table(drift)
    diffusion = _as_diffusion_table(diffusion)
    g = ens.graph
    grid = ens.grid
    r, _, nt, d = ens.values.shape
    m = {}
    qv = {}
    log_w = np.zeros(r)
    for vi, v in enumerate(g.vertices):
        spec = drift.for_vertex(v)
        if spec is None or spec.is_zero:
            m[v] = np.zeros(r)
            qv[v] = np.zeros(r)
            continue
        sigma = diffusion.for_vertex(v)
        nbr = [g.index(u) for u in g.neighbors(v)]
        mv = np.zeros(r)
        qvv = np.zeros(r)
        for k in range(nt - 1):
            dt = grid[k + 1] - grid[k]
            x = ens.values[:, vi, k, :]
            ctx = EvalContext(
                grid[k],
                x,
                [ens.values[:, ui, k, :] for ui in nbr],
                times=grid[: k + 1],
                own_hist=ens.values[:, vi, : k + 1, :],
            )
            b = evaluate_vectorized(spec, ctx, d)
            dx = ens.values[:, vi, k + 1, :] - x
            mv = mv + np.sum(sigma.sigma_sigmaT_inv_vec(x, b) * dx, axis=1)
            s = sigma.sigma_inv_vec(x, b)
            qvv = qvv + np.sum(s * s, axis=1) * dt
        m[v] = mv
        qv[v] = qvv
        log_w = log_w + (mv - 0.5 * qvv)
    weights = np.exp(log_w)
    if not np.all(np.isfinite(weights)):
        bad = int(np.flatnonzero(~np.isfinite(weights))[0])
        raise SimulationError(bad, None, float(grid[-1]))
    return GirsanovWeights(weights, m, qv, float(grid[-1]))


def energy_distance(x: np.ndarray, y: np.ndarray, max_points: int | None = 4000) -> float:
    """Unbiased sample energy distance between two point clouds (n, p)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if max_points is not None:
        x = x[:max_points]
        y = y[:max_points]
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise ValueError("need at least two points per sample")
    a = cdist(x, y).mean()
    b = 2.0 * pdist(x).sum() / (n * (n - 1))
    c = 2.0 * pdist(y).sum() / (m * (m - 1))
    return float(2 * a - b - c)


@dataclass(frozen=True)
class TruncationRow:
    n: int
    energy_distance: float
    ks_max: float
    replicas: int


@dataclass(frozen=True)
class TruncationTable:
    rows: tuple

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    @property
    def monotone_decreasing(self) -> bool:
        d = [row.energy_distance for row in self.rows]
        return all(a >= b for a, b in zip(d, d[1:]))

    def to_csv(self) -> str:
        lines = ["n,energy_distance,ks_max,replicas"]
        for row in self.rows:
            lines.append(f"{row.n},{row.energy_distance:.10g},{row.ks_max:.10g},{row.replicas}")
        return "\n".join(lines) + "\n"


def truncation_convergence(
    g_infinite,
    drift,
    diffusion,
    mu0,
    window,
    t,
    ns,
    n_replicas,
    seed,
    steps=64,
    root=None,
    substeps=1,
) -> TruncationTable:
    """Distance of window marginals at each truncation level to the largest level.

    All levels run on common random numbers (label-keyed streams, same seed),
    so the distances isolate the truncation effect.  The monotone trend is
    reported, not enforced.
    """
    ns = sorted(set(int(n) for n in ns))
    if ns[0] < 4:
        raise ValueError("truncation level must be at least 4")
    window = list(window)
    if isinstance(g_infinite, InfiniteGraph):
        base = g_infinite if root is None or root == g_infinite.root else InfiniteGraph(g_infinite.neighbor_fn, root)
        inner = set(base.ball(ns[0] - 2).vertices)
    else:
        base = g_infinite if root is None else g_infinite.with_root(root)
        from .graphs import ball

        inner = set(ball(base, ns[0] - 2).vertices)
    outside = [v for v in window if v not in inner]
    if outside:
        raise ValueError(f"window vertices {outside!r} lie outside the smallest truncation's interior")

    grid = np.linspace(0.0, t, steps + 1)
    marginals = {}
    for n in ns:
        ens = simulate_truncated(base, None, n, drift, diffusion, mu0, grid, n_replicas, seed, substeps)
        idx = [ens.graph.index(v) for v in window]
        marginals[n] = ens.values[:, idx, -1, :].reshape(n_replicas, -1)
    ref = marginals[ns[-1]]
    rows = []
    for n in ns:
        cur = marginals[n]
        ed = energy_distance(cur, ref)
        # asymptotic mode: only the statistic is used, and the exact p-value
        # path warns on the tied samples that common random numbers produce
        ks = max(
            ks_2samp(cur[:, i], ref[:, i], method="asymp").statistic
            for i in range(cur.shape[1])
        )
        rows.append(TruncationRow(n, ed, float(ks), n_replicas))
    return TruncationTable(tuple(rows))


def entropy_bound_estimate(ens: PathEnsemble, drift, diffusion, vertices, t) -> float:
    """Monte Carlo value of 1/2 sum_v E int_0^t |sigma_v^{-1} b_v(s)|^2 ds.

    An upper-bound diagnostic for the relative entropy of the window marginal
    with respect to the driftless reference.  For truncated ensembles the sum
    runs over the window's vertices present in the truncation; for full
    ensembles an unknown vertex is an error.
    """
    if not (ens.measure == "P" or ens.measure.startswith("P_n(")):
        raise ValueError(f"expected a P or P_n ensemble, got {ens.measure!r}")
    kt = ens.time_index(t)
    drift = _as_drift_table(drift)
    diffusion = _as_diffusion_table(diffusion)
    g = ens.graph
    have = set(g.vertices)
    if ens.measure.startswith("P_n("):
        vs = [v for v in vertices if v in have]
    else:
        missing = [v for v in vertices if v not in have]
        if missing:
            raise ValueError(f"vertices {missing!r} not in the ensemble")
        vs = list(vertices)
    grid = ens.grid
    total = 0.0
    for v in vs:
        spec = drift.for_vertex(v)
        if spec is None or spec.is_zero:
            continue
        sigma = diffusion.for_vertex(v)
        vi = g.index(v)
        nbr = [g.index(u) for u in g.neighbors(v)]
        for k in range(kt):
            dt = grid[k + 1] - grid[k]
            x = ens.values[:, vi, k, :]
            ctx = EvalContext(
                grid[k],
                x,
                [ens.values[:, ui, k, :] for ui in nbr],
                times=grid[: k + 1],
                own_hist=ens.values[:, vi, : k + 1, :],
            )
            b = evaluate_vectorized(spec, ctx, ens.dim)
            s = sigma.sigma_inv_vec(x, b)
            total += float(np.mean(np.sum(s * s, axis=1))) * dt
    return 0.5 * total


# ------------------------------------------------------------ persistence

_MAGIC = b"NDPE\x01"


def _jsonable_label(lab):
    if isinstance(lab, tuple):
        return list(_jsonable_label(x) for x in lab)
    return lab


def _label_from_json(lab):
    if isinstance(lab, list):
        return tuple(_label_from_json(x) for x in lab)
    return lab


def save_ensemble(path, ens: PathEnsemble) -> None:
    """Binary container: magic, u32 header length, JSON header, f64 data.

    Data is little-endian float64 in (replica, vertex, time, component)
    order, exactly the in-memory layout.
    """
    header = {
        "grid": [float(x) for x in ens.grid],
        "vertices": [_jsonable_label(v) for v in ens.graph.vertices],
        "edges": [[_jsonable_label(u), _jsonable_label(w)] for u, w in ens.graph.edges()],
        "root": None if ens.graph.root is None else _jsonable_label(ens.graph.root),
        "seed": ens.seed,
        "scheme": ens.scheme,
        "measure": ens.measure,
        "shape": list(ens.values.shape),
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(ens.values, dtype="<f8").tobytes())


def load_ensemble(path) -> PathEnsemble:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not an ensemble container")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = fh.read()
    shape = tuple(header["shape"])
    values = np.frombuffer(data, dtype="<f8").reshape(shape).astype(float)
    vertices = [_label_from_json(v) for v in header["vertices"]]
    edges = [(_label_from_json(u), _label_from_json(w)) for u, w in header["edges"]]
    root = None if header["root"] is None else _label_from_json(header["root"])
    g = Graph(vertices, edges, root=root)
    return PathEnsemble(g, np.asarray(header["grid"], dtype=float), values, header["seed"], header["scheme"], header["measure"])


def ensemble_summary_csv(ens: PathEnsemble) -> str:
    """Per (vertex, time, component) mean and standard deviation across replicas."""
    lines = ["vertex,time,component,mean,std"]
    for vi, v in enumerate(ens.labels):
        for k, t in enumerate(ens.grid):
            for c in range(ens.dim):
                col = ens.values[:, vi, k, c]
                lines.append(f"{v},{t:.10g},{c},{col.mean():.10g},{col.std(ddof=1):.10g}")
    return "\n".join(lines) + "\n"
