"""Exact finite-state laboratory for second-order Markov random fields.

Everything here works on full joint tables (state-space cap 2^20 entries),
so Markov properties, factorizations, projections, and conditional kernels
are all checked by exact enumeration rather than sampling.  The canonical
factorization fixes the gauge freedom of factor systems by Moebius
inversion around the all-zeros reference configuration.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, augmented_truncation, boundary, boundary2, cliques, graph_distance

__all__ = [
    "FactorModel",
    "JointTable",
    "MrfCheck",
    "Violation",
    "Witness",
    "ConditionalKernel",
    "joint_table",
    "marginalize",
    "empirical_table",
    "check_mrf_bruteforce",
    "factorize_positive_2mrf",
    "project_to_truncation",
    "projection_counterexample_search",
    "conditional_specification",
    "gibbs_sampler",
    "random_factor_model",
    "factor_model_to_json",
    "factor_model_from_json",
]

_MAX_TABLE = 2**20


def _spread(table: np.ndarray, axes, ndim: int, k: int) -> np.ndarray:
    """View of `table` broadcastable over a ndim-axis state array."""
    axes = list(axes)
    order = np.argsort(axes)
    if not np.array_equal(order, np.arange(len(axes))):
        table = np.transpose(table, order)
        axes = sorted(axes)
    shape = tuple(k if i in set(axes) else 1 for i in range(ndim))
    return table.reshape(shape)


class FactorModel:
    """Nonnegative factors on the 2-cliques of a graph, over states {0..k-1}.

    `base` holds per-vertex reference weights (defaults to uniform); the
    joint law is the normalized product of base weights and factor tables.
    """

    def __init__(self, graph: Graph, k: int, factors=None, base=None):
        if k < 2:
            raise ValueError("need at least two states per vertex")
        nv = len(graph.vertices)
        if k**nv > _MAX_TABLE:
            raise ValueError(f"state space k^|V| = {k}^{nv} exceeds the exact-computation cap")
        self.graph = graph
        self.k = int(k)
        allowed = set(cliques(graph, 2))
        self.factors = {}
        for key, table in (factors or {}).items():
            key = tuple(sorted(key, key=graph.index))
            if frozenset(key) not in allowed:
                raise ValueError(f"{key!r} is not a 2-clique of the graph")
            table = np.asarray(table, dtype=float)
            if table.shape != (k,) * len(key):
                raise ValueError(f"factor on {key!r} must have shape {(k,) * len(key)}")
            if np.any(table < 0) or not np.all(np.isfinite(table)):
                raise ValueError(f"factor on {key!r} must be nonnegative and finite")
            if key in self.factors:
                self.factors[key] = self.factors[key] * table
            else:
                self.factors[key] = table
        self.base = {}
        for v, w in (base or {}).items():
            graph.index(v)
            w = np.asarray(w, dtype=float)
            if w.shape != (k,):
                raise ValueError(f"base weight for {v!r} must have shape ({k},)")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"base weight for {v!r} must be nonnegative and finite")
            self.base[v] = w

    @property
    def strictly_positive(self) -> bool:
        return all(np.all(t > 0) for t in self.factors.values()) and all(
            np.all(w > 0) for w in self.base.values()
        )

    def to_config(self) -> dict:
        g = self.graph
        return {
            "vertices": [_as_json(v) for v in g.vertices],
            "edges": [[_as_json(u), _as_json(w)] for u, w in g.edges()],
            "root": None if g.root is None else _as_json(g.root),
            "k": self.k,
            "factors": {
                "|".join(str(v) for v in key): {
                    "clique": [_as_json(v) for v in key],
                    "table": np.asarray(t).reshape(-1).tolist(),
                }
                for key, t in self.factors.items()
            },
            "base": {str(v): {"vertex": _as_json(v), "weights": w.tolist()} for v, w in self.base.items()},
        }


def _as_json(lab):
    if isinstance(lab, tuple):
        return [_as_json(x) for x in lab]
    return lab


def _from_json(lab):
    if isinstance(lab, list):
        return tuple(_from_json(x) for x in lab)
    return lab


def factor_model_to_json(m: FactorModel) -> str:
    return json.dumps(m.to_config())


def factor_model_from_json(text: str) -> FactorModel:
    cfg = json.loads(text)
    vertices = [_from_json(v) for v in cfg["vertices"]]
    edges = [(_from_json(u), _from_json(w)) for u, w in cfg["edges"]]
    root = None if cfg.get("root") is None else _from_json(cfg["root"])
    g = Graph(vertices, edges, root=root)
    k = cfg["k"]
    factors = {}
    for item in cfg.get("factors", {}).values():
        key = tuple(_from_json(v) for v in item["clique"])
        factors[key] = np.asarray(item["table"], dtype=float).reshape((k,) * len(key))
    base = {}
    for item in cfg.get("base", {}).values():
        base[_from_json(item["vertex"])] = np.asarray(item["weights"], dtype=float)
    return FactorModel(g, k, factors, base)


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact joint law: probs has one axis per vertex in graph order."""

    probs: np.ndarray
    labels: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != len(self.labels):
            raise ValueError("one axis per vertex required")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("table must sum to 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "labels", tuple(self.labels))


def joint_table(m: FactorModel) -> JointTable:
    """Normalized product of base weights and factors, exact."""
    g = m.graph
    nv = len(g.vertices)
    k = m.k
    w = np.ones((k,) * nv)
    for v, vec in m.base.items():
        w = w * _spread(vec, [g.index(v)], nv, k)
    for key, table in m.factors.items():
        w = w * _spread(table, [g.index(v) for v in key], nv, k)
    z = w.sum()
    if not z > 0:
        raise ValueError("zero normalizing constant")
    return JointTable(w / z, g.vertices)


def marginalize(t: JointTable, keep) -> JointTable:
    keep = list(keep)
    pos = {lab: i for i, lab in enumerate(t.labels)}
    drop = tuple(i for lab, i in pos.items() if lab not in set(keep))
    kept = [lab for lab in t.labels if lab in set(keep)]
    return JointTable(t.probs.sum(axis=drop), kept)


def empirical_table(samples: np.ndarray, k: int, labels) -> JointTable:
    """Frequency table of integer configurations, shape-compatible with joint_table."""
    samples = np.asarray(samples, dtype=int)
    nv = samples.shape[1]
    counts = np.zeros((k,) * nv)
    np.add.at(counts, tuple(samples.T), 1.0)
    return JointTable(counts / samples.shape[0], labels)


def total_variation(a: JointTable, b: JointTable) -> float:
    if a.labels != b.labels:
        raise ValueError("tables index different vertices")
    return 0.5 * float(np.abs(a.probs - b.probs).sum())


@dataclass(frozen=True)
class Violation:
    a: tuple
    boundary: tuple
    config: tuple
    tv: float


@dataclass(frozen=True)
class MrfCheck:
    order: int
    max_violation: float
    worst: Violation | None
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def check_mrf_bruteforce(t: JointTable, g: Graph, order: int, tol: float = 1e-10) -> MrfCheck:
    """Exhaustive Markov-property check: X_A independent of the exterior
    given the order-1 or order-2 boundary, for every nonempty vertex set A.

    Returns the worst total-variation violation over (A, boundary config).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if t.labels != g.vertices:
        raise ValueError("table does not index this graph's vertices")
    nv = len(g.vertices)
    k = t.probs.shape[0] if nv else 1
    bnd = boundary if order == 1 else boundary2
    max_violation = 0.0
    worst = None
    for r in range(1, nv + 1):
        for a_labs in itertools.combinations(g.vertices, r):
            s_labs = tuple(sorted(bnd(g, a_labs), key=g.index))
            rest = [v for v in g.vertices if v not in set(a_labs) | set(s_labs)]
            if not rest:
                continue
            ax_a = [g.index(v) for v in a_labs]
            ax_s = [g.index(v) for v in s_labs]
            ax_c = [g.index(v) for v in rest]
            p = t.probs.transpose(ax_a + ax_s + ax_c).reshape(
                k ** len(ax_a), k ** len(ax_s), k ** len(ax_c)
            )
            ps = p.sum(axis=(0, 2))
            live = ps > 0
            cond = np.zeros_like(p)
            cond[:, live, :] = p[:, live, :] / ps[live][None, :, None]
            ca = cond.sum(axis=2)
            cc = cond.sum(axis=0)
            prod = ca[:, :, None] * cc[None, :, :]
            tv = 0.5 * np.abs(cond - prod).sum(axis=(0, 2))
            tv[~live] = 0.0
            j = int(np.argmax(tv))
            if tv[j] > max_violation:
                cfg = tuple(int(x) for x in np.unravel_index(j, (k,) * len(s_labs))) if s_labs else ()
                max_violation = float(tv[j])
                worst = Violation(a_labs, s_labs, cfg, float(tv[j]))
    return MrfCheck(order, max_violation, worst, tol)


def factorize_positive_2mrf(t: JointTable, g: Graph, tol: float = 1e-10) -> FactorModel:
    """Canonical 2-clique factorization of a strictly positive second-order MRF.

    Potentials come from Moebius inversion of log p around the all-zeros
    configuration; singleton potentials land in the base weights.  The
    reconstruction is verified against the input within the tolerance.
    """
    if np.any(t.probs <= 0):
        raise ValueError("factorization requires a strictly positive table")
    chk = check_mrf_bruteforce(t, g, 2, tol)
    if not chk.ok:
        raise ValueError(f"not a second-order MRF: worst violation {chk.max_violation:.3g} at {chk.worst.a}")
    nv = len(g.vertices)
    k = t.probs.shape[0]
    logp = np.log(t.probs)
    base = {}
    factors = {}
    for clique in cliques(g, 2):
        key = tuple(sorted(clique, key=g.index))
        axes = [g.index(v) for v in key]
        diff = logp
        for ax in axes:
            diff = diff - np.take(diff, [0], axis=ax)
        slicer = tuple(slice(None) if i in set(axes) else 0 for i in range(nv))
        table = np.exp(diff[slicer])
        if len(key) == 1:
            base[key[0]] = table
        else:
            factors[key] = table
    model = FactorModel(g, k, factors, base)
    recon = joint_table(model)
    tv = total_variation(recon, t)
    if tv > tol:
        raise ValueError(f"reconstruction mismatch: TV {tv:.3g}")
    return model


def project_to_truncation(m: FactorModel, n: int) -> FactorModel:
    """Marginal of the model onto the level-n augmented truncation.

    Factors wholly inside the truncation are copied verbatim; everything
    touching the removed exterior collapses, by exact summation, into a
    single aggregate factor on the outer shell U_n (a clique of the
    augmented graph).  The result's joint table equals the exact marginal.
    """
    g = m.graph
    if g.root is None:
        raise ValueError("projection requires a rooted graph")
    gn = augmented_truncation(g, n)
    keep = set(gn.vertices)
    outside = [v for v in g.vertices if v not in keep]
    k = m.k

    inner = {}
    outer = {}
    for key, table in m.factors.items():
        if set(key) <= keep:
            inner[key] = table
        else:
            outer[key] = table
    base = {v: w for v, w in m.base.items() if v in keep}

    if outside:
        shell = [v for v in gn.vertices if graph_distance(g, g.root, v) > n - 2]
        scope = shell + outside
        pos = {v: i for i, v in enumerate(scope)}
        arr = np.ones((k,) * len(scope))
        for key, table in outer.items():
            arr = arr * _spread(table, [pos[v] for v in key], len(scope), k)
        for v in outside:
            if v in m.base:
                arr = arr * _spread(m.base[v], [pos[v]], len(scope), k)
        agg = arr.sum(axis=tuple(range(len(shell), len(scope))))
        # axes of agg follow `shell`; reorder to the key's vertex order
        shell_key = tuple(sorted(shell, key=gn.index))
        agg = np.transpose(agg, [shell.index(v) for v in shell_key])
        if shell_key in inner:
            inner[shell_key] = inner[shell_key] * agg
        else:
            inner[shell_key] = agg

    result = FactorModel(gn, k, inner, base)
    got = joint_table(result)
    want = marginalize(joint_table(m), gn.vertices)
    tv = total_variation(got, want)
    if tv > 1e-10:
        raise ValueError(f"projection self-check failed: TV {tv:.3g}")
    return result


@dataclass(frozen=True)
class Witness:
    model: FactorModel
    check: MrfCheck
    trial: int


def random_factor_model(g: Graph, k: int, rng, scale: float = 1.0, pairs_only: bool = True) -> FactorModel:
    """Random strictly positive factor model (log-normal factor entries)."""
    factors = {}
    if pairs_only:
        keys = [c for c in cliques(g, 2) if len(c) == 2 and g.has_edge(*c)]
    else:
        keys = [c for c in cliques(g, 2) if len(c) >= 2]
    for clique in keys:
        key = tuple(sorted(clique, key=g.index))
        factors[key] = np.exp(rng.normal(size=(k,) * len(key)) * scale)
    base = {v: np.exp(rng.normal(size=k) * scale) for v in g.vertices}
    return FactorModel(g, k, factors, base)


def projection_counterexample_search(
    g: Graph, sub, trials: int, order: int = 1, seed: int = 0, threshold: float = 1e-6, k: int = 2
) -> Witness | None:
    """Search for a factor model whose marginal onto an induced subgraph
    fails the order-`order` Markov property there.

    Trials use derived seeds (seed + trial index) so they are independent
    and safely parallelizable.
    """
    sub = list(sub)
    induced = g.subgraph(sub)
    for i in range(trials):
        rng = np.random.default_rng(seed + i)
        model = random_factor_model(g, k, rng)
        marg = marginalize(joint_table(model), induced.vertices)
        chk = check_mrf_bruteforce(marg, induced, order, tol=threshold)
        if not chk.ok:
            return Witness(model, chk, i)
    return None


@dataclass(frozen=True, eq=False)
class ConditionalKernel:
    """Exact law of X_A as a function of the second-order boundary state.

    `table` has one axis per boundary vertex followed by one per target
    vertex; each boundary slice sums to 1.  Boundary configurations of
    probability zero are listed in `zero_boundary` (their rows computed
    from the local factor formula, or NaN if that is degenerate too).
    """

    a_vertices: tuple
    boundary: tuple
    table: np.ndarray
    zero_boundary: tuple
    max_discrepancy: float


def conditional_specification(m: FactorModel, a_set) -> ConditionalKernel:
    """Kernel x_{boundary2(A)} -> law of X_A, computed two independent ways.

    Route one conditions the exact joint table; route two uses only the
    factors meeting A (the local specification formula).  The two must
    agree within 1e-10 on every boundary configuration of positive
    probability, else this raises.
    """
    g = m.graph
    k = m.k
    a = tuple(sorted(a_set, key=g.index))
    if not a:
        raise ValueError("target set is empty")
    b = tuple(sorted(boundary2(g, a), key=g.index))

    t = joint_table(m)
    ax_a = [g.index(v) for v in a]
    ax_b = [g.index(v) for v in b]
    ax_c = [i for i in range(len(g.vertices)) if i not in set(ax_a) | set(ax_b)]
    p = t.probs.transpose(ax_b + ax_a + ax_c).reshape(k ** len(b), k ** len(a), -1).sum(axis=2)
    pb = p.sum(axis=1)
    live = pb > 0
    exact = np.full_like(p, np.nan)
    exact[live] = p[live] / pb[live][:, None]

    scope = list(b) + list(a)
    pos = {v: i for i, v in enumerate(scope)}
    arr = np.ones((k,) * len(scope))
    for v in a:
        if v in m.base:
            arr = arr * _spread(m.base[v], [pos[v]], len(scope), k)
    for key, table in m.factors.items():
        if set(key) & set(a):
            arr = arr * _spread(table, [pos[v] for v in key], len(scope), k)
    local = arr.reshape(k ** len(b), k ** len(a))
    denom = local.sum(axis=1)
    ok_rows = denom > 0
    kernel = np.full_like(local, np.nan)
    kernel[ok_rows] = local[ok_rows] / denom[ok_rows][:, None]

    both = live & ok_rows
    disc = float(np.abs(exact[both] - kernel[both]).max()) if np.any(both) else 0.0
    if disc > 1e-10:
        raise ValueError(f"specification routes disagree: max difference {disc:.3g}")
    zero = tuple(
        tuple(int(x) for x in np.unravel_index(j, (k,) * len(b)))
        for j in np.flatnonzero(~live)
    )
    shape = (k,) * len(b) + (k,) * len(a)
    return ConditionalKernel(a, b, kernel.reshape(shape), zero, disc)


def gibbs_sampler(m: FactorModel, sweeps: int, seed: int, burn_in: int = 0) -> np.ndarray:
    """Single-site Gibbs sweeps in fixed vertex order; one row per sweep.

    Requires strictly positive factors so every conditional is well defined.
    """
    if not m.strictly_positive:
        raise ValueError("Gibbs sampling requires strictly positive factors")
    g = m.graph
    k = m.k
    nv = len(g.vertices)
    touching = []
    for vi, v in enumerate(g.vertices):
        items = []
        if v in m.base:
            items.append(((vi,), m.base[v]))
        for key, table in m.factors.items():
            if v in key:
                items.append((tuple(g.index(u) for u in key), table))
        touching.append(items)
    rng = np.random.default_rng(seed)
    cur = rng.integers(0, k, size=nv)
    u = rng.random((burn_in + sweeps, nv))
    out = np.empty((sweeps, nv), dtype=np.int64)
    for s in range(burn_in + sweeps):
        for vi in range(nv):
            w = np.ones(k)
            for axes, table in touching[vi]:
                sel = tuple(slice(None) if a == vi else cur[a] for a in axes)
                w = w * table[sel]
            cum = np.cumsum(w)
            cur[vi] = np.searchsorted(cum, u[s, vi] * cum[-1], side="right")
        if s >= burn_in:
            out[s - burn_in] = cur
    return out
