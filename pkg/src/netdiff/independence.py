"""Conditional-independence tests on path laws.

Two routes to the same question "is X_A independent of X_B given X_S?":

* exact: invert a marginal of a stacked Gaussian path covariance and
  inspect the A x B precision block, and
* statistical: partial correlations of path snapshots from a simulated
  ensemble, with Fisher-z p-values and a Bonferroni correction.

``mrf_order_scan`` drives either route over a family of vertex sets and
their first or second boundaries.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .engine import PathEnsemble
from .gaussian import StackedCovariance
from .graphs import Graph, boundary, boundary2

__all__ = [
    "CITestReport",
    "exact_gaussian_ci",
    "partial_correlation_ci_test",
    "mrf_order_scan",
    "order_summary",
    "reports_to_json",
    "reports_to_csv",
]

_HEURISTIC_NOTE = "fisher-z p-values; heuristic unless features are jointly gaussian"


@dataclass(frozen=True)
class CITestReport:
    """Outcome of one conditional-independence test of A vs B given S.

    ``verdict`` is "independent" when ``statistic`` falls below
    ``threshold``, "dependent" when it does not, and "inconclusive" when
    the statistic could not be formed (rank-deficient features).
    """

    a: tuple
    s: tuple
    b: tuple
    mode: str
    statistic: float
    threshold: float
    verdict: str
    n_features: int | None = None
    n_replicas: int | None = None
    p_value: float | None = None
    order: int | None = None
    note: str = ""


def _check_triple(labels, a, s, b):
    """Canonicalize a disjoint (A, S, B) triple to label-ordered tuples."""
    pos = {lab: i for i, lab in enumerate(labels)}

    def canon(part, name):
        part = list(part)
        for lab in part:
            if lab not in pos:
                raise ValueError(f"vertex {lab!r} not in {name} source")
        if len(set(part)) != len(part):
            raise ValueError(f"duplicate vertex in {name}")
        return tuple(sorted(part, key=pos.__getitem__))

    a = canon(a, "A")
    s = canon(s, "S")
    b = canon(b, "B")
    if not a or not b:
        raise ValueError("A and B must be nonempty")
    for x, y, names in ((a, s, "A and S"), (a, b, "A and B"), (s, b, "S and B")):
        if set(x) & set(y):
            raise ValueError(f"{names} overlap")
    return a, s, b


def exact_gaussian_ci(stacked: StackedCovariance, a, s, b, tol: float = 1e-8) -> CITestReport:
    """Exact Gaussian test: A and B are conditionally independent given S
    iff the A x B block of the precision of the (A, S, B)-marginal vanishes.

    The statistic is the largest per-vertex-pair block entry, rescaled by
    the geometric mean of the two diagonal-block scales, as in
    :func:`netdiff.gaussian.path_precision_blocks`.
    """
    a, s, b = _check_triple(stacked.labels, a, s, b)
    m = stacked.n_times
    # label order, not (a, s, b) order, so the result is exactly A-B symmetric
    pos = {lab: i for i, lab in enumerate(stacked.labels)}
    keep = tuple(sorted(a + s + b, key=pos.__getitem__))
    cols = []
    sl = {}
    for pos, lab in enumerate(keep):
        src = stacked.vertex_slice(lab)
        cols.extend(range(src.start, src.stop))
        sl[lab] = slice(pos * m, (pos + 1) * m)
    sub = stacked.matrix[np.ix_(cols, cols)]
    ev = np.linalg.eigvalsh(sub)
    if ev[0] <= max(ev[-1], 0.0) * 1e-13:
        raise np.linalg.LinAlgError("marginal path covariance is numerically singular")
    q = np.linalg.inv(sub)
    q = 0.5 * (q + q.T)
    scale = {lab: np.abs(q[sl[lab], sl[lab]]).max() for lab in keep}
    worst = 0.0
    for u in a:
        for v in b:
            top = np.abs(q[sl[u], sl[v]]).max()
            worst = max(worst, float(top / np.sqrt(scale[u] * scale[v])))
    verdict = "independent" if worst < tol else "dependent"
    return CITestReport(
        a=a, s=s, b=b, mode="exact_gaussian",
        statistic=worst, threshold=tol, verdict=verdict,
        n_features=len(keep) * m,
    )


def _feature_matrix(ens: PathEnsemble, labels, time_indices) -> np.ndarray:
    vi = [ens.labels.index(lab) for lab in labels]
    block = ens.values[:, vi][:, :, time_indices, :]
    return block.reshape(ens.n_replicas, -1)


def partial_correlation_ci_test(
    ens: PathEnsemble,
    a,
    s,
    b,
    feature_grid,
    alpha: float = 0.01,
) -> CITestReport:
    """Statistical surrogate for the exact test on simulated paths.

    Features are the path values at ``feature_grid`` (per vertex and
    component).  The statistic is the largest absolute partial
    correlation between an A-feature and a B-feature given all
    S-features; the verdict compares the smallest Bonferroni-adjusted
    Fisher-z p-value with ``alpha``.  Requires at least 50 replicas per
    feature.  A rank-deficient regression (constant features, or A/B
    features that are linear in the S-features) yields an inconclusive
    report instead of a verdict.
    """
    a, s, b = _check_triple(ens.labels, a, s, b)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    ks = [ens.time_index(t) for t in feature_grid]
    if not ks:
        raise ValueError("feature grid is empty")
    fa = _feature_matrix(ens, a, ks)
    fb = _feature_matrix(ens, b, ks)
    fs = _feature_matrix(ens, s, ks) if s else np.empty((ens.n_replicas, 0))
    n = ens.n_replicas
    n_features = fa.shape[1] + fs.shape[1] + fb.shape[1]
    if n < 50 * n_features:
        raise ValueError(
            f"{n} replicas for {n_features} features; need at least {50 * n_features}"
        )
    n_pairs = fa.shape[1] * fb.shape[1]
    df = n - fs.shape[1] - 3
    z_crit = stats.norm.isf(alpha / (2.0 * n_pairs))
    r_crit = float(np.tanh(z_crit / np.sqrt(df)))
    common = dict(
        a=a, s=s, b=b, mode="partial_correlation", threshold=r_crit,
        n_features=n_features, n_replicas=n, note=_HEURISTIC_NOTE,
    )

    z = np.column_stack([np.ones(n), fs])
    if np.linalg.matrix_rank(z) < z.shape[1]:
        return CITestReport(
            statistic=float("nan"), verdict="inconclusive", **common,
        )
    beta_a, *_ = np.linalg.lstsq(z, fa, rcond=None)
    beta_b, *_ = np.linalg.lstsq(z, fb, rcond=None)
    ra = fa - z @ beta_a
    rb = fb - z @ beta_b
    ra = ra - ra.mean(axis=0)
    rb = rb - rb.mean(axis=0)
    na = np.sqrt((ra * ra).sum(axis=0))
    nb = np.sqrt((rb * rb).sum(axis=0))
    # residual scale collapsing to rounding noise means the feature is a
    # linear function of the conditioning set
    floor_a = 1e-8 * np.sqrt((fa * fa).sum(axis=0)) + 1e-300
    floor_b = 1e-8 * np.sqrt((fb * fb).sum(axis=0)) + 1e-300
    if np.any(na <= floor_a) or np.any(nb <= floor_b):
        return CITestReport(
            statistic=float("nan"), verdict="inconclusive", **common,
        )
    r = (ra.T @ rb) / np.outer(na, nb)
    r = np.clip(r, -1.0 + 1e-15, 1.0 - 1e-15)
    statistic = float(np.abs(r).max())
    z_stat = np.abs(np.arctanh(r)) * np.sqrt(df)
    p = float(min(1.0, 2.0 * stats.norm.sf(z_stat).min() * n_pairs))
    verdict = "independent" if p > alpha else "dependent"
    return CITestReport(statistic=statistic, verdict=verdict, p_value=p, **common)


def _default_sets(g: Graph):
    sets = [(v,) for v in g.vertices]
    sets.extend(tuple(sorted(e, key=g.index)) for e in g.edges())
    return sets


def mrf_order_scan(
    g: Graph,
    source,
    orders=(1, 2),
    sets=None,
    tol: float = 1e-8,
    feature_grid=None,
    alpha: float = 0.01,
) -> list[CITestReport]:
    """Test A vs V \\ (A ∪ ∂ᵏA) given ∂ᵏA for each set A and order k.

    ``sets`` defaults to all singletons and all edges of ``g``; sets whose
    complement beyond the boundary is empty are skipped.  ``source`` is
    either a stacked path covariance (exact route) or a path ensemble
    (partial-correlation route).  Each test is pure and independent of
    the others, so the loop is trivially parallelizable.
    """
    if isinstance(source, StackedCovariance):
        def run(a, s, b):
            return exact_gaussian_ci(source, a, s, b, tol)
    elif isinstance(source, PathEnsemble):
        if feature_grid is None:
            feature_grid = [t for t in source.grid if t > 0.0]

        def run(a, s, b):
            return partial_correlation_ci_test(source, a, s, b, feature_grid, alpha)
    else:
        raise TypeError("source must be a StackedCovariance or a PathEnsemble")
    bad = set(orders) - {1, 2}
    if bad:
        raise ValueError(f"unsupported orders {sorted(bad)}")
    if sets is None:
        sets = _default_sets(g)
    vset = set(g.vertices)
    reports = []
    for a in sets:
        for k in orders:
            sk = boundary(g, a) if k == 1 else boundary2(g, a)
            rest = vset - set(a) - sk
            if not rest:
                continue
            rep = run(tuple(a), tuple(sk), tuple(rest))
            reports.append(dataclasses.replace(rep, order=k))
    return reports


def order_summary(reports) -> dict:
    """Per-order verdict: fail on any dependent set, else inconclusive, else pass."""
    out = {}
    for rep in reports:
        if rep.order is None:
            continue
        seen = out.setdefault(rep.order, set())
        seen.add(rep.verdict)
    return {
        k: "fail" if "dependent" in v else ("inconclusive" if "inconclusive" in v else "pass")
        for k, v in sorted(out.items())
    }


def reports_to_json(reports) -> str:
    """JSON array of report records, one object per test."""
    recs = []
    for r in reports:
        rec = {
            "a": list(r.a),
            "s": list(r.s),
            "b": list(r.b),
            "mode": r.mode,
            "statistic": r.statistic,
            "threshold": r.threshold,
            "verdict": r.verdict,
        }
        for key in ("n_features", "n_replicas", "p_value", "order"):
            val = getattr(r, key)
            if val is not None:
                rec[key] = val
        if r.note:
            rec["note"] = r.note
        recs.append(rec)
    return json.dumps(recs, indent=2)


def reports_to_csv(reports) -> str:
    """CSV summary with columns set, order, mode, statistic, verdict."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["set", "order", "mode", "statistic", "verdict"])
    for r in reports:
        set_txt = "|".join(str(v) for v in r.a)
        order_txt = "" if r.order is None else r.order
        w.writerow([set_txt, order_txt, r.mode, f"{r.statistic:.6g}", r.verdict])
    return buf.getvalue()
