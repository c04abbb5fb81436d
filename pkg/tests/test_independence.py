"""Tests for conditional-independence reports on exact and simulated sources."""

import itertools
import json

import numpy as np
import pytest
from scipy import stats

from netdiff.coefficients import ConstantDiffusion, parse_drift
from netdiff.engine import simulate, simulate_driftless
from netdiff.gaussian import (
    StackedCovariance,
    build_linear_system,
    covariance_at,
    path_covariance,
)
from netdiff.graphs import path_graph
from netdiff.independence import (
    exact_gaussian_ci,
    mrf_order_scan,
    order_summary,
    partial_correlation_ci_test,
    reports_to_csv,
    reports_to_json,
)
from netdiff.initials import PointMass

UNIT = ConstantDiffusion([[1.0]])
P5 = path_graph(5)
P5_SYS = build_linear_system(P5, -2.0)
P5_DRIFT = parse_drift("nbr_sum(y) - 2*x")


def euler_stacked(steps=32, t=2.0):
    return path_covariance(P5_SYS, np.linspace(0.0, t, steps + 1), scheme="euler")


def single_time_stacked(sys, t):
    cov = covariance_at(sys, t)
    return StackedCovariance(cov.sigma, cov.labels, (t,), "exact")


def test_second_boundary_blocks_paths():
    rep = exact_gaussian_ci(euler_stacked(), [1], [2, 3], [4, 5])
    assert rep.verdict == "independent"
    assert rep.statistic < 1e-10
    assert rep.mode == "exact_gaussian"
    assert rep.threshold == 1e-8


def test_first_boundary_fails_on_paths():
    rep = exact_gaussian_ci(euler_stacked(), [1], [2], [3, 4, 5])
    assert rep.verdict == "dependent"
    assert rep.statistic > 1e-4


def test_exact_test_symmetric_in_a_b():
    st = euler_stacked()
    for a, s, b in ([(1,), (2, 3), (4, 5)], [(1,), (2,), (3, 4, 5)]):
        fwd = exact_gaussian_ci(st, a, s, b)
        rev = exact_gaussian_ci(st, b, s, a)
        assert fwd.statistic == rev.statistic
        assert fwd.verdict == rev.verdict


def test_time_zero_product_always_independent():
    rng = np.random.default_rng(5)
    labels = (1, 2, 3, 4, 5)
    st0 = StackedCovariance(np.diag(rng.uniform(0.5, 2.0, 5)), labels, (0.0,), "exact")
    for a, b in itertools.permutations(labels, 2):
        rest = tuple(v for v in labels if v not in (a, b))
        for s in ((), rest, rest[:2]):
            rep = exact_gaussian_ci(st0, [a], s, [b])
            assert rep.verdict == "independent"
            assert rep.statistic < 1e-14


def test_marginal_statistic_is_partial_correlation():
    # conditional covariance of (X1, X3) given X2 at t=2 is
    # [[0.2481, -0.0058], [-0.0058, 0.3397]]; the block statistic of the
    # single-time marginal equals the implied partial correlation
    rep = exact_gaussian_ci(single_time_stacked(P5_SYS, 2.0), [1], [2], [3])
    assert rep.verdict == "dependent"
    assert rep.statistic == pytest.approx(0.0058 / np.sqrt(0.2481 * 0.3397), abs=5e-4)


def test_singular_marginal_raises():
    st = StackedCovariance(np.ones((4, 4)), (1, 2, 3, 4), (1.0,), "exact")
    with pytest.raises(np.linalg.LinAlgError):
        exact_gaussian_ci(st, [1], [2], [3])


def test_triple_validation():
    st = euler_stacked(8)
    with pytest.raises(ValueError, match="overlap"):
        exact_gaussian_ci(st, [1, 2], [2], [3])
    with pytest.raises(ValueError, match="nonempty"):
        exact_gaussian_ci(st, [], [2], [3])
    with pytest.raises(ValueError, match="not in"):
        exact_gaussian_ci(st, [1], [2], [9])
    with pytest.raises(ValueError, match="duplicate"):
        exact_gaussian_ci(st, [1, 1], [2], [3])


def test_partial_correlation_independent_given_second_boundary():
    # euler stepping with the stored grid as the dynamics grid, so the
    # sampled law has the exact two-clique factorization
    grid = np.linspace(0.0, 2.0, 9)
    hits = 0
    for seed in range(20):
        ens = simulate(P5, P5_DRIFT, UNIT, PointMass(0.0), grid, 4000, seed=seed)
        rep = partial_correlation_ci_test(ens, [1], [2, 3], [4, 5], grid[1:], alpha=0.01)
        assert rep.verdict in ("independent", "dependent")
        hits += rep.verdict == "independent"
    assert hits >= 19


def test_partial_correlation_detects_marginal_dependence():
    # fine substeps so the time-2 marginal is near the continuum, where
    # the (1,3)-given-2 partial correlation is about -0.018
    grid = np.array([0.0, 1.0, 2.0])
    ens = simulate(P5, P5_DRIFT, UNIT, PointMass(0.0), grid, 100_000, seed=7, substeps=128)
    rep = partial_correlation_ci_test(ens, [1], [2], [3], [2.0], alpha=0.01)
    assert rep.verdict == "dependent"
    assert rep.p_value <= 0.01
    assert 0.008 < rep.statistic < 0.03
    assert rep.n_features == 3
    assert rep.n_replicas == 100_000


def test_calibration_under_true_independence():
    grid = np.array([0.0, 0.5, 1.0])
    g3 = path_graph(3)
    runs = 200
    fp05 = 0
    fp01 = 0
    for seed in range(runs):
        ens = simulate_driftless(g3, UNIT, PointMass(0.0), grid, 200, seed=seed)
        rep = partial_correlation_ci_test(ens, [1], [2], [3], [1.0], alpha=0.05)
        fp05 += rep.verdict == "dependent"
        fp01 += rep.p_value <= 0.01
    lo, hi = stats.binom.interval(0.99, runs, 0.05)
    assert lo <= fp05 <= hi
    assert (runs - fp01) / runs >= 0.95


def test_replica_floor():
    grid = np.linspace(0.0, 1.0, 5)
    ens = simulate_driftless(path_graph(3), UNIT, PointMass(0.0), grid, 500, seed=1)
    with pytest.raises(ValueError, match="replicas"):
        partial_correlation_ci_test(ens, [1], [2], [3], grid[1:], alpha=0.01)


def test_constant_feature_is_inconclusive():
    # the time-0 snapshot of a point-mass start duplicates the intercept
    grid = np.linspace(0.0, 1.0, 5)
    ens = simulate_driftless(path_graph(3), UNIT, PointMass(0.0), grid, 1000, seed=2)
    rep = partial_correlation_ci_test(ens, [1], [2], [3], [0.0, 1.0], alpha=0.01)
    assert rep.verdict == "inconclusive"
    assert np.isnan(rep.statistic)


def test_alpha_validation():
    grid = np.array([0.0, 1.0])
    ens = simulate_driftless(path_graph(3), UNIT, PointMass(0.0), grid, 500, seed=3)
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError, match="alpha"):
            partial_correlation_ci_test(ens, [1], [2], [3], [1.0], alpha=alpha)


def test_order_scan_exact_source():
    st = euler_stacked()
    reps2 = mrf_order_scan(P5, st, orders=(2,))
    assert {r.a for r in reps2} == {(1,), (2,), (4,), (5,), (1, 2), (4, 5)}
    assert all(r.verdict == "independent" for r in reps2)
    assert order_summary(reps2) == {2: "pass"}

    reps1 = mrf_order_scan(P5, st, orders=(1,))
    assert any(r.a == (1,) and r.verdict == "dependent" for r in reps1)
    assert order_summary(reps1) == {1: "fail"}

    both = mrf_order_scan(P5, st)
    assert order_summary(both) == {1: "fail", 2: "pass"}


def test_order_scan_marginal_fails_both_orders():
    st0 = single_time_stacked(P5_SYS, 2.0)
    reps = mrf_order_scan(P5, st0)
    assert order_summary(reps) == {1: "fail", 2: "fail"}


def test_order_scan_ensemble_source():
    g3 = path_graph(3)
    grid = np.linspace(0.0, 1.0, 3)
    ens = simulate_driftless(g3, UNIT, PointMass(0.0), grid, 2000, seed=3)
    reps = mrf_order_scan(g3, ens, orders=(1,))
    assert {r.a for r in reps} == {(1,), (3,)}
    assert all(r.mode == "partial_correlation" for r in reps)
    assert all(r.verdict == "independent" for r in reps)


def test_order_scan_explicit_sets():
    st = euler_stacked(8)
    assert mrf_order_scan(P5, st, orders=(2,), sets=[(3,)]) == []
    reps = mrf_order_scan(P5, st, orders=(2,), sets=[(1,)])
    assert len(reps) == 1 and reps[0].order == 2


def test_order_scan_input_validation():
    st = euler_stacked(8)
    with pytest.raises(TypeError, match="source"):
        mrf_order_scan(P5, object())
    with pytest.raises(ValueError, match="orders"):
        mrf_order_scan(P5, st, orders=(3,))


def test_report_emitters():
    reps = mrf_order_scan(P5, euler_stacked(16))
    recs = json.loads(reports_to_json(reps))
    assert len(recs) == len(reps)
    assert recs[0]["mode"] == "exact_gaussian"
    assert recs[0]["a"] == list(reps[0].a)
    assert recs[0]["order"] == reps[0].order
    assert {r["verdict"] for r in recs} == {"independent", "dependent"}

    text = reports_to_csv(reps)
    lines = text.strip().split("\n")
    assert lines[0] == "set,order,mode,statistic,verdict"
    assert len(lines) == len(reps) + 1
    assert any(line.startswith("1|2,") for line in lines[1:])
