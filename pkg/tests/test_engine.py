import numpy as np
import pytest

from netdiff.coefficients import (
    ConstantDiffusion,
    DriftTable,
    TanhDiagonalDiffusion,
    parse_drift,
)
from netdiff.engine import (
    PathEnsemble,
    SimulationError,
    energy_distance,
    ensemble_summary_csv,
    entropy_bound_estimate,
    girsanov_weights,
    load_ensemble,
    save_ensemble,
    simulate,
    simulate_driftless,
    simulate_truncated,
    truncation_convergence,
)
from netdiff.gaussian import build_linear_system
from netdiff.graphs import Graph, complete_graph, grid_graph, path_graph, z_line
from netdiff.initials import NormalInitial, PointMass

UNIT = ConstantDiffusion([[1.0]])
P5_DRIFT = parse_drift("nbr_sum(y) - 2*x")


def test_brownian_one_step_variance():
    g = complete_graph(1)
    ens = simulate(g, None, UNIT, PointMass(0.0), [0.0, 0.5], 20_000, seed=1)
    var = ens.at_time(0.5)[:, 0, 0].var()
    # SE of a variance estimate is Delta*sqrt(2/R)
    assert abs(var - 0.5) < 3 * 0.5 * np.sqrt(2 / 20_000)


def test_replay_is_bit_identical():
    g = path_graph(3)
    diff = TanhDiagonalDiffusion([1.0], [0.4])
    a = simulate(g, P5_DRIFT, diff, NormalInitial(0, 1), np.linspace(0, 1, 9), 500, seed=77)
    b = simulate(g, P5_DRIFT, diff, NormalInitial(0, 1), np.linspace(0, 1, 9), 500, seed=77)
    assert np.array_equal(a.values, b.values)
    c = simulate(g, P5_DRIFT, diff, NormalInitial(0, 1), np.linspace(0, 1, 9), 500, seed=78)
    assert not np.array_equal(a.values, c.values)


def euler_chain_cov(L, dt, steps):
    n = L.shape[0]
    f = np.eye(n) + L * dt
    v = np.zeros((n, n))
    for _ in range(steps):
        v = f @ v @ f.T + dt * np.eye(n)
    return v


def test_p5_sample_covariance_matches_discrete_chain():
    g = path_graph(5)
    sys = build_linear_system(g, -2.0)
    substeps = 256
    ens = simulate(g, P5_DRIFT, UNIT, PointMass(0.0), [0.0, 2.0], 30_000, seed=3, substeps=substeps)
    emp = np.cov(ens.at_time(2.0)[:, :, 0], rowvar=False)
    exact = euler_chain_cov(sys.L, 2.0 / substeps, substeps)
    # statistical-only gap: the oracle is the same discrete chain
    assert np.abs(emp - exact).max() < 0.012


def test_halving_step_changes_covariance_within_noise():
    g = path_graph(5)
    cov = {}
    for substeps in (256, 512):
        ens = simulate(g, P5_DRIFT, UNIT, PointMass(0.0), [0.0, 2.0], 40_000, seed=11, substeps=substeps)
        cov[substeps] = np.cov(ens.at_time(2.0)[:, :, 0], rowvar=False)
    assert np.abs(cov[256] - cov[512]).max() < 0.014


def test_nan_explosion_is_reported():
    g = complete_graph(1)
    with pytest.raises(SimulationError) as err:
        simulate(g, parse_drift("x * x"), UNIT, PointMass(10.0), np.linspace(0, 12, 13), 8, seed=5)
    assert err.value.vertex == 1
    assert err.value.time > 0


def test_history_drift_requires_substeps_one():
    g = complete_graph(1)
    with pytest.raises(ValueError):
        simulate(g, parse_drift("lag(x, 0.5)"), UNIT, PointMass(0.0), [0.0, 1.0], 10, seed=1, substeps=2)


def test_driftless_variance_and_independence():
    g = path_graph(4)
    ens = simulate_driftless(g, UNIT, NormalInitial(0, 1), [0.0, 0.5, 1.0], 20_000, seed=9)
    assert ens.measure == "P_star"
    x = ens.at_time(1.0)[:, :, 0]
    for col in x.T:
        # initial variance 1 plus Brownian variance t
        assert abs(col.var() - 2.0) < 3 * 2.0 * np.sqrt(2 / 20_000)
    corr = np.corrcoef(x, rowvar=False)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.abs(off).max() < 3 / np.sqrt(20_000)


def test_girsanov_zero_drift_gives_unit_weights():
    g = path_graph(3)
    ens = simulate_driftless(g, UNIT, PointMass(0.0), np.linspace(0, 1, 5), 50, seed=2)
    w = girsanov_weights(ens, None, UNIT)
    np.testing.assert_array_equal(w.weights, np.ones(50))


def test_girsanov_weights_have_mean_one():
    g = path_graph(3)
    ens = simulate_driftless(g, UNIT, PointMass(0.0), np.linspace(0, 1, 33), 20_000, seed=13)
    w = girsanov_weights(ens, P5_DRIFT, UNIT).weights
    assert w.min() > 0
    s = w.std(ddof=1) / np.sqrt(w.size)
    assert abs(w.mean() - 1.0) < 3 * s


def test_girsanov_reweighting_matches_direct_simulation():
    g = path_graph(3)
    drift = parse_drift("1 - x + 0.3 * nbr_sum(y)")
    grid = np.linspace(0, 0.5, 17)
    n = 40_000
    star = simulate_driftless(g, UNIT, PointMass(0.0), grid, n, seed=21)
    w = girsanov_weights(star, drift, UNIT).weights
    f_star = star.at_time(0.5)[:, 0, 0]
    weighted = w * f_star
    direct = simulate(g, drift, UNIT, PointMass(0.0), grid, n, seed=22).at_time(0.5)[:, 0, 0]
    se = np.sqrt(weighted.var(ddof=1) / n + direct.var(ddof=1) / n)
    assert abs(weighted.mean() - direct.mean()) < 3 * se


def test_girsanov_tag_and_scheme_checks():
    g = path_graph(3)
    p_ens = simulate(g, None, UNIT, PointMass(0.0), [0.0, 1.0], 10, seed=1)
    with pytest.raises(ValueError):
        girsanov_weights(p_ens, P5_DRIFT, UNIT)
    coarse = simulate_driftless(g, UNIT, PointMass(0.0), [0.0, 1.0], 10, seed=1, substeps=4)
    with pytest.raises(ValueError):
        girsanov_weights(coarse, P5_DRIFT, UNIT)


def random_graph(rng, n, p=0.4):
    labels = list(range(1, n + 1))
    edges = [(u, v) for i, u in enumerate(labels) for v in labels[i + 1 :] if rng.random() < p]
    return Graph(labels, edges)


def test_girsanov_factor_locality_is_bitwise():
    rng = np.random.default_rng(31)
    drift = parse_drift("nbr_avg(y) - x")
    diff = TanhDiagonalDiffusion([1.0], [0.4])
    for _ in range(3):
        g = random_graph(rng, int(rng.integers(4, 9)))
        ens = simulate_driftless(g, diff, NormalInitial(0, 1), np.linspace(0, 1, 9), 200, seed=6)
        full = girsanov_weights(ens, drift, diff)
        for v in g.vertices:
            local = girsanov_weights(ens.restrict({v, *g.neighbors(v)}), drift, diff)
            assert np.array_equal(full.m[v], local.m[v])
            assert np.array_equal(full.quadratic_variation[v], local.quadratic_variation[v])


def test_truncation_covering_the_graph_reproduces_full_simulation():
    g = path_graph(9, root=5)
    grid = np.linspace(0, 1, 9)
    full = simulate(g, P5_DRIFT, UNIT, PointMass(0.0), grid, 300, seed=17)
    trunc = simulate_truncated(g, 5, 8, P5_DRIFT, UNIT, PointMass(0.0), grid, 300, seed=17)
    assert trunc.measure == "P_n(8)"
    assert trunc.graph.vertices == full.graph.vertices
    assert trunc.graph.edge_set() == full.graph.edge_set()
    assert np.array_equal(trunc.values, full.values)


def test_truncated_measure_tag_and_shell():
    line = z_line()
    ens = simulate_truncated(line, None, 4, P5_DRIFT, UNIT, PointMass(0.0), [0.0, 0.5], 50, seed=1)
    assert ens.measure == "P_n(4)"
    assert set(ens.graph.vertices) == set(range(-4, 5))
    assert ens.graph.has_edge(-4, 3)  # shell completed to a clique


def test_truncation_convergence_zero_drift_indistinguishable():
    table = truncation_convergence(
        z_line(), None, UNIT, PointMass(0.0), [-1, 0, 1], 0.5, [4, 6], 3000, seed=8, steps=16
    )
    rows = list(table)
    assert [r.n for r in rows] == [4, 6]
    for row in rows:
        # common random numbers: window paths coincide bitwise without drift
        assert row.ks_max == 0.0
        assert row.energy_distance <= 1e-12
        assert row.replicas == 3000
    csv = table.to_csv()
    assert csv.splitlines()[0] == "n,energy_distance,ks_max,replicas"
    assert len(csv.splitlines()) == 3


def test_truncation_convergence_window_validation():
    with pytest.raises(ValueError):
        truncation_convergence(z_line(), None, UNIT, PointMass(0.0), [5], 0.5, [4, 6], 100, seed=1)


def test_truncation_convergence_distance_decreases_with_level():
    table = truncation_convergence(
        z_line(), P5_DRIFT, UNIT, PointMass(0.0), [-1, 0, 1], 1.0, [4, 6, 8], 6000, seed=14, steps=32
    )
    rows = {r.n: r.energy_distance for r in table}
    assert rows[4] > rows[6] > rows[8]
    assert table.monotone_decreasing


def test_entropy_bound_zero_and_constant_drift():
    g = complete_graph(1)
    grid = np.linspace(0, 1, 17)
    ens = simulate(g, None, UNIT, PointMass(0.0), grid, 100, seed=4)
    assert entropy_bound_estimate(ens, None, UNIT, [1], 1.0) == 0.0
    ens = simulate(g, parse_drift("2"), UNIT, PointMass(0.0), grid, 100, seed=4)
    est = entropy_bound_estimate(ens, parse_drift("2"), UNIT, [1], 1.0)
    assert est == pytest.approx(0.5 * 4.0 * 1.0, rel=1e-12)


def test_entropy_bound_stability_under_replica_doubling():
    g = path_graph(5)
    grid = np.linspace(0, 1, 33)
    vals = []
    for n in (2000, 4000):
        ens = simulate(g, P5_DRIFT, UNIT, PointMass(0.0), grid, n, seed=19)
        vals.append(entropy_bound_estimate(ens, P5_DRIFT, UNIT, [3], 1.0))
    assert vals[1] > 0
    assert abs(vals[0] - vals[1]) / vals[1] < 0.05


def test_entropy_bound_vertex_handling():
    g = path_graph(3)
    grid = [0.0, 0.5, 1.0]
    ens = simulate(g, P5_DRIFT, UNIT, PointMass(0.0), grid, 50, seed=2)
    with pytest.raises(ValueError):
        entropy_bound_estimate(ens, P5_DRIFT, UNIT, [9], 1.0)
    line = z_line()
    tens = simulate_truncated(line, None, 4, P5_DRIFT, UNIT, PointMass(0.0), grid, 50, seed=2)
    # vertices beyond the truncation are skipped, not an error
    a = entropy_bound_estimate(tens, P5_DRIFT, UNIT, [0, 99], 1.0)
    b = entropy_bound_estimate(tens, P5_DRIFT, UNIT, [0], 1.0)
    assert a == b
    with pytest.raises(ValueError):
        entropy_bound_estimate(ens, P5_DRIFT, UNIT, [1], 0.3)  # not a grid time


def test_save_load_round_trip(tmp_path):
    g = grid_graph(2, 2)
    diff = TanhDiagonalDiffusion([1.0], [0.3])
    ens = simulate(g, parse_drift("nbr_avg(y) - x"), diff, NormalInitial(0, 1), [0.0, 0.5, 1.0], 40, seed=23)
    p = tmp_path / "ens.bin"
    save_ensemble(p, ens)
    back = load_ensemble(p)
    assert np.array_equal(back.values, ens.values)
    np.testing.assert_array_equal(back.grid, ens.grid)
    assert back.labels == ens.labels  # tuple labels survive
    assert back.graph.edge_set() == ens.graph.edge_set()
    assert back.measure == ens.measure
    assert back.scheme == ens.scheme
    assert back.seed == ens.seed

    bad = tmp_path / "junk.bin"
    bad.write_bytes(b"not an ensemble")
    with pytest.raises(ValueError):
        load_ensemble(bad)


def test_summary_csv_shape():
    g = path_graph(2)
    ens = simulate_driftless(g, UNIT, PointMass(1.5), [0.0, 1.0], 30, seed=3)
    lines = ensemble_summary_csv(ens).strip().splitlines()
    assert lines[0] == "vertex,time,component,mean,std"
    assert len(lines) == 1 + 2 * 2
    first = lines[1].split(",")
    assert first[0] == "1" and float(first[3]) == 1.5


def test_energy_distance_separates_and_vanishes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1500, 2))
    y = rng.normal(size=(1500, 2))
    z = rng.normal(loc=1.0, size=(1500, 2))
    near = energy_distance(x, y)
    far = energy_distance(x, z)
    assert abs(near) < 0.02
    assert far > 0.2


def dcor_stat(a, b):
    def centered(m):
        return m - m.mean(0) - m.mean(1)[:, None] + m.mean()

    from scipy.spatial.distance import squareform, pdist

    da = centered(squareform(pdist(a)))
    db = centered(squareform(pdist(b)))
    return (da * db).mean()


def test_product_structure_under_reference_measure():
    g = path_graph(4)
    ens = simulate_driftless(g, UNIT, NormalInitial(0, 1), [0.0, 0.5, 1.0], 1200, seed=29)
    x = ens.at_time(1.0)[:, :2, 0]
    y = ens.at_time(1.0)[:, 2:, 0]
    obs = dcor_stat(x, y)
    rng = np.random.default_rng(1)
    null = []
    for _ in range(200):
        perm = rng.permutation(len(y))
        null.append(dcor_stat(x, y[perm]))
    # dependence statistic sits inside the permutation null
    assert obs < np.quantile(null, 0.99)
