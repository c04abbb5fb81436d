"""Change of measure on path space.

Simulate the interacting chain directly, then recover the same expectations
from independent driftless paths reweighted by their likelihood ratio.  The
weights average to one by construction, and both Monte Carlo routes agree
with the closed form.
"""

import numpy as np

from netdiff import (
    ConstantDiffusion,
    PointMass,
    build_linear_system,
    covariance_at,
    girsanov_weights,
    parse_drift,
    partial_correlation_ci_test,
    path_graph,
    simulate,
    simulate_driftless,
)

UNIT = ConstantDiffusion([[1.0]])
g = path_graph(3)
drift = parse_drift("nbr_sum(y) - 2*x")
grid = np.linspace(0.0, 1.0, 33)
n = 40_000

direct = simulate(g, drift, UNIT, PointMass(0.0), grid, n, seed=1)
x2 = direct.at_time(1.0)[:, 1, 0]
mc_direct = (x2**2).mean()

ref = simulate_driftless(g, UNIT, PointMass(0.0), grid, n, seed=2)
w = girsanov_weights(ref, drift, UNIT)
se = w.weights.std(ddof=1) / np.sqrt(n)
print(f"weights: mean = {w.weights.mean():.4f} (se {se:.4f}), exactly 1 in law")

y2 = ref.at_time(1.0)[:, 1, 0]
mc_weighted = (w.weights * y2**2).mean()
exact = covariance_at(build_linear_system(g, -2.0), 1.0).sigma[1, 1]
print()
print(f"E[X_2(1)^2]  direct simulation: {mc_direct:.4f}")
print(f"             reweighted paths:  {mc_weighted:.4f}")
print(f"             closed form:       {exact:.4f}")

print()
print("conditional-independence tests on the simulated paths (5-chain):")
g5 = path_graph(5)
ens = simulate(g5, drift, UNIT, PointMass(0.0), np.linspace(0.0, 1.0, 17), n, seed=3)
# conditioning must cover the separator's whole path, so the default
# feature grid (every stored time) is the right one here
for a, s, b in [((1,), (2, 3), (4, 5)), ((1,), (), (2,))]:
    rep = partial_correlation_ci_test(ens, a, s, b, feature_grid=ens.grid[1:])
    s_label = "paths of " + ",".join(map(str, s)) if s else "nothing"
    print(f"  {a} vs {b} given {s_label}: {rep.verdict} (p = {rep.p_value:.3g})")
