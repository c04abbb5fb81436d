"""Positive pairwise models: the discrete side of the story.

Every strictly positive model with singleton and edge factors is a
second-order Markov field, usually without being a first-order one.  The
same locality shows up in conditional kernels and in projections onto
truncations.
"""

import numpy as np

from netdiff import (
    FactorModel,
    Graph,
    check_mrf_bruteforce,
    conditional_specification,
    factorize_positive_2mrf,
    grid_graph,
    joint_table,
    path_graph,
    project_to_truncation,
    projection_counterexample_search,
    random_factor_model,
    total_variation,
)

rng = np.random.default_rng(0)
g = grid_graph(2, 3)
m = random_factor_model(g, 2, rng)
jt = joint_table(m)
chk1 = check_mrf_bruteforce(jt, g, 1)
chk2 = check_mrf_bruteforce(jt, g, 2)
print(f"random pairwise model on the 2x3 grid:")
print(f"  worst order-1 violation: {chk1.max_violation:.2e}")
print(f"  worst order-2 violation: {chk2.max_violation:.2e}")

back = factorize_positive_2mrf(jt, g)
print(f"  factorization round trip (total variation): {total_variation(joint_table(back), jt):.2e}")

print()
m9 = random_factor_model(path_graph(9, root=5), 2, np.random.default_rng(3))
proj = project_to_truncation(m9, 4)
tv = total_variation(joint_table(proj), joint_table(m9))
print(f"projection of the 9-chain onto the level-4 ball around vertex 5:")
print(f"  the ball is everything, so the projection is exact: tv = {tv:.1e}")

witness = projection_counterexample_search(
    grid_graph(3, 3), ((1, 0), (1, 1), (1, 2)), 200, order=1, seed=0, threshold=1e-3
)
print()
print("marginal of a 3x3-grid model onto its middle row, order-1 check:")
if witness is None:
    print("  no witness found")
else:
    print(f"  trial {witness.trial} violates by {witness.check.max_violation:.3f}")
    print("  marginals of second-order fields stay second order, not first order")

print()
rng = np.random.default_rng(41)
g7 = path_graph(7)
h7 = Graph([1, 2, 3, 4, 5, 8], [(1, 2), (2, 3), (3, 4), (4, 5), (5, 8)])
shared = {k: np.exp(rng.normal(size=(2,) * len(k))) for k in [(1,), (1, 2), (1, 3), (1, 2, 3)]}
mg = FactorModel(g7, 2, {**shared, (3, 4): np.exp(rng.normal(size=(2, 2))), (5, 6): np.exp(rng.normal(size=(2, 2)))})
mh = FactorModel(h7, 2, {**shared, (4, 5): np.exp(rng.normal(size=(2, 2))), (5, 8): np.exp(rng.normal(size=(2, 2)))})
ka = conditional_specification(mg, (1,))
kb = conditional_specification(mh, (1,))
print("two different graphs sharing the factors around vertex 1:")
print(f"  conditional kernels of vertex 1 given its 2-boundary agree to {np.abs(ka.table - kb.table).max():.1e}")
