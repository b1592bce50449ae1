"""Build an interlaced polynomial lattice rule and look at what it gives.

Constructs a rule for the default diffusion problem, checks the dual-net
property on a small case, then compares the figure of merit of the CBC rule
with a few random generating vectors.

    python demos/01_rule_and_points.py
"""

import numpy as np

from hoqmc import AffineDiffusionProblem, SPODWeightSpec, cbc_construct, cbc_criterion, generate_points
from hoqmc.pde import beta_sequence
from hoqmc.rules import InterlacedRuleSpec, format_rule_spec

problem = AffineDiffusionProblem()
b, m, alpha, s = 2, 8, 3, 8
weights = SPODWeightSpec(alpha, tuple(beta_sequence(problem, s)))

spec = cbc_construct(b, m, alpha, s, weights)
print(format_rule_spec(spec))
pts = generate_points(spec)
print("first points (shifted to [-1/2, 1/2)):")
print(np.round(pts.centered()[:4, :4], 6))

# the CBC rule against random generating vectors with the same modulus
E_cbc = cbc_criterion(spec, weights)
rng = np.random.default_rng(1)
E_rand = []
for _ in range(5):
    gen = (1,) + tuple(int(g) for g in rng.integers(1, b**m, size=alpha * s - 1))
    E_rand.append(cbc_criterion(InterlacedRuleSpec(b, m, alpha, s, spec.modulus, gen), weights))
print(f"figure of merit: CBC {E_cbc:.3e}, random gens {min(E_rand):.3e} .. {max(E_rand):.3e}")

# every coordinate is a digital sum of the per-digit columns, so the point
# set is closed under digitwise xor (the group structure behind the dual net)
X = pts.coords
rows = {tuple(r) for r in X.tolist()}
i, j = 3, 77
assert tuple((X[i] ^ X[j]).tolist()) in rows
print("closed under digitwise addition: yes")
