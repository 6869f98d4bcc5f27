"""Dominance, fronts, hypervolume, and the nadir reference point.

Run with: python3 demos/03_pareto_hypervolume.py
"""

import numpy as np

from peftbo import pareto
from peftbo.pareto import ObjectiveVector as OV

rng = np.random.default_rng(1)

# A cloud of (score up, cost down) points:
cloud = [OV(float(s), float(c)) for s, c in rng.uniform(0, 1, (20, 2))]
front = pareto.non_dominated(enumerate(cloud))
print("cloud size:", len(cloud), "-> front size:", len(front))
for entry in front:
    print(f"  score {entry.vector.score:.3f} at cost {entry.vector.cost:.3f}")

# Hypervolume measures the area the front dominates above a reference point.
# Here the reference is the nadir: worst score and worst cost seen.
ref = pareto.nadir(cloud)
hv = pareto.hypervolume([e.vector for e in front], ref)
print(f"\nnadir reference: score {ref.score:.3f}, cost {ref.cost:.3f}")
print(f"hypervolume over nadir: {hv:.4f}")

# Adding a dominated point changes nothing; adding an improving point grows it.
dominated = OV(front.vectors[0].score - 0.1, front.vectors[0].cost + 0.1)
improving = OV(max(v.score for v in cloud) + 0.2, min(v.cost for v in cloud))
print("hv after dominated point:", pareto.hypervolume(list(cloud) + [dominated], ref))
print("hv after improving point:", pareto.hypervolume(list(cloud) + [improving], ref))
