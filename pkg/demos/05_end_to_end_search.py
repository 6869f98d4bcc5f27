"""Full search on a small synthetic landscape, compared with random sampling.

Uses a 6-layer space so the demo finishes in about a minute.
Run with: python3 demos/05_end_to_end_search.py
"""

from peftbo import pareto, search, space
from peftbo.objectives import SyntheticBackend, SyntheticLandscapeSpec
from peftbo.pareto import ObjectiveVector as OV

spec = space.SearchSpaceSpec(
    num_layers=6,
    hidden_dim=768,
    size_grid=space.halving_size_grid(768),
    base_param_count=109_482_240,
)
landscape = SyntheticLandscapeSpec.from_seed(6, landscape_seed=7, noise_sd=0.2)
backend = SyntheticBackend(spec, landscape)
print("layer weights (half are near zero by construction):")
print(" ", [round(w, 3) for w in landscape.layer_weights])

cfg = search.RunConfig(
    space=spec,
    backend=backend,
    n_init=20,
    n_total=45,
    fidelity=0.05,
    master_seed=0,
    mc_samples=64,
    restarts=4,
)

front, state = search.run(cfg)
rs_front, rs_state = search.random_search(cfg)

ref = pareto.nadir(
    [OV(o.score, o.cost) for o in state.observations + rs_state.observations]
)
hv = pareto.hypervolume(front.vectors, ref)
hv_rs = pareto.hypervolume(rs_front.vectors, ref)
print(f"\nmodel-guided hypervolume: {hv:.3f}")
print(f"random-search hypervolume: {hv_rs:.3f}")

print("\ndiscovered front (cheapest first):")
for entry in front:
    cfg_dict = entry.config.to_dict()
    print(
        f"  layers {cfg_dict['layers']} sizes "
        f"({cfg_dict['d_sa']},{cfg_dict['d_pa']},{cfg_dict['l_pt']}) "
        f"-> score {entry.vector.score:5.1f} at {entry.vector.cost:.3%}"
    )

print("\nhypervolume trajectory tail (evals, hv):")
for evals, value in state.trajectory[-5:]:
    print(f"  {evals:3d}  {value:.3f}")
