"""Tour of the configuration space: counting, encoding, neighborhoods.

Run with: python3 demos/01_search_space.py
"""

from peftbo import space

# The standard 12-layer/768-wide space: one insertion bit per layer plus
# three module sizes on an 11-level binary-logarithmic grid.
spec = space.bert_base_space()
print("size grid:", spec.size_grid)
print(f"total configurations: {space.cardinality(spec):,}")

# A known hand-pickable point: five active layers, a slim serial bottleneck,
# a wider parallel bottleneck, and a single prefix row.
config = space.Configuration.from_dict(
    {"layers": [3, 4, 8, 9, 10], "d_sa": 12, "d_pa": 96, "l_pt": 1}, spec.num_layers
)
count = space.param_count(spec, config)
frac = space.param_fraction(spec, config)
print(f"\nexample config: {config.to_dict()}")
print(f"trainable parameters: {count:,} = {frac:.2%} of the base model")

# Configurations encode to unit-interval vectors for the surrogate:
coords = space.encode(spec, config)
print("\nencoded point:", coords)
assert space.decode(spec, coords) == config  # exact round trip

# Local-search moves are single bit flips or single grid steps:
moves = space.neighbors(spec, config)
print(f"neighbors at one move: {len(moves)}")

# The 24-layer/1024-wide preset scales the same construction up:
large = space.roberta_large_space()
print(f"\n24-layer space: {space.cardinality(large):,} configurations")
