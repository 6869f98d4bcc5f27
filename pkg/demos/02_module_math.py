"""The dense reference math behind the three module families.

Run with: python3 demos/02_module_math.py
"""

import numpy as np

from peftbo import modules, space

rng = np.random.default_rng(0)
hidden = 8
tokens = 4

# Serial and parallel adapters share the bottleneck form:
# max(0, x @ W_down) @ W_up.
w_sa = modules.BottleneckWeights(
    rng.uniform(-0.5, 0.5, (hidden, 3)), rng.uniform(-0.5, 0.5, (3, hidden))
)
w_pa = modules.BottleneckWeights(
    rng.uniform(-0.5, 0.5, (hidden, 2)), rng.uniform(-0.5, 0.5, (2, hidden))
)
x = rng.uniform(-1, 1, (tokens, hidden))
ffn_matrix = rng.uniform(-1, 1, (hidden, hidden))
ffn = lambda z: z @ ffn_matrix

# The composed forward is literally the sum of the serial path on the FFN
# output and the parallel path on the FFN input:
combined = modules.sapa_forward(x, ffn, w_sa, w_pa)
split = modules.serial_forward(ffn(x), w_sa) + modules.parallel_forward(x, w_pa)
print("composed == serial(ffn(x)) + parallel(x):", np.array_equal(combined, split))

# Prefix rows extend attention keys/values while preserving the originals:
prefix = modules.PrefixWeights(
    rng.uniform(-0.5, 0.5, (2, hidden)), rng.uniform(-0.5, 0.5, (2, hidden))
)
k2, v2 = modules.prefix_extend(x, x, prefix)
print("rows after prefixing:", k2.shape[0], "(original", tokens, "+ prefix 2)")

# Instantiating every weight matrix and counting entries reproduces the
# closed-form parameter count exactly:
spec = space.SearchSpaceSpec(4, 8, (0, 1, 2, 4, 8), base_param_count=10_000)
for config in space.random_sample(spec, 42, 3):
    assert modules.count_weights(spec, config) == space.param_count(spec, config)
    print(
        f"config {config.to_dict()}: "
        f"{space.param_count(spec, config)} parameters (count verified)"
    )
