"""Build a small CNN graph, lower it, and evaluate the dense reference.

Everything downstream (event-driven execution, footprint analysis) is checked
against the dense semantics shown here, so this is the place to get a feel
for the integer arithmetic contract: int8 activations and weights, wide
accumulation, exact divisor-then-activation quantization.
"""

import numpy as np

from axonflow import FeatureMap, Graph, LayerDef, dense_oracle, lower

rng = np.random.default_rng(0)

g = Graph(name="demo")
g.add_fm(FeatureMap("frame", 3, 16, 16, role="input"))
g.add_fm(FeatureMap("feat", 8, 16, 16))
g.add_fm(FeatureMap("pooled", 8, 8, 8, role="output"))

g.add_layer(LayerDef(
    "conv", ["frame"], "feat", kernel=(3, 3), padding=(1, 1, 1, 1),
    weights=rng.integers(-20, 21, (8, 3, 3, 3)),
    biases=rng.integers(-5, 6, 8), activation="relu"))
g.add_layer(LayerDef("avg_pool", ["feat"], "pooled", kernel=(2, 2), stride=2))

lowered = lower(g)
print("lowered connections:")
for spec in lowered.specs:
    print(f"  {spec.src} -> {spec.dst}: kernel {spec.kw}x{spec.kh}, "
          f"channel map {spec.channel_map}, stride log {spec.sl}, "
          f"update {spec.update_rule}")
for fm_id, attrs in lowered.dst_attrs.items():
    if attrs.divisor != 1:
        print(f"  {fm_id}: divisor {attrs.divisor} applied at fire time")

x = rng.integers(-80, 81, (3, 16, 16))
out = dense_oracle(lowered, {"frame": x})
print("\noutput shape:", out["pooled"].shape)
print("one output channel:\n", out["pooled"][0])
