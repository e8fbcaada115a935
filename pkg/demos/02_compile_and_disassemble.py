"""Compile a graph under a per-core budget and inspect the emitted program.

The compiler cuts feature maps into fragments (channels first, then Y, then
X), places them on the core mesh, and emits one 64-bit axon per connected
fragment pair plus one kernel descriptor per (population, source channel).
The disassembler prints every descriptor field by field.
"""

import numpy as np

from axonflow import (FeatureMap, Graph, LayerDef, compile_graph,
                      disassemble, lower)

rng = np.random.default_rng(1)

g = Graph(name="compile-demo")
g.add_fm(FeatureMap("frame", 2, 16, 16, role="input"))
g.add_fm(FeatureMap("feat", 4, 16, 16, role="output"))
g.add_layer(LayerDef(
    "conv", ["frame"], "feat", kernel=(3, 3), padding=(1, 1, 1, 1),
    weights=rng.integers(-30, 31, (4, 2, 3, 3)),
    biases=rng.integers(-5, 6, 4), activation="relu"))

# force an X cut on the destination to show fragment-relative offsets
prog = compile_graph(lower(g), force_cuts={"feat": (1, 2, 1)})

print(f"fragments: " + ", ".join(
    f"{fm}={len(grid.fragments)}" for fm, grid in prog.grids.items()))
print(f"axons: {prog.axon_count()}, kernel descriptors: {prog.kd_count()}")
for pop in prog.populations:
    for ax in pop.axons:
        print(f"  {pop.fm}@{pop.frag.index} -> pop {ax.pop_id} "
              f"on core delta ({ax.core_dx},{ax.core_dy}): "
              f"x_off {ax.x_off}, y_off {ax.y_off}, c_off {ax.c_off}")

print("\ndisassembly:")
print(disassemble(prog))
