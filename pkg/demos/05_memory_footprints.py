"""Reproduce the memory comparison: axon scheme versus LUT baselines.

For each benchmark network, the compiler fragments it under the 256 KiB
per-core budget and the analyzer reports bytes for neurons, connectivity, and
parameters next to the flat-LUT and hierarchical-LUT costs of the same graph.
Connectivity drops from the dominant category to noise; the bracketed factors
are the baseline-over-proposed ratios.
"""

from axonflow import (compare, compile_graph, lower, mem_flat_lut,
                      mem_hier_lut, mem_proposed, render_table, zoo)

for name in ("pilotnet", "mobilenet_v1", "resnet50"):
    graph = zoo.build(name, seed=0)
    lowered = lower(graph)
    program = compile_graph(lowered, do_place=False)
    reports = [mem_proposed(program), mem_flat_lut(lowered),
               mem_hier_lut(lowered)]
    ratios = compare(reports)
    print(f"== {name} ==")
    print(render_table(reports, ratios))
    frags = sum(len(g.fragments) for g in program.grids.values())
    print(f"fragments: {frags}, axons: {program.axon_count()}, "
          f"kernel descriptors: {program.kd_count()}\n")
