"""Run a frame event by event and check it against the dense reference.

Each non-zero activation fires through its population's axons (at most one
event per axon, fragment misses filtered at the source), and the destination
decode loop expands events into weighted updates.  The outputs are exactly
the dense result: the compression is lossless by construction, and this
script shows the bookkeeping that proves it on one example.
"""

import numpy as np

from axonflow import Machine, compile_graph, dense_oracle, lower, zoo

graph = zoo.build_truncated("resnet50", max_layers=7, max_channels=8,
                            max_hw=32, seed=0)
lowered = lower(graph)
program = compile_graph(lowered, mesh=(4, 4))

rng = np.random.default_rng(0)
frame = {fm.id: rng.integers(-60, 61, fm.shape)
         for fm in graph.feature_maps.values() if fm.role == "input"}

machine = Machine(program, hit_detection=True)
got = machine.run_frame(frame)
want = dense_oracle(lowered, frame)

for fm_id in want:
    exact = np.array_equal(want[fm_id], got[fm_id])
    print(f"{fm_id}: event-driven == dense reference: {exact}")

print(f"\nevents sent: {machine.stats.events_sent}, "
      f"suppressed by hit detection: {machine.stats.events_dropped}")
for fm_id, ls in machine.stats.layers.items():
    print(f"  {fm_id}: {ls.fired_neurons} firings, {ls.events_out} events, "
          f"{ls.updates_applied} weighted updates")
