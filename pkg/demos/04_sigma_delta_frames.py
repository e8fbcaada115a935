"""Sigma-delta inference over a frame sequence.

Neurons keep persistent accumulators and exchange output deltas instead of
absolute values.  Per-frame results are bit-identical to standard mode, but
temporally correlated inputs need far fewer events; a repeated frame needs
none at all.
"""

import numpy as np

from axonflow import compile_graph, lower, run_sequence, zoo

graph = zoo.build_truncated("mobilenet_v1", max_layers=6, max_channels=8,
                            max_hw=32, seed=1)
lowered = lower(graph)

rng = np.random.default_rng(1)
input_fm = next(f for f in graph.feature_maps.values() if f.role == "input")
base = rng.integers(-60, 61, input_fm.shape)
frames = [{input_fm.id: base}]
for _ in range(3):
    nxt = frames[-1][input_fm.id].copy()
    mask = rng.random(nxt.shape) < 0.05  # 5% of pixels change per frame
    nxt[mask] = rng.integers(-60, 61, int(mask.sum()))
    frames.append({input_fm.id: nxt})
frames.append({input_fm.id: frames[-1][input_fm.id].copy()})  # repeat

std = compile_graph(lowered, mesh=(4, 4), mode="standard")
sd = compile_graph(lowered, mesh=(4, 4), mode="sigma_delta")
out_std, per_std, _ = run_sequence(std, frames)
out_sd, per_sd, _ = run_sequence(sd, frames)

print(f"{'frame':>5} {'standard events':>16} {'sigma-delta events':>19} "
      f"{'outputs equal':>14}")
for t, (a, b) in enumerate(zip(out_std, out_sd)):
    equal = all(np.array_equal(a[k], b[k]) for k in a)
    print(f"{t:>5} {per_std[t]['events_sent']:>16} "
          f"{per_sd[t]['events_sent']:>19} {str(equal):>14}")
