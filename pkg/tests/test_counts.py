"""Exact neuron and synapse counting against brute-force pair enumeration."""

import numpy as np

from axonflow.counts import count_neurons, count_synapses
from axonflow.graph import FeatureMap, Graph, LayerDef
from axonflow.lowering import lower
from axonflow import zoo


def brute_force_synapses(graph, spec):
    """Enumerate (source neuron, destination neuron) pairs that the kernel
    geometry connects, excluding padded reads and stride-removed positions."""
    src = graph.fm(spec.src)
    dst = graph.fm(spec.dst)
    step, up = 1 << spec.sl, 1 << spec.us
    count = 0
    for cd in range(dst.depth):
        if spec.channel_map == "depthwise":
            w_lo, w_hi = spec.dst_base, spec.dst_base + spec.d_dst
            if not w_lo <= cd < w_hi:
                continue
            src_channels = [cd - spec.dst_base + spec.src_base]
        else:
            if not spec.dst_base <= cd < spec.dst_base + spec.d_dst:
                continue
            src_channels = range(spec.src_base, spec.src_base + spec.d_src)
        n_ch = len(list(src_channels))
        for x in range(dst.width):
            for y in range(dst.height):
                taps = 0
                for j in range(spec.kw):
                    px = x * step + j - spec.xp
                    if px < 0 or px >= src.width * up or px % up:
                        continue
                    for k in range(spec.kh):
                        py = y * step + k - spec.yp
                        if py < 0 or py >= src.height * up or py % up:
                            continue
                        taps += 1
                count += taps * n_ch
    return count


def test_dense_synapse_product():
    g = Graph()
    g.add_fm(FeatureMap("a", 100, 1, 1, role="input"))
    g.add_fm(FeatureMap("b", 50, 1, 1, role="output"))
    g.add_layer(LayerDef("dense", ["a"], "b",
                         weights=np.ones((50, 100, 1, 1), dtype=int),
                         biases=np.zeros(50, dtype=int)))
    low = lower(g)
    assert count_synapses(g, low.specs[0]) == 5000


def test_same_padded_3x3_on_3x3():
    g = Graph()
    g.add_fm(FeatureMap("a", 1, 3, 3, role="input"))
    g.add_fm(FeatureMap("b", 1, 3, 3, role="output"))
    g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                         padding=(1, 1, 1, 1),
                         weights=np.ones((1, 1, 3, 3), dtype=int),
                         biases=np.zeros(1, dtype=int)))
    low = lower(g)
    # 4 corners * 4 + 4 edges * 6 + 1 center * 9
    assert count_synapses(g, low.specs[0]) == 49


def test_counts_match_brute_force_enumeration():
    rng = np.random.default_rng(30)
    for i in range(80):
        d, w, h = rng.integers(1, 4), rng.integers(2, 9), rng.integers(2, 9)
        k = int(rng.integers(1, min(5, w, h) + 1))
        stride = int(rng.choice((1, 2)))
        up = int(rng.choice((1, 2)))
        pads = tuple(int(p) for p in rng.integers(0, 3, 4))
        w1 = w * up + pads[0] + pads[2] - k + 1
        h1 = h * up + pads[1] + pads[3] - k + 1
        if w1 < 1 or h1 < 1:
            continue
        dw = bool(rng.integers(0, 2))
        g = Graph()
        g.add_fm(FeatureMap("a", d, w, h, role="input"))
        dd = d if dw else int(rng.integers(1, 4))
        g.add_fm(FeatureMap("b", dd, -(-w1 // stride), -(-h1 // stride),
                            role="output"))
        if dw:
            layer = LayerDef("depthwise_conv", ["a"], "b", kernel=(k, k),
                             padding=pads, stride=stride, upsample=up,
                             weights=np.ones((d, 1, k, k), dtype=int))
        else:
            layer = LayerDef("conv", ["a"], "b", kernel=(k, k), padding=pads,
                             stride=stride, upsample=up,
                             weights=np.ones((dd, d, k, k), dtype=int),
                             biases=np.zeros(dd, dtype=int))
        g.add_layer(layer)
        spec = lower(g).specs[0]
        assert count_synapses(g, spec) == brute_force_synapses(g, spec), i


def test_count_neurons():
    g = Graph()
    g.add_fm(FeatureMap("a", 3, 4, 5, role="input"))
    g.add_fm(FeatureMap("b", 2, 2, 2, role="output"))
    per_fm, total = count_neurons(g)
    assert per_fm == {"a": 60, "b": 8}
    assert total == 68


def test_pilotnet_totals_against_published_figures():
    g = zoo.build("pilotnet", seed=0)
    low = lower(g)
    _, neurons = count_neurons(g)
    synapses = sum(count_synapses(g, s) for s in low.specs)
    # synapse total within 20% of the published ~27M figure
    assert abs(synapses - 27e6) / 27e6 < 0.20
    # the published neuron figure carries one significant digit and is not
    # reachable together with the published per-category footprints; the
    # recipe is pinned exactly instead (see the memory regression tests)
    assert neurons == 146_633
    assert 0.1e6 < neurons < 0.24e6
