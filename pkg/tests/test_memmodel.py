"""Footprint models: closed-form examples, scheme properties, comparisons."""

import numpy as np
import pytest

from axonflow.compiler import compile_graph
from axonflow.errors import MismatchedGraphs
from axonflow.graph import FeatureMap, Graph, LayerDef
from axonflow.lowering import lower
from axonflow.memmodel import (
    compare,
    mem_flat_lut,
    mem_hier_lut,
    mem_proposed,
    render_table,
    reports_to_csv,
    reports_to_json,
)


def _dense_graph(n_in=100, n_out=50, name="d"):
    g = Graph(name=name)
    g.add_fm(FeatureMap("a", n_in, 1, 1, role="input"))
    g.add_fm(FeatureMap("b", n_out, 1, 1, role="output"))
    g.add_layer(LayerDef("dense", ["a"], "b",
                         weights=np.ones((n_out, n_in, 1, 1), dtype=int),
                         biases=np.zeros(n_out, dtype=int)))
    return g


def test_proposed_dense_descriptor_bytes():
    g = _dense_graph(10, 5)
    low = lower(g)
    prog = compile_graph(low)
    rep = mem_proposed(prog)
    # 1 axon + 10 kernel descriptors + 2 population descriptors, 8 B each
    assert rep.totals["connectivity"] == 104
    assert rep.extra["axons"] == 1
    assert rep.extra["kernel_descriptors"] == 10
    assert rep.extra["population_descriptors"] == 2


def test_flat_lut_dense_formula():
    low = lower(_dense_graph())
    rep = mem_flat_lut(low)
    # 5000 synapses at 23 bits each
    assert rep.totals["connectivity"] == -(-5000 * 23 // 8)
    assert rep.extra["synapses"] == 5000
    assert rep.totals["neurons"] == 150 * 2
    # parameters: one byte per synapse plus one bias byte per output channel
    assert rep.totals["parameters"] == 5000 + 50


def test_hier_lut_dense_formula():
    low = lower(_dense_graph())
    rep = mem_hier_lut(low, m=1024)
    # 100 source entries (fan-out 50 <= m) at 23 b, 5000 dest entries at 15 b
    want = -(-100 * 23 // 8) + -(-5000 * 15 // 8)
    assert rep.totals["connectivity"] == want


def test_hier_source_entries_split_by_m():
    low = lower(_dense_graph(100, 50))
    r_small = mem_hier_lut(low, m=10)
    r_big = mem_hier_lut(low, m=1024)
    # fan-out 50 over 10-neuron cores: 5 entries per source neuron
    diff = r_small.totals["connectivity"] - r_big.totals["connectivity"]
    assert diff == -(-100 * 5 * 23 // 8) - (-(-100 * 23 // 8))


def test_empty_graph_reports_zero():
    g = Graph(name="empty")
    low = lower(g)
    assert mem_flat_lut(low).totals["total"] == 0
    prog = compile_graph(low)
    assert mem_proposed(prog).totals["total"] == 0


def test_proposed_matches_core_occupancy():
    rng = np.random.default_rng(7)
    g = Graph(name="occ")
    g.add_fm(FeatureMap("a", 4, 16, 16, role="input"))
    g.add_fm(FeatureMap("b", 8, 16, 16, role="output"))
    g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                         padding=(1, 1, 1, 1),
                         weights=rng.integers(-9, 10, (8, 4, 3, 3)),
                         biases=rng.integers(-5, 6, 8)))
    prog = compile_graph(g, force_cuts={"b": (2, 1, 1)})
    rep = mem_proposed(prog)
    assert rep.per_core is not None
    assert sum(rep.per_core.values()) == rep.totals["total"]


def test_neuron_count_independence_of_connectivity():
    # doubling the spatial extent leaves descriptor bytes unchanged while
    # per-synapse schemes grow superlinearly
    def three_layer(scale, name):
        rng = np.random.default_rng(9)
        g = Graph(name=name)
        w = 12 * scale
        g.add_fm(FeatureMap("a", 2, w, w, role="input"))
        g.add_fm(FeatureMap("b", 3, w, w))
        g.add_fm(FeatureMap("c", 3, w, w))
        g.add_fm(FeatureMap("d", 3, w // 2, w // 2, role="output"))
        g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                             padding=(1, 1, 1, 1),
                             weights=rng.integers(-9, 10, (3, 2, 3, 3)),
                             biases=np.zeros(3, dtype=int)))
        g.add_layer(LayerDef("depthwise_conv", ["b"], "c", kernel=(3, 3),
                             padding=(1, 1, 1, 1),
                             weights=rng.integers(-9, 10, (3, 1, 3, 3)),
                             biases=np.zeros(3, dtype=int)))
        g.add_layer(LayerDef("avg_pool", ["c"], "d", kernel=(2, 2), stride=2))
        return g

    small, big = three_layer(1, "s"), three_layer(2, "b")
    conn = {}
    flat = {}
    for tag, g in (("s", small), ("b", big)):
        low = lower(g)
        prog = compile_graph(low, do_place=False, budget=1 << 26)
        assert all(len(gr.fragments) == 1 for gr in prog.grids.values())
        conn[tag] = mem_proposed(prog).totals["connectivity"]
        flat[tag] = mem_flat_lut(low).totals["connectivity"]
    assert conn["s"] == conn["b"]
    assert flat["b"] >= 3.5 * flat["s"]


def test_xy_cut_monotonicity_of_parameters():
    g = Graph(name="mono")
    rng = np.random.default_rng(11)
    g.add_fm(FeatureMap("a", 2, 16, 16, role="input"))
    g.add_fm(FeatureMap("b", 4, 16, 16, role="output"))
    g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                         padding=(1, 1, 1, 1),
                         weights=rng.integers(-9, 10, (4, 2, 3, 3)),
                         biases=np.zeros(4, dtype=int)))
    low = lower(g)
    base = mem_proposed(compile_graph(low)).totals["parameters"]
    xcut = mem_proposed(compile_graph(
        low, force_cuts={"b": (1, 2, 1)})).totals["parameters"]
    ycut = mem_proposed(compile_graph(
        low, force_cuts={"b": (1, 2, 2)})).totals["parameters"]
    assert base <= xcut <= ycut
    ccut = mem_proposed(compile_graph(
        low, force_cuts={"b": (2, 1, 1)})).totals["parameters"]
    assert ccut <= base + 64  # channel cuts only add side-table padding


def test_scheme_ordering_property():
    g = _dense_graph(64, 32, name="ord")
    low = lower(g)
    prog = compile_graph(low)
    prop = mem_proposed(prog).totals
    flat = mem_flat_lut(low).totals
    assert prop["connectivity"] < prop["parameters"] < flat["connectivity"]


def test_compare_ratios_and_mismatch():
    g = _dense_graph(name="cmp")
    low = lower(g)
    prog = compile_graph(low)
    rp = mem_proposed(prog)
    rf = mem_flat_lut(low)
    ratios = compare([rp, rf])
    assert ratios["ratios"]["flat_lut"]["connectivity"] > 1
    same = compare([rf, rf])
    assert all(v == 1 for v in same["ratios"]["flat_lut"].values())
    other = mem_flat_lut(lower(_dense_graph(12, 3, name="other")))
    with pytest.raises(MismatchedGraphs):
        compare([rp, other])


def test_render_and_exports():
    g = _dense_graph(name="fmt")
    low = lower(g)
    reports = [mem_proposed(compile_graph(low)), mem_flat_lut(low),
               mem_hier_lut(low)]
    ratios = compare(reports)
    table = render_table(reports, ratios)
    assert "proposed" in table and "flat_lut" in table
    csv_text = reports_to_csv(reports)
    assert csv_text.count("connectivity") == 3
    doc = reports_to_json(reports, ratios)
    assert '"comparison"' in doc


def test_flat_lut_resnet_tail_layer_exceeds_110mb():
    # the often-quoted illustration: one 512x7x7 same-padded 3x3 convolution
    # already needs on the order of a hundred megabytes of flat-LUT entries
    rng = np.random.default_rng(13)
    g = Graph(name="tail")
    g.add_fm(FeatureMap("a", 512, 7, 7, role="input"))
    g.add_fm(FeatureMap("b", 512, 7, 7, role="output"))
    g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                         padding=(1, 1, 1, 1),
                         weights=rng.integers(-127, 128, (512, 512, 3, 3)),
                         biases=np.zeros(512, dtype=int)))
    rep = mem_flat_lut(lower(g))
    assert rep.totals["connectivity"] >= 110e6 * 0.85


def test_hier_lut_resnet50_total_matches_published():
    from axonflow import zoo
    low = lower(zoo.build("resnet50", seed=0))
    total = mem_hier_lut(low).totals["total"]
    assert abs(total - 10.26e9) / 10.26e9 <= 0.20
