"""Dense reference semantics: hand-checked values, the literal nested-loop
summation, and the implicit-padding equivalence."""

import numpy as np
import pytest

import references as ref
from axonflow.errors import AccumulatorOverflow
from axonflow.graph import FeatureMap, Graph, LayerDef
from axonflow.lowering import lower
from axonflow.oracle import compute_fm, dense_oracle


def _conv_graph(src_shape, dst_shape, weights, biases, pads=(0, 0, 0, 0),
                stride=1, act="identity"):
    g = Graph()
    g.add_fm(FeatureMap("in", *src_shape, role="input"))
    g.add_fm(FeatureMap("out", *dst_shape, role="output"))
    g.add_layer(LayerDef("conv", ["in"], "out",
                         kernel=(weights.shape[3], weights.shape[2]),
                         padding=pads, stride=stride, weights=weights,
                         biases=biases, activation=act))
    return g


def test_ones_kernel_overlap_counts():
    # all-ones 3x3 kernel on an all-ones 3x3 input with same padding:
    # the center sees the full kernel (9), corners see a 2x2 overlap (4)
    g = _conv_graph((1, 3, 3), (1, 3, 3), np.ones((1, 1, 3, 3), dtype=int),
                    np.zeros(1, dtype=int), pads=(1, 1, 1, 1))
    out = dense_oracle(lower(g), {"in": np.ones((1, 3, 3), dtype=int)})["out"]
    assert out[0, 1, 1] == 9
    assert out[0, 0, 0] == out[0, 2, 2] == 4
    assert out[0, 1, 0] == out[0, 0, 1] == 6


def test_identity_kernel_passthrough():
    g = Graph()
    g.add_fm(FeatureMap("in", 3, 5, 5, role="input"))
    g.add_fm(FeatureMap("out", 3, 5, 5, role="output"))
    g.add_layer(LayerDef("depthwise_conv", ["in"], "out", kernel=(1, 1),
                         weights=np.ones((3, 1, 1, 1), dtype=int)))
    x = np.random.default_rng(1).integers(-50, 51, (3, 5, 5))
    out = dense_oracle(lower(g), {"in": x})["out"]
    assert np.array_equal(out, x)


def test_matches_literal_nested_loops():
    # independent loop implementation of the summation, stride-2 case
    rng = np.random.default_rng(2)
    x = rng.integers(-30, 31, (2, 6, 6))
    w = rng.integers(-9, 10, (4, 2, 3, 3))
    b = rng.integers(-5, 6, 4)
    g = _conv_graph((2, 6, 6), (4, 2, 2), w, b, stride=2)
    got = dense_oracle(lower(g), {"in": x})["out"]
    want = ref.finalize(ref.conv_ref(x, w, stride=2), b)
    assert np.array_equal(got, want)


def test_implicit_padding_equals_explicit_prepad():
    rng = np.random.default_rng(3)
    for _ in range(30):
        d, w, h = rng.integers(1, 3), rng.integers(3, 8), rng.integers(3, 8)
        k = int(rng.integers(1, 4))
        pads = tuple(int(p) for p in rng.integers(0, 3, 4))
        w1 = w + pads[0] + pads[2] - k + 1
        h1 = h + pads[1] + pads[3] - k + 1
        if w1 < 1 or h1 < 1:
            continue
        weights = rng.integers(-9, 10, (2, d, k, k))
        x = rng.integers(-30, 31, (d, w, h))
        g = _conv_graph((d, w, h), (2, w1, h1), weights,
                        np.zeros(2, dtype=int), pads=pads)
        implicit = dense_oracle(lower(g), {"in": x})["out"]
        padded = np.pad(x, ((0, 0), (pads[0], pads[2]), (pads[1], pads[3])))
        g2 = _conv_graph(padded.shape, (2, w1, h1), weights,
                         np.zeros(2, dtype=int))
        explicit = dense_oracle(lower(g2), {"in": padded})["out"]
        assert np.array_equal(implicit, explicit)


def test_divisor_rounds_toward_zero():
    # -7 summed into a divisor-4 pool must give -1, not floor(-7/4) = -2
    g = Graph()
    g.add_fm(FeatureMap("in", 1, 2, 2, role="input"))
    g.add_fm(FeatureMap("out", 1, 1, 1, role="output"))
    g.add_layer(LayerDef("avg_pool", ["in"], "out", kernel=(2, 2), stride=2))
    x = np.array([[[-3, -2], [-1, -1]]])
    out = dense_oracle(lower(g), {"in": x})["out"]
    assert out[0, 0, 0] == -1


def test_relu_clips_negative():
    g = _conv_graph((1, 1, 1), (1, 1, 1), np.full((1, 1, 1, 1), -3, dtype=int),
                    np.zeros(1, dtype=int), act="relu")
    out = dense_oracle(lower(g), {"in": np.array([[[5]]])})["out"]
    assert out[0, 0, 0] == 0


def test_saturation_to_int8():
    g = _conv_graph((1, 1, 1), (1, 1, 1), np.full((1, 1, 1, 1), 127, dtype=int),
                    np.zeros(1, dtype=int))
    out = dense_oracle(lower(g), {"in": np.array([[[127]]])})["out"]
    assert out[0, 0, 0] == 127
    out = dense_oracle(lower(g), {"in": np.array([[[-128]]])})["out"]
    assert out[0, 0, 0] == -128


def test_zero_input_zero_bias_gives_zero_everywhere():
    rng = np.random.default_rng(4)
    g = _conv_graph((2, 5, 5), (3, 3, 3), rng.integers(-9, 10, (3, 2, 3, 3)),
                    np.zeros(3, dtype=int), act="relu")
    out = dense_oracle(lower(g), {"in": np.zeros((2, 5, 5), dtype=int)})["out"]
    assert not out.any()


def test_accumulator_overflow_guard():
    g = _conv_graph((1, 1, 1), (1, 1, 1), np.ones((1, 1, 1, 1), dtype=int),
                    np.full(1, 2 ** 62, dtype=np.int64))
    lowered = lower(g)
    # a pathological bias pushes the potential outside the guarded range
    lowered.specs[0].biases = np.full(1, 2 ** 62, dtype=np.int64)
    with pytest.raises(AccumulatorOverflow):
        compute_fm(lowered, "out",
                   {"in": np.full((1, 1, 1), 127, dtype=np.int64)})


def test_multiply_uses_per_source_accumulators():
    g = Graph()
    g.add_fm(FeatureMap("a", 1, 1, 1, role="input"))
    g.add_fm(FeatureMap("b", 1, 1, 1, role="input"))
    g.add_fm(FeatureMap("out", 1, 1, 1, role="output"))
    g.add_layer(LayerDef("multiply", ["a", "b"], "out"))
    out = dense_oracle(lower(g), {"a": np.array([[[4]]]),
                                  "b": np.array([[[5]]])})["out"]
    assert out[0, 0, 0] == 20
