"""Exact neuron and synapse counting.

A synapse exists for a (source neuron, destination neuron) pair exactly when
the kernel connects them through in-bounds, non-padded source positions and a
destination position that survives the stride.  Zero-valued weights still
count: connectivity is geometric, matching axon emission.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .lowering import ConvSpec, Lowered


def count_neurons(graph: Graph):
    """Per-feature-map neuron counts and the total."""
    per_fm = {fm.id: fm.neurons for fm in graph.feature_maps.values()}
    return per_fm, sum(per_fm.values())


def tap_counts(spec: ConvSpec, src_len, dst_len, axis="x"):
    """For each destination position on one axis: number of valid kernel taps."""
    k = spec.kw if axis == "x" else spec.kh
    pad = spec.xp if axis == "x" else spec.yp
    step, up = 1 << spec.sl, 1 << spec.us
    p = (np.arange(dst_len) * step)[:, None] + np.arange(k)[None, :] - pad
    valid = (p >= 0) & (p < src_len * up) & (p % up == 0)
    return valid.sum(axis=1)


def fanout_counts(spec: ConvSpec, src_len, dst_len, axis="x"):
    """For each source position on one axis: number of destinations reached."""
    k = spec.kw if axis == "x" else spec.kh
    pad = spec.xp if axis == "x" else spec.yp
    step, up = 1 << spec.sl, 1 << spec.us
    x1 = (np.arange(src_len) * up)[:, None] + pad - np.arange(k)[None, :]
    valid = (x1 >= 0) & (x1 % step == 0) & (x1 // step < dst_len)
    return valid.sum(axis=1)


def channel_pairs(spec: ConvSpec):
    if spec.channel_map == "depthwise":
        return spec.d_dst
    if spec.channel_map == "grouped":
        return spec.d_dst * spec.group_size
    return spec.d_dst * spec.d_src


def count_synapses(graph: Graph, spec: ConvSpec):
    """Exact synapse count of one lowered connection."""
    src, dst = graph.fm(spec.src), graph.fm(spec.dst)
    cx = tap_counts(spec, src.width, dst.width, "x")
    cy = tap_counts(spec, src.height, dst.height, "y")
    return int(channel_pairs(spec)) * int(cx.sum()) * int(cy.sum())


def count_synapses_total(lowered: Lowered):
    per_spec = [count_synapses(lowered.graph, s) for s in lowered.specs]
    return per_spec, sum(per_spec)


def out_channels_per_src(spec: ConvSpec):
    """Destination channels each connected source channel reaches."""
    if spec.channel_map == "depthwise":
        return 1
    if spec.channel_map == "grouped":
        gd = spec.d_dst // (spec.d_src // spec.group_size)
        return gd
    return spec.d_dst
