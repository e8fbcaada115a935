"""Dense reference semantics for lowered graphs.

Every destination neuron is computed by direct summation over its kernel
window, reading implicit zeros outside the source bounds, with wide-integer
accumulation.  This is the ground truth the event-driven runtime is checked
against; it deliberately shares no arithmetic helpers with the runtime.
"""

from __future__ import annotations

import numpy as np

from .errors import AccumulatorOverflow
from .graph import Graph
from .lowering import ConvSpec, Lowered

ACC_MIN = np.iinfo(np.int64).min
ACC_LIMIT = 2 ** 62


def _trunc_div(values, divisor):
    if divisor == 1:
        return values
    return np.sign(values) * (np.abs(values) // divisor)


def _finalize(pre, activation, divisor):
    q = _trunc_div(pre, divisor)
    if activation == "relu":
        q = np.maximum(q, 0)
    return np.clip(q, -128, 127)


def _valid_axis(n_dst, k, pad, src_len, sl, us):
    """Per (dst position, tap) validity and source indices for one axis."""
    step = 1 << sl
    up = 1 << us
    x1 = np.arange(n_dst) * step
    p = x1[:, None] + np.arange(k)[None, :] - pad  # position in upsampled src
    valid = (p >= 0) & (p < src_len * up) & (p % up == 0)
    return valid, p // up


def _accumulate(acc, spec: ConvSpec, src_vals):
    """Add one connection's contribution to the destination accumulator."""
    d_dst, wd, hd = acc.shape[0], acc.shape[1], acc.shape[2]
    vx, sx = _valid_axis(wd, spec.kw, spec.xp, src_vals.shape[1], spec.sl, spec.us)
    vy, sy = _valid_axis(hd, spec.kh, spec.yp, src_vals.shape[2], spec.sl, spec.us)
    src_win = src_vals[spec.src_base:spec.src_base + spec.d_src]
    for j in range(spec.kw):
        xs = np.nonzero(vx[:, j])[0]
        if xs.size == 0:
            continue
        sxi = sx[xs, j]
        for k in range(spec.kh):
            ys = np.nonzero(vy[:, k])[0]
            if ys.size == 0:
                continue
            syi = sy[ys, k]
            patch = src_win[:, sxi[:, None], syi[None, :]]
            region = acc[spec.dst_base:spec.dst_base + spec.d_dst]
            if spec.channel_map == "depthwise":
                w = spec.weights[:, spec.kw - 1 - j, spec.kh - 1 - k]
                if spec.update_rule == "max":
                    mask = (patch != 0) & (w[:, None, None] != 0)
                    cand = np.where(mask, patch, ACC_MIN)
                    region[np.ix_(range(spec.d_dst), xs, ys)] = np.maximum(
                        region[np.ix_(range(spec.d_dst), xs, ys)], cand)
                else:
                    region[np.ix_(range(spec.d_dst), xs, ys)] += \
                        w[:, None, None] * patch
            else:
                wmat = spec.weights[:, spec.kw - 1 - j, spec.kh - 1 - k, :]
                contrib = np.tensordot(wmat, patch, axes=([1], [0]))
                region[np.ix_(range(spec.d_dst), xs, ys)] += contrib


def compute_fm(lowered: Lowered, fm_id, values):
    """Dense value of one feature map given the values of its sources."""
    fm = lowered.graph.fm(fm_id)
    attrs = lowered.attrs(fm_id)
    in_specs = lowered.in_specs(fm_id)
    rules = {s.update_rule for s in in_specs}
    if "max" in rules and rules != {"max"}:
        raise ValueError(f"{fm_id}: max-rule connections cannot be mixed")

    bias = np.zeros(fm.depth, dtype=np.int64)
    for s in in_specs:
        bias[s.dst_base:s.dst_base + s.d_dst] += s.biases

    if attrs.combine == "product":
        aux = [np.zeros(fm.shape, dtype=np.int64) for _ in range(2)]
        for s in in_specs:
            _accumulate(aux[s.mult_slot], s, values[s.src])
        pre = aux[0] * aux[1]
    elif rules == {"max"}:
        acc = np.full(fm.shape, ACC_MIN, dtype=np.int64)
        for s in in_specs:
            _accumulate(acc, s, values[s.src])
        pre = np.where(acc == ACC_MIN, 0, acc)
    else:
        acc = np.zeros(fm.shape, dtype=np.int64)
        for s in in_specs:
            _accumulate(acc, s, values[s.src])
        pre = acc
    pre = pre + bias[:, None, None]
    if np.abs(pre).max(initial=0) > ACC_LIMIT:
        raise AccumulatorOverflow(f"{fm_id}: accumulator magnitude too large")
    return _finalize(pre, attrs.activation, attrs.divisor)


def dense_oracle(lowered: Lowered, inputs, return_all=False):
    """Run the graph densely; ``inputs`` maps input feature-map ids to
    (D, W, H) integer arrays.  Returns output feature maps by id (or all
    computed maps with ``return_all``)."""
    graph = lowered.graph
    values = {}
    for fm_id in graph.topo_order():
        fm = graph.fm(fm_id)
        if fm.role == "input":
            arr = np.asarray(inputs[fm_id], dtype=np.int64)
            if arr.shape != fm.shape:
                raise ValueError(f"input {fm_id}: shape {arr.shape} != {fm.shape}")
            if arr.min(initial=0) < -128 or arr.max(initial=0) > 127:
                raise ValueError(f"input {fm_id}: values outside int8")
            values[fm_id] = arr
        else:
            values[fm_id] = compute_fm(lowered, fm_id, values)
    if return_all:
        return values
    outs = output_ids(graph)
    return {fid: values[fid] for fid in outs}


def output_ids(graph: Graph):
    ids = [fm.id for fm in graph.feature_maps.values() if fm.role == "output"]
    if not ids:
        ids = [fm.id for fm in graph.feature_maps.values()
               if not graph.out_layers(fm.id) and fm.role != "input"]
    return ids
