"""Lowering of every layer kind onto one generic convolution connection.

A ``ConvSpec`` describes the connectivity between a source and a destination
feature map: kernel dims, implicit left/top padding, stride log, upsample log,
and a channel map.  Weights are stored XY-transposed, indexed
``[c_dst, dx, dy, c_src]``: that is the scatter orientation used when a source
value broadcasts its kernel into the destination, and the orientation the
destination-side decode loop consumes directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UnsupportedLayer
from .graph import Graph, LayerDef

UPDATE_RULES = ("accumulate", "max", "multiply")

MAX_KERNEL_DIM = 15  # 4-bit descriptor fields, 0 reserved as invalid


@dataclass
class ConvSpec:
    """Generic lowered connection between two feature maps.

    ``src_base``/``dst_base`` select channel windows inside the endpoint
    feature maps (used by split/concat/grouped lowering); ``d_src``/``d_dst``
    are the window sizes.  ``xp`` may become negative when an oversized kernel
    is tiled; it never reaches hardware, only the offset arithmetic.
    """

    src: str
    dst: str
    kw: int
    kh: int
    xp: int = 0
    yp: int = 0
    sl: int = 0
    us: int = 0
    channel_map: str = "full"      # full | depthwise | grouped
    group_size: int | None = None
    src_base: int = 0
    dst_base: int = 0
    d_src: int = 0
    d_dst: int = 0
    weights: np.ndarray = None     # full: (d_dst, kw, kh, d_src); depthwise: (d, kw, kh)
    biases: np.ndarray = None      # (d_dst,)
    update_rule: str = "accumulate"
    mult_slot: int = 0             # slot index for multiply destinations

    @property
    def x_off_base(self):
        # anchor shift of the transposed kernel for an uncut pair
        return -self.kw + self.xp + 1

    @property
    def y_off_base(self):
        return -self.kh + self.yp + 1


@dataclass
class DstAttrs:
    """Per-destination finalization: applied once per frame at fire time."""

    activation: str = "identity"
    divisor: int = 1               # exact integer division, round toward zero
    combine: str = "sum"           # sum | product (two accumulator slots)


@dataclass
class Lowered:
    graph: Graph
    specs: list = field(default_factory=list)
    dst_attrs: dict = field(default_factory=dict)

    def in_specs(self, fm_id):
        return [s for s in self.specs if s.dst == fm_id]

    def out_specs(self, fm_id):
        return [s for s in self.specs if s.src == fm_id]

    def attrs(self, fm_id) -> DstAttrs:
        return self.dst_attrs.get(fm_id, DstAttrs())


def _transpose_xy(w):
    """[c_dst][c_src][dy][dx] model weights -> [c_dst][dx][dy][c_src] with the
    XY flip that makes scatter anchored at the minimum corner exact."""
    return np.ascontiguousarray(w.transpose(0, 3, 2, 1)[:, ::-1, ::-1, :])


def _scatter_orient(w):
    """Same axis order but without the flip: for kernels that are already
    defined in scatter orientation (transposed convolutions)."""
    return np.ascontiguousarray(w.transpose(0, 3, 2, 1))


def _dilate(w, dr):
    dd, ds, kh, kw = w.shape
    out = np.zeros((dd, ds, dr * kh - dr + 1, dr * kw - dr + 1), dtype=w.dtype)
    out[:, :, ::dr, ::dr] = w
    return out


def _log2(n):
    return int(n).bit_length() - 1


def _bias(layer: LayerDef, depth):
    if layer.biases is None:
        return np.zeros(depth, dtype=np.int64)
    return layer.biases.astype(np.int64)


def _identity_dw(depth):
    return np.ones((depth, 1, 1), dtype=np.int16)


def _triangle(u):
    # 1 .. u .. 1; the exact interpolation weights for a factor-u upsample
    return np.concatenate([np.arange(1, u + 1), np.arange(u - 1, 0, -1)])


def lower(graph: Graph) -> Lowered:
    """Express every layer as one or more ConvSpecs plus destination attrs."""
    graph.validate()
    lowered = Lowered(graph=graph)
    for layer in graph.layers:
        _lower_layer(graph, layer, lowered)
    for fm in graph.feature_maps.values():
        lowered.dst_attrs.setdefault(fm.id, DstAttrs())
    return lowered


def _set_attrs(lowered, dst_id, activation, divisor=1, combine="sum"):
    lowered.dst_attrs[dst_id] = DstAttrs(activation, int(divisor), combine)


def _lower_layer(graph: Graph, layer: LayerDef, lowered: Lowered):
    src0 = graph.fm(layer.sources[0])
    dst = graph.fm(layer.destination)
    kind = layer.kind
    xp, yp = layer.padding[0], layer.padding[1]
    sl, us = _log2(layer.stride), _log2(layer.upsample)
    add = lowered.specs.append

    if kind in ("conv", "dilated_conv", "deconv"):
        w = layer.weights
        if kind == "dilated_conv" and layer.dilation_rate > 1:
            w = _dilate(w, layer.dilation_rate)
        kw, kh = w.shape[3], w.shape[2]
        wt = _scatter_orient(w) if kind == "deconv" else _transpose_xy(w)
        add(ConvSpec(src0.id, dst.id, kw, kh, xp, yp, sl, us, "full",
                     d_src=src0.depth, d_dst=dst.depth, weights=wt,
                     biases=_bias(layer, dst.depth)))
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind == "depthwise_conv":
        w = layer.weights[:, 0]  # (D, KH, KW)
        wt = np.ascontiguousarray(w.transpose(0, 2, 1)[:, ::-1, ::-1])
        add(ConvSpec(src0.id, dst.id, layer.kw, layer.kh, xp, yp, sl, us,
                     "depthwise", d_src=src0.depth, d_dst=dst.depth,
                     weights=wt, biases=_bias(layer, dst.depth)))
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind == "grouped_conv":
        gs = layer.group_size
        groups = src0.depth // gs
        gd = dst.depth // groups
        bias = _bias(layer, dst.depth)
        for g in range(groups):
            w = layer.weights[g * gd:(g + 1) * gd]  # (gd, gs, KH, KW)
            add(ConvSpec(src0.id, dst.id, layer.kw, layer.kh, xp, yp, sl, us,
                         "full", src_base=g * gs, dst_base=g * gd,
                         d_src=gs, d_dst=gd, weights=_transpose_xy(w),
                         biases=bias[g * gd:(g + 1) * gd]))
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind in ("avg_pool", "max_pool"):
        ones = np.ones((src0.depth, layer.kw, layer.kh), dtype=np.int16)
        rule = "max" if kind == "max_pool" else "accumulate"
        add(ConvSpec(src0.id, dst.id, layer.kw, layer.kh, xp, yp, sl, us,
                     "depthwise", d_src=src0.depth, d_dst=dst.depth,
                     weights=ones, biases=np.zeros(dst.depth, dtype=np.int64),
                     update_rule=rule))
        div = layer.kw * layer.kh if kind == "avg_pool" else 1
        _set_attrs(lowered, dst.id, layer.activation, div)
    elif kind == "global_avg_pool":
        kw, kh = src0.width, src0.height
        ones = np.ones((src0.depth, kw, kh), dtype=np.int16)
        add(ConvSpec(src0.id, dst.id, kw, kh, 0, 0, 0, 0, "depthwise",
                     d_src=src0.depth, d_dst=dst.depth, weights=ones,
                     biases=np.zeros(dst.depth, dtype=np.int64)))
        _set_attrs(lowered, dst.id, layer.activation, kw * kh)
    elif kind in ("dense", "flatten_dense"):
        if kind == "dense":
            w = layer.weights  # (Nd, Ns, 1, 1)
            kw = kh = 1
        else:
            w = layer.weights  # (Nd, Ds, H, W)
            kw, kh = src0.width, src0.height
        add(ConvSpec(src0.id, dst.id, kw, kh, 0, 0, 0, 0, "full",
                     d_src=src0.depth, d_dst=dst.depth, weights=_transpose_xy(w),
                     biases=_bias(layer, dst.depth)))
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind == "upsample_nearest":
        u = layer.upsample
        ones = np.ones((src0.depth, u, u), dtype=np.int16)
        add(ConvSpec(src0.id, dst.id, u, u, u - 1, u - 1, 0, us, "depthwise",
                     d_src=src0.depth, d_dst=dst.depth, weights=ones,
                     biases=np.zeros(dst.depth, dtype=np.int64)))
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind == "upsample_bilinear":
        u = layer.upsample
        tri = _triangle(u)
        k2 = np.outer(tri, tri)  # (2u-1, 2u-1), peak u*u at the center
        w = np.broadcast_to(k2, (src0.depth, *k2.shape)).astype(np.int16)
        add(ConvSpec(src0.id, dst.id, 2 * u - 1, 2 * u - 1, u - 1, u - 1, 0, us,
                     "depthwise", d_src=src0.depth, d_dst=dst.depth,
                     weights=np.ascontiguousarray(w),
                     biases=np.zeros(dst.depth, dtype=np.int64)))
        _set_attrs(lowered, dst.id, layer.activation, u * u)
    elif kind in ("add", "multiply"):
        rule = "multiply" if kind == "multiply" else "accumulate"
        for slot, sid in enumerate(layer.sources):
            s = graph.fm(sid)
            add(ConvSpec(sid, dst.id, 1, 1, 0, 0, 0, 0, "depthwise",
                         d_src=s.depth, d_dst=dst.depth,
                         weights=_identity_dw(s.depth),
                         biases=np.zeros(dst.depth, dtype=np.int64),
                         update_rule=rule, mult_slot=slot))
        combine = "product" if kind == "multiply" else "sum"
        _set_attrs(lowered, dst.id, layer.activation, 1, combine)
    elif kind == "concat":
        base = 0
        for sid in layer.sources:
            s = graph.fm(sid)
            add(ConvSpec(sid, dst.id, 1, 1, 0, 0, 0, 0, "depthwise",
                         dst_base=base, d_src=s.depth, d_dst=s.depth,
                         weights=_identity_dw(s.depth),
                         biases=np.zeros(s.depth, dtype=np.int64)))
            base += s.depth
        _set_attrs(lowered, dst.id, layer.activation)
    elif kind == "split":
        add(ConvSpec(src0.id, dst.id, 1, 1, 0, 0, 0, 0, "depthwise",
                     src_base=layer.src_base, d_src=dst.depth,
                     d_dst=dst.depth, weights=_identity_dw(dst.depth),
                     biases=np.zeros(dst.depth, dtype=np.int64)))
        _set_attrs(lowered, dst.id, layer.activation)
    else:
        raise UnsupportedLayer(kind)


# --- normalization passes consumed by the compiler ---------------------------

def expand_grouped(spec: ConvSpec):
    """Rewrite a grouped ConvSpec as per-group full connections."""
    if spec.channel_map != "grouped":
        return [spec]
    gs = spec.group_size
    groups = spec.d_src // gs
    gd = spec.d_dst // groups
    out = []
    for g in range(groups):
        out.append(replace(
            spec, channel_map="full", group_size=None,
            src_base=spec.src_base + g * gs, dst_base=spec.dst_base + g * gd,
            d_src=gs, d_dst=gd,
            weights=spec.weights[g * gd:(g + 1) * gd],
            biases=spec.biases[g * gd:(g + 1) * gd]))
    return out


def split_oversized(spec: ConvSpec):
    """Tile kernels wider/taller than the 4-bit descriptor limit.

    Each tile keeps the stored (transposed) weight slice that belongs to its
    kernel columns/rows and shifts its padding so the per-tile anchor offsets
    line up with the original kernel positions.  Accumulating all tiles
    reproduces the untiled result exactly.
    """
    if spec.kw <= MAX_KERNEL_DIM and spec.kh <= MAX_KERNEL_DIM:
        return [spec]
    tiles = []
    for ty in range(0, spec.kh, MAX_KERNEL_DIM):
        th = min(MAX_KERNEL_DIM, spec.kh - ty)
        for tx in range(0, spec.kw, MAX_KERNEL_DIM):
            tw = min(MAX_KERNEL_DIM, spec.kw - tx)
            # stored weights are XY-transposed: original column j = tx + j'
            # lives at dx = kw - 1 - j, so the tile occupies a dense slice
            x0 = spec.kw - tx - tw
            y0 = spec.kh - ty - th
            if spec.channel_map == "depthwise":
                w = spec.weights[:, x0:x0 + tw, y0:y0 + th]
            else:
                w = spec.weights[:, x0:x0 + tw, y0:y0 + th, :]
            # the bias is applied once per destination, not once per tile
            bias = spec.biases if not tiles else np.zeros_like(spec.biases)
            tiles.append(replace(
                spec, kw=tw, kh=th, xp=spec.xp - tx, yp=spec.yp - ty,
                weights=np.ascontiguousarray(w), biases=bias))
    return tiles


def normalize_specs(specs):
    """Grouped expansion followed by oversized-kernel tiling."""
    out = []
    for spec in specs:
        for s in expand_grouped(spec):
            out.extend(split_oversized(s))
    return out
