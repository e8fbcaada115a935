"""Programmatic graph construction with seeded weights and size limits.

The builder tracks the running feature map, draws weights from its own RNG,
and refuses layers once a layer budget is exhausted or a shape would become
invalid; recipes can therefore be truncated into desk-scale prefixes without
per-recipe bookkeeping.
"""

from __future__ import annotations

import numpy as np

from .graph import FeatureMap, Graph, LayerDef, conv_output_hw, effective_kernel


def _pads(pad, k):
    if pad == "same":
        p = (k - 1) // 2
        return (p, p, p, p)
    if isinstance(pad, (tuple, list)):
        t = tuple(int(x) for x in pad)
        return t if len(t) == 4 else (t[0], t[1], t[0], t[1])
    return (int(pad),) * 4


class GraphBuilder:
    """Emits layers with seeded weights, honoring truncation limits."""

    def __init__(self, name, seed, max_layers=None, max_channels=None,
                 max_hw=None):
        self.graph = Graph(name=name)
        self.rng = np.random.default_rng(seed)
        self.max_layers = max_layers if max_layers is not None else 10 ** 9
        self.maxc = max_channels if max_channels is not None else 10 ** 9
        self.max_hw = max_hw
        self.stopped = False
        self.last = None

    # --- plumbing -------------------------------------------------------------

    def _fm(self, d, w, h, role="hidden"):
        fid = f"fm{len(self.graph.feature_maps)}"
        self.graph.add_fm(FeatureMap(fid, d, w, h, role))
        return fid

    def _ok(self):
        if len(self.graph.layers) >= self.max_layers:
            self.stopped = True
        return not self.stopped

    def _weights(self, shape):
        return self.rng.integers(-127, 128, size=shape)

    def _biases(self, d):
        return self.rng.integers(-8, 9, size=d)

    def _emit(self, layer, dst):
        self.graph.add_layer(layer)
        self.last = dst
        return dst

    def input(self, d, w, h):
        if self.max_hw:
            while max(w, h) > self.max_hw:
                w, h = max(1, w // 2), max(1, h // 2)
        self.last = self._fm(min(d, self.maxc), w, h, "input")
        return self.last

    def _conv_like(self, kind, src, depth_out, kw, kh, pads, stride, upsample,
                   act, weights, biases, into=None, **kw_extra):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        ek = LayerDef(kind, [src], "?", kernel=(kw, kh), padding=pads,
                      stride=stride, upsample=upsample, **kw_extra)
        kw_eff, kh_eff = effective_kernel(ek)
        hw = conv_output_hw(s.width, s.height, kw_eff, kh_eff, pads, stride,
                            upsample)
        if hw is None:
            self.stopped = True
            return src
        dst = into or self._fm(depth_out, *hw)
        return self._emit(LayerDef(
            kind, [src], dst, kernel=(kw, kh), padding=pads, stride=stride,
            upsample=upsample, weights=weights, biases=biases,
            activation=act, **kw_extra), dst)

    # --- convolution family -------------------------------------------------------

    def conv(self, src, cout, k, stride=1, pad="same", act="relu",
             upsample=1, into=None):
        s = self.graph.fm(src)
        cout = min(cout, self.maxc)
        kw, kh = (k, k) if isinstance(k, int) else k
        return self._conv_like(
            "conv", src, cout, kw, kh, _pads(pad, kw), stride, upsample, act,
            self._weights((cout, s.depth, kh, kw)), self._biases(cout),
            into=into)

    def deconv(self, src, cout, k, upsample=2, pad=0, act="relu"):
        s = self.graph.fm(src)
        cout = min(cout, self.maxc)
        kw, kh = (k, k) if isinstance(k, int) else k
        return self._conv_like(
            "deconv", src, cout, kw, kh, _pads(pad, kw), 1, upsample, act,
            self._weights((cout, s.depth, kh, kw)), self._biases(cout))

    def depthwise(self, src, k, stride=1, pad="same", act="relu", upsample=1):
        s = self.graph.fm(src)
        kw, kh = (k, k) if isinstance(k, int) else k
        return self._conv_like(
            "depthwise_conv", src, s.depth, kw, kh, _pads(pad, kw), stride,
            upsample, act, self._weights((s.depth, 1, kh, kw)),
            self._biases(s.depth))

    def grouped(self, src, cout, k, group_size, stride=1, pad="same",
                act="relu"):
        kw, kh = (k, k) if isinstance(k, int) else k
        return self._conv_like(
            "grouped_conv", src, cout, kw, kh, _pads(pad, kw), stride, 1, act,
            self._weights((cout, group_size, kh, kw)), self._biases(cout),
            group_size=group_size)

    def dilated(self, src, cout, k, rate, pad=0, act="relu"):
        s = self.graph.fm(src)
        cout = min(cout, self.maxc)
        kw, kh = (k, k) if isinstance(k, int) else k
        return self._conv_like(
            "dilated_conv", src, cout, kw, kh, _pads(pad, kw), 1, 1, act,
            self._weights((cout, s.depth, kh, kw)), self._biases(cout),
            dilation_rate=rate)

    # --- pooling and reshaping ------------------------------------------------------

    def avg_pool(self, src, k, stride, pad=0, act="identity"):
        s = self.graph.fm(src)
        return self._conv_like("avg_pool", src, s.depth, k, k, _pads(pad, k),
                               stride, 1, act, None, None)

    def max_pool(self, src, k, stride, pad=0, act="identity"):
        s = self.graph.fm(src)
        return self._conv_like("max_pool", src, s.depth, k, k, _pads(pad, k),
                               stride, 1, act, None, None)

    def gap(self, src):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        dst = self._fm(s.depth, 1, 1)
        return self._emit(LayerDef("global_avg_pool", [src], dst,
                                   kernel=(s.width, s.height)), dst)

    def dense(self, src, n, act="relu"):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        if (s.width, s.height) != (1, 1):
            return self.flatten_dense(src, n, act)
        n = min(n, self.maxc)
        dst = self._fm(n, 1, 1)
        return self._emit(LayerDef(
            "dense", [src], dst, weights=self._weights((n, s.depth, 1, 1)),
            biases=self._biases(n), activation=act), dst)

    def flatten_dense(self, src, n, act="relu"):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        n = min(n, self.maxc)
        dst = self._fm(n, 1, 1)
        return self._emit(LayerDef(
            "flatten_dense", [src], dst, kernel=(s.width, s.height),
            weights=self._weights((n, s.depth, s.height, s.width)),
            biases=self._biases(n), activation=act), dst)

    def upsample_nearest(self, src, factor, act="identity"):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        dst = self._fm(s.depth, s.width * factor, s.height * factor)
        return self._emit(LayerDef("upsample_nearest", [src], dst,
                                   upsample=factor, activation=act), dst)

    def upsample_bilinear(self, src, factor, act="identity"):
        if not self._ok():
            return src
        s = self.graph.fm(src)
        dst = self._fm(s.depth, s.width * factor, s.height * factor)
        return self._emit(LayerDef("upsample_bilinear", [src], dst,
                                   upsample=factor, activation=act), dst)

    # --- branching ----------------------------------------------------------------

    def add(self, sources, act="relu"):
        if not self._ok():
            return sources[0]
        s = self.graph.fm(sources[0])
        dst = self._fm(s.depth, s.width, s.height)
        return self._emit(LayerDef("add", list(sources), dst,
                                   activation=act), dst)

    def multiply(self, a, bsrc, act="identity"):
        if not self._ok():
            return a
        s = self.graph.fm(a)
        dst = self._fm(s.depth, s.width, s.height)
        return self._emit(LayerDef("multiply", [a, bsrc], dst,
                                   activation=act), dst)

    def concat(self, sources, act="identity"):
        if not self._ok():
            return sources[0]
        fms = [self.graph.fm(s) for s in sources]
        dst = self._fm(sum(f.depth for f in fms), fms[0].width, fms[0].height)
        return self._emit(LayerDef("concat", list(sources), dst,
                                   activation=act), dst)

    def split(self, src, sizes, act="identity"):
        if not self._ok():
            return [src]
        s = self.graph.fm(src)
        outs, base = [], 0
        for sz in sizes:
            dst = self._fm(sz, s.width, s.height)
            self._emit(LayerDef("split", [src], dst, src_base=base,
                                activation=act), dst)
            outs.append(dst)
            base += sz
        return outs

    def shortcut(self, dst, src, act="relu"):
        """Identity residual connection accumulating into an existing map."""
        if not self._ok() or dst == src:
            return dst
        if self.graph.fm(dst).shape != self.graph.fm(src).shape:
            return dst
        return self._emit(LayerDef("add", [src], dst, activation=act), dst)

    def finish(self):
        if (self.last is not None
                and self.graph.fm(self.last).role != "input"):
            self.graph.fm(self.last).role = "output"
        return self.graph
