"""CNN graphs as feature maps plus typed layer definitions.

A feature map is a 3-D integer neuron population indexed ``[channel, x, y]``
(depth D, width W, height H).  Layers connect feature maps; every supported
kind later lowers onto a single generic convolution primitive.  Activations
and weights are 8-bit signed integers, accumulation is done in wide integers,
so all downstream semantics are exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CycleDetected,
    GraphValidationError,
    UnknownFeatureMap,
    UnsupportedLayer,
)

LAYER_KINDS = (
    "conv",
    "deconv",
    "depthwise_conv",
    "grouped_conv",
    "dilated_conv",
    "avg_pool",
    "max_pool",
    "global_avg_pool",
    "dense",
    "flatten_dense",
    "upsample_nearest",
    "upsample_bilinear",
    "add",
    "multiply",
    "concat",
    "split",
)

ACTIVATIONS = ("identity", "relu")

# Kinds whose weights come from the model rather than from the lowering rule.
WEIGHTED_KINDS = frozenset(
    {"conv", "deconv", "depthwise_conv", "grouped_conv", "dilated_conv",
     "dense", "flatten_dense"}
)

VALUE_MIN, VALUE_MAX = -128, 127


@dataclass
class FeatureMap:
    """A neuron population of shape (depth, width, height)."""

    id: str
    depth: int
    width: int
    height: int
    role: str = "hidden"  # input | hidden | output

    @property
    def shape(self):
        return (self.depth, self.width, self.height)

    @property
    def neurons(self):
        return self.depth * self.width * self.height


@dataclass
class LayerDef:
    """One extraction step between feature maps.

    ``kernel`` is (KW, KH); ``padding`` is (XP, YP, XPr, YPr) where XP/YP are
    the implicit zero columns/rows at the left/top and XPr/YPr only enter the
    output-shape bookkeeping.  ``stride`` downsamples the destination,
    ``upsample`` zero-interleaves the source; both are powers of two.
    """

    kind: str
    sources: list
    destination: str
    kernel: tuple = (1, 1)
    padding: tuple = (0, 0, 0, 0)
    stride: int = 1
    upsample: int = 1
    group_size: int | None = None
    dilation_rate: int = 1
    src_base: int = 0  # first source channel consumed (split layers)
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    activation: str = "identity"

    def __post_init__(self):
        self.kernel = tuple(int(k) for k in self.kernel)
        pad = tuple(int(p) for p in self.padding)
        if len(pad) == 2:
            pad = (pad[0], pad[1], pad[0], pad[1])
        self.padding = pad
        if self.weights is not None:
            # int8 values; int16 storage keeps large models compact while
            # every arithmetic path upcasts to wide integers explicitly
            self.weights = np.asarray(self.weights, dtype=np.int16)
        if self.biases is not None:
            self.biases = np.asarray(self.biases, dtype=np.int64)

    @property
    def kw(self):
        return self.kernel[0]

    @property
    def kh(self):
        return self.kernel[1]


@dataclass
class Graph:
    """Feature maps plus layers, in declaration order."""

    feature_maps: dict = field(default_factory=dict)
    layers: list = field(default_factory=list)
    name: str = ""

    def add_fm(self, fm: FeatureMap):
        self.feature_maps[fm.id] = fm
        return fm

    def add_layer(self, layer: LayerDef):
        self.layers.append(layer)
        return layer

    def fm(self, fm_id) -> FeatureMap:
        try:
            return self.feature_maps[fm_id]
        except KeyError:
            raise UnknownFeatureMap(fm_id) from None

    def in_layers(self, fm_id):
        return [l for l in self.layers if l.destination == fm_id]

    def out_layers(self, fm_id):
        return [l for l in self.layers if fm_id in l.sources]

    def topo_order(self):
        """Feature-map ids in dependency order; raises CycleDetected."""
        deps = {fid: set() for fid in self.feature_maps}
        for layer in self.layers:
            for src in layer.sources:
                if src in deps and layer.destination in deps:
                    deps[layer.destination].add(src)
        order, done = [], set()
        ready = [fid for fid, d in deps.items() if not d]
        while ready:
            fid = ready.pop(0)
            order.append(fid)
            done.add(fid)
            for other, d in deps.items():
                if other not in done and fid in d:
                    d.discard(fid)
                    if not d and other not in ready:
                        ready.append(other)
        if len(order) != len(deps):
            raise CycleDetected([f for f in deps if f not in done])
        return order

    def validate(self):
        issues = validate_graph(self)
        if issues:
            raise GraphValidationError(issues)
        return self


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def effective_kernel(layer: LayerDef):
    """Kernel dims after dilation expansion."""
    dr = layer.dilation_rate
    if layer.kind == "dilated_conv" and dr > 1:
        return (dr * layer.kw - dr + 1, dr * layer.kh - dr + 1)
    return (layer.kw, layer.kh)


def conv_output_hw(w_src, h_src, kw, kh, padding, stride, upsample):
    """Destination width/height of the generic convolution primitive.

    The source is zero-interleaved by the upsample factor, implicitly padded,
    reduced by the kernel, and the stride keeps every stride-th row/column.
    """
    xp, yp, xpr, ypr = padding
    w1 = w_src * upsample + xp + xpr - kw + 1
    h1 = h_src * upsample + yp + ypr - kh + 1
    if w1 < 1 or h1 < 1:
        return None
    return (math.ceil(w1 / stride), math.ceil(h1 / stride))


def layer_output_shape(graph: Graph, layer: LayerDef):
    """(D, W, H) the layer produces, or None when inputs are inconsistent."""
    srcs = [graph.fm(s) for s in layer.sources]
    s0 = srcs[0]
    kind = layer.kind
    if kind in ("conv", "deconv", "dilated_conv"):
        kw, kh = effective_kernel(layer)
        hw = conv_output_hw(s0.width, s0.height, kw, kh, layer.padding,
                            layer.stride, layer.upsample)
        if hw is None or layer.weights is None:
            return None
        return (int(layer.weights.shape[0]), *hw)
    if kind in ("depthwise_conv", "avg_pool", "max_pool"):
        hw = conv_output_hw(s0.width, s0.height, layer.kw, layer.kh,
                            layer.padding, layer.stride, layer.upsample)
        if hw is None:
            return None
        return (s0.depth, *hw)
    if kind == "grouped_conv":
        gs = layer.group_size
        if not gs or s0.depth % gs or layer.weights is None:
            return None
        hw = conv_output_hw(s0.width, s0.height, layer.kw, layer.kh,
                            layer.padding, layer.stride, layer.upsample)
        if hw is None:
            return None
        return (int(layer.weights.shape[0]), *hw)
    if kind == "global_avg_pool":
        return (s0.depth, 1, 1)
    if kind == "dense":
        if (s0.width, s0.height) != (1, 1) or layer.weights is None:
            return None
        return (int(layer.weights.shape[0]), 1, 1)
    if kind == "flatten_dense":
        if layer.weights is None:
            return None
        return (int(layer.weights.shape[0]), 1, 1)
    if kind == "upsample_nearest":
        u = layer.upsample
        return (s0.depth, s0.width * u, s0.height * u)
    if kind == "upsample_bilinear":
        u = layer.upsample
        return (s0.depth, s0.width * u, s0.height * u)
    if kind in ("add", "multiply"):
        if any(s.shape != s0.shape for s in srcs):
            return None
        return s0.shape
    if kind == "concat":
        if any((s.width, s.height) != (s0.width, s0.height) for s in srcs):
            return None
        return (sum(s.depth for s in srcs), s0.width, s0.height)
    if kind == "split":
        dst = graph.fm(layer.destination)
        if layer.src_base + dst.depth > s0.depth:
            return None
        return (dst.depth, s0.width, s0.height)
    raise UnsupportedLayer(kind)


def expected_weight_shape(graph: Graph, layer: LayerDef):
    """Model-weight array shape for weighted kinds, channel-major
    [c_dst][c_src][dy][dx] in the untransposed orientation."""
    s0 = graph.fm(layer.sources[0])
    dst = graph.fm(layer.destination)
    kind = layer.kind
    if kind in ("conv", "deconv", "dilated_conv"):
        return (dst.depth, s0.depth, layer.kh, layer.kw)
    if kind == "depthwise_conv":
        return (s0.depth, 1, layer.kh, layer.kw)
    if kind == "grouped_conv":
        return (dst.depth, layer.group_size, layer.kh, layer.kw)
    if kind == "dense":
        return (dst.depth, s0.depth, 1, 1)
    if kind == "flatten_dense":
        return (dst.depth, s0.depth, s0.height, s0.width)
    return None


@dataclass
class GraphIssue:
    code: str
    message: str
    layer: int | None = None

    def __str__(self):
        where = "" if self.layer is None else f"layer {self.layer}: "
        return f"{where}[{self.code}] {self.message}"


def validate_graph(graph: Graph):
    """Check shape consistency, id uniqueness and acyclicity.

    Returns a list of issues; an empty list means the graph is valid.
    """
    issues = []
    for fm in graph.feature_maps.values():
        if fm.depth < 1 or fm.width < 1 or fm.height < 1:
            issues.append(GraphIssue("BadShape", f"{fm.id}: {fm.shape}"))
        if fm.role not in ("input", "hidden", "output"):
            issues.append(GraphIssue("BadRole", f"{fm.id}: {fm.role}"))

    try:
        graph.topo_order()
    except CycleDetected as exc:
        issues.append(GraphIssue("CycleDetected", str(exc)))

    seen_dst = {}
    for i, layer in enumerate(graph.layers):
        if layer.kind not in LAYER_KINDS:
            issues.append(GraphIssue("UnsupportedLayer", repr(layer.kind), i))
            continue
        missing = [s for s in list(layer.sources) + [layer.destination]
                   if s not in graph.feature_maps]
        if missing:
            issues.append(
                GraphIssue("UnknownFeatureMap", ", ".join(map(repr, missing)), i))
            continue
        if layer.kw < 1 or layer.kh < 1:
            issues.append(GraphIssue("BadKernel", f"{layer.kernel}", i))
            continue
        if layer.stride not in (1, 2):
            issues.append(GraphIssue("BadStride", f"{layer.stride}", i))
            continue
        if layer.upsample not in (1, 2, 4, 8):
            issues.append(GraphIssue("BadUpsample", f"{layer.upsample}", i))
            continue
        if layer.activation not in ACTIVATIONS:
            issues.append(GraphIssue("BadActivation", layer.activation, i))
            continue
        if any(p < 0 for p in layer.padding):
            issues.append(GraphIssue("BadPadding", f"{layer.padding}", i))
            continue
        nsrc = len(layer.sources)
        if layer.kind == "multiply" and nsrc != 2:
            issues.append(GraphIssue("BadArity", "multiply needs 2 sources", i))
            continue
        if layer.kind in ("add", "concat") and nsrc < 1:
            issues.append(GraphIssue("BadArity", "needs >= 1 source", i))
            continue
        if layer.kind not in ("add", "multiply", "concat") and nsrc != 1:
            issues.append(GraphIssue("BadArity", f"{layer.kind} needs 1 source", i))
            continue
        if layer.src_base < 0:
            issues.append(GraphIssue("BadGeometry", "negative src_base", i))
            continue
        if layer.kind in WEIGHTED_KINDS:
            want = expected_weight_shape(graph, layer)
            if layer.weights is None:
                issues.append(GraphIssue("MissingWeights", layer.kind, i))
                continue
            if tuple(layer.weights.shape) != want:
                issues.append(GraphIssue(
                    "BadWeights", f"shape {layer.weights.shape} != {want}", i))
                continue
            if layer.weights.min() < VALUE_MIN or layer.weights.max() > VALUE_MAX:
                issues.append(GraphIssue("BadWeights", "values outside int8", i))
                continue
        if layer.biases is not None:
            dst = graph.fm(layer.destination)
            if layer.biases.shape != (dst.depth,):
                issues.append(GraphIssue(
                    "BadBiases", f"shape {layer.biases.shape} != ({dst.depth},)", i))
                continue

        expected = layer_output_shape(graph, layer)
        got = graph.fm(layer.destination).shape
        if expected is None:
            issues.append(GraphIssue("BadGeometry", "inconsistent inputs", i))
            continue
        if tuple(expected) != tuple(got):
            issues.append(GraphIssue(
                "ShapeMismatch", f"destination {got} != expected {expected}", i))
            continue
        seen_dst.setdefault(layer.destination, []).append(layer)

    # activation must agree among all producers of one destination
    for dst, layers in seen_dst.items():
        acts = {l.activation for l in layers}
        if len(acts) > 1:
            issues.append(GraphIssue(
                "ActivationConflict", f"{dst}: {sorted(acts)}"))
        exclusive = [l for l in layers
                     if l.kind in ("max_pool", "avg_pool", "global_avg_pool",
                                   "upsample_bilinear", "multiply")]
        if exclusive and len(layers) > 1:
            issues.append(GraphIssue(
                "SharedDestination",
                f"{dst}: {exclusive[0].kind} must be the sole producer"))

    # feature maps without producers must be declared inputs
    for fm in graph.feature_maps.values():
        if fm.role != "input" and not graph.in_layers(fm.id):
            issues.append(GraphIssue("Unproduced", fm.id))
        if fm.role == "input" and graph.in_layers(fm.id):
            issues.append(GraphIssue("InputProduced", fm.id))
    return issues


# --- JSON ingestion ----------------------------------------------------------

def _layer_to_json(layer: LayerDef, keep_weights=True):
    out = {
        "kind": layer.kind,
        "sources": list(layer.sources),
        "destination": layer.destination,
    }
    if layer.kernel != (1, 1):
        out["kernel"] = list(layer.kernel)
    if any(layer.padding):
        out["padding"] = list(layer.padding)
    if layer.stride != 1:
        out["stride"] = layer.stride
    if layer.upsample != 1:
        out["upsample"] = layer.upsample
    if layer.group_size:
        out["group_size"] = layer.group_size
    if layer.dilation_rate != 1:
        out["dilation_rate"] = layer.dilation_rate
    if layer.src_base:
        out["src_base"] = layer.src_base
    if layer.activation != "identity":
        out["activation"] = layer.activation
    if keep_weights and layer.weights is not None:
        out["weights"] = layer.weights.tolist()
    if keep_weights and layer.biases is not None:
        out["biases"] = layer.biases.tolist()
    return out


def graph_to_json(graph: Graph, weight_seed=None):
    """Serialize; with weight_seed the weights are elided and regenerated
    deterministically on load."""
    doc = {
        "name": graph.name,
        "feature_maps": [
            {"id": fm.id, "depth": fm.depth, "width": fm.width,
             "height": fm.height, "role": fm.role}
            for fm in graph.feature_maps.values()
        ],
        "layers": [
            _layer_to_json(l, keep_weights=weight_seed is None)
            for l in graph.layers
        ],
    }
    if weight_seed is not None:
        doc["weight_seed"] = int(weight_seed)
    return doc


def graph_from_json(doc) -> Graph:
    graph = Graph(name=doc.get("name", ""))
    for f in doc["feature_maps"]:
        graph.add_fm(FeatureMap(f["id"], int(f["depth"]), int(f["width"]),
                                int(f["height"]), f.get("role", "hidden")))
    seed = doc.get("weight_seed")
    rng = np.random.default_rng(seed) if seed is not None else None
    for entry in doc["layers"]:
        layer = LayerDef(
            kind=entry["kind"],
            sources=list(entry["sources"]),
            destination=entry["destination"],
            kernel=tuple(entry.get("kernel", (1, 1))),
            padding=tuple(entry.get("padding", (0, 0, 0, 0))),
            stride=int(entry.get("stride", 1)),
            upsample=int(entry.get("upsample", 1)),
            group_size=entry.get("group_size"),
            dilation_rate=int(entry.get("dilation_rate", 1)),
            src_base=int(entry.get("src_base", 0)),
            weights=entry.get("weights"),
            biases=entry.get("biases"),
            activation=entry.get("activation", "identity"),
        )
        if layer.weights is None and layer.kind in WEIGHTED_KINDS:
            if rng is None:
                raise GraphValidationError(
                    [GraphIssue("MissingWeights", layer.kind)])
            # one draw per layer in declaration order: matches the seeded
            # builder exactly, so seed-elided files round-trip bit-identically
            shape = expected_weight_shape(graph, layer)
            layer.weights = rng.integers(-127, 128, size=shape)
            layer.biases = rng.integers(-8, 9, size=shape[0])
        graph.add_layer(layer)
    return graph


def load_graph(path) -> Graph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))


def save_graph(graph: Graph, path, weight_seed=None):
    doc = graph_to_json(graph, weight_seed=weight_seed)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    return path
