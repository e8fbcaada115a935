"""Deterministic constructors for the benchmark networks.

Weights are synthetic (seeded, uniform in [-127, 127]): the artifact verifies
connectivity and memory footprints, not task accuracy.  Residual connections
write into the block output feature map directly (one conv producer plus one
identity shortcut), matching how inference engines count activations: the add
happens in the destination accumulator, not in an extra tensor.

Architectures follow the published layer tables: the NVIDIA steering network
(PilotNet, 66x200 input), MobileNet v1 (224), ResNet-50/101 (224, original
stride placement: downsampling on the leading 1x1 of each stage), and
DarkNet-53 at its 256 classification resolution.
"""

from __future__ import annotations

from .build import GraphBuilder
from .errors import UnknownNetwork
from .graph import Graph

NETWORKS = ("pilotnet", "mobilenet_v1", "resnet50", "resnet101", "darknet53")


def _pilotnet(b: GraphBuilder):
    # 3x200x66 YUV input; five valid convolutions, then the regression head
    x = b.input(3, 200, 66)
    for cout, k, s in ((24, 5, 2), (36, 5, 2), (48, 5, 2), (64, 3, 1),
                       (64, 3, 1)):
        x = b.conv(x, cout, k, stride=s, pad=0, act="relu")
    x = b.flatten_dense(x, 100, act="relu")
    x = b.dense(x, 50, "relu")
    x = b.dense(x, 10, "relu")
    b.dense(x, 1, "identity")


def _mobilenet_v1(b: GraphBuilder):
    x = b.input(3, 224, 224)
    x = b.conv(x, 32, 3, stride=2, pad="same")
    blocks = ((64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2),
              (512, 1), (512, 1), (512, 1), (512, 1), (512, 1), (1024, 2),
              (1024, 1))
    for cout, s in blocks:
        x = b.depthwise(x, 3, stride=s, pad="same")
        x = b.conv(x, cout, 1, pad=0)
    x = b.gap(x)
    b.dense(x, 1000, "identity")


def _bottleneck(b: GraphBuilder, x, planes, stride, project):
    r = x
    a = b.conv(x, planes, 1, stride=stride, pad=0, act="relu")
    mid = b.conv(a, planes, 3, pad="same", act="relu")
    out = b.conv(mid, planes * 4, 1, pad=0, act="relu")
    if out == mid:  # builder stopped inside the block
        return out
    if project:
        r = b.conv(r, planes * 4, 1, stride=stride, pad=0, act="identity")
    b.shortcut(out, r, act="relu")
    return out


def _resnet(b: GraphBuilder, stage_blocks):
    x = b.input(3, 224, 224)
    x = b.conv(x, 64, 7, stride=2, pad="same")
    x = b.max_pool(x, 3, 2, pad=1)
    for planes, blocks, stride in stage_blocks:
        for i in range(blocks):
            x = _bottleneck(b, x, planes, stride if i == 0 else 1, i == 0)
    x = b.gap(x)
    b.dense(x, 1000, "identity")


def _resnet50(b):
    _resnet(b, ((64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)))


def _resnet101(b):
    _resnet(b, ((64, 3, 1), (128, 4, 2), (256, 23, 2), (512, 3, 2)))


def _darknet53(b: GraphBuilder):
    x = b.input(3, 256, 256)
    x = b.conv(x, 32, 3, pad="same")
    for cout, blocks in ((64, 1), (128, 2), (256, 8), (512, 8), (1024, 4)):
        x = b.conv(x, cout, 3, stride=2, pad="same")
        for _ in range(blocks):
            r = x
            a = b.conv(x, cout // 2, 1, pad=0)
            x = b.conv(a, cout, 3, pad="same")
            if x != a:
                b.shortcut(x, r)
    x = b.gap(x)
    b.dense(x, 1000, "identity")


_RECIPES = {
    "pilotnet": _pilotnet,
    "mobilenet_v1": _mobilenet_v1,
    "resnet50": _resnet50,
    "resnet101": _resnet101,
    "darknet53": _darknet53,
}


def build(name, seed=0) -> Graph:
    """Construct a benchmark network with seeded synthetic weights."""
    try:
        recipe = _RECIPES[name]
    except KeyError:
        raise UnknownNetwork(name) from None
    b = GraphBuilder(name, seed)
    recipe(b)
    return b.finish().validate()


def build_truncated(name, max_layers, max_channels, max_hw=None,
                    seed=0) -> Graph:
    """A desk-scale prefix: at most max_layers layers, channel counts clamped,
    and (optionally) the input resolution halved until it fits max_hw."""
    try:
        recipe = _RECIPES[name]
    except KeyError:
        raise UnknownNetwork(name) from None
    if max_layers < 1 or max_channels < 1:
        raise ValueError("limits must be >= 1")
    b = GraphBuilder(f"{name}[{max_layers}l,{max_channels}c]", seed,
                     max_layers=max_layers, max_channels=max_channels,
                     max_hw=max_hw)
    recipe(b)
    return b.finish().validate()
