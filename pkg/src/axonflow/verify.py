"""Randomized equivalence harness: event-driven execution versus the dense
reference, over every supported layer kind, random fragmentations (including
adversarial X/Y cuts), strides, upsampling factors, and both hit-detection
settings."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .build import GraphBuilder
from .compiler import compile_graph
from .graph import Graph
from .lowering import lower
from .oracle import dense_oracle
from .runtime import Machine

CASE_KINDS = (
    "conv", "deconv", "depthwise_conv", "grouped_conv", "dilated_conv",
    "avg_pool", "max_pool", "global_avg_pool", "dense", "flatten_dense",
    "upsample_nearest", "upsample_bilinear", "add", "multiply", "concat",
    "split",
)

SD_KINDS = tuple(k for k in CASE_KINDS if k not in ("max_pool", "multiply"))

CASE_MESH = (6, 6)


@dataclass
class Case:
    seed: int
    kind: str
    graph: Graph
    force_cuts: dict
    hit_detection: bool

    def make_frames(self, n, density=0.6):
        rng = np.random.default_rng((self.seed, 99))
        frames = []
        for _ in range(n):
            frame = {}
            for fm in self.graph.feature_maps.values():
                if fm.role != "input":
                    continue
                vals = rng.integers(-100, 101, size=fm.shape)
                vals[rng.random(fm.shape) >= density] = 0
                frame[fm.id] = vals
            frames.append(frame)
        return frames


def _rand_act(rng):
    return "relu" if rng.random() < 0.6 else "identity"


def _case_graph(kind, rng, seed, force_stride=None):
    b = GraphBuilder(f"case{seed}-{kind}", (seed, 7))
    act = _rand_act(rng)
    stride = force_stride or int(rng.choice((1, 2)))
    if kind == "dense":
        x = b.input(int(rng.integers(2, 13)), 1, 1)
        x = b.dense(x, int(rng.integers(1, 9)), act)
    elif kind == "grouped_conv":
        gs = int(rng.choice((1, 2)))
        groups = int(rng.integers(1, 3))
        x = b.input(gs * groups, int(rng.integers(5, 13)),
                    int(rng.integers(5, 13)))
        x = b.grouped(x, groups * int(rng.integers(1, 3)),
                      int(rng.integers(1, 4)), gs, stride=stride, act=act)
    elif kind == "dilated_conv":
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(6, 13)),
                    int(rng.integers(6, 13)))
        x = b.dilated(x, int(rng.integers(1, 4)), int(rng.integers(2, 4)),
                      rate=2, pad=int(rng.integers(1, 3)), act=act)
    elif kind in ("add", "multiply"):
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(4, 11)),
                    int(rng.integers(4, 11)))
        lhs = b.conv(x, 2, 3, pad="same", act="relu")
        rhs = b.conv(x, 2, 3, pad="same", act="relu")
        x = (b.add([lhs, rhs], act) if kind == "add"
             else b.multiply(lhs, rhs, act))
    elif kind == "concat":
        x = b.input(int(rng.integers(1, 3)), int(rng.integers(4, 11)),
                    int(rng.integers(4, 11)))
        lhs = b.conv(x, int(rng.integers(1, 4)), 1, act="relu")
        rhs = b.conv(x, int(rng.integers(1, 4)), 3, pad="same",
                     act="identity")
        x = b.concat([lhs, rhs], act)
    elif kind == "split":
        d = int(rng.integers(2, 7))
        x = b.input(d, int(rng.integers(4, 11)), int(rng.integers(4, 11)))
        cut = int(rng.integers(1, d))
        parts = b.split(x, (cut, d - cut), act)
        x = b.conv(parts[0], 2, 3, pad="same", act="relu")
    elif kind == "deconv":
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(3, 7)),
                    int(rng.integers(3, 7)))
        k = int(rng.integers(2, 5))
        x = b.deconv(x, int(rng.integers(1, 4)), k,
                     upsample=int(rng.choice((2, 4))),
                     pad=(int(rng.integers(0, k)), int(rng.integers(0, k))),
                     act=act)
    elif kind == "depthwise_conv":
        x = b.input(int(rng.integers(1, 5)), int(rng.integers(5, 13)),
                    int(rng.integers(5, 13)))
        x = b.depthwise(x, int(rng.integers(1, 4)), stride=stride,
                        pad=int(rng.integers(0, 2)), act=act)
    elif kind == "avg_pool":
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(6, 13)),
                    int(rng.integers(6, 13)))
        x = b.avg_pool(x, int(rng.choice((2, 3))), stride, act=act)
    elif kind == "max_pool":
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(6, 13)),
                    int(rng.integers(6, 13)))
        x = b.max_pool(x, 2, stride, act=act)
    elif kind == "global_avg_pool":
        x = b.input(int(rng.integers(1, 5)), int(rng.integers(2, 11)),
                    int(rng.integers(2, 11)))
        x = b.gap(x)
    elif kind == "upsample_nearest":
        f = int(rng.choice((2, 4, 8)))
        lim = 12 if f == 2 else (6 if f == 4 else 4)
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(2, lim)),
                    int(rng.integers(2, lim)))
        x = b.upsample_nearest(x, f, act)
    elif kind == "upsample_bilinear":
        f = int(rng.choice((2, 4)))
        lim = 10 if f == 2 else 5
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(2, lim)),
                    int(rng.integers(2, lim)))
        x = b.upsample_bilinear(x, f, act)
    else:  # conv
        x = b.input(int(rng.integers(1, 4)), int(rng.integers(4, 13)),
                    int(rng.integers(4, 13)))
        x = b.conv(x, int(rng.integers(1, 5)), int(rng.integers(1, 4)),
                   stride=stride, pad=int(rng.integers(0, 3)), act=act,
                   upsample=int(rng.choice((1, 2))))
    # sometimes chain a plain convolution behind the kind under test
    if rng.random() < 0.4 and kind not in ("upsample_nearest",
                                           "upsample_bilinear"):
        b.conv(x, 2, 3, stride=int(rng.choice((1, 2))), pad="same",
               act="relu")
    if not b.graph.layers:
        b.conv(x, 1, 1, act="identity")
    return b.finish()


def _random_cuts(graph, rng):
    cuts = {}
    for fm in graph.feature_maps.values():
        nc = int(rng.integers(1, min(3, fm.depth) + 1))
        nx = int(rng.integers(1, 3)) if fm.width >= 9 else 1
        ny = int(rng.integers(1, 3)) if fm.height >= 9 else 1
        cuts[fm.id] = (nc, nx, ny)
    return cuts


def random_case(seed, kinds=CASE_KINDS, force_stride=None) -> Case:
    """Deterministic randomized test case for one seed."""
    rng = np.random.default_rng((seed, 11))
    kind = kinds[seed % len(kinds)]
    graph = _case_graph(kind, rng, seed, force_stride=force_stride)
    graph.validate()
    return Case(seed, kind, graph, _random_cuts(graph, rng),
                hit_detection=bool(seed % 2))


def first_mismatch(want, got):
    """First differing (feature map, channel, x, y) with both values, or
    None when the tensors agree everywhere."""
    for fm_id in want:
        if not np.array_equal(want[fm_id], got[fm_id]):
            c, x, y = [int(v) for v in
                       np.argwhere(want[fm_id] != got[fm_id])[0]]
            return {"fm": fm_id, "c": c, "x": x, "y": y,
                    "got": int(got[fm_id][c, x, y]),
                    "want": int(want[fm_id][c, x, y])}
    return None


def run_case(case: Case, mode="standard", frames=1):
    """Compile and execute one case against the dense reference.

    Returns (ok, detail): on mismatch, detail pinpoints the first differing
    (feature map, channel, x, y) with both values."""
    low = lower(case.graph)
    prog = compile_graph(low, mesh=CASE_MESH, mode=mode,
                         force_cuts=case.force_cuts)
    machine = Machine(prog, hit_detection=case.hit_detection)
    for t, frame in enumerate(case.make_frames(frames)):
        got = machine.run_frame(frame)
        want = dense_oracle(low, frame)
        diff = first_mismatch(want, got)
        if diff:
            return False, dict(diff, seed=case.seed, kind=case.kind, frame=t)
    return True, {"seed": case.seed, "kind": case.kind,
                  "events": machine.stats.events_sent}


def _worker(args):
    seed, mode, frames = args
    kinds = SD_KINDS if mode == "sigma_delta" else CASE_KINDS
    ok, detail = run_case(random_case(seed, kinds=kinds), mode=mode,
                          frames=frames)
    return ok, detail


def max_workers():
    return max(1, int(os.environ.get("AXONFLOW_THREADS", "1")))


def verify_batch(seeds, mode="standard", frames=1):
    """Run many cases, optionally across processes (AXONFLOW_THREADS)."""
    jobs = [(s, mode, frames) for s in seeds]
    workers = max_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=8))
    else:
        results = [_worker(j) for j in jobs]
    failures = [d for ok, d in results if not ok]
    return len(results), failures
