"""End-to-end compilation: normalize, fragment under budget, place, wire axons.

Fragment sizing and the memory analyzer share the population word accounting,
so budget decisions and reported footprints agree by construction.  Placement
is optional: footprint analysis of networks far larger than one mesh only
needs the fragmented program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import GraphValidationError, Unmappable, UnsupportedLayer
from ..graph import Graph, GraphIssue
from ..lowering import Lowered, lower, normalize_specs
from .fragment import make_grid
from .placement import place
from .program import build_axons, build_populations

WORD_BYTES = 8
DEFAULT_BUDGET = 262144  # 256 KiB per core
DEFAULT_MESH = (12, 12)


@dataclass
class Program:
    """A compiled graph: fragments, populations, axons, optional placement."""

    lowered: Lowered
    specs: list
    grids: dict
    populations: list
    pop_index: dict
    budget: int
    mesh: tuple
    mode: str
    placed: bool = False
    cores: dict = field(default_factory=dict)

    @property
    def graph(self) -> Graph:
        return self.lowered.graph

    @property
    def budget_words(self):
        return self.budget // WORD_BYTES

    def pops_of(self, fm_id):
        return [p for p in self.populations if p.fm == fm_id]

    def fragments_of(self, fm_id):
        return self.grids[fm_id].fragments

    def axon_count(self):
        return sum(len(p.axons) for p in self.populations)

    def kd_count(self):
        return sum(len(p.kd_entries) for p in self.populations)

    def core_words(self):
        """Occupied words per core (placed programs only)."""
        assert self.placed, "program was compiled without placement"
        return {core: sum(p.words for p in pops)
                for core, pops in self.cores.items()}


def _check_uniform_stride(specs):
    sl_of = {}
    for s in specs:
        prev = sl_of.setdefault(s.dst, s.sl)
        if prev != s.sl:
            raise GraphValidationError([GraphIssue(
                "MixedStride",
                f"{s.dst}: connections with stride logs {prev} and {s.sl}; "
                "population geometry requires one stride per destination")])
    return sl_of


def _mandatory_channel_cuts(graph, specs):
    """Source feature maps must be cut at every out-connection channel window
    so a fragment's channel range never straddles two decode-table blocks."""
    cuts = {fm: set() for fm in graph.feature_maps}
    for s in specs:
        cuts[s.src].update((s.src_base, s.src_base + s.d_src))
    return cuts


def _bump(fm, counts, ratio, budget):
    nc, nx, ny = counts
    if nc < fm.depth:
        return (min(fm.depth, max(nc + 1, math.ceil(nc * ratio))), nx, ny)
    max_ny = math.ceil(fm.height / 8)
    if ny < max_ny:
        return (nc, nx, min(max_ny, max(ny + 1, math.ceil(ny * ratio))))
    max_nx = math.ceil(fm.width / 8)
    if nx < max_nx:
        return (nc, min(max_nx, max(nx + 1, math.ceil(nx * ratio))), ny)
    raise Unmappable(fm.id, ratio * budget, budget)


def compile_graph(source, budget=DEFAULT_BUDGET, mesh=DEFAULT_MESH,
                  mode="standard", do_place=True, force_cuts=None) -> Program:
    """Compile a graph (or an already lowered graph) into a Program.

    ``force_cuts`` maps feature-map ids to minimum (channel, x, y) part
    counts; the budget can only increase them.  With ``do_place=False`` the
    program carries no core assignment and cannot be simulated, but all
    memory accounting is final.
    """
    lowered = source if isinstance(source, Lowered) else lower(source)
    graph = lowered.graph
    if mode not in ("standard", "sigma_delta"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sigma_delta":
        for s in lowered.specs:
            if s.update_rule in ("max", "multiply"):
                raise UnsupportedLayer(
                    f"{s.update_rule} update rule in sigma-delta mode")

    specs = normalize_specs(lowered.specs)
    sl_of = _check_uniform_stride(specs)
    mandatory = _mandatory_channel_cuts(graph, specs)

    counts = {}
    for fm_id, fm in graph.feature_maps.items():
        counts[fm_id] = tuple((force_cuts or {}).get(fm_id, (1, 1, 1)))

    budget_words = budget // WORD_BYTES
    pops = pop_index = grids = None
    for _ in range(200):
        grids = {fm_id: make_grid(fm, counts[fm_id], mandatory[fm_id],
                                  sl_of.get(fm_id, 0))
                 for fm_id, fm in graph.feature_maps.items()}
        pops, pop_index = build_populations(
            graph, specs, lowered.dst_attrs, grids, mode)
        build_axons(graph, specs, grids, pops, pop_index)
        over = {}
        for p in pops:
            if p.words > budget_words:
                r = p.words / budget_words
                over[p.fm] = max(over.get(p.fm, 0.0), r)
        if not over:
            break
        for fm_id, ratio in over.items():
            counts[fm_id] = _bump(graph.fm(fm_id), counts[fm_id], ratio,
                                  budget)
    else:
        raise Unmappable(max(over, key=over.get), None, budget)

    program = Program(lowered, specs, grids, pops, pop_index,
                      budget, tuple(mesh) if mesh else None, mode)
    if do_place:
        if not mesh:
            raise ValueError("placement requires a mesh")
        program.cores = place(pops, tuple(mesh), budget_words)
        program.placed = True
    return program
