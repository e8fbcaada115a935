"""Memory-footprint models: the axon scheme versus flat and hierarchical LUTs.

All three schemes report bytes in three categories.  ``neurons`` charges one
persistent 16-bit state per neuron.  ``connectivity`` is what it costs to
know which neurons connect: descriptor words for the axon scheme, per-synapse
LUT entries for the baselines.  ``parameters`` holds the weights (shared per
population in the axon scheme, per synapse in the LUTs) plus per-channel
biases, charged uniformly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .counts import (
    count_neurons,
    count_synapses,
    fanout_counts,
    out_channels_per_src,
)
from .errors import MismatchedGraphs
from .lowering import Lowered
from .compiler.pipeline import Program

CATEGORIES = ("neurons", "connectivity", "parameters")


@dataclass
class BitWidthConfig:
    """Bit widths of the stored data types in each scheme."""

    state_bits: int = 16
    weight_bits: int = 8
    word_bits: int = 64
    flat_entry_bits: int = 23      # 8-bit core address + 15-bit neuron id
    hier_src_entry_bits: int = 23  # 8-bit core address + 15-bit tag
    hier_dst_entry_bits: int = 15
    hier_m: int = 1024             # neurons per core assumed by the best case


@dataclass
class MemReport:
    scheme: str
    graph_tag: str
    per_layer: dict                 # fm -> {category: bytes}
    per_core: dict = None           # core -> bytes (axon scheme, placed)
    extra: dict = field(default_factory=dict)

    @property
    def totals(self):
        out = {c: 0 for c in CATEGORIES}
        for row in self.per_layer.values():
            for c in CATEGORIES:
                out[c] += row[c]
        out["total"] = sum(out[c] for c in CATEGORIES)
        return out

    def to_json(self):
        doc = {
            "scheme": self.scheme,
            "graph": self.graph_tag,
            "totals": self.totals,
            "per_layer": self.per_layer,
        }
        if self.per_core is not None:
            doc["per_core"] = {f"{x},{y}": b
                               for (x, y), b in sorted(self.per_core.items())}
        if self.extra:
            doc["extra"] = self.extra
        return doc


def _tag(graph):
    _, total = count_neurons(graph)
    return f"{graph.name or 'graph'}/{len(graph.layers)}l/{total}n"


def _empty_rows(graph):
    return {fm_id: {c: 0 for c in CATEGORIES} for fm_id in graph.feature_maps}


def mem_proposed(program: Program, cfg: BitWidthConfig = None) -> MemReport:
    """Footprint of the compiled program; shares the compiler's per-population
    word accounting, so core budgets and this report cannot disagree."""
    cfg = cfg or BitWidthConfig()
    graph = program.graph
    rows = _empty_rows(graph)
    for pop in program.populations:
        rows[pop.fm]["neurons"] += pop.state_words * 8
        rows[pop.fm]["connectivity"] += (1 + len(pop.kd_entries)) * 8
        rows[pop.fm]["connectivity"] += len(pop.axons) * 8
        rows[pop.fm]["parameters"] += pop.weight_words * 8
    per_core = None
    if program.placed:
        per_core = {core: words * 8
                    for core, words in program.core_words().items()}
    return MemReport("proposed", _tag(graph), rows, per_core, extra={
        "axons": program.axon_count(),
        "kernel_descriptors": program.kd_count(),
        "population_descriptors": len(program.populations),
        "fragments": {fm: len(g.fragments) for fm, g in program.grids.items()},
    })


def _bias_bytes(graph, fm_id, lowered: Lowered):
    return graph.fm(fm_id).depth if lowered.in_specs(fm_id) else 0


def mem_flat_lut(lowered: Lowered, cfg: BitWidthConfig = None) -> MemReport:
    """Single-stage LUT: one (core, neuron id) entry and one stored weight per
    synapse.  Also reports the closed-form |N|*F*log2|N| and |N|*F*B figures."""
    cfg = cfg or BitWidthConfig()
    graph = lowered.graph
    rows = _empty_rows(graph)
    per_fm_neurons, n_total = count_neurons(graph)
    s_total = 0
    for fm_id, n in per_fm_neurons.items():
        rows[fm_id]["neurons"] = n * cfg.state_bits // 8
        rows[fm_id]["parameters"] += _bias_bytes(graph, fm_id, lowered)
    for spec in lowered.specs:
        s = count_synapses(graph, spec)
        s_total += s
        rows[spec.dst]["connectivity"] += math.ceil(s * cfg.flat_entry_bits / 8)
        rows[spec.dst]["parameters"] += math.ceil(s * cfg.weight_bits / 8)
    f_avg = s_total / n_total if n_total else 0.0
    return MemReport("flat_lut", _tag(graph), rows, extra={
        "synapses": s_total,
        "analytic_connectivity_bytes":
            int(n_total * f_avg * math.log2(max(2, n_total)) / 8),
        "analytic_parameter_bytes": int(n_total * f_avg * cfg.weight_bits / 8),
    })


def _source_entries(lowered: Lowered, fm_id, m):
    """Best-case first-stage entries: per source neuron, its outgoing synapses
    packed onto destination cores of m neurons each."""
    graph = lowered.graph
    fm = graph.fm(fm_id)
    outs = lowered.out_specs(fm_id)
    if not outs:
        return 0
    marks = {0, fm.depth}
    for s in outs:
        marks.update((s.src_base, s.src_base + s.d_src))
    bounds = sorted(b for b in marks if 0 <= b <= fm.depth)
    entries = 0
    for lo, hi in zip(bounds, bounds[1:]):
        if hi <= lo:
            continue
        fan = np.zeros((fm.width, fm.height), dtype=np.int64)
        for s in outs:
            if not (s.src_base <= lo and hi <= s.src_base + s.d_src):
                continue
            dst = graph.fm(s.dst)
            fx = fanout_counts(s, fm.width, dst.width, "x")
            fy = fanout_counts(s, fm.height, dst.height, "y")
            fan += out_channels_per_src(s) * np.outer(fx, fy)
        entries += (hi - lo) * int(np.sum((fan + m - 1) // m))
    return entries


def mem_hier_lut(lowered: Lowered, cfg: BitWidthConfig = None,
                 m: int = None) -> MemReport:
    """Two-stage LUT: per-core (address, tag) entries at the source and one
    tag-resolved neuron id per synapse at the destination."""
    cfg = cfg or BitWidthConfig()
    m = m or cfg.hier_m
    graph = lowered.graph
    rows = _empty_rows(graph)
    per_fm_neurons, _ = count_neurons(graph)
    s_total = 0
    for fm_id, n in per_fm_neurons.items():
        rows[fm_id]["neurons"] = n * cfg.state_bits // 8
        rows[fm_id]["parameters"] += _bias_bytes(graph, fm_id, lowered)
        src_entries = _source_entries(lowered, fm_id, m)
        rows[fm_id]["connectivity"] += math.ceil(
            src_entries * cfg.hier_src_entry_bits / 8)
    for spec in lowered.specs:
        s = count_synapses(graph, spec)
        s_total += s
        rows[spec.dst]["connectivity"] += math.ceil(
            s * cfg.hier_dst_entry_bits / 8)
        rows[spec.dst]["parameters"] += math.ceil(s * cfg.weight_bits / 8)
    return MemReport("hier_lut", _tag(graph), rows,
                     extra={"synapses": s_total, "m": m})


def compare(reports):
    """Per-category and total compression ratios of every report against the
    first one (the proposed scheme by convention)."""
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    tags = [r.graph_tag for r in reports]
    if len(set(tags)) != 1:
        raise MismatchedGraphs(tags)
    base = reports[0]
    bt = base.totals
    out = {"graph": base.graph_tag, "baseline_scheme": base.scheme,
           "ratios": {}}
    for other in reports[1:]:
        ot = other.totals
        out["ratios"][other.scheme] = {
            k: (ot[k] / bt[k] if bt[k] else float("inf"))
            for k in list(CATEGORIES) + ["total"]
        }
    return out


# --- rendering ---------------------------------------------------------------

def _human(nbytes):
    for unit, scale in (("GB", 1e9), ("MB", 1e6), ("kB", 1e3)):
        if nbytes >= scale:
            return f"{nbytes / scale:.2f} {unit}"
    return f"{nbytes} B"


def render_table(reports, ratios=None):
    """Aligned text table: one row per scheme, bracketed compression ratios
    against the first report when given."""
    lines = []
    head = f"{'scheme':<10} {'total':>14} {'neurons':>14} " \
           f"{'connectivity':>16} {'parameters':>14}"
    lines.append(head)
    lines.append("-" * len(head))
    for r in reports:
        t = r.totals
        cells = [_human(t["total"]), _human(t["neurons"]),
                 _human(t["connectivity"]), _human(t["parameters"])]
        if ratios and r.scheme in ratios.get("ratios", {}):
            rr = ratios["ratios"][r.scheme]
            cells = [f"{c} ({rr[k]:.0f}x)" for c, k in
                     zip(cells, ("total",) + CATEGORIES)]
        lines.append(f"{r.scheme:<10} " + " ".join(f"{c:>14}" for c in cells))
    return "\n".join(lines)


def reports_to_csv(reports):
    """One row per (network, scheme, category): the bar-chart export."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["network", "scheme", "category", "bytes"])
    for r in reports:
        t = r.totals
        for c in list(CATEGORIES) + ["total"]:
            w.writerow([r.graph_tag, r.scheme, c, t[c]])
    return buf.getvalue()


def reports_to_json(reports, ratios=None):
    doc = {"reports": [r.to_json() for r in reports]}
    if ratios:
        doc["comparison"] = ratios
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
