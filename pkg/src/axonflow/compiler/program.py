"""Populations, kernel-descriptor tables, and axons over a fragmented graph.

Each destination population owns one kernel-descriptor table indexed by the
event's source-channel field.  The table is a concatenation of per-connection
blocks; the axon channel offset is chosen so that a firing neuron's local
channel lands on its block slot.  For the single-connection, uncut case this
reduces to the plain fragment channel start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import OffsetOverflow
from ..lowering import ConvSpec

RULE_CODES = {"accumulate": 0, "max": 1}


def rule_code(spec: ConvSpec):
    if spec.update_rule == "multiply":
        return 2 + spec.mult_slot
    return RULE_CODES[spec.update_rule]


@dataclass
class KdEntry:
    """One kernel-descriptor slot of a population's decode table."""

    slot: int
    spec_idx: int
    kd: int
    kw: int
    kh: int
    sl: int
    update_rule: int
    scale_log: int
    dst_base: int              # population-local first updated channel
    weights: np.ndarray = None  # (kd, kw, kh); None when kd == 0

    @property
    def weight_words(self):
        return math.ceil(self.kd * self.kw * self.kh / 8)


@dataclass
class AxonRecord:
    """Unpacked axon: one per connected (source, destination) fragment pair."""

    spec_idx: int
    src_pop: int
    dst_pop: int
    x_off: int
    y_off: int
    c_off: int
    w8: int
    h8: int
    kw: int
    kh: int
    us: int
    core_dx: int = 0
    core_dy: int = 0
    pop_id: int = 0


@dataclass
class Population:
    """A fragment with its resident tables, ready for placement."""

    idx: int
    fm: str
    frag: object
    sl: int
    activation: str
    divisor: int
    combine: str
    has_max: bool
    neuron_type: int
    bias: np.ndarray
    kd_entries: list = field(default_factory=list)
    blocks: dict = field(default_factory=dict)  # spec_idx -> (base, size, window)
    axons: list = field(default_factory=list)
    core: tuple = None
    pop_id: int = None

    @property
    def has_inputs(self):
        return bool(self.blocks)

    @property
    def state_words(self):
        return math.ceil(self.frag.neurons / 4)  # 16-bit states, 4 per word

    @property
    def weight_words(self):
        w = sum(e.weight_words for e in self.kd_entries)
        if self.has_inputs:
            w += math.ceil((self.frag.d + 2) / 8)  # bias bytes + divisor
        return w

    @property
    def words(self):
        """Resident 64-bit words: descriptor, axons, decode table, weights,
        states."""
        return (1 + len(self.axons) + len(self.kd_entries)
                + self.weight_words + self.state_words)


def _scale_log(divisor):
    if divisor >= 1 and (divisor & (divisor - 1)) == 0:
        return min(15, divisor.bit_length() - 1)
    return 0


def _dw_block_window(spec: ConvSpec, frag, src_grid):
    """Depthwise table block: the union of the channel windows of every
    source fragment that can send events to this fragment.

    Slots outside a fragment's own mapped channel range decode to zero
    destination channels; the union keeps the table as small as the source
    cut pattern allows while every arriving channel still has a slot."""
    lo = max(spec.dst_base, frag.c0)
    hi = min(spec.dst_base + spec.d_dst, frag.c0 + frag.d)
    if hi <= lo:
        return None
    starts, ends = [], []
    for c0, d in src_grid.c_bounds:
        m_lo = max(c0, spec.src_base)
        m_hi = min(c0 + d, spec.src_base + spec.d_src)
        if m_hi <= m_lo:
            continue  # channels outside this connection
        mapped_lo = m_lo - spec.src_base + spec.dst_base
        mapped_hi = m_hi - spec.src_base + spec.dst_base
        if mapped_hi <= frag.c0 or mapped_lo >= frag.c0 + frag.d:
            continue  # cannot reach this fragment
        starts.append(m_lo)
        ends.append(m_hi)
    if not starts:
        return None
    wstart = min(starts)
    return (wstart, max(ends) - wstart)


def build_populations(graph, specs, dst_attrs, grids, mode="standard"):
    """Construct populations with their decode tables for all fragments."""
    pops = []
    pop_index = {}
    in_specs_of = {}
    for i, s in enumerate(specs):
        in_specs_of.setdefault(s.dst, []).append((i, s))

    neuron_type = 1 if mode == "sigma_delta" else 0
    for fm_id in graph.topo_order():
        grid = grids[fm_id]
        attrs = dst_attrs[fm_id]
        in_specs = in_specs_of.get(fm_id, [])
        sl_in = in_specs[0][1].sl if in_specs else 0
        has_max = any(s.update_rule == "max" for _, s in in_specs)
        for frag in grid.fragments:
            bias = np.zeros(frag.d, dtype=np.int64)
            pop = Population(
                idx=len(pops), fm=fm_id, frag=frag, sl=sl_in,
                activation=attrs.activation, divisor=attrs.divisor,
                combine=attrs.combine, has_max=has_max,
                neuron_type=neuron_type, bias=bias)
            slog = _scale_log(attrs.divisor)
            slot = 0
            for spec_idx, s in in_specs:
                if s.channel_map == "full":
                    lo = max(s.dst_base, frag.c0)
                    hi = min(s.dst_base + s.d_dst, frag.c0 + frag.d)
                    if hi <= lo:
                        continue
                    pop.blocks[spec_idx] = (slot, s.d_src, s.src_base)
                    kdw = hi - lo
                    bias[lo - frag.c0:hi - frag.c0] += \
                        s.biases[lo - s.dst_base:hi - s.dst_base]
                    for ci in range(s.d_src):
                        w = s.weights[lo - s.dst_base:hi - s.dst_base, :, :, ci]
                        pop.kd_entries.append(KdEntry(
                            slot, spec_idx, kdw, s.kw, s.kh, s.sl,
                            rule_code(s), slog, lo - frag.c0, w))
                        slot += 1
                else:  # depthwise
                    win = _dw_block_window(s, frag, grids[s.src])
                    if win is None:
                        continue
                    wstart, wsize = win
                    lo = max(s.dst_base, frag.c0)
                    hi = min(s.dst_base + s.d_dst, frag.c0 + frag.d)
                    bias[lo - frag.c0:hi - frag.c0] += \
                        s.biases[lo - s.dst_base:hi - s.dst_base]
                    pop.blocks[spec_idx] = (slot, wsize, wstart)
                    for ci in range(wsize):
                        g = wstart + ci  # source channel of this slot
                        cd = g - s.src_base + s.dst_base
                        if frag.c0 <= cd < frag.c0 + frag.d:
                            w = s.weights[g - s.src_base][None]
                            pop.kd_entries.append(KdEntry(
                                slot, spec_idx, 1, s.kw, s.kh, s.sl,
                                rule_code(s), slog, cd - frag.c0, w))
                        else:
                            pop.kd_entries.append(KdEntry(
                                slot, spec_idx, 0, s.kw, s.kh, s.sl,
                                rule_code(s), slog, 0, None))
                        slot += 1
            pops.append(pop)
            pop_index[(fm_id, frag.index)] = pop
    return pops, pop_index


def _axis_overlap(spec: ConvSpec, axis, src_bounds, dst_bounds, dst_len):
    """Boolean matrix: does any synapse connect source part i to dest part j
    along one axis, honoring bounds, upsampling, and stride survival."""
    k = spec.kw if axis == "x" else spec.kh
    pad = spec.xp if axis == "x" else spec.yp
    off = -k + pad + 1
    step = 1 << spec.sl
    stretch = dst_len << spec.sl
    mat = np.zeros((len(src_bounds), len(dst_bounds)), dtype=bool)
    taps = np.arange(k)
    for i, (a0, alen) in enumerate(src_bounds):
        p = (((a0 + np.arange(alen)) << spec.us)[:, None] + off + taps).ravel()
        p = p[(p >= 0) & (p < stretch) & (p % step == 0)]
        if p.size == 0:
            continue
        hit = np.zeros(stretch + 1, dtype=np.int64)
        hit[p] = 1
        cum = np.cumsum(hit)
        for j, (b0, blen) in enumerate(dst_bounds):
            lo, hi = b0 << spec.sl, min((b0 + blen) << spec.sl, stretch)
            mat[i, j] = (cum[hi - 1] - (cum[lo - 1] if lo else 0)) > 0
    return mat


def _channel_connected(spec: ConvSpec, f_src, f_dst):
    if spec.channel_map == "full":
        s_ok = (f_src.c0 < spec.src_base + spec.d_src
                and f_src.c0 + f_src.d > spec.src_base)
        d_ok = (f_dst.c0 < spec.dst_base + spec.d_dst
                and f_dst.c0 + f_dst.d > spec.dst_base)
        return s_ok and d_ok
    m_lo = max(f_src.c0, spec.src_base)
    m_hi = min(f_src.c0 + f_src.d, spec.src_base + spec.d_src)
    if m_hi <= m_lo:
        return False
    lo = m_lo - spec.src_base + spec.dst_base
    hi = m_hi - spec.src_base + spec.dst_base
    return lo < f_dst.c0 + f_dst.d and hi > f_dst.c0


def build_axons(graph, specs, grids, pops, pop_index):
    """Emit exactly one axon per connected fragment pair per connection."""
    for pop in pops:
        pop.axons.clear()
    for spec_idx, s in enumerate(specs):
        src_grid, dst_grid = grids[s.src], grids[s.dst]
        dst_fm = graph.fm(s.dst)
        ox = _axis_overlap(s, "x", src_grid.x_bounds, dst_grid.x_bounds,
                           dst_fm.width)
        oy = _axis_overlap(s, "y", src_grid.y_bounds, dst_grid.y_bounds,
                           dst_fm.height)
        for f_src in src_grid.fragments:
            src_pop = pop_index[(s.src, f_src.index)]
            for f_dst in dst_grid.fragments:
                if not ox[f_src.index[1], f_dst.index[1]]:
                    continue
                if not oy[f_src.index[2], f_dst.index[2]]:
                    continue
                if not _channel_connected(s, f_src, f_dst):
                    continue
                dst_pop = pop_index[(s.dst, f_dst.index)]
                base, size, window = dst_pop.blocks[spec_idx]
                c_off = base + f_src.c0 - window
                # source fragments never straddle a decode-table block: the
                # fragmenter cuts source maps at every connection window
                assert (window <= f_src.c0
                        and f_src.c0 + f_src.d <= window + size), \
                    "source fragment outside its decode-table block"
                x_off = ((f_src.x0 << s.us) - s.kw + s.xp + 1
                         - (f_dst.x0 << s.sl))
                y_off = ((f_src.y0 << s.us) - s.kh + s.yp + 1
                         - (f_dst.y0 << s.sl))
                if abs(x_off) >= 256:
                    raise OffsetOverflow("x", x_off)
                if abs(y_off) >= 256:
                    raise OffsetOverflow("y", y_off)
                src_pop.axons.append(AxonRecord(
                    spec_idx, src_pop.idx, dst_pop.idx, x_off, y_off, c_off,
                    w8=math.ceil((f_dst.w << s.sl) / 8),
                    h8=math.ceil((f_dst.h << s.sl) / 8),
                    kw=s.kw, kh=s.kh, us=s.us))
    for pop in pops:
        pop.axons.sort(key=lambda a: (a.spec_idx, a.dst_pop))
