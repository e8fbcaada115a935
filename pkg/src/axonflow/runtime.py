"""Event-driven functional execution of compiled programs.

A firing neuron walks its population's axons: per axon the coordinates are
upsample-shifted, offset, optionally filtered by hit detection, and emitted as
at most one event toward the destination core.  The destination decode loop
expands an event into weighted neuron updates, skipping out-of-range and
stride-removed positions; the surviving coordinates are downshifted into the
physical fragment.  Execution is layer-synchronous: all events into a feature
map are drained before it fires, which is equivalent to any dataflow order
because integer update rules commute.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AccumulatorOverflow, DeadlockDetected, MalformedEvent
from .compiler.pipeline import Program
from .oracle import output_ids

ACC_MIN = np.iinfo(np.int64).min
ACC_LIMIT = 2 ** 62


@dataclass
class Event:
    """One message between populations (core-to-core on the mesh)."""

    dst_core: tuple
    pop_id: int
    x_min: int
    y_min: int
    c_src: int
    value: int


@dataclass
class CoreStats:
    sent: int = 0
    received: int = 0
    hit_dropped: int = 0


@dataclass
class LayerStats:
    events_in: int = 0
    events_out: int = 0
    fired_neurons: int = 0
    updates_visited: int = 0
    updates_applied: int = 0


@dataclass
class RunStats:
    cores: dict = field(default_factory=dict)
    layers: dict = field(default_factory=dict)

    def core(self, xy) -> CoreStats:
        return self.cores.setdefault(tuple(xy), CoreStats())

    def layer(self, fm) -> LayerStats:
        return self.layers.setdefault(fm, LayerStats())

    @property
    def events_sent(self):
        return sum(c.sent for c in self.cores.values())

    @property
    def events_dropped(self):
        return sum(c.hit_dropped for c in self.cores.values())

    @property
    def updates_applied(self):
        return sum(l.updates_applied for l in self.layers.values())

    def to_json(self):
        return {
            "events_sent": self.events_sent,
            "events_dropped": self.events_dropped,
            "updates_applied": self.updates_applied,
            "cores": {f"{x},{y}": vars(c)
                      for (x, y), c in sorted(self.cores.items())},
            "layers": {fm: vars(l) for fm, l in self.layers.items()},
        }


def update_neuron(acc, weight, value, rule):
    """Scalar neuron update; the vectorized decode path applies the same rule
    elementwise.  ``max`` keeps the raw value; zero weights never reach here."""
    if rule == "accumulate" or rule == "multiply":
        return acc + weight * value
    if rule == "max":
        return value if acc == ACC_MIN else max(acc, value)
    raise ValueError(f"unknown update rule {rule!r}")


class Machine:
    """Simulator state for one compiled, placed program."""

    def __init__(self, program: Program, hit_detection=True):
        assert program.placed, "simulation needs a placed program"
        self.program = program
        self.hit_detection = hit_detection
        self.mode = program.mode
        self.pops = program.populations
        self.pop_at = {(p.core, p.pop_id): p for p in self.pops}
        self.stats = RunStats()
        self.update_hook = None  # callable(pop, stride1_xs, stride1_ys, sl)
        self.queues = {p.idx: [] for p in self.pops}
        self.acc = {}
        self.aux = {}
        self.prev_out = {}
        for p in self.pops:
            self._reset_state(p)
            if self.mode == "sigma_delta":
                self.prev_out[p.idx] = np.zeros(
                    (p.frag.d, p.frag.w, p.frag.h), dtype=np.int64)

    def _reset_state(self, pop):
        shape = (pop.frag.d, pop.frag.w, pop.frag.h)
        if pop.combine == "product":
            self.aux[pop.idx] = [np.zeros(shape, dtype=np.int64),
                                 np.zeros(shape, dtype=np.int64)]
            self.acc[pop.idx] = None
        elif pop.has_max:
            self.acc[pop.idx] = np.full(shape, ACC_MIN, dtype=np.int64)
        else:
            self.acc[pop.idx] = np.zeros(shape, dtype=np.int64)

    # --- source side ---------------------------------------------------------

    def scu_fire(self, pop, c, x, y, value):
        """Emit at most one event per axon of the firing neuron's population."""
        if value == 0:
            raise ValueError("zero-valued firings are never sent")
        src_stats = self.stats.core(pop.core)
        lstats = self.stats.layer(pop.fm)
        emitted = 0
        for ax in pop.axons:
            x_min = (x << ax.us) + ax.x_off
            y_min = (y << ax.us) + ax.y_off
            if self.hit_detection:
                wlim, hlim = 8 * ax.w8, 8 * ax.h8
                if not (x_min < wlim and x_min + ax.kw > 0
                        and y_min < hlim and y_min + ax.kh > 0):
                    src_stats.hit_dropped += 1
                    continue
            dst_core = (pop.core[0] + ax.core_dx, pop.core[1] + ax.core_dy)
            dst = self.pop_at[(dst_core, ax.pop_id)]
            self.queues[dst.idx].append(
                Event(dst_core, ax.pop_id, x_min, y_min, c + ax.c_off, value))
            src_stats.sent += 1
            lstats.events_out += 1
            emitted += 1
        return emitted

    # --- destination side ------------------------------------------------------

    def psl_process(self, pop, event: Event):
        """Expand one event into kernel-window neuron updates."""
        self.stats.core(pop.core).received += 1
        lstats = self.stats.layer(pop.fm)
        lstats.events_in += 1
        if not 0 <= event.c_src < len(pop.kd_entries):
            raise MalformedEvent(
                f"c_src {event.c_src} outside decode table of {pop.fm}")
        e = pop.kd_entries[event.c_src]
        if e.kd == 0:
            return 0
        step = 1 << e.sl
        w_lim = pop.frag.w << e.sl
        h_lim = pop.frag.h << e.sl
        xs = event.x_min + np.arange(e.kw)
        keep_x = (xs >= 0) & (xs < w_lim) & (xs % step == 0)
        if not keep_x.any():
            return 0
        ys = event.y_min + np.arange(e.kh)
        keep_y = (ys >= 0) & (ys < h_lim) & (ys % step == 0)
        if not keep_y.any():
            return 0
        dxs = np.nonzero(keep_x)[0]
        dys = np.nonzero(keep_y)[0]
        xt = xs[dxs] >> e.sl
        yt = ys[dys] >> e.sl
        if self.update_hook is not None:
            self.update_hook(pop, xs[dxs], ys[dys], e.sl)
        wsel = e.weights[:, dxs][:, :, dys]
        lstats.updates_visited += wsel.size
        applied = int(np.count_nonzero(wsel))
        lstats.updates_applied += applied
        sel = np.ix_(range(e.dst_base, e.dst_base + e.kd), xt, yt)
        rule = e.update_rule
        if rule == 0:
            self.acc[pop.idx][sel] += np.multiply(
                wsel, event.value, dtype=np.int64)
        elif rule == 1:
            cand = np.where(wsel != 0, event.value, ACC_MIN)
            self.acc[pop.idx][sel] = np.maximum(self.acc[pop.idx][sel], cand)
        else:
            self.aux[pop.idx][rule - 2][sel] += np.multiply(
                wsel, event.value, dtype=np.int64)
        return applied

    # --- firing ------------------------------------------------------------------

    def _quantize(self, pop, pre):
        t = pre + pop.bias[:, None, None]
        if np.abs(t).max(initial=0) > ACC_LIMIT:
            raise AccumulatorOverflow(f"potential out of range in {pop.fm}")
        if pop.divisor != 1:
            neg = t < 0
            t = np.where(neg, -((-t) // pop.divisor), t // pop.divisor)
        if pop.activation == "relu":
            t = np.where(t < 0, 0, t)
        np.clip(t, -128, 127, out=t)
        return t

    def _potential(self, pop):
        if pop.combine == "product":
            return self.aux[pop.idx][0] * self.aux[pop.idx][1]
        if pop.has_max:
            acc = self.acc[pop.idx]
            return np.where(acc == ACC_MIN, 0, acc)
        return self.acc[pop.idx]

    def fire_population(self, pop):
        """Quantize the accumulated potential and emit one firing per neuron
        with a non-zero output (standard) or output delta (sigma-delta)."""
        out = self._quantize(pop, self._potential(pop))
        if self.mode == "sigma_delta":
            fire_vals = out - self.prev_out[pop.idx]
            self.prev_out[pop.idx] = out
        else:
            fire_vals = out
            self._reset_state(pop)
        self._emit(pop, fire_vals)
        return out

    def _emit(self, pop, fire_vals):
        lstats = self.stats.layer(pop.fm)
        for c, x, y in zip(*np.nonzero(fire_vals)):
            lstats.fired_neurons += 1
            self.scu_fire(pop, int(c), int(x), int(y), int(fire_vals[c, x, y]))

    def _inject(self, pop, values):
        box = pop.frag
        vals = values[box.c0:box.c0 + box.d, box.x0:box.x0 + box.w,
                      box.y0:box.y0 + box.h]
        if self.mode == "sigma_delta":
            fire_vals = vals - self.prev_out[pop.idx]
            self.prev_out[pop.idx] = vals.copy()
        else:
            fire_vals = vals
        self._emit(pop, fire_vals)
        return vals

    # --- frame loop -----------------------------------------------------------------

    def run_frame(self, inputs, shuffle_seed=None):
        """Process one frame; returns output feature maps assembled from
        their fragments."""
        graph = self.program.graph
        rng = (np.random.default_rng(shuffle_seed)
               if shuffle_seed is not None else None)
        fm_values = {}
        for fm_id in graph.topo_order():
            fm = graph.fm(fm_id)
            pops = self.program.pops_of(fm_id)
            full = np.zeros(fm.shape, dtype=np.int64)
            if fm.role == "input":
                arr = np.asarray(inputs[fm_id], dtype=np.int64)
                if arr.shape != fm.shape:
                    raise ValueError(
                        f"input {fm_id}: shape {arr.shape} != {fm.shape}")
                for pop in pops:
                    self._inject(pop, arr)
                full = arr
            else:
                for pop in pops:
                    events = self.queues[pop.idx]
                    self.queues[pop.idx] = []
                    if rng is not None and len(events) > 1:
                        events = [events[i] for i in rng.permutation(len(events))]
                    for ev in events:
                        self.psl_process(pop, ev)
                    out = self.fire_population(pop)
                    b = pop.frag
                    full[b.c0:b.c0 + b.d, b.x0:b.x0 + b.w,
                         b.y0:b.y0 + b.h] = out
            fm_values[fm_id] = full
        stuck = sum(len(q) for q in self.queues.values())
        if stuck:
            raise DeadlockDetected(f"{stuck} undelivered events after frame")
        return {fid: fm_values[fid] for fid in output_ids(graph)}


def run_frame(program: Program, inputs, hit_detection=True, shuffle_seed=None):
    """One-shot standard-mode frame: outputs plus statistics."""
    m = Machine(program, hit_detection=hit_detection)
    outs = m.run_frame(inputs, shuffle_seed=shuffle_seed)
    return outs, m.stats


def run_sequence(program: Program, frames, hit_detection=True):
    """Run a frame sequence on one persistent machine; returns per-frame
    outputs and per-frame statistics snapshots."""
    m = Machine(program, hit_detection=hit_detection)
    outputs, stats = [], []
    for inputs in frames:
        before = m.stats.events_sent
        outputs.append(m.run_frame(inputs))
        stats.append({"events_sent": m.stats.events_sent - before})
    return outputs, stats, m.stats
