"""Greedy fragment-to-core placement on an XY mesh.

First fit in topological order over cores visited in a boustrophedon scan, so
consecutive layers land on physically adjacent cores and relative addresses
stay inside their 4-bit reach.  Placement is memory-driven only.
"""

from __future__ import annotations

from ..errors import CoreOutOfReach, PlacementFailed

REACH_MIN, REACH_MAX = -8, 7
MAX_POPS_PER_CORE = 8


def snake_order(mesh):
    mw, mh = mesh
    for y in range(mh):
        xs = range(mw) if y % 2 == 0 else range(mw - 1, -1, -1)
        for x in xs:
            yield (x, y)


def _in_reach(a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    return (REACH_MIN <= dx <= REACH_MAX) and (REACH_MIN <= dy <= REACH_MAX)


def place(pops, mesh, budget_words):
    """Assign cores and population ids; fills in axon core deltas.

    Raises PlacementFailed when no core can take a fragment, and
    CoreOutOfReach if a finished placement still violates the relative
    address range (cannot happen for placements this routine produced, but
    the check keeps externally patched placements honest).
    """
    order = list(snake_order(mesh))
    fill = {c: 0 for c in order}
    members = {c: [] for c in order}

    neighbors = {p.idx: set() for p in pops}
    for p in pops:
        for ax in p.axons:
            neighbors[p.idx].add(ax.dst_pop)
            neighbors[ax.dst_pop].add(p.idx)

    by_idx = {p.idx: p for p in pops}
    for pop in pops:
        need = pop.words
        placed = False
        for core in order:
            if fill[core] + need > budget_words:
                continue
            if len(members[core]) >= MAX_POPS_PER_CORE:
                continue
            anchored = [by_idx[n] for n in neighbors[pop.idx]
                        if by_idx[n].core is not None]
            if any(not _in_reach(a.core, core) for a in anchored):
                continue
            pop.core = core
            pop.pop_id = len(members[core])
            members[core].append(pop)
            fill[core] += need
            placed = True
            break
        if not placed:
            raise PlacementFailed(
                pop.frag, f"{need} words do not fit any reachable core")

    for pop in pops:
        for ax in pop.axons:
            dst = by_idx[ax.dst_pop]
            dx, dy = dst.core[0] - pop.core[0], dst.core[1] - pop.core[1]
            if not (REACH_MIN <= dx <= REACH_MAX
                    and REACH_MIN <= dy <= REACH_MAX):
                raise CoreOutOfReach(pop.core, dst.core)
            ax.core_dx, ax.core_dy = dx, dy
            ax.pop_id = dst.pop_id
    return {c: m for c, m in members.items() if m}
