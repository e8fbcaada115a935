"""Core memory images: layout, binary serialization, and the disassembler.

Per-core layout in 64-bit words: population descriptors, per-population axon
blocks, per-population kernel-descriptor tables, the weight section (8-bit
weights packed eight per word, one word-aligned sub-matrix per kernel
descriptor, then one bias/divisor side table per population), and finally the
reserved neuron-state region (16-bit states, four per word).  The binary file
stores the program sections; states exist only at run time.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import Axon, KernelDescriptor, PopulationDescriptor, pack, unpack
from .pipeline import Program

MAGIC = b"AXFL"
VERSION = 1
CORE_WORDS = 32768  # 15-bit addresses


@dataclass
class CoreImage:
    core: tuple
    words: list                 # program words (pd + axons + kds + weights)
    section_offsets: dict       # name -> word index
    total_words: int            # including the reserved state region
    pop_meta: list = field(default_factory=list)


def _weight_bytes(entry):
    if entry.kd == 0:
        return b""
    w = np.asarray(entry.weights, dtype=np.int8)
    return w.tobytes()


def _pad_words(blob: bytes):
    pad = (-len(blob)) % 8
    return blob + b"\x00" * pad


def build_core_image(program: Program, core, pops) -> CoreImage:
    """Lay out one core; population order is the placed pop_id order."""
    pops = sorted(pops, key=lambda p: p.pop_id)
    n = len(pops)
    pd_off = 0
    axon_off = pd_off + n
    kd_off = axon_off + sum(len(p.axons) for p in pops)
    weight_off = kd_off + sum(len(p.kd_entries) for p in pops)

    axon_words, kd_words = [], []
    weight_blob = b""
    meta = []
    axon_base, kd_base = axon_off, kd_off
    pd_records = []
    for p in pops:
        entry_ptrs = []
        for e in p.kd_entries:
            ptr = weight_off + len(weight_blob) // 8
            entry_ptrs.append(ptr)
            weight_blob += _pad_words(_weight_bytes(e))
        side_ptr = weight_off + len(weight_blob) // 8
        side = bytes(np.asarray(p.bias, dtype=np.int8).tobytes())
        side += struct.pack("<H", p.divisor)
        weight_blob += _pad_words(side)
        meta.append({
            "fm": p.fm,
            "index": list(p.frag.index),
            "box": list(p.frag.box),
            "pop_id": p.pop_id,
            "pd_addr": pd_off + p.pop_id,
            "axon_base": axon_base,
            "kd_base": kd_base,
            "kd_len": len(p.kd_entries),
            "side_ptr": side_ptr,
        })
        for ax in p.axons:
            axon_words.append(pack(Axon(
                ax.x_off, ax.y_off, ax.c_off, ax.w8, ax.h8, ax.kw, ax.kh,
                ax.us, ax.core_dx, ax.core_dy, ax.pop_id)))
        for e, ptr in zip(p.kd_entries, entry_ptrs):
            kd_words.append(pack(KernelDescriptor(
                e.kd, e.kw, e.kh, e.sl, ptr, e.update_rule, e.scale_log,
                e.dst_base)))
        axon_base += len(p.axons)
        kd_base += len(p.kd_entries)

    state_off = weight_off + len(weight_blob) // 8
    state_ptr = state_off
    act_codes = {"identity": 0, "relu": 1}
    for p, m in zip(pops, meta):
        m["state_ptr"] = state_ptr
        pd_records.append(pack(PopulationDescriptor(
            p.frag.d, p.frag.w << p.sl, p.frag.h << p.sl, p.neuron_type,
            act_codes[p.activation], len(p.axons), state_ptr)))
        state_ptr += p.state_words
    total = state_ptr
    assert total <= CORE_WORDS, "budget accounting must keep cores in range"

    words = pd_records + axon_words + kd_words
    words += list(np.frombuffer(weight_blob, dtype="<u8"))
    return CoreImage(core, [int(w) for w in words],
                     {"populations": pd_off, "axons": axon_off,
                      "kernels": kd_off, "weights": weight_off,
                      "states": state_off},
                     total, meta)


def build_images(program: Program):
    assert program.placed, "images need a placed program"
    return {core: build_core_image(program, core, pops)
            for core, pops in sorted(program.cores.items())}


# --- binary format -----------------------------------------------------------

_HEADER = struct.Struct("<4sHBB6HI")  # magic, version, x, y, 5 offsets,
                                      # population count, total words


def serialize_core(image: CoreImage) -> bytes:
    so = image.section_offsets
    head = _HEADER.pack(
        MAGIC, VERSION, image.core[0], image.core[1],
        so["populations"], so["axons"], so["kernels"], so["weights"],
        so["states"], len(image.pop_meta), image.total_words)
    body = b"".join(struct.pack("<Q", w) for w in image.words)
    return head + body


def parse_core(blob: bytes) -> CoreImage:
    magic, version, x, y, pd, ax, kd, wt, st, npops, total = \
        _HEADER.unpack(blob[:_HEADER.size])
    if magic != MAGIC or version != VERSION:
        raise ValueError("not a core image")
    words = [struct.unpack("<Q", blob[i:i + 8])[0]
             for i in range(_HEADER.size, len(blob), 8)]
    return CoreImage((x, y), words,
                     {"populations": pd, "axons": ax, "kernels": kd,
                      "weights": wt, "states": st},
                     total, [{"pop_id": i} for i in range(npops)])


def write_images(program: Program, out_dir):
    """Emit one binary per core plus the JSON mapping sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = build_images(program)
    sidecar = {
        "mesh": list(program.mesh),
        "budget": program.budget,
        "mode": program.mode,
        "cores": [],
        "fragments": [],
    }
    for core, image in images.items():
        name = f"core_{core[0]}_{core[1]}.bin"
        (out / name).write_bytes(serialize_core(image))
        sidecar["cores"].append({
            "xy": list(core), "file": name,
            "sections": image.section_offsets,
            "words": image.total_words,
        })
        for m in image.pop_meta:
            sidecar["fragments"].append(dict(m, core=list(core)))
    (out / "mapping.json").write_text(json.dumps(sidecar, indent=1) + "\n")
    return images


def disassemble_core(image: CoreImage) -> str:
    """Field-by-field dump of every descriptor in a core image."""
    so = image.section_offsets
    lines = [f"core {image.core}  sections {so}  words {image.total_words}"]
    n_pops = len(image.pop_meta)
    axon_counts = []
    for i in range(n_pops):
        pd = unpack(image.words[so["populations"] + i], "population")
        axon_counts.append(pd.axon_count)
        lines.append(f"  pop {i}: {pd}")
    base = so["axons"]
    for i, cnt in enumerate(axon_counts):
        for a in range(cnt):
            ax = unpack(image.words[base + a], "axon")
            lines.append(f"    pop {i} axon {a}: {ax}")
        base += cnt
    for addr in range(so["kernels"], so["weights"]):
        kd = unpack(image.words[addr], "kernel")
        lines.append(f"  kd @{addr}: {kd}")
    return "\n".join(lines)


def disassemble(program: Program) -> str:
    return "\n".join(disassemble_core(img)
                     for img in build_images(program).values())
