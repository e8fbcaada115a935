"""Bit-exact 64-bit instruction words: axons, kernel and population descriptors.

Little-endian bit order: the first field of each layout occupies the least
significant bits.  Signed fields are two's complement.  Kernel dims use a
4-bit field with 0 reserved as an invalid encoding, so the largest directly
representable kernel is 15 per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import FieldOverflow

WORD_BITS = 64


@dataclass(frozen=True)
class _Field:
    name: str
    bits: int
    signed: bool = False
    min_value: int = None  # extra lower bound on top of the bit range


@dataclass
class Axon:
    """Source-side connectivity instruction for one destination population.

    ``w8``/``h8`` give the destination width/height in units of 8 (an
    over-approximation used only by hit detection); ``core_dx``/``core_dy``
    are the relative mesh address of the destination core.
    """

    x_off: int
    y_off: int
    c_off: int
    w8: int
    h8: int
    kw: int
    kh: int
    us: int
    core_dx: int
    core_dy: int
    pop_id: int


@dataclass
class KernelDescriptor:
    """Per (destination population, source channel) decode word.

    ``kd`` destination channels starting at ``dst_base`` (population-local)
    are updated from the sub-weight matrix at ``weight_ptr``.  ``kd`` may be
    zero for source channels that reach no channel of this population.
    """

    kd: int
    kw: int
    kh: int
    sl: int
    weight_ptr: int
    update_rule: int  # 0 accumulate, 1 max, 2/3 multiply slot 0/1
    scale_log: int
    dst_base: int


@dataclass
class PopulationDescriptor:
    """Shape and runtime attributes of one resident population.

    ``w``/``h`` store the physical shape shifted left by the population's
    stride log, so the decode loop can bound-check pre-downsampling
    coordinates without shifting.
    """

    d: int
    w: int
    h: int
    neuron_type: int  # 0 standard, 1 sigma-delta
    activation: int   # 0 identity, 1 relu
    axon_count: int
    state_ptr: int


_LAYOUTS = {
    "axon": (Axon, (
        _Field("x_off", 9, signed=True),
        _Field("y_off", 9, signed=True),
        _Field("c_off", 10),
        _Field("w8", 7),
        _Field("h8", 7),
        _Field("kw", 4, min_value=1),
        _Field("kh", 4, min_value=1),
        _Field("us", 3),
        _Field("core_dx", 4, signed=True),
        _Field("core_dy", 4, signed=True),
        _Field("pop_id", 3),
    )),
    "kernel": (KernelDescriptor, (
        _Field("kd", 10),
        _Field("kw", 4, min_value=1),
        _Field("kh", 4, min_value=1),
        _Field("sl", 1),
        _Field("weight_ptr", 15),
        _Field("update_rule", 2),
        _Field("scale_log", 4),
        _Field("dst_base", 10),
        _Field("_reserved", 14),
    )),
    "population": (PopulationDescriptor, (
        _Field("d", 10),
        _Field("w", 8),
        _Field("h", 8),
        _Field("neuron_type", 2),
        _Field("activation", 2),
        _Field("axon_count", 10),
        _Field("state_ptr", 15),
        _Field("_reserved", 9),
    )),
}

for _cls, _layout in _LAYOUTS.values():
    assert sum(f.bits for f in _layout) == WORD_BITS

_KIND_OF = {Axon: "axon", KernelDescriptor: "kernel",
            PopulationDescriptor: "population"}


def _field_range(f: _Field):
    if f.signed:
        lo, hi = -(1 << (f.bits - 1)), (1 << (f.bits - 1)) - 1
    else:
        lo, hi = 0, (1 << f.bits) - 1
    if f.min_value is not None:
        lo = max(lo, f.min_value)
    return lo, hi


def pack(desc) -> int:
    """Encode a descriptor into its 64-bit word; raises FieldOverflow."""
    kind = _KIND_OF.get(type(desc))
    if kind is None:
        raise TypeError(f"not a descriptor: {desc!r}")
    _, layout = _LAYOUTS[kind]
    word = 0
    shift = 0
    for f in layout:
        value = 0 if f.name == "_reserved" else int(getattr(desc, f.name))
        lo, hi = _field_range(f)
        if not lo <= value <= hi:
            raise FieldOverflow(f.name, value)
        word |= (value & ((1 << f.bits) - 1)) << shift
        shift += f.bits
    return word


def unpack(word: int, kind: str):
    """Decode a 64-bit word; raises FieldOverflow on any invalid encoding
    (out-of-range field, reserved bits set, or a zero kernel dimension)."""
    if kind not in _LAYOUTS:
        raise ValueError(f"unknown descriptor kind {kind!r}")
    if not 0 <= word < (1 << WORD_BITS):
        raise FieldOverflow("word", word)
    cls, layout = _LAYOUTS[kind]
    values = {}
    shift = 0
    for f in layout:
        raw = (word >> shift) & ((1 << f.bits) - 1)
        shift += f.bits
        if f.signed and raw >= (1 << (f.bits - 1)):
            raw -= 1 << f.bits
        if f.name == "_reserved":
            if raw != 0:
                raise FieldOverflow("_reserved", raw)
            continue
        lo, hi = _field_range(f)
        if not lo <= raw <= hi:
            raise FieldOverflow(f.name, raw)
        values[f.name] = raw
    return cls(**values)


def layout_fields(kind: str):
    """(name, bits, signed) triples of one layout, LSB first."""
    _, layout = _LAYOUTS[kind]
    return [(f.name, f.bits, f.signed) for f in layout]
