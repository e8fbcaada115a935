"""Bit-exact descriptor packing: round trips, reserved encodings, overflow."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axonflow.compiler import (
    Axon,
    KernelDescriptor,
    PopulationDescriptor,
    layout_fields,
    pack,
    unpack,
)
from axonflow.errors import FieldOverflow


def _field_strategy(bits, signed, name):
    lo = -(1 << (bits - 1)) if signed else 0
    hi = (1 << (bits - 1)) - 1 if signed else (1 << bits) - 1
    if name in ("kw", "kh"):
        lo = 1
    return st.integers(lo, hi)


def _descriptor_strategy(kind, cls):
    fields = [f for f in layout_fields(kind) if f[0] != "_reserved"]
    return st.tuples(*[_field_strategy(b, s, n) for n, b, s in fields]).map(
        lambda vals: cls(*vals))


@settings(max_examples=300, deadline=None)
@given(_descriptor_strategy("axon", Axon))
def test_axon_round_trip(desc):
    assert unpack(pack(desc), "axon") == desc


@settings(max_examples=300, deadline=None)
@given(_descriptor_strategy("kernel", KernelDescriptor))
def test_kernel_round_trip(desc):
    assert unpack(pack(desc), "kernel") == desc


@settings(max_examples=300, deadline=None)
@given(_descriptor_strategy("population", PopulationDescriptor))
def test_population_round_trip(desc):
    assert unpack(pack(desc), "population") == desc


def test_layouts_are_exactly_64_bits():
    for kind in ("axon", "kernel", "population"):
        assert sum(b for _, b, _ in layout_fields(kind)) == 64


def test_word_zero_is_reserved_invalid():
    # kernel dims of zero are an invalid encoding by design
    with pytest.raises(FieldOverflow):
        unpack(0, "axon")
    with pytest.raises(FieldOverflow):
        unpack(0, "kernel")
    # population descriptors have no such reservation: word 0 decodes
    assert unpack(0, "population").d == 0


def test_negative_offset_twos_complement():
    ax = Axon(x_off=-1, y_off=0, c_off=0, w8=1, h8=1, kw=1, kh=1, us=0,
              core_dx=0, core_dy=0, pop_id=0)
    word = pack(ax)
    assert word & 0x1FF == 0x1FF  # -1 in a 9-bit field
    assert unpack(word, "axon").x_off == -1


def test_field_overflow_on_out_of_range():
    good = Axon(0, 0, 0, 1, 1, 3, 3, 0, 0, 0, 0)
    pack(good)
    for field, bad in [("x_off", 256), ("x_off", -257), ("c_off", 1024),
                       ("kw", 0), ("kw", 16), ("us", 8), ("core_dx", 8),
                       ("core_dy", -9), ("pop_id", 8), ("w8", 128)]:
        broken = Axon(0, 0, 0, 1, 1, 3, 3, 0, 0, 0, 0)
        setattr(broken, field, bad)
        with pytest.raises(FieldOverflow):
            pack(broken)
    kd = KernelDescriptor(1, 3, 3, 0, 0, 0, 0, 0)
    pack(kd)
    for field, bad in [("kd", 1024), ("weight_ptr", 32768), ("sl", 2),
                       ("update_rule", 4), ("scale_log", 16),
                       ("dst_base", 1024)]:
        broken = KernelDescriptor(1, 3, 3, 0, 0, 0, 0, 0)
        setattr(broken, field, bad)
        with pytest.raises(FieldOverflow):
            pack(broken)
    pd = PopulationDescriptor(1, 8, 8, 0, 0, 0, 0)
    pack(pd)
    for field, bad in [("d", 1024), ("w", 256), ("h", 256),
                       ("neuron_type", 4), ("activation", 4),
                       ("axon_count", 1024), ("state_ptr", 32768)]:
        broken = PopulationDescriptor(1, 8, 8, 0, 0, 0, 0)
        setattr(broken, field, bad)
        with pytest.raises(FieldOverflow):
            pack(broken)


def test_reserved_bits_must_be_zero():
    word = pack(KernelDescriptor(1, 3, 3, 0, 0, 0, 0, 0))
    with pytest.raises(FieldOverflow):
        unpack(word | (1 << 63), "kernel")


def test_randomized_round_trip_both_directions():
    rng = np.random.default_rng(40)
    fields = {k: [f for f in layout_fields(k) if f[0] != "_reserved"]
              for k in ("axon", "kernel", "population")}
    ctor = {"axon": Axon, "kernel": KernelDescriptor,
            "population": PopulationDescriptor}
    for i in range(3000):
        kind = ("axon", "kernel", "population")[i % 3]
        vals = []
        for name, bits, signed in fields[kind]:
            lo = -(1 << (bits - 1)) if signed else 0
            hi = (1 << (bits - 1)) - 1 if signed else (1 << bits) - 1
            if name in ("kw", "kh"):
                lo = 1
            vals.append(int(rng.integers(lo, hi + 1)))
        desc = ctor[kind](*vals)
        word = pack(desc)
        assert 0 <= word < (1 << 64)
        assert unpack(word, kind) == desc
        assert pack(unpack(word, kind)) == word
