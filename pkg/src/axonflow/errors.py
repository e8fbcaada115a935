"""Exception types shared across the graph, compiler, runtime, and analysis layers."""

from __future__ import annotations


class AxonflowError(Exception):
    """Base class for all errors raised by this package."""


# --- graph construction / validation ---------------------------------------

class GraphValidationError(AxonflowError):
    """A graph failed validation; carries the individual issues."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class ShapeMismatch(AxonflowError):
    def __init__(self, layer, expected, got):
        self.layer = layer
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(
            f"layer {layer}: destination shape {self.got} != expected {self.expected}"
        )


class UnknownFeatureMap(AxonflowError):
    def __init__(self, fm_id, layer=None):
        self.fm_id = fm_id
        self.layer = layer
        where = f" (layer {layer})" if layer is not None else ""
        super().__init__(f"unknown feature map {fm_id!r}{where}")


class CycleDetected(AxonflowError):
    def __init__(self, fm_ids):
        self.fm_ids = list(fm_ids)
        super().__init__(f"graph contains a cycle through {self.fm_ids}")


class UnsupportedLayer(AxonflowError):
    def __init__(self, kind):
        self.kind = kind
        super().__init__(f"unsupported layer kind {kind!r}")


# --- numeric contracts -------------------------------------------------------

class AccumulatorOverflow(AxonflowError):
    """A partial sum left the wide-integer range; indicates a bad test setup."""


# --- compiler ----------------------------------------------------------------

class Unmappable(AxonflowError):
    def __init__(self, fm_id, needed, budget):
        self.fm_id = fm_id
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"feature map {fm_id!r} cannot fit: a minimal fragment needs "
            f"{needed} bytes against a budget of {budget}"
        )


class OffsetOverflow(AxonflowError):
    def __init__(self, axis, value):
        self.axis = axis
        self.value = value
        super().__init__(f"{axis} offset {value} outside signed 9-bit range")


class CoreOutOfReach(AxonflowError):
    def __init__(self, src_core, dst_core):
        self.src_core = tuple(src_core)
        self.dst_core = tuple(dst_core)
        super().__init__(
            f"core delta {self.src_core} -> {self.dst_core} exceeds 4-bit reach"
        )


class FieldOverflow(AxonflowError):
    def __init__(self, field, value=None):
        self.field = field
        self.value = value
        detail = "" if value is None else f" (value {value})"
        super().__init__(f"descriptor field {field!r} out of range{detail}")


class PlacementFailed(AxonflowError):
    def __init__(self, fragment, reason):
        self.fragment = fragment
        self.reason = reason
        super().__init__(f"cannot place fragment {fragment}: {reason}")


# --- runtime -----------------------------------------------------------------

class MalformedEvent(AxonflowError):
    def __init__(self, detail):
        super().__init__(f"malformed event: {detail}")


class DeadlockDetected(AxonflowError):
    def __init__(self, detail):
        super().__init__(f"event queue stalled: {detail}")


# --- analysis ----------------------------------------------------------------

class MismatchedGraphs(AxonflowError):
    def __init__(self, tags):
        self.tags = list(tags)
        super().__init__(f"memory reports cover different graphs: {self.tags}")


class UnknownNetwork(AxonflowError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown network {name!r}")
