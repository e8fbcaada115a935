"""Axonflow: compiler, event-driven functional simulator, and memory-footprint
analyzer for event-based CNN accelerators with axon-compressed synapses.

The pipeline: describe a CNN as feature maps plus layers (``graph``), lower
every layer onto the generic convolution connection (``lowering``), compile
under per-core memory budgets into fragments, axons, and 64-bit descriptors
(``compiler``), execute event by event with exact equality to the dense
reference (``runtime``, ``oracle``), and quantify the footprint against
flat- and hierarchical-LUT baselines (``memmodel``).
"""

from . import errors
from .build import GraphBuilder
from .compiler import (
    Axon,
    KernelDescriptor,
    PopulationDescriptor,
    Program,
    build_images,
    compile_graph,
    disassemble,
    pack,
    serialize_core,
    parse_core,
    unpack,
    write_images,
)
from .counts import count_neurons, count_synapses
from .graph import (
    FeatureMap,
    Graph,
    LayerDef,
    graph_from_json,
    graph_to_json,
    load_graph,
    save_graph,
    validate_graph,
)
from .lowering import ConvSpec, Lowered, lower, normalize_specs, split_oversized
from .memmodel import (
    BitWidthConfig,
    MemReport,
    compare,
    mem_flat_lut,
    mem_hier_lut,
    mem_proposed,
    render_table,
)
from .oracle import dense_oracle
from .runtime import Event, Machine, run_frame, run_sequence, update_neuron
from .tensorio import load_tensor, save_tensor
from .verify import random_case, run_case, verify_batch
from . import zoo

__version__ = "0.1.0"
