from .descriptors import (
    Axon,
    KernelDescriptor,
    PopulationDescriptor,
    layout_fields,
    pack,
    unpack,
)
from .fragment import FragGrid, Fragment, make_grid
from .image import (
    CoreImage,
    build_images,
    disassemble,
    disassemble_core,
    parse_core,
    serialize_core,
    write_images,
)
from .pipeline import DEFAULT_BUDGET, DEFAULT_MESH, Program, compile_graph
from .placement import place, snake_order
from .program import AxonRecord, KdEntry, Population
