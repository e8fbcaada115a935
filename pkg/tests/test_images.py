"""Core image layout, binary serialization, and the disassembler."""

import json

import numpy as np

from axonflow.compiler import (
    build_images,
    compile_graph,
    disassemble,
    parse_core,
    serialize_core,
    unpack,
    write_images,
)
from axonflow.graph import FeatureMap, Graph, LayerDef
from axonflow import zoo
from axonflow.lowering import lower


def _small_program():
    rng = np.random.default_rng(6)
    g = Graph()
    g.add_fm(FeatureMap("a", 2, 8, 8, role="input"))
    g.add_fm(FeatureMap("b", 3, 8, 8))
    g.add_fm(FeatureMap("c", 3, 4, 4, role="output"))
    g.add_layer(LayerDef("conv", ["a"], "b", kernel=(3, 3),
                         padding=(1, 1, 1, 1),
                         weights=rng.integers(-9, 10, (3, 2, 3, 3)),
                         biases=rng.integers(-5, 6, 3), activation="relu"))
    g.add_layer(LayerDef("avg_pool", ["b"], "c", kernel=(2, 2), stride=2))
    return compile_graph(g)


def test_image_sections_and_pointers_resolve():
    prog = _small_program()
    images = build_images(prog)
    for image in images.values():
        so = image.section_offsets
        assert so["populations"] == 0
        assert so["axons"] >= so["populations"]
        assert so["kernels"] >= so["axons"]
        assert so["weights"] >= so["kernels"]
        assert image.total_words <= 32768
        assert len(image.words) == so["states"]
        for i in range(len(image.pop_meta)):
            pd = unpack(image.words[so["populations"] + i], "population")
            assert so["states"] <= pd.state_ptr < image.total_words
        for addr in range(so["kernels"], so["weights"]):
            kd = unpack(image.words[addr], "kernel")
            if kd.kd:
                assert so["weights"] <= kd.weight_ptr < so["states"]


def test_binary_round_trip():
    prog = _small_program()
    for image in build_images(prog).values():
        blob = serialize_core(image)
        assert blob[:4] == b"AXFL"
        back = parse_core(blob)
        assert back.core == image.core
        assert back.words == image.words
        assert back.section_offsets == image.section_offsets
        assert back.total_words == image.total_words


def test_population_width_field_stores_shifted_shape():
    prog = _small_program()
    for image in build_images(prog).values():
        so = image.section_offsets
        for i, meta in enumerate(image.pop_meta):
            pd = unpack(image.words[so["populations"] + i], "population")
            pop = next(p for p in prog.populations
                       if p.fm == meta["fm"] and p.pop_id == meta["pop_id"]
                       and p.core == image.core)
            assert pd.w == pop.frag.w << pop.sl
            assert pd.h == pop.frag.h << pop.sl
            assert pd.axon_count == len(pop.axons)


def test_weight_bytes_match_descriptors():
    prog = _small_program()
    for image in build_images(prog).values():
        so = image.section_offsets
        pops = sorted((p for p in prog.populations if p.core == image.core),
                      key=lambda p: p.pop_id)
        addr = so["kernels"]
        for pop in pops:
            for e in pop.kd_entries:
                kd = unpack(image.words[addr], "kernel")
                addr += 1
                assert kd.kd == e.kd
                if e.kd == 0:
                    continue
                raw = b"".join(
                    image.words[kd.weight_ptr + i].to_bytes(8, "little")
                    for i in range(e.weight_words))
                vals = np.frombuffer(raw, dtype=np.int8)[:e.weights.size]
                assert np.array_equal(
                    vals.reshape(e.weights.shape), e.weights)


def test_write_images_and_sidecar(tmp_path):
    prog = _small_program()
    write_images(prog, tmp_path)
    sidecar = json.loads((tmp_path / "mapping.json").read_text())
    assert sidecar["mesh"] == [12, 12]
    assert len(sidecar["fragments"]) == len(prog.populations)
    for entry in sidecar["cores"]:
        blob = (tmp_path / entry["file"]).read_bytes()
        image = parse_core(blob)
        assert list(image.core) == entry["xy"]


def test_disassembler_lists_every_descriptor():
    prog = _small_program()
    text = disassemble(prog)
    assert text.count("pop 0:") >= 1
    assert "Axon(" in text and "KernelDescriptor(" in text
    n_kds = prog.kd_count()
    assert text.count("kd @") == n_kds


def test_pilotnet_images_within_address_space():
    prog = compile_graph(lower(zoo.build("pilotnet", seed=0)))
    for image in build_images(prog).values():
        assert image.total_words <= 32768
        blob = serialize_core(image)
        assert parse_core(blob).words == image.words
