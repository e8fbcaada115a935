"""Batch front door: compile, simulate, verify, analyze, and emit networks.

Every command is deterministic given its seed.  Module errors surface as a
machine-readable JSON envelope on stderr with a nonzero exit code; a failed
oracle comparison exits 1 with the first mismatching coordinate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import memmodel, tensorio, zoo
from .compiler import compile_graph, write_images
from .errors import AxonflowError
from .graph import load_graph, save_graph
from .lowering import lower
from .runtime import Machine
from .verify import max_workers, verify_batch


def _add_common(p):
    p.add_argument("--budget", type=int, default=262144,
                   help="per-core memory budget in bytes")
    p.add_argument("--mesh", default="12x12", metavar="WxH",
                   help="core mesh dimensions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--format", choices=("json", "table", "csv"),
                   default="table")


def _mesh(arg):
    w, h = arg.lower().split("x")
    return (int(w), int(h))


def build_parser():
    p = argparse.ArgumentParser(
        prog="axonflow",
        description="compile, simulate and analyze event-driven CNN programs")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a graph to core images")
    c.add_argument("--graph", required=True)
    c.add_argument("--mode", choices=("standard", "sigma_delta"),
                   default="standard")
    _add_common(c)

    s = sub.add_parser("simulate", help="run frames event by event")
    s.add_argument("--graph", required=True)
    s.add_argument("--input", action="append", default=[],
                   help="tensor file (or fm_id=path for multi-input graphs)")
    s.add_argument("--frames", type=int, default=1,
                   help="random frames to run when no --input is given")
    s.add_argument("--mode", choices=("standard", "sigma_delta"),
                   default="standard")
    s.add_argument("--no-hit-detection", action="store_true")
    _add_common(s)

    v = sub.add_parser("verify", help="randomized diff against the dense "
                                      "reference (exit 0/1)")
    v.add_argument("--count", type=int, default=200)
    v.add_argument("--mode", choices=("standard", "sigma_delta"),
                   default="standard")
    _add_common(v)

    a = sub.add_parser("analyze", help="memory footprint per scheme")
    a.add_argument("--graph", required=True)
    a.add_argument("--hier-m", type=int, default=1024,
                   help="neurons per core assumed by the hierarchical LUT")
    a.add_argument("--no-place", action="store_true",
                   help="skip mesh placement (footprint analysis only)")
    _add_common(a)

    z = sub.add_parser("zoo", help="emit a benchmark network as graph JSON")
    z.add_argument("--network", required=True, choices=zoo.NETWORKS)
    z.add_argument("--truncate-layers", type=int, default=None)
    z.add_argument("--truncate-channels", type=int, default=None)
    z.add_argument("--truncate-hw", type=int, default=None)
    _add_common(z)
    return p


def cmd_compile(args):
    graph = load_graph(args.graph)
    prog = compile_graph(graph, budget=args.budget, mesh=_mesh(args.mesh),
                         mode=args.mode)
    out = Path(args.out or "images")
    write_images(prog, out)
    print(json.dumps({
        "cores": len(prog.cores),
        "fragments": sum(len(g.fragments) for g in prog.grids.values()),
        "axons": prog.axon_count(),
        "out": str(out),
    }, sort_keys=True))
    return 0


def _gather_inputs(graph, args):
    input_fms = [fm for fm in graph.feature_maps.values()
                 if fm.role == "input"]
    if args.input:
        frame = {}
        for item in args.input:
            if "=" in item:
                fm_id, path = item.split("=", 1)
            else:
                fm_id, path = input_fms[0].id, item
            frame[fm_id] = tensorio.load_tensor(path)
        return [frame]
    rng = np.random.default_rng(args.seed)
    frames = []
    for _ in range(args.frames):
        frames.append({fm.id: rng.integers(-100, 101, size=fm.shape)
                       for fm in input_fms})
    return frames


def cmd_simulate(args):
    graph = load_graph(args.graph)
    prog = compile_graph(graph, budget=args.budget, mesh=_mesh(args.mesh),
                         mode=args.mode)
    machine = Machine(prog, hit_detection=not args.no_hit_detection)
    frames = _gather_inputs(graph, args)
    out = Path(args.out or "sim_out")
    out.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        outputs = machine.run_frame(frame)
        for fm_id, arr in outputs.items():
            tensorio.save_tensor(out / f"frame{t}_{fm_id}.bin", arr)
    (out / "stats.json").write_text(
        json.dumps(machine.stats.to_json(), indent=1, sort_keys=True) + "\n")
    print(json.dumps({"frames": len(frames),
                      "events_sent": machine.stats.events_sent,
                      "out": str(out)}, sort_keys=True))
    return 0


def cmd_verify(args):
    seeds = range(args.seed, args.seed + args.count)
    frames = 5 if args.mode == "sigma_delta" else 1
    total, failures = verify_batch(seeds, mode=args.mode, frames=frames)
    if failures:
        print(json.dumps({"result": "FAIL", "cases": total,
                          "first_mismatch": failures[0]}, sort_keys=True))
        return 1
    print(json.dumps({"result": "PASS", "cases": total,
                      "workers": max_workers()}, sort_keys=True))
    return 0


def cmd_analyze(args):
    graph = load_graph(args.graph)
    low = lower(graph)
    prog = compile_graph(low, budget=args.budget,
                         mesh=None if args.no_place else _mesh(args.mesh),
                         do_place=not args.no_place)
    cfg = memmodel.BitWidthConfig(hier_m=args.hier_m)
    reports = [memmodel.mem_proposed(prog, cfg),
               memmodel.mem_flat_lut(low, cfg),
               memmodel.mem_hier_lut(low, cfg)]
    ratios = memmodel.compare(reports)
    if args.format == "json":
        text = memmodel.reports_to_json(reports, ratios)
    elif args.format == "csv":
        text = memmodel.reports_to_csv(reports)
    else:
        text = memmodel.render_table(reports, ratios) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_zoo(args):
    if args.truncate_layers or args.truncate_channels or args.truncate_hw:
        graph = zoo.build_truncated(
            args.network,
            args.truncate_layers or 10 ** 9,
            args.truncate_channels or 10 ** 9,
            max_hw=args.truncate_hw, seed=args.seed)
    else:
        graph = zoo.build(args.network, seed=args.seed)
    out = args.out or f"{args.network}.json"
    save_graph(graph, out, weight_seed=args.seed)
    print(json.dumps({"network": args.network, "out": str(out),
                      "feature_maps": len(graph.feature_maps),
                      "layers": len(graph.layers)}, sort_keys=True))
    return 0


COMMANDS = {
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "analyze": cmd_analyze,
    "zoo": cmd_zoo,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except AxonflowError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
