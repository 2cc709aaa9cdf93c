"""Batch command-line front-end.

Subcommands: encode, decode, train, sample, legalize, drc, stats, render.
Shared flags: --config (key=value run config), --seed, --workers, --out.
Exit codes: 0 success, 2 validation/configuration error, 3 infeasible-only
legalization batch, 4 training divergence.

Per-pattern randomness always derives from (seed, pattern index), and every
file is written by the coordinating process in index order, so a given seed
produces identical artifacts regardless of the worker count.  Manifests
additionally carry wall-clock timing splits, which are the only
run-dependent bytes in any output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import sys
import time
from pathlib import Path

import numpy as np

from . import diffusion, fileio, rng
from .denoiser import ConvDenoiser, OracleDenoiser, TrainConfig, train
from .drc import check_drc, diversity
from .errors import (
    ConfigurationError,
    InfeasibleError,
    ParameterError,
    ShapeError,
    SquishgenError,
    TrainingError,
    ValidationError,
)
from .fileio import RunConfig
from .legalize import prefilter, solve_many
from .squish import (
    SquishPattern,
    extract_squish,
    fold,
    reconstruct_layout,
    unfold,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_TRAINING = 4

TOPOLOGY_SUFFIX = ".topology.txt"
DELTAS_SUFFIX = ".deltas.txt"
LAYOUT_SUFFIX = ".layout.json"
SAMPLE_MANIFEST = "sample_manifest.json"
LEGALIZE_MANIFEST = "legalize_manifest.json"


def _base_name(path: Path, suffix: str) -> str:
    name = path.name
    if not name.endswith(suffix):
        raise ValidationError(f"{path}: expected a file ending in {suffix}")
    return name[: -len(suffix)]


def _layout_base(path: Path) -> str:
    name = path.name
    return name[: -len(LAYOUT_SUFFIX)] if name.endswith(LAYOUT_SUFFIX) else path.stem


def _load_config(args) -> RunConfig:
    cfg = fileio.read_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _map_indexed(func, payloads, workers: int):
    """Run tasks preserving order; fan out to a pool when workers > 1."""
    if workers <= 1 or len(payloads) <= 1:
        return [func(p) for p in payloads]
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(min(workers, len(payloads))) as pool:
        return pool.map(func, payloads)


def _write_manifest(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


# -- encode / decode ----------------------------------------------------------

def _cmd_encode(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    for file in args.files:
        pattern = fileio.read_layout(file)
        squish = extract_squish(pattern)
        base = _layout_base(Path(file))
        fileio.write_squish(out / f"{base}{TOPOLOGY_SUFFIX}", out / f"{base}{DELTAS_SUFFIX}", squish)
        print(f"encoded {file} -> {base}{TOPOLOGY_SUFFIX} ({squish.topology.shape[0]}x{squish.topology.shape[1]})")
    return EXIT_OK


def _cmd_decode(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    for file in args.files:
        path = Path(file)
        base = _base_name(path, TOPOLOGY_SUFFIX)
        deltas = path.parent / f"{base}{DELTAS_SUFFIX}"
        if not deltas.exists():
            raise ValidationError(f"{deltas}: deltas file for {path} not found")
        squish = fileio.read_squish(path, deltas)
        pattern = reconstruct_layout(squish)
        fileio.write_layout(out / f"{base}{LAYOUT_SUFFIX}", pattern)
        print(f"decoded {file} -> {base}{LAYOUT_SUFFIX} ({len(pattern.polygons)} polygons)")
    return EXIT_OK


# -- dataset loading -----------------------------------------------------------

def _load_dataset(cfg: RunConfig) -> np.ndarray:
    if not cfg.dataset_dir:
        raise ConfigurationError("config key dataset_dir is required")
    files = sorted(Path(cfg.dataset_dir).glob(f"*{TOPOLOGY_SUFFIX}"))
    if not files:
        raise ConfigurationError(f"{cfg.dataset_dir}: no *{TOPOLOGY_SUFFIX} files")
    side = int(round(cfg.C**0.5)) * cfg.M
    tensors = []
    for file in files:
        topo = fileio.read_topology(file)
        if topo.shape != (side, side):
            raise ConfigurationError(
                f"{file}: topology {topo.shape} inconsistent with C={cfg.C}, M={cfg.M} "
                f"(expected {side}x{side})"
            )
        tensors.append(fold(topo, cfg.C))
    return np.stack(tensors)


def _make_denoiser(cfg: RunConfig, schedule):
    if cfg.denoiser == "oracle":
        return OracleDenoiser(_load_dataset(cfg), schedule)
    if cfg.denoiser != "conv":
        raise ConfigurationError(f"unknown denoiser kind '{cfg.denoiser}'")
    if not cfg.checkpoint:
        raise ConfigurationError("config key checkpoint is required for denoiser=conv")
    model, _ = fileio.load_checkpoint(cfg.checkpoint)
    if model.channels != cfg.C or model.m != cfg.M:
        raise ConfigurationError(
            f"checkpoint built for (C={model.channels}, M={model.m}) but config says "
            f"(C={cfg.C}, M={cfg.M})"
        )
    return model


# -- train ----------------------------------------------------------------------

def _cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    data = _load_dataset(cfg)
    schedule = diffusion.make_schedule(cfg.K, cfg.beta_1, cfg.beta_K)
    tc = TrainConfig(
        learning_rate=cfg.lr,
        batch_size=cfg.batch,
        iterations=cfg.iters,
        grad_clip=cfg.clip,
        dropout=cfg.dropout,
        lam=cfg.lam,
        seed=cfg.seed,
    )
    model, losses = train(data, schedule, tc, depth=cfg.depth, width=cfg.width)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out / "denoiser.ckpt"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    fileio.save_checkpoint(ckpt, model, dataclasses.asdict(cfg))
    fileio.write_loss_trace(out / "loss_trace.csv", losses)
    print(
        f"trained {cfg.iters} iterations on {len(data)} tensors; "
        f"final loss {losses[-1]:.6f}; checkpoint {ckpt}"
    )
    return EXIT_OK


# -- sample -----------------------------------------------------------------------

def _sample_one(payload) -> tuple[int, np.ndarray, float]:
    index, model, schedule, shape, seed = payload
    t0 = time.perf_counter()
    tensor = diffusion.sample_topology(model, schedule, shape, seed, index=index)
    return index, tensor, time.perf_counter() - t0


def _cmd_sample(args) -> int:
    wall0 = time.perf_counter()
    cfg = _load_config(args)
    out = _out_dir(cfg)
    schedule = diffusion.make_schedule(cfg.K, cfg.beta_1, cfg.beta_K)
    model = _make_denoiser(cfg, schedule)
    shape = (cfg.C, cfg.M, cfg.M)
    setup_s = time.perf_counter() - wall0

    payloads = [(i, model, schedule, shape, cfg.seed) for i in range(args.count)]
    results = _map_indexed(_sample_one, payloads, cfg.workers)
    sampling_s = sum(r[2] for r in results)

    io0 = time.perf_counter()
    entries = []
    accepted = 0
    for index, tensor, seconds in results:
        topo = unfold(tensor)
        reason = prefilter(topo)
        entry = {"index": index, "accepted": reason is None, "reason": reason}
        if reason is None:
            name = f"sample_{index:05d}{TOPOLOGY_SUFFIX}"
            fileio.write_topology(out / name, topo)
            entry["file"] = name
            accepted += 1
        entries.append(entry)
    io_s = time.perf_counter() - io0

    filtered_fraction = 1.0 - accepted / args.count if args.count else 0.0
    manifest = {
        "command": "sample",
        "requested": args.count,
        "accepted": accepted,
        "filtered_fraction": filtered_fraction,
        "config": {
            "K": cfg.K,
            "beta_1": cfg.beta_1,
            "beta_K": cfg.beta_K,
            "lambda": cfg.lam,
            "C": cfg.C,
            "M": cfg.M,
            "seed": cfg.seed,
            "denoiser": cfg.denoiser,
        },
        "patterns": entries,
        "timing": {
            "setup_s": setup_s,
            "sampling_s": sampling_s,
            "io_s": io_s,
            "wall_s": time.perf_counter() - wall0,
        },
    }
    _write_manifest(out / SAMPLE_MANIFEST, manifest)
    print(
        f"sampled {args.count} topologies, accepted {accepted} "
        f"(filtered fraction {filtered_fraction:.4f})"
    )
    return EXIT_OK


# -- legalize ----------------------------------------------------------------------

def _legalize_one(payload):
    index, topo, rules, per_topology, initializer, seed = payload
    t0 = time.perf_counter()
    reason = prefilter(topo)
    if reason is not None:
        return index, "filtered", reason, [], time.perf_counter() - t0
    sub_seed = int(rng.stream(seed, "legalize", index).integers(np.iinfo(np.int64).max))
    result = solve_many(topo, rules, per_topology, seed=sub_seed, initializer=initializer)
    if not result.solutions:
        return index, "infeasible", None, [], time.perf_counter() - t0
    sols = [
        (
            sol.delta_x,
            sol.delta_y,
            {
                "iterations": sol.diagnostics.iterations,
                "attempts": sol.diagnostics.attempts,
                "initializer": sol.diagnostics.initializer,
            },
        )
        for sol in result.solutions
    ]
    status = "solved" if result.complete else "partial"
    return index, status, None, sols, time.perf_counter() - t0


def _cmd_legalize(args) -> int:
    wall0 = time.perf_counter()
    cfg = _load_config(args)
    out = _out_dir(cfg)
    if not cfg.rules_file:
        raise ConfigurationError("config key rules_file is required for legalize")
    rules = fileio.read_rules(cfg.rules_file)
    initializer = (
        fileio.read_delta_library(cfg.delta_library) if cfg.delta_library else "random"
    )

    io0 = time.perf_counter()
    topologies = [fileio.read_topology(f) for f in args.files]
    sampling_s = None
    sample_manifest = Path(args.files[0]).parent / SAMPLE_MANIFEST
    if sample_manifest.exists():
        sampling_s = json.loads(sample_manifest.read_text())["timing"]["sampling_s"]
    io_s = time.perf_counter() - io0
    setup_s = time.perf_counter() - wall0 - io_s

    payloads = [
        (i, topo, rules, args.per_topology, initializer, cfg.seed)
        for i, topo in enumerate(topologies)
    ]
    results = _map_indexed(_legalize_one, payloads, cfg.workers)
    solving_s = sum(r[4] for r in results)

    verify_s = 0.0
    entries = []
    emitted = 0
    for (index, status, reason, sols, _), file in zip(results, args.files):
        base = _base_name(Path(file), TOPOLOGY_SUFFIX)
        entry = {
            "topology": base,
            "status": status,
            "reason": reason,
            "solutions": [],
        }
        topo = topologies[index]
        for j, (dx, dy, diag) in enumerate(sols):
            v0 = time.perf_counter()
            pattern = reconstruct_layout(SquishPattern(topo, dx, dy))
            violations = check_drc(pattern, rules)
            verify_s += time.perf_counter() - v0
            if violations:
                entry["solutions"].append(
                    {"solution": j, "emitted": False, "drc_violations": len(violations)}
                )
                continue
            io0 = time.perf_counter()
            name = f"{base}.s{j:03d}{LAYOUT_SUFFIX}"
            fileio.write_layout(out / name, pattern)
            io_s += time.perf_counter() - io0
            entry["solutions"].append(
                {"solution": j, "emitted": True, "file": name, "diagnostics": diag}
            )
            emitted += 1
        entries.append(entry)

    manifest = {
        "command": "legalize",
        "per_topology": args.per_topology,
        "topologies": len(args.files),
        "layouts_emitted": emitted,
        "rules": dataclasses.asdict(rules),
        "entries": entries,
        "timing": {
            "setup_s": setup_s,
            "sampling_s": sampling_s,
            "solving_s": solving_s,
            "verify_s": verify_s,
            "io_s": io_s,
            "wall_s": time.perf_counter() - wall0,
        },
    }
    _write_manifest(out / LEGALIZE_MANIFEST, manifest)
    print(f"legalized {emitted} layouts from {len(args.files)} topologies")
    if emitted == 0 and args.files:
        print("no topology produced a legal layout", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- drc / stats / render --------------------------------------------------------

def _cmd_drc(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    rules = fileio.read_rules(args.rules)
    report = []
    clean = 0
    for file in args.files:
        pattern = fileio.read_layout(file)
        violations = check_drc(pattern, rules)
        report.append({"file": str(file), "violations": fileio.violations_to_dicts(violations)})
        if not violations:
            clean += 1
        print(f"{file}: {len(violations)} violations")
    rate = clean / len(args.files)
    (out / "drc_report.json").write_text(
        json.dumps({"legality_rate": rate, "files": report}, sort_keys=True, indent=1) + "\n"
    )
    print(f"legality rate {rate:.4f} ({clean}/{len(args.files)})")
    return EXIT_OK


def _squish_from_file(path: Path) -> SquishPattern:
    if path.name.endswith(TOPOLOGY_SUFFIX):
        base = _base_name(path, TOPOLOGY_SUFFIX)
        return fileio.read_squish(path, path.parent / f"{base}{DELTAS_SUFFIX}")
    return extract_squish(fileio.read_layout(path))


def _cmd_stats(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    patterns = [_squish_from_file(Path(f)) for f in args.files]
    report = diversity(patterns)
    fileio.write_diversity_report(
        out / "diversity.json", out / "complexity_histogram.csv", report
    )
    print(
        f"{report.pattern_count} patterns, {len(report.histogram)} complexity bins, "
        f"entropy {report.entropy_bits:.4f} bits"
    )
    return EXIT_OK


def _cmd_render(args) -> int:
    from PIL import Image, ImageDraw

    cfg = _load_config(args)
    out = _out_dir(cfg)
    for file in args.files:
        pattern = fileio.read_layout(file)
        w, h = pattern.window
        scale = args.width_px / w
        img = Image.new("RGB", (args.width_px, max(1, round(h * scale))), "white")
        draw = ImageDraw.Draw(img)
        for poly in pattern.polygons:
            pts = [(x * scale, (h - y) * scale) for x, y in poly]
            draw.polygon(pts, fill=(70, 110, 180), outline=(25, 45, 90))
        if args.grid:
            squish = extract_squish(pattern)
            for x in np.cumsum(squish.delta_x)[:-1]:
                draw.line([(x * scale, 0), (x * scale, img.height)], fill=(200, 200, 200))
            for y in np.cumsum(squish.delta_y)[:-1]:
                yy = (h - y) * scale
                draw.line([(0, yy), (img.width, yy)], fill=(200, 200, 200))
        name = _layout_base(Path(file)) + ".png"
        img.save(out / name)
        print(f"rendered {file} -> {name}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="run config file (key = value lines)")
    shared.add_argument("--seed", type=int, help="override the config seed")
    shared.add_argument("--workers", type=int, help="worker process count")
    shared.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(
        prog="squishgen",
        description="Layout pattern generation: squish codec, discrete diffusion, legalization, DRC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[shared], help="layout JSON -> topology + deltas")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", parents=[shared], help="topology + deltas -> layout JSON")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("train", parents=[shared], help="train the denoiser")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", parents=[shared], help="sample and pre-filter topologies")
    p.add_argument("-n", "--count", type=int, required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("legalize", parents=[shared], help="solve legal geometry for topologies")
    p.add_argument("files", nargs="+")
    p.add_argument("--per-topology", type=int, default=1)
    p.set_defaults(func=_cmd_legalize)

    p = sub.add_parser("drc", parents=[shared], help="check layouts against design rules")
    p.add_argument("--rules", required=True)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=_cmd_drc)

    p = sub.add_parser("stats", parents=[shared], help="diversity report for a library")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("render", parents=[shared], help="raster image of a layout")
    p.add_argument("files", nargs="+")
    p.add_argument("--width-px", type=int, default=512)
    p.add_argument("--grid", action="store_true")
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, ConfigurationError, ParameterError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SquishgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
