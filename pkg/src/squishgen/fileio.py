"""Readers and writers for the on-disk formats.

- layout JSON: {"units": "nm", "window": [w, h], "polygons": [[[x, y], ...]]}
- topology text: first line "H W", then H lines of W chars in {0,1};
  line 1 holds row 0 (smallest y)
- deltas text: two lines of space-separated integers (delta_x, then delta_y)
- rules JSON: space_min, width_min, area_min, area_max, window (nm / nm^2)
- delta library: entries of two consecutive lines (delta_x line, delta_y line)
- run config: "key = value" lines, '#' comments
- checkpoint: magic "SQGCKPT1", u32 version, u32 header length, JSON header
  (architecture, parameter order/shapes, training-config echo), then the raw
  float64 parameter arrays in header order
- loss trace CSV: "iteration,loss"
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .denoiser import ConvDenoiser
from .drc import DiversityReport, Violation
from .errors import ConfigurationError, ValidationError
from .legalize import RuleSet
from .squish import LayoutPattern, SquishPattern

CHECKPOINT_MAGIC = b"SQGCKPT1"
CHECKPOINT_VERSION = 1


# -- layouts ---------------------------------------------------------------

def write_layout(path, pattern: LayoutPattern) -> None:
    doc = {
        "units": "nm",
        "window": list(pattern.window),
        "polygons": [[[int(x), int(y)] for x, y in poly] for poly in pattern.polygons],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def read_layout(path) -> LayoutPattern:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    for key in ("units", "window", "polygons"):
        if key not in doc:
            raise ValidationError(f"{path}: missing key '{key}'")
    if doc["units"] != "nm":
        raise ValidationError(f"{path}: units must be 'nm', got {doc['units']!r}")
    window = doc["window"]
    if len(window) != 2 or any(not isinstance(v, int) or v <= 0 for v in window):
        raise ValidationError(f"{path}: window must be two positive integers")
    polygons = []
    for pi, poly in enumerate(doc["polygons"]):
        for v in poly:
            if len(v) != 2 or any(not isinstance(c, int) for c in v):
                raise ValidationError(
                    f"{path}: polygon {pi} has a non-integer vertex {v}"
                )
        polygons.append([(v[0], v[1]) for v in poly])
    return LayoutPattern(window=(window[0], window[1]), polygons=polygons)


# -- topology + deltas ------------------------------------------------------

def write_topology(path, topology: np.ndarray) -> None:
    t = np.asarray(topology, dtype=np.uint8)
    lines = [f"{t.shape[0]} {t.shape[1]}"]
    lines += ["".join(str(int(v)) for v in row) for row in t]
    Path(path).write_text("\n".join(lines) + "\n")


def read_topology(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty topology file")
    try:
        h, w = (int(v) for v in lines[0].split())
    except ValueError:
        raise ValidationError(f"{path}: line 1 must be 'H W'")
    if len(lines) < h + 1:
        raise ValidationError(f"{path}: expected {h} rows, found {len(lines) - 1}")
    rows = []
    for j in range(1, h + 1):
        line = lines[j].strip()
        if len(line) != w or set(line) - {"0", "1"}:
            raise ValidationError(f"{path}: line {j + 1} is not {w} chars of 0/1")
        rows.append([int(ch) for ch in line])
    return np.asarray(rows, dtype=np.uint8)


def write_deltas(path, delta_x, delta_y) -> None:
    dx = " ".join(str(int(v)) for v in delta_x)
    dy = " ".join(str(int(v)) for v in delta_y)
    Path(path).write_text(dx + "\n" + dy + "\n")


def read_deltas(path) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValidationError(f"{path}: deltas file needs exactly two lines")
    try:
        dx = np.array([int(v) for v in lines[0].split()], dtype=np.int64)
        dy = np.array([int(v) for v in lines[1].split()], dtype=np.int64)
    except ValueError:
        raise ValidationError(f"{path}: deltas must be integers")
    return dx, dy


def write_squish(topology_path, deltas_path, squish: SquishPattern) -> None:
    write_topology(topology_path, squish.topology)
    write_deltas(deltas_path, squish.delta_x, squish.delta_y)


def read_squish(topology_path, deltas_path) -> SquishPattern:
    topo = read_topology(topology_path)
    dx, dy = read_deltas(deltas_path)
    if dx.shape[0] != topo.shape[1] or dy.shape[0] != topo.shape[0]:
        raise ValidationError(
            f"{deltas_path}: delta lengths {dx.shape[0]}/{dy.shape[0]} do not match "
            f"topology {topo.shape}"
        )
    return SquishPattern(topology=topo, delta_x=dx, delta_y=dy)


# -- rules and delta library -------------------------------------------------

def read_rules(path) -> RuleSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    keys = ("space_min", "width_min", "area_min", "area_max", "window")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ValidationError(f"{path}: missing rule keys {missing}")
    return RuleSet(**{k: int(doc[k]) for k in keys})


def write_rules(path, rules: RuleSet) -> None:
    Path(path).write_text(json.dumps(asdict(rules), sort_keys=True, indent=1) + "\n")


def read_delta_library(path) -> list[tuple[np.ndarray, np.ndarray]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) % 2 != 0:
        raise ValidationError(f"{path}: delta library needs an even line count")
    entries = []
    for i in range(0, len(lines), 2):
        try:
            dx = np.array([int(v) for v in lines[i].split()], dtype=np.int64)
            dy = np.array([int(v) for v in lines[i + 1].split()], dtype=np.int64)
        except ValueError:
            raise ValidationError(f"{path}: non-integer entry near line {i + 1}")
        entries.append((dx, dy))
    return entries


def write_delta_library(path, entries) -> None:
    lines = []
    for dx, dy in entries:
        lines.append(" ".join(str(int(v)) for v in dx))
        lines.append(" ".join(str(int(v)) for v in dy))
    Path(path).write_text("\n".join(lines) + "\n")


# -- run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    dataset_dir: str = ""
    checkpoint: str = ""
    rules_file: str = ""
    delta_library: str = ""
    output_dir: str = "out"
    K: int = 1000
    beta_1: float = 0.01
    beta_K: float = 0.5
    lam: float = 0.001
    C: int = 16
    M: int = 32
    lr: float = 2e-4
    batch: int = 128
    iters: int = 2000
    clip: float = 1.0
    dropout: float = 0.1
    depth: int = 4
    width: int = 64
    seed: int = 0
    workers: int = 1
    denoiser: str = "conv"  # "conv" | "oracle"


_CONFIG_ALIASES = {"lambda": "lam"}


def read_config(path) -> RunConfig:
    cfg = RunConfig()
    valid = {f.name: f for f in fields(RunConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _CONFIG_ALIASES.get(key, key)
        if key not in valid:
            raise ConfigurationError(f"{path}:{lineno}: unknown key '{key}'")
        typ = valid[key].type
        try:
            if typ == "int":
                setattr(cfg, key, int(value))
            elif typ == "float":
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: bad {typ} value '{value}'")
    return cfg


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, model: ConvDenoiser, train_config_echo: dict) -> None:
    order = sorted(model.params)
    header = {
        "arch": {
            "channels": model.channels,
            "m": model.m,
            "depth": model.depth,
            "width": model.width,
        },
        "params": [{"name": k, "shape": list(model.params[k].shape)} for k in order],
        "train_config": train_config_echo,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for k in order:
            fh.write(np.ascontiguousarray(model.params[k], dtype=np.float64).tobytes())


def load_checkpoint(path) -> tuple[ConvDenoiser, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a squishgen checkpoint")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    params = {}
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype=np.float64, count=count, offset=offset).reshape(shape)
        params[spec["name"]] = arr.copy()
        offset += count * 8
    arch = header["arch"]
    model = ConvDenoiser(arch["channels"], arch["m"], arch["depth"], arch["width"], params)
    return model, header["train_config"]


# -- reports --------------------------------------------------------------------

def write_loss_trace(path, losses) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, loss in enumerate(losses, start=1):
            writer.writerow([i, repr(float(loss))])


def violations_to_dicts(violations: list[Violation]) -> list[dict]:
    return [
        {
            "kind": v.kind,
            "polygons": list(v.polygons),
            "axis": v.axis,
            "measured": v.measured,
            "limit": v.limit,
        }
        for v in violations
    ]


def write_diversity_report(json_path, csv_path, report: DiversityReport) -> None:
    doc = {
        "entropy_bits": report.entropy_bits,
        "pattern_count": report.pattern_count,
        "histogram": [
            {"c_x": cx, "c_y": cy, "probability": p}
            for (cx, cy), p in sorted(report.histogram.items())
        ],
    }
    Path(json_path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c_x", "c_y", "probability"])
            for (cx, cy), p in sorted(report.histogram.items()):
                writer.writerow([cx, cy, repr(p)])
