"""Synthetic datasets and the plain-text dataset/attacked-set file formats."""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelParseError

DATASET_KINDS = ("blobs", "moons", "grid-digits")


@dataclass(frozen=True)
class LabeledDataset:
    name: str
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels must have equal length")

    @property
    def n(self) -> int:
        return self.inputs.shape[1]

    @property
    def class_count(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True)
class AttackedSet:
    """Same-size copy of a clean set with successful adversarials swapped in."""

    name: str
    inputs: np.ndarray
    labels: np.ndarray
    adv_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "adv_mask", np.asarray(self.adv_mask, dtype=bool))
        if not len(self.inputs) == len(self.labels) == len(self.adv_mask):
            raise ValueError("inputs, labels and adv_mask must have equal length")

    @property
    def adv_count(self) -> int:
        return int(self.adv_mask.sum())

    def __len__(self):
        return len(self.inputs)


def _blobs(size, n_classes, noise, rng):
    angles = 2.0 * math.pi * np.arange(n_classes) / n_classes
    centers = 0.5 + 0.3 * np.column_stack([np.cos(angles), np.sin(angles)])
    labels = np.arange(size) % n_classes
    pts = centers[labels] + noise * rng.standard_normal((size, 2))
    return np.clip(pts, 0.0, 1.0), labels


def _moons(size, noise, rng):
    labels = np.arange(size) % 2
    t = rng.uniform(0.0, math.pi, size)
    x = np.where(labels == 0, np.cos(t), 1.0 - np.cos(t))
    y = np.where(labels == 0, np.sin(t), 0.5 - np.sin(t))
    pts = np.column_stack([x, y]) + noise * rng.standard_normal((size, 2))
    # interleaved arcs span roughly [-1, 2] x [-0.5, 1]; rescale into the unit box
    pts[:, 0] = (pts[:, 0] + 1.25) / 3.5 * 0.9 + 0.05
    pts[:, 1] = (pts[:, 1] + 0.75) / 2.5 * 0.9 + 0.05
    return np.clip(pts, 0.0, 1.0), labels


def _load_digit_glyphs() -> np.ndarray:
    text = (
        importlib.resources.files("relusmooth")
        .joinpath("fixtures/digits8x8.txt")
        .read_text(encoding="utf-8")
    )
    glyphs = {}
    current = None
    rows: list[list[float]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("digit"):
            if current is not None:
                glyphs[current] = rows
            current = int(line.split()[1])
            rows = []
        else:
            rows.append([1.0 if ch == "#" else 0.0 for ch in line])
    if current is not None:
        glyphs[current] = rows
    out = np.zeros((10, 64))
    for d, g in glyphs.items():
        arr = np.array(g)
        if arr.shape != (8, 8):
            raise ValueError(f"glyph {d} is {arr.shape}, expected (8, 8)")
        out[d] = arr.ravel()
    return out


def generate_dataset(kind: str, size: int, noise: float, seed: int = 0) -> LabeledDataset:
    """Deterministic synthetic dataset of the requested kind."""
    if kind not in DATASET_KINDS:
        raise ConfigError(f"dataset.kind: unknown kind {kind!r}, expected one of {DATASET_KINDS}")
    if size < 1:
        raise ConfigError("dataset.size: must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "blobs":
        inputs, labels = _blobs(size, 2, noise, rng)
    elif kind == "moons":
        inputs, labels = _moons(size, noise, rng)
    else:
        glyphs = _load_digit_glyphs()
        labels = np.arange(size) % 10
        inputs = glyphs[labels] + noise * rng.standard_normal((size, 64))
        inputs = np.clip(inputs, 0.0, 1.0)
    return LabeledDataset(kind, inputs, labels)


_FMT = "%.17g"


def save_dataset(ds: LabeledDataset, path) -> None:
    lines = [f"relu-dataset v1 {ds.name} {ds.n} {ds.class_count} {len(ds)}"]
    for x, y in zip(ds.inputs, ds.labels):
        lines.append(f"{y} " + " ".join(_FMT % v for v in x))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_attacked_set(aset: AttackedSet, path) -> None:
    n = aset.inputs.shape[1]
    classes = int(aset.labels.max()) + 1 if len(aset) else 0
    lines = [f"relu-attackset v1 {aset.name} {n} {classes} {len(aset)}"]
    for x, y, m in zip(aset.inputs, aset.labels, aset.adv_mask):
        lines.append(f"{y} {int(m)} " + " ".join(_FMT % v for v in x))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_rows(path, magic, extra_cols):
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise ModelParseError("empty dataset file")
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 6 or parts[0] != magic or parts[1] != "v1":
        raise ModelParseError(f"line {lineno}: bad header {header!r}")
    name = parts[2]
    try:
        n = int(parts[3])
        count = int(parts[5])
    except ValueError:
        raise ModelParseError(f"line {lineno}: non-integer header fields") from None
    rows = []
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != n + 1 + extra_cols:
            raise ModelParseError(
                f"line {lineno}: expected {n + 1 + extra_cols} fields, got {len(parts)}"
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ModelParseError(f"line {lineno}: non-numeric field") from None
    if len(rows) != count:
        raise ModelParseError(f"header announced {count} rows, found {len(rows)}")
    return name, np.array(rows).reshape(len(rows), n + 1 + extra_cols)


def load_dataset(path) -> LabeledDataset:
    name, rows = _parse_rows(path, "relu-dataset", 0)
    return LabeledDataset(name, rows[:, 1:], rows[:, 0].astype(np.int64))


def load_attacked_set(path) -> AttackedSet:
    name, rows = _parse_rows(path, "relu-attackset", 1)
    return AttackedSet(
        name, rows[:, 2:], rows[:, 0].astype(np.int64), rows[:, 1].astype(bool)
    )
