"""Curve dataset files (`.lcds`) and architecture-level train/test splits.

File layout: one JSON header line, then one comma-separated record per
line::

    <op indices joined by '-'>,<seed>,<E_max accuracies>[,<per-epoch cost>]

Accuracies are printed with 17 significant digits, which round-trips
IEEE doubles exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .core import Architecture, CurveDataset, SearchSpaceSpec, substream

SCHEMA_VERSION = 1
FORMAT_ID = "lcds"


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the offending line."""


class SchemaVersionError(DatasetFormatError):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_dataset(path, dataset: CurveDataset) -> None:
    has_cost = dataset.epoch_costs is not None
    header = {
        "format": FORMAT_ID,
        "schema_version": SCHEMA_VERSION,
        "space": dataset.space.to_dict(),
        "e_max": dataset.space.e_max,
        "has_cost": has_cost,
        "n_records": len(dataset),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i in range(len(dataset)):
        fields = [str(dataset.archs[i]), str(int(dataset.seeds[i]))]
        fields.extend(_fmt(v) for v in dataset.curves[i])
        if has_cost:
            fields.append(_fmt(dataset.epoch_costs[i]))
        lines.append(",".join(fields))
    # write-then-rename so readers never see a half-written file
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_dataset(path) -> CurveDataset:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("line 1: missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"line 1: header is not valid JSON ({e.msg})") from None
    if not isinstance(header, dict) or "schema_version" not in header:
        raise DatasetFormatError("line 1: header lacks schema_version")
    if header["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"line 1: unsupported schema version {header['schema_version']!r} (this reader handles {SCHEMA_VERSION})"
        )
    try:
        space = SearchSpaceSpec.from_dict(header["space"])
        has_cost = bool(header["has_cost"])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"line 1: bad header ({e})") from None
    if int(header.get("e_max", space.e_max)) != space.e_max:
        raise DatasetFormatError("line 1: header e_max disagrees with the space")

    e_max = space.e_max
    n_fields = 2 + e_max + int(has_cost)
    archs, seeds = [], []
    curves = np.empty((len(lines) - 1, e_max))
    costs = np.empty(len(lines) - 1) if has_cost else None
    for r, line in enumerate(lines[1:]):
        lineno = r + 2
        parts = line.split(",")
        if len(parts) != n_fields:
            raise DatasetFormatError(
                f"line {lineno}: expected {e_max} accuracies{' and a cost' if has_cost else ''}, "
                f"found {len(parts) - 2 - int(has_cost)} values"
            )
        try:
            arch = Architecture.parse(parts[0])
            seed = int(parts[1])
            vals = np.array([float(v) for v in parts[2:2 + e_max]])
            cost = float(parts[-1]) if has_cost else None
        except ValueError as e:
            raise DatasetFormatError(f"line {lineno}: {e}") from None
        try:
            space.validate(arch)
        except (ValueError, IndexError) as e:
            raise DatasetFormatError(f"line {lineno}: {e}") from None
        if not np.all(np.isfinite(vals)) or vals.min() < 0 or vals.max() > 1:
            raise DatasetFormatError(f"line {lineno}: accuracy outside [0, 1]")
        if has_cost and not (np.isfinite(cost) and cost > 0):
            raise DatasetFormatError(f"line {lineno}: per-epoch cost must be positive")
        archs.append(arch)
        seeds.append(seed)
        curves[r] = vals
        if has_cost:
            costs[r] = cost
    n_decl = header.get("n_records")
    if n_decl is not None and n_decl != len(archs):
        raise DatasetFormatError(f"header declares {n_decl} records, file has {len(archs)}")
    return CurveDataset(space, archs, np.array(seeds, dtype=np.int64), curves, costs)


def split_dataset(dataset: CurveDataset, test_fraction: float, seed: int) -> tuple[CurveDataset, CurveDataset]:
    """Split by architecture: every seed of an architecture lands on one side.

    The test side gets round(test_fraction * n_archs) architectures
    (Python rounding, i.e. half-to-even), kept within [1, n_archs - 1].
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    groups = dataset.groups()
    archs = list(groups)
    if len(archs) < 2:
        raise ValueError("splitting needs at least 2 distinct architectures")
    n_test = min(max(round(test_fraction * len(archs)), 1), len(archs) - 1)
    perm = substream(seed, "split_dataset").permutation(len(archs))
    test_set = set(perm[:n_test].tolist())
    train_idx, test_idx = [], []
    for j, a in enumerate(archs):
        (test_idx if j in test_set else train_idx).extend(groups[a].tolist())
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))
