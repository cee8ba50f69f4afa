"""Domain types shared across the package: search spaces, architectures,
encodings, learning curves and curve datasets.

Epochs are 1-indexed everywhere in the public API; arrays are 0-indexed
internally.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class SpaceError(ValueError):
    """Raised for invalid search spaces or architectures."""


@dataclass(frozen=True)
class SearchSpaceSpec:
    node_count: int
    edge_list: tuple[tuple[int, int], ...]
    op_names: tuple[str, ...]
    e_max: int
    id: str

    def __post_init__(self):
        object.__setattr__(self, "edge_list", tuple(tuple(int(v) for v in e) for e in self.edge_list))
        object.__setattr__(self, "op_names", tuple(self.op_names))
        if not self.op_names:
            raise SpaceError("op_names must be nonempty")
        if self.e_max < 2:
            raise SpaceError(f"e_max must be >= 2, got {self.e_max}")
        if not self.edge_list:
            raise SpaceError("edge_list must be nonempty")
        _check_single_source_sink_dag(self.node_count, self.edge_list)

    @property
    def n_edges(self) -> int:
        return len(self.edge_list)

    @property
    def n_ops(self) -> int:
        return len(self.op_names)

    @property
    def encoding_length(self) -> int:
        return self.n_edges * self.n_ops

    @property
    def size(self) -> int:
        return self.n_ops ** self.n_edges

    def validate(self, arch: "Architecture") -> None:
        if len(arch.ops) != self.n_edges:
            raise SpaceError(f"architecture has {len(arch.ops)} op choices, space has {self.n_edges} edges")
        for i, op in enumerate(arch.ops):
            if not 0 <= op < self.n_ops:
                raise IndexError(f"op index {op} on edge {i} out of range [0, {self.n_ops})")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "node_count": self.node_count,
            "edge_list": [list(e) for e in self.edge_list],
            "op_names": list(self.op_names),
            "e_max": self.e_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpaceSpec":
        return cls(
            node_count=int(d["node_count"]),
            edge_list=tuple(tuple(e) for e in d["edge_list"]),
            op_names=tuple(d["op_names"]),
            e_max=int(d["e_max"]),
            id=str(d["id"]),
        )


def _check_single_source_sink_dag(n: int, edges) -> None:
    if n < 2:
        raise SpaceError("need at least an input and an output node")
    succ = [[] for _ in range(n)]
    indeg = [0] * n
    outdeg = [0] * n
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise SpaceError(f"bad edge ({u}, {v})")
        succ[u].append(v)
        indeg[v] += 1
        outdeg[u] += 1
    # Kahn's algorithm for acyclicity
    deg = indeg[:]
    stack = [i for i in range(n) if deg[i] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in succ[u]:
            deg[v] -= 1
            if deg[v] == 0:
                stack.append(v)
    if seen != n:
        raise SpaceError("edge_list contains a cycle")
    sources = [i for i in range(n) if indeg[i] == 0]
    sinks = [i for i in range(n) if outdeg[i] == 0]
    if len(sources) != 1 or len(sinks) != 1:
        raise SpaceError(f"cell must have one input and one output node (sources={sources}, sinks={sinks})")


@dataclass(frozen=True, order=True)
class Architecture:
    """One operation index per edge of the cell."""

    ops: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(int(o) for o in self.ops))

    def __str__(self):
        return "-".join(map(str, self.ops))

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        return cls(tuple(int(t) for t in text.split("-")))


@dataclass(frozen=True, eq=False)
class Encoding:
    """One-hot op choices per edge, optionally followed by auxiliary
    features (partial accuracies) in [0, 1]."""

    values: np.ndarray
    n_aux: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.n_aux and np.any((v[-self.n_aux:] < 0) | (v[-self.n_aux:] > 1)):
            raise ValueError("auxiliary features must lie in [0, 1]")

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, Encoding) and self.n_aux == other.n_aux and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.values.tobytes(), self.n_aux))

    def with_aux(self, aux: Sequence[float]) -> "Encoding":
        return Encoding(np.concatenate([self.values, np.asarray(aux, dtype=float)]), self.n_aux + len(aux))


def encode(arch: Architecture, space: SearchSpaceSpec) -> Encoding:
    space.validate(arch)
    bits = np.zeros((space.n_edges, space.n_ops))
    bits[np.arange(space.n_edges), arch.ops] = 1.0
    return Encoding(bits.ravel())


def encode_matrix(archs: Sequence[Architecture], space: SearchSpaceSpec) -> np.ndarray:
    """Stack one-hot encodings of many architectures into an (N, d) array."""
    ops = ops_matrix(archs, space)
    out = np.zeros((len(ops), space.n_edges, space.n_ops))
    if len(ops):
        out[np.arange(len(ops))[:, None], np.arange(space.n_edges)[None, :], ops] = 1.0
    return out.reshape(len(ops), space.encoding_length)


def ops_matrix(archs: Sequence[Architecture], space: SearchSpaceSpec) -> np.ndarray:
    ops = np.array([a.ops for a in archs], dtype=np.int64).reshape(len(archs), space.n_edges)
    if ops.size and (ops.min() < 0 or ops.max() >= space.n_ops):
        raise IndexError("op index out of range for space")
    return ops


def decode(bits: np.ndarray, space: SearchSpaceSpec) -> Architecture:
    """Inverse of encode on the one-hot region (argmax per edge block)."""
    blocks = np.asarray(bits[: space.encoding_length]).reshape(space.n_edges, space.n_ops)
    return Architecture(tuple(int(i) for i in blocks.argmax(axis=1)))


def check_curve(values, e_max: int | None = None) -> np.ndarray:
    """Validate a learning curve and return it as a float array."""
    c = np.asarray(values, dtype=float)
    if c.ndim != 1:
        raise ValueError("learning curve must be one-dimensional")
    if e_max is not None and len(c) != e_max:
        raise ValueError(f"curve has {len(c)} values, expected {e_max}")
    if not np.all(np.isfinite(c)) or np.any((c < 0) | (c > 1)):
        raise ValueError("learning curve values must lie in [0, 1]")
    return c


def mean_curve(curves: Sequence) -> np.ndarray:
    if len(curves) == 0:
        raise ValueError("mean_curve of an empty list")
    m = np.asarray([np.asarray(c, dtype=float) for c in curves])
    if m.ndim != 2:
        raise ValueError("curves must share one length")
    return m.mean(axis=0)


def curve_prefix(curve, epoch: int) -> np.ndarray:
    c = np.asarray(curve)
    if not 1 <= epoch <= len(c):
        raise ValueError(f"epoch {epoch} outside [1, {len(c)}]")
    return c[:epoch].copy()


@dataclass(frozen=True)
class CurveRecord:
    arch: Architecture
    seed: int
    curve: np.ndarray
    epoch_cost: float | None = None


@dataclass(eq=False)
class CurveDataset:
    """Learning curves stored as one (N, E_max) matrix with parallel
    architecture / seed / cost columns."""

    space: SearchSpaceSpec
    archs: list[Architecture]
    seeds: np.ndarray
    curves: np.ndarray
    epoch_costs: np.ndarray | None = None
    _enc: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.archs = list(self.archs)
        self.seeds = np.asarray(self.seeds, dtype=np.int64).reshape(-1)
        self.curves = np.asarray(self.curves, dtype=float).reshape(len(self.archs), self.space.e_max)
        n = len(self.archs)
        if len(self.seeds) != n:
            raise ValueError("seeds and archs differ in length")
        if self.epoch_costs is not None:
            self.epoch_costs = np.asarray(self.epoch_costs, dtype=float).reshape(-1)
            if len(self.epoch_costs) != n:
                raise ValueError("epoch_costs and archs differ in length")
        if n:
            if not np.all(np.isfinite(self.curves)) or self.curves.min() < 0 or self.curves.max() > 1:
                raise ValueError("curve values must lie in [0, 1]")
            ops_matrix(self.archs, self.space)

    def __len__(self):
        return len(self.archs)

    def __iter__(self) -> Iterator[CurveRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> CurveRecord:
        cost = None if self.epoch_costs is None else float(self.epoch_costs[i])
        return CurveRecord(self.archs[i], int(self.seeds[i]), self.curves[i], cost)

    @property
    def encodings(self) -> np.ndarray:
        if self._enc is None:
            self._enc = encode_matrix(self.archs, self.space)
        return self._enc

    def subset(self, idx) -> "CurveDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return CurveDataset(
            self.space,
            [self.archs[i] for i in idx],
            self.seeds[idx],
            self.curves[idx],
            None if self.epoch_costs is None else self.epoch_costs[idx],
        )

    def groups(self) -> dict[Architecture, np.ndarray]:
        """Record indices per distinct architecture, in first-seen order."""
        out: dict[Architecture, list[int]] = {}
        for i, a in enumerate(self.archs):
            out.setdefault(a, []).append(i)
        return {a: np.array(v) for a, v in out.items()}

    def unique_archs(self) -> list[Architecture]:
        return list(self.groups())

    def equals(self, other: "CurveDataset") -> bool:
        if self.space != other.space or self.archs != other.archs:
            return False
        if not (np.array_equal(self.seeds, other.seeds) and np.array_equal(self.curves, other.curves)):
            return False
        if (self.epoch_costs is None) != (other.epoch_costs is None):
            return False
        return self.epoch_costs is None or np.array_equal(self.epoch_costs, other.epoch_costs)


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator derived from a master seed and a path of names.

    Names may be strings or ints; strings are hashed with CRC-32 so the
    derivation is stable across processes and platforms.
    """
    key = tuple(zlib.crc32(n.encode()) if isinstance(n, str) else int(n) for n in names)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
