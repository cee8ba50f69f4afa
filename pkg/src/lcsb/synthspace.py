"""Seeded synthetic search space with a known learning-curve distribution.

Mean curves follow a(t) = a_f - (a_f - a_0) * t**(-c) with a_0 = 0.1 * a_f.
The asymptote a_f comes from a linear-plus-pairwise score of the op
choices; the convergence exponent c from a second, partly correlated
score. Noise is white Gaussian with a standard deviation that decays
over epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Architecture,
    CurveDataset,
    SearchSpaceSpec,
    ops_matrix,
    substream,
)

NB201_OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")

NB201_SPACE = SearchSpaceSpec(
    node_count=4,
    edge_list=((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)),
    op_names=NB201_OPS,
    e_max=100,
    id="nb201-like",
)

_KNOWN_OP_COSTS = {
    "none": 0.0,
    "skip_connect": 0.0,
    "nor_conv_1x1": 0.35,
    "nor_conv_3x3": 1.0,
    "avg_pool_3x3": 0.1,
}

# logit(0.95); keeps every asymptote inside [0.05, 0.95]
_SCORE_LIMIT = float(np.log(0.95 / 0.05))


_ENUMERABLE = 200_000


def _linear(weights, ops):
    return weights[np.arange(ops.shape[1]), ops].sum(axis=1)


def _pairwise(table, ops):
    out = np.zeros(len(ops))
    for ea, oa, eb, ob, w in table:
        out += w * ((ops[:, int(ea)] == int(oa)) & (ops[:, int(eb)] == int(ob)))
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True, eq=False)
class SyntheticOracle:
    space: SearchSpaceSpec
    op_quality: np.ndarray  # (edges, ops)
    interaction: np.ndarray  # rows (edge_a, op_a, edge_b, op_b, weight)
    speed: np.ndarray  # (edges, ops) weights of the convergence score
    bias: float
    speed_gain: float
    noise_scale: float
    base_epoch_cost: float
    op_costs: np.ndarray  # (ops,) heaviness of each op, min 0
    master_seed: int

    def __post_init__(self):
        if not 0 < self.noise_scale <= 0.1 and self.noise_scale != 0:
            raise ValueError("noise_scale must lie in (0, 0.1] (or be exactly 0)")
        if self.base_epoch_cost <= 0:
            raise ValueError("base_epoch_cost must be positive")
        if np.any(self.op_costs < 0):
            raise ValueError("op costs must be nonnegative")

    @classmethod
    def from_seed(
        cls,
        master_seed: int = 0,
        space: SearchSpaceSpec = NB201_SPACE,
        noise_scale: float = 0.03,
        base_epoch_cost: float = 10.0,
        interaction_density: float = 0.1,
        interaction_strength: float = 0.5,
        speed_coupling: float = 0.5,
        mean_logit: float = 1.2,
        spread_logit: float = 0.7,
        speed_gain: float = 2.0,
        op_costs=None,
    ) -> "SyntheticOracle":
        rng = substream(master_seed, "synthspace", "weights")
        n_e, n_o = space.n_edges, space.n_ops
        q = rng.standard_normal((n_e, n_o))
        q -= q.mean(axis=1, keepdims=True)

        pairs = [(ea, oa, eb, ob) for ea in range(n_e) for eb in range(ea + 1, n_e)
                 for oa in range(n_o) for ob in range(n_o)]
        n_int = int(round(interaction_density * len(pairs)))
        chosen = rng.choice(len(pairs), size=n_int, replace=False) if n_int else np.array([], dtype=int)
        chosen.sort()
        w = interaction_strength * rng.standard_normal(n_int)
        inter = np.array([[*pairs[i], wi] for i, wi in zip(chosen, w)], dtype=float).reshape(n_int, 5)

        s_own = rng.standard_normal((n_e, n_o))
        s_own -= s_own.mean(axis=1, keepdims=True)
        # a single-op space has all-zero centred weights
        speed = (speed_coupling * q / max(np.abs(q).max(), 1e-12)
                 + (1 - speed_coupling) * s_own / max(np.abs(s_own).max(), 1e-12))

        # Scale the raw score so the logit stays inside [-limit, limit]: exact
        # range when the space is enumerable, triangle bound otherwise.
        if space.size <= _ENUMERABLE:
            sample = index_to_ops(np.arange(space.size), space)
            bound = np.abs(_linear(q, sample) + _pairwise(inter, sample)).max()
        else:
            sample = index_to_ops(rng.integers(0, space.size, size=20_000), space)
            bound = np.abs(q).max(axis=1).sum() + np.abs(w).sum()
        scale = min(spread_logit, _SCORE_LIMIT - abs(mean_logit)) / max(bound, 1e-12)
        q *= scale
        inter[:, 4] *= scale
        # Standardise the convergence score so c covers most of [0.3, 1.5].
        spd = _linear(speed, sample)
        speed = (speed - spd.mean() / n_e) / max(spd.std(), 1e-12)

        if op_costs is None:
            if all(n in _KNOWN_OP_COSTS for n in space.op_names):
                op_costs = [_KNOWN_OP_COSTS[n] for n in space.op_names]
            else:
                op_costs = np.linspace(0.0, 1.0, n_o)
        op_costs = np.asarray(op_costs, dtype=float)
        op_costs = op_costs - op_costs.min()

        return cls(space, q, inter, speed, float(mean_logit), float(speed_gain), float(noise_scale),
                   float(base_epoch_cost), op_costs, int(master_seed))

    # -- vectorised internals -------------------------------------------------

    def _params(self, ops: np.ndarray):
        ops = np.atleast_2d(ops)
        a_f = _sigmoid(self.bias + _linear(self.op_quality, ops) + _pairwise(self.interaction, ops))
        c = 0.3 + 1.2 * _sigmoid(self.speed_gain * _linear(self.speed, ops))
        return a_f, c

    def mean_curves_ops(self, ops: np.ndarray) -> np.ndarray:
        a_f, c = self._params(ops)
        t = np.arange(1, self.space.e_max + 1, dtype=float)
        a0 = 0.1 * a_f
        return a_f[:, None] - (a_f - a0)[:, None] * t[None, :] ** (-c[:, None])

    def sigma(self) -> np.ndarray:
        """Per-epoch noise standard deviation."""
        t = np.arange(1, self.space.e_max + 1, dtype=float)
        return self.noise_scale * (0.3 + 0.7 * np.exp(-3.0 * t / self.space.e_max))

    def noise_rng(self, arch: Architecture, seed: int) -> np.random.Generator:
        return substream(self.master_seed, "noise", int(seed) & 0xFFFFFFFF, *arch.ops)

    def epoch_costs_ops(self, ops: np.ndarray) -> np.ndarray:
        ops = np.atleast_2d(ops)
        proxy = self.op_costs[ops].sum(axis=1) / self.space.n_edges
        return self.base_epoch_cost * (1.0 + proxy)

    # -- public operations ----------------------------------------------------

    def mean_curve(self, arch: Architecture) -> np.ndarray:
        return self.mean_curves_ops(ops_matrix([arch], self.space))[0]

    def sample_curve(self, arch: Architecture, seed: int) -> np.ndarray:
        mean = self.mean_curve(arch)
        if self.noise_scale == 0:
            return mean
        eps = self.noise_rng(arch, seed).standard_normal(self.space.e_max) * self.sigma()
        return np.clip(mean + eps, 0.0, 1.0)

    def epoch_cost(self, arch: Architecture) -> float:
        return float(self.epoch_costs_ops(ops_matrix([arch], self.space))[0])

    def asymptote_and_rate(self, arch: Architecture) -> tuple[float, float]:
        a_f, c = self._params(ops_matrix([arch], self.space))
        return float(a_f[0]), float(c[0])

    def all_ops(self) -> np.ndarray:
        return index_to_ops(np.arange(self.space.size), self.space)

    def best_final_accuracy(self) -> float:
        """Maximum mean accuracy at E_max over the whole space (enumerated)."""
        best = -np.inf
        idx = np.arange(self.space.size)
        for chunk in np.array_split(idx, max(1, self.space.size // 50_000)):
            best = max(best, float(self.mean_curves_ops(index_to_ops(chunk, self.space))[:, -1].max()))
        return best


# Module-level operations mirror the oracle's methods.

def oracle_mean_curve(oracle: SyntheticOracle, arch: Architecture) -> np.ndarray:
    return oracle.mean_curve(arch)


def oracle_sample_curve(oracle: SyntheticOracle, arch: Architecture, seed: int) -> np.ndarray:
    return oracle.sample_curve(arch, seed)


def epoch_cost(oracle: SyntheticOracle, arch: Architecture) -> float:
    return oracle.epoch_cost(arch)


def index_to_ops(index, space: SearchSpaceSpec) -> np.ndarray:
    """Mixed-radix decode of architecture indices (edge 0 most significant)."""
    index = np.asarray(index, dtype=np.int64)
    out = np.empty((len(index), space.n_edges), dtype=np.int64)
    rem = index.copy()
    for e in range(space.n_edges - 1, -1, -1):
        out[:, e] = rem % space.n_ops
        rem //= space.n_ops
    return out


def ops_to_index(ops, space: SearchSpaceSpec) -> np.ndarray:
    ops = np.atleast_2d(ops)
    idx = np.zeros(len(ops), dtype=np.int64)
    for e in range(space.n_edges):
        idx = idx * space.n_ops + ops[:, e]
    return idx


def random_architecture(space: SearchSpaceSpec, seed) -> Architecture:
    """Uniform architecture. `seed` may be an int or a numpy Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "random_architecture")
    return Architecture(tuple(int(o) for o in rng.integers(0, space.n_ops, size=space.n_edges)))


def neighbors(space: SearchSpaceSpec, arch: Architecture) -> list[Architecture]:
    space.validate(arch)
    out = []
    for e in range(space.n_edges):
        for o in range(space.n_ops):
            if o != arch.ops[e]:
                ops = list(arch.ops)
                ops[e] = o
                out.append(Architecture(tuple(ops)))
    return out


def mutate(space: SearchSpaceSpec, arch: Architecture, seed) -> Architecture:
    """Change one uniformly chosen edge to a uniformly chosen different op."""
    space.validate(arch)
    if space.n_ops < 2:
        raise ValueError("cannot mutate in a space with a single op")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "mutate")
    e = int(rng.integers(space.n_edges))
    shift = int(rng.integers(1, space.n_ops))
    ops = list(arch.ops)
    ops[e] = (ops[e] + shift) % space.n_ops
    return Architecture(tuple(ops))


def sample_distinct_ops(space: SearchSpaceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n > space.size:
        raise ValueError(f"requested {n} distinct architectures from a space of {space.size}")
    if space.size <= 10_000_000:
        return index_to_ops(rng.choice(space.size, size=n, replace=False), space)
    seen: dict[tuple, None] = {}
    while len(seen) < n:
        seen.setdefault(tuple(rng.integers(0, space.n_ops, size=space.n_edges)), None)
    return np.array(list(seen), dtype=np.int64)


def generate_dataset(oracle: SyntheticOracle, n_arch: int, seeds_per_arch: int, rng_seed: int) -> CurveDataset:
    """Sample `n_arch` distinct architectures and `seeds_per_arch` noisy
    curves for each. Record seeds are drawn from `rng_seed` so datasets with
    different seeds carry independent noise."""
    space = oracle.space
    if n_arch > space.size:
        raise ValueError(f"n_arch={n_arch} exceeds the space size {space.size}")
    if seeds_per_arch < 1:
        raise ValueError("seeds_per_arch must be >= 1")
    rng = substream(rng_seed, "generate_dataset")
    ops = sample_distinct_ops(space, n_arch, rng)
    seeds = rng.integers(0, 2**31 - 1, size=(n_arch, seeds_per_arch))
    means = oracle.mean_curves_ops(ops)
    sig = oracle.sigma()
    costs = oracle.epoch_costs_ops(ops)

    archs, rec_seeds, curves, rec_costs = [], [], [], []
    for i in range(n_arch):
        arch = Architecture(tuple(ops[i]))
        for s in seeds[i]:
            if oracle.noise_scale == 0:
                curves.append(means[i])
            else:
                eps = oracle.noise_rng(arch, int(s)).standard_normal(space.e_max) * sig
                curves.append(np.clip(means[i] + eps, 0.0, 1.0))
            archs.append(arch)
            rec_seeds.append(int(s))
            rec_costs.append(costs[i])
    return CurveDataset(space, archs, np.array(rec_seeds, dtype=np.int64),
                        np.array(curves).reshape(len(archs), space.e_max), np.array(rec_costs))
