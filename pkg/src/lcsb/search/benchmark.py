"""Benchmarks behind one training contract, and the per-trial session that
charges simulated time for every training call."""

from __future__ import annotations

import numpy as np

from ..core import Architecture, SearchSpaceSpec, substream
from ..synthspace import SyntheticOracle, index_to_ops
from .history import RunHistory


class BudgetExhausted(Exception):
    """The next training call would exceed the trial's budget."""


class Benchmark:
    """Common interface: a fixed curve per (arch, curve seed), a per-epoch
    cost, and the true final accuracy when it is known."""

    space: SearchSpaceSpec

    def curve(self, arch: Architecture, curve_seed: int) -> np.ndarray:
        raise NotImplementedError

    def epoch_cost(self, arch: Architecture) -> float:
        raise NotImplementedError

    def true_final(self, arch: Architecture) -> float | None:
        return None

    def optimum(self) -> float:
        raise NotImplementedError

    def query_surcharge(self, arch: Architecture) -> float:
        """Extra seconds charged on an architecture's first query."""
        return 0.0

    def mean_epoch_cost(self) -> float:
        raise NotImplementedError


class OracleBenchmark(Benchmark):
    def __init__(self, oracle: SyntheticOracle):
        self.oracle = oracle
        self.space = oracle.space
        self._optimum = None

    def curve(self, arch, curve_seed):
        return self.oracle.sample_curve(arch, curve_seed)

    def epoch_cost(self, arch):
        return self.oracle.epoch_cost(arch)

    def true_final(self, arch):
        return float(self.oracle.mean_curve(arch)[-1])

    def optimum(self):
        if self._optimum is None:
            self._optimum = self.oracle.best_final_accuracy()
        return self._optimum

    def mean_epoch_cost(self):
        return float(self.oracle.base_epoch_cost * (1.0 + self.oracle.op_costs.mean()))


class SurrogateBenchmark(Benchmark):
    """Queries a fitted surrogate. Per-epoch cost comes from `epoch_cost`
    (seconds, or a callable arch -> seconds). Augmented surrogates need
    `augmentation_fn(arch, curve_seed)` and charge the prefix epochs the
    augmentation reads once per architecture."""

    def __init__(self, model, epoch_cost=1.0, augmentation_fn=None):
        self.model = model
        self.space = model.space
        self._cost = epoch_cost
        self.augmentation_fn = augmentation_fn
        if model.n_aug and augmentation_fn is None:
            raise ValueError("an augmented surrogate needs an augmentation_fn")
        self._optimum = None

    def _aug(self, arch, seed):
        return None if not self.model.n_aug else self.augmentation_fn(arch, seed)

    def curve(self, arch, curve_seed):
        return self.model.query_noisy(arch, curve_seed, augmentation=self._aug(arch, curve_seed))

    def epoch_cost(self, arch):
        return float(self._cost(arch)) if callable(self._cost) else float(self._cost)

    def true_final(self, arch):
        if self.model.n_aug:
            return None
        return float(self.model.query_mean(arch)[-1])

    def optimum(self):
        if self._optimum is None:
            if self.model.n_aug:
                raise ValueError("the optimum of an augmented surrogate is not defined")
            best = -np.inf
            for chunk in np.array_split(np.arange(self.space.size), max(1, self.space.size // 20_000)):
                archs = [Architecture(tuple(r)) for r in index_to_ops(chunk, self.space)]
                best = max(best, float(self.model.mean_curves(archs)[:, -1].max()))
            self._optimum = best
        return self._optimum

    def query_surcharge(self, arch):
        return max(self.model.config.aug_epochs(), default=0) * self.epoch_cost(arch)

    def mean_epoch_cost(self):
        if callable(self._cost):
            raise ValueError("mean cost unknown for a callable cost model")
        return float(self._cost)


class Session:
    """One trial: a simulated clock, a budget, and resumable training.

    Training an architecture further than before charges only the new
    epochs. Asking again for epochs already trained counts as retraining
    from scratch and charges them in full, so every call costs time.
    """

    def __init__(self, benchmark: Benchmark, budget: float, seed: int):
        if budget <= 0:
            raise ValueError("budget must be positive")
        self.benchmark = benchmark
        self.budget = float(budget)
        self.e_max = benchmark.space.e_max
        self.curve_seed = int(substream(seed, "benchmark").integers(0, 2**31 - 1))
        self.clock = 0.0
        self.trained: dict[Architecture, int] = {}
        self._curves: dict[Architecture, np.ndarray] = {}
        self.history = RunHistory(benchmark.optimum(), budget)

    def curve(self, arch: Architecture) -> np.ndarray:
        c = self._curves.get(arch)
        if c is None:
            c = self._curves[arch] = np.asarray(self.benchmark.curve(arch, self.curve_seed))
        return c

    def charge_for(self, arch: Architecture, epoch: int) -> tuple[float, int]:
        done = self.trained.get(arch, 0)
        cost = self.benchmark.epoch_cost(arch)
        start = done if epoch > done else 0
        extra = self.benchmark.query_surcharge(arch) if arch not in self.trained else 0.0
        return (epoch - start) * cost + extra, start

    def train(self, arch: Architecture, epoch: int) -> np.ndarray:
        """Train to `epoch` and return the observed prefix curve[:epoch]."""
        epoch = int(epoch)
        if not 1 <= epoch <= self.e_max:
            raise ValueError(f"epoch {epoch} outside [1, {self.e_max}]")
        charge, start = self.charge_for(arch, epoch)
        if self.clock + charge > self.budget:
            raise BudgetExhausted
        self.clock += charge
        self.trained[arch] = max(self.trained.get(arch, 0), epoch)
        c = self.curve(arch)
        self.history.log_train(self.clock, arch, start, epoch, c[start:epoch], charge)
        if epoch == self.e_max:
            self.history.complete(self.clock, arch, float(c[-1]), self.benchmark.true_final(arch))
        return c[:epoch].copy()
