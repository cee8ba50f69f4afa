"""Single-fidelity search algorithms behind an ask/tell interface.

`ask()` returns a candidate batch and a `warm` flag. Warm batches (random
initialisation, local-search restarts) are always trained to E_max; the
LCE wrapper only prunes non-warm batches. `tell()` receives fully trained
architectures and `discard()` the ones the wrapper dropped early.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .. import regress
from ..core import Architecture, SearchSpaceSpec, encode_matrix, substream
from ..synthspace import mutate, neighbors, random_architecture

REA_POPULATION = 20
REA_SAMPLE = 10
BANANAS_INIT = 10
BANANAS_K = 20
BANANAS_TOP = 4
BANANAS_ENSEMBLE = 3
BANANAS_MLP = {"hidden": 64, "learning_rate": 0.01, "epochs": 200, "batch": 32}


def _unseen_random(space: SearchSpaceSpec, rng: np.random.Generator, seen, tries: int = 100) -> Architecture:
    """A random architecture not in `seen`; any random one once the space
    looks exhausted."""
    for _ in range(tries):
        a = random_architecture(space, rng)
        if a not in seen:
            return a
    return a


def rs_candidates(space: SearchSpaceSpec, rng: np.random.Generator) -> list[Architecture]:
    return [random_architecture(space, rng)]


def mutate_n(space: SearchSpaceSpec, arch: Architecture, n: int, rng: np.random.Generator) -> Architecture:
    """Chain of n single-edge mutations, so at most n edges differ."""
    if space.n_ops < 2:
        return arch
    for _ in range(n):
        arch = mutate(space, arch, rng)
    return arch


class SearchAlgorithm:
    name = "base"

    def __init__(self, space: SearchSpaceSpec, seed: int):
        self.space = space
        self.seed = int(seed)
        self.rng = substream(seed, "candidates", self.name)

    def ask(self) -> tuple[list[Architecture], bool]:
        raise NotImplementedError

    def tell(self, arch: Architecture, curve: np.ndarray) -> None:
        pass

    def discard(self, arch: Architecture, predicted: float | None = None) -> None:
        pass


class RandomSearch(SearchAlgorithm):
    name = "rs"

    def ask(self):
        return rs_candidates(self.space, self.rng), True


class LocalSearch(SearchAlgorithm):
    """Best-improvement local search with random restarts."""

    name = "ls"

    def __init__(self, space, seed):
        super().__init__(space, seed)
        self.current: Architecture | None = None
        self.values: dict[Architecture, float] = {}
        self.seen: set[Architecture] = set()

    def candidates(self) -> list[Architecture]:
        if self.current is not None:
            nb = [a for a in neighbors(self.space, self.current) if a not in self.seen]
            if nb:
                order = self.rng.permutation(len(nb))
                return [nb[i] for i in order]
            # every neighbour evaluated and none better: local optimum
            self.current = None
        return [_unseen_random(self.space, self.rng, self.seen)]

    def ask(self):
        batch = self.candidates()
        # a start or restart is a lone random architecture
        return batch, self.current is None

    def tell(self, arch, curve):
        self.seen.add(arch)
        acc = float(curve[-1])
        self.values[arch] = acc
        if self.current is None or acc > self.values[self.current]:
            self.current = arch

    def discard(self, arch, predicted=None):
        self.seen.add(arch)


def ls_candidates(ls: LocalSearch) -> list[Architecture]:
    return ls.candidates()


class RegularizedEvolution(SearchAlgorithm):
    """Aging evolution: tournament of `sample` from a FIFO population."""

    name = "rea"

    def __init__(self, space, seed, population=REA_POPULATION, sample=REA_SAMPLE, batch=1):
        super().__init__(space, seed)
        if sample < 1 or population < 1 or batch < 1:
            raise ValueError("population, sample and batch must be >= 1")
        self.population_size = int(population)
        self.sample = int(sample)
        self.batch = int(batch)
        self.population: deque = deque(maxlen=self.population_size)
        self._warm = False

    def step(self) -> Architecture:
        return rea_step(self.space, self.population, self.sample, self.rng)

    def ask(self):
        if not self._warm:
            self._warm = True
            return [random_architecture(self.space, self.rng) for _ in range(self.population_size)], True
        return [self.step() for _ in range(self.batch)], False

    def tell(self, arch, curve):
        self.population.append((arch, float(curve[-1])))


def rea_step(space: SearchSpaceSpec, population, sample: int, rng: np.random.Generator) -> Architecture:
    pop = list(population)
    if not pop:
        return random_architecture(space, rng)
    idx = rng.choice(len(pop), size=min(sample, len(pop)), replace=False)
    # ties go to the older member
    parent = pop[min(idx, key=lambda i: (-pop[i][1], i))][0]
    return mutate_n(space, parent, 1, rng)


class Bananas(SearchAlgorithm):
    """Neural-predictor BO: a 3-MLP ensemble with independent Thompson
    sampling over a mutation pool."""

    name = "bananas"

    def __init__(self, space, seed, k=BANANAS_K, n_init=BANANAS_INIT, pseudo_labels=False):
        super().__init__(space, seed)
        self.k = int(k)
        self.n_init = int(n_init)
        self.pseudo_labels = bool(pseudo_labels)
        self.data: list[tuple[Architecture, float]] = []
        self.pseudo: list[tuple[Architecture, float]] = []
        self.seen: set[Architecture] = set()
        self.ens_rng = substream(seed, "ensemble")

    def ask(self):
        if len(self.data) < self.n_init:
            out = []
            for _ in range(self.n_init - len(self.data)):
                a = _unseen_random(self.space, self.rng, self.seen | set(out))
                out.append(a)
            return out, True
        return self.step(), False

    def fit_ensemble(self) -> list[regress.FittedRegressor]:
        rows = self.data + (self.pseudo if self.pseudo_labels else [])
        X = encode_matrix([a for a, _ in rows], self.space)
        y = np.array([v for _, v in rows])
        seeds = self.ens_rng.integers(0, 2**31 - 1, size=BANANAS_ENSEMBLE)
        return [regress.fit(regress.RegressorConfig("mlp", BANANAS_MLP, int(s)), X, y) for s in seeds]

    def candidate_pool(self) -> list[Architecture]:
        top = sorted(self.data, key=lambda r: -r[1])[:BANANAS_TOP]
        pool = []
        for parent, _ in top:
            for dist in range(1, 6):
                for _ in range(2):
                    pool.append(mutate_n(self.space, parent, dist, self.rng))
        return pool

    def step(self) -> list[Architecture]:
        return bananas_step(self)

    def tell(self, arch, curve):
        self.seen.add(arch)
        self.data.append((arch, float(curve[-1])))

    def discard(self, arch, predicted=None):
        self.seen.add(arch)
        if predicted is not None:
            self.pseudo.append((arch, float(predicted)))


def bananas_step(b: Bananas) -> list[Architecture]:
    ens = b.fit_ensemble()
    pool = list(dict.fromkeys(a for a in b.candidate_pool() if a not in b.seen))
    if not pool:
        return [_unseen_random(b.space, b.rng, b.seen)]
    X = encode_matrix(pool, b.space)
    preds = np.stack([m.predict(X)[:, 0] for m in ens])  # (members, candidates)
    member = b.rng.integers(0, len(ens), size=len(pool))
    its = preds[member, np.arange(len(pool))]
    order = np.argsort(-its, kind="stable")
    return [pool[i] for i in order[: b.k]]


ALGORITHMS = {
    "rs": RandomSearch,
    "ls": LocalSearch,
    "rea": RegularizedEvolution,
    "bananas": Bananas,
}


def top_n(keep_fraction: float, n: int) -> int:
    return max(1, math.ceil(keep_fraction * n - 1e-12))
