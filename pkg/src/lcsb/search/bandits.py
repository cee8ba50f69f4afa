"""Multi-fidelity search: successive halving, Hyperband and BOHB.

Fidelity is measured in epochs. A rung's budget in seconds follows from
the benchmark's per-epoch cost, and promoted architectures resume
training, so only the extra epochs are charged.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..core import Architecture, SearchSpaceSpec, decode, encode_matrix, substream
from ..synthspace import random_architecture
from .benchmark import Session

ETA = 3
R_MIN = 1
TPE_GOOD = 0.15
TPE_SAMPLES = 24
TPE_RANDOM = 0.1
BANDWIDTH_FLOOR = 1e-3


def s_max(e_max: int, eta: float = ETA, r_min: float = R_MIN) -> int:
    """floor(log_eta(e_max / r_min)), computed without float log error."""
    if eta < 2:
        raise ValueError("eta must be >= 2")
    if not 0 < r_min <= e_max:
        raise ValueError("r_min must lie in (0, e_max]")
    s = 0
    while r_min * eta ** (s + 1) <= e_max * (1 + 1e-12):
        s += 1
    return s


def sh_rungs(n: int, r: float, eta: float, e_max: int) -> list[tuple[int, int]]:
    """(count, epochs) per rung for successive halving from n archs at r
    epochs. Each rung keeps floor(n * eta^-i); the last rung is clamped to
    e_max and is reached early once a single architecture remains."""
    if eta < 2:
        raise ValueError("eta must be >= 2")
    if n < 1:
        raise ValueError("successive halving needs n >= 1")
    rungs = []
    i = 0
    while True:
        n_i = n if i == 0 else int(math.floor(n / eta**i + 1e-9))
        e = r * eta**i
        if e >= e_max * (1 - 1e-9) or n_i <= 1:
            rungs.append((max(n_i, 1), e_max))
            return rungs
        rungs.append((n_i, min(max(int(round(e)), 1), e_max)))
        i += 1


def hb_schedule(e_max: int, eta: float = ETA, r_min: float = R_MIN) -> list[list[tuple[int, int]]]:
    """Brackets s = s_max..0; bracket s starts n = ceil((s_max+1)/(s+1) eta^s)
    archs at r = e_max eta^-s epochs."""
    sm = s_max(e_max, eta, r_min)
    out = []
    for s in range(sm, -1, -1):
        n = int(math.ceil((sm + 1) / (s + 1) * eta**s - 1e-9))
        out.append(sh_rungs(n, e_max * eta ** (-s), eta, e_max))
    return out


def successive_halving(session: Session, archs: list[Architecture], rungs, on_observe=None) -> None:
    """Train `archs` through `rungs` (from sh_rungs), promoting the best
    observed accuracy at each rung. Ties go to the earlier evaluation."""
    alive = list(archs)
    for i, (_, epochs) in enumerate(rungs):
        accs = []
        for a in alive:
            acc = float(session.train(a, epochs)[-1])
            accs.append(acc)
            if on_observe is not None:
                on_observe(a, epochs, acc)
        if i + 1 < len(rungs):
            keep = rungs[i + 1][0]
            order = sorted(range(len(alive)), key=lambda j: (-accs[j], j))
            alive = [alive[j] for j in order[:keep]]


class RandomProposer:
    def __init__(self, space: SearchSpaceSpec, seed: int):
        self.space = space
        self.rng = substream(seed, "candidates", "hb")

    def propose(self) -> Architecture:
        return random_architecture(self.space, self.rng)

    def observe(self, arch, epochs, acc) -> None:
        pass


class TPEProposer:
    """Per-fidelity good/bad kernel densities over one-hot encodings."""

    def __init__(self, space: SearchSpaceSpec, seed: int):
        self.space = space
        self.rng = substream(seed, "candidates", "bohb")
        self.obs: dict[int, list[tuple[Architecture, float]]] = defaultdict(list)

    def observe(self, arch, epochs, acc) -> None:
        self.obs[epochs].append((arch, acc))

    def propose(self) -> Architecture:
        return bohb_propose(self.obs, self.space, self.rng)


def scott_bandwidth(X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    sd = X.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    return np.maximum(sd * n ** (-1.0 / (d + 4)), BANDWIDTH_FLOOR)


def kde_logpdf(points: np.ndarray, data: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian KDE at each row of `points`."""
    z = (points[:, None, :] - data[None, :, :]) / h
    log_k = -0.5 * np.sum(z * z, axis=2) - np.sum(np.log(h)) - 0.5 * data.shape[1] * np.log(2 * np.pi)
    m = log_k.max(axis=1, keepdims=True)
    return (m + np.log(np.mean(np.exp(log_k - m), axis=1, keepdims=True)))[:, 0]


def round_one_hot(X: np.ndarray, space: SearchSpaceSpec) -> np.ndarray:
    """Snap each edge block to the one-hot vector of its largest entry."""
    blocks = X.reshape(len(X), space.n_edges, space.n_ops)
    out = np.zeros_like(blocks)
    idx = blocks.argmax(axis=2)
    np.put_along_axis(out, idx[:, :, None], 1.0, axis=2)
    return out.reshape(len(X), -1)


def bohb_propose(rung_observations, space: SearchSpaceSpec, rng: np.random.Generator,
                 random_fraction: float = TPE_RANDOM) -> Architecture:
    """TPE proposal from the highest fidelity with at least d + 2
    observations. A `random_fraction` of proposals, and every proposal
    while no fidelity has enough observations, are uniform random."""
    d = space.encoding_length
    ready = [e for e, rows in rung_observations.items() if len(rows) >= d + 2]
    if not ready or rng.random() < random_fraction:
        return random_architecture(space, rng)
    rows = rung_observations[max(ready)]
    # stable sort keeps earlier observations first among ties
    order = sorted(range(len(rows)), key=lambda i: -rows[i][1])
    n_good = max(1, int(TPE_GOOD * len(rows)))
    X = encode_matrix([r[0] for r in rows], space)
    good, bad = X[order[:n_good]], X[order[n_good:]]
    h_good, h_bad = scott_bandwidth(good), scott_bandwidth(bad)
    centres = good[rng.integers(0, len(good), size=TPE_SAMPLES)]
    samples = round_one_hot(centres + rng.standard_normal(centres.shape) * h_good, space)
    score = kde_logpdf(samples, good, h_good) - kde_logpdf(samples, bad, h_bad)
    return decode(samples[int(np.argmax(score))], space)


def hyperband(session: Session, proposer, eta: float = ETA, r_min: float = R_MIN) -> None:
    """Cycle Hyperband brackets until the budget runs out (the session
    raises BudgetExhausted)."""
    brackets = hb_schedule(session.e_max, eta, r_min)
    while True:
        for rungs in brackets:
            archs = [proposer.propose() for _ in range(rungs[0][0])]
            successive_halving(session, archs, rungs, proposer.observe)
