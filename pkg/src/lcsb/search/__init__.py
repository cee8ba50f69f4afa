"""NAS algorithms simulated on a benchmark under a simulated wall clock."""

from __future__ import annotations

from dataclasses import dataclass, field

from .algorithms import (ALGORITHMS, Bananas, LocalSearch, RandomSearch, RegularizedEvolution,
                         bananas_step, ls_candidates, mutate_n, rea_step, rs_candidates, top_n)
from .bandits import (RandomProposer, TPEProposer, bohb_propose, hb_schedule, hyperband, s_max,
                      sh_rungs, successive_halving)
from .benchmark import Benchmark, BudgetExhausted, OracleBenchmark, Session, SurrogateBenchmark
from .history import RunHistory, checkpoints
from .lcewrap import EXTRAPOLATORS, default_e_few, lce_wrap, run_single_fidelity

ALGORITHM_IDS = ("rs", "ls", "rea", "bananas", "hb", "bohb")
LCE_BASES = ("ls", "rea", "bananas")
LCE_REA_BATCH = 10

PARAMS = {
    "rs": (),
    "ls": (),
    "rea": ("population", "sample", "batch"),
    "bananas": ("k", "n_init", "pseudo_labels"),
    "hb": ("eta", "r_min"),
    "bohb": ("eta", "r_min"),
}
LCE_KEYS = ("extrapolator", "e_few", "keep_fraction")


@dataclass(frozen=True)
class SearchConfig:
    """One algorithm run. `lce` turns on early stopping, e.g.
    {"extrapolator": "model_based", "e_few": 20, "keep_fraction": 0.2}."""

    algorithm: str
    budget_seconds: float
    seed: int = 0
    params: dict = field(default_factory=dict)
    lce: dict | None = None
    label: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHM_IDS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHM_IDS}")
        if not self.budget_seconds > 0:
            raise ValueError("budget_seconds must be positive")
        unknown = set(self.params) - set(PARAMS[self.algorithm])
        if unknown:
            raise ValueError(f"unknown {self.algorithm} parameters: {sorted(unknown)}")
        if self.lce is not None:
            if self.algorithm not in LCE_BASES:
                raise ValueError(f"LCE wraps only {LCE_BASES}, not {self.algorithm!r}")
            bad = set(self.lce) - set(LCE_KEYS)
            if bad:
                raise ValueError(f"unknown lce keys: {sorted(bad)}")
            if self.lce.get("extrapolator", "model_based") not in EXTRAPOLATORS:
                raise ValueError(f"unknown extrapolator {self.lce['extrapolator']!r}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = self.algorithm.upper()
        if self.lce is None:
            return base
        tag = {"wpm": "WPM", "model_based": "MB"}[self.lce.get("extrapolator", "model_based")]
        return f"{base}-{tag}"

    def with_seed(self, seed: int) -> "SearchConfig":
        return SearchConfig(self.algorithm, self.budget_seconds, seed, dict(self.params),
                            None if self.lce is None else dict(self.lce), self.label)

    def to_dict(self) -> dict:
        d = {"algorithm": self.algorithm, "budget_seconds": self.budget_seconds, "seed": self.seed,
             "params": dict(self.params)}
        if self.lce is not None:
            d["lce"] = dict(self.lce)
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        return cls(d["algorithm"], float(d["budget_seconds"]), int(d.get("seed", 0)), dict(d.get("params", {})),
                   None if d.get("lce") is None else dict(d["lce"]), d.get("label"))


def make_algorithm(config: SearchConfig, space):
    params = dict(config.params)
    if config.algorithm == "rea" and config.lce is not None:
        params.setdefault("batch", LCE_REA_BATCH)
    return ALGORITHMS[config.algorithm](space, config.seed, **params)


def run_search(config: SearchConfig, benchmark: Benchmark) -> RunHistory:
    """Run one trial until the next training call would exceed the budget."""
    session = Session(benchmark, config.budget_seconds, config.seed)
    try:
        if config.algorithm in ("hb", "bohb"):
            proposer = (RandomProposer if config.algorithm == "hb" else TPEProposer)(benchmark.space, config.seed)
            hyperband(session, proposer, **config.params)
        else:
            algo = make_algorithm(config, benchmark.space)
            if config.lce is None:
                run_single_fidelity(session, algo)
            else:
                lce_wrap(session, algo, config.lce.get("extrapolator", "model_based"), config.lce.get("e_few"),
                         config.lce.get("keep_fraction", 0.2))
    except BudgetExhausted:
        pass
    return session.history


__all__ = [
    "ALGORITHM_IDS", "Bananas", "Benchmark", "BudgetExhausted", "LocalSearch", "OracleBenchmark",
    "RandomSearch", "RegularizedEvolution", "RunHistory", "SearchConfig", "Session", "SurrogateBenchmark",
    "bananas_step", "bohb_propose", "checkpoints", "default_e_few", "hb_schedule", "hyperband", "lce_wrap",
    "ls_candidates", "make_algorithm", "mutate_n", "rea_step", "rs_candidates", "run_search", "s_max",
    "sh_rungs", "successive_halving", "top_n",
]
