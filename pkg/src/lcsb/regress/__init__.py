"""Pluggable multi-output regressors: Encoding -> real vector.

Three backends share one interface. Multi-output targets are handled by
one independent model per output coordinate (kernel ridge solves all
coordinates jointly, which is algebraically the same thing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Encoding
from .gbt import GBTRegressor
from .kridge import KernelRidge
from .mlp import MLPRegressor

BACKENDS = ("gbt", "mlp", "kridge")

DEFAULT_PARAMS = {
    "gbt": {"n_trees": 100, "max_depth": 6, "learning_rate": 0.1, "min_samples_leaf": 5},
    "mlp": {"hidden": 64, "learning_rate": 0.001, "epochs": 200, "batch": 32},
    "kridge": {"ridge": 1e-3, "length_scale": None},
}


@dataclass(frozen=True)
class RegressorConfig:
    backend: str = "gbt"
    params: dict = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown regressor backend {self.backend!r}; expected one of {BACKENDS}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.backend])
        if unknown:
            raise ValueError(f"unknown {self.backend} parameters: {sorted(unknown)}")
        p = self.resolved()
        if p.get("learning_rate", 1.0) <= 0:
            raise ValueError("learning_rate must be positive")
        if p.get("max_depth", 1) < 1:
            raise ValueError("max_depth must be >= 1")
        if p.get("ridge", 0.0) < 0:
            raise ValueError("ridge must be nonnegative")

    def resolved(self) -> dict:
        return {**DEFAULT_PARAMS[self.backend], **self.params}

    def to_dict(self) -> dict:
        return {"backend": self.backend, "params": dict(self.params), "rng_seed": self.rng_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorConfig":
        return cls(d.get("backend", "gbt"), dict(d.get("params", {})), int(d.get("rng_seed", 0)))


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, Encoding):
        return X.values[None, :]
    if len(X) and isinstance(X[0], Encoding):
        return np.array([e.values for e in X])
    return np.atleast_2d(np.asarray(X, dtype=float))


class FittedRegressor:
    """Immutable after fit; predict accepts (n, d_in) or a single vector."""

    def __init__(self, backend: str, models: list, d_in: int, d_out: int):
        self.backend = backend
        self.models = models
        self.d_in = d_in
        self.d_out = d_out

    def predict(self, X) -> np.ndarray:
        single = isinstance(X, Encoding) or np.ndim(X) == 1 and not (len(X) and isinstance(X[0], Encoding))
        M = _as_matrix(X)
        if M.shape[1] != self.d_in:
            raise ValueError(f"input dimension {M.shape[1]} != fitted dimension {self.d_in}")
        if self.backend == "kridge":
            out = self.models[0].predict(M)
        else:
            out = np.column_stack([m.predict(M) for m in self.models])
        return out[0] if single else out

    def feature_importance(self) -> np.ndarray:
        """Total squared-error reduction per input feature, normalised to sum to 1."""
        if self.backend != "gbt":
            raise ValueError(f"feature importance is only defined for gbt, not {self.backend}")
        g = np.sum([m.importance_gain_ for m in self.models], axis=0)
        total = g.sum()
        return g / total if total > 0 else np.zeros(self.d_in)

    def state(self) -> tuple[dict, dict]:
        """(JSON-able metadata, named arrays) for the surrogate container."""
        arrays = {}
        for i, m in enumerate(self.models):
            for k, v in m.state().items():
                arrays[f"{i}.{k}"] = np.asarray(v)
        meta = {"backend": self.backend, "d_in": self.d_in, "d_out": self.d_out, "n_models": len(self.models)}
        return meta, arrays

    @classmethod
    def from_state(cls, meta: dict, arrays: dict) -> "FittedRegressor":
        kind = {"gbt": GBTRegressor, "mlp": MLPRegressor, "kridge": KernelRidge}[meta["backend"]]
        models = []
        for i in range(meta["n_models"]):
            prefix = f"{i}."
            models.append(kind.from_state({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}))
        return cls(meta["backend"], models, int(meta["d_in"]), int(meta["d_out"]))


def fit(config: RegressorConfig, X, Y) -> FittedRegressor:
    Xm = _as_matrix(X)
    Ym = np.asarray(Y, dtype=float)
    if Ym.ndim == 1:
        Ym = Ym[:, None]
    if len(Xm) != len(Ym):
        raise ValueError(f"{len(Xm)} inputs but {len(Ym)} targets")
    if len(Xm) < 2:
        raise ValueError("need at least 2 training rows")
    if not (np.all(np.isfinite(Ym)) and np.all(np.isfinite(Xm))):
        raise ValueError("non-finite training data")
    p = config.resolved()
    if config.backend == "kridge":
        models = [KernelRidge(p["ridge"], p["length_scale"]).fit(Xm, Ym)]
    elif config.backend == "gbt":
        models = [GBTRegressor(**p).fit(Xm, Ym[:, j]) for j in range(Ym.shape[1])]
    else:
        models = [MLPRegressor(seed=_output_seed(config.rng_seed, j), **p).fit(Xm, Ym[:, j])
                  for j in range(Ym.shape[1])]
    return FittedRegressor(config.backend, models, Xm.shape[1], Ym.shape[1])


def _output_seed(seed: int, j: int) -> int:
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(j,)).generate_state(1)[0])


def predict(model: FittedRegressor, x) -> np.ndarray:
    return model.predict(x)


def feature_importance(model: FittedRegressor) -> np.ndarray:
    return model.feature_importance()


__all__ = ["RegressorConfig", "FittedRegressor", "fit", "predict", "feature_importance", "BACKENDS",
           "GBTRegressor", "MLPRegressor", "KernelRidge"]
