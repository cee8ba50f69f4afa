"""Residual extraction and the three noise models of the surrogate.

- ``std``: independent N(0, sigma_j^2) per epoch, with sigma_j the
  zero-centred root mean square of the residuals (divisor N - 1).
- ``gkde``: a diagonal Gaussian KDE over stored residual vectors, sampled
  by resampling a row and perturbing it with N(0, h_j^2).
- ``window``: a regressor predicting the per-epoch noise level of an
  architecture from its encoding and predicted SVD coefficients.

Every kind winsorizes samples at three standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regress
from .core import CurveDataset
from .lowrank import SvdBasis, reconstruct

KINDS = ("std", "gkde", "window")
WINDOW_SIZE = 10
BANDWIDTH_FLOOR = 1e-6
CLIP_SIGMAS = 3.0
DEFAULT_WINDOW_REGRESSOR = regress.RegressorConfig("kridge", {"ridge": 1e-2})


@dataclass(frozen=True, eq=False)
class ResidualSet:
    residuals: np.ndarray  # (N, E_max)
    encodings: np.ndarray | None = None  # (N, d)

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.residuals, dtype=float))
        if not np.all(np.isfinite(r)):
            raise ValueError("residuals must be finite")
        object.__setattr__(self, "residuals", r)
        if self.encodings is not None:
            e = np.asarray(self.encodings, dtype=float)
            if len(e) != len(r):
                raise ValueError("encodings and residuals differ in length")
            object.__setattr__(self, "encodings", e)

    def __len__(self):
        return len(self.residuals)


def extract_residuals(dataset: CurveDataset, basis: SvdBasis) -> ResidualSet:
    """eps_i = y_i - (d o c)(y_i) for every record."""
    if basis.e_max != dataset.space.e_max:
        raise ValueError(f"basis E_max {basis.e_max} != dataset E_max {dataset.space.e_max}")
    return ResidualSet(dataset.curves - reconstruct(dataset.curves, basis), dataset.encodings)


def window_targets(residuals: np.ndarray, size: int = WINDOW_SIZE) -> np.ndarray:
    """Per-record, per-epoch sample std (ddof=1) over epochs j-4 .. j+5.

    Windows are clamped at the curve ends rather than padded.
    """
    r = np.atleast_2d(residuals)
    n, e = r.shape
    before, after = (size - 1) // 2, size // 2
    lo = np.clip(np.arange(e) - before, 0, e)
    hi = np.clip(np.arange(e) + after + 1, 0, e)
    # cumulative sums give every window's moments in O(N * E)
    c1 = np.concatenate([np.zeros((n, 1)), np.cumsum(r, axis=1)], axis=1)
    c2 = np.concatenate([np.zeros((n, 1)), np.cumsum(r * r, axis=1)], axis=1)
    m = (hi - lo).astype(float)
    s1 = c1[:, hi] - c1[:, lo]
    s2 = c2[:, hi] - c2[:, lo]
    var = (s2 - s1 * s1 / m) / np.maximum(m - 1, 1)
    return np.sqrt(np.maximum(var, 0.0))


class NoiseModel:
    """Fitted noise model; use fit_noise to construct."""

    def __init__(self, kind: str, e_max: int, sigma=None, residuals=None, sigma_hat=None, bandwidth=None,
                 regressor: regress.FittedRegressor | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown noise kind {kind!r}")
        self.kind = kind
        self.e_max = e_max
        self.sigma = None if sigma is None else np.asarray(sigma, dtype=float)
        self.residuals = None if residuals is None else np.asarray(residuals, dtype=float)
        self.sigma_hat = None if sigma_hat is None else np.asarray(sigma_hat, dtype=float)
        self.bandwidth = None if bandwidth is None else np.asarray(bandwidth, dtype=float)
        self.regressor = regressor

    def predict_sigma(self, features=None, coeffs=None) -> np.ndarray:
        """Per-epoch noise scale used for sampling (and for winsorizing)."""
        if self.kind == "std":
            return self.sigma
        if self.kind == "gkde":
            return np.sqrt(self.sigma_hat**2 + self.bandwidth**2)
        if features is None or coeffs is None:
            raise ValueError("window noise needs architecture features and predicted coefficients")
        x = np.concatenate([np.asarray(features, dtype=float).ravel(), np.asarray(coeffs, dtype=float).ravel()])
        return np.maximum(self.regressor.predict(x), 0.0)

    def sample(self, features=None, coeffs=None, seed=0) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        z = rng.standard_normal(self.e_max)
        bound = CLIP_SIGMAS * self.predict_sigma(features, coeffs)
        if self.kind == "gkde":
            row = self.residuals[int(rng.integers(len(self.residuals)))]
            eps = row + z * self.bandwidth
        else:
            eps = z * self.predict_sigma(features, coeffs)
        return np.clip(eps, -bound, bound)

    def state(self) -> tuple[dict, dict]:
        meta = {"kind": self.kind, "e_max": self.e_max}
        arrays = {}
        for name in ("sigma", "residuals", "sigma_hat", "bandwidth"):
            if getattr(self, name) is not None:
                arrays[name] = getattr(self, name)
        if self.regressor is not None:
            rmeta, rarr = self.regressor.state()
            meta["regressor"] = rmeta
            arrays.update({f"reg.{k}": v for k, v in rarr.items()})
        return meta, arrays

    @classmethod
    def from_state(cls, meta: dict, arrays: dict) -> "NoiseModel":
        reg = None
        if "regressor" in meta:
            reg = regress.FittedRegressor.from_state(
                meta["regressor"], {k[4:]: v for k, v in arrays.items() if k.startswith("reg.")})
        return cls(meta["kind"], int(meta["e_max"]), arrays.get("sigma"), arrays.get("residuals"),
                   arrays.get("sigma_hat"), arrays.get("bandwidth"), reg)


def fit_noise(kind: str, residual_set: ResidualSet, predicted_coeffs=None,
              regressor_config: regress.RegressorConfig = DEFAULT_WINDOW_REGRESSOR) -> NoiseModel:
    if kind not in KINDS:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {KINDS}")
    r = residual_set.residuals
    n, e = r.shape
    if n < 2:
        raise ValueError("fitting a noise model needs at least 2 residual rows")
    if kind == "std":
        return NoiseModel(kind, e, sigma=np.sqrt((r * r).sum(axis=0) / (n - 1)))
    if kind == "gkde":
        sigma_hat = r.std(axis=0, ddof=1)
        h = np.maximum(sigma_hat * n ** (-1.0 / (e + 4)), BANDWIDTH_FLOOR)
        return NoiseModel(kind, e, residuals=r.copy(), sigma_hat=sigma_hat, bandwidth=h)
    if residual_set.encodings is None or predicted_coeffs is None:
        raise ValueError("window noise needs encodings and predicted coefficients")
    X = np.hstack([residual_set.encodings, np.asarray(predicted_coeffs, dtype=float).reshape(n, -1)])
    reg = regress.fit(regressor_config, X, window_targets(r))
    return NoiseModel(kind, e, regressor=reg)


def sample_noise(model: NoiseModel, arch_features=None, predicted_coeffs=None, seed=0) -> np.ndarray:
    return model.sample(arch_features, predicted_coeffs, seed)
