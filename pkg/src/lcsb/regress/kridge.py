"""Kernel ridge regression with a radial-basis kernel.

Inputs are standardised per column; the length scale defaults to the
median pairwise distance of the (standardised) training inputs.
"""

from __future__ import annotations

import numpy as np

_MEDIAN_SAMPLE = 2000


def sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def median_distance(Z: np.ndarray) -> float:
    Z = Z[:_MEDIAN_SAMPLE]
    d = np.sqrt(sq_dists(Z, Z)[np.triu_indices(len(Z), 1)])
    d = d[d > 0]
    return float(np.median(d)) if len(d) else 1.0


def loo_errors(X, Y, ridges, length_scale=None) -> np.ndarray:
    """Leave-one-out mean squared error of kernel ridge for each ridge value.

    Uses the closed form e_i = [G^-1 y]_i / [G^-1]_ii with G = K + ridge I,
    all ridges from one eigendecomposition of K. The target mean is taken
    as fixed, so the errors are exact up to that centring term.
    """
    probe = KernelRidge(0.0, length_scale)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    probe.x_mean_ = X.mean(axis=0)
    sd = X.std(axis=0)
    probe.x_scale_ = np.where(sd > 0, sd, 1.0)
    Z = probe._standardise(X)
    probe.ell_ = float(length_scale) if length_scale else median_distance(Z)
    lam, Q = np.linalg.eigh(probe.kernel(Z, Z))
    lam = np.maximum(lam, 0.0)
    Yc = Q.T @ (Y - Y.mean(axis=0))
    out = []
    for r in ridges:
        if r <= 0:
            raise ValueError("LOO ridge grid must be positive")
        inv = 1.0 / (lam + r)
        alpha = Q @ (inv[:, None] * Yc)
        diag = (Q * Q) @ inv
        out.append(float(np.mean((alpha / diag[:, None]) ** 2)))
    return np.array(out)


class KernelRidge:
    """Multi-output kernel ridge. Outputs share the kernel matrix, so the
    joint solve is identical to independent per-output fits."""

    def __init__(self, ridge=1e-3, length_scale=None):
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.ridge = float(ridge)
        self.length_scale = length_scale
        self.x_mean_ = self.x_scale_ = self.Z_ = self.alpha_ = self.y_mean_ = None
        self.ell_ = None

    def _standardise(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean_) / self.x_scale_

    def kernel(self, A, B):
        return np.exp(-sq_dists(A, B) / (2.0 * self.ell_**2))

    def fit(self, X, Y) -> "KernelRidge":
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 0, sd, 1.0)
        self.Z_ = self._standardise(X)
        self.ell_ = float(self.length_scale) if self.length_scale else median_distance(self.Z_)
        self.y_mean_ = Y.mean(axis=0)
        K = self.kernel(self.Z_, self.Z_)
        K[np.diag_indices_from(K)] += self.ridge
        self.alpha_ = np.linalg.solve(K, Y - self.y_mean_)
        return self

    def predict(self, X) -> np.ndarray:
        return self.y_mean_ + self.kernel(self._standardise(X), self.Z_) @ self.alpha_

    def state(self) -> dict:
        return {
            "params": np.array([self.ridge, self.ell_]),
            "x_mean": self.x_mean_,
            "x_scale": self.x_scale_,
            "Z": self.Z_,
            "alpha": self.alpha_,
            "y_mean": self.y_mean_,
        }

    @classmethod
    def from_state(cls, s: dict) -> "KernelRidge":
        p = s["params"]
        m = cls(float(p[0]), float(p[1]))
        m.ell_ = float(p[1])
        m.x_mean_, m.x_scale_, m.Z_ = (np.asarray(s[k], dtype=float) for k in ("x_mean", "x_scale", "Z"))
        m.alpha_ = np.asarray(s["alpha"], dtype=float)
        m.y_mean_ = np.asarray(s["y_mean"], dtype=float)
        return m
