"""One-hidden-layer ReLU network trained with minibatch SGD on squared loss."""

from __future__ import annotations

import numpy as np


def init_params(d_in: int, hidden: int, rng: np.random.Generator) -> dict:
    """He-normal weights, zero biases."""
    return {
        "W1": rng.standard_normal((d_in, hidden)) * np.sqrt(2.0 / max(d_in, 1)),
        "b1": np.zeros(hidden),
        "W2": rng.standard_normal(hidden) * np.sqrt(2.0 / hidden),
        "b2": np.zeros(1),
    }


def forward(params: dict, X: np.ndarray) -> np.ndarray:
    h = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return h @ params["W2"] + params["b2"][0]


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Mean squared error 0.5 * mean((f(x) - y)^2) and its gradient."""
    z = X @ params["W1"] + params["b1"]
    h = np.maximum(z, 0.0)
    out = h @ params["W2"] + params["b2"][0]
    err = out - y
    n = len(y)
    loss = 0.5 * float(err @ err) / n
    g_out = err / n
    g_h = np.outer(g_out, params["W2"]) * (z > 0)
    grads = {
        "W2": h.T @ g_out,
        "b2": np.array([g_out.sum()]),
        "W1": X.T @ g_h,
        "b1": g_h.sum(axis=0),
    }
    return loss, grads


class MLPRegressor:
    """Single-output network; targets are standardised before training."""

    def __init__(self, hidden=64, learning_rate=0.001, epochs=200, batch=32, seed=0):
        if learning_rate <= 0 or hidden < 1 or epochs < 0 or batch < 1:
            raise ValueError("invalid mlp parameters")
        self.hidden = int(hidden)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.batch = int(batch)
        self.seed = int(seed)
        self.params_: dict | None = None
        self.y_mean_ = 0.0
        self.y_scale_ = 1.0

    def fit(self, X, y) -> "MLPRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        self.y_mean_ = float(y.mean())
        sd = float(y.std())
        self.y_scale_ = sd if sd > 0 else 1.0
        t = (y - self.y_mean_) / self.y_scale_
        p = init_params(X.shape[1], self.hidden, rng)
        n = len(X)
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            for a in range(0, n, self.batch):
                b = perm[a:a + self.batch]
                _, g = loss_and_grad(p, X[b], t[b])
                for k in p:
                    p[k] -= self.learning_rate * g[k]
        self.params_ = p
        return self

    def predict(self, X) -> np.ndarray:
        return self.y_mean_ + self.y_scale_ * forward(self.params_, np.asarray(X, dtype=float))

    def state(self) -> dict:
        return {
            "params": np.array([self.hidden, self.learning_rate, self.epochs, self.batch, self.seed,
                                self.y_mean_, self.y_scale_]),
            **{k: v for k, v in self.params_.items()},
        }

    @classmethod
    def from_state(cls, s: dict) -> "MLPRegressor":
        p = s["params"]
        m = cls(int(p[0]), float(p[1]), int(p[2]), int(p[3]), int(p[4]))
        m.y_mean_, m.y_scale_ = float(p[5]), float(p[6])
        m.params_ = {k: np.asarray(s[k], dtype=float) for k in ("W1", "b1", "W2", "b2")}
        return m
