"""Learning-curve extrapolation from a partial curve.

Two extrapolators predict the final accuracy of a partly trained
architecture:

- ``wpm``: fit a small pool of parametric curve families by bounded
  least squares and combine their predictions with likelihood-style
  weights.
- ``model_based``: a kernel ridge regressor over the architecture
  encoding, the prefix and a few prefix summary statistics, trained on
  completed architectures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import regress
from .regress.kridge import loo_errors

N_STARTS = 8
MAX_ITER = 200
MIN_RECORDS = 10


# Each family: (param names, lower bounds, upper bounds, log-scaled start dims).
FAMILIES = {
    "pow3": (("a", "b", "c"), (0.0, 1e-6, 1e-3), (1.0, 10.0, 5.0), (1,)),
    "log_power": (("a", "b", "c"), (0.0, 1e-6, 1e-3), (1.0, 1e3, 5.0), (1,)),
    "exp3": (("a", "b", "c"), (0.0, 1e-6, 1e-3), (1.0, 10.0, 5.0), (1,)),
    "janoschek": (("a", "b", "c", "d"), (0.0, 1e-6, 1e-3, 1e-3), (1.0, 1.0, 5.0, 5.0), ()),
}


def family_eval(family: str, params: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate a family for a batch of parameter rows: (S, p) x (n,) -> (S, n)."""
    p = np.atleast_2d(params)
    t = np.asarray(t, dtype=float)[None, :]
    a, b, c = p[:, 0:1], p[:, 1:2], p[:, 2:3]
    if family == "pow3":
        return a - b * t ** (-c)
    if family == "log_power":
        return a / (1.0 + np.exp(-c * np.log(t / b)))
    if family == "exp3":
        return a - b * np.exp(-c * t)
    if family == "janoschek":
        d = p[:, 3:4]
        return a - (a - b) * np.exp(-c * t**d)
    raise ValueError(f"unknown family {family!r}")


def family_jacobian(family: str, params: np.ndarray, t: np.ndarray) -> np.ndarray:
    """d f / d params, shape (S, n, p)."""
    p = np.atleast_2d(params)
    t = np.asarray(t, dtype=float)[None, :]
    a, b, c = p[:, 0:1], p[:, 1:2], p[:, 2:3]
    logt = np.log(t)
    if family == "pow3":
        g = t ** (-c)
        cols = [np.ones_like(g), -g, b * g * logt]
    elif family == "log_power":
        u = np.exp(-c * np.log(t / b))
        den = 1.0 + u
        df_du = -a / den**2
        cols = [1.0 / den, df_du * u * c / b, -df_du * u * np.log(t / b)]
    elif family == "exp3":
        g = np.exp(-c * t)
        cols = [np.ones_like(g), -g, b * t * g]
    elif family == "janoschek":
        d = p[:, 3:4]
        td = t**d
        g = np.exp(-c * td)
        cols = [1.0 - g, g, (a - b) * td * g, (a - b) * g * c * td * logt]
    else:
        raise ValueError(f"unknown family {family!r}")
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _starts(family: str) -> np.ndarray:
    names, lo, hi, logdims = FAMILIES[family]
    u = qmc.Halton(d=len(names), scramble=True, seed=12345).random(N_STARTS)
    lo, hi = np.array(lo), np.array(hi)
    x = lo + u * (hi - lo)
    for j in logdims:
        x[:, j] = np.exp(np.log(lo[j]) + u[:, j] * (np.log(hi[j]) - np.log(lo[j])))
    return x


_START_CACHE = {f: _starts(f) for f in FAMILIES}


def _lm_batch(family: str, t: np.ndarray, y: np.ndarray, x0: np.ndarray):
    """Projected Levenberg-Marquardt run on every start at once."""
    _, lo, hi, _ = FAMILIES[family]
    lo, hi = np.array(lo), np.array(hi)
    x = np.clip(x0.copy(), lo, hi)
    n_par = x.shape[1]
    lam = np.full(len(x), 1e-2)
    with np.errstate(all="ignore"):
        r = family_eval(family, x, t) - y
        cost = np.where(np.all(np.isfinite(r), axis=1), np.sum(r * r, axis=1), np.inf)
        eye = np.eye(n_par)
        for _ in range(MAX_ITER):
            J = family_jacobian(family, x, t)
            J = np.where(np.isfinite(J), J, 0.0)
            rr = np.where(np.isfinite(r), r, 0.0)
            JtJ = np.einsum("snp,snq->spq", J, J)
            g = np.einsum("snp,sn->sp", J, rr)
            diag = np.einsum("spp->sp", JtJ)
            A = JtJ + lam[:, None, None] * (diag[:, :, None] * eye + 1e-12 * eye)
            try:
                step = np.linalg.solve(A, -g[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = -g / np.maximum(diag, 1e-12)
            x_new = np.clip(x + step, lo, hi)
            r_new = family_eval(family, x_new, t) - y
            c_new = np.where(np.all(np.isfinite(r_new), axis=1), np.sum(r_new * r_new, axis=1), np.inf)
            better = c_new < cost
            rel = np.where(better, (cost - c_new) / np.maximum(cost, 1e-300), 0.0)
            x = np.where(better[:, None], x_new, x)
            r = np.where(better[:, None], r_new, r)
            cost = np.where(better, c_new, cost)
            lam = np.where(better, np.maximum(lam / 3.0, 1e-12), np.minimum(lam * 2.0, 1e12))
            if np.all((better & (rel < 1e-12)) | (~better & (lam >= 1e12)) | (cost < 1e-28)):
                break
    return x, cost


@dataclass(frozen=True)
class ParametricFit:
    family: str
    params: np.ndarray
    rmse: float
    fallback: bool = False

    def predict(self, t) -> np.ndarray:
        return family_eval(self.family, self.params, np.atleast_1d(np.asarray(t, dtype=float)))[0]


def fit_parametric(prefix, family: str) -> ParametricFit:
    """Best of N_STARTS bounded LM fits of `family` to the prefix (epochs 1..n)."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    y = np.asarray(prefix, dtype=float)
    n_par = len(FAMILIES[family][0])
    if len(y) < n_par + 1:
        raise ValueError(f"{family} needs a prefix of at least {n_par + 1} epochs, got {len(y)}")
    t = np.arange(1, len(y) + 1, dtype=float)
    x, cost = _lm_batch(family, t, y, _START_CACHE[family])
    best = int(np.argmin(cost))
    if not np.isfinite(cost[best]):
        return ParametricFit(family, np.full(n_par, np.nan), np.inf, fallback=True)
    return ParametricFit(family, x[best], float(np.sqrt(cost[best] / len(y))))


def wpm_weights(rmses, n: int) -> np.ndarray:
    """w_f proportional to exp(-rmse_f^2 n / (2 s^2)), s = median rmse."""
    r = np.asarray(rmses, dtype=float)
    ok = np.isfinite(r)
    w = np.zeros(len(r))
    if not ok.any():
        return w
    s = max(float(np.median(r[ok])), 1e-8)
    z = -(r[ok] ** 2 - np.min(r[ok] ** 2)) * n / (2.0 * s * s)
    e = np.exp(z)
    w[ok] = e / e.sum()
    return w


def wpm_fits(prefix) -> list[ParametricFit]:
    return [fit_parametric(prefix, f) for f in FAMILIES]


def extrapolate_wpm(prefix, e_max: int) -> float:
    """Weighted parametric-ensemble prediction of the accuracy at e_max."""
    y = np.asarray(prefix, dtype=float)
    if len(y) < 5:
        raise ValueError("WPM needs a prefix of at least 5 epochs")
    fits = wpm_fits(y)
    w = wpm_weights([f.rmse for f in fits], len(y))
    if w.sum() == 0:
        return float(np.clip(y[-1], 0.0, 1.0))
    preds = np.array([f.predict(e_max)[0] if w_i > 0 else 0.0 for f, w_i in zip(fits, w)])
    if not np.all(np.isfinite(preds[w > 0])):
        return float(np.clip(y[-1], 0.0, 1.0))
    return float(np.clip(np.dot(w, preds), 0.0, 1.0))


# -- model-based extrapolator -----------------------------------------------

def prefix_features(prefix) -> np.ndarray:
    """Prefix values plus last value, best value, mean of the last 5 and
    mean first difference."""
    p = np.atleast_2d(np.asarray(prefix, dtype=float))
    diff = np.diff(p, axis=1).mean(axis=1) if p.shape[1] > 1 else np.zeros(len(p))
    stats = np.column_stack([p[:, -1], p.max(axis=1), p[:, -5:].mean(axis=1), diff])
    return np.hstack([p, stats])


@dataclass(frozen=True, eq=False)
class ExtrapolatorModel:
    kind: str
    e_few: int
    regressor: regress.FittedRegressor | None = None

    def predict(self, encodings, prefixes) -> np.ndarray:
        P = np.atleast_2d(np.asarray(prefixes, dtype=float))
        if P.shape[1] != self.e_few:
            raise ValueError(f"prefix length {P.shape[1]} != trained length {self.e_few}")
        X = np.hstack([np.atleast_2d(np.asarray(encodings, dtype=float)), prefix_features(P)])
        # the regressor learns the gain still to come after the last observed epoch
        return np.clip(P[:, -1] + self.regressor.predict(X)[:, 0], 0.0, 1.0)


RIDGE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


def select_ridge(X, y, grid=RIDGE_GRID) -> float:
    """Grid ridge with the smallest closed-form leave-one-out error."""
    return float(grid[int(np.argmin(loo_errors(X, y, grid)))])


def fit_model_extrapolator(history, config: regress.RegressorConfig | None = None) -> ExtrapolatorModel:
    """Fit on (encoding, prefix, final accuracy) triples.

    Without a `config` the kridge ridge is chosen by leave-one-out error:
    final accuracies are noisy, and the right amount of smoothing depends
    on how noisy they are relative to the spread between architectures.
    """
    if len(history) < MIN_RECORDS:
        raise ValueError(f"model-based extrapolation needs at least {MIN_RECORDS} records, got {len(history)}")
    lengths = {len(p) for _, p, _ in history}
    if len(lengths) != 1:
        raise ValueError("all prefixes must share one length")
    enc = np.array([np.asarray(getattr(e, "values", e), dtype=float) for e, _, _ in history])
    P = np.array([p for _, p, _ in history], dtype=float)
    final = np.array([f for _, _, f in history], dtype=float)
    X = np.hstack([enc, prefix_features(P)])
    target = final - P[:, -1]
    if config is None:
        config = regress.RegressorConfig("kridge", {"ridge": select_ridge(X, target)})
    reg = regress.fit(config, X, target)
    return ExtrapolatorModel("model_based", P.shape[1], reg)


def extrapolate_model(model: ExtrapolatorModel, encoding, prefix) -> float:
    return float(model.predict([np.asarray(getattr(encoding, "values", encoding))], [prefix])[0])
