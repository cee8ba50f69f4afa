"""Surrogate evaluation: R^2, Kendall tau, KL divergence and spike anomalies."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .core import CurveDataset, substream

VAR_FLOOR = 1e-8
METRIC_COLUMNS = ("Avg. R²", "Final R²", "Avg. KT", "Final KT", "Avg. KL", "Final KL")
MISSING = "-"


def kendall_tau(pred, truth) -> float:
    """(P - Q) / (P + Q) over strictly concordant / discordant pairs.

    Pairs tied in either argument count in neither P nor Q.
    """
    x = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(truth, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError("kendall_tau inputs differ in length")
    if len(x) < 2:
        raise ValueError("kendall_tau needs at least 2 values")
    p = q = 0
    step = max(1, 4_000_000 // len(x))
    for a in range(0, len(x) - 1, step):
        b = min(a + step, len(x) - 1)
        rows = np.arange(a, b)
        s = np.sign(x[rows, None] - x[None, :]) * np.sign(y[rows, None] - y[None, :])
        upper = np.arange(len(x))[None, :] > rows[:, None]
        p += int(np.count_nonzero((s > 0) & upper))
        q += int(np.count_nonzero((s < 0) & upper))
    if p + q == 0:
        raise ValueError("kendall_tau undefined: every pair is tied")
    return (p - q) / (p + q)


def r_squared(pred, truth) -> float:
    x = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(truth, dtype=float).ravel()
    if len(x) != len(y) or len(y) < 2:
        raise ValueError("r_squared needs two equal-length vectors of length >= 2")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("r_squared undefined for constant truth")
    return 1.0 - float(np.sum((y - x) ** 2)) / ss_tot


def _moments(curves):
    c = np.asarray(curves, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    if len(c) < 2:
        raise ValueError("KL divergence needs at least 2 curves on each side")
    return c.mean(axis=0), np.maximum(c.var(axis=0, ddof=1), VAR_FLOOR)


def kl_divergence(true_curves, pred_curves) -> float:
    """KL(true || pred) between diagonal Gaussians fitted per epoch,
    normalised by the number of epochs E:

        (1 / 2E) [log |S_p| / |S_t| - E + d^T S_p^{-1} d + tr(S_p^{-1} S_t)]

    Inputs are (n_curves, E) arrays; a 1-D input is read as E = 1.
    """
    mu_t, var_t = _moments(true_curves)
    mu_p, var_p = _moments(pred_curves)
    if mu_t.shape != mu_p.shape:
        raise ValueError("curve sets differ in length")
    e = len(mu_t)
    d = mu_t - mu_p
    val = np.sum(np.log(var_p) - np.log(var_t)) - e + np.sum(d * d / var_p) + np.sum(var_t / var_p)
    return float(val / (2 * e))


def spike_statistic(curves) -> np.ndarray:
    c = np.atleast_2d(np.asarray(curves, dtype=float))
    return c.max(axis=1) - c[:, -1]


def spike_threshold(real_curves) -> float:
    """Smallest per-curve statistic max(y) - y[E] that fewer than 5% of
    curves strictly exceed.

    With n curves this is the order statistic of rank n - ceil(n / 20) + 1
    (nearest rank, 1-based); at most ceil(n / 20) - 1 curves lie above it.
    """
    s = np.sort(spike_statistic(real_curves))
    n = len(s)
    if n < 20:
        raise ValueError("spike threshold needs at least 20 curves")
    return float(s[n - -(-n // 20)])


def spike_rate(curves, x: float) -> float:
    if x < 0:
        raise ValueError("spike threshold must be nonnegative")
    s = spike_statistic(curves)
    return float(np.mean(s > x)) if len(s) else 0.0


@dataclass
class EvalReport:
    avg_r2: float
    final_r2: float
    avg_kt: float
    final_kt: float
    avg_kl: float | None
    final_kl: float | None
    spike_threshold: float | None
    spike_rate_real: float | None
    spike_rate_surrogate: float | None
    n_test: int
    seeds_per_arch: int
    baselines: list = field(default_factory=list)  # rows of (label, avg_kt, final_kt)

    def metric_row(self) -> list:
        return [self.avg_r2, self.final_r2, self.avg_kt, self.final_kt, self.avg_kl, self.final_kl]

    def to_csv(self, label: str = "surrogate") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Model", *METRIC_COLUMNS])
        fmt = lambda v: MISSING if v is None else "%.6f" % v
        w.writerow([label, *map(fmt, self.metric_row())])
        for b in self.baselines:
            w.writerow([b["label"], MISSING, MISSING, fmt(b["avg_kt"]), fmt(b["final_kt"]), MISSING, MISSING])
        return buf.getvalue()

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({k: (MISSING if v is None else v) for k, v in d.items()}, indent=2, sort_keys=True)


def _per_epoch(metric, pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    return np.array([metric(pred[:, j], truth[:, j]) for j in range(truth.shape[1])])


def evaluate_surrogate(model, test: CurveDataset, augmentation_source: Callable | str | None = None,
                       kl_seeds: int = 10, seed: int = 0) -> EvalReport:
    """Table-style evaluation of a surrogate on held-out architectures.

    ``augmentation_source`` supplies the partial accuracies an augmented
    surrogate needs: a callable arch -> values, or "test" to read them from
    each architecture's first test curve.
    """
    groups = test.groups()
    archs = list(groups)
    if len(archs) < 2:
        raise ValueError("evaluation needs at least 2 test architectures")
    truth_means = np.array([test.curves[groups[a]].mean(axis=0) for a in archs])
    n_seeds = min(len(v) for v in groups.values())

    aug = None
    if model.n_aug:
        epochs = [e - 1 for e in model.config.aug_epochs()]
        if augmentation_source is None or augmentation_source == "test":
            aug = np.array([test.curves[groups[a][0], epochs] for a in archs])
        else:
            aug = np.array([augmentation_source(a) for a in archs], dtype=float)
    pred = model.mean_curves(archs, aug)
    r2 = _per_epoch(r_squared, pred, truth_means)
    kt = _per_epoch(kendall_tau, pred, truth_means)

    rng = substream(seed, "evaluate_surrogate")
    query_seeds = rng.integers(0, 2**31 - 1, size=(len(archs), kl_seeds if n_seeds >= 2 else 1))
    noisy = []
    for i, a in enumerate(archs):
        a_aug = None if aug is None else np.repeat(aug[i:i + 1], query_seeds.shape[1], axis=0)
        noisy.append(model.noisy_curves([a] * query_seeds.shape[1], query_seeds[i], a_aug))
    avg_kl = final_kl = None
    if n_seeds >= 2:
        kls = [kl_divergence(test.curves[groups[a]], noisy[i]) for i, a in enumerate(archs)]
        fkl = [kl_divergence(test.curves[groups[a], -1], noisy[i][:, -1]) for i, a in enumerate(archs)]
        avg_kl, final_kl = float(np.mean(kls)), float(np.mean(fkl))

    x = rate_real = rate_sur = None
    if len(test) >= 20:
        x = spike_threshold(test.curves)
        rate_real = spike_rate(test.curves, x)
        rate_sur = spike_rate(np.vstack(noisy), x)

    baselines = []
    for s in range(1, n_seeds):
        part = np.array([test.curves[groups[a][:s]].mean(axis=0) for a in archs])
        held = np.array([test.curves[groups[a][s:]].mean(axis=0) for a in archs])
        bkt = _per_epoch(kendall_tau, part, held)
        label = "ground truth (1 seed)" if s == 1 else f"ground truth (mean of {s} seeds)"
        baselines.append({"label": label, "avg_kt": float(bkt.mean()), "final_kt": float(bkt[-1])})

    return EvalReport(float(r2.mean()), float(r2[-1]), float(kt.mean()), float(kt[-1]), avg_kl, final_kl,
                      x, rate_real, rate_sur, len(archs), n_seeds, baselines)
